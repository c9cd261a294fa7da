"""Acceptance suite: one test per criterion, each reported as a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected in the terminal summary.
"""

import itertools
import time

import numpy as np
import pytest

from nsqstab.blocks import (BlockStructure, Detuning, GainMatrix, PlantMatrix, assemble_AEK,
                            count_reduced_selections, enumerate_full_selections, enumerate_reduced_selections,
                            full_squared_matrices)
from nsqstab.conjecture import Distribution, InstanceSpec, reverify_candidate, run_search
from nsqstab.dominance import find_balance_D
from nsqstab.dus import Sampler, check_condition_at, lemma4_pipeline, simulate_static_loop, theorem2_check
from nsqstab.gamma import RatioTable, build_gamma, verify_aggregation_identity, verify_ratio_property
from nsqstab.linalg import positive_stable
from nsqstab.lyapunov import Status, find_common_D, vl_margin


def random_structure(rng, max_m, max_p):
    m = int(rng.integers(1, max_m + 1))
    return BlockStructure(tuple(int(x) for x in rng.integers(1, max_p + 1, size=m)))


def lifted_plant(rng, s):
    """Uniform entries with each group's own-row entries lifted, so certificates are common."""
    owner = np.repeat(np.arange(s.m), s.p)
    X = rng.uniform(-1, 1, size=(s.m, s.n))
    X[owner, np.arange(s.n)] += rng.uniform(0, s.m, size=s.n)
    return PlantMatrix(s, X)


@pytest.mark.criterion("Enumeration: 12 selections for (2,3,2), 3 reduced k=1 for (2,1), lex order locked")
def test_enumeration():
    s = BlockStructure((2, 3, 2))
    sels = enumerate_full_selections(s)
    assert len(sels) == 12
    assert [x.choice for x in sels] == list(itertools.product(range(2), range(3), range(2)))
    assert sels[0].choice == (0, 0, 0) and sels[-1].choice == (1, 2, 1)
    red = enumerate_reduced_selections(BlockStructure((2, 1)), 1)
    assert count_reduced_selections(BlockStructure((2, 1)), 1) == 3
    assert [(x.active, x.choice) for x in red] == [((0,), (0,)), ((0,), (1,)), ((1,), (0,))]


@pytest.mark.criterion("Common-D: {I2} FEASIBLE margin 2; mirror pair INFEASIBLE with upper bound <= 1e-6; < 1 s each")
def test_common_d():
    t = time.perf_counter()
    v = find_common_D([np.eye(2)])
    assert time.perf_counter() - t < 1.0
    assert v.status is Status.FEASIBLE
    assert v.certificate.margin == pytest.approx(2.0, abs=1e-6)

    pair = [np.array([[1., 10.], [0., 1.]]), np.array([[1., 0.], [10., 1.]])]
    t = time.perf_counter()
    v = find_common_D(pair)
    assert time.perf_counter() - t < 1.0
    assert v.status is Status.INFEASIBLE
    assert v.upper_bound <= 1e-6
    # 2x2 oracle: M D + D M^T > 0 needs d1 > 25 d2 for the first and d2 > 25 d1 for the second
    for d1 in np.logspace(-3, 3, 61):
        d = np.array([d1, 1.0])
        ok = [np.linalg.eigvalsh(M * d + (M * d).T).min() > 0 for M in pair]
        assert ok == [d1 > 25, d1 < 1 / 25]


@pytest.mark.criterion("Certificate pipeline: 200 common-D instances, 100 detunings + falsifier budget 500, no margin < -1e-8, < 60 s")
def test_certificate_pipeline_suite():
    rng = np.random.default_rng(4)
    t = time.perf_counter()
    accepted, worst = 0, np.inf
    while accepted < 200:
        s = random_structure(rng, 3, 3)
        A = lifted_plant(rng, s)
        res = lemma4_pipeline(A, sampler=Sampler(n_samples=100, seed=accepted), falsify_budget=500)
        if res.certificate.status is not Status.FEASIBLE:
            continue
        accepted += 1
        assert res.dus.samples_tested >= 100
        worst = min(worst, res.dus.worst_margin)
        assert res.dus.worst_margin >= -1e-8, (s.p, A.data.tolist())
        assert res.falsifier_witness is None or res.falsifier_witness.margin >= -1e-8
    assert time.perf_counter() - t < 60.0
    assert worst >= -1e-8


@pytest.mark.criterion("Gamma identity: residual <= 1e-10 on 500 instances; ratio law to 1e-12 on 1000 tables")
def test_gamma_identity():
    rng = np.random.default_rng(5)
    for _ in range(500):
        s = random_structure(rng, 4, 3)
        A = PlantMatrix(s, rng.normal(size=(s.m, s.n)))
        K = GainMatrix(s, rng.uniform(0.1, 2.0, size=s.n))
        eps = rng.uniform(0.1, 2.0, size=s.n) * (rng.random(s.n) > 0.25)
        for i in range(s.m):  # keep every group in service
            sl = s.group_slice(i)
            if not np.any(eps[sl] > 0):
                eps[sl.start] = 1.0
        assert verify_aggregation_identity(A, Detuning(s, eps), K).residual <= 1e-10

    for _ in range(1000):
        s = random_structure(rng, 4, 3)
        kappa = []
        for pi in s.p:
            row = 10.0 ** rng.uniform(-3, 3, size=pi)
            row[0] = 1.0
            kappa.append(row)
        table = RatioTable(s, tuple(kappa))
        gamma = build_gamma(table)
        assert verify_ratio_property(gamma, table, rtol=1e-12)
        # oracle: payoff of card (k, j) by explicit enumeration of the tensor
        for k in range(s.m):
            pay = np.zeros(s.p[k])
            for z in itertools.product(*(range(pi) for pi in s.p)):
                pay[z[k]] += gamma.values[z]
            np.testing.assert_allclose(pay / pay[0], kappa[k], rtol=1e-12, atol=0)


@pytest.mark.criterion("Dominance implies VL on 100 balance-feasible instances; [[1,3],[0,1]] separates")
def test_dominance_implies_vl():
    rng = np.random.default_rng(6)
    found = 0
    while found < 100:
        s = random_structure(rng, 3, 3)
        mats = full_squared_matrices(lifted_plant(rng, s))
        rep = find_balance_D(mats)
        if rep.verdict.status is not Status.FEASIBLE:
            continue
        found += 1
        d = np.array(rep.verdict.certificate.d)
        assert vl_margin(mats, d) > 0
        assert min(np.linalg.eigvalsh(M * d + (M * d).T).min() for M in mats) > 0

    sep = [np.array([[1., 3.], [0., 1.]])]
    assert find_common_D(sep).status is Status.FEASIBLE
    assert find_balance_D(sep).verdict.status is Status.INFEASIBLE


@pytest.mark.criterion("Normal class-F check: symmetric example holds on samples; non-normal squared matrix rejected")
def test_normal_class_F_check():
    A = PlantMatrix(BlockStructure((2, 1)), np.array([[2., 2., 1.], [1., 1., 2.]]))
    for M in full_squared_matrices(A):
        np.testing.assert_array_equal(M, [[2, 1], [1, 2]])
    res = theorem2_check(A, sampler=Sampler(n_samples=200, seed=0))
    assert res.hypotheses_hold
    assert res.conclusion.holds and res.pipeline.falsifier_witness is None

    bad = PlantMatrix(BlockStructure((2, 1)), np.array([[1., 2., 1.], [0., 0., 1.]]))
    res = theorem2_check(bad)
    assert not res.hypotheses_hold and res.pipeline is None


@pytest.mark.criterion("Conjecture lab: 0 candidates on 1000 square instances; candidates re-verify; archives byte-identical")
def test_conjecture_lab(tmp_path):
    tested = 0
    for p, dist in [((1, 1), Distribution.UNIFORM), ((1, 1, 1), Distribution.CLASS_F_SHIFTED),
                    ((1, 1), Distribution.SYMMETRIC), ((1, 1, 1), Distribution.UNIFORM)]:
        out = run_search(InstanceSpec(BlockStructure(p), dist, seed=7), 250, falsify_budget=100)
        assert out.candidates == []
        tested += out.instances_tested
    assert tested == 1000

    archives = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
    outcomes = []
    for path in archives:
        spec = InstanceSpec(BlockStructure((2, 2, 1)), Distribution.CLASS_F_SHIFTED, seed=13)
        outcomes.append(run_search(spec, 100, falsify_budget=200, archive=path))
    assert [c.matrix_hash for c in outcomes[0].candidates] == [c.matrix_hash for c in outcomes[1].candidates]
    assert all(p.exists() for p in archives) or not outcomes[0].candidates
    if outcomes[0].candidates:
        assert archives[0].read_bytes() == archives[1].read_bytes()
    for c in outcomes[0].candidates:
        assert reverify_candidate(c)
        # from scratch: dense product and a direct eigenvalue solve on the witness subset
        s = c.A.structure
        M = c.A.data @ np.diag(c.witness_E.values)
        S = list(c.witness_subset)
        assert np.linalg.eigvals(M[np.ix_(S, S)]).real.min() < -1e-8
        assert check_condition_at(c.A, GainMatrix.ones(s), c.witness_E).margin < -1e-8


@pytest.mark.criterion("Simulator: decay verdict equals positive_stable(AEK) on 50 instances with |margin| > 1e-6")
def test_simulator_spectrum():
    rng = np.random.default_rng(8)
    checked = 0
    while checked < 50:
        s = random_structure(rng, 3, 3)
        A = PlantMatrix(s, rng.normal(size=(s.m, s.n)))
        # moderate detunings keep |AEK| / |margin|, and so the step count, small
        E = Detuning(s, rng.uniform(0.2, 2.0, size=s.n))
        K = GainMatrix(s, rng.uniform(0.5, 2.0, size=s.n))
        M = assemble_AEK(A, E, K)
        margin = np.linalg.eigvals(M).real.min()
        if abs(margin) <= 1e-6:
            continue
        checked += 1
        # small steps keep RK4 damping far below the slowest mode
        dt = 0.2 / np.linalg.norm(M, 2)
        T = 25.0 / abs(margin)
        sim = simulate_static_loop(A, E, K, rng.normal(size=s.m), dt, T)
        assert sim.decays == positive_stable(M), (margin, M.tolist())
