"""Eigenvalue condition for decentralized unconditional stability.

For a plant ``A``, gain ``K`` and detuning ``E`` the condition asks that every
principal subsystem of ``A E K`` formed from in-service groups be positively
stable.  Groups whose effective gains are all zero are out of service and are
dropped together with their output row.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .blocks import (Detuning, GainMatrix, PlantMatrix, assemble_AEK, effective_gains,
                     enumerate_full_selections, extract_squared, one_hot_detuning,
                     full_squared_matrices)
from .errors import DimensionError, NumericalError
from .linalg import DEFAULT_TOL, Tolerances, eigenvalues, in_class_F, is_normal, positive_stable
from .lyapunov import DEFAULT_BUDGET, FeasibilityVerdict, Status, find_common_D

__all__ = [
    "Verdict",
    "ConditionResult",
    "Witness",
    "DusReport",
    "Sampler",
    "check_condition_at",
    "sweep_condition",
    "falsify_condition",
    "lemma4_pipeline",
    "theorem2_check",
    "simulate_static_loop",
]


class Verdict(str, enum.Enum):
    HOLDS_ON_SAMPLES = "HOLDS-ON-SAMPLES"
    REFUTED = "REFUTED"


@dataclass(frozen=True)
class ConditionResult:
    """Worst subsystem margin at one detuning, with the margin of every subset."""

    margin: float
    per_subset: dict
    worst_subset: tuple
    in_service: tuple


def _subsystem_margins(M, groups):
    """Smallest real eigenvalue part for every nonempty subset of `groups`."""
    per_subset = {}
    for k in range(1, len(groups) + 1):
        subsets = list(itertools.combinations(groups, k))
        if k == 1:
            for S in subsets:
                per_subset[S] = float(M[S[0], S[0]])
            continue
        stack = np.stack([M[np.ix_(S, S)] for S in subsets])
        try:
            w = np.linalg.eigvals(stack)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc
        for S, re in zip(subsets, w.real.min(axis=1)):
            per_subset[S] = float(re)
    return per_subset


def check_condition_at(A: PlantMatrix, K: GainMatrix, E: Detuning,
                       tol: Tolerances = DEFAULT_TOL) -> ConditionResult:
    """Evaluate every in-service principal subsystem of ``A E K``.

    With every group out of service the margin is ``+inf`` and no subset
    is checked.
    """
    eg = effective_gains(E, K)
    groups = eg.active_groups
    if not groups:
        return ConditionResult(np.inf, {}, (), eg.in_service)
    M = assemble_AEK(A, E, K)
    per_subset = _subsystem_margins(M, groups)
    worst = min(per_subset, key=lambda S: (per_subset[S], len(S), S))
    return ConditionResult(per_subset[worst], per_subset, worst, eg.in_service)


@dataclass(frozen=True)
class Witness:
    """A detuning and subsystem together with the spectrum found there."""

    eps: tuple
    subset: tuple
    spectrum: tuple
    margin: float

    def reverify(self, A: PlantMatrix, K: GainMatrix) -> float:
        """Recompute the subsystem's smallest real eigenvalue part from scratch."""
        E = Detuning(A.structure, np.array(self.eps))
        M = assemble_AEK(A, E, K)
        S = list(self.subset)
        return float(np.min(eigenvalues(M[np.ix_(S, S)]).real))


def _witness(A, K, E, res):
    M = assemble_AEK(A, E, K)
    S = list(res.worst_subset)
    w = eigenvalues(M[np.ix_(S, S)])
    w = w[np.lexsort((w.imag, w.real))]
    spectrum = tuple((float(z.real), float(z.imag)) for z in w)
    return Witness(tuple(float(x) for x in E.values), res.worst_subset, spectrum, res.margin)


@dataclass(frozen=True)
class Sampler:
    """Detuning distribution: each entry is 0 with probability `p_zero`,
    otherwise log-uniform on ``[10**log10_low, 10**log10_high]``."""

    n_samples: int = 100
    seed: int = 0
    p_zero: float = 0.2
    log10_low: float = -3.0
    log10_high: float = 3.0

    def draw(self, rng, n):
        eps = 10.0 ** rng.uniform(self.log10_low, self.log10_high, size=n)
        eps[rng.random(n) < self.p_zero] = 0.0
        return eps


@dataclass(frozen=True)
class DusReport:
    """Worst case over all tested detunings.

    REFUTED means the worst margin is below ``-eig_tol``; ``boundary`` flags a
    worst margin inside ``[-eig_tol, eig_tol]``, where the strict inequality
    cannot be decided numerically.
    """

    verdict: Verdict
    worst_margin: float
    witness: Witness | None
    samples_tested: int
    boundary: bool = False

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS_ON_SAMPLES


def corner_detunings(A: PlantMatrix, cap: int | None = None) -> list:
    """All-ones detuning followed by the one-hot detuning of every full selection."""
    s = A.structure
    corners = [Detuning.ones(s)]
    corners.extend(one_hot_detuning(s, sel) for sel in enumerate_full_selections(s, cap))
    return corners


def _report(worst, n, tol):
    margin, witness = worst
    refuted = margin < -tol.eig_tol
    boundary = (not refuted) and abs(margin) <= tol.eig_tol
    verdict = Verdict.REFUTED if refuted else Verdict.HOLDS_ON_SAMPLES
    return DusReport(verdict, float(margin), witness, n, boundary)


def sweep_condition(A: PlantMatrix, K: GainMatrix | None = None, sampler: Sampler = Sampler(),
                    tol: Tolerances = DEFAULT_TOL) -> DusReport:
    """Evaluate the condition on the corner detunings and `sampler.n_samples` random ones.

    Ties in the worst margin keep the earliest detuning, so the report is a
    function of the inputs and seed only.
    """
    K = GainMatrix.ones(A.structure) if K is None else K
    rng = np.random.default_rng(sampler.seed)
    worst = (np.inf, None)
    tested = 0
    detunings = corner_detunings(A)
    detunings.extend(Detuning(A.structure, sampler.draw(rng, A.structure.n))
                     for _ in range(sampler.n_samples))
    for E in detunings:
        res = check_condition_at(A, K, E, tol)
        tested += 1
        if res.margin < worst[0]:
            worst = (res.margin, _witness(A, K, E, res))
    return _report(worst, tested, tol)


def _normalized_margin(A, K, eps, tol):
    """Margin of the detuning rescaled so the largest effective gain is 1."""
    E = Detuning(A.structure, eps)
    kt = E.values * K.values
    top = float(np.max(kt)) if kt.size else 0.0
    if top <= 0:
        return np.inf, None
    res = check_condition_at(A, K, E, tol)
    return res.margin / top, res


def falsify_condition(A: PlantMatrix, K: GainMatrix | None = None, budget: int = 500, seed: int = 0,
                      tol: Tolerances = DEFAULT_TOL, restarts: int | None = None) -> Witness | None:
    """Search for a detuning that violates the condition.

    Random restarts followed by coordinate descent on ``log10(eps)`` with
    moves that switch single inputs off and back on.  The margin is
    homogeneous in ``E``, so the search works on the margin divided by the
    largest effective gain.  `budget` counts condition evaluations.  Returns
    a witness only when its margin, recomputed from scratch, is below
    ``-eig_tol``.
    """
    K = GainMatrix.ones(A.structure) if K is None else K
    if budget < 1:
        return None
    n = A.structure.n
    rng = np.random.default_rng(seed)
    restarts = max(1, min(budget // 25, 20)) if restarts is None else restarts
    evals = 0
    best = (np.inf, None)

    def score(eps):
        nonlocal evals, best
        evals += 1
        val, _ = _normalized_margin(A, K, eps, tol)
        if val < best[0]:
            best = (val, eps.copy())
        return val

    starts = [np.ones(n)]
    while len(starts) < restarts:
        starts.append(Sampler().draw(rng, n))

    per_start = max(1, budget // len(starts))
    for start in starts:
        if evals >= budget:
            break
        x = start.copy()
        fx = score(x)
        step = 1.0
        stop_at = min(budget, evals + per_start)
        while evals < stop_at and step > 1e-3:
            improved = False
            for c in rng.permutation(n):
                if evals >= stop_at:
                    break
                candidates = []
                if x[c] > 0:
                    candidates.append(x[c] * 10.0 ** step)
                    candidates.append(x[c] * 10.0 ** -step)
                    candidates.append(0.0)
                else:
                    candidates.append(1.0)
                for value in candidates:
                    if evals >= stop_at:
                        break
                    y = x.copy()
                    y[c] = min(max(value, 0.0), 1e3) if value > 0 else 0.0
                    if 0 < y[c] < 1e-3:
                        y[c] = 1e-3
                    fy = score(y)
                    if fy < fx:
                        x, fx, improved = y, fy, True
                        break
            if not improved:
                step /= 2.0
        if best[0] < -10 * tol.eig_tol:
            break

    if best[1] is None or not best[0] < 0:
        return None
    E = Detuning(A.structure, best[1])
    res = check_condition_at(A, K, E, tol)
    if not res.margin < -tol.eig_tol:
        return None
    w = _witness(A, K, E, res)
    if not w.reverify(A, K) < -tol.eig_tol:
        return None
    return w


@dataclass(frozen=True)
class Lemma4Result:
    certificate: FeasibilityVerdict
    dus: DusReport | None
    falsifier_witness: Witness | None

    @property
    def consistent(self) -> bool:
        """A FEASIBLE certificate must come with no refutation."""
        if self.certificate.status is not Status.FEASIBLE:
            return True
        return self.dus.holds and self.falsifier_witness is None


def lemma4_pipeline(A: PlantMatrix, budget: int = DEFAULT_BUDGET, sampler: Sampler = Sampler(),
                    falsify_budget: int = 500, tol: Tolerances = DEFAULT_TOL) -> Lemma4Result:
    """Common-``D`` search over all full squared matrices, then the condition check.

    The condition is only exercised (with all-ones gains) when the search is
    FEASIBLE; otherwise the result carries the certificate alone.
    """
    verdict = find_common_D(full_squared_matrices(A), budget=budget, tol=tol)
    if verdict.status is not Status.FEASIBLE:
        return Lemma4Result(verdict, None, None)
    K = GainMatrix.ones(A.structure)
    report = sweep_condition(A, K, sampler, tol)
    witness = falsify_condition(A, K, budget=falsify_budget, seed=sampler.seed, tol=tol)
    return Lemma4Result(verdict, report, witness)


@dataclass(frozen=True)
class Theorem2Result:
    """Hypothesis checks per full squared matrix, plus the downstream pipeline."""

    hypotheses: tuple
    hypotheses_hold: bool
    pipeline: Lemma4Result | None

    @property
    def conclusion(self) -> DusReport | None:
        return None if self.pipeline is None else self.pipeline.dus


def theorem2_check(A: PlantMatrix, tol: Tolerances = DEFAULT_TOL, sampler: Sampler = Sampler(),
                   budget: int = DEFAULT_BUDGET, falsify_budget: int = 500) -> Theorem2Result:
    """Check normality, Metzler sign pattern and positive stability of every squared matrix.

    When every squared matrix passes, run :func:`lemma4_pipeline`.
    """
    hyps = []
    for sel in enumerate_full_selections(A.structure):
        S = extract_squared(A, sel)
        hyps.append({
            "choice": sel.choice,
            "normal": is_normal(S, tol),
            "class_F": in_class_F(S, tol),
            "positive_stable": positive_stable(S, tol),
        })
    ok = all(h["normal"] and h["class_F"] and h["positive_stable"] for h in hyps)
    pipeline = lemma4_pipeline(A, budget, sampler, falsify_budget, tol) if ok else None
    return Theorem2Result(tuple(hyps), ok, pipeline)


@dataclass(frozen=True)
class SimulationResult:
    times: np.ndarray = field(repr=False)
    trajectory: np.ndarray = field(repr=False)
    decays: bool
    diverged: bool
    final_ratio: float


def simulate_static_loop(A: PlantMatrix, E: Detuning, K: GainMatrix, x0: Sequence[float],
                         dt: float, T: float, blowup: float = 1e12) -> SimulationResult:
    """Integrate ``e' = -(A E K) e`` with the classical fourth-order Runge-Kutta step.

    Decay means ``|e(T)| < 1e-2 |e(0)|``.  Raises :class:`NumericalError` when
    ``dt`` lies outside the method's stability disk (``dt * |AEK|_2 > 2.5``) or
    the state turns non-finite.  A genuinely unstable loop whose norm passes
    ``blowup * |e(0)|`` stops early and is reported as diverged.
    """
    if not dt > 0 or not T > dt:
        raise ValueError("need dt > 0 and T > dt")
    M = np.asarray(assemble_AEK(A, E, K))
    e = np.asarray(x0, dtype=float).copy()
    if e.shape != (A.structure.m,):
        raise DimensionError(f"initial state must have length {A.structure.m}")
    if dt * np.linalg.norm(M, 2) > 2.5:
        raise NumericalError(f"step {dt} too large for |AEK|_2 = {np.linalg.norm(M, 2):.4g}")
    n_steps = int(np.ceil(T / dt))
    h = T / n_steps
    norm0 = float(np.linalg.norm(e))
    times = [0.0]
    traj = [e.copy()]
    diverged = False
    for k in range(n_steps):
        k1 = -M @ e
        k2 = -M @ (e + 0.5 * h * k1)
        k3 = -M @ (e + 0.5 * h * k2)
        k4 = -M @ (e + h * k3)
        e = e + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(e)):
            raise NumericalError("state became non-finite during integration")
        times.append((k + 1) * h)
        traj.append(e.copy())
        if np.linalg.norm(e) > blowup * max(norm0, 1e-300):
            diverged = True
            break
    final = float(np.linalg.norm(e))
    ratio = final / norm0 if norm0 > 0 else 0.0
    decays = (not diverged) and final < 1e-2 * norm0
    return SimulationResult(np.array(times), np.array(traj), decays, diverged, ratio)
