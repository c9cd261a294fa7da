"""Seeded counterexample search: individual Lyapunov stability versus the DUS condition.

Every random draw is keyed by ``(seed, instance index, retry)`` through
:class:`numpy.random.SeedSequence`, so an instance does not depend on which
other instances were generated or on how many workers ran the search.

Note on gains: any two gain matrices with all entries positive give the
same family of products ``E K`` as ``E`` ranges over nonnegative diagonals, so
the all-ones gain stands for every positive gain.  A gain that keeps a single
member per group reduces ``A E K`` to one squared matrix times a diagonal,
which satisfies the condition whenever that squared matrix is Lyapunov
diagonally stable.  The search therefore targets the all-positive case;
candidates record both facts.
"""

from __future__ import annotations

import enum
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blocks import BlockStructure, Detuning, GainMatrix, PlantMatrix, full_squared_matrices
from .dus import Sampler, check_condition_at, falsify_condition, sweep_condition
from .errors import PreconditionError, RetryExhaustedError
from .linalg import DEFAULT_TOL, Tolerances, positive_stable
from .lyapunov import DiagonalCertificate, Status, find_individual_Ds, verify_certificate
from .report import dumps, matrix_hash

log = logging.getLogger(__name__)

__all__ = [
    "Distribution",
    "InstanceSpec",
    "CounterexampleCandidate",
    "SearchOutcome",
    "random_instance",
    "individual_certificates",
    "search_conjecture1",
    "run_search",
    "reverify_candidate",
    "special_case_one_redundant_channel",
]


class Distribution(str, enum.Enum):
    UNIFORM = "uniform"
    CLASS_F_SHIFTED = "class-F-shifted"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class InstanceSpec:
    structure: BlockStructure
    distribution: Distribution = Distribution.UNIFORM
    scale: float = 1.0
    seed: int = 0
    require_individual_vl: bool = True
    max_retries: int = 200

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _rng(seed, *counters):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, counters)]))


def _draw(spec: InstanceSpec, rng) -> np.ndarray:
    s, a = spec.structure, spec.scale
    m, n = s.m, s.n
    owner = np.repeat(np.arange(m), s.p)
    is_diag = owner[None, :] == np.arange(m)[:, None]
    if spec.distribution is Distribution.UNIFORM:
        return rng.uniform(-a, a, size=(m, n))
    if spec.distribution is Distribution.CLASS_F_SHIFTED:
        # Metzler off-diagonal pattern, diagonal lifted by a*(m-1)/2 on average
        X = rng.uniform(0.0, a, size=(m, n))
        shift = rng.uniform(-a, a, size=(m, n)) + a * (m - 1) / 2.0
        return np.where(is_diag, shift, X)
    # SYMMETRIC: off-diagonal entries shared by every member of a group, so
    # every squared matrix is symmetric; only the diagonal entry varies.
    S = rng.uniform(-a, a, size=(m, m))
    S = np.triu(S, 1)
    S = S + S.T
    X = S[:, owner]
    diag = rng.uniform(-a, a, size=(m, n)) + a
    return np.where(is_diag, diag, X)


def _quick_reject(mats, tol):
    # Diagonal stability implies positive stability of every squared matrix.
    return not all(positive_stable(M, tol) for M in mats)


def individual_certificates(A: PlantMatrix, budget: int = 2000, tol: Tolerances = DEFAULT_TOL):
    """Certificates for every full squared matrix, or None if any is not certified."""
    mats = full_squared_matrices(A)
    if _quick_reject(mats, tol):
        return None
    verdicts = find_individual_Ds(mats, budget=budget, tol=tol, decide_only=True)
    if not all(v.status is Status.FEASIBLE for v in verdicts):
        return None
    return [v.certificate for v in verdicts]


def random_instance(spec: InstanceSpec, index: int = 0, tol: Tolerances = DEFAULT_TOL,
                    solver_budget: int = 2000) -> PlantMatrix:
    """Deterministic instance number `index` of the stream defined by `spec`.

    With ``require_individual_vl`` the draw is repeated (retry ``r`` uses its own
    key) until every full squared matrix admits its own diagonal certificate.
    """
    for retry in range(spec.max_retries):
        A = PlantMatrix(spec.structure, _draw(spec, _rng(spec.seed, index, retry)))
        if not spec.require_individual_vl:
            return A
        if individual_certificates(A, solver_budget, tol) is not None:
            return A
    raise RetryExhaustedError(
        f"no individually stable instance after {spec.max_retries} draws "
        f"(distribution {spec.distribution.value}, groups {spec.structure.p})")


@dataclass(frozen=True, eq=False)
class CounterexampleCandidate:
    """A plant whose squared matrices are each diagonally stable, with a violating detuning.

    The violation was found with all-ones gains.  ``random_K_refuted`` counts
    how many extra random positive gains were also refuted out of
    ``random_K_tried``; ``single_input_K_holds`` records the sweep with a gain
    that keeps only the first member of each group.
    """

    index: int
    A: PlantMatrix
    individual_certs: tuple
    witness_E: Detuning
    witness_subset: tuple
    violation_margin: float
    random_K_tried: int = 0
    random_K_refuted: int = 0
    single_input_K_holds: bool = True

    @property
    def matrix_hash(self) -> str:
        return matrix_hash(self.A.structure.p, self.A.data)

    def to_document(self) -> dict:
        return {
            "kind": "conjecture-candidate",
            "index": self.index,
            "matrix_hash": self.matrix_hash,
            "p": list(self.A.structure.p),
            "A": self.A.data,
            "individual_certs": [{"d": c.d, "margin": c.margin} for c in self.individual_certs],
            "witness_E": self.witness_E.values,
            "witness_subset": list(self.witness_subset),
            "violation_margin": self.violation_margin,
            "random_K_tried": self.random_K_tried,
            "random_K_refuted": self.random_K_refuted,
            "single_input_K_holds": self.single_input_K_holds,
            "scope": "violation shown for all-ones gain only; evidence, not proof, for other gains",
        }

    @classmethod
    def from_document(cls, doc: dict) -> "CounterexampleCandidate":
        s = BlockStructure(tuple(doc["p"]))
        return cls(
            index=int(doc["index"]),
            A=PlantMatrix(s, np.array(doc["A"], dtype=float)),
            individual_certs=tuple(DiagonalCertificate(tuple(c["d"]), float(c["margin"]))
                                   for c in doc["individual_certs"]),
            witness_E=Detuning(s, np.array(doc["witness_E"], dtype=float)),
            witness_subset=tuple(doc["witness_subset"]),
            violation_margin=float(doc["violation_margin"]),
            random_K_tried=int(doc.get("random_K_tried", 0)),
            random_K_refuted=int(doc.get("random_K_refuted", 0)),
            single_input_K_holds=bool(doc.get("single_input_K_holds", True)),
        )


def reverify_candidate(c: CounterexampleCandidate, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Independent recheck: every certificate and the witness, recomputed from the raw data."""
    mats = full_squared_matrices(c.A)
    if len(mats) != len(c.individual_certs):
        return False
    if not all(verify_certificate([M], cert, tol) for M, cert in zip(mats, c.individual_certs)):
        return False
    if not c.violation_margin < -10 * tol.eig_tol:
        return False
    K = GainMatrix.ones(c.A.structure)
    res = check_condition_at(c.A, K, c.witness_E, tol)
    S = tuple(c.witness_subset)
    if S not in res.per_subset:
        return False
    return res.per_subset[S] <= c.violation_margin + tol.eig_tol


def _single_input_gain(structure):
    values = np.zeros(structure.n)
    for off in structure.offsets:
        values[off] = 1.0
    return GainMatrix(structure, values)


@dataclass
class SearchOutcome:
    candidates: list
    instances_tested: int = 0
    instances_skipped: int = 0
    archive_written: int = 0
    notes: list = field(default_factory=list)


def _evaluate_instance(args):
    spec, index, falsify_budget, n_random_K, tol = args
    try:
        A = random_instance(spec, index, tol)
    except RetryExhaustedError:
        return index, "skipped", None
    certs = individual_certificates(A, tol=tol)
    if certs is None:
        return index, "skipped", None
    K = GainMatrix.ones(A.structure)
    w = falsify_condition(A, K, budget=falsify_budget, seed=int(_rng(spec.seed, index, 2**32).integers(2**63)),
                          tol=tol)
    if w is None or not w.margin < -10 * tol.eig_tol:
        return index, "tested", None
    refuted = 0
    for r in range(n_random_K):
        rng = _rng(spec.seed, index, 2**32 + 1 + r)
        Kr = GainMatrix(A.structure, 10.0 ** rng.uniform(-1, 1, size=A.structure.n))
        if falsify_condition(A, Kr, budget=falsify_budget, seed=int(rng.integers(2**63)), tol=tol) is not None:
            refuted += 1
    single = sweep_condition(A, _single_input_gain(A.structure), Sampler(n_samples=50, seed=index), tol)
    cand = CounterexampleCandidate(
        index=index, A=A, individual_certs=tuple(certs),
        witness_E=Detuning(A.structure, np.array(w.eps)), witness_subset=w.subset,
        violation_margin=w.margin, random_K_tried=n_random_K, random_K_refuted=refuted,
        single_input_K_holds=single.holds)
    if not reverify_candidate(cand, tol):
        return index, "tested", None
    return index, "tested", cand


def _existing_hashes(path):
    hashes = set()
    if path is not None and Path(path).exists():
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    hashes.add(json.loads(line).get("matrix_hash"))
    return hashes


def _append(path, doc_text):
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(doc_text + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def run_search(spec: InstanceSpec, budget: int, falsify_budget: int = 500, n_random_K: int = 0,
               archive: str | os.PathLike | None = None, jobs: int = 1,
               tol: Tolerances = DEFAULT_TOL) -> SearchOutcome:
    """Search instances ``0..budget-1`` of the stream; see :func:`search_conjecture1`."""
    if budget < 0 or falsify_budget < 0:
        raise ValueError("budgets must be nonnegative")
    outcome = SearchOutcome([])
    if budget == 0:
        return outcome
    seen = _existing_hashes(archive)
    tasks = [(spec, i, falsify_budget, n_random_K, tol) for i in range(budget)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_evaluate_instance, tasks, chunksize=8)
            _collect(results, outcome, archive, seen)
    else:
        _collect(map(_evaluate_instance, tasks), outcome, archive, seen)
    return outcome


def _collect(results, outcome, archive, seen):
    # results arrive in index order whatever the worker count
    for index, status, cand in results:
        if status == "skipped":
            outcome.instances_skipped += 1
            continue
        outcome.instances_tested += 1
        if (outcome.instances_tested + outcome.instances_skipped) % 100 == 0:
            log.info("searched %d instances", outcome.instances_tested)
        if cand is None:
            continue
        h = cand.matrix_hash
        if h in seen:
            continue
        seen.add(h)
        outcome.candidates.append(cand)
        log.info("candidate at instance %d, margin %.3g", index, cand.violation_margin)
        if archive is not None:
            _append(archive, dumps(cand.to_document()))
            outcome.archive_written += 1


def search_conjecture1(spec: InstanceSpec, budget: int, falsify_budget: int = 500, n_random_K: int = 0,
                       archive=None, jobs: int = 1, tol: Tolerances = DEFAULT_TOL) -> list:
    """Candidates among the first `budget` instances of the stream.

    Each instance whose squared matrices all carry individual certificates
    is attacked by the falsifier with all-ones gains.  A candidate is kept only
    after :func:`reverify_candidate` succeeds; with `archive` it is appended
    to that file immediately (one JSON document per line, duplicates by
    matrix hash skipped).
    """
    return run_search(spec, budget, falsify_budget, n_random_K, archive, jobs, tol).candidates


@dataclass(frozen=True)
class OneChannelVerdict:
    redundant_group: int
    individually_stable: bool
    certificates: tuple
    sweep: object
    falsifier_witness: object

    @property
    def holds(self) -> bool:
        return self.individually_stable and self.sweep.holds and self.falsifier_witness is None


def special_case_one_redundant_channel(A: PlantMatrix, tol: Tolerances = DEFAULT_TOL,
                                       sampler: Sampler = Sampler(n_samples=200),
                                       falsify_budget: int = 500) -> OneChannelVerdict:
    """Empirical check when exactly one group has redundant inputs."""
    redundant = [i for i, x in enumerate(A.structure.p) if x > 1]
    if len(redundant) != 1:
        raise PreconditionError(
            f"exactly one group must have more than one input, groups {A.structure.p} have {len(redundant)}")
    certs = individual_certificates(A, tol=tol)
    K = GainMatrix.ones(A.structure)
    sweep = sweep_condition(A, K, sampler, tol)
    witness = falsify_condition(A, K, budget=falsify_budget, seed=sampler.seed, tol=tol)
    return OneChannelVerdict(redundant[0], certs is not None, tuple(certs or ()), sweep, witness)
