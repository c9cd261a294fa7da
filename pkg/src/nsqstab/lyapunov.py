"""Diagonal Lyapunov certificates for families of square matrices.

A family ``{M_s}`` is simultaneously Volterra-Lyapunov stable when one
positive diagonal ``D`` makes every ``M_s D + D M_s^T`` positive definite,
and individually stable when each member has its own ``D``.  The search
maximizes the worst smallest eigenvalue, which is concave in ``d``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError
from .linalg import DEFAULT_TOL, Tolerances, as_square, min_real_eig, principal_submatrix
from .simplex import D_MIN, maximize_on_simplex

__all__ = [
    "Status",
    "DiagonalCertificate",
    "FeasibilityVerdict",
    "DStabilityReport",
    "vl_margin",
    "find_common_D",
    "find_individual_Ds",
    "sampled_d_stability",
    "verify_certificate",
]

DEFAULT_BUDGET = 5000


class Status(str, enum.Enum):
    FEASIBLE = "FEASIBLE"
    INFEASIBLE = "INFEASIBLE"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class DiagonalCertificate:
    """Positive diagonal ``d`` (normalized to ``sum(d) == len(d)``) and its margin."""

    d: tuple
    margin: float

    def __post_init__(self):
        d = tuple(float(x) for x in self.d)
        if not d or any(not np.isfinite(x) or x < D_MIN * (1 - 1e-12) for x in d):
            raise ValueError(f"certificate diagonal must be finite and >= {D_MIN}")
        if not np.isfinite(self.margin):
            raise ValueError("certificate margin must be finite")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "margin", float(self.margin))


@dataclass(frozen=True)
class FeasibilityVerdict:
    """Outcome of a diagonal-scaling search.

    ``best_objective`` is attained at the returned point; ``upper_bound`` is the
    cutting-plane bound on the true optimum.
    """

    status: Status
    certificate: DiagonalCertificate | None
    best_objective: float
    upper_bound: float
    iterations: int
    best_d: tuple = ()

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


def _family(mats) -> list:
    mats = [as_square(M) for M in mats]
    if not mats:
        raise ValueError("matrix family must be nonempty")
    q = mats[0].shape[0]
    if q == 0:
        raise DimensionError("matrices must have positive order")
    for M in mats:
        if M.shape[0] != q:
            raise DimensionError(f"matrix orders differ: {q} vs {M.shape[0]}")
    return mats


def _lyap_forms(mats, d):
    """Stack of ``M D + D M^T`` for every matrix in the family."""
    stack = np.asarray(mats)
    MD = stack * d[None, None, :]
    return MD + np.transpose(MD, (0, 2, 1))


def vl_margin(mats: Sequence, d) -> float:
    """``min_s lambda_min(M_s D + D M_s^T)`` for ``D = diag(d)``."""
    mats = _family(mats)
    d = np.asarray(d, dtype=float)
    if d.shape != (mats[0].shape[0],):
        raise DimensionError(f"diagonal has length {d.size}, matrices have order {mats[0].shape[0]}")
    if np.any(d <= 0):
        raise ValueError("diagonal entries must be positive")
    return float(np.min(np.linalg.eigvalsh(_lyap_forms(mats, d))[:, 0]))


def _vl_oracle(mats):
    stack = np.asarray(mats)

    def oracle(d):
        w, V = np.linalg.eigh(_lyap_forms(stack, d))
        s = int(np.argmin(w[:, 0]))
        v = V[s, :, 0]
        # d/dd_i of v^T (M D + D M^T) v = 2 v_i (M^T v)_i
        g = 2.0 * v * (stack[s].T @ v)
        return float(w[s, 0]), g

    return oracle


def _verdict(res, tol, q) -> FeasibilityVerdict:
    best_d = tuple(float(x) for x in res.d)
    if res.lower > tol.margin_tol:
        cert = DiagonalCertificate(best_d, res.lower)
        return FeasibilityVerdict(Status.FEASIBLE, cert, res.lower, res.upper, res.iterations, best_d)
    if res.upper <= tol.margin_tol:
        status = Status.INFEASIBLE
    else:
        status = Status.UNKNOWN
    return FeasibilityVerdict(status, None, res.lower, res.upper, res.iterations, best_d if res.iterations else ())


def find_common_D(mats: Sequence, budget: int = DEFAULT_BUDGET, tol: Tolerances = DEFAULT_TOL,
                  gap_tol: float = 1e-7, decide_only: bool = False) -> FeasibilityVerdict:
    """Search for one positive diagonal ``D`` with every ``M D + D M^T > 0``.

    FEASIBLE as soon as the best margin exceeds ``tol.margin_tol``; INFEASIBLE
    only when the cutting-plane upper bound drops to ``tol.margin_tol`` or
    below; otherwise UNKNOWN.  With `decide_only` the search stops as soon
    as the verdict is settled instead of closing the optimality gap.
    """
    mats = _family(mats)
    q = mats[0].shape[0]
    res = maximize_on_simplex(_vl_oracle(mats), q, budget=budget, gap_tol=gap_tol,
                              target=tol.margin_tol if decide_only else None)
    return _verdict(res, tol, q)


def find_individual_Ds(mats: Sequence, budget: int = DEFAULT_BUDGET,
                       tol: Tolerances = DEFAULT_TOL, decide_only: bool = False) -> list:
    """:func:`find_common_D` applied to each matrix on its own."""
    mats = _family(mats)
    return [find_common_D([M], budget=budget, tol=tol, decide_only=decide_only) for M in mats]


def verify_certificate(mats: Sequence, cert: DiagonalCertificate, tol: Tolerances = DEFAULT_TOL,
                       rtol: float = 1e-9) -> bool:
    """Recompute the LMI margin at ``cert.d`` without touching the solver.

    True iff the recomputed margin matches the claimed one (to ``rtol``,
    relative to ``max(1, |margin|)``) and exceeds ``tol.margin_tol``.
    """
    try:
        actual = vl_margin(mats, cert.d)
    except (DimensionError, ValueError):
        return False
    agrees = abs(actual - cert.margin) <= rtol * max(1.0, abs(cert.margin))
    return agrees and actual > tol.margin_tol


def nonempty_subsets(q: int):
    for k in range(1, q + 1):
        yield from itertools.combinations(range(q), k)


@dataclass(frozen=True)
class DStabilityReport:
    """Sampled D-stability evidence; ``holds=False`` is a genuine refutation."""

    holds: bool
    worst_margin: float
    worst_d: tuple
    worst_subset: tuple
    n_samples: int


def sampled_d_stability(M, n_samples: int = 200, seed: int = 0,
                        tol: Tolerances = DEFAULT_TOL) -> DStabilityReport:
    """Check every principal subsystem of ``M D`` for random positive diagonals.

    Each ``d_i`` is log-uniform on ``[1e-3, 1e3]``.
    """
    M = as_square(M)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    q = M.shape[0]
    rng = np.random.default_rng(seed)
    subsets = list(nonempty_subsets(q))
    worst = (np.inf, (), ())
    for _ in range(n_samples):
        d = 10.0 ** rng.uniform(-3.0, 3.0, size=q)
        MD = M * d[None, :]
        for idx in subsets:
            margin = min_real_eig(principal_submatrix(MD, idx))
            if margin < worst[0]:
                worst = (margin, tuple(float(x) for x in d), idx)
    return DStabilityReport(worst[0] > tol.eig_tol, float(worst[0]), worst[1], worst[2], n_samples)
