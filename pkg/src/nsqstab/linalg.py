"""Dense real-matrix predicates and spectral primitives.

Stability here always means *positive* stability: every eigenvalue has a
strictly positive real part.  All predicates take an explicit
:class:`Tolerances` so that callers can tighten or loosen them uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericalError

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "as_matrix",
    "as_square",
    "eigenvalues",
    "min_real_eig",
    "positive_stable",
    "min_symmetric_eig",
    "is_normal",
    "in_class_F",
    "column_dominance_margins",
    "strictly_column_diag_dominant",
    "principal_submatrix",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by every predicate.

    Attributes
    ----------
    eig_tol : float
        Eigenvalue real parts must exceed this to count as positive.
    sym_tol : float
        Allowed asymmetry / non-normality, relative to the matrix scale.
    margin_tol : float
        LMI and dominance margins must exceed this to count as strict.
    """

    eig_tol: float = 1e-9
    sym_tol: float = 1e-9
    margin_tol: float = 1e-8

    def __post_init__(self):
        for name in ("eig_tol", "sym_tol", "margin_tol"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")


DEFAULT_TOL = Tolerances()


def as_matrix(M) -> np.ndarray:
    """Return `M` as a finite 2-D float array (read-only copy)."""
    arr = np.array(M, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got array with shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("matrix entries must be finite")
    arr.setflags(write=False)
    return arr


def as_square(M) -> np.ndarray:
    arr = as_matrix(M)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def eigenvalues(M) -> np.ndarray:
    """All eigenvalues of a square real matrix as a complex array.

    The order is LAPACK's (deterministic for fixed input); conditions built
    on top of this quantify over every eigenvalue, so order never matters.
    """
    M = as_square(M)
    if M.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    try:
        w = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed for {M.shape} matrix: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalError("eigenvalue computation produced non-finite values")
    return w.astype(complex)


def min_real_eig(M) -> float:
    """Smallest real part over the spectrum of `M`."""
    return float(np.min(eigenvalues(M).real))


def positive_stable(M, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True iff every eigenvalue of `M` has real part greater than ``tol.eig_tol``."""
    return min_real_eig(M) > tol.eig_tol


def min_symmetric_eig(S, tol: Tolerances = DEFAULT_TOL) -> float:
    """Smallest eigenvalue of the symmetric part of `S`.

    `S` must already be symmetric up to ``tol.sym_tol`` (relative to its
    largest entry); it is symmetrized before the solve.
    """
    S = as_square(S)
    if S.shape[0] == 0:
        raise DimensionError("empty matrix has no eigenvalues")
    scale = max(1.0, float(np.max(np.abs(S))))
    asym = float(np.max(np.abs(S - S.T)))
    if asym > tol.sym_tol * scale:
        raise DimensionError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    return float(np.linalg.eigvalsh(0.5 * (S + S.T))[0])


def is_normal(M, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True iff ``M @ M.T`` and ``M.T @ M`` agree to ``tol.sym_tol`` (scaled)."""
    M = as_square(M)
    if M.size == 0:
        return True
    scale = max(1.0, float(np.max(np.abs(M))) ** 2)
    commutator = M @ M.T - M.T @ M
    return float(np.max(np.abs(commutator))) <= tol.sym_tol * scale


def in_class_F(M, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True iff every off-diagonal entry is nonnegative (Metzler pattern)."""
    M = as_square(M)
    off = M[~np.eye(M.shape[0], dtype=bool)]
    return bool(np.all(off >= -tol.eig_tol))


def column_dominance_margins(M) -> np.ndarray:
    """Per-column ``|m_jj| - sum_{i != j} |m_ij|``."""
    M = as_square(M)
    absM = np.abs(M)
    diag = np.diag(absM)
    return diag - (absM.sum(axis=0) - diag)


def strictly_column_diag_dominant(M, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Strict column diagonal dominance with margin above ``tol.margin_tol``."""
    margins = column_dominance_margins(M)
    return bool(margins.size == 0 or np.min(margins) > tol.margin_tol)


def principal_submatrix(M, idx) -> np.ndarray:
    """Rows and columns of `M` restricted to the strictly increasing index set `idx`.

    Indices are 0-based.
    """
    M = as_square(M)
    idx = tuple(int(i) for i in idx)
    if not idx:
        raise IndexError("index set must be nonempty")
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise IndexError(f"index set must be strictly increasing, got {idx}")
    if idx[0] < 0 or idx[-1] >= M.shape[0]:
        raise IndexError(f"index set {idx} out of range for order {M.shape[0]}")
    sub = M[np.ix_(idx, idx)].copy()
    sub.setflags(write=False)
    return sub
