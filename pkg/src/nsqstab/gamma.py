"""Card-game coefficient tensors and the column-aggregation identity.

A ratio table fixes, for every group ``i``, the weight ``kappa[i][j]`` of
member ``j`` relative to an anchor member whose weight is exactly 1.  The
coefficient tensor ``gamma`` over full selections is the product
``gamma(z) = prod_i kappa[i][z_i]``; it is the only tensor with
``gamma(anchor) = 1`` whose entries scale by ``kappa[i][j]`` when coordinate
``i`` moves from the anchor to ``j``.

Weighting every squared matrix by ``gamma`` and summing gives an ``m x m``
matrix whose column ``i`` is a fixed multiple of ``sum_j kappa[i][j] a[i][j]``.
With ``kappa`` taken from the effective gains this reproduces ``A E K`` up to
a diagonal right factor, which is what ties the common-``D`` Lyapunov
certificate to the loop gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blocks import (BlockStructure, Detuning, GainMatrix, PlantMatrix, _check_cap,
                     _require_same, assemble_AEK, effective_gains)
from .errors import DimensionError, PreconditionError

__all__ = [
    "RatioTable",
    "GammaTensor",
    "AggregationCheck",
    "build_gamma",
    "card_payoffs",
    "satisfies_recursion",
    "verify_ratio_property",
    "aggregation_coefficients",
    "aggregation_weights",
    "verify_aggregation_identity",
]


@dataclass(frozen=True, eq=False)
class RatioTable:
    """Per-group member ratios ``kappa[i]`` with ``kappa[i][anchor[i]] == 1``.

    The card game needs every ratio strictly positive; the aggregation
    identity also admits zero ratios for switched-off members, which is what
    ``strict=False`` allows.
    """

    structure: BlockStructure
    kappa: tuple
    anchor: tuple = None
    strict: bool = True

    def __post_init__(self):
        s = self.structure
        if len(self.kappa) != s.m:
            raise DimensionError(f"need {s.m} ratio groups, got {len(self.kappa)}")
        anchor = tuple(0 for _ in range(s.m)) if self.anchor is None else tuple(int(a) for a in self.anchor)
        kappa = []
        for i, row in enumerate(self.kappa):
            row = np.array(row, dtype=float).reshape(-1)
            if row.size != s.p[i]:
                raise DimensionError(f"group {i} needs {s.p[i]} ratios, got {row.size}")
            if not np.all(np.isfinite(row)):
                raise ValueError("ratios must be finite")
            if self.strict and np.any(row <= 0):
                raise ValueError(f"ratios of group {i} must be positive")
            if np.any(row < 0):
                raise ValueError(f"ratios of group {i} must be nonnegative")
            if not 0 <= anchor[i] < s.p[i] or row[anchor[i]] != 1.0:
                raise ValueError(f"anchor ratio of group {i} must be exactly 1")
            row.setflags(write=False)
            kappa.append(row)
        object.__setattr__(self, "kappa", tuple(kappa))
        object.__setattr__(self, "anchor", anchor)

    @classmethod
    def from_ratios(cls, p, ratios) -> "RatioTable":
        """Build from the non-anchor ratios only: ``ratios[i]`` has ``p[i] - 1`` entries."""
        structure = BlockStructure(tuple(p))
        return cls(structure, tuple(np.concatenate(([1.0], np.atleast_1d(r))) for r in ratios))

    def group_sums(self) -> np.ndarray:
        return np.array([row.sum() for row in self.kappa])


@dataclass(frozen=True, eq=False)
class GammaTensor:
    """Coefficients over full selections, shaped ``p`` (C order = enumeration order)."""

    structure: BlockStructure
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.structure.p:
            raise DimensionError(f"gamma must have shape {self.structure.p}, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __getitem__(self, zeta):
        return float(self.values[tuple(zeta)])

    def flat(self) -> np.ndarray:
        """Entries in lexicographic selection order."""
        return self.values.reshape(-1)


def build_gamma(ratios: RatioTable) -> GammaTensor:
    """The product tensor ``gamma(z) = prod_i kappa[i][z_i]``."""
    s = ratios.structure
    _check_cap(s.n_full, None)
    values = np.ones(())
    for row in ratios.kappa:
        values = np.multiply.outer(values, row)
    return GammaTensor(s, values)


def card_payoffs(gamma: GammaTensor) -> list:
    """Payoff of each card: ``(1/m) * sum of gamma over combinations holding it``."""
    s = gamma.structure
    out = []
    for k in range(s.m):
        other = tuple(ax for ax in range(s.m) if ax != k)
        out.append(gamma.values.sum(axis=other) / s.m)
    return out


def satisfies_recursion(gamma: GammaTensor, ratios: RatioTable, rtol: float = 1e-12) -> bool:
    """Both defining conditions: unit anchor entry and per-coordinate ratio scaling."""
    vals = gamma.values
    if abs(vals[ratios.anchor] - 1.0) > rtol:
        return False
    for i, (row, a) in enumerate(zip(ratios.kappa, ratios.anchor)):
        base = np.take(vals, [a], axis=i)
        for j, kap in enumerate(row):
            moved = np.take(vals, [j], axis=i)
            if not np.allclose(moved, base * kap, rtol=rtol, atol=0.0):
                return False
    return True


def _implied_ratios(gamma: GammaTensor) -> RatioTable:
    vals = gamma.values
    origin = (0,) * gamma.structure.m
    g0 = vals[origin]
    if not g0 > 0:
        raise ValueError("gamma at the first selection must be positive")
    kappa = []
    for i in range(gamma.structure.m):
        axis = [slice(0, 1)] * gamma.structure.m
        axis[i] = slice(None)
        row = vals[tuple(axis)].reshape(-1) / g0
        kappa.append(row)
    return RatioTable(gamma.structure, tuple(kappa))


def verify_ratio_property(gamma: GammaTensor, ratios: RatioTable | None = None,
                          rtol: float = 1e-12) -> bool:
    """True iff ``payoff(k, j) / payoff(k, anchor) == kappa[k][j]`` for every card.

    Without `ratios` the intended ratios are read off the axes through the
    first selection.
    """
    if ratios is None:
        ratios = _implied_ratios(gamma)
    elif ratios.structure != gamma.structure:
        raise DimensionError("ratio table and gamma tensor have different structures")
    if np.any(gamma.values <= 0):
        return False
    for k, payoff in enumerate(card_payoffs(gamma)):
        ratio = payoff / payoff[ratios.anchor[k]]
        if not np.allclose(ratio, ratios.kappa[k], rtol=rtol, atol=0.0):
            return False
    return True


def aggregation_coefficients(gamma: GammaTensor) -> list:
    """``c[i][j]``: sum of gamma over full selections choosing member ``j`` of group ``i``."""
    m = gamma.structure.m
    return [payoff * m for payoff in card_payoffs(gamma)]


def aggregation_weights(A: PlantMatrix, gamma: GammaTensor, d) -> np.ndarray:
    """``(sum_s gamma_s S_s) D`` computed column-wise from the coefficient sums."""
    _require_same(A.structure, gamma)
    s = A.structure
    d = np.asarray(d, dtype=float)
    if d.shape != (s.m,):
        raise DimensionError(f"diagonal must have length {s.m}")
    coeffs = aggregation_coefficients(gamma)
    out = np.empty((s.m, s.m))
    for i in range(s.m):
        out[:, i] = d[i] * (A.data[:, s.group_slice(i)] @ coeffs[i])
    return out


@dataclass(frozen=True)
class AggregationCheck:
    """Result of matching the gamma-weighted sum against ``A E K``.

    ``residual`` uses the repaired diagonal ``d_i = kt[i][anchor] / C_i``;
    ``literal_residual`` uses ``d_i = kt[i][anchor]`` without the column
    factor ``C_i = prod_{k != i} sum_j kappa[k][j]``.
    """

    residual: float
    d_used: tuple
    scaling: tuple
    anchor: tuple
    literal_residual: float


def verify_aggregation_identity(A: PlantMatrix, E: Detuning, K: GainMatrix) -> AggregationCheck:
    """Rebuild ``A E K`` as a gamma-weighted sum of squared matrices times ``D``.

    Each group is anchored at its first member with nonzero effective gain.
    A group with no live member has no such representation.
    """
    _require_same(A.structure, E, K)
    s = A.structure
    eg = effective_gains(E, K)
    if not all(eg.in_service):
        off = [i for i, on in enumerate(eg.in_service) if not on]
        raise PreconditionError(
            f"groups {off} are out of service; analyse the reduced-order subsystem instead")
    kappa, anchor, lead = [], [], []
    for kt in eg.groups():
        a = int(np.flatnonzero(kt > 0)[0])
        anchor.append(a)
        lead.append(float(kt[a]))
        row = kt / kt[a]
        row[a] = 1.0
        kappa.append(row)
    ratios = RatioTable(s, tuple(kappa), tuple(anchor), strict=False)
    gamma = build_gamma(ratios)
    sums = ratios.group_sums()
    scaling = np.array([math.prod(sums[k] for k in range(s.m) if k != i) for i in range(s.m)])
    lead = np.array(lead)
    d = lead / scaling
    target = assemble_AEK(A, E, K)
    residual = float(np.max(np.abs(aggregation_weights(A, gamma, d) - target)))
    literal = float(np.max(np.abs(aggregation_weights(A, gamma, lead) - target)))
    return AggregationCheck(residual, tuple(float(x) for x in d), tuple(float(x) for x in scaling),
                            tuple(anchor), literal)
