"""Block-structured non-square matrices and their squared counterparts.

A plant matrix ``A`` is ``m x n`` with its ``n`` columns partitioned, in
order, into ``m`` input groups of sizes ``p_1..p_m``.  Group ``i`` drives
output ``i`` through the block-diagonal gain ``K`` (``n x m``), so ``A E K`` is
``m x m`` and its column ``i`` is the nonnegative combination
``sum_j eps[i][j] * k[i][j] * a[i][j]``.

All group and member indices are 0-based.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, EnumerationCapError
from .linalg import as_matrix

__all__ = [
    "DEFAULT_CAP",
    "enumeration_cap",
    "BlockStructure",
    "PlantMatrix",
    "GainMatrix",
    "Detuning",
    "SquaredSelection",
    "EffectiveGains",
    "assemble_AEK",
    "effective_gains",
    "enumerate_full_selections",
    "enumerate_reduced_selections",
    "extract_squared",
    "one_hot_detuning",
]

DEFAULT_CAP = 10**6
CAP_ENV = "NSQSTAB_CAP"


def enumeration_cap() -> int:
    """Selection cap, overridable through the ``NSQSTAB_CAP`` environment variable."""
    raw = os.environ.get(CAP_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"{CAP_ENV} must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError(f"{CAP_ENV} must be positive, got {cap}")
    return cap


def _check_cap(count, cap):
    cap = enumeration_cap() if cap is None else cap
    if count > cap:
        raise EnumerationCapError(f"enumeration of {count} selections exceeds cap {cap}")


@dataclass(frozen=True)
class BlockStructure:
    """Group sizes ``p`` partitioning ``n = sum(p)`` columns into ``m`` groups."""

    p: tuple

    def __post_init__(self):
        p = tuple(int(x) for x in self.p)
        if len(p) < 1:
            raise DimensionError("block structure needs at least one group")
        if any(x < 1 for x in p):
            raise DimensionError(f"group sizes must be >= 1, got {p}")
        object.__setattr__(self, "p", p)

    @property
    def m(self) -> int:
        return len(self.p)

    @property
    def n(self) -> int:
        return sum(self.p)

    @property
    def offsets(self) -> tuple:
        """Column offset of the first member of each group."""
        return tuple(itertools.accumulate((0,) + self.p[:-1]))

    @property
    def n_full(self) -> int:
        """Number of full squared matrices, ``prod(p)``."""
        return math.prod(self.p)

    def column(self, i: int, j: int) -> int:
        """Flat column index of member `j` of group `i`."""
        if not 0 <= i < self.m:
            raise IndexError(f"group {i} out of range for {self.m} groups")
        if not 0 <= j < self.p[i]:
            raise IndexError(f"member {j} out of range for group {i} of size {self.p[i]}")
        return self.offsets[i] + j

    def group_slice(self, i: int) -> slice:
        start = self.offsets[i]
        return slice(start, start + self.p[i])

    def split(self, flat) -> list:
        """Split a length-``n`` vector into per-group arrays."""
        flat = np.asarray(flat, dtype=float)
        return [flat[self.group_slice(i)] for i in range(self.m)]

    @property
    def is_square(self) -> bool:
        return all(x == 1 for x in self.p)


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _flatten_groups(structure, values, what):
    """Accept either a flat length-n vector or one sequence per group."""
    if np.isscalar(values):
        flat = np.full(structure.n, float(values))
    else:
        try:
            flat = np.asarray(values, dtype=float)
        except ValueError:
            flat = None
        if flat is None or flat.ndim != 1 or flat.size != structure.n:
            if len(values) != structure.m:
                raise DimensionError(f"{what}: expected {structure.m} groups or {structure.n} entries")
            parts = []
            for i, group in enumerate(values):
                g = np.atleast_1d(np.asarray(group, dtype=float))
                if g.ndim != 1 or g.size != structure.p[i]:
                    raise DimensionError(
                        f"{what}: group {i} needs {structure.p[i]} entries, got {g.size}")
                parts.append(g)
            flat = np.concatenate(parts)
    if not np.all(np.isfinite(flat)):
        raise DimensionError(f"{what}: entries must be finite")
    if np.any(flat < 0):
        raise DimensionError(f"{what}: entries must be nonnegative")
    return _frozen(flat)


@dataclass(frozen=True, eq=False)
class PlantMatrix:
    """Real ``m x n`` matrix with group-indexed columns."""

    structure: BlockStructure
    data: np.ndarray

    def __post_init__(self):
        data = as_matrix(self.data)
        s = self.structure
        if data.shape != (s.m, s.n):
            raise DimensionError(f"plant matrix must be {s.m}x{s.n} for groups {s.p}, got {data.shape}")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_groups(cls, data, p) -> "PlantMatrix":
        return cls(BlockStructure(tuple(p)), data)

    def a(self, i: int, j: int) -> np.ndarray:
        """Column ``a_{i,j}`` (member `j` of group `i`)."""
        return self.data[:, self.structure.column(i, j)]

    def __eq__(self, other):
        if not isinstance(other, PlantMatrix):
            return NotImplemented
        return self.structure == other.structure and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class GainMatrix:
    """Compact block-diagonal gain: nonnegative ``k[i][j]`` for each group member."""

    structure: BlockStructure
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _flatten_groups(self.structure, self.values, "gain"))

    @classmethod
    def ones(cls, structure: BlockStructure) -> "GainMatrix":
        return cls(structure, np.ones(structure.n))

    def groups(self) -> list:
        return self.structure.split(self.values)

    def k(self, i: int, j: int) -> float:
        return float(self.values[self.structure.column(i, j)])

    def to_dense(self) -> np.ndarray:
        """The full ``n x m`` block-diagonal matrix."""
        s = self.structure
        K = np.zeros((s.n, s.m))
        for i in range(s.m):
            K[s.group_slice(i), i] = self.values[s.group_slice(i)]
        return K

    def __eq__(self, other):
        if not isinstance(other, GainMatrix):
            return NotImplemented
        return self.structure == other.structure and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Detuning:
    """Nonnegative diagonal detuning ``eps[i][j]`` (zero = loop off)."""

    structure: BlockStructure
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _flatten_groups(self.structure, self.values, "detuning"))

    @classmethod
    def ones(cls, structure: BlockStructure) -> "Detuning":
        return cls(structure, np.ones(structure.n))

    def groups(self) -> list:
        return self.structure.split(self.values)

    def eps(self, i: int, j: int) -> float:
        return float(self.values[self.structure.column(i, j)])

    def to_dense(self) -> np.ndarray:
        return np.diag(self.values)

    def __eq__(self, other):
        if not isinstance(other, Detuning):
            return NotImplemented
        return self.structure == other.structure and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class SquaredSelection:
    """Active groups plus the chosen member of each, aligned position by position."""

    active: tuple
    choice: tuple

    def __post_init__(self):
        active = tuple(int(i) for i in self.active)
        choice = tuple(int(j) for j in self.choice)
        if not active:
            raise IndexError("selection needs at least one active group")
        if len(active) != len(choice):
            raise IndexError("active groups and choices must have equal length")
        if any(b <= a for a, b in zip(active, active[1:])):
            raise IndexError(f"active groups must be strictly increasing, got {active}")
        object.__setattr__(self, "active", active)
        object.__setattr__(self, "choice", choice)

    @classmethod
    def full(cls, choice: Sequence[int]) -> "SquaredSelection":
        return cls(tuple(range(len(choice))), tuple(choice))

    @property
    def order(self) -> int:
        return len(self.active)

    def validate(self, structure: BlockStructure):
        for i, j in zip(self.active, self.choice):
            if not 0 <= i < structure.m:
                raise IndexError(f"active group {i} out of range for {structure.m} groups")
            if not 0 <= j < structure.p[i]:
                raise IndexError(f"choice {j} out of range for group {i} of size {structure.p[i]}")

    def columns(self, structure: BlockStructure) -> tuple:
        self.validate(structure)
        return tuple(structure.column(i, j) for i, j in zip(self.active, self.choice))


@dataclass(frozen=True)
class EffectiveGains:
    """Per-member products ``eps * k`` and which groups still have a live input."""

    structure: BlockStructure
    values: np.ndarray
    in_service: tuple

    def groups(self) -> list:
        return self.structure.split(self.values)

    @property
    def active_groups(self) -> tuple:
        return tuple(i for i, on in enumerate(self.in_service) if on)


def _require_same(structure, *others):
    for other in others:
        if other.structure != structure:
            raise DimensionError(f"block structures differ: {structure.p} vs {other.structure.p}")


def effective_gains(E: Detuning, K: GainMatrix) -> EffectiveGains:
    """Elementwise ``eps * k`` with an in-service flag per group."""
    _require_same(E.structure, K)
    s = E.structure
    kt = _frozen(E.values * K.values)
    in_service = tuple(bool(np.any(kt[s.group_slice(i)] > 0)) for i in range(s.m))
    return EffectiveGains(s, kt, in_service)


def assemble_AEK(A: PlantMatrix, E: Detuning, K: GainMatrix) -> np.ndarray:
    """The ``m x m`` loop gain ``A E K`` built column-group by column-group."""
    _require_same(A.structure, E, K)
    s = A.structure
    weights = E.values * K.values
    out = np.empty((s.m, s.m))
    for i in range(s.m):
        sl = s.group_slice(i)
        out[:, i] = A.data[:, sl] @ weights[sl]
    out.setflags(write=False)
    return out


def enumerate_full_selections(structure: BlockStructure, cap: int | None = None) -> list:
    """All ``prod(p)`` full selections in lexicographic order of choices."""
    _check_cap(structure.n_full, cap)
    active = tuple(range(structure.m))
    return [SquaredSelection(active, choice)
            for choice in itertools.product(*(range(x) for x in structure.p))]


def count_reduced_selections(structure: BlockStructure, k: int) -> int:
    return sum(math.prod(structure.p[i] for i in S)
               for S in itertools.combinations(range(structure.m), k))


def enumerate_reduced_selections(structure: BlockStructure, k: int, cap: int | None = None) -> list:
    """All selections with exactly `k` active groups.

    Active subsets are visited in lexicographic order, and within each subset
    the member choices are lexicographic.
    """
    if not 1 <= k <= structure.m:
        raise ValueError(f"active-group count must lie in 1..{structure.m}, got {k}")
    _check_cap(count_reduced_selections(structure, k), cap)
    out = []
    for S in itertools.combinations(range(structure.m), k):
        for choice in itertools.product(*(range(structure.p[i]) for i in S)):
            out.append(SquaredSelection(S, choice))
    return out


def extract_squared(A: PlantMatrix, sel: SquaredSelection) -> np.ndarray:
    """Square submatrix: rows of the active groups, one chosen column per active group."""
    cols = sel.columns(A.structure)
    sub = A.data[np.ix_(sel.active, cols)].copy()
    sub.setflags(write=False)
    return sub


def full_squared_matrices(A: PlantMatrix, cap: int | None = None) -> list:
    """Every ``m x m`` squared matrix of `A`, in enumeration order."""
    return [extract_squared(A, sel) for sel in enumerate_full_selections(A.structure, cap)]


def one_hot_detuning(structure: BlockStructure, sel: SquaredSelection) -> Detuning:
    """Detuning with ``eps = 1`` exactly on the selected members, zero elsewhere."""
    values = np.zeros(structure.n)
    for col in sel.columns(structure):
        values[col] = 1.0
    return Detuning(structure, values)
