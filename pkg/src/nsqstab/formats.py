"""Line-oriented matrix file format.

::

    # comments start with '#'; blank lines are ignored
    m n
    p_1 ... p_m
    <m lines of n decimal entries>
    K                      (optional)
    <m lines, line i has p_i entries>
    E                      (optional)
    <m lines, line i has p_i entries>

Entries are parsed with correctly rounded decimal conversion, and
:func:`format_matrix_file` writes the shortest repr of each float, so a
write/read round trip is bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .blocks import BlockStructure, Detuning, GainMatrix, PlantMatrix
from .errors import DimensionError, MatrixFileError

__all__ = ["MatrixFile", "parse_matrix_text", "parse_matrix_file", "format_matrix_file"]


@dataclass(frozen=True, eq=False)
class MatrixFile:
    A: PlantMatrix
    K: GainMatrix | None = None
    E: Detuning | None = None


def _tokens(text):
    """Yield (line_number, [(column, token), ...]) for each content line."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = []
        col = 0
        for piece in line.split():
            col = line.index(piece, col)
            toks.append((col + 1, piece))
            col += len(piece)
        if toks:
            yield lineno, toks


def _int(tok, lineno, col, path, what):
    try:
        return int(tok)
    except ValueError:
        raise MatrixFileError(f"expected integer {what}, got {tok!r}", lineno, col, path) from None


def _real(tok, lineno, col, path):
    try:
        x = float(tok)
    except ValueError:
        raise MatrixFileError(f"non-numeric token {tok!r}", lineno, col, path) from None
    if not math.isfinite(x):
        raise MatrixFileError(f"non-finite entry {tok!r}", lineno, col, path)
    return x


def parse_matrix_text(text: str, path=None) -> MatrixFile:
    lines = list(_tokens(text))
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(lines):
            last = lines[-1][0] if lines else None
            raise MatrixFileError(f"unexpected end of file, expected {what}", last, None, path)
        item = lines[pos]
        pos += 1
        return item

    lineno, toks = take("header 'm n'")
    if len(toks) != 2:
        raise MatrixFileError("header must contain exactly 'm n'", lineno, 1, path)
    m = _int(toks[0][1], lineno, toks[0][0], path, "m")
    n = _int(toks[1][1], lineno, toks[1][0], path, "n")
    if m < 1 or n < 1:
        raise MatrixFileError(f"m and n must be positive, got {m} {n}", lineno, 1, path)
    header_line = lineno

    lineno, toks = take("group sizes")
    if len(toks) != m:
        raise MatrixFileError(f"expected {m} group sizes, got {len(toks)}", lineno, 1, path)
    p = [_int(t, lineno, c, path, "group size") for c, t in toks]
    for (c, _), x in zip(toks, p):
        if x < 1:
            raise MatrixFileError(f"group sizes must be >= 1, got {x}", lineno, c, path)
    if sum(p) != n:
        raise MatrixFileError(f"group sizes sum to {sum(p)} but header declares n = {n}",
                              header_line, None, path)
    structure = BlockStructure(tuple(p))

    rows = []
    for r in range(m):
        lineno, toks = take(f"matrix row {r + 1}")
        if len(toks) != n:
            raise MatrixFileError(f"matrix row {r + 1} needs {n} entries, got {len(toks)}", lineno, 1, path)
        rows.append([_real(t, lineno, c, path) for c, t in toks])
    A = PlantMatrix(structure, np.array(rows))

    blocks = {}
    while pos < len(lines):
        lineno, toks = take("block marker")
        if len(toks) != 1 or toks[0][1] not in ("K", "E"):
            raise MatrixFileError(f"expected block marker 'K' or 'E', got {toks[0][1]!r}",
                                  lineno, toks[0][0], path)
        name = toks[0][1]
        if name in blocks:
            raise MatrixFileError(f"duplicate {name} block", lineno, toks[0][0], path)
        groups = []
        for i in range(m):
            lineno, toks = take(f"{name} row {i + 1}")
            if len(toks) != p[i]:
                raise MatrixFileError(f"{name} row {i + 1} needs {p[i]} entries, got {len(toks)}",
                                      lineno, 1, path)
            vals = []
            for c, t in toks:
                x = _real(t, lineno, c, path)
                if x < 0:
                    raise MatrixFileError(f"{name} entries must be nonnegative, got {t}", lineno, c, path)
                vals.append(x)
            groups.append(vals)
        blocks[name] = groups
    try:
        K = GainMatrix(structure, blocks["K"]) if "K" in blocks else None
        E = Detuning(structure, blocks["E"]) if "E" in blocks else None
    except DimensionError as exc:
        raise MatrixFileError(str(exc), None, None, path) from exc
    return MatrixFile(A, K, E)


def parse_matrix_file(path) -> MatrixFile:
    path = Path(path)
    return parse_matrix_text(path.read_text(encoding="utf-8"), path)


def format_matrix_file(A: PlantMatrix, K: GainMatrix | None = None, E: Detuning | None = None) -> str:
    s = A.structure
    out = [f"{s.m} {s.n}", " ".join(str(x) for x in s.p)]
    out.extend(" ".join(repr(float(x)) for x in row) for row in A.data)
    for name, block in (("K", K), ("E", E)):
        if block is None:
            continue
        out.append(name)
        out.extend(" ".join(repr(float(x)) for x in g) for g in block.groups())
    return "\n".join(out) + "\n"
