"""Finite-geometry parity-check matrices and row/column splitting.

Codes come from the lines of a Euclidean geometry EG(p, 2^s) (origin and
lines through it removed) or a projective geometry PG(p, 2^s), both realised
inside a binary extension field:

* EG points are the nonzero elements of GF(2^(p*s)); point i is alpha^i.
  Lines are cosets a + GF(2^s)*b; the multiplicative subfield is the set of
  powers alpha^(j*n1) with n1 = (2^(p*s)-1)/(2^s-1).
* PG points are classes of nonzero elements of GF(2^((p+1)*s)) modulo the
  subfield's multiplicative group; the class of x is log(x) mod n.

Type-1 matrices have one row per line and one column per point; type-2
matrices are their transposes.  Column/row splitting distributes each
column's (then each row's) ones over c_sp (r_sp) new columns (rows) in a
rotating pattern, keeping the new weights as equal as possible.

Everything here is deterministic: field tables come from a fixed table of
primitive polynomials (re-verified on every build), and lines are emitted in
a fixed order.  PG rows follow the smallest-point-pair enumeration.  For
two-dimensional EG the lines form one orbit under multiplication by alpha
(a cyclic shift of the point logs), and rows follow that orbit downward from
the lexicographically smallest line: row k is the base line shifted by -k.
Row order matters because splitting groups each column's ones by row index,
so it is part of the matrix definition, not a cosmetic choice.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .gf2 import BitMatrix

FAMILIES = ("eg1", "eg2", "pg1", "pg2")

# Smallest primitive polynomial per degree, bit mask including the x^m term.
# Each entry is re-verified at table-build time (full multiplicative period).
PRIMITIVE_POLYS = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x83,
    8: 0x11D,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x402B,
    15: 0x8003,
    16: 0x1002D,
    17: 0x20009,
    18: 0x40027,
    19: 0x80027,
    20: 0x100009,
    21: 0x200005,
    22: 0x400003,
    23: 0x800021,
    24: 0x100001B,
}


class GeometryError(ValueError):
    """Unsupported geometry parameters or a failed construction invariant."""


class FieldTable:
    """Discrete log/antilog tables for GF(2^m), m <= 24."""

    __slots__ = ("m", "exp", "log")

    def __init__(self, m: int, exp: np.ndarray, log: np.ndarray):
        self.m = m
        self.exp = exp
        self.log = log

    @classmethod
    def build(cls, m: int) -> "FieldTable":
        if m not in PRIMITIVE_POLYS:
            msg = f"no primitive polynomial on file for GF(2^{m}); supported m: 1..24"
            raise GeometryError(msg)
        size = (1 << m) - 1
        exp = np.empty(size, dtype=np.uint32)
        if not _kernels.field_fill(m, PRIMITIVE_POLYS[m], exp):
            msg = f"polynomial 0x{PRIMITIVE_POLYS[m]:x} is not primitive for m={m}"
            raise GeometryError(msg)
        log = np.full(size + 1, -1, dtype=np.int64)
        log[exp] = np.arange(size, dtype=np.int64)
        return cls(m, exp, log)

    def mul(self, a: int, b: int) -> int:
        """Product of two field elements given as masks (0 handled)."""
        if a == 0 or b == 0:
            return 0
        size = (1 << self.m) - 1
        return int(self.exp[(self.log[a] + self.log[b]) % size])


_FIELD_CACHE: dict[int, FieldTable] = {}


def field(m: int) -> FieldTable:
    if m not in _FIELD_CACHE:
        _FIELD_CACHE[m] = FieldTable.build(m)
    return _FIELD_CACHE[m]


@dataclass(frozen=True)
class CodeSpec:
    """Names one finite-geometry parity-check matrix."""

    family: str
    p: int
    s: int
    c_sp: int = 1
    r_sp: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            msg = f"unknown family {self.family!r}, expected one of {FAMILIES}"
            raise GeometryError(msg)
        if self.p < 2:
            raise GeometryError("geometry dimension p must be at least 2")
        if self.s < 1:
            raise GeometryError("field exponent s must be at least 1")
        if self.c_sp < 1 or self.r_sp < 1:
            raise GeometryError("split factors must be at least 1")
        degree = self.p * self.s if self.family.startswith("eg") else (self.p + 1) * self.s
        if degree > 24:
            msg = f"construction needs GF(2^{degree}); only m <= 24 is supported"
            raise GeometryError(msg)

    def label(self) -> str:
        return f"{self.family}({self.p},{self.s},{self.c_sp},{self.r_sp})"


@dataclass(frozen=True)
class ParityCheck:
    """A parity-check matrix together with the spec that produced it.

    ``spec`` is provenance metadata; ad-hoc matrices may leave it None, at
    the cost of not being serializable into a code bundle.
    """

    matrix: BitMatrix
    spec: CodeSpec | None = None


def _lines_to_matrix(lines: np.ndarray, n_points: int) -> BitMatrix:
    rows = lines.shape[0]
    per = lines.shape[1]
    out = BitMatrix.zeros(rows, n_points).copy_words()
    block = 4096
    for r0 in range(0, rows, block):
        r1 = min(r0 + block, rows)
        dense = np.zeros((r1 - r0, n_points), dtype=np.uint8)
        dense[np.repeat(np.arange(r1 - r0), per), lines[r0:r1].ravel()] = 1
        out[r0:r1] = BitMatrix.from_dense(dense).copy_words()
    return BitMatrix(rows, n_points, out)


def eg_line_points(p: int, s: int) -> np.ndarray:
    """Sorted point-index rows for the lines of EG(p, 2^s) avoiding the origin."""
    f = field(p * s)
    q = 1 << s
    n_points = (1 << (p * s)) - 1
    n1 = n_points // (q - 1)
    lines = _kernels.eg_lines(f.exp, f.log, n_points, n1, q)
    expected = n1 * ((1 << ((p - 1) * s)) - 1)
    if lines.shape[0] != expected:
        msg = f"EG({p},2^{s}) produced {lines.shape[0]} lines, expected {expected}"
        raise GeometryError(msg)
    return lines


# Offset of the cyclic base line from the lexicographically smallest line.
# The split families' parameters depend on the row order (splitting groups
# each column's ones by row index), so this constant is part of the family
# definition, fixed once for all two-dimensional EG matrices.
EG_CYCLIC_PHASE = 19


def eg_cyclic_line_rows(s: int) -> np.ndarray:
    """Rows for EG(2, 2^s) lines in cyclic (multiplicative-shift) order.

    The lines avoiding the origin form a single orbit under multiplication by
    the field generator, which adds 1 to every point log.  Row k is the base
    line (the lexicographically smallest line advanced by EG_CYCLIC_PHASE)
    with every log increased by k, i.e. the base line times alpha^k; each row
    is the previous one shifted right as an incidence vector.
    """
    lines = eg_line_points(2, s)
    n = (1 << (2 * s)) - 1
    first = np.array(min(map(tuple, lines.tolist())), dtype=np.int64)
    base = (first + EG_CYCLIC_PHASE) % n
    rows = (base[None, :] + np.arange(n, dtype=np.int64)[:, None]) % n
    if {tuple(sorted(r)) for r in rows.tolist()} != {tuple(r) for r in lines.tolist()}:
        msg = f"EG(2,2^{s}) lines do not form a single cyclic orbit"
        raise GeometryError(msg)
    return rows


def pg_line_points(p: int, s: int) -> np.ndarray:
    """Sorted point-index rows for the lines of PG(p, 2^s)."""
    f = field((p + 1) * s)
    q = 1 << s
    big_order = (1 << ((p + 1) * s)) - 1
    n_points = big_order // (q - 1)
    # Lines in PG(p, q): theta(p) * theta(p-1) / theta(1) with
    # theta(k) = (q^(k+1) - 1) / (q - 1).
    theta_p = ((q ** (p + 1)) - 1) // (q - 1)
    theta_pm1 = ((q ** p) - 1) // (q - 1)
    theta_1 = q + 1
    expected = theta_p * theta_pm1 // theta_1
    lines = _kernels.pg_lines(f.exp, f.log, big_order, n_points, q, expected)
    if lines.shape[0] != expected:
        msg = f"PG({p},2^{s}) produced {lines.shape[0]} lines, expected {expected}"
        raise GeometryError(msg)
    return lines


def split_columns(matrix: BitMatrix, c_sp: int) -> BitMatrix:
    """Distribute each column's ones over c_sp new columns, round-robin.

    Column i becomes columns i*c_sp .. i*c_sp + c_sp - 1; its t-th one (in
    increasing row order) lands in new column i*c_sp + (t mod c_sp), so the
    first (weight mod c_sp) new columns get the extra ones.
    """
    if c_sp == 1:
        return matrix
    dense = matrix.to_dense()
    weights = dense.sum(axis=0)
    if c_sp > int(weights.min()):
        msg = f"column split {c_sp} exceeds the minimum column weight {int(weights.min())}"
        raise GeometryError(msg)
    rows, cols = dense.shape
    out = np.zeros((rows, cols * c_sp), dtype=np.uint8)
    for i in range(cols):
        support = np.nonzero(dense[:, i])[0]
        out[support, i * c_sp + (np.arange(len(support)) % c_sp)] = 1
    return BitMatrix.from_dense(out)


def split_rows(matrix: BitMatrix, r_sp: int) -> BitMatrix:
    """Distribute each row's ones over r_sp new rows, round-robin on columns."""
    if r_sp == 1:
        return matrix
    dense = matrix.to_dense()
    weights = dense.sum(axis=1)
    if r_sp > int(weights.min()):
        msg = f"row split {r_sp} exceeds the minimum row weight {int(weights.min())}"
        raise GeometryError(msg)
    rows, cols = dense.shape
    out = np.zeros((rows * r_sp, cols), dtype=np.uint8)
    for j in range(rows):
        support = np.nonzero(dense[j])[0]
        out[j * r_sp + (np.arange(len(support)) % r_sp), support] = 1
    return BitMatrix.from_dense(out)


def build_parity_check(spec: CodeSpec) -> ParityCheck:
    """Construct the parity-check matrix named by ``spec``.

    Type-1 is lines-as-rows; type-2 is its transpose.  Column splitting is
    applied first, then row splitting (on the column-split matrix).
    """
    if spec.family.startswith("eg"):
        if spec.p == 2:
            lines = eg_cyclic_line_rows(spec.s)
        else:
            lines = eg_line_points(spec.p, spec.s)
        n_points = (1 << (spec.p * spec.s)) - 1
    else:
        lines = pg_line_points(spec.p, spec.s)
        n_points = ((1 << ((spec.p + 1) * spec.s)) - 1) // ((1 << spec.s) - 1)
    mat = _lines_to_matrix(lines, n_points)
    if spec.family.endswith("2"):
        mat = mat.transpose()
    mat = split_columns(mat, spec.c_sp)
    mat = split_rows(mat, spec.r_sp)
    return ParityCheck(mat, spec)


def row_weights(matrix: BitMatrix) -> np.ndarray:
    return np.bitwise_count(matrix.words).sum(axis=1).astype(np.int64)


def col_weights(matrix: BitMatrix) -> np.ndarray:
    return matrix.to_dense().sum(axis=0).astype(np.int64)


def write_alist(matrix: BitMatrix, path: str | Path) -> None:
    """Write the standard sparse index-list text format.

    Layout: ``n m`` / max column and row degree / n column degrees / m row
    degrees / n lines of 1-based row indices per column / m lines of 1-based
    column indices per row.
    """
    dense = matrix.to_dense()
    rows, cols = dense.shape
    col_supports = [np.nonzero(dense[:, j])[0] + 1 for j in range(cols)]
    row_supports = [np.nonzero(dense[i])[0] + 1 for i in range(rows)]
    cdeg = [len(s) for s in col_supports]
    rdeg = [len(s) for s in row_supports]
    parts = [
        f"{cols} {rows}",
        f"{max(cdeg, default=0)} {max(rdeg, default=0)}",
        " ".join(str(d) for d in cdeg),
        " ".join(str(d) for d in rdeg),
    ]
    parts.extend(" ".join(str(i) for i in s) for s in col_supports)
    parts.extend(" ".join(str(i) for i in s) for s in row_supports)
    Path(path).write_text("\n".join(parts) + "\n")


def read_alist(path: str | Path) -> BitMatrix:
    """Read the format written by write_alist; tolerates zero-padded entries."""
    tokens = Path(path).read_text().split("\n")
    tokens = [line.split() for line in tokens]
    if len(tokens) < 4:
        raise GeometryError(f"{path}: truncated file")
    cols, rows = (int(x) for x in tokens[0][:2])
    expected_lines = 4 + cols + rows
    if len([t for t in tokens if t]) < expected_lines:
        raise GeometryError(f"{path}: expected {expected_lines} non-empty lines")
    dense = np.zeros((rows, cols), dtype=np.uint8)
    cdeg = [int(x) for x in tokens[2]]
    for j in range(cols):
        entries = [int(x) for x in tokens[4 + j] if int(x) > 0]
        if len(entries) != cdeg[j]:
            msg = f"{path}: column {j} lists {len(entries)} entries, degree says {cdeg[j]}"
            raise GeometryError(msg)
        dense[[e - 1 for e in entries], j] = 1
    # Cross-check with the row blocks.
    rdeg = [int(x) for x in tokens[3]]
    for i in range(rows):
        entries = [int(x) for x in tokens[4 + cols + i] if int(x) > 0]
        if len(entries) != rdeg[i] or not all(dense[i, e - 1] for e in entries):
            raise GeometryError(f"{path}: row {i} entries disagree with column lists")
    return BitMatrix.from_dense(dense)


def transpose_spec(spec: CodeSpec) -> CodeSpec:
    """The spec naming the transpose family (type-1 <-> type-2), unsplit."""
    flip = {"eg1": "eg2", "eg2": "eg1", "pg1": "pg2", "pg2": "pg1"}
    return replace(spec, family=flip[spec.family])
