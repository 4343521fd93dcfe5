"""Dense linear algebra over GF(2) on bit-packed words.

Rows live in numpy uint64 arrays, 64 columns per word, least significant bit
first, row-major.  Values are treated as immutable once constructed: all
operations return new objects and internal buffers are never handed out for
mutation.  Elimination is deterministic (leftmost column first, first
available row as pivot), so every derived object is a pure function of its
inputs.

The word width of a matrix is ceil(cols / 64); bits past the last column are
zero everywhere, and every constructor and kernel maintains that invariant.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from . import _kernels


class LinearAlgebraError(ValueError):
    """Dimension mismatch or ill-posed request."""


class SingularMatrixError(LinearAlgebraError):
    """Raised when a matrix that must be invertible is not."""


class CompletionError(LinearAlgebraError):
    """Raised when a basis completion request is inconsistent."""


def _nwords(nbits: int) -> int:
    return (nbits + 63) >> 6


def _pack_rows(dense: np.ndarray) -> np.ndarray:
    """Pack a 2-D uint8 0/1 array into uint64 words, LSB-first."""
    if dense.ndim != 2:
        raise LinearAlgebraError("expected a 2-D bit array")
    rows, cols = dense.shape
    nw = _nwords(cols)
    packed = np.packbits(dense.astype(np.uint8, copy=False), axis=1,
                         bitorder="little")
    out = np.zeros((rows, nw * 8), dtype=np.uint8)
    out[:, : packed.shape[1]] = packed
    return out.view(np.uint64).reshape(rows, nw)


def _unpack_rows(words: np.ndarray, cols: int) -> np.ndarray:
    rows = words.shape[0]
    if rows == 0:
        return np.zeros((0, cols), dtype=np.uint8)
    as_bytes = words.view(np.uint8).reshape(rows, -1)
    return np.unpackbits(as_bytes, axis=1, count=cols, bitorder="little")


class BitVector:
    """An immutable vector of n bits."""

    __slots__ = ("n", "_words")

    def __init__(self, n: int, words: np.ndarray):
        self.n = int(n)
        self._words = words

    @classmethod
    def zeros(cls, n: int) -> "BitVector":
        return cls(n, np.zeros(_nwords(n), dtype=np.uint64))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitVector":
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits,
                         dtype=np.uint8).reshape(1, -1)
        n = arr.shape[1]
        return cls(n, _pack_rows(arr)[0])

    @property
    def words(self) -> np.ndarray:
        """Packed storage (read-only view)."""
        v = self._words.view()
        v.flags.writeable = False
        return v

    def to_bits(self) -> np.ndarray:
        return _unpack_rows(self._words.reshape(1, -1), self.n)[0]

    def popcount(self) -> int:
        return int(np.bitwise_count(self._words).sum())

    def is_zero(self) -> bool:
        return not self._words.any()

    def concat(self, other: "BitVector") -> "BitVector":
        bits = np.concatenate([self.to_bits(), other.to_bits()])
        return BitVector.from_bits(bits)

    def take(self, indices: np.ndarray) -> "BitVector":
        """New vector from the bits at ``indices`` (in the given order)."""
        return BitVector.from_bits(self.to_bits()[np.asarray(indices, dtype=np.int64)])

    def to_hex(self) -> str:
        nbytes = (self.n + 7) >> 3
        return self._words.view(np.uint8)[:nbytes].tobytes().hex()

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(i)
        return int((self._words[i >> 6] >> np.uint64(i & 63)) & np.uint64(1))

    def __xor__(self, other: "BitVector") -> "BitVector":
        if self.n != other.n:
            msg = f"length mismatch: {self.n} vs {other.n}"
            raise LinearAlgebraError(msg)
        return BitVector(self.n, self._words ^ other._words)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self._words, other._words))

    def __repr__(self) -> str:
        head = "".join(str(b) for b in self.to_bits()[:32])
        tail = "..." if self.n > 32 else ""
        return f"BitVector(n={self.n}, bits={head}{tail})"


class BitMatrix:
    """An immutable rows x cols matrix over GF(2)."""

    __slots__ = ("rows", "cols", "_words")

    def __init__(self, rows: int, cols: int, words: np.ndarray):
        self.rows = int(rows)
        self.cols = int(cols)
        if words.shape != (self.rows, _nwords(self.cols)):
            msg = f"bad word storage shape {words.shape} for {rows}x{cols}"
            raise LinearAlgebraError(msg)
        self._words = words

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols, np.zeros((rows, _nwords(cols)), dtype=np.uint64))

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        words = np.zeros((n, _nwords(n)), dtype=np.uint64)
        idx = np.arange(n)
        words[idx, idx >> 6] = np.uint64(1) << (idx & 63).astype(np.uint64)
        return cls(n, n, words)

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "BitMatrix":
        dense = np.asarray(dense, dtype=np.uint8) & 1
        return cls(dense.shape[0], dense.shape[1], _pack_rows(dense))

    @classmethod
    def from_rows(cls, rows: Sequence[BitVector]) -> "BitMatrix":
        if not rows:
            raise LinearAlgebraError("from_rows needs at least one row")
        n = rows[0].n
        words = np.stack([r._words for r in rows])
        return cls(len(rows), n, words)

    @property
    def words(self) -> np.ndarray:
        v = self._words.view()
        v.flags.writeable = False
        return v

    def to_dense(self) -> np.ndarray:
        return _unpack_rows(self._words, self.cols)

    def row(self, i: int) -> BitVector:
        return BitVector(self.cols, self._words[i].copy())

    def take_rows(self, indices: Sequence[int]) -> "BitMatrix":
        idx = np.asarray(indices, dtype=np.int64)
        return BitMatrix(len(idx), self.cols, self._words[idx].copy())

    def slice_rows(self, start: int, stop: int) -> "BitMatrix":
        return BitMatrix(stop - start, self.cols, self._words[start:stop].copy())

    def take_cols(self, indices: Sequence[int]) -> "BitMatrix":
        return self.transpose().take_rows(indices).transpose()

    def is_zero(self) -> bool:
        return not self._words.any()

    def copy_words(self) -> np.ndarray:
        return self._words.copy()

    def transpose(self) -> "BitMatrix":
        out = np.zeros((self.cols, _nwords(self.rows)), dtype=np.uint64)
        block = 4096
        for r0 in range(0, self.rows, block):
            r1 = min(r0 + block, self.rows)
            dense = _unpack_rows(self._words[r0:r1], self.cols)
            packed = _pack_rows(np.ascontiguousarray(dense.T))
            out[:, r0 >> 6: (r0 >> 6) + packed.shape[1]] = packed
        return BitMatrix(self.cols, self.rows, out)

    def __matmul__(self, other):
        if isinstance(other, BitVector):
            return matvec(self, other)
        if isinstance(other, BitMatrix):
            return matmul(self, other)
        return NotImplemented

    def __xor__(self, other: "BitMatrix") -> "BitMatrix":
        if (self.rows, self.cols) != (other.rows, other.cols):
            msg = f"shape mismatch: {self.rows}x{self.cols} vs {other.rows}x{other.cols}"
            raise LinearAlgebraError(msg)
        return BitMatrix(self.rows, self.cols, self._words ^ other._words)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return (self.rows, self.cols) == (other.rows, other.cols) and bool(
            np.array_equal(self._words, other._words))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols})"


def matvec(a: BitMatrix, v: BitVector) -> BitVector:
    if a.cols != v.n:
        msg = f"matvec dimension mismatch: {a.rows}x{a.cols} @ {v.n}"
        raise LinearAlgebraError(msg)
    if a.rows == 0:
        return BitVector.zeros(0)
    par = (np.bitwise_count(a._words & v._words[None, :]).sum(axis=1) & 1)
    return BitVector.from_bits(par.astype(np.uint8))


def matmul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    if a.cols != b.rows:
        msg = f"matmul dimension mismatch: {a.rows}x{a.cols} @ {b.rows}x{b.cols}"
        raise LinearAlgebraError(msg)
    out = np.zeros((a.rows, _nwords(b.cols)), dtype=np.uint64)
    if a.rows and b.rows and b.cols:
        a_bytes = a._words.view(np.uint8).reshape(a.rows, -1)
        _kernels.matmul_words(a_bytes, b._words, out)
    return BitMatrix(a.rows, b.cols, out)


def rank(a: BitMatrix) -> int:
    work = a.copy_words()
    aug = np.empty((a.rows, 0), dtype=np.uint64)
    return len(_kernels.eliminate(work, aug, a.cols, False))


def row_reduce(a: BitMatrix) -> tuple[BitMatrix, np.ndarray]:
    """Reduced row echelon form without zero rows, plus pivot columns."""
    work = a.copy_words()
    aug = np.empty((a.rows, 0), dtype=np.uint64)
    pivots = _kernels.eliminate(work, aug, a.cols, True)
    r = len(pivots)
    return BitMatrix(r, a.cols, work[:r].copy()), np.asarray(pivots, dtype=np.int64)


def invert(a: BitMatrix) -> BitMatrix:
    if a.rows != a.cols:
        msg = f"only square matrices are invertible, got {a.rows}x{a.cols}"
        raise LinearAlgebraError(msg)
    work = a.copy_words()
    aug = BitMatrix.identity(a.rows).copy_words()
    pivots = _kernels.eliminate(work, aug, a.cols, True)
    if len(pivots) != a.rows:
        msg = f"matrix is singular: rank {len(pivots)} < {a.rows}"
        raise SingularMatrixError(msg)
    return BitMatrix(a.rows, a.cols, aug)


def kernel_basis(a: BitMatrix) -> BitMatrix:
    """Rows form a basis of the right null space {x : a @ x = 0}.

    One basis row per non-pivot column f, ascending: it has bit f set plus,
    at each pivot column, the corresponding coefficient from the reduced
    echelon form's column f.
    """
    rref, pivots = row_reduce(a)
    free = np.setdiff1d(np.arange(a.cols, dtype=np.int64), pivots)
    k = len(free)
    out = np.zeros((k, _nwords(a.cols)), dtype=np.uint64)
    if k == 0:
        return BitMatrix(0, a.cols, out)
    rdense = rref.to_dense()
    block = 4096
    for f0 in range(0, k, block):
        f1 = min(f0 + block, k)
        dense = np.zeros((f1 - f0, a.cols), dtype=np.uint8)
        if len(pivots):
            dense[:, pivots] = rdense[:, free[f0:f1]].T
        dense[np.arange(f1 - f0), free[f0:f1]] = 1
        out[f0:f1] = _pack_rows(dense)
    return BitMatrix(k, a.cols, out)


def complete_basis(s: BitMatrix, k: BitMatrix, *, k_rank: int | None = None) -> BitMatrix:
    """Extend the rows of ``s`` to a basis of rowspace(``k``) greedily.

    Scans the rows of ``k`` in order and keeps each row that is linearly
    independent of ``s`` and the rows kept so far; returns those rows of
    ``k`` unchanged.  Raises CompletionError if the rows of ``s`` are
    dependent or rowspace(s) is not contained in rowspace(k).  ``k_rank``
    may pass a precomputed rank of ``k`` to skip recomputing it.
    """
    if s.cols != k.cols:
        msg = f"column mismatch: {s.cols} vs {k.cols}"
        raise LinearAlgebraError(msg)
    stacked = np.concatenate([s._words, k._words])
    pivot_cols, pivot_rows = _kernels.eliminate_greedy(stacked, s.cols)
    total = len(pivot_cols)
    n_s = int(np.count_nonzero(pivot_rows < s.rows))
    if n_s != s.rows:
        msg = f"rows of the starting matrix are dependent (rank {n_s} of {s.rows})"
        raise CompletionError(msg)
    kr = rank(k) if k_rank is None else int(k_rank)
    if total != kr:
        msg = ("starting rows are not contained in the target rowspace "
               f"(stacked rank {total}, target rank {kr})")
        raise CompletionError(msg)
    chosen = [int(r) - s.rows for r in pivot_rows if r >= s.rows]
    if not chosen:
        return BitMatrix(0, k.cols, np.zeros((0, _nwords(k.cols)), dtype=np.uint64))
    return k.take_rows(chosen)


def normalize_product(m: BitMatrix, r1: int, r2: int) -> tuple[BitMatrix, BitMatrix, int]:
    """Invertible T1 (r1 x r1), T2 (r2 x r2) with T1 @ m @ T2.T in block form.

    The result has an identity of size c = rank(m) in the lower-right corner
    and zeros elsewhere.  T1 comes from full row reduction of m; T2 permutes
    and completes the pivot columns.
    """
    if (m.rows, m.cols) != (r1, r2):
        msg = f"expected a {r1}x{r2} matrix, got {m.rows}x{m.cols}"
        raise LinearAlgebraError(msg)
    work = m.copy_words()
    aug = BitMatrix.identity(r1).copy_words()
    pivots = np.asarray(_kernels.eliminate(work, aug, r2, True), dtype=np.int64)
    c = len(pivots)
    nonpiv = np.setdiff1d(np.arange(r2, dtype=np.int64), pivots)
    # Row transform: zero rows of the reduction first, pivot rows last.
    order1 = np.concatenate([np.arange(c, r1, dtype=np.int64),
                             np.arange(c, dtype=np.int64)])
    t1 = BitMatrix(r1, r1, aug[order1].copy())
    # Column transform: start from the identity, add to each non-pivot
    # column's row the pivot-row coefficients that cancel it, then order
    # rows as non-pivot columns first.
    rdense = _unpack_rows(work[:c], r2)
    wdense = np.zeros((r2, r2), dtype=np.uint8)
    wdense[np.arange(r2), np.arange(r2)] = 1
    if c and len(nonpiv):
        wdense[np.ix_(nonpiv, pivots)] = rdense[:, nonpiv].T
    order2 = np.concatenate([nonpiv, pivots])
    t2 = BitMatrix.from_dense(wdense[order2])
    return t1, t2, c


def hstack(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    if a.rows != b.rows:
        msg = f"row mismatch: {a.rows} vs {b.rows}"
        raise LinearAlgebraError(msg)
    cols = a.cols + b.cols
    out = np.zeros((a.rows, _nwords(cols)), dtype=np.uint64)
    block = 4096
    for r0 in range(0, a.rows, block):
        r1 = min(r0 + block, a.rows)
        dense = np.concatenate([_unpack_rows(a._words[r0:r1], a.cols),
                                _unpack_rows(b._words[r0:r1], b.cols)], axis=1)
        out[r0:r1] = _pack_rows(dense)
    return BitMatrix(a.rows, cols, out)


def vstack(*mats: BitMatrix) -> BitMatrix:
    if not mats:
        raise LinearAlgebraError("vstack needs at least one matrix")
    cols = mats[0].cols
    for m in mats:
        if m.cols != cols:
            msg = f"column mismatch in vstack: {m.cols} vs {cols}"
            raise LinearAlgebraError(msg)
    words = np.concatenate([m._words for m in mats])
    return BitMatrix(sum(m.rows for m in mats), cols, words)
