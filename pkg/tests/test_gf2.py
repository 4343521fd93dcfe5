"""Packed GF(2) linear algebra against independent dense-integer oracles.

Every routine is validated against plain numpy arithmetic mod 2 on unpacked
uint8 arrays, so a bug in the packed word layout or the compiled kernels
cannot hide behind itself.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fgqke import gf2
from fgqke.gf2 import (
    BitMatrix,
    BitVector,
    CompletionError,
    SingularMatrixError,
    complete_basis,
    hstack,
    invert,
    kernel_basis,
    matmul,
    matvec,
    normalize_product,
    rank,
    row_reduce,
    vstack,
)


def dense_rank(a: np.ndarray) -> int:
    """Row-reduction rank oracle on a dense 0/1 array."""
    a = a.copy() % 2
    r = 0
    rows, cols = a.shape
    for c in range(cols):
        pivots = np.nonzero(a[r:, c])[0]
        if len(pivots) == 0:
            continue
        p = r + pivots[0]
        a[[r, p]] = a[[p, r]]
        hit = np.nonzero(a[:, c])[0]
        hit = hit[hit != r]
        a[hit] ^= a[r]
        r += 1
        if r == rows:
            break
    return r


def random_dense(rng: np.random.Generator, rows: int, cols: int, density: float = 0.5):
    return (rng.random((rows, cols)) < density).astype(np.uint8)


shapes = st.tuples(st.integers(1, 80), st.integers(1, 130))


# ---------------------------------------------------------------------------
# BitVector


def test_bitvector_roundtrip_and_ops():
    rng = np.random.default_rng(0)
    bits = (rng.random(200) < 0.4).astype(np.uint8)
    v = BitVector.from_bits(bits)
    assert np.array_equal(v.to_bits(), bits)
    assert len(v) == 200
    assert v.popcount() == int(bits.sum())
    assert all(v[i] == int(bits[i]) for i in range(200))

    other = BitVector.from_bits((rng.random(200) < 0.4).astype(np.uint8))
    assert np.array_equal((v ^ other).to_bits(), bits ^ other.to_bits())

    idx = np.array([3, 77, 150, 199])
    assert np.array_equal(v.take(idx).to_bits(), bits[idx])
    cat = v.concat(other)
    assert np.array_equal(cat.to_bits(), np.concatenate([bits, other.to_bits()]))


def test_bitvector_zeros_and_hex():
    z = BitVector.zeros(70)
    assert z.is_zero() and z.popcount() == 0
    v = BitVector.from_bits(np.array([1, 0, 0, 0, 0, 0, 0, 0, 1], dtype=np.uint8))
    # Bit 0 and bit 8 set -> two hex bytes, little-endian bit order in words.
    assert int(v.to_hex(), 16) == 0x101


@given(st.integers(1, 300), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_bitvector_popcount_matches_dense(n, seed):
    bits = (np.random.default_rng(seed).random(n) < 0.5).astype(np.uint8)
    assert BitVector.from_bits(bits).popcount() == int(bits.sum())


# ---------------------------------------------------------------------------
# BitMatrix structure


@given(shapes, st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_dense_roundtrip(shape, seed):
    dense = random_dense(np.random.default_rng(seed), *shape)
    m = BitMatrix.from_dense(dense)
    assert (m.rows, m.cols) == dense.shape
    assert np.array_equal(m.to_dense(), dense)


@given(shapes, st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_transpose_matches_dense(shape, seed):
    dense = random_dense(np.random.default_rng(seed), *shape)
    m = BitMatrix.from_dense(dense)
    assert np.array_equal(m.transpose().to_dense(), dense.T)
    assert m.transpose().transpose() == m


def test_identity_and_row_access():
    eye = BitMatrix.identity(67)
    assert np.array_equal(eye.to_dense(), np.eye(67, dtype=np.uint8))
    dense = random_dense(np.random.default_rng(1), 9, 130)
    m = BitMatrix.from_dense(dense)
    assert np.array_equal(m.row(4).to_bits(), dense[4])
    assert np.array_equal(m.take_rows(np.array([8, 0, 4])).to_dense(), dense[[8, 0, 4]])
    assert np.array_equal(m.slice_rows(2, 7).to_dense(), dense[2:7])


def test_pad_bits_stay_zero_after_ops():
    # Widths straddling word boundaries; pads must never leak into results.
    for cols in (63, 64, 65, 127, 128, 129):
        dense = random_dense(np.random.default_rng(cols), 20, cols, 0.7)
        m = BitMatrix.from_dense(dense)
        x = m ^ m
        assert x.is_zero()
        t = m.transpose()
        assert np.array_equal(t.to_dense(), dense.T)
        used = cols % 64
        if used:
            mask = ~((np.uint64(1) << np.uint64(used)) - np.uint64(1))
            assert not np.any(m.words[:, -1] & mask)


# ---------------------------------------------------------------------------
# Products


@given(st.integers(1, 60), st.integers(1, 90), st.integers(1, 70), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_matmul_matches_dense(a, b, c, seed):
    rng = np.random.default_rng(seed)
    x = random_dense(rng, a, b)
    y = random_dense(rng, b, c)
    got = matmul(BitMatrix.from_dense(x), BitMatrix.from_dense(y))
    assert np.array_equal(got.to_dense(), (x.astype(np.int64) @ y.astype(np.int64)) % 2)


@given(shapes, st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_matvec_matches_dense(shape, seed):
    rng = np.random.default_rng(seed)
    a = random_dense(rng, *shape)
    v = random_dense(rng, shape[1], 1)[:, 0]
    got = matvec(BitMatrix.from_dense(a), BitVector.from_bits(v))
    assert np.array_equal(got.to_bits(), (a.astype(np.int64) @ v.astype(np.int64)) % 2)


def test_matmul_operator_dispatch():
    rng = np.random.default_rng(5)
    a = random_dense(rng, 10, 20)
    b = random_dense(rng, 20, 5)
    v = random_dense(rng, 20, 1)[:, 0]
    am, bm = BitMatrix.from_dense(a), BitMatrix.from_dense(b)
    assert am @ bm == matmul(am, bm)
    assert (am @ BitVector.from_bits(v)) == matvec(am, BitVector.from_bits(v))


def test_stacking():
    rng = np.random.default_rng(6)
    a = random_dense(rng, 7, 100)
    b = random_dense(rng, 7, 29)
    c = random_dense(rng, 4, 100)
    ha = BitMatrix.from_dense(a)
    assert np.array_equal(
        hstack(ha, BitMatrix.from_dense(b)).to_dense(), np.hstack([a, b])
    )
    assert np.array_equal(
        vstack(ha, BitMatrix.from_dense(c)).to_dense(), np.vstack([a, c])
    )


# ---------------------------------------------------------------------------
# Elimination-based routines


@given(shapes, st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_rank_matches_dense(shape, seed):
    dense = random_dense(np.random.default_rng(seed), *shape)
    assert rank(BitMatrix.from_dense(dense)) == dense_rank(dense)


@given(shapes, st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_row_reduce_is_reduced_echelon(shape, seed):
    dense = random_dense(np.random.default_rng(seed), *shape)
    red, pivots = row_reduce(BitMatrix.from_dense(dense))
    r = len(pivots)
    assert r == dense_rank(dense)
    assert red.rows == r
    d = red.to_dense()
    # Pivot columns strictly increase and carry exactly one 1 each.
    assert np.all(np.diff(pivots) > 0)
    for i, p in enumerate(pivots):
        col = d[:, p]
        assert col[i] == 1 and col.sum() == 1
        assert not d[i, :p].any()
    # Same row space: every reduced row must vanish under the original's
    # elimination and vice versa (rank of the stack stays r).
    stacked = np.vstack([dense, d])
    assert dense_rank(stacked) == r


def test_invert_roundtrip_and_singular():
    rng = np.random.default_rng(11)
    n = 70
    while True:
        dense = random_dense(rng, n, n)
        if dense_rank(dense) == n:
            break
    m = BitMatrix.from_dense(dense)
    inv = invert(m)
    assert matmul(inv, m) == BitMatrix.identity(n)
    assert matmul(m, inv) == BitMatrix.identity(n)

    singular = dense.copy()
    singular[-1] = singular[0] ^ singular[1]
    with pytest.raises(SingularMatrixError):
        invert(BitMatrix.from_dense(singular))


@given(shapes, st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_kernel_basis_spans_null_space(shape, seed):
    dense = random_dense(np.random.default_rng(seed), *shape)
    m = BitMatrix.from_dense(dense)
    k = kernel_basis(m)
    assert k.rows == m.cols - dense_rank(dense)
    if k.rows:
        assert matmul(m, k.transpose()).is_zero()
        assert rank(k) == k.rows


def test_complete_basis_keeps_prefix_and_extends():
    s = BitMatrix.from_dense(np.array([[1, 1, 0]], dtype=np.uint8))
    k = BitMatrix.identity(3)
    ext = complete_basis(s, k, k_rank=3)
    # Greedy scan keeps the first and third candidate rows: e0 is dependent
    # with s only after e1 is known, so e0 enters, then e1 is rejected.
    assert np.array_equal(ext.to_dense(), np.array([[1, 0, 0], [0, 0, 1]], dtype=np.uint8))
    full = vstack(s, ext)
    assert rank(full) == 3


@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_complete_basis_properties(n, seed):
    rng = np.random.default_rng(seed)
    dense = random_dense(rng, rng.integers(1, n + 1), n)
    red, _ = row_reduce(BitMatrix.from_dense(dense))
    if red.rows == 0 or red.rows == n:
        return
    ext = complete_basis(red, BitMatrix.identity(n), k_rank=n)
    assert ext.rows == n - red.rows
    assert rank(vstack(red, ext)) == n
    # Extension rows are rows of the candidate basis, untouched.
    eye = np.eye(n, dtype=np.uint8)
    for i in range(ext.rows):
        row = ext.row(i).to_bits()
        assert any(np.array_equal(row, eye[j]) for j in range(n))


def test_complete_basis_rejects_dependent_prefix():
    s = BitMatrix.from_dense(np.array([[1, 0], [1, 0]], dtype=np.uint8))
    with pytest.raises(CompletionError):
        complete_basis(s, BitMatrix.identity(2), k_rank=2)


def test_complete_basis_rejects_insufficient_candidates():
    s = BitMatrix.from_dense(np.array([[1, 0, 0]], dtype=np.uint8))
    k = BitMatrix.from_dense(np.array([[1, 1, 0]], dtype=np.uint8))
    with pytest.raises(CompletionError):
        complete_basis(s, k, k_rank=1)


@given(st.integers(1, 50), st.integers(1, 50), st.integers(1, 60), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_normalize_product_block_form(r1_rows, r2_rows, n, seed):
    rng = np.random.default_rng(seed)
    d1 = random_dense(rng, r1_rows, n)
    d2 = random_dense(rng, r2_rows, n)
    red1, _ = row_reduce(BitMatrix.from_dense(d1))
    red2, _ = row_reduce(BitMatrix.from_dense(d2))
    if red1.rows == 0 or red2.rows == 0:
        return
    m = matmul(red1, red2.transpose())
    t1, t2, c = normalize_product(m, red1.rows, red2.rows)
    prod = matmul(matmul(t1, m), t2.transpose()).to_dense()
    expect = np.zeros_like(prod)
    if c:
        expect[-c:, -c:] = np.eye(c, dtype=np.uint8)
    assert np.array_equal(prod, expect)
    assert c == dense_rank(m.to_dense())
    # Both transforms invertible.
    invert(t1)
    invert(t2)
