"""Entanglement-assisted CSS construction, verification, and bundles.

Key counts are cross-checked against an independent dense-arithmetic oracle
(c as the rank of H @ H.T over GF(2), m = k1 + k2 - n + c), the published
parameters of small finite-geometry codes are pinned, and every block
identity is exercised both through verify_code and directly.
"""

import dataclasses
import json

import numpy as np
import pytest

from fgqke.eaqecc import (
    BundleError,
    EaCssCode,
    _read_bitmatrix,
    _write_bitmatrix,
    build_ea_css,
    code_params,
    load_bundle,
    save_bundle,
    verify_code,
)
from fgqke.fingeom import CodeSpec, ParityCheck, build_parity_check
from fgqke.gf2 import BitMatrix, BitVector, LinearAlgebraError, matvec, vstack

# ---------------------------------------------------------------------------
# Independent oracle


def dense_rank(dense: np.ndarray) -> int:
    work = dense.astype(np.uint8) % 2
    r = 0
    for col in range(work.shape[1]):
        rows = np.nonzero(work[r:, col])[0]
        if not len(rows):
            continue
        pivot = r + rows[0]
        work[[r, pivot]] = work[[pivot, r]]
        hit = np.nonzero(work[:, col])[0]
        hit = hit[hit != r]
        work[hit] ^= work[r]
        r += 1
    return r


def oracle_params(dense: np.ndarray) -> tuple[int, int, int]:
    n = dense.shape[1]
    r = dense_rank(dense)
    c = dense_rank((dense @ dense.T) % 2)
    return n, 2 * (n - r) - n + c, c


def build(family: str, s: int, c_sp: int = 1, r_sp: int = 1) -> EaCssCode:
    return build_ea_css(build_parity_check(CodeSpec(family, 2, s, c_sp, r_sp)))


# ---------------------------------------------------------------------------
# Parameters


@pytest.mark.parametrize(
    "family,s,expected",
    [
        ("pg1", 2, (21, 2, 1)),
        ("pg1", 3, (73, 18, 1)),
        ("eg1", 3, (63, 19, 8)),
        ("eg1", 4, (255, 111, 16)),
    ],
)
def test_small_code_parameters_match_dense_oracle(family, s, expected):
    h = build_parity_check(CodeSpec(family, 2, s, 1, 1))
    code = build_ea_css(h)
    assert (code.n, code.m, code.c) == expected
    assert oracle_params(h.matrix.to_dense()) == expected


def test_published_code_parameters():
    assert code_params(build("pg1", 5))[:3] == (1057, 570, 1)
    assert code_params(build("eg1", 5))[:3] == (1023, 571, 32)
    assert code_params(build("pg1", 3))[:3] == (73, 18, 1)


def test_nominal_rate():
    code = build("pg1", 3)
    n, m, c, rate = code_params(code)
    assert rate == (m - c) / n == pytest.approx(17 / 73)
    assert build("eg1", 2).nominal_rate() < 0  # c exceeds m for this code


def test_label():
    assert build("pg1", 2).label() == "[[21,2;1]]"


# ---------------------------------------------------------------------------
# Construction identities


@pytest.fixture(scope="module")
def pg3_code() -> EaCssCode:
    return build("pg1", 3)


def test_verify_passes_for_constructed_codes(pg3_code):
    report = verify_code(pg3_code)
    assert report == {key: True for key in report}


def test_original_matrix_factors_through_reduction(pg3_code):
    code = pg3_code
    assert code.x1 @ code.h1r == code.h1.matrix
    assert code.x2 @ code.h2r == code.h2.matrix


def test_zero_padded_syndrome_identity(pg3_code):
    code = pg3_code
    rng = np.random.default_rng(7)
    for _ in range(16):
        e = BitVector.from_bits(rng.integers(0, 2, code.n))
        padded = e.concat(BitVector.zeros(code.c))
        assert matvec(code.h1p, padded) == matvec(code.a1, e)


def test_key_map_splits_into_data_and_shared_parts(pg3_code):
    code = pg3_code
    rng = np.random.default_rng(11)
    for _ in range(16):
        x = BitVector.from_bits(rng.integers(0, 2, code.n))
        kappa = BitVector.from_bits(rng.integers(0, 2, code.c))
        whole = matvec(code.e1, x.concat(kappa))
        split = matvec(code.e1_left, x) ^ matvec(code.e1_right, kappa)
        assert whole == split


def test_block_duality_relations(pg3_code):
    code = pg3_code
    r1, r2, m = code.h1r.rows, code.h2r.rows, code.m
    assert code.h1p @ code.f2.transpose() == BitMatrix.identity(r1)
    assert code.e1 @ code.e2.transpose() == BitMatrix.identity(m)
    assert code.f1 @ code.h2pp.transpose() == BitMatrix.identity(r2)
    assert (code.h1p @ code.e2.transpose()).is_zero()
    assert (code.h1p @ code.h2pp.transpose()).is_zero()
    assert (code.e1 @ code.f2.transpose()).is_zero()
    assert (code.e1 @ code.h2pp.transpose()).is_zero()
    assert (code.f1 @ code.f2.transpose()).is_zero()
    assert (code.f1 @ code.e2.transpose()).is_zero()


def test_distinct_parity_checks_with_orthogonal_rowspaces():
    # A classic two-matrix case: row spaces orthogonal, so c = 0 and the
    # construction degenerates to an ordinary CSS code with m = k1 + k2 - n.
    h1 = BitMatrix.from_dense(np.array([[1, 1, 0, 0], [0, 1, 1, 0]], dtype=np.uint8))
    h2 = BitMatrix.from_dense(np.array([[1, 1, 1, 1]], dtype=np.uint8))
    code = build_ea_css(h1, h2)
    assert (code.n, code.m, code.c) == (4, 1, 0)
    assert all(verify_code(code).values())
    assert code.e1_right.cols == 0


def test_column_mismatch_rejected():
    h1 = BitMatrix.identity(4)
    h2 = BitMatrix.identity(5)
    with pytest.raises(LinearAlgebraError, match="column mismatch"):
        build_ea_css(h1, h2)


def test_redundant_rows_are_tolerated():
    base = np.array([[1, 1, 0, 0], [0, 1, 1, 0]], dtype=np.uint8)
    doubled = np.concatenate([base, base[::-1], [base[0] ^ base[1]]])
    code = build_ea_css(BitMatrix.from_dense(doubled))
    reference = build_ea_css(BitMatrix.from_dense(base))
    assert (code.n, code.m, code.c) == (reference.n, reference.m, reference.c)
    assert all(verify_code(code).values())


def test_mutated_key_block_fails_verification(pg3_code):
    words = pg3_code.e1.copy_words()
    words[0] = 0
    broken = dataclasses.replace(pg3_code, e1=BitMatrix(pg3_code.e1.rows, pg3_code.e1.cols, words))
    report = verify_code(broken)
    assert not report["h1p_e1_span_kernel"]
    assert not report["n1_full_rank"]
    assert not report["n1_n2_dual_identity"]
    assert report["h1p_h2p_orthogonal"]  # untouched blocks still pass


def test_mutated_dual_block_fails_only_duality(pg3_code):
    words = pg3_code.h2pp.copy_words()
    words[0] = 0
    broken = dataclasses.replace(
        pg3_code, h2pp=BitMatrix(pg3_code.h2pp.rows, pg3_code.h2pp.cols, words)
    )
    report = verify_code(broken)
    assert not report["n1_n2_dual_identity"]
    assert not report["h2pp_rowspace_matches_h2p"]
    assert report["n1_full_rank"]


# ---------------------------------------------------------------------------
# Bit-matrix files and bundles


def test_bitmatrix_file_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    for rows, cols in [(1, 1), (3, 64), (5, 65), (7, 130), (4, 0)]:
        mat = BitMatrix.from_dense(rng.integers(0, 2, (rows, cols)).astype(np.uint8))
        path = tmp_path / f"m{rows}x{cols}.bm"
        _write_bitmatrix(path, mat)
        assert _read_bitmatrix(path) == mat


def test_bitmatrix_file_rejects_bad_sizes(tmp_path):
    path = tmp_path / "bad.bm"
    path.write_bytes(b"\x01\x02")
    with pytest.raises(BundleError, match="truncated"):
        _read_bitmatrix(path)
    _write_bitmatrix(path, BitMatrix.identity(9))
    data = path.read_bytes()
    path.write_bytes(data[:-4])
    with pytest.raises(BundleError, match="expected"):
        _read_bitmatrix(path)


def test_bitmatrix_file_rejects_padding_garbage(tmp_path):
    path = tmp_path / "pad.bm"
    _write_bitmatrix(path, BitMatrix.zeros(2, 10))
    data = bytearray(path.read_bytes())
    data[-1] |= 0x80  # bit 63 of the last word, past column 10
    path.write_bytes(bytes(data))
    with pytest.raises(BundleError, match="padding"):
        _read_bitmatrix(path)


@pytest.mark.parametrize("spec", [CodeSpec("eg1", 2, 2, 1, 1), CodeSpec("pg1", 2, 2, 2, 1)])
def test_bundle_roundtrip(tmp_path, spec):
    code = build_ea_css(build_parity_check(spec))
    directory = save_bundle(code, tmp_path / spec.label())
    loaded = load_bundle(directory)
    assert (loaded.n, loaded.m, loaded.c) == (code.n, code.m, code.c)
    assert loaded.h1.spec == spec
    assert loaded.e1 == code.e1 and loaded.t1 == code.t1 and loaded.h1p == code.h1p
    assert loaded.n1() == code.n1() and loaded.n2() == code.n2()


def test_bundle_rejects_adhoc_code(tmp_path):
    code = build_ea_css(BitMatrix.from_dense(np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)))
    with pytest.raises(BundleError, match="CodeSpec"):
        save_bundle(code, tmp_path / "adhoc")


def test_bundle_detects_tampering(tmp_path):
    code = build_ea_css(build_parity_check(CodeSpec("eg1", 2, 2, 1, 1)))
    directory = save_bundle(code, tmp_path / "code")

    data = bytearray((directory / "e1.bm").read_bytes())
    data[16] ^= 1
    (directory / "e1.bm").write_bytes(bytes(data))
    with pytest.raises(BundleError, match="e1.bm"):
        load_bundle(directory)

    save_bundle(code, directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    manifest["m"] += 1
    (directory / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(BundleError, match="manifest"):
        load_bundle(directory)

    save_bundle(code, directory)
    bad = build_parity_check(CodeSpec("eg1", 2, 2, 2, 1))
    from fgqke.fingeom import write_alist

    write_alist(bad.matrix, directory / "h1.alist")
    with pytest.raises(BundleError, match="h1.alist"):
        load_bundle(directory)


def test_bundle_missing_manifest(tmp_path):
    with pytest.raises(BundleError, match="manifest"):
        load_bundle(tmp_path)


def test_bundle_unrecognized_format(tmp_path):
    (tmp_path / "manifest.json").write_text('{"format": "something-else"}')
    with pytest.raises(BundleError, match="format"):
        load_bundle(tmp_path)
