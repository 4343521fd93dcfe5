"""Entanglement-assisted CSS code construction over GF(2).

A pair of binary parity-check matrices ``H1``, ``H2`` (possibly equal, and
possibly carrying redundant rows) is turned into a mutually orthogonal pair
by appending ``c = rank(H1 @ H2.T)`` extra columns:

    ``H1p = [T1 @ H1r | J1]``,  ``H2p = [T2 @ H2r | J2]``

where ``Hir`` is a full-row-rank reduction of ``Hi``, the invertible ``Ti``
concentrate the rank of ``H1r @ H2r.T`` into a trailing identity block, and
``Ji`` repeat that identity in the appended columns so the blocks cancel:
``H1p @ H2p.T = 0``.  The rows of ``H1p`` are completed to a basis of the
null space of ``H2p`` by ``E1`` (whose ``m`` rows carry the key bits) and
further to a basis of the full space by ``F1``.  The inverse transpose of
the stacked basis ``N1 = [H1p; E1; F1]`` supplies the dual blocks
``F2, E2, H2pp`` with ``N1 @ N2.T = I``.

Blocks consumed by the key-agreement protocol:

* ``a1 = T1 @ H1r`` gives the syndrome of a zero-padded data word:
  ``H1p @ (x; 0) = a1 @ x``.
* ``e1`` maps an ``(n + c)``-bit word to its ``m`` key bits; it splits into
  ``e1_left`` (data columns) and ``e1_right`` (appended columns).
* ``t1_inv`` and ``x1`` convert reduced-row syndromes back to syndromes of
  the original redundant matrix, which the iterative decoder prefers.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .fingeom import CodeSpec, ParityCheck, build_parity_check, read_alist, write_alist
from .gf2 import (
    BitMatrix,
    LinearAlgebraError,
    complete_basis,
    hstack,
    invert,
    kernel_basis,
    normalize_product,
    rank,
    row_reduce,
    vstack,
)

BUNDLE_FORMAT = "fgqke-code-bundle"
BUNDLE_VERSION = 1
_MANIFEST = "manifest.json"


class BundleError(ValueError):
    """A code bundle on disk is missing, inconsistent, or corrupted."""


@dataclass(frozen=True)
class EaCssCode:
    """An entanglement-assisted CSS code and every block of its construction.

    ``n`` data bits are extended by ``c`` shared bits; ``m`` is the key
    length.  ``h1``/``h2`` keep the original (redundant) checks, ``h1r``/
    ``h2r`` their full-row-rank reductions with ``hi = xi @ hir``, and the
    remaining blocks are described in the module docstring.
    """

    h1: ParityCheck
    h2: ParityCheck
    n: int
    m: int
    c: int
    k1: int
    k2: int
    h1r: BitMatrix
    h2r: BitMatrix
    x1: BitMatrix
    x2: BitMatrix
    t1: BitMatrix
    t2: BitMatrix
    t1_inv: BitMatrix
    h1p: BitMatrix
    h2p: BitMatrix
    e1: BitMatrix
    f1: BitMatrix
    f2: BitMatrix
    e2: BitMatrix
    h2pp: BitMatrix
    a1: BitMatrix
    e1_left: BitMatrix
    e1_right: BitMatrix

    def n1(self) -> BitMatrix:
        """The stacked basis [h1p; e1; f1] of the (n + c)-bit space."""
        return vstack(self.h1p, self.e1, self.f1)

    def n2(self) -> BitMatrix:
        """The dual basis [f2; e2; h2pp]; satisfies n1() @ n2().T = I."""
        return vstack(self.f2, self.e2, self.h2pp)

    def label(self) -> str:
        return f"[[{self.n},{self.m};{self.c}]]"

    def nominal_rate(self) -> float:
        """Net key bits per data bit, (m - c) / n; may be negative."""
        return (self.m - self.c) / self.n


def _shifted_identity(rows: int, c: int) -> BitMatrix:
    """rows x c matrix holding an identity block in its last c rows."""
    if c == 0:
        return BitMatrix.zeros(rows, 0)
    return vstack(BitMatrix.zeros(rows - c, c), BitMatrix.identity(c))


def build_ea_css(h1: ParityCheck | BitMatrix, h2: ParityCheck | BitMatrix | None = None) -> EaCssCode:
    """Build the full augmented structure from one or two parity checks.

    With a single argument the code is self-paired (``h2 = h1``), the common
    case for the finite-geometry families.  Redundant rows are allowed; the
    reduced matrices drive the algebra while the originals are retained for
    decoding.
    """
    if isinstance(h1, BitMatrix):
        h1 = ParityCheck(h1)
    if h2 is None:
        h2 = h1
    elif isinstance(h2, BitMatrix):
        h2 = ParityCheck(h2)
    if h1.matrix.cols != h2.matrix.cols:
        msg = f"column mismatch: {h1.matrix.cols} vs {h2.matrix.cols}"
        raise LinearAlgebraError(msg)
    n = h1.matrix.cols

    h1r, piv1 = row_reduce(h1.matrix)
    if h2 is h1 or h2.matrix == h1.matrix:
        h2r, piv2 = h1r, piv1
    else:
        h2r, piv2 = row_reduce(h2.matrix)
    r1, r2 = h1r.rows, h2r.rows
    k1, k2 = n - r1, n - r2

    # The original matrix restricted to the pivot columns left-factors it
    # through the reduction: hi = xi @ hir, because hir is the identity on
    # those columns.
    x1 = h1.matrix.take_cols(piv1)
    x2 = x1 if h2r is h1r else h2.matrix.take_cols(piv2)

    t1, t2, c = normalize_product(h1r @ h2r.transpose(), r1, r2)
    m = k1 + k2 - n + c
    if m < 0:
        msg = f"negative key length m = {m} for n = {n}, c = {c}"
        raise LinearAlgebraError(msg)

    a1 = t1 @ h1r
    h1p = hstack(a1, _shifted_identity(r1, c))
    h2p = hstack(t2 @ h2r, _shifted_identity(r2, c))

    null2 = kernel_basis(h2p)
    e1 = complete_basis(h1p, null2, k_rank=null2.rows)
    if e1.rows != m:
        msg = f"completion produced {e1.rows} key rows, expected {m}"
        raise LinearAlgebraError(msg)
    f1 = complete_basis(vstack(h1p, e1), BitMatrix.identity(n + c), k_rank=n + c)

    n2 = invert(vstack(h1p, e1, f1)).transpose()
    f2 = n2.slice_rows(0, r1)
    e2 = n2.slice_rows(r1, r1 + m)
    h2pp = n2.slice_rows(r1 + m, n + c)

    return EaCssCode(
        h1=h1, h2=h2, n=n, m=m, c=c, k1=k1, k2=k2,
        h1r=h1r, h2r=h2r, x1=x1, x2=x2, t1=t1, t2=t2, t1_inv=invert(t1),
        h1p=h1p, h2p=h2p, e1=e1, f1=f1, f2=f2, e2=e2, h2pp=h2pp,
        a1=a1,
        e1_left=e1.take_cols(range(n)),
        e1_right=e1.take_cols(range(n, n + c)),
    )


def verify_code(code: EaCssCode) -> dict[str, bool]:
    """Recheck every algebraic requirement; failures are report entries."""
    n, m, c = code.n, code.m, code.c
    r1, r2 = code.h1r.rows, code.h2r.rows
    width = n + c

    n1 = code.n1()
    stacked = vstack(code.h1p, code.e1)
    report = {
        "h1p_h2p_orthogonal": (code.h1p @ code.h2p.transpose()).is_zero(),
        "n1_n2_dual_identity": (n1 @ code.n2().transpose()) == BitMatrix.identity(width),
        "n1_full_rank": rank(n1) == width,
        "h1p_e1_span_kernel": (
            (code.h2p @ stacked.transpose()).is_zero()
            and rank(stacked) == width - r2
        ),
        "h2pp_rowspace_matches_h2p": (
            rank(code.h2pp) == r2 and rank(vstack(code.h2pp, code.h2p)) == r2
        ),
        "block_dimensions": (
            m == code.k1 + code.k2 - n + c
            and (code.h1p.rows, code.h1p.cols) == (r1, width)
            and (code.h2p.rows, code.h2p.cols) == (r2, width)
            and (code.e1.rows, code.e1.cols) == (m, width)
            and (code.f1.rows, code.f1.cols) == (r2, width)
            and (code.f2.rows, code.f2.cols) == (r1, width)
            and (code.e2.rows, code.e2.cols) == (m, width)
            and (code.h2pp.rows, code.h2pp.cols) == (r2, width)
            and (code.a1.rows, code.a1.cols) == (r1, n)
            and (code.e1_left.rows, code.e1_left.cols) == (m, n)
            and (code.e1_right.rows, code.e1_right.cols) == (m, c)
            and (code.t1.rows, code.t1.cols) == (r1, r1)
            and (code.t2.rows, code.t2.cols) == (r2, r2)
        ),
    }
    return report


def code_params(code: EaCssCode) -> tuple[int, int, int, float]:
    """(n, m, c, nominal net rate (m - c) / n)."""
    return code.n, code.m, code.c, code.nominal_rate()


def _write_bitmatrix(path: Path, mat: BitMatrix) -> None:
    """Dense bit-matrix file: uint64-LE rows, cols, then packed rows."""
    header = np.array([mat.rows, mat.cols], dtype="<u8")
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(mat.copy_words().astype("<u8").tobytes())


def _read_bitmatrix(path: Path) -> BitMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise BundleError(f"{path}: truncated header")
    rows, cols = (int(v) for v in np.frombuffer(raw[:16], dtype="<u8"))
    nwords = (cols + 63) // 64
    expected = 16 + 8 * rows * nwords
    if len(raw) != expected:
        raise BundleError(f"{path}: expected {expected} bytes, found {len(raw)}")
    words = np.frombuffer(raw[16:], dtype="<u8").astype(np.uint64).reshape(rows, nwords)
    if cols % 64 and rows:
        mask = np.uint64(~((1 << (cols % 64)) - 1) & (2**64 - 1))
        if np.any(words[:, -1] & mask):
            raise BundleError(f"{path}: nonzero padding bits past column {cols}")
    return BitMatrix(rows, cols, words)


def save_bundle(code: EaCssCode, directory: str | Path) -> Path:
    """Serialize a code to a directory; requires spec-built parity checks."""
    if code.h1.spec is None or code.h2.spec is None:
        raise BundleError("only codes built from a CodeSpec can be bundled")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_alist(code.h1.matrix, directory / "h1.alist")
    write_alist(code.h2.matrix, directory / "h2.alist")
    _write_bitmatrix(directory / "t1.bm", code.t1)
    _write_bitmatrix(directory / "h1p.bm", code.h1p)
    _write_bitmatrix(directory / "e1.bm", code.e1)
    manifest = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "n": code.n,
        "m": code.m,
        "c": code.c,
        "h1_spec": asdict(code.h1.spec),
        "h2_spec": asdict(code.h2.spec),
        "files": ["h1.alist", "h2.alist", "t1.bm", "h1p.bm", "e1.bm"],
    }
    with open(directory / _MANIFEST, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return directory


def load_bundle(directory: str | Path) -> EaCssCode:
    """Rebuild a code from its bundle, cross-checking every stored file.

    The parity checks are reconstructed from the manifest specs, so a load
    also proves the construction still reproduces what was saved.
    """
    directory = Path(directory)
    manifest_path = directory / _MANIFEST
    if not manifest_path.is_file():
        raise BundleError(f"{directory}: no {_MANIFEST}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != BUNDLE_FORMAT:
        raise BundleError(f"{directory}: unrecognized bundle format {manifest.get('format')!r}")

    spec1 = CodeSpec(**manifest["h1_spec"])
    spec2 = CodeSpec(**manifest["h2_spec"])
    h1 = build_parity_check(spec1)
    h2 = h1 if spec2 == spec1 else build_parity_check(spec2)
    for name, check in (("h1.alist", h1), ("h2.alist", h2)):
        if read_alist(directory / name) != check.matrix:
            raise BundleError(f"{directory}/{name} disagrees with the manifest spec")

    code = build_ea_css(h1, h2)
    if (code.n, code.m, code.c) != (manifest["n"], manifest["m"], manifest["c"]):
        raise BundleError(
            f"{directory}: rebuilt {code.label()} but manifest says "
            f"[[{manifest['n']},{manifest['m']};{manifest['c']}]]"
        )
    for name, mat in (("t1.bm", code.t1), ("h1p.bm", code.h1p), ("e1.bm", code.e1)):
        if _read_bitmatrix(directory / name) != mat:
            raise BundleError(f"{directory}/{name} disagrees with the rebuilt code")
    return code
