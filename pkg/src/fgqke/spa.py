"""Syndrome-driven sum-product decoding on sparse parity-check matrices.

The decoder works directly on a target syndrome: check node ``c`` has its
sign flipped when ``s[c] = 1``, so the hard decision converges to an error
pattern ``ê`` with ``H @ ê = s`` rather than to a corrected codeword.  All
variables share the uniform prior ``log((1 - p) / p)`` for a crossover
probability ``p``.  Message passing uses the flooding schedule in the
log-likelihood domain with the tanh-product check update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .fingeom import ParityCheck
from .gf2 import BitMatrix, BitVector

# Variable-to-check messages are clamped to this magnitude: tanh(0.5 * 30)
# is 1 at double precision, so larger values only invite overflow in the
# check-node products without changing any decision.
LLR_CLAMP = 30.0

DEFAULT_MAX_ITER = 100


class DecodeError(ValueError):
    """Invalid decoder inputs (dimensions or crossover probability)."""


@dataclass(frozen=True)
class TannerGraph:
    """Bipartite adjacency of a parity-check matrix in CSR form.

    Edges are numbered in check-major order: edge ids for check ``c`` are
    ``check_ptr[c]:check_ptr[c+1]``, ``check_vars`` holds their variable
    indices, and ``edge_check`` their check index.  ``var_edges`` lists,
    per variable, the ids of its incident edges (CSR via ``var_ptr``),
    letting the two message directions share one buffer layout.
    """

    n_checks: int
    n_vars: int
    check_ptr: np.ndarray
    check_vars: np.ndarray
    var_ptr: np.ndarray
    var_edges: np.ndarray
    edge_check: np.ndarray
    max_check_degree: int

    @property
    def n_edges(self) -> int:
        return int(self.check_vars.shape[0])


@dataclass(frozen=True)
class DecodeResult:
    """Decoder output: ``converged`` is true iff H @ error_estimate = s."""

    error_estimate: BitVector
    converged: bool
    iterations_used: int


def build_graph(h: ParityCheck | BitMatrix) -> TannerGraph:
    """Extract the Tanner graph of a parity-check matrix."""
    matrix = h.matrix if isinstance(h, ParityCheck) else h
    counts = np.zeros(matrix.rows, dtype=np.int64)
    col_blocks: list[np.ndarray] = []
    block = 2048
    for r0 in range(0, matrix.rows, block):
        dense = matrix.slice_rows(r0, min(r0 + block, matrix.rows)).to_dense()
        rows, cols = np.nonzero(dense)
        counts[r0:r0 + dense.shape[0]] = np.bincount(rows, minlength=dense.shape[0])
        col_blocks.append(cols.astype(np.int64))
    check_vars = (
        np.concatenate(col_blocks) if col_blocks else np.zeros(0, dtype=np.int64)
    )
    check_ptr = np.zeros(matrix.rows + 1, dtype=np.int64)
    np.cumsum(counts, out=check_ptr[1:])

    # Stable sort by variable keeps edge ids ascending inside each group.
    var_edges = np.argsort(check_vars, kind="stable").astype(np.int64)
    var_counts = np.bincount(check_vars, minlength=matrix.cols)
    var_ptr = np.zeros(matrix.cols + 1, dtype=np.int64)
    np.cumsum(var_counts, out=var_ptr[1:])

    return TannerGraph(
        n_checks=matrix.rows,
        n_vars=matrix.cols,
        check_ptr=check_ptr,
        check_vars=check_vars,
        var_ptr=var_ptr,
        var_edges=var_edges,
        edge_check=np.repeat(np.arange(matrix.rows, dtype=np.int64), counts),
        max_check_degree=int(counts.max()) if matrix.rows else 0,
    )


def decode_syndrome(
    g: TannerGraph,
    s: BitVector,
    p: float,
    max_iter: int = DEFAULT_MAX_ITER,
) -> DecodeResult:
    """Estimate an error pattern whose syndrome is ``s``.

    Runs belief propagation for at most ``max_iter`` iterations, forming a
    hard decision after each; stops early once the decision reproduces the
    syndrome.  A zero syndrome is satisfied by the iteration-0 all-zeros
    decision.  The final decision is returned even when unconverged.
    """
    if len(s) != g.n_checks:
        raise DecodeError(f"syndrome length {len(s)} != {g.n_checks} checks")
    if not 0.0 < p < 0.5:
        raise DecodeError(f"crossover probability {p} outside (0, 0.5)")
    if max_iter < 1:
        raise DecodeError(f"max_iter must be at least 1, got {max_iter}")
    syndrome = s.to_bits()
    if not syndrome.any():
        # The iteration-0 hard decision (all zeros, from the uniform prior)
        # already satisfies an all-zero syndrome.
        return DecodeResult(BitVector.zeros(g.n_vars), True, 0)

    prior = math.log((1.0 - p) / p)
    n_edges = g.n_edges
    # Check-node output sign, folded together with the atanh doubling.
    edge_scale = np.where(syndrome[g.edge_check], -2.0, 2.0)

    msg_vc = np.full(n_edges, prior)
    work = np.empty(n_edges)
    msg_cv = np.empty(n_edges)
    totals = np.empty(g.n_vars)
    hard = np.empty(g.n_vars, dtype=np.uint8)
    # The variable-to-check array is the entire recurrence state, so an
    # exact repeat of it (period 1 or 2) pins every later iterate; such
    # cycles are fast-forwarded to the state max_iter would have reached.
    prev1 = msg_vc.copy()
    prev2 = msg_vc.copy()

    it = 0
    closing_cycle = False
    while it < max_iter:
        it += 1
        np.multiply(msg_vc, 0.5, out=work)
        np.tanh(work, out=work)
        _kernels.spa_check_products(g.check_ptr, work, msg_cv)
        np.arctanh(msg_cv, out=msg_cv)
        _kernels.spa_var_pass(
            g.check_vars, edge_scale, msg_cv, prior, LLR_CLAMP,
            totals, msg_vc, hard,
        )
        if _kernels.spa_parity_ok(g.check_ptr, g.check_vars, hard, syndrome):
            return DecodeResult(BitVector.from_bits(hard), True, it)
        if closing_cycle:
            break
        if np.array_equal(msg_vc, prev1):
            break
        if it >= 2 and np.array_equal(msg_vc, prev2):
            if (max_iter - it) % 2 == 0:
                break
            # The final state is the cycle's other point: run exactly one
            # more iteration, then stop.
            closing_cycle = True
            it = max_iter - 1
            continue
        prev1, prev2 = prev2, prev1
        np.copyto(prev1, msg_vc)
    return DecodeResult(BitVector.from_bits(hard), False, max_iter)
