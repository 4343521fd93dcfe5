"""Serial numba kernels for packed GF(2) algebra, geometry enumeration and decoding.

Matrices over GF(2) are stored row-major as numpy uint64 arrays, 64 columns per
word, least significant bit first inside each word.  Pad bits past the last
column are kept zero by every caller; the kernels preserve that invariant
(elimination only swaps and XORs whole row tails, products only combine rows).

All kernels are single-threaded on purpose: they run with ``nogil=True`` so a
thread pool above them can overlap work, and ``cache=True`` so the compiled
artifacts persist between processes.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

UINT1 = np.uint64(1)


@njit(cache=True, nogil=True)
def eliminate(main, aug, col_limit, full):
    """Gaussian elimination in place; returns the pivot column array.

    Columns 0..col_limit-1 are scanned left to right; the pivot row for a
    column is the first row at or below the current rank with that bit set
    (rows are swapped into place, which keeps eliminated rows zero to the left
    of the current column, so XORs can start at the column's word).  With
    ``full`` set the pivot row is also cleared from every other row, giving
    reduced row echelon form and, via ``aug``, inverses; otherwise only rows
    below are cleared.  ``aug`` rides along row-for-row and may have zero
    width.
    """
    rows = main.shape[0]
    wm = main.shape[1]
    wa = aug.shape[1]
    cap = rows if rows < col_limit else col_limit
    pivot_cols = np.empty(cap, dtype=np.int64)
    rank = 0
    for col in range(col_limit):
        if rank == rows:
            break
        w = col >> 6
        bit = UINT1 << np.uint64(col & 63)
        piv = -1
        for r in range(rank, rows):
            if main[r, w] & bit:
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            for j in range(w, wm):
                tmp = main[piv, j]
                main[piv, j] = main[rank, j]
                main[rank, j] = tmp
            for j in range(wa):
                tmp = aug[piv, j]
                aug[piv, j] = aug[rank, j]
                aug[rank, j] = tmp
        lo = 0 if full else rank + 1
        for r in range(lo, rows):
            if r != rank and (main[r, w] & bit):
                for j in range(w, wm):
                    main[r, j] ^= main[rank, j]
                for j in range(wa):
                    aug[r, j] ^= aug[rank, j]
        pivot_cols[rank] = col
        rank += 1
    return pivot_cols[:rank]


@njit(cache=True, nogil=True)
def eliminate_greedy(main, col_limit):
    """Row-greedy elimination: pivots are chosen by smallest row index.

    No swaps are performed, so the row at a given index never changes
    identity.  For each column the pivot is the lowest-index row that is not
    already a pivot and has the bit set; it is then cleared from every other
    non-pivot row.  A non-pivot row is therefore zero on all processed
    columns, which both justifies starting XORs at the column's word and
    makes the pivot row set exactly the greedy (lexicographically first)
    maximal independent subset of the input rows.

    Returns (pivot_cols, pivot_rows), aligned, in pivot order.
    """
    rows = main.shape[0]
    wm = main.shape[1]
    cap = rows if rows < col_limit else col_limit
    pivot_cols = np.empty(cap, dtype=np.int64)
    pivot_rows = np.empty(cap, dtype=np.int64)
    is_pivot = np.zeros(rows, dtype=np.uint8)
    rank = 0
    for col in range(col_limit):
        if rank == rows:
            break
        w = col >> 6
        bit = UINT1 << np.uint64(col & 63)
        piv = -1
        for r in range(rows):
            if is_pivot[r] == 0 and (main[r, w] & bit):
                piv = r
                break
        if piv < 0:
            continue
        for r in range(piv + 1, rows):
            if is_pivot[r] == 0 and (main[r, w] & bit):
                for j in range(w, wm):
                    main[r, j] ^= main[piv, j]
        is_pivot[piv] = 1
        pivot_cols[rank] = col
        pivot_rows[rank] = piv
        rank += 1
    return pivot_cols[:rank], pivot_rows[:rank]


@njit(cache=True, nogil=True)
def matmul_words(a_bytes, b_words, out):
    """out ^= A @ B on packed words, via 8-column blocks of A.

    ``a_bytes`` is A's word storage viewed as bytes (one byte = 8 columns).
    For each byte position a 256-entry table of XOR combinations of the
    corresponding 8 rows of B is built by doubling, then each row of A
    gathers its combination with a single lookup.  Zero bytes are skipped,
    which makes sparse A (parity-check matrices) cheap.
    """
    ra = a_bytes.shape[0]
    nchunks = a_bytes.shape[1]
    nb = b_words.shape[0]
    wb = b_words.shape[1]
    table = np.empty((256, wb), dtype=np.uint64)
    for ch in range(nchunks):
        base = ch << 3
        if base >= nb:
            break
        nbits = nb - base
        if nbits > 8:
            nbits = 8
        for j in range(wb):
            table[0, j] = 0
        size = 1
        for t in range(nbits):
            row = base + t
            for k in range(size):
                for j in range(wb):
                    table[size + k, j] = table[k, j] ^ b_words[row, j]
            size <<= 1
        for i in range(ra):
            idx = a_bytes[i, ch]
            if idx != 0:
                for j in range(wb):
                    out[i, j] ^= table[idx, j]


@njit(cache=True, nogil=True)
def field_fill(m, poly, exp):
    """Fill ``exp`` with powers of the root of ``poly`` in GF(2^m).

    ``exp[i]`` becomes alpha^i as an integer bit mask, i in [0, 2^m - 1).
    Returns True iff alpha first returns to 1 after exactly 2^m - 1 steps,
    i.e. iff ``poly`` is primitive (a reducible or merely irreducible
    polynomial gives the root a shorter multiplicative period, caught by the
    early return).
    """
    size = (1 << m) - 1
    top = 1 << m
    x = 1
    for i in range(size):
        exp[i] = x
        x <<= 1
        if x & top:
            x ^= poly
        if x == 1 and i < size - 1:
            return False
    return x == 1


@njit(cache=True, nogil=True)
def eg_lines(exp, log, n_points, n1, q):
    """Lines of EG(p, q) not through the origin, as sorted point-index rows.

    Points are the nonzero field elements of GF(q^p), indexed by discrete log
    (point i is alpha^i).  The multiplicative subfield GF(q)* is the set of
    powers alpha^(j*n1).  For each 1-dimensional direction subspace (offset d
    in [0, n1)) the cosets a + GF(q)*alpha^d are walked in increasing minimal
    log; cosets through the origin are skipped but still marked visited.
    """
    # n_points = q^p - 1; lines per direction = q^(p-1) - 1; directions = n1.
    total = n1 * ((n_points + 1) // q - 1)
    lines = np.empty((total, q), dtype=np.int32)
    visited = np.empty(n_points, dtype=np.uint8)
    members = np.empty(q, dtype=np.int64)
    count = 0
    for d in range(n1):
        for i in range(n_points):
            visited[i] = 0
        for a in range(n_points):
            if visited[a]:
                continue
            amask = exp[a]
            through_origin = False
            members[0] = a
            for j in range(q - 1):
                mm = amask ^ exp[(d + j * n1) % n_points]
                if mm == 0:
                    through_origin = True
                    members[1 + j] = -1
                else:
                    members[1 + j] = log[mm]
            for k in range(q):
                if members[k] >= 0:
                    visited[members[k]] = 1
            if through_origin:
                continue
            srt = np.sort(members[:q])
            for k in range(q):
                lines[count, k] = srt[k]
            count += 1
    return lines[:count]


@njit(cache=True, nogil=True)
def pg_lines(exp, log, big_order, n_points, q, total):
    """Lines of PG(p, q) as sorted point-class rows, pair-coverage order.

    Points are classes of nonzero elements of GF(q^(p+1)) modulo GF(q)*;
    the class of x is log(x) mod n_points.  The line through distinct classes
    i < j contains i, j and the classes of alpha^(i + u*n_points) + alpha^j.
    Enumeration scans (i, j) lexicographically and skips pairs already
    covered, so each line appears once, keyed by its two smallest points.
    """
    lines = np.empty((total, q + 1), dtype=np.int32)
    covered = np.zeros((n_points, n_points), dtype=np.uint8)
    members = np.empty(q + 1, dtype=np.int64)
    count = 0
    for i in range(n_points):
        for j in range(i + 1, n_points):
            if covered[i, j]:
                continue
            members[0] = i
            members[1] = j
            yj = exp[j]
            for u in range(q - 1):
                mm = yj ^ exp[(i + u * n_points) % big_order]
                members[2 + u] = log[mm] % n_points
            srt = np.sort(members[: q + 1])
            for k in range(q + 1):
                lines[count, k] = srt[k]
            for a in range(q + 1):
                for b in range(a + 1, q + 1):
                    covered[srt[a], srt[b]] = 1
            count += 1
    return lines[:count]


@njit(cache=True, nogil=True)
def spa_check_products(check_ptr, tanhs, out):
    """Per-check exclusion products of tanh values, clipped away from +-1.

    For each check span [a, b) in the edge array, out[a + k] receives the
    product of every tanh in the span except position k, computed with a
    prefix/suffix sweep (no division) and clipped to +-(1 - 1e-12) so a
    subsequent atanh stays finite.
    """
    n_checks = check_ptr.shape[0] - 1
    prod_lim = 1.0 - 1e-12
    for c in range(n_checks):
        a = check_ptr[c]
        b = check_ptr[c + 1]
        prod = 1.0
        for k in range(a, b):
            out[k] = prod
            prod *= tanhs[k]
        suffix = 1.0
        for k in range(b - 1, a - 1, -1):
            ex = out[k] * suffix
            suffix *= tanhs[k]
            if ex > prod_lim:
                ex = prod_lim
            elif ex < -prod_lim:
                ex = -prod_lim
            out[k] = ex


@njit(cache=True, nogil=True)
def spa_parity_ok(check_ptr, check_vars, hard, syndrome):
    """True iff the hard decision reproduces the syndrome; early exit."""
    n_checks = check_ptr.shape[0] - 1
    for c in range(n_checks):
        par = np.uint8(0)
        for k in range(check_ptr[c], check_ptr[c + 1]):
            par ^= hard[check_vars[k]]
        if par != syndrome[c]:
            return False
    return True


@njit(cache=True, nogil=True)
def spa_var_pass(check_vars, edge_scale, msg_cv, prior, llr_clamp,
                 totals, msg_vc, hard):
    """Variable-node update after the check stage.

    msg_cv arrives holding unsigned atanh magnitudes and is rescaled in
    place by edge_scale (the per-edge syndrome sign folded with the atanh
    doubling).  totals accumulates the posterior per variable in edge
    order; msg_vc receives the clamped extrinsic messages and hard the
    sign decisions.
    """
    n_vars = totals.shape[0]
    n_edges = check_vars.shape[0]
    for v in range(n_vars):
        totals[v] = prior
    for k in range(n_edges):
        m = edge_scale[k] * msg_cv[k]
        msg_cv[k] = m
        totals[check_vars[k]] += m
    for k in range(n_edges):
        mv = totals[check_vars[k]] - msg_cv[k]
        if mv > llr_clamp:
            mv = llr_clamp
        elif mv < -llr_clamp:
            mv = -llr_clamp
        msg_vc[k] = mv
    for v in range(n_vars):
        hard[v] = 1 if totals[v] < 0.0 else 0
