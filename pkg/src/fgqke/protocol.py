"""Key-expansion post-processing over a simulated binary symmetric channel.

Two parties share ``n``-bit sifted blocks that differ by an i.i.d. error
pattern, plus a short preshared secret ``κ`` of length ``c``.  The original
flow announces one syndrome, decodes, and maps both blocks through the key
rows ``E1``; it produces a key unconditionally, wrong wherever decoding
failed.  The improved flow uses zero-padded syndromes (so nothing announced
depends on κ), aborts on decoder non-convergence, publicly compares ``μ``
sampled key bits to catch residual undetected errors, and only then folds
κ in — consuming the preshared secret solely on success.

The module also carries the closed-form performance predictions for the
improved flow: the sampling survival factor ``f``, the residual key bit
error rate, the minimal sampling length ``μ`` for a target ``ε``, and the
net key rate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .eaqecc import EaCssCode
from .gf2 import BitVector, matvec
from .spa import DEFAULT_MAX_ITER, TannerGraph, build_graph, decode_syndrome

# Channel-estimate values are pushed inside this range before being used as
# the decoder prior; log((1-p)/p) must stay finite on both ends.
PRIOR_FLOOR = 1e-3
PRIOR_CEIL = 0.499

STATUS_OK = "ok"
STATUS_ABORT_SIFT = "abort_sift"
STATUS_ABORT_ESTIMATION = "abort_estimation"
STATUS_ABORT_SYNDROME = "abort_syndrome"
STATUS_ABORT_SAMPLE = "abort_sample"


class ProtocolError(ValueError):
    """Invalid protocol inputs or an unreachable operating point."""


@dataclass(frozen=True)
class ProtocolConfig:
    """Knobs for sifting, estimation, and decoding.

    ``delta`` is the sifting overhead factor: (2 + 3δ)n raw bits are sent
    and the run aborts when fewer than (1 + δ)n survive basis matching.
    ``epsilon`` is the target key bit error rate used to size the sampling
    check.  ``decoder_prior_mode`` selects the crossover probability handed
    to the decoder: the run's own channel estimate (clamped) or a fixed
    value.
    """

    delta: float = 0.1
    epsilon: float = 1e-6
    estimation_abort_threshold: float = 0.12
    decoder_prior_mode: str = "use-estimate"
    decoder_prior_fixed: float | None = None
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ProtocolError(f"delta must be positive, got {self.delta}")
        if not 0.0 < self.epsilon < 1.0:
            raise ProtocolError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0.0 < self.estimation_abort_threshold < 0.5:
            raise ProtocolError(
                "estimation abort threshold must lie in (0, 0.5), got "
                f"{self.estimation_abort_threshold}"
            )
        if self.decoder_prior_mode not in ("use-estimate", "fixed"):
            raise ProtocolError(
                f"unknown decoder prior mode {self.decoder_prior_mode!r}"
            )
        if self.decoder_prior_mode == "fixed":
            if self.decoder_prior_fixed is None:
                raise ProtocolError("fixed decoder prior mode needs a value")
            if not 0.0 < self.decoder_prior_fixed < 0.5:
                raise ProtocolError(
                    f"fixed decoder prior {self.decoder_prior_fixed} outside (0, 0.5)"
                )
        if self.max_iter < 1:
            raise ProtocolError(f"max_iter must be at least 1, got {self.max_iter}")

    def resolve_prior(self, estimated_error: float) -> float:
        """Crossover probability for the decoder given the run's estimate."""
        if self.decoder_prior_mode == "fixed":
            return float(self.decoder_prior_fixed)
        return min(max(estimated_error, PRIOR_FLOOR), PRIOR_CEIL)


@dataclass(frozen=True)
class SiftResult:
    """Outcome of transmission, basis sifting, and channel estimation."""

    status: str
    a_hat: BitVector | None = None
    b_hat: BitVector | None = None
    estimated_error: float | None = None

    @property
    def aborted(self) -> bool:
        return self.status != STATUS_OK


@dataclass(frozen=True)
class TranscriptEntry:
    name: str
    sender: str
    payload: str


@dataclass
class Transcript:
    """Ordered record of every announced message in a protocol run."""

    entries: list[TranscriptEntry] = field(default_factory=list)

    def announce(self, name: str, sender: str, payload: str = "") -> None:
        self.entries.append(TranscriptEntry(name, sender, payload))

    def to_text(self) -> str:
        return "\n".join(
            f"{e.name} {e.sender} {e.payload}".rstrip() for e in self.entries
        )


@dataclass(frozen=True)
class KeyOutcome:
    """Result of one improved-flow run.

    Keys are present (length m − μ) exactly when ``status`` is ``ok``; the
    preshared κ is consumed only in that case.  The transcript records the
    announced messages for audit — for any non-ok status it is a function
    of the blocks alone, never of κ.
    """

    status: str
    k_a: BitVector | None
    k_b: BitVector | None
    mu_used: int
    transcript: Transcript


def sift(config: ProtocolConfig, n: int, p_e: float, rng_seed) -> SiftResult:
    """Simulate transmission and sifting for one block at the bit level.

    Alice sends ceil((2 + 3δ)n) random bits in random bases; Bob measures
    in independent random bases; a bit survives iff the bases agree, and a
    surviving bit flips with probability ``p_e``.  Alice keeps n random
    survivors as the block; every other survivor is disclosed for channel
    estimation.
    """
    if n < 1:
        raise ProtocolError(f"block length must be positive, got {n}")
    if not 0.0 <= p_e < 0.5:
        raise ProtocolError(f"channel crossover {p_e} outside [0, 0.5)")
    rng = np.random.Generator(np.random.Philox(key=rng_seed))
    n_raw = math.ceil((2 + 3 * config.delta) * n)
    a_bits = rng.integers(0, 2, n_raw, dtype=np.uint8)
    alice_bases = rng.integers(0, 2, n_raw, dtype=np.uint8)
    bob_bases = rng.integers(0, 2, n_raw, dtype=np.uint8)
    kept_a = a_bits[alice_bases == bob_bases]
    n_kept = kept_a.shape[0]
    kept_b = kept_a ^ (rng.random(n_kept) < p_e)
    if n_kept < math.ceil((1 + config.delta) * n):
        return SiftResult(STATUS_ABORT_SIFT)
    order = rng.permutation(n_kept)
    block = np.sort(order[:n])
    disclosed = order[n:]
    estimate = float(np.mean(kept_a[disclosed] != kept_b[disclosed]))
    result = SiftResult(
        STATUS_ABORT_ESTIMATION
        if estimate > config.estimation_abort_threshold
        else STATUS_OK,
        a_hat=BitVector.from_bits(kept_a[block]),
        b_hat=BitVector.from_bits(kept_b[block]),
        estimated_error=estimate,
    )
    return result


def beta(
    code: EaCssCode,
    s: BitVector,
    prior: float,
    max_iter: int = DEFAULT_MAX_ITER,
    graph: TannerGraph | None = None,
) -> tuple[BitVector, BitVector, bool]:
    """Decode a reduced-row syndrome difference into a key correction.

    ``s`` (length n − k1) is mapped back to a syndrome of the original
    redundant matrix — whose extra checks help the iterative decoder — and
    the decoded error ``ê`` is projected onto the key rows.  Returns
    (correction = e1_left @ ê, ê, converged).
    """
    if len(s) != code.h1r.rows:
        raise ProtocolError(
            f"syndrome length {len(s)} != {code.h1r.rows} reduced rows"
        )
    if graph is None:
        graph = build_graph(code.h1)
    s_reduced = matvec(code.t1_inv, s)
    s_full = matvec(code.x1, s_reduced)
    result = decode_syndrome(graph, s_full, prior, max_iter)
    e_hat = result.error_estimate
    return matvec(code.e1_left, e_hat), e_hat, result.converged


def run_original(
    code: EaCssCode,
    a_hat: BitVector,
    b_hat: BitVector,
    kappa: BitVector,
    prior: float,
    *,
    max_iter: int = DEFAULT_MAX_ITER,
    graph: TannerGraph | None = None,
) -> tuple[BitVector, BitVector]:
    """Original key maps: κ-padded syndromes, no aborts.

    Alice's key is E1·(â; κ); Bob corrects his with the decoded syndrome
    difference.  The pair is returned unconditionally — when decoding fails
    the two keys simply disagree.
    """
    _check_block_lengths(code, a_hat, b_hat, kappa)
    s_a = matvec(code.h1p, a_hat.concat(kappa))
    s_b = matvec(code.h1p, b_hat.concat(kappa))
    correction, _, _ = beta(code, s_a ^ s_b, prior, max_iter, graph)
    k_a = matvec(code.e1, a_hat.concat(kappa))
    k_b = matvec(code.e1, b_hat.concat(kappa)) ^ correction
    return k_a, k_b


def run_improved(
    code: EaCssCode,
    a_hat: BitVector,
    b_hat: BitVector,
    kappa: BitVector,
    mu: int,
    prior: float,
    rng_seed,
    *,
    max_iter: int = DEFAULT_MAX_ITER,
    graph: TannerGraph | None = None,
) -> KeyOutcome:
    """Improved flow: κ-free announcements, abort checks, deferred κ.

    Syndromes are computed on zero-padded blocks, the run aborts if the
    decoder does not converge, Alice announces ``mu`` sampled bits of her
    κ-free key for comparison, and κ enters only when every check passed.
    The sampled positions (drawn from ``rng_seed``) are excluded from the
    final keys.
    """
    _check_block_lengths(code, a_hat, b_hat, kappa)
    m = code.m
    if not 0 <= mu <= m:
        raise ProtocolError(f"sampling length {mu} outside [0, {m}]")
    transcript = Transcript()
    zeros_c = BitVector.zeros(code.c)

    s_a = matvec(code.h1p, a_hat.concat(zeros_c))
    transcript.announce("syndrome", "alice", s_a.to_hex())
    s_b = matvec(code.h1p, b_hat.concat(zeros_c))
    correction, _, converged = beta(code, s_a ^ s_b, prior, max_iter, graph)
    if not converged:
        transcript.announce(STATUS_ABORT_SYNDROME, "bob")
        return KeyOutcome(STATUS_ABORT_SYNDROME, None, None, mu, transcript)
    transcript.announce("syndrome_ok", "bob")

    k_hat_a = matvec(code.e1_left, a_hat)
    k_hat_b = matvec(code.e1_left, b_hat) ^ correction
    rng = np.random.Generator(np.random.Philox(key=rng_seed))
    positions = np.sort(rng.choice(m, size=mu, replace=False))
    mask = np.zeros(m, dtype=np.uint8)
    mask[positions] = 1
    sample_a = k_hat_a.take(positions)
    transcript.announce("sample_positions", "alice", BitVector.from_bits(mask).to_hex())
    transcript.announce("sample_values", "alice", sample_a.to_hex())
    if k_hat_b.take(positions) != sample_a:
        transcript.announce(STATUS_ABORT_SAMPLE, "bob")
        return KeyOutcome(STATUS_ABORT_SAMPLE, None, None, mu, transcript)
    transcript.announce("sample_ok", "bob")

    kept = np.nonzero(mask == 0)[0]
    shift = matvec(code.e1_right, kappa)
    return KeyOutcome(
        STATUS_OK,
        (k_hat_a ^ shift).take(kept),
        (k_hat_b ^ shift).take(kept),
        mu,
        transcript,
    )


def _check_block_lengths(
    code: EaCssCode, a_hat: BitVector, b_hat: BitVector, kappa: BitVector
) -> None:
    if len(a_hat) != code.n or len(b_hat) != code.n:
        raise ProtocolError(
            f"block lengths {len(a_hat)}/{len(b_hat)} != code length {code.n}"
        )
    if len(kappa) != code.c:
        raise ProtocolError(
            f"preshared key length {len(kappa)} != required {code.c}"
        )


# ---------------------------------------------------------------------------
# Performance formulas for the improved flow


def _check_unit(**values: float) -> None:
    for name, value in values.items():
        if not 0.0 <= value <= 1.0:
            raise ProtocolError(f"{name} = {value} outside [0, 1]")


def compute_f(q: float, r_blk: float, mu: int) -> float:
    """Fraction of residual key-bit errors surviving a μ-bit comparison.

    A block error damages each key bit independently with probability
    ``q``; sampling μ bits passes the block with probability (1 − q)^μ,
    and the factor renormalizes over the blocks that still deliver keys.
    """
    _check_unit(q=q, r_blk=r_blk)
    if mu < 0:
        raise ProtocolError(f"sampling length must be nonnegative, got {mu}")
    survive = (1.0 - q) ** mu
    denom = 1.0 - r_blk + survive * r_blk
    if denom == 0.0:
        return 0.0
    return survive / denom


def predicted_rbit(r_blk: float, p1: float, p2: float, mu: int) -> float:
    """Key bit error rate after the abort and sampling checks.

    ``r_blk`` is the block failure probability, ``p1`` its detected
    (non-converged) part, and ``p2`` the per-bit key damage within the
    undetected remainder; μ sampled bits screen that remainder.
    """
    _check_unit(r_blk=r_blk, p1=p1, p2=p2)
    if p1 > r_blk:
        raise ProtocolError(f"p1 = {p1} exceeds block error rate {r_blk}")
    if mu < 0:
        raise ProtocolError(f"sampling length must be nonnegative, got {mu}")
    survive = (1.0 - p2) ** mu * (r_blk - p1)
    numerator = p2 * survive
    if numerator == 0.0:
        return 0.0
    return numerator / (1.0 - r_blk + survive)


def compute_mu(epsilon: float, r_blk: float, p1: float, p2: float) -> int:
    """Smallest sampling length pushing the predicted key BER below ε.

    Uses the closed form ⌈log_{1−p2}(ε(1−R_blk)/((p2−ε)(R_blk−p1)))⌉ when
    it applies, then nudges by ±1 so the result is exactly minimal under
    ``predicted_rbit`` (the rounded logarithm can land one off at the
    boundaries).
    """
    _check_unit(r_blk=r_blk, p1=p1, p2=p2)
    if not 0.0 < epsilon < 1.0:
        raise ProtocolError(f"epsilon must lie in (0, 1), got {epsilon}")
    if p1 > r_blk:
        raise ProtocolError(f"p1 = {p1} exceeds block error rate {r_blk}")
    if p2 <= epsilon or r_blk <= p1:
        return 0
    if r_blk == 1.0:
        # No surviving error-free blocks: the delivered keys keep BER p2 no
        # matter how many bits are sampled.
        raise ProtocolError(
            "target bit error rate unreachable: every block fails and the "
            "residual damage exceeds epsilon"
        )
    if p2 == 1.0:
        warnings.warn(
            "residual damage probability is exactly 1; the closed form for "
            "the sampling length degenerates, falling back to direct search",
            RuntimeWarning,
            stacklevel=2,
        )
        mu = 0
        while predicted_rbit(r_blk, p1, p2, mu) >= epsilon:
            mu += 1
        return mu
    ratio = epsilon * (1.0 - r_blk) / ((p2 - epsilon) * (r_blk - p1))
    mu = max(0, math.ceil(math.log(ratio) / math.log(1.0 - p2)))
    while mu > 0 and predicted_rbit(r_blk, p1, p2, mu - 1) < epsilon:
        mu -= 1
    while predicted_rbit(r_blk, p1, p2, mu) >= epsilon:
        mu += 1
    return mu


def net_key_rate(
    r_blk: float, p1: float, p2: float, mu: int, m: int, c: int, n: int
) -> float:
    """Expected fresh key bits per channel bit for the improved flow.

    Multiplies the per-block key yield (m − c − μ)/n by the probability
    that a block delivers: converged blocks plus residual blocks that
    slip past the μ-bit comparison.
    """
    _check_unit(r_blk=r_blk, p1=p1, p2=p2)
    if p1 > r_blk:
        raise ProtocolError(f"p1 = {p1} exceeds block error rate {r_blk}")
    if not 0 <= mu <= m - c:
        raise ProtocolError(
            f"cannot expand a key: m - c - mu = {m} - {c} - {mu} is negative"
        )
    deliver = 1.0 - r_blk + (1.0 - p2) ** mu * (r_blk - p1)
    return deliver * (m - c - mu) / n
