"""Monte Carlo measurement of key-expansion error rates over a BSC sweep.

For each channel crossover probability, trials draw an i.i.d. error
pattern, decode its syndrome, and classify the outcome: correct, detected
failure (decoder did not converge — the improved flow aborts here), or
residual failure (converged to the wrong pattern — caught only by the
sampling comparison).  From the measured rates the harness sizes the
sampling length μ, replays the sampling stage on the residual trials, and
reports predicted and measured key bit error rates plus the net key rate,
one CSV row per channel point.

In ``original`` mode there is no abort or sampling stage: every trial
delivers a key, so μ = 0, the abort rate counts nothing, p1 is reported
as 0 (nothing is detected), p2 equals q (every block error is undetected
damage), the net rate is the nominal (m − c)/n, and the predicted and
measured key error rates both equal the measured R_bit (the prediction
R_bit = q·R_blk is an identity on measured ratios).

Trials are deterministic given the base seed and independent of worker
count: each trial draws from counter-based streams keyed by its global
index, and fixed-size chunks are merged in chunk order.

The module also emits the code-family parameter tables (block length,
key length, preshared-key cost, nominal net rate) for the unsplit
projective family and the split Euclidean/projective families.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .eaqecc import EaCssCode, build_ea_css
from .fingeom import CodeSpec, GeometryError, build_parity_check
from .gf2 import BitVector, matvec
from .protocol import (
    ProtocolConfig,
    ProtocolError,
    beta,
    net_key_rate,
    predicted_rbit,
    compute_mu,
    sift,
)
from .spa import TannerGraph, build_graph

log = logging.getLogger(__name__)

# Trials are simulated in fixed-size chunks regardless of worker count so
# that parallel runs merge identically.
CHUNK_TRIALS = 512

# Stream tags occupy the top byte of the second RNG key word; the low 56
# bits carry the global trial index.
STREAM_CHANNEL = 0
STREAM_SAMPLING = 1
STREAM_SIFT = 2

SWEEP_HEADER = "pe,trials,r_blk,r_bit,p1,p2,q,mu,rbit_hat_pred,rbit_hat_meas,r_net,abort_rate"
TABLES_HEADER = "family,p,s,c_sp,r_sp,n,m,c,r_net"


class SimulationError(ValueError):
    """Invalid sweep or table parameters."""


def trial_key(base_seed: int, stream: int, trial_index: int) -> list[int]:
    """Counter-based RNG key for one trial's independent stream."""
    if not 0 <= trial_index < 1 << 56:
        raise SimulationError(f"trial index {trial_index} outside 56-bit range")
    return [base_seed, (stream << 56) | trial_index]


@dataclass(frozen=True)
class SweepConfig:
    """One Monte Carlo sweep: a code spec, channel points, and budgets."""

    spec: CodeSpec
    pe_values: tuple[float, ...]
    trials: int = 10_000
    base_seed: int = 0
    epsilon: float = 1e-6
    mode: str = "improved"
    full_sift: bool = False
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise SimulationError(f"trials must be at least 1, got {self.trials}")
        if not self.pe_values:
            raise SimulationError("at least one channel point is required")
        for pe in self.pe_values:
            if not 0.0 <= pe < 0.5:
                raise SimulationError(f"channel crossover {pe} outside [0, 0.5)")
        if self.mode not in ("original", "improved"):
            raise SimulationError(f"unknown mode {self.mode!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise SimulationError(f"epsilon must lie in (0, 1), got {self.epsilon}")


class ResidualEvent(NamedTuple):
    """A converged-but-wrong trial and the key positions it damaged."""

    trial_index: int
    damage_positions: np.ndarray


@dataclass
class TrialStats:
    """Counters from one channel point's trials.

    ``block_errors`` counts trials whose decoded error pattern is wrong;
    ``syndrome_aborts`` its detected (non-converged) part and
    ``residual_block_errors`` the undetected remainder.  Bit counters
    accumulate the Hamming weight of the induced key damage.  ``sift_aborts``
    counts trials that never reached decoding (full-sift mode only).
    """

    pe: float
    key_bits: int
    trials: int = 0
    block_errors: int = 0
    bit_errors: int = 0
    syndrome_aborts: int = 0
    residual_block_errors: int = 0
    residual_bit_errors: int = 0
    sift_aborts: int = 0
    residual_events: list[ResidualEvent] = field(default_factory=list)

    @property
    def decode_attempts(self) -> int:
        return self.trials - self.sift_aborts

    @property
    def ok_trials(self) -> int:
        return self.decode_attempts - self.block_errors

    @property
    def r_blk(self) -> float:
        return _ratio(self.block_errors, self.decode_attempts)

    @property
    def r_bit(self) -> float:
        return _ratio(self.bit_errors, self.decode_attempts * self.key_bits)

    @property
    def p1(self) -> float:
        return _ratio(self.syndrome_aborts, self.decode_attempts)

    @property
    def p2(self) -> float:
        return _ratio(self.residual_bit_errors, self.residual_block_errors * self.key_bits)

    @property
    def q(self) -> float:
        return _ratio(self.bit_errors, self.block_errors * self.key_bits)

    @property
    def se_r_blk(self) -> float:
        return binomial_se(self.r_blk, self.decode_attempts)

    @property
    def se_r_bit(self) -> float:
        return binomial_se(self.r_bit, self.decode_attempts * self.key_bits)

    @property
    def se_p1(self) -> float:
        return binomial_se(self.p1, self.decode_attempts)

    @property
    def se_p2(self) -> float:
        return binomial_se(self.p2, self.residual_block_errors * self.key_bits)

    @property
    def se_q(self) -> float:
        return binomial_se(self.q, self.block_errors * self.key_bits)

    def merge(self, other: "TrialStats") -> None:
        if other.pe != self.pe or other.key_bits != self.key_bits:
            raise SimulationError("cannot merge stats from different points")
        self.trials += other.trials
        self.block_errors += other.block_errors
        self.bit_errors += other.bit_errors
        self.syndrome_aborts += other.syndrome_aborts
        self.residual_block_errors += other.residual_block_errors
        self.residual_bit_errors += other.residual_bit_errors
        self.sift_aborts += other.sift_aborts
        self.residual_events.extend(other.residual_events)


def _ratio(num: int, denom: int) -> float:
    return num / denom if denom > 0 else 0.0


def binomial_se(p: float, n: int) -> float:
    """Standard error of a proportion ``p`` estimated from ``n`` draws."""
    return float(np.sqrt(p * (1.0 - p) / n)) if n > 0 else 0.0


def _simulate_chunk(
    code: EaCssCode,
    graph: TannerGraph,
    config: SweepConfig,
    pe: float,
    point_index: int,
    start: int,
    count: int,
) -> TrialStats:
    stats = TrialStats(pe=pe, key_bits=code.m)
    pcfg = config.protocol
    for t in range(start, start + count):
        index = point_index * config.trials + t
        stats.trials += 1
        if config.full_sift:
            sifted = sift(
                pcfg, code.n, pe, trial_key(config.base_seed, STREAM_SIFT, index)
            )
            if sifted.aborted:
                stats.sift_aborts += 1
                continue
            e_true = sifted.a_hat ^ sifted.b_hat
            prior = pcfg.resolve_prior(sifted.estimated_error)
        else:
            rng = np.random.Generator(
                np.random.Philox(key=trial_key(config.base_seed, STREAM_CHANNEL, index))
            )
            e_true = BitVector.from_bits(
                (rng.random(code.n) < pe).astype(np.uint8)
            )
            prior = pcfg.resolve_prior(pe)
        syndrome = matvec(code.a1, e_true)
        correction, e_hat, converged = beta(
            code, syndrome, prior, pcfg.max_iter, graph
        )
        if converged and e_hat == e_true:
            continue
        damage = correction ^ matvec(code.e1_left, e_true)
        weight = damage.popcount()
        stats.block_errors += 1
        stats.bit_errors += weight
        if not converged:
            stats.syndrome_aborts += 1
        else:
            stats.residual_block_errors += 1
            stats.residual_bit_errors += weight
            stats.residual_events.append(
                ResidualEvent(index, np.nonzero(damage.to_bits())[0])
            )
    return stats


def estimate_rates(
    code: EaCssCode,
    config: SweepConfig,
    *,
    workers: int = 1,
    graph: TannerGraph | None = None,
) -> list[TrialStats]:
    """Measure R_blk, R_bit, p1, p2, q at every channel point.

    Returns one TrialStats per entry of ``config.pe_values``, in order.
    The result is identical for any ``workers`` value.
    """
    if workers < 1:
        raise SimulationError(f"workers must be at least 1, got {workers}")
    if graph is None:
        graph = build_graph(code.h1)
    results: list[TrialStats] = []
    chunks = [
        (start, min(CHUNK_TRIALS, config.trials - start))
        for start in range(0, config.trials, CHUNK_TRIALS)
    ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for point_index, pe in enumerate(config.pe_values):
            parts = pool.map(
                lambda span: _simulate_chunk(
                    code, graph, config, pe, point_index, span[0], span[1]
                ),
                chunks,
            )
            stats = TrialStats(pe=pe, key_bits=code.m)
            for part in parts:
                stats.merge(part)
            log.info(
                "pe=%g: %d trials, R_blk=%.5f p1=%.5f residuals=%d",
                pe,
                stats.trials,
                stats.r_blk,
                stats.p1,
                stats.residual_block_errors,
            )
            results.append(stats)
    return results


def choose_mu_and_rate(
    stats: TrialStats, n: int, m: int, c: int, epsilon: float
) -> tuple[int, float, float]:
    """Sampling length, net key rate, and predicted key BER from measured rates.

    When no finite sampling length can reach ``epsilon`` (every block failed
    yet some failures were undetected), or when the chosen length leaves no
    key material (μ > m − c), the point cannot expand a key: the net rate is
    reported as 0.0 with μ capped at m − c.
    """
    r_blk, p1, p2 = stats.r_blk, stats.p1, stats.p2
    try:
        mu = compute_mu(epsilon, r_blk, p1, p2)
    except ProtocolError:
        mu = max(m - c, 0)
    rbit_pred = predicted_rbit(r_blk, p1, p2, mu)
    if 0 <= mu <= m - c:
        r_net = net_key_rate(r_blk, p1, p2, mu, m, c, n)
    else:
        r_net = 0.0
    return mu, r_net, rbit_pred


@dataclass(frozen=True)
class ImprovedMeasurement:
    """Replayed sampling stage: aborts, deliveries, and delivered damage."""

    sample_aborts: int
    delivered_blocks: int
    delivered_bit_errors: int
    rbit_hat_meas: float
    abort_rate: float


def measure_improved(
    stats: TrialStats, mu: int, base_seed: int
) -> ImprovedMeasurement:
    """Replay the μ-bit sampling comparison over the residual trials.

    Each residual trial draws its sampling positions from the same
    per-trial stream the protocol run would use; a draw hitting a damaged
    position aborts the trial, otherwise the damage survives into the
    delivered key (sampled positions are excluded from it).
    """
    m = stats.key_bits
    sample_aborts = 0
    slipped_blocks = 0
    slipped_bits = 0
    mu_eff = min(mu, m)
    for event in stats.residual_events:
        if mu_eff > 0:
            rng = np.random.Generator(
                np.random.Philox(
                    key=trial_key(base_seed, STREAM_SAMPLING, event.trial_index)
                )
            )
            positions = rng.choice(m, size=mu_eff, replace=False)
            caught = bool(np.isin(positions, event.damage_positions).any())
        else:
            caught = False
        if caught:
            sample_aborts += 1
        else:
            slipped_blocks += 1
            slipped_bits += int(event.damage_positions.size)
    delivered_blocks = stats.ok_trials + slipped_blocks
    delivered_key_bits = delivered_blocks * (m - mu)
    rbit_hat_meas = (
        slipped_bits / delivered_key_bits if delivered_key_bits > 0 else 0.0
    )
    aborts = stats.sift_aborts + stats.syndrome_aborts + sample_aborts
    return ImprovedMeasurement(
        sample_aborts=sample_aborts,
        delivered_blocks=delivered_blocks,
        delivered_bit_errors=slipped_bits,
        rbit_hat_meas=rbit_hat_meas,
        abort_rate=_ratio(aborts, stats.trials),
    )


@dataclass(frozen=True)
class SweepRow:
    """One CSV row of a sweep."""

    pe: float
    trials: int
    r_blk: float
    r_bit: float
    p1: float
    p2: float
    q: float
    mu: int
    rbit_hat_pred: float
    rbit_hat_meas: float
    r_net: float
    abort_rate: float

    def to_csv(self) -> str:
        return ",".join(
            [
                repr(self.pe),
                str(self.trials),
                repr(self.r_blk),
                repr(self.r_bit),
                repr(self.p1),
                repr(self.p2),
                repr(self.q),
                str(self.mu),
                repr(self.rbit_hat_pred),
                repr(self.rbit_hat_meas),
                repr(self.r_net),
                repr(self.abort_rate),
            ]
        )


def run_sweep(
    code: EaCssCode,
    config: SweepConfig,
    *,
    workers: int = 1,
    graph: TannerGraph | None = None,
) -> list[SweepRow]:
    """Full sweep: measure rates, size μ, replay sampling, assemble rows."""
    stats_list = estimate_rates(code, config, workers=workers, graph=graph)
    rows = []
    for stats in stats_list:
        if config.mode == "original":
            meas = stats.r_bit
            rows.append(
                SweepRow(
                    pe=stats.pe,
                    trials=stats.trials,
                    r_blk=stats.r_blk,
                    r_bit=stats.r_bit,
                    p1=0.0,
                    p2=stats.q,
                    q=stats.q,
                    mu=0,
                    rbit_hat_pred=meas,
                    rbit_hat_meas=meas,
                    r_net=code.nominal_rate(),
                    abort_rate=_ratio(stats.sift_aborts, stats.trials),
                )
            )
            continue
        mu, r_net, rbit_pred = choose_mu_and_rate(
            stats, code.n, code.m, code.c, config.epsilon
        )
        measured = measure_improved(stats, mu, config.base_seed)
        rows.append(
            SweepRow(
                pe=stats.pe,
                trials=stats.trials,
                r_blk=stats.r_blk,
                r_bit=stats.r_bit,
                p1=stats.p1,
                p2=stats.p2,
                q=stats.q,
                mu=mu,
                rbit_hat_pred=rbit_pred,
                rbit_hat_meas=measured.rbit_hat_meas,
                r_net=r_net,
                abort_rate=measured.abort_rate,
            )
        )
    return rows


def render_sweep_csv(rows: list[SweepRow]) -> str:
    return "\n".join([SWEEP_HEADER, *(row.to_csv() for row in rows)]) + "\n"


def write_sweep_csv(rows: list[SweepRow], path: str | Path) -> None:
    Path(path).write_text(render_sweep_csv(rows))


# ---------------------------------------------------------------------------
# Parameter tables


@dataclass(frozen=True)
class TableRow:
    """One constructed code's parameters and nominal net rate."""

    family: str
    p: int
    s: int
    c_sp: int
    r_sp: int
    n: int
    m: int
    c: int
    r_net: float

    def to_csv(self) -> str:
        return (
            f"{self.family},{self.p},{self.s},{self.c_sp},{self.r_sp},"
            f"{self.n},{self.m},{self.c},{self.r_net:.4f}"
        )


TABLE_SETS = ("table1", "table2", "table3")


def _table_row(spec: CodeSpec) -> TableRow:
    code = build_ea_css(build_parity_check(spec))
    return TableRow(
        family=spec.family,
        p=spec.p,
        s=spec.s,
        c_sp=spec.c_sp,
        r_sp=spec.r_sp,
        n=code.n,
        m=code.m,
        c=code.c,
        r_net=code.nominal_rate(),
    )


def emit_tables(set_name: str, max_n: int | None = None) -> list[TableRow]:
    """Enumerate a code family's parameter table.

    ``table1`` lists the unsplit projective-plane codes by field exponent;
    ``table2``/``table3`` list the column/row splits of the s = 5 Euclidean
    and projective codes.  Rows are kept while the block length stays within
    ``max_n`` and the nominal net rate (m − c)/n is positive; for the split
    tables, each column factor's row-split enumeration stops at the first
    non-positive rate.
    """
    if set_name == "table1":
        limit = 10_000 if max_n is None else max_n
        rows = []
        for s in itertools.count(1):
            if 4**s + 2**s + 1 > limit:
                break
            row = _table_row(CodeSpec("pg1", 2, s))
            log.info("table1 s=%d: [[%d,%d;%d]]", s, row.n, row.m, row.c)
            if row.r_net > 0:
                rows.append(row)
        return rows
    if set_name not in ("table2", "table3"):
        raise SimulationError(
            f"unknown table set {set_name!r}, expected one of {TABLE_SETS}"
        )
    family = "eg1" if set_name == "table2" else "pg1"
    base_n = 1023 if family == "eg1" else 1057
    limit = 11_000 if max_n is None else max_n
    rows = []
    for c_sp in itertools.count(1):
        if base_n * c_sp > limit:
            break
        for r_sp in itertools.count(1):
            try:
                row = _table_row(CodeSpec(family, 2, 5, c_sp, r_sp))
            except GeometryError:
                break
            log.info(
                "%s c_sp=%d r_sp=%d: [[%d,%d;%d]] rate %.4f",
                set_name, c_sp, r_sp, row.n, row.m, row.c, row.r_net,
            )
            if row.r_net <= 0:
                break
            rows.append(row)
    return rows


def render_tables_csv(rows: list[TableRow]) -> str:
    return "\n".join([TABLES_HEADER, *(row.to_csv() for row in rows)]) + "\n"
