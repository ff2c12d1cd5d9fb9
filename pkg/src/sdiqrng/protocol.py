"""Block-wise protocol: frequency estimation, energy check, threshold test, accounting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm

from ._validation import check_behavior, check_mean_photon, check_scalar
from .certify import FiniteSizeParams, Witness, evaluate_witness, finite_size_min_entropy
from .physics import PowerTrace, Rounds


class DegenerateBlockError(ValueError):
    """A block in which some input value never occurred."""


@dataclass(frozen=True)
class ProtocolConfig:
    rep_rate_hz: float
    block_duration_s: float
    omega: float
    threshold_h: float
    fs: FiniteSizeParams
    witness: Witness

    def __post_init__(self):
        check_scalar(self.rep_rate_hz, "rep_rate_hz", min_val=0.0, include_min=False)
        check_scalar(self.block_duration_s, "block_duration_s", min_val=0.0, include_min=False)
        check_mean_photon(self.omega)
        check_scalar(self.threshold_h, "threshold_h", min_val=0.0, max_val=1.0)
        if self.block_rounds < 1:
            raise ValueError("a block must contain at least one round")
        if self.fs.n != self.block_rounds:
            raise ValueError(f"fs.n = {self.fs.n} does not match block rounds {self.block_rounds}")
        if self.witness.omega != self.omega:
            raise ValueError(f"witness was built for omega = {self.witness.omega}, "
                             f"not {self.omega}")

    @property
    def block_rounds(self) -> int:
        return int(round(self.rep_rate_hz * self.block_duration_s))


@dataclass(frozen=True)
class BlockResult:
    frequencies: np.ndarray
    measured_omega: float
    witness_value: float
    passed: bool
    certified_bits: int
    index: int = 0

    def __eq__(self, other):
        if not isinstance(other, BlockResult):
            return NotImplemented
        # failed-closed blocks carry NaN placeholders
        return (np.array_equal(self.frequencies, other.frequencies, equal_nan=True)
                and np.array_equal(self.measured_omega, other.measured_omega, equal_nan=True)
                and np.array_equal(self.witness_value, other.witness_value, equal_nan=True)
                and self.passed == other.passed
                and self.certified_bits == other.certified_bits
                and self.index == other.index)


@dataclass(frozen=True)
class SessionSummary:
    blocks_total: int
    blocks_passed: int
    success_fraction: float
    certified_rate_hz: float
    finite_size_rate_hz: float
    certified_bits_total: int


def estimate_mean_photon(avg_power_w: float, rep_rate_hz: float,
                         min_photon_energy_j: float) -> float:
    """Upper bound on photons per pulse from the monitor's average power (100% duty cycle)."""
    avg_power_w = check_scalar(avg_power_w, "avg_power_w", min_val=0.0)
    rep_rate_hz = check_scalar(rep_rate_hz, "rep_rate_hz", min_val=0.0, include_min=False)
    min_photon_energy_j = check_scalar(min_photon_energy_j, "min_photon_energy_j",
                                       min_val=0.0, include_min=False)
    return avg_power_w / (rep_rate_hz * min_photon_energy_j)


def accumulate_block(records) -> np.ndarray:
    """Empirical ``f(b|x) = count(x, b) / count(x)``.

    ``records`` is a :class:`Rounds` or any iterable of ``RoundRecord``.
    """
    if not isinstance(records, Rounds):
        records = Rounds.from_records(records)
    if len(records) == 0:
        raise DegenerateBlockError("empty block")
    counts = np.bincount(2 * records.x.astype(np.int64) + records.b, minlength=4)
    counts = counts.reshape(2, 2).astype(float)
    per_input = counts.sum(axis=1)
    missing = np.flatnonzero(per_input == 0)
    if missing.size:
        raise DegenerateBlockError(f"input x={int(missing[0])} never occurred in block")
    return counts / per_input[:, None]


def judge_block(f, measured_omega: float, cfg: ProtocolConfig, index: int = 0) -> BlockResult:
    f = check_behavior(f, "f")
    value = evaluate_witness(cfg.witness, f)
    passed = bool(measured_omega <= cfg.omega and value >= cfg.threshold_h)
    bits = math.floor(finite_size_min_entropy(cfg.threshold_h, cfg.fs)) if passed else 0
    return BlockResult(f, float(measured_omega), value, passed, bits, index)


def _failed_block(index, measured_omega):
    return BlockResult(np.full((2, 2), np.nan), float(measured_omega), float("nan"),
                       False, 0, index)


def block_measured_omega(trace: PowerTrace, t0: float, t1: float, rep_rate_hz: float,
                         min_photon_energy_j: float) -> float:
    """Mean monitor reading over samples starting in ``[t0, t1)``; ``inf`` if there are none."""
    mask = (trace.time_s >= t0 - 1e-12) & (trace.time_s < t1 - 1e-12)
    if not mask.any():
        return math.inf
    return estimate_mean_photon(float(np.mean(trace.power_w[mask])), rep_rate_hz,
                                min_photon_energy_j)


def run_session(rounds: Rounds, trace: PowerTrace, cfg: ProtocolConfig,
                min_photon_energy_j: float) -> list[BlockResult]:
    """Judge every complete block of ``rounds``; a trailing partial block is dropped.

    Blocks with an unobserved input or without a monitor reading fail closed.
    """
    n_block = cfg.block_rounds
    results = []
    for k in range(len(rounds) // n_block):
        block = rounds[k * n_block:(k + 1) * n_block]
        t0 = k * cfg.block_duration_s
        measured = block_measured_omega(trace, t0, t0 + cfg.block_duration_s,
                                        cfg.rep_rate_hz, min_photon_energy_j)
        try:
            f = accumulate_block(block)
        except DegenerateBlockError:
            results.append(_failed_block(k, measured))
            continue
        results.append(judge_block(f, measured, cfg, index=k))
    return results


def summarize_session(results: Sequence[BlockResult], cfg: ProtocolConfig) -> SessionSummary:
    if not results:
        raise ValueError("no block results to summarize")
    total = len(results)
    passed = sum(r.passed for r in results)
    return summarize_counts(total, passed, cfg.rep_rate_hz, cfg.threshold_h,
                            certified_bits_total=sum(r.certified_bits for r in results),
                            duration_s=total * cfg.block_duration_s)


def summarize_counts(blocks_total: int, blocks_passed: int, rep_rate_hz: float,
                     threshold_h: float, certified_bits_total: int = 0,
                     duration_s: float | None = None) -> SessionSummary:
    """Session accounting from block counts alone.

    ``certified_rate_hz`` is the asymptotic product ``rep_rate * h * success``;
    ``finite_size_rate_hz`` divides the finite-size certified bits by the
    session duration.
    """
    fraction = blocks_passed / blocks_total
    rate = rep_rate_hz * threshold_h * fraction
    fs_rate = certified_bits_total / duration_s if duration_s else 0.0
    return SessionSummary(blocks_total, blocks_passed, fraction, rate, fs_rate,
                          int(certified_bits_total))


def witness_std(p_model, witness: Witness, n_rounds: int) -> float:
    """Standard deviation of the block witness value for ``n_rounds`` uniformly-chosen inputs."""
    p = check_behavior(p_model)
    var = 0.0
    for x in range(2):
        slope = 0.5 * (witness.gamma[1, x] - witness.gamma[0, x])
        var += slope ** 2 * p[x, 1] * p[x, 0] / (n_rounds / 2.0)
    return math.sqrt(var)


def tune_threshold(p_model, witness: Witness, n_rounds: int, *,
                   target_pass: float | None = None, n_sigma: float | None = None) -> float:
    """Threshold ``h`` giving the target block pass probability under a normal approximation.

    Give either ``target_pass`` or ``n_sigma`` (the number of block standard
    deviations below the expected witness value).
    """
    if (target_pass is None) == (n_sigma is None):
        raise ValueError("give exactly one of target_pass and n_sigma")
    if target_pass is not None:
        target_pass = check_scalar(target_pass, "target_pass", min_val=0.0, max_val=1.0,
                                   include_min=False, include_max=False)
        n_sigma = float(norm.ppf(target_pass))
    mean = evaluate_witness(witness, p_model)
    h = mean - n_sigma * witness_std(p_model, witness, n_rounds)
    return float(min(1.0, max(0.0, h)))


SESSION_LOG_HEADER = ("block_index", "f00", "f10", "f01", "f11", "measured_omega",
                      "witness_value", "passed", "certified_bits")


def _fmt(value: float) -> str:
    return format(value, ".17g")


def format_session_log(results: Iterable[BlockResult]) -> str:
    """CSV with ``fBX = f(b=B | x=X)``, one line per block after the header."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SESSION_LOG_HEADER)
    for r in results:
        f = r.frequencies
        writer.writerow([r.index, _fmt(f[0, 0]), _fmt(f[0, 1]), _fmt(f[1, 0]), _fmt(f[1, 1]),
                         _fmt(r.measured_omega), _fmt(r.witness_value), int(r.passed),
                         r.certified_bits])
    return buf.getvalue()


def parse_session_log(text: str) -> list[BlockResult]:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or tuple(rows[0]) != SESSION_LOG_HEADER:
        raise ValueError("session log is missing its header line")
    results = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(SESSION_LOG_HEADER):
            raise ValueError(f"session log line {lineno}: expected "
                             f"{len(SESSION_LOG_HEADER)} fields, got {len(row)}")
        try:
            f00, f10, f01, f11 = (float(v) for v in row[1:5])
            results.append(BlockResult(
                np.array([[f00, f10], [f01, f11]]), float(row[5]), float(row[6]),
                row[7] == "1", int(row[8]), int(row[0])))
        except ValueError as exc:
            raise ValueError(f"session log line {lineno}: {exc}") from None
    return results
