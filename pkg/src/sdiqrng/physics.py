"""BPSK coherent-state source, homodyne sign receiver and round simulator.

Quadrature convention: ``X = a + a^dagger``, so the vacuum has unit variance
and the coherent state ``|alpha>`` has quadrature mean ``2 alpha``. Input
``x = 1`` prepares ``|+alpha>`` and ``x = 0`` prepares ``|-alpha>``; the
receiver outputs ``b = 1`` for a nonnegative quadrature, so that
``p(b = x | x) = Phi(2 sqrt(omega))`` for the ideal receiver.

Behaviors are 2x2 arrays indexed ``[x][b]``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple

import numpy as np
from scipy.special import ndtr

from ._validation import (
    check_behavior,
    check_count,
    check_mean_photon,
    check_probability,
    check_scalar,
)

PLANCK = 6.62607015e-34
SPEED_OF_LIGHT = 299_792_458.0

#: Rounds per independent RNG stream. Fixed so that any sharding of the
#: round range reproduces the single-threaded output.
CHUNK_ROUNDS = 1 << 16


def photon_energy(wavelength_m: float) -> float:
    """Photon energy in joules at ``wavelength_m``."""
    wavelength_m = check_scalar(wavelength_m, "wavelength_m", min_val=0.0, include_min=False)
    return PLANCK * SPEED_OF_LIGHT / wavelength_m


PHOTON_ENERGY_1550NM = photon_energy(1550e-9)


@dataclass(frozen=True)
class NoiseModel:
    """White-noise imperfection: with probability ``p_noise`` the output is a fair coin."""

    p_noise: float = 0.0

    def __post_init__(self):
        check_probability(self.p_noise, "p_noise")


@dataclass(frozen=True)
class DriftModel:
    """Interferometer phase drift and the piezo feedback loop that corrects it.

    Attributes
    ----------
    phase_rad_per_s : float
        Linear drift rate of the interferometer phase.
    feedback_gain : float
        Step size (rad) of the hill-climbing correction per feedback period.
    feedback_period_s : float
        Time between correlation measurements / corrections.
    lock_tolerance : float
        Lock is considered healthy while the long-run mean ``|cos theta|``
        stays at or above ``1 - lock_tolerance``.
    """

    phase_rad_per_s: float = 0.0
    feedback_gain: float = 0.05
    feedback_period_s: float = 0.1
    lock_tolerance: float = 0.01

    def __post_init__(self):
        check_scalar(self.phase_rad_per_s, "phase_rad_per_s")
        check_scalar(self.feedback_gain, "feedback_gain", min_val=0.0)
        check_scalar(self.feedback_period_s, "feedback_period_s", min_val=0.0, include_min=False)
        check_scalar(self.lock_tolerance, "lock_tolerance", min_val=0.0, max_val=1.0)

    @property
    def drift_per_period(self) -> float:
        return self.phase_rad_per_s * self.feedback_period_s


class RoundRecord(NamedTuple):
    index: int
    x: int
    b: int


@dataclass(frozen=True, eq=False)
class Rounds:
    """Columnar sequence of round records starting at round ``start``."""

    x: np.ndarray
    b: np.ndarray
    start: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.uint8)
        b = np.asarray(self.b, dtype=np.uint8)
        if x.shape != b.shape or x.ndim != 1:
            raise ValueError("x and b must be 1-D arrays of equal length")
        if x.size and (x.max() > 1 or b.max() > 1):
            raise ValueError("x and b must be bits")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_records(cls, records) -> "Rounds":
        records = list(records)
        if not records:
            return cls(np.zeros(0, np.uint8), np.zeros(0, np.uint8))
        idx = np.array([r.index for r in records])
        if np.any(np.diff(idx) != 1):
            raise ValueError("records must have consecutive indices")
        return cls(np.array([r.x for r in records]), np.array([r.b for r in records]),
                   int(idx[0]))

    def __len__(self) -> int:
        return int(self.x.size)

    def __iter__(self) -> Iterator[RoundRecord]:
        for i, (x, b) in enumerate(zip(self.x.tolist(), self.b.tolist())):
            yield RoundRecord(self.start + i, x, b)

    def __getitem__(self, item):
        if isinstance(item, slice):
            lo, _, step = item.indices(len(self))
            if step != 1:
                raise ValueError("only contiguous slices are supported")
            return Rounds(self.x[item], self.b[item], self.start + lo)
        i = range(len(self))[item]
        return RoundRecord(self.start + i, int(self.x[i]), int(self.b[i]))

    def __eq__(self, other):
        if not isinstance(other, Rounds):
            return NotImplemented
        return (self.start == other.start and np.array_equal(self.x, other.x)
                and np.array_equal(self.b, other.b))


@dataclass(frozen=True, eq=False)
class PowerTrace:
    """Monitor photodiode samples: sample ``k`` averages the window starting at ``time_s[k]``."""

    time_s: np.ndarray
    power_w: np.ndarray
    period_s: float

    def __eq__(self, other):
        if not isinstance(other, PowerTrace):
            return NotImplemented
        return (self.period_s == other.period_s and np.array_equal(self.time_s, other.time_s)
                and np.array_equal(self.power_w, other.power_w))


@dataclass(frozen=True, eq=False)
class PhaseSchedule:
    corrections: np.ndarray
    effective_phase: np.ndarray
    mean_abs_cos: float
    degraded: bool
    period_s: float


def coherent_overlap(omega: float) -> float:
    """Magnitude of ``<alpha|-alpha>`` for mean photon number ``omega = |alpha|^2``."""
    omega = check_mean_photon(omega)
    return math.exp(-2.0 * omega)


def helstrom_success(omega: float) -> float:
    """Minimum-error success probability for equiprobable ``|+alpha>``, ``|-alpha>``."""
    omega = check_mean_photon(omega)
    # 1 - overlap**2 written as -expm1(-4 omega) to keep precision at small omega
    return 0.5 * (1.0 + math.sqrt(-math.expm1(-4.0 * omega)))


def symmetric_behavior(success: float) -> np.ndarray:
    """Behavior with ``p(b = x | x) = success`` for both inputs."""
    success = check_probability(success, "success")
    return np.array([[success, 1.0 - success], [1.0 - success, success]])


def homodyne_success(omega: float, cos_phase: float = 1.0) -> float:
    return float(ndtr(2.0 * math.sqrt(check_mean_photon(omega)) * cos_phase))


def ideal_homodyne_behavior(omega: float) -> np.ndarray:
    """Sign-of-quadrature discrimination of the BPSK pair, no added noise."""
    return symmetric_behavior(homodyne_success(omega))


def helstrom_behavior(omega: float) -> np.ndarray:
    return symmetric_behavior(helstrom_success(omega))


def apply_white_noise(q, nm: NoiseModel) -> np.ndarray:
    q = check_behavior(q)
    p = nm.p_noise
    return (1.0 - p) * q + 0.5 * p


def noisy_homodyne_behavior(omega: float, nm: NoiseModel) -> np.ndarray:
    return apply_white_noise(ideal_homodyne_behavior(omega), nm)


def _phase_at(drift: float, t):
    return drift * t


def stabilize_phase(dm: DriftModel, correlation_estimator: Callable[[int, float], float],
                    n_periods: int, *, deadband: float = 0.0) -> PhaseSchedule:
    """Hill-climbing piezo controller driven only by the measured correlation.

    The controller holds its correction while the correlation stays within
    ``max(deadband, lock_tolerance/2 * reference)`` of the reference taken at
    the last lock. Once it drops below, it steps the correction by
    ``feedback_gain`` in the current direction, keeps stepping while the
    correlation improves, tries the other direction once if the first step
    was worse, and re-locks on the best correction seen.

    ``correlation_estimator(k, correction)`` returns the correlation measured
    during period ``k`` with the given correction applied.
    """
    n_periods = check_count(n_periods, "n_periods")
    step = dm.feedback_gain
    corrections = np.empty(n_periods)
    correction = 0.0
    direction = 1.0
    reference = None
    climbing = False
    for k in range(n_periods):
        corrections[k] = correction
        c = float(correlation_estimator(k, correction))
        if reference is None:
            reference = c
            continue
        if not climbing:
            band = max(deadband, 0.5 * dm.lock_tolerance * abs(reference))
            if c < reference - band and step > 0:
                climbing, moved, flipped = True, False, False
                best_c, best_phi = c, correction
                correction += direction * step
            continue
        if c > best_c:
            best_c, best_phi, moved = c, correction, True
            correction += direction * step
        elif not moved and not flipped:
            direction, flipped = -direction, True
            correction = best_phi + direction * step
        else:
            correction, reference, climbing = best_phi, best_c, False

    t_mid = (np.arange(n_periods) + 0.5) * dm.feedback_period_s
    effective = _phase_at(dm.phase_rad_per_s, t_mid) - corrections
    mean_abs_cos = float(np.mean(np.abs(np.cos(effective)))) if n_periods else 1.0
    degraded = (abs(dm.drift_per_period) >= step and dm.phase_rad_per_s != 0.0) \
        or mean_abs_cos < 1.0 - dm.lock_tolerance
    return PhaseSchedule(corrections, effective, mean_abs_cos, bool(degraded),
                         dm.feedback_period_s)


def _stream(seed: int, *key: int) -> np.random.Generator:
    # Philox4x64 keyed by SeedSequence(seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _simulate_chunk(chunk, n, omega, p_noise, rep_rate_hz, schedule, drift, seed):
    lo = chunk * CHUNK_ROUNDS
    hi = min(n, lo + CHUNK_ROUNDS)
    m = hi - lo
    rng = _stream(seed, 0, chunk)
    x = rng.integers(0, 2, size=m, dtype=np.uint8)
    noise = rng.standard_normal(m)
    replaced = rng.random(m) < p_noise
    coin = rng.integers(0, 2, size=m, dtype=np.uint8)

    t = np.arange(lo, hi) / rep_rate_hz
    theta = _phase_at(drift, t)
    if schedule is not None and schedule.corrections.size:
        period = np.minimum((t / schedule.period_s).astype(np.int64),
                            schedule.corrections.size - 1)
        theta = theta - schedule.corrections[period]
    amplitude = 2.0 * math.sqrt(omega) * np.cos(theta)
    quadrature = np.where(x == 1, amplitude, -amplitude) + noise
    b = (quadrature >= 0.0).astype(np.uint8)
    b = np.where(replaced, coin, b)
    return x, b


def simulate_rounds(omega: float, nm: NoiseModel, dm: DriftModel, n: int,
                    rep_rate_hz: float, rng_seed: int, *,
                    monitor_period_s: float = 1.0,
                    min_photon_energy_j: float = PHOTON_ENERGY_1550NM,
                    n_jobs: int = 1):
    """Simulate ``n`` protocol rounds of the BPSK/homodyne device.

    Returns ``(rounds, power_trace, phase_schedule)``. Each block of
    ``CHUNK_ROUNDS`` rounds draws from its own Philox stream keyed by
    ``(rng_seed, 0, chunk)``; the phase controller's estimator noise uses
    stream ``(rng_seed, 1)``. The output is identical for any ``n_jobs``.

    The power trace has one sample per ``monitor_period_s`` window, equal to
    the emitted power at mean photon number ``omega`` (100% duty cycle),
    rounded down so the monitor never reads above ``omega``.
    """
    omega = check_mean_photon(omega)
    n = check_count(n, "n", min_val=1)
    rep_rate_hz = check_scalar(rep_rate_hz, "rep_rate_hz", min_val=0.0, include_min=False)
    monitor_period_s = check_scalar(monitor_period_s, "monitor_period_s",
                                    min_val=0.0, include_min=False)
    rng_seed = check_count(rng_seed, "rng_seed")

    duration = n / rep_rate_hz
    n_periods = max(1, math.ceil(duration / dm.feedback_period_s))
    rounds_per_period = max(1.0, rep_rate_hz * dm.feedback_period_s)
    sigma = 1.0 / math.sqrt(rounds_per_period)
    gain = 1.0 - nm.p_noise
    est_rng = _stream(rng_seed, 1)
    est_noise = est_rng.standard_normal(n_periods)

    def estimator(k, correction):
        theta = _phase_at(dm.phase_rad_per_s, (k + 0.5) * dm.feedback_period_s) - correction
        corr = gain * (2.0 * homodyne_success(omega, math.cos(theta)) - 1.0)
        return corr + sigma * est_noise[k]

    schedule = stabilize_phase(dm, estimator, n_periods, deadband=3.0 * sigma)

    n_chunks = math.ceil(n / CHUNK_ROUNDS)
    args = (n, omega, nm.p_noise, rep_rate_hz, schedule, dm.phase_rad_per_s, rng_seed)
    if n_jobs == 1:
        parts = [_simulate_chunk(c, *args) for c in range(n_chunks)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(lambda c: _simulate_chunk(c, *args), range(n_chunks)))
    x = np.concatenate([p[0] for p in parts])
    b = np.concatenate([p[1] for p in parts])

    n_samples = max(1, math.ceil(duration / monitor_period_s - 1e-9))
    power = honest_power(omega, rep_rate_hz, min_photon_energy_j)
    trace = PowerTrace(np.arange(n_samples) * monitor_period_s,
                       np.full(n_samples, power), monitor_period_s)
    return Rounds(x, b), trace, schedule


def honest_power(omega: float, rep_rate_hz: float, min_photon_energy_j: float) -> float:
    """Largest power whose monitor estimate does not exceed ``omega``."""
    power = omega * rep_rate_hz * min_photon_energy_j
    while power > 0 and power / (rep_rate_hz * min_photon_energy_j) > omega:
        power = np.nextafter(power, 0.0)
    return float(power)
