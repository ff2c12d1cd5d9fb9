"""Run configuration: a flat ``key = value`` file with ``#`` comments."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .certify import FiniteSizeParams, Grid, Witness, build_witness
from .physics import (
    DriftModel,
    NoiseModel,
    noisy_homodyne_behavior,
    photon_energy,
)
from .protocol import ProtocolConfig, tune_threshold


class ConfigError(ValueError):
    pass


def _auto_float(text):
    return None if text.lower() == "auto" else float(text)


@dataclass(frozen=True)
class RunConfig:
    """Simulation and certification parameters.

    ``omega`` is the energy bound checked by the protocol; ``mean_photon``
    is what the simulated source actually emits (defaults to ``omega``).
    ``threshold_h`` and ``c`` accept ``auto``: the threshold is then placed
    ``threshold_sigma`` block standard deviations below the expected witness
    value, and ``c`` is the witness coefficient range.
    """

    rep_rate_hz: float = 1e5
    block_duration_s: float = 1.0
    duration_s: float = 10.0
    n_rounds: int | None = None
    omega: float = 0.005
    mean_photon: float | None = None
    p_noise: float = 0.39
    phase_drift_rad_per_s: float = 0.0
    feedback_gain: float = 0.05
    feedback_period_s: float = 0.1
    lock_tolerance: float = 0.01
    seed: int = 1
    threshold_h: float | None = None
    threshold_sigma: float = 2.0
    epsilon: float = 1e-9
    c: float | None = None
    d: float = 1.0
    grid: str = "101"
    epsilon_ext: float = 2.0 ** -64
    wavelength_nm: float = 1550.0
    figure_points: int = 50
    figure_omega_min: float = 1e-4
    figure_omega_max: float = 1e-1

    _parsers = {
        "n_rounds": int, "seed": int, "figure_points": int, "grid": str,
        "mean_photon": _auto_float, "threshold_h": _auto_float, "c": _auto_float,
    }

    def __post_init__(self):
        try:
            self.noise_model
            self.drift_model
            self.grid_spec
            if self.rep_rate_hz <= 0 or self.block_duration_s <= 0:
                raise ValueError("rep_rate_hz and block_duration_s must be positive")
            if self.total_rounds < 0:
                raise ValueError("duration_s / n_rounds must be nonnegative")
            if self.block_rounds < 1:
                raise ValueError("a block must contain at least one round")
            if self.omega < 0 or self.source_mean_photon < 0:
                raise ValueError("omega and mean_photon must be nonnegative")
            if not 0 < self.epsilon < 1:
                raise ValueError("epsilon must lie in (0, 1)")
            if not 0 < self.epsilon_ext <= 1:
                raise ValueError("epsilon_ext must lie in (0, 1]")
            if self.wavelength_nm <= 0:
                raise ValueError("wavelength_nm must be positive")
            if self.figure_points < 2 or not 0 < self.figure_omega_min < self.figure_omega_max:
                raise ValueError("invalid figure sweep")
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            parser = cls._parsers.get(key, float)
            try:
                values[key] = parser(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
        return cls(**values)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                return cls.parse(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    @property
    def source_mean_photon(self) -> float:
        return self.omega if self.mean_photon is None else self.mean_photon

    @property
    def total_rounds(self) -> int:
        if self.n_rounds is not None:
            return self.n_rounds
        return int(round(self.duration_s * self.rep_rate_hz))

    @property
    def block_rounds(self) -> int:
        return int(round(self.rep_rate_hz * self.block_duration_s))

    @property
    def noise_model(self) -> NoiseModel:
        return NoiseModel(self.p_noise)

    @property
    def drift_model(self) -> DriftModel:
        return DriftModel(self.phase_drift_rad_per_s, self.feedback_gain,
                          self.feedback_period_s, self.lock_tolerance)

    @property
    def grid_spec(self) -> Grid:
        return Grid.parse(self.grid)

    @property
    def min_photon_energy_j(self) -> float:
        return photon_energy(self.wavelength_nm * 1e-9)

    def expected_behavior(self):
        return noisy_homodyne_behavior(self.source_mean_photon, self.noise_model)

    def protocol_config(self, witness: Witness | None = None) -> ProtocolConfig:
        """Protocol parameters, building the witness at the expected behavior if not given."""
        p = self.expected_behavior()
        if witness is None:
            witness = build_witness(p, self.omega, self.grid_spec)
        n = self.block_rounds
        if self.threshold_h is None:
            h = tune_threshold(p, witness, n, n_sigma=self.threshold_sigma)
        else:
            h = self.threshold_h
        c = witness.gamma_range if self.c is None else self.c
        fs = FiniteSizeParams(n, self.epsilon, c, self.d)
        return ProtocolConfig(self.rep_rate_hz, self.block_duration_s, self.omega, h, fs,
                              witness)

    def omega_sweep(self) -> np.ndarray:
        return np.geomspace(self.figure_omega_min, self.figure_omega_max, self.figure_points)
