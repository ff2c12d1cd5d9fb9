"""Data series for the figure analogues, as column dictionaries."""

from __future__ import annotations

import numpy as np

from .certify import InfeasibleBehaviorError, entropy_bound
from .config import RunConfig
from .physics import (
    helstrom_behavior,
    ideal_homodyne_behavior,
    noisy_homodyne_behavior,
    simulate_rounds,
)
from .protocol import accumulate_block, block_measured_omega, run_session


def strategies(cfg: RunConfig) -> dict:
    """Certified entropy vs energy bound for three receivers of the BPSK pair."""
    omegas = cfg.omega_sweep()
    grid = cfg.grid_spec
    nm = cfg.noise_model
    return {
        "omega": omegas,
        "helstrom": [entropy_bound(helstrom_behavior(w), w, grid) for w in omegas],
        "homodyne": [entropy_bound(ideal_homodyne_behavior(w), w, grid) for w in omegas],
        "noisy_homodyne": [entropy_bound(noisy_homodyne_behavior(w, nm), w, grid)
                           for w in omegas],
    }


def entropy_vs_energy(cfg: RunConfig) -> dict:
    """Certified entropy with the bound set to the emitted mean photon number.

    ``model`` uses the exact noisy-homodyne behavior; ``simulated`` uses the
    frequencies of one simulated block at each point (NaN if the sampled
    frequencies fall outside the feasible set).
    """
    omegas = cfg.omega_sweep()
    grid = cfg.grid_spec
    nm, dm = cfg.noise_model, cfg.drift_model
    model, simulated = [], []
    for i, w in enumerate(omegas):
        model.append(entropy_bound(noisy_homodyne_behavior(w, nm), w, grid))
        rounds, _, _ = simulate_rounds(w, nm, dm, cfg.block_rounds, cfg.rep_rate_hz,
                                       cfg.seed + i)
        try:
            simulated.append(entropy_bound(accumulate_block(rounds), w, grid))
        except InfeasibleBehaviorError:
            simulated.append(float("nan"))
    return {"omega": omegas, "model": model, "simulated": simulated}


def _simulate_session(cfg: RunConfig):
    n = max(cfg.total_rounds, cfg.block_rounds)
    return simulate_rounds(cfg.source_mean_photon, cfg.noise_model, cfg.drift_model, n,
                           cfg.rep_rate_hz, cfg.seed, monitor_period_s=cfg.block_duration_s,
                           min_photon_energy_j=cfg.min_photon_energy_j)


def energy_monitor(cfg: RunConfig) -> dict:
    """Monitored mean photon number per block against the bound."""
    _, trace, _ = _simulate_session(cfg)
    measured = [block_measured_omega(trace, t, t + cfg.block_duration_s, cfg.rep_rate_hz,
                                     cfg.min_photon_energy_j) for t in trace.time_s]
    return {"time_s": trace.time_s, "measured_omega": measured,
            "omega_bound": np.full(trace.time_s.size, cfg.omega)}


def stability(cfg: RunConfig) -> dict:
    """Per-block witness value against the threshold over a simulated session."""
    rounds, trace, _ = _simulate_session(cfg)
    pcfg = cfg.protocol_config()
    results = run_session(rounds, trace, pcfg, cfg.min_photon_energy_j)
    return {
        "time_s": [r.index * cfg.block_duration_s for r in results],
        "witness_value": [r.witness_value for r in results],
        "threshold_h": [pcfg.threshold_h] * len(results),
        "passed": [int(r.passed) for r in results],
    }


FIGURES = {
    "entropy-vs-energy": entropy_vs_energy,
    "strategies": strategies,
    "energy-monitor": energy_monitor,
    "stability": stability,
}
