"""Simulation and energy-bounded semi-device-independent certification of a
BPSK/homodyne quantum random number generator."""

from .certify import (
    DEFAULT_GRID,
    EntropyBound,
    FiniteSizeParams,
    Grid,
    InfeasibleBehaviorError,
    Witness,
    build_witness,
    conditional_entropy,
    entropy_bound,
    evaluate_witness,
    finite_size_min_entropy,
    max_success,
    quantum_set_membership,
    solve_entropy_bound,
)
from .estimators import EntropyWitness, SemiDICertifier, ToeplitzExtractor
from .extract import ToeplitzSeed, output_length, toeplitz_extract
from .physics import (
    DriftModel,
    NoiseModel,
    RoundRecord,
    Rounds,
    apply_white_noise,
    coherent_overlap,
    helstrom_success,
    ideal_homodyne_behavior,
    simulate_rounds,
    stabilize_phase,
)
from .protocol import (
    BlockResult,
    ProtocolConfig,
    SessionSummary,
    accumulate_block,
    estimate_mean_photon,
    judge_block,
    summarize_session,
)

__version__ = "0.1.0"
