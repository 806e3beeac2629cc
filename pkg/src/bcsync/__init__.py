"""Noisy bounded-confidence opinion dynamics with a stochastic asynchronous rule.

Simulation library plus a verification harness for the model's
synchronization behavior: trajectory/ensemble execution, analytical
constants, adversarial noise protocols, CSV/JSON/SVG reporting, and a
`bcsync` command line.
"""

__version__ = "0.1.0"

from .core import ModelConfig, OpinionState, StepInputs, clamp_unit, neighbor_set, pre_noise_target, step
from .harness import RunSettings, TrajectoryRecord, load_config, run_ensemble, run_trajectory
from .metrics import (
    EnsembleStats,
    QuasiSyncVerdict,
    TheoryConstants,
    check_quasi_sync_in_mean,
    diameter,
    ensemble_mean_diameter,
    extremal_agents,
    extremes_communicating,
    prob_extremes_communicating,
    stopping_time,
    theory_constants,
)
from .presets import dw_preset, general_preset, hk_preset
from .protocols import (
    ProtocolParams,
    contraction_noise,
    divergence_noise,
    large_noise_model,
    sample_comm_set_with_extremes,
)
from .sampling import (
    CommunicationRule,
    InertiaPolicy,
    NoiseModel,
    RngStream,
    inertia_coefficients,
    sample_comm_set,
    sample_noise,
)
