"""Movable-antenna position optimization from statistical channel knowledge.

Core pipeline: describe the multipath statistics of each user (channel
module), evaluate zero-forcing sum rates (precoding), estimate the ergodic
rate and its position gradient with a Monte-Carlo or deterministic
large-system engine (montecarlo / asymptotic), and ascend it under log-barrier
feasibility penalties (optimizer).  The scenario module synthesizes sites and
benchmarks antenna layouts against fixed-grid baselines.
"""

from .channel import (AntennaLayout, ChannelSample, MovingRegion, ReceiveSideSpec,
                      StatisticalCsi, Wavevector, build_receive_side_spec,
                      channel_covariance, channel_covariances, channel_from_gains,
                      csi_from_json, csi_to_json, phasor_sum_sample, rician_rescale,
                      sample_path_gains, steering_matrix)
from .precoding import (GramData, WaterFillResult, gram_inverse_diag, rate_from_c,
                        sinr_check, water_fill, zf_precoder)
from .montecarlo import (RateGradient, f_matrix, mc_rate, mc_rate_gradient,
                         sample_rate_gradient, wavevector_diff_matrix)
from .asymptotic import (FixedPointSolution, asymptotic_c, asymptotic_rate,
                         asymptotic_rate_gradient, newton_epsilon)
from .optimizer import (DeEngine, McEngine, OptimizerConfig, OptimizerTrace,
                        PinnedSampleEngine, barrier_gradient, barrier_value,
                        is_strictly_feasible, optimize_positions, upa_dense_layout,
                        upa_sparse_layout)
from .scenario import (SCHEMES, EvalReport, ScenarioSpec, draw_user_set,
                       evaluate_ergodic_rate, generate_candidates, reports_to_csv,
                       reports_to_json, run_experiment)
from . import errors, rng, validate

__all__ = [
    "AntennaLayout", "ChannelSample", "MovingRegion", "ReceiveSideSpec",
    "StatisticalCsi", "Wavevector", "build_receive_side_spec", "channel_covariance",
    "channel_covariances", "channel_from_gains", "csi_from_json", "csi_to_json",
    "phasor_sum_sample", "rician_rescale", "sample_path_gains", "steering_matrix",
    "GramData", "WaterFillResult", "gram_inverse_diag", "rate_from_c", "sinr_check",
    "water_fill", "zf_precoder",
    "RateGradient", "f_matrix", "mc_rate", "mc_rate_gradient", "sample_rate_gradient",
    "wavevector_diff_matrix",
    "FixedPointSolution", "asymptotic_c", "asymptotic_rate", "asymptotic_rate_gradient",
    "newton_epsilon",
    "DeEngine", "McEngine", "OptimizerConfig", "OptimizerTrace", "PinnedSampleEngine",
    "barrier_gradient", "barrier_value", "is_strictly_feasible", "optimize_positions",
    "upa_dense_layout", "upa_sparse_layout",
    "SCHEMES", "EvalReport", "ScenarioSpec", "draw_user_set", "evaluate_ergodic_rate",
    "generate_candidates", "reports_to_csv", "reports_to_json", "run_experiment",
    "errors", "rng", "validate",
]
