"""Data-driven feedback linearization for sampled normal-form plants whose
zero dynamics has a stable limit cycle."""

from .controller import ExcitationConfig, control, design_gain, excitation_input
from .errors import (ConfigError, DDFLError, IntegrationDiverged, InvalidArgument,
                     ModelEvaluationError, NotReady, PEViolation)
from .estimator import (BetaEstimate, EstimatorState, ExtendedStateEstimate,
                        build_reconstruction_matrices, build_z_matrices, estimate_beta,
                        estimate_beta_from_data, init_estimator, push_sample, reconstruct)
from .numerics import build_hankel, check_pe, numeric_rank, pinv, rk4_hold_step
from .plant import (ExtendedDiscreteModel, FullState, PlantModel, build_extended_model,
                    derivative, make_vdp_demo, true_alpha, true_beta)
from .simloop import (ExperimentConfig, IoLog, RunMetrics, measure_eta_bounds,
                      run_experiment, sweep)

__version__ = "0.1.0"
