"""Kernel and random-feature adaptive control and prediction."""

from .adaptation import (NNParams, TrajectoryTape, nn_forward, nn_jacobian,
                         nn_update_rhs, nonparametric_input,
                         parametric_update_duals, tape_append)
from .bounds import (BoundInputs, approximation_bound, constant_b_phi,
                     empirical_sup_error, fit_feature_weights, gaussian_b_phi,
                     required_features)
from .deadzones import DeadzoneSpec, deadzone_slope, deadzone_value
from .errors import (ConfigError, SaturationError, SequencingError,
                     SingularityError, SolverError)
from .kernels import (FeatureBank, FeatureSample, OperatorKernelSpec,
                      ScalarKernelSpec, curl_free_kernel, decomposable_kernel,
                      divergence_free_kernel, eval_operator_kernel,
                      eval_scalar_kernel, feature_matrix,
                      finite_feature_kernel, finite_feature_kernel_from_bank,
                      sample_feature, symplectic_kernel)
from .lyapunov import LyapunovCertificate, solve_lyapunov
from .mirror import AdaptState, MirrorMap, mirror_dual, mirror_primal
from .predictors import (DiscretePredictorSpec, Predictor, build_predictor,
                         discrete_sampling_step, symplectic_predictor_rhs)
from .simulate import (MetricsSeries, SimConfig, derive_trial_seeds,
                       run_control, run_prediction, run_trials, step_euler)
from .systems import (ControlBenchmark, HamiltonianSpec, control_rhs,
                      default_system_matrix, hamiltonian, hamiltonian_grads,
                      hamiltonian_rhs, nbody_initial_state)

__version__ = "0.1.0"
