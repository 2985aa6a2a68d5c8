"""Identification of band-limited equivalent impulse responses with non-causal FIR models."""
from .bandlimited import (BLImpulse, QuadratureConfig, bl_energy, bl_equivalent_freq, bl_equivalent_time,
                          bl_window, sinc, sinc_interpolate)
from .errors import (BandwidthUndefinedError, BlidError, ConfigError, DegenerateSignalError,
                     GenerationFailedError, IntegrationFailedError, KernelIndefiniteError,
                     MalformedSystemError, NotIdentifiableError, SimulationDivergedError, SolveFailedError,
                     TuningFailedError, UndefinedFitError)
from .estimators import (EstimationResult, RegressionProblem, build_regressor, freq_response_estimate,
                         ls_estimate, oracle_estimate, reg_ls_estimate, regressor_from_samples)
from .harness import (ESTIMATORS, BankSpec, ExperimentConfig, FitRecord, fit_metric, random_bank,
                      run_experiment, run_replication)
from .kernels import JitterPolicy, KernelSpec, factor_kernel, kernel_matrix
from .lti import (G1, G2, ContinuousSystem, bandwidth, freq_response, impulse_response, named_system,
                  random_stable_system, to_state_space)
from .simulate import Dataset, SimConfig, load_dataset, make_dataset, save_dataset
from .tuning import (OptimizerConfig, QrFactors, TuningResult, concentrated_nll, optimize_hyperparameters,
                     reg_estimate_via_qr, thin_qr_stack)

__version__ = "0.1.0"
