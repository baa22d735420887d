"""Joint state and sparse model-correction estimation with a square-root UKF.

The unknown part of a dynamical model is written as a linear combination of
library functions whose coefficients are estimated together with the state.
A second filter pass applies a regularized-horseshoe sparsity prior through an
L1 pseudo-measurement.
"""
from ._backend import BACKEND
from .analysis import (
    DominanceReport,
    EstimateLog,
    cumulative_error,
    pca_dominance,
    reconstruct_g,
    sparsity_count,
    state_rmse,
)
from .config import ExperimentConfig
from .errors import (
    ConfigError,
    DowndateBreakdown,
    InsufficientSamples,
    JointSRUKFError,
    MergeNotPD,
    NonFiniteOutput,
    NotPositiveDefinite,
    ScaleFloorViolation,
)
from .experiment import compare_observers, run_experiment, run_observer, simulate
from .linalg import chol, numerical_rank, qr_compress, rank1_update
from .models import (
    FunctionLibrary,
    JointModel,
    JointState,
    NoiseSpec,
    duffing_joint_model,
    duffing_library,
    joint_step,
    simulate_truth,
)
from .observability import ObservabilityReport, check_observability
from .prior import HorseshoeSpec, LaplaceParams, MonteCarloEstimate, sigma_star
from .srukf import (
    FilterState,
    JointSRUKF,
    PseudoMeasurement,
    UTParams,
    joint_filter_step,
    merge_passes,
    srukf_step,
)

__version__ = "0.1.0"
