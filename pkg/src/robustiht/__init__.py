"""Outlier-robust sparse linear regression via iterative hard thresholding.

Robust IHT couples the classical hard-thresholded gradient step with a
pluggable robust sparse gradient estimator; the estimators here certify a
sample set through a sparse-PCA convex relaxation of its covariance and
either filter suspicious samples (randomized removal) or reweight them
(separation-oracle cutting planes).
"""

from .datagen import (
    CorruptedDataset,
    ExplicitSparseCovariance,
    IdentityCovariance,
    ModelConfig,
    OrthogonalMeanAttack,
    SignFlipAttack,
    ToeplitzCovariance,
    corrupt,
    covariance_toeplitz,
    generate_clean,
    generate_gradient_samples,
    prune_gross_outliers,
)
from .ellipsoid import (
    OracleResult,
    WeightVector,
    estimate_sparse_mean_ellipsoid,
    f_covariance,
    project_weights,
    separation_oracle,
    smoothness_constants,
)
from .errors import (
    DegenerateScoresError,
    EnumerationLimitError,
    InvalidConfigError,
    InvalidInputError,
    NumericFailureError,
)
from .filtering import (
    Certified,
    FilterConfig,
    GradientBatch,
    Removed,
    RsgeOutcome,
    estimate_sparse_mean_filter,
    filter_step,
    gradient_samples,
    rho_sep_default,
)
from .iht import (
    EllipsoidConfig,
    IhtConfig,
    IhtTrace,
    default_hyperparams,
    iht_step,
    robust_iht,
)
from .sparse import (
    SparseVector,
    SymMatrix,
    hard_threshold,
    sparse_largest_eigenvalue_bf,
    sparse_operator_norm_bf,
    threshold_contraction_factor,
)
from .sparse_pca import (
    SolverOptions,
    SparsePcaSolution,
    project_l1_ball,
    project_spectraplex,
    solve_relaxation,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
