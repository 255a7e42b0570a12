"""Iterated-function-system view of constant step-size SGD.

Build the random map family induced by minibatch SGD on a finite dataset,
sample its stationary distribution, estimate fractal dimensions of the
support (box counting, analytic bounds, the entropy/Lyapunov ratio), and
evaluate the Monte-Carlo complexity R together with dimension-based
generalization bounds.
"""

from .complexity import (
    ComplexityConfig,
    ComplexityEstimate,
    GeneralizationInputs,
    PowerIterConfig,
    bound_corollary1,
    bound_theorem1,
    dense_jacobian_oracle,
    estimate_R,
    generalization_gap,
    matrix_operator_norm,
    spectral_norm_power_iter,
)
from .dimension import (
    BoxCountConfig,
    DimensionEstimate,
    RamsBound,
    analytic_bound,
    box_counting_dimension,
    rams_ratio,
    subset_map_count,
)
from .errors import (
    ComputeError,
    ConfigError,
    DegenerateProbe,
    DegenerateVariance,
    DimensionTooLarge,
    IfslabError,
    IndivisibleBatch,
    InsufficientScales,
    NonContractiveEstimate,
    NonFiniteState,
    NotPositiveDefinite,
    PreconditionViolation,
    SingularBatchHessian,
    ZeroMeanLogNorm,
    ZeroOperator,
)
from .experiments import (
    MlpRegression,
    SweepConfig,
    SweepResult,
    UniformLinReg,
    correlation_stats,
    generate_synthetic,
    reference_sweep_config,
    run_cantor,
    run_linreg2d,
    run_sweep,
)
from .ifs import (
    AffineMap,
    IfsSystem,
    ProblemMap,
    SampleCloud,
    Trajectory,
    contractivity_report,
    iterate,
    lyapunov_exponent,
    read_cloud_csv,
    sample_invariant,
)
from .optimizers import (
    BatchScheme,
    OptimizerConfig,
    PreconditionerSpec,
    build_precond_sgd_ifs,
    build_sgd_ifs,
    build_stoch_newton_ifs,
    iterate_subset_sgd,
    partition_batches,
    sample_invariant_subset,
)
from .problems import (
    Dataset,
    LeastSquares,
    Logistic,
    OneHiddenLayer,
    RobustRegression,
    SmoothHingeSVM,
    batch_losses,
    compute_one_layer_C,
    grad,
    hvp,
    load_dataset_csv,
    mean_loss,
    norm_envelopes,
    param_dim,
)

__version__ = "0.1.0"

__all__ = [
    "AffineMap",
    "BatchScheme",
    "BoxCountConfig",
    "ComplexityConfig",
    "ComplexityEstimate",
    "ComputeError",
    "ConfigError",
    "Dataset",
    "DegenerateProbe",
    "DegenerateVariance",
    "DimensionEstimate",
    "DimensionTooLarge",
    "GeneralizationInputs",
    "IfsSystem",
    "IfslabError",
    "IndivisibleBatch",
    "InsufficientScales",
    "LeastSquares",
    "Logistic",
    "MlpRegression",
    "NonContractiveEstimate",
    "NonFiniteState",
    "NotPositiveDefinite",
    "OneHiddenLayer",
    "OptimizerConfig",
    "PowerIterConfig",
    "PreconditionViolation",
    "PreconditionerSpec",
    "ProblemMap",
    "RamsBound",
    "RobustRegression",
    "SampleCloud",
    "SingularBatchHessian",
    "SmoothHingeSVM",
    "SweepConfig",
    "SweepResult",
    "Trajectory",
    "UniformLinReg",
    "ZeroMeanLogNorm",
    "ZeroOperator",
    "analytic_bound",
    "batch_losses",
    "bound_corollary1",
    "bound_theorem1",
    "box_counting_dimension",
    "build_precond_sgd_ifs",
    "build_sgd_ifs",
    "build_stoch_newton_ifs",
    "compute_one_layer_C",
    "contractivity_report",
    "correlation_stats",
    "dense_jacobian_oracle",
    "estimate_R",
    "generalization_gap",
    "generate_synthetic",
    "grad",
    "hvp",
    "iterate",
    "iterate_subset_sgd",
    "load_dataset_csv",
    "lyapunov_exponent",
    "matrix_operator_norm",
    "mean_loss",
    "norm_envelopes",
    "param_dim",
    "partition_batches",
    "rams_ratio",
    "read_cloud_csv",
    "reference_sweep_config",
    "run_cantor",
    "run_linreg2d",
    "run_sweep",
    "sample_invariant",
    "sample_invariant_subset",
    "spectral_norm_power_iter",
    "subset_map_count",
]
