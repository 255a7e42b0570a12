"""Jacobian-norm complexity R and the dimension-based generalization bounds.

1/R is the Monte-Carlo average of log ||J_{h_U}(W)|| over cloud points W and
batch draws U; spectral norms come from a hand-rolled power iteration with a
dense symmetric-eigendecomposition oracle as the independent cross-check.
R is reported signed: contractive systems give negative R, expanding ones
positive.  No absolute values are taken silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np

from . import problems as pr
from .errors import (
    ConfigError,
    DimensionTooLarge,
    NonContractiveEstimate,
    ZeroMeanLogNorm,
    ZeroOperator,
)
from .rng import Xoshiro256PP, child_seed, draw_indices

if TYPE_CHECKING:  # pragma: no cover
    from .ifs import SampleCloud
    from .optimizers import BatchScheme

# --------------------------------------------------------------------------
# power iteration


@dataclass(frozen=True)
class PowerIterConfig:
    tol: float = 1e-6  # relative change of the norm estimate
    max_iters: int = 100
    seed: int = 0


@dataclass(frozen=True)
class PowerIterResult:
    value: float
    converged: bool
    iterations: int


def spectral_norm_power_iter(
    apply: Callable[[np.ndarray], np.ndarray], dim: int, config: PowerIterConfig = PowerIterConfig()
) -> PowerIterResult:
    """Dominant |eigenvalue| of a symmetric operator given only matvecs.

    Starts from a seeded Gaussian unit vector, renormalizes each step, and
    stops once the norm estimate's relative change drops below ``tol``
    (``converged=False`` after ``max_iters`` otherwise).  For symmetric
    operators the estimate converges to the spectral norm even when the
    top eigenvalues tie in magnitude with opposite signs.
    """
    gen = Xoshiro256PP(config.seed)
    v = gen.normals(dim)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:  # astronomically unlikely; retry deterministically
        v = gen.normals(dim)
        nv = float(np.linalg.norm(v))
    v = v / nv
    estimate = 0.0
    for it in range(1, config.max_iters + 1):
        u = apply(v)
        nu = float(np.linalg.norm(u))
        if nu < 1e-300:
            raise ZeroOperator("operator annihilated the probe vector")
        if it > 1 and abs(nu - estimate) <= config.tol * max(abs(nu), 1e-300):
            return PowerIterResult(nu, True, it)
        estimate = nu
        v = u / nu
    return PowerIterResult(estimate, False, config.max_iters)


def matrix_operator_norm(matrix: np.ndarray, config: PowerIterConfig = PowerIterConfig()) -> float:
    """||M||_2 for a general square matrix via power iteration on M^T M."""
    M = np.asarray(matrix, dtype=float)
    res = spectral_norm_power_iter(lambda v: M.T @ (M @ v), M.shape[0], config)
    return math.sqrt(res.value)


# --------------------------------------------------------------------------
# dense oracle

DENSE_ORACLE_MAX_DIM = 64


def dense_jacobian_oracle(
    problem: pr.Problem, w: np.ndarray, dataset: pr.Dataset, batch: np.ndarray, eta: float
) -> tuple[np.ndarray, float]:
    """Assemble J = I - eta*H column-by-column and eigendecompose it.

    The independent route for validating power-iteration norms; refuses
    dimensions above 64 to stay an oracle rather than a workhorse.
    """
    dim = pr.param_dim(problem, dataset)
    if dim > DENSE_ORACLE_MAX_DIM:
        raise DimensionTooLarge(f"dense oracle supports dim <= {DENSE_ORACLE_MAX_DIM}, got {dim}")
    J = np.empty((dim, dim))
    eye = np.eye(dim)
    for k in range(dim):
        J[:, k] = pr.jacobian_apply(problem, w, dataset, batch, eta, eye[k])
    norm = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (J + J.T)))))
    return J, norm


# --------------------------------------------------------------------------
# R estimator


@dataclass(frozen=True)
class ComplexityConfig:
    n_w: int = 200
    n_u: int = 50
    seed: int = 0
    power_iter: PowerIterConfig = field(default_factory=PowerIterConfig)


@dataclass
class ComplexityEstimate:
    R: float
    inverse_R: float
    per_sample_lognorms: np.ndarray  # (n_w, n_u)
    n_w: int
    n_u: int
    seed: int
    converged_fraction: float

    def to_json_dict(self) -> dict:
        return {
            "R": self.R,
            "inverse_R": self.inverse_R,
            "n_w": self.n_w,
            "n_u": self.n_u,
            "converged_fraction": self.converged_fraction,
        }


def _strided_indices(n_points: int, n_take: int) -> np.ndarray:
    return (np.arange(n_take, dtype=np.int64) * n_points) // n_take


def estimate_R(
    problem: pr.Problem,
    dataset: pr.Dataset,
    scheme: "BatchScheme",
    eta: float,
    cloud: "SampleCloud",
    config: ComplexityConfig = ComplexityConfig(),
) -> ComplexityEstimate:
    """1/R = mean over (W_i, U_j) of log ||I - eta * Hessian_{U_j}(W_i)||.

    W_i are ``n_w`` evenly strided cloud points; U_j are ``n_u`` batch draws
    (i.i.d. from the Partition probabilities, or without-replacement subsets
    in Subset mode).  Norms use the power iteration with a derived seed per
    (i, j) cell: the batch stream is child 0, cell (i, j) is 1 + i*n_u + j,
    so the computation parallelizes without changing results.  Accumulation
    is a row-major pairwise sum over the full (n_w, n_u) table.
    """
    pts = cloud.points
    if pts.shape[0] < config.n_w:
        raise ConfigError(f"cloud has {pts.shape[0]} points; need at least n_w={config.n_w}")
    W = pts[_strided_indices(pts.shape[0], config.n_w)]
    dim = pr.param_dim(problem, dataset)
    if W.shape[1] != dim:
        raise ConfigError(f"cloud dimension {W.shape[1]} != parameter dimension {dim}")

    batch_gen = Xoshiro256PP(child_seed(config.seed, 0))
    if scheme.batches is not None:
        draws = draw_indices(batch_gen, scheme.probs, config.n_u)
        batches = [scheme.batches[k] for k in draws]
    else:
        batches = [
            batch_gen.subset_without_replacement(scheme.n, scheme.batch_size)
            for _ in range(config.n_u)
        ]

    lognorms = np.empty((config.n_w, config.n_u))
    converged = 0
    for i in range(config.n_w):
        w = W[i]
        for j in range(config.n_u):
            cell_seed = child_seed(config.seed, 1 + i * config.n_u + j)
            res = spectral_norm_power_iter(
                lambda v: pr.jacobian_apply(problem, w, dataset, batches[j], eta, v),
                dim,
                PowerIterConfig(config.power_iter.tol, config.power_iter.max_iters, cell_seed),
            )
            lognorms[i, j] = math.log(res.value)
            converged += res.converged
    inverse_r = float(lognorms.sum() / lognorms.size)
    if abs(inverse_r) < 1e-12:
        raise ZeroMeanLogNorm(f"mean log norm {inverse_r:.3e} is numerically zero; R undefined")
    return ComplexityEstimate(
        R=1.0 / inverse_r,
        inverse_R=inverse_r,
        per_sample_lognorms=lognorms,
        n_w=config.n_w,
        n_u=config.n_u,
        seed=config.seed,
        converged_fraction=converged / lognorms.size,
    )


# --------------------------------------------------------------------------
# generalization bounds


@dataclass(frozen=True)
class GeneralizationInputs:
    """Constants of the high-probability bound: loss scale nu (losses in
    [0, 2 nu]), Lipschitz constant L, sample count n, covering constant M,
    and failure probability zeta."""

    nu: float
    lipschitz: float
    n: int
    m_const: float
    zeta: float

    def __post_init__(self):
        if self.n <= 0:
            raise ConfigError("n must be positive")
        if not 0.0 < self.zeta < 1.0:
            raise ConfigError("zeta must lie in (0, 1)")
        if self.nu <= 0 or self.lipschitz <= 0 or self.m_const <= 0:
            raise ConfigError("nu, lipschitz, m_const must be positive")


def bound_theorem1(dim_h: float, inputs: GeneralizationInputs) -> float:
    """8 nu sqrt(dim_h log^2(n L^2)/n + log(13 M / zeta)/n), natural logs."""
    if dim_h < 0:
        raise ConfigError("dim_h must be nonnegative")
    n = inputs.n
    t1 = dim_h * math.log(n * inputs.lipschitz**2) ** 2 / n
    t2 = math.log(13.0 * inputs.m_const / inputs.zeta) / n
    return 8.0 * inputs.nu * math.sqrt(t1 + t2)


def bound_corollary1(rams, inputs: GeneralizationInputs) -> float:
    """Theorem-1 bound with the Rams ratio standing in for the dimension."""
    if rams.mean_log_jacobian >= 0.0:
        raise NonContractiveEstimate(
            f"mean log Jacobian {rams.mean_log_jacobian:.6g} >= 0: ratio is not a dimension bound"
        )
    return bound_theorem1(rams.ratio, inputs)


def generalization_gap(
    problem: pr.Problem, train: pr.Dataset, test: pr.Dataset, w: np.ndarray
) -> float:
    """|mean train loss - mean test loss| at the fixed parameter ``w``."""
    return abs(pr.mean_loss(problem, w, train) - pr.mean_loss(problem, w, test))
