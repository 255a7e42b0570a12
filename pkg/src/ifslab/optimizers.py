"""Mini-batch schemes and the SGD-variant -> IFS builders.

Partition mode splits {0..n-1} into contiguous blocks of size b (seeded
shuffle optional) and enumerates one map per block.  Subset mode (the
without-replacement C(n,b) family) is never enumerated: its maps are drawn
lazily during iteration, and operations needing the map count use
m_b = C(n,b) as a plain number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import problems as pr
from .complexity import PowerIterConfig, spectral_norm_power_iter
from .errors import (
    ConfigError,
    IndivisibleBatch,
    NonFiniteState,
    NotPositiveDefinite,
    SingularBatchHessian,
)
from .ifs import AffineMap, IfsSystem, ProblemMap, SampleCloud, Trajectory
from .rng import Xoshiro256PP

# --------------------------------------------------------------------------
# batch schemes


@dataclass(frozen=True)
class BatchScheme:
    mode: str  # "partition" | "subset"
    n: int
    batch_size: int
    batches: Optional[tuple[np.ndarray, ...]]  # None in subset mode
    probs: Optional[np.ndarray]  # None in subset mode (implicitly uniform)
    m_b: int  # number of maps: n/b, or C(n,b) in subset mode


def partition_batches(
    n: int, b: int, mode: str = "partition", seed: int = 0, shuffle: bool = False
) -> BatchScheme:
    """Build the batching scheme.

    Partition: contiguous blocks ({0..b-1}, {b..2b-1}, ...) with uniform
    probabilities p_i = b/n; ``shuffle`` permutes the indices first with the
    seeded generator.  Subset: stores only (n, b) and m_b = C(n, b).
    """
    if n <= 0 or b <= 0 or b > n:
        raise ConfigError(f"need 0 < b <= n, got n={n}, b={b}")
    if mode == "partition":
        if n % b != 0:
            raise IndivisibleBatch(f"batch size {b} does not divide n={n}")
        order = np.arange(n, dtype=np.int64)
        if shuffle:
            gen = Xoshiro256PP(seed)
            for i in range(n - 1):  # Fisher-Yates with the mandated stream
                j = i + min(int(gen.uniform() * (n - i)), n - i - 1)
                order[i], order[j] = order[j], order[i]
        m = n // b
        batches = tuple(order[i * b : (i + 1) * b].copy() for i in range(m))
        probs = np.full(m, 1.0 / m)
        return BatchScheme("partition", n, b, batches, probs, m)
    if mode == "subset":
        return BatchScheme("subset", n, b, None, None, math.comb(n, b))
    raise ConfigError(f"unknown batch mode {mode!r}")


# --------------------------------------------------------------------------
# preconditioner


class PreconditionerSpec:
    """SPD matrix H with certified eigenvalue bounds m_low <= eig <= m_high.

    Cholesky-factored once at construction (NotPositiveDefinite on failure);
    the bounds are then verified by power iteration on H and H^{-1} to
    tolerance 1e-8.  ``solve`` applies H^{-1} through the factor.
    """

    _VERIFY = PowerIterConfig(tol=1e-8, max_iters=500, seed=0x9E37)

    def __init__(self, matrix: np.ndarray, eigen_bounds: tuple[float, float]):
        H = np.asarray(matrix, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ConfigError("preconditioner matrix must be square")
        if not np.allclose(H, H.T, atol=1e-12, rtol=0.0):
            raise ConfigError("preconditioner matrix must be symmetric (1e-12)")
        m_low, m_high = eigen_bounds
        if not 0.0 < m_low <= m_high:
            raise ConfigError("eigen_bounds must satisfy 0 < m_low <= m_high")
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite("preconditioner failed Cholesky factorization") from None
        self.matrix = H
        self.eigen_bounds = (float(m_low), float(m_high))
        self._l_inv = np.linalg.inv(L)  # triangular; H^{-1} = L^{-T} L^{-1}
        lam_max = spectral_norm_power_iter(lambda v: H @ v, H.shape[0], self._VERIFY).value
        lam_min = 1.0 / spectral_norm_power_iter(self.solve, H.shape[0], self._VERIFY).value
        slack_hi = 1e-8 * max(1.0, m_high)
        slack_lo = 1e-8 * max(1.0, m_low)
        if lam_max > m_high + slack_hi or lam_min < m_low - slack_lo:
            raise NotPositiveDefinite(
                f"eigen bounds violated: spectrum within [{lam_min:.9g}, {lam_max:.9g}] "
                f"but declared [{m_low:.9g}, {m_high:.9g}]"
            )

    def solve(self, v: np.ndarray) -> np.ndarray:
        return self._l_inv.T @ (self._l_inv @ v)

    def solve_matrix(self, X: np.ndarray) -> np.ndarray:
        return self._l_inv.T @ (self._l_inv @ X)


@dataclass(frozen=True)
class OptimizerConfig:
    """CLI-facing optimizer choice: kind in {sgd, precond_sgd, newton}."""

    kind: str
    eta: float
    preconditioner: Optional[PreconditionerSpec] = None


# --------------------------------------------------------------------------
# builders (Partition schemes only; Subset systems are iterated directly)


def _require_enumerated(scheme: BatchScheme, op: str) -> None:
    if scheme.batches is None:
        raise ConfigError(f"{op} needs an enumerated Partition scheme; Subset mode is iterated lazily")


def _validate_labels(problem: pr.Problem, dataset: pr.Dataset) -> None:
    if isinstance(problem, (pr.Logistic, pr.SmoothHingeSVM)):
        pr.require_pm1_labels(dataset, type(problem).__name__)


def build_sgd_ifs(
    problem: pr.Problem,
    dataset: pr.Dataset,
    scheme: BatchScheme,
    eta: float,
    probs: Optional[np.ndarray] = None,
) -> IfsSystem:
    """One map per batch: h_i(w) = w - eta * grad_batch_i(w).

    Least squares yields explicit affine maps
    M_i = (1 - eta lam) I - (eta/b) A_i^T A_i,  q_i = (eta/b) A_i^T y_i;
    other kinds yield problem-backed maps.  ``probs`` overrides the uniform
    selection distribution (experiments never do).
    """
    _require_enumerated(scheme, "build_sgd_ifs")
    _validate_labels(problem, dataset)
    if eta <= 0.0:
        raise ConfigError("eta must be positive")
    p = scheme.probs if probs is None else np.asarray(probs, dtype=float)
    if isinstance(problem, pr.LeastSquares):
        d = dataset.d
        eye = np.eye(d)
        maps = []
        for batch in scheme.batches:
            A = dataset.features[batch]
            y = dataset.targets[batch]
            b = len(batch)
            M = (1.0 - eta * problem.lam) * eye - (eta / b) * (A.T @ A)
            q = (eta / b) * (A.T @ y)
            maps.append(AffineMap(M, q))
        return IfsSystem(tuple(maps), p)
    maps = tuple(
        ProblemMap(problem, dataset, np.asarray(b_, dtype=np.int64), eta) for b_ in scheme.batches
    )
    return IfsSystem(maps, p)


def build_precond_sgd_ifs(
    problem: pr.Problem,
    dataset: pr.Dataset,
    scheme: BatchScheme,
    eta: float,
    precond: PreconditionerSpec,
    probs: Optional[np.ndarray] = None,
) -> IfsSystem:
    """Preconditioned steps h_i(w) = w - eta H^{-1} grad_batch_i(w).

    Least squares again reduces to affine maps
    M_i = I - eta H^{-1}(lam I + (1/b) A_i^T A_i),  q_i = (eta/b) H^{-1} A_i^T y_i.
    """
    _require_enumerated(scheme, "build_precond_sgd_ifs")
    _validate_labels(problem, dataset)
    if eta <= 0.0:
        raise ConfigError("eta must be positive")
    if np.array_equal(precond.matrix, np.eye(dataset.d)):
        # exact identity: skip the solves so trajectories match plain SGD bit-for-bit
        return build_sgd_ifs(problem, dataset, scheme, eta, probs=probs)
    p = scheme.probs if probs is None else np.asarray(probs, dtype=float)
    if isinstance(problem, pr.LeastSquares):
        d = dataset.d
        eye = np.eye(d)
        maps = []
        for batch in scheme.batches:
            A = dataset.features[batch]
            y = dataset.targets[batch]
            b = len(batch)
            M = eye - eta * precond.solve_matrix(problem.lam * eye + (A.T @ A) / b)
            q = (eta / b) * precond.solve(A.T @ y)
            maps.append(AffineMap(M, q))
        return IfsSystem(tuple(maps), p)
    maps = tuple(
        ProblemMap(problem, dataset, np.asarray(b_, dtype=np.int64), eta, solve=precond.solve)
        for b_ in scheme.batches
    )
    return IfsSystem(maps, p)


def build_stoch_newton_ifs(
    problem: pr.Problem, dataset: pr.Dataset, scheme: BatchScheme, eta: float
) -> IfsSystem:
    """Stochastic Newton on regularized least squares (lam > 0 required):

    h_i(w) = (1-eta) w + eta Htilde_i^{-1} c_i with
    Htilde_i = (1/b) A_i^T A_i + lam I and c_i = (1/b) A_i^T y_i, so every
    Jacobian is the constant (1-eta) I.
    """
    _require_enumerated(scheme, "build_stoch_newton_ifs")
    if not isinstance(problem, pr.LeastSquares):
        raise ConfigError("stochastic Newton is defined for least squares only")
    if problem.lam <= 0.0:
        raise ConfigError("stochastic Newton needs lam > 0")
    if not 0.0 < eta:
        raise ConfigError("eta must be positive")
    d = dataset.d
    eye = np.eye(d)
    maps = []
    for batch in scheme.batches:
        A = dataset.features[batch]
        y = dataset.targets[batch]
        b = len(batch)
        H = (A.T @ A) / b + problem.lam * eye
        c = (A.T @ y) / b
        try:
            q = eta * np.linalg.solve(H, c)
        except np.linalg.LinAlgError:
            raise SingularBatchHessian(
                f"batch Hessian solve failed for batch starting at index {int(batch[0])}"
            ) from None
        maps.append(AffineMap((1.0 - eta) * eye, q))
    return IfsSystem(tuple(maps), scheme.probs)


# --------------------------------------------------------------------------
# subset-mode (lazy) iteration


def _subset_chain(
    problem: pr.Problem,
    dataset: pr.Dataset,
    b: int,
    eta: float,
    w0: np.ndarray,
    total: int,
    seed: int,
    record_from: int,
    thin: int,
    n_record: int,
) -> np.ndarray:
    gen = Xoshiro256PP(seed)
    w = np.atleast_1d(np.asarray(w0, dtype=float)).copy()
    out = np.empty((n_record, w.shape[0]))
    r = 0
    for t in range(1, total + 1):
        batch = gen.subset_without_replacement(dataset.n, b)
        w = w - eta * pr.grad(problem, w, dataset, batch)
        if t > record_from and (t - record_from) % thin == 0 and r < n_record:
            out[r] = w
            r += 1
    if not (np.isfinite(out[:r]).all() and np.isfinite(w).all()):
        raise NonFiniteState("iterate overflowed (system appears to diverge)")
    return out


def iterate_subset_sgd(
    problem: pr.Problem, dataset: pr.Dataset, b: int, eta: float, w0: np.ndarray, k: int, seed: int
) -> Trajectory:
    """SGD with a fresh without-replacement b-subset each step (lazy maps).

    Stream order: one b-subset draw per step.  Map indices are not recorded
    (the family is combinatorially large); Trajectory.indices stays empty.
    """
    _validate_labels(problem, dataset)
    w0 = np.atleast_1d(np.asarray(w0, dtype=float))
    states = np.empty((k + 1, pr.param_dim(problem, dataset)))
    states[0] = w0
    if k:
        states[1:] = _subset_chain(problem, dataset, b, eta, w0, k, seed, 0, 1, k)
    return Trajectory(states=states, indices=np.empty(0, dtype=np.int64), seed=seed)


def sample_invariant_subset(
    problem: pr.Problem,
    dataset: pr.Dataset,
    b: int,
    eta: float,
    w0: np.ndarray,
    burn_in: int,
    n_samples: int,
    thin: int = 1,
    seed: int = 0,
) -> SampleCloud:
    """Subset-mode analogue of ifs.sample_invariant."""
    _validate_labels(problem, dataset)
    if burn_in < 0 or n_samples <= 0 or thin <= 0:
        raise ConfigError("need burn_in >= 0, n_samples > 0, thin > 0")
    total = burn_in + n_samples * thin
    pts = _subset_chain(problem, dataset, b, eta, w0, total, seed, burn_in, thin, n_samples)
    return SampleCloud(points=pts, burn_in=burn_in, thin=thin, seed=seed)
