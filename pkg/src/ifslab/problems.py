"""Loss families whose SGD steps generate the iterated-function systems.

Each problem kind provides per-sample losses, mini-batch gradients,
Hessian-vector products, the step Jacobian J = I - eta*H applied to a vector,
and per-batch norm envelopes (gamma_i, Gamma_i) bounding ||J|| under the
step-size hypotheses of the corresponding contraction propositions.

Conventions: parameters ``w`` are flat float64 vectors; a mini-batch is an
integer index array into the dataset; batch quantities are averages
(1/b)*sum over the batch; the regularizer is lam/2*||w||^2 throughout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np

from .errors import ConfigError, PreconditionViolation

if TYPE_CHECKING:  # pragma: no cover - typing only, avoids an import cycle
    from .optimizers import BatchScheme

# --------------------------------------------------------------------------
# datasets


@dataclass
class Dataset:
    """Supervised data: ``features`` (n, d) and ``targets`` (n,)."""

    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.features.ndim != 2:
            raise ConfigError("features must be a 2-D array")
        if self.targets.shape != (self.features.shape[0],):
            raise ConfigError("targets must be 1-D with one entry per row")
        if not (np.isfinite(self.features).all() and np.isfinite(self.targets).all()):
            raise ConfigError("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def radius(self) -> float:
        """R = max_i ||a_i||."""
        return float(np.sqrt((self.features**2).sum(axis=1).max()))

    def batch_radius(self, batch: np.ndarray) -> float:
        """R_i = max over the batch of ||a_j||."""
        rows = self.features[np.asarray(batch, dtype=np.int64)]
        return float(np.sqrt((rows**2).sum(axis=1).max()))


def load_dataset_csv(path: str) -> Dataset:
    """Read a dataset CSV with header ``x0,...,x{d-1},y``.

    Malformed rows abort with their 1-based row number in the message.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        expected = [f"x{i}" for i in range(len(header) - 1)] + ["y"]
        if header != expected:
            raise ConfigError(f"{path}: bad header {header!r}, expected {expected!r}")
        d = len(header) - 1
        feats, ys = [], []
        for rownum, row in enumerate(reader, start=2):
            if len(row) != d + 1:
                raise ConfigError(f"{path}: row {rownum}: expected {d + 1} fields")
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise ConfigError(f"{path}: row {rownum}: non-numeric field") from None
            feats.append(vals[:d])
            ys.append(vals[d])
    if not feats:
        raise ConfigError(f"{path}: no data rows")
    return Dataset(np.array(feats), np.array(ys))


def require_pm1_labels(dataset: Dataset, context: str) -> None:
    """Classification kinds demand targets in {-1, +1}."""
    if not np.all(np.isin(dataset.targets, (-1.0, 1.0))):
        raise ConfigError(f"{context}: targets must be +/-1")


# --------------------------------------------------------------------------
# problem kinds


@dataclass(frozen=True)
class LeastSquares:
    """l(w; a, y) = (a.w - y)^2 / 2 + lam/2 ||w||^2."""

    lam: float = 0.0


@dataclass(frozen=True)
class Logistic:
    """l(w; a, y) = log(1 + exp(-y a.w)) + lam/2 ||w||^2, labels +/-1."""

    lam: float = 0.0


@dataclass(frozen=True)
class RobustRegression:
    """l(w; a, y) = rho(y - a.w) + lam_r/2 ||w||^2.

    rho is the exponential-squared loss 1 - exp(-t^2/t0) by default
    (||rho''||_inf = 2/t0) or Tukey's biweight (exact sup 6/t0^2).
    """

    lam_r: float
    t0: float
    rho: str = "exp_squared"  # or "tukey"

    def rho_double_sup(self) -> float:
        if self.rho == "exp_squared":
            return 2.0 / self.t0
        if self.rho == "tukey":
            return 6.0 / self.t0**2
        raise ConfigError(f"unknown robust rho kind {self.rho!r}")


@dataclass(frozen=True)
class SmoothHingeSVM:
    """l(w; a, y) = l_sig(y a.w) + lam/2 ||w||^2 with the smoothed hinge

    l_sig(z) = 1 - z + sig*log(1 + exp(-(1-z)/sig)),  ||l_sig''||_inf = 1/(4 sig).
    """

    lam: float
    sigma_smooth: float


@dataclass(frozen=True)
class OneHiddenLayer:
    """Scalar-output one-hidden-layer net with frozen output weights.

    yhat = sum_r b_r * act(w_r . a);  l = (y - yhat)^2 / 2 + lam/2 ||w||^2.
    The trainable parameter is the flattened (m, d) first layer.
    """

    lam: float
    out_weights: tuple[float, ...]
    activation: str = "sigmoid"  # or "tanh"

    @property
    def hidden(self) -> int:
        return len(self.out_weights)


Problem = Union[LeastSquares, Logistic, RobustRegression, SmoothHingeSVM, OneHiddenLayer]


def param_dim(problem: Problem, dataset: Dataset) -> int:
    if isinstance(problem, OneHiddenLayer):
        return problem.hidden * dataset.d
    return dataset.d


def regularizer_weight(problem: Problem) -> float:
    return problem.lam_r if isinstance(problem, RobustRegression) else problem.lam


# --------------------------------------------------------------------------
# scalar helpers

SIGMOID_SECOND_SUP = 1.0 / (6.0 * math.sqrt(3.0))
TANH_SECOND_SUP = 4.0 / (3.0 * math.sqrt(3.0))


def _sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _act_table(name: str):
    """(act, act', act'', sup|act''|) for the supported activations."""
    if name == "sigmoid":

        def f(x):
            return _sigmoid(x)

        def f1(x):
            s = _sigmoid(x)
            return s * (1.0 - s)

        def f2(x):
            s = _sigmoid(x)
            return s * (1.0 - s) * (1.0 - 2.0 * s)

        return f, f1, f2, SIGMOID_SECOND_SUP
    if name == "tanh":

        def f(x):
            return np.tanh(x)

        def f1(x):
            return 1.0 - np.tanh(x) ** 2

        def f2(x):
            t = np.tanh(x)
            return -2.0 * t * (1.0 - t**2)

        return f, f1, f2, TANH_SECOND_SUP
    raise ConfigError(f"unknown activation {name!r}")


def _rho_funcs(problem: RobustRegression):
    t0 = problem.t0
    if problem.rho == "exp_squared":

        def rho(t):
            return 1.0 - np.exp(-(t**2) / t0)

        def rho1(t):
            return (2.0 * t / t0) * np.exp(-(t**2) / t0)

        def rho2(t):
            return (2.0 / t0) * (1.0 - 2.0 * t**2 / t0) * np.exp(-(t**2) / t0)

        return rho, rho1, rho2
    if problem.rho == "tukey":

        def rho(t):
            u = 1.0 - (t / t0) ** 2
            return np.where(np.abs(t) <= t0, 1.0 - u**3, 1.0)

        def rho1(t):
            u = 1.0 - (t / t0) ** 2
            return np.where(np.abs(t) <= t0, 6.0 * t / t0**2 * u**2, 0.0)

        def rho2(t):
            s = (t / t0) ** 2
            return np.where(np.abs(t) <= t0, 6.0 / t0**2 * (1.0 - s) * (1.0 - 5.0 * s), 0.0)

        return rho, rho1, rho2
    raise ConfigError(f"unknown robust rho kind {problem.rho!r}")


def _svm_funcs(problem: SmoothHingeSVM):
    sig = problem.sigma_smooth

    def ell(z):
        return 1.0 - z + sig * np.logaddexp(0.0, -(1.0 - z) / sig)

    def ell1(z):
        return -_sigmoid((1.0 - z) / sig)

    def ell2(z):
        s = _sigmoid((1.0 - z) / sig)
        return s * (1.0 - s) / sig

    return ell, ell1, ell2


def _mlp_parts(problem: OneHiddenLayer, w: np.ndarray, A: np.ndarray):
    """Per-sample predictions and first-layer geometry for feature rows A."""
    b = np.asarray(problem.out_weights, dtype=float)
    m = problem.hidden
    d = A.shape[1]
    W = w.reshape(m, d)
    f, f1, f2, _ = _act_table(problem.activation)
    Z = A @ W.T  # (nb, m) pre-activations
    yhat = f(Z) @ b
    return b, W, Z, yhat, f1, f2


# --------------------------------------------------------------------------
# core evaluations


def batch_losses(problem: Problem, w: np.ndarray, dataset: Dataset, batch: np.ndarray) -> np.ndarray:
    """Per-sample losses (regularizer included) at the given batch indices."""
    w = np.asarray(w, dtype=float)
    idx = np.asarray(batch, dtype=np.int64)
    A = dataset.features[idx]
    y = dataset.targets[idx]
    reg = 0.5 * regularizer_weight(problem) * float(w @ w)
    if isinstance(problem, LeastSquares):
        return 0.5 * (A @ w - y) ** 2 + reg
    if isinstance(problem, Logistic):
        return np.logaddexp(0.0, -y * (A @ w)) + reg
    if isinstance(problem, RobustRegression):
        rho, _, _ = _rho_funcs(problem)
        return rho(y - A @ w) + reg
    if isinstance(problem, SmoothHingeSVM):
        ell, _, _ = _svm_funcs(problem)
        return ell(y * (A @ w)) + reg
    if isinstance(problem, OneHiddenLayer):
        _, _, _, yhat, _, _ = _mlp_parts(problem, w, A)
        return 0.5 * (y - yhat) ** 2 + reg
    raise ConfigError(f"unknown problem kind {type(problem).__name__}")


def loss(problem: Problem, w: np.ndarray, dataset: Dataset, i: int) -> float:
    """Loss of sample ``i``: data term plus lam/2 ||w||^2."""
    return float(batch_losses(problem, w, dataset, np.array([i]))[0])


def mean_loss(problem: Problem, w: np.ndarray, dataset: Dataset) -> float:
    """Average loss over the whole dataset."""
    return float(batch_losses(problem, w, dataset, np.arange(dataset.n)).mean())


def grad(problem: Problem, w: np.ndarray, dataset: Dataset, batch: np.ndarray) -> np.ndarray:
    """Mini-batch gradient (1/b) sum_j grad l(w, z_j)."""
    w = np.asarray(w, dtype=float)
    idx = np.asarray(batch, dtype=np.int64)
    A = dataset.features[idx]
    y = dataset.targets[idx]
    nb = len(idx)
    if isinstance(problem, LeastSquares):
        return A.T @ (A @ w - y) / nb + problem.lam * w
    if isinstance(problem, Logistic):
        t = y * (A @ w)
        return A.T @ (-y * _sigmoid(-t)) / nb + problem.lam * w
    if isinstance(problem, RobustRegression):
        _, rho1, _ = _rho_funcs(problem)
        return A.T @ (-rho1(y - A @ w)) / nb + problem.lam_r * w
    if isinstance(problem, SmoothHingeSVM):
        _, ell1, _ = _svm_funcs(problem)
        return A.T @ (y * ell1(y * (A @ w))) / nb + problem.lam * w
    if isinstance(problem, OneHiddenLayer):
        b, _, Z, yhat, f1, _ = _mlp_parts(problem, w, A)
        # V[j] = flatten_r(b_r f'(z_jr) a_j); grad = -(1/b) sum resid_j V_j + lam w
        coef = (yhat - y)[:, None] * (b[None, :] * f1(Z))  # (nb, m)
        return (coef.T @ A).ravel() / nb + problem.lam * w
    raise ConfigError(f"unknown problem kind {type(problem).__name__}")


def hvp(problem: Problem, w: np.ndarray, dataset: Dataset, batch: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Mini-batch Hessian-vector product (1/b) sum_j H_j(w) v."""
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    idx = np.asarray(batch, dtype=np.int64)
    A = dataset.features[idx]
    y = dataset.targets[idx]
    nb = len(idx)
    if isinstance(problem, LeastSquares):
        return A.T @ (A @ v) / nb + problem.lam * v
    if isinstance(problem, Logistic):
        s = _sigmoid(y * (A @ w))
        coef = s * (1.0 - s) * y**2
        return A.T @ (coef * (A @ v)) / nb + problem.lam * v
    if isinstance(problem, RobustRegression):
        _, _, rho2 = _rho_funcs(problem)
        coef = rho2(y - A @ w)
        return A.T @ (coef * (A @ v)) / nb + problem.lam_r * v
    if isinstance(problem, SmoothHingeSVM):
        _, _, ell2 = _svm_funcs(problem)
        coef = ell2(y * (A @ w)) * y**2
        return A.T @ (coef * (A @ v)) / nb + problem.lam * v
    if isinstance(problem, OneHiddenLayer):
        b, _, Z, yhat, f1, f2 = _mlp_parts(problem, w, A)
        m = problem.hidden
        V = (b[None, :] * f1(Z))[:, :, None] * A[:, None, :]  # (nb, m, d)
        V = V.reshape(nb, -1)
        gauss = V.T @ (V @ v) / nb  # Gauss-Newton part (V V^T) v
        U = v.reshape(m, A.shape[1])
        T = A @ U.T  # (nb, m): a_j . u_r
        c = (y - yhat)[:, None] * b[None, :] * f2(Z)  # resid * b_r * f''(z_jr)
        block = (c * T).T @ A / nb  # (m, d): resid-weighted curvature blocks
        return gauss - block.ravel() + problem.lam * v
    raise ConfigError(f"unknown problem kind {type(problem).__name__}")


def jacobian_apply(
    problem: Problem, w: np.ndarray, dataset: Dataset, batch: np.ndarray, eta: float, v: np.ndarray
) -> np.ndarray:
    """Apply the SGD-step Jacobian (I - eta * batch Hessian) to ``v``."""
    v = np.asarray(v, dtype=float)
    if eta == 0.0:
        return v.copy()
    return v - eta * hvp(problem, w, dataset, batch, v)


# --------------------------------------------------------------------------
# contraction envelopes


def _violation(name: str, value: float, bound: float, relation: str) -> PreconditionViolation:
    return PreconditionViolation(
        f"{name}: requires {relation}, got value={value:.6g} vs bound={bound:.6g} "
        f"(margin {bound - value:.6g})"
    )


def check_step_size(problem: Problem, radius: float, eta: float, c_const: float | None = None) -> None:
    """Raise PreconditionViolation unless the proposition's hypotheses hold."""
    R = radius
    if isinstance(problem, LeastSquares):
        bound = 1.0 / (R**2 + problem.lam)
        if not eta < bound:
            raise _violation("least squares", eta, bound, "eta < 1/(R^2 + lambda)")
    elif isinstance(problem, Logistic):
        if not eta < 1.0 / problem.lam:
            raise _violation("logistic", eta, 1.0 / problem.lam, "eta < 1/lambda")
        rb = 2.0 * math.sqrt(problem.lam)
        if not R < rb:
            raise _violation("logistic", R, rb, "R < 2 sqrt(lambda)")
    elif isinstance(problem, RobustRegression):
        s = problem.rho_double_sup()
        bound = 1.0 / (problem.lam_r + s * R**2)
        if not eta < bound:
            raise _violation("robust", eta, bound, "eta < 1/(lambda_r + ||rho''|| R^2)")
        rb = math.sqrt(problem.lam_r / s)
        if not R < rb:
            raise _violation("robust", R, rb, "R < sqrt(lambda_r / ||rho''||)")
    elif isinstance(problem, SmoothHingeSVM):
        bound = 1.0 / (problem.lam + R**2 / (4.0 * problem.sigma_smooth))
        if not eta < bound:
            raise _violation("svm", eta, bound, "eta < 1/(lambda + R^2/(4 sigma))")
    elif isinstance(problem, OneHiddenLayer):
        if c_const is None:
            raise ConfigError("one-hidden-layer envelopes need c_const (see compute_one_layer_C)")
        bound = 1.0 / (2.0 * problem.lam)
        if not eta < bound:
            raise _violation("one-hidden-layer", eta, bound, "eta < 1/(2 lambda)")
        if not c_const < problem.lam:
            raise _violation("one-hidden-layer", c_const, problem.lam, "C < lambda")
    else:
        raise ConfigError(f"unknown problem kind {type(problem).__name__}")


def norm_envelopes(
    problem: Problem,
    dataset: Dataset,
    scheme: "BatchScheme",
    eta: float,
    *,
    c_const: float | None = None,
) -> list[tuple[float, float]]:
    """Per-batch (gamma_i, Gamma_i) with gamma_i <= ||J_{h_i}(w)|| <= Gamma_i.

    Validity requires the proposition's step-size hypotheses, which are
    checked first (PreconditionViolation otherwise).  Least squares and
    logistic use per-batch radii R_i; robust and SVM use the global R,
    matching their proofs; the one-hidden-layer pair is batch-independent
    and needs the cloud constant ``c_const``.
    """
    if scheme.batches is None:
        raise ConfigError("norm_envelopes needs an enumerated (Partition) scheme")
    R = dataset.radius()
    check_step_size(problem, R, eta, c_const)
    out = []
    for batch in scheme.batches:
        if isinstance(problem, LeastSquares):
            ri2 = dataset.batch_radius(batch) ** 2
            pair = (1.0 - eta * problem.lam - eta * ri2, 1.0 - eta * problem.lam)
        elif isinstance(problem, Logistic):
            ri2 = dataset.batch_radius(batch) ** 2
            pair = (
                1.0 - eta * problem.lam - 0.25 * eta * ri2,
                1.0 - eta * problem.lam + 0.25 * eta * ri2,
            )
        elif isinstance(problem, RobustRegression):
            s = problem.rho_double_sup()
            base = 1.0 - eta * problem.lam_r
            pair = (base - eta * s * R**2, base + eta * s * R**2)
        elif isinstance(problem, SmoothHingeSVM):
            pair = (
                1.0 - eta * problem.lam - eta * R**2 / (4.0 * problem.sigma_smooth),
                1.0 - eta * problem.lam,
            )
        else:  # OneHiddenLayer; unknown kinds rejected by check_step_size
            pair = (1.0 - eta * (c_const + problem.lam), 1.0 - eta * (problem.lam - c_const))
        out.append(pair)
    return out


def compute_one_layer_C(problem: OneHiddenLayer, dataset: Dataset, cloud_points: np.ndarray) -> float:
    """Curvature-deviation constant C for the one-hidden-layer contraction.

    C = M_y * ||b||_inf * sup|act''| * R^2 + (max_j ||v_j||_inf)^2, with
    M_y and the v_j sup taken over all (cloud point, data row) pairs.
    Note the second term uses the entrywise max norm of v_j, following the
    source convention (exact only when v has a single entry; a loose
    surrogate for ||v||_2^2 otherwise).
    """
    pts = np.asarray(cloud_points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[0] == 0:
        raise ConfigError("compute_one_layer_C needs a nonempty cloud")
    b = np.asarray(problem.out_weights, dtype=float)
    sup2 = _act_table(problem.activation)[3]
    A = dataset.features
    m_y = 0.0
    v_sup = 0.0
    for w in pts:
        bvec, _, Z, yhat, f1_, _ = _mlp_parts(problem, w, A)
        m_y = max(m_y, float(np.abs(dataset.targets - yhat).max()))
        # ||v_j||_inf = max_r |b_r f'(z_jr)| * ||a_j||_inf
        per_row = np.abs(bvec[None, :] * f1_(Z)).max(axis=1) * np.abs(A).max(axis=1)
        v_sup = max(v_sup, float(per_row.max()))
    R = dataset.radius()
    binf = float(np.abs(b).max()) if b.size else 0.0
    return m_y * binf * sup2 * R**2 + v_sup**2
