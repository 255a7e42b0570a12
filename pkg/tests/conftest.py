"""Shared helpers: random problem configs and finite-difference oracles."""

from __future__ import annotations

import numpy as np

from ifslab.problems import (
    Dataset,
    LeastSquares,
    Logistic,
    OneHiddenLayer,
    RobustRegression,
    SmoothHingeSVM,
    grad,
    loss,
    param_dim,
)

PROBLEM_KINDS = ("least_squares", "logistic", "robust", "svm", "one_hidden")


def make_problem_config(kind: str, seed: int):
    """One seeded random (problem, dataset, w, batch) tuple for oracle tests."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    d = int(rng.integers(2, 6))
    features = rng.uniform(-1.0, 1.0, size=(n, d))
    if kind in ("logistic", "svm"):
        targets = rng.choice([-1.0, 1.0], size=n)
    else:
        targets = rng.uniform(-1.0, 1.0, size=n)
    dataset = Dataset(features, targets)

    if kind == "least_squares":
        problem = LeastSquares(lam=float(rng.uniform(0.0, 1.0)))
    elif kind == "logistic":
        problem = Logistic(lam=float(rng.uniform(0.1, 1.0)))
    elif kind == "robust":
        problem = RobustRegression(
            lam_r=float(rng.uniform(0.1, 1.0)),
            t0=float(rng.uniform(0.5, 2.0)),
            rho="exp_squared" if seed % 2 == 0 else "tukey",
        )
    elif kind == "svm":
        problem = SmoothHingeSVM(
            lam=float(rng.uniform(0.1, 1.0)),
            sigma_smooth=float(rng.uniform(0.5, 2.0)),
        )
    elif kind == "one_hidden":
        m = int(rng.integers(1, 5))
        problem = OneHiddenLayer(
            lam=float(rng.uniform(0.0, 1.0)),
            out_weights=tuple(rng.uniform(-2.0, 2.0, size=m)),
            activation="sigmoid" if seed % 2 == 0 else "tanh",
        )
    else:
        raise ValueError(kind)

    w = rng.normal(0.0, 1.0, size=param_dim(problem, dataset))
    b = int(rng.integers(1, n + 1))
    batch = rng.choice(n, size=b, replace=False).astype(np.int64)
    return problem, dataset, w, batch


def batch_mean_loss(problem, w, dataset, batch) -> float:
    return float(np.mean([loss(problem, w, dataset, int(j)) for j in batch]))


def fd_grad(problem, w, dataset, batch) -> np.ndarray:
    """Central finite differences of the batch-mean loss, step 1e-6*(1+||w||)."""
    eps = 1e-6 * (1.0 + np.linalg.norm(w))
    out = np.empty_like(w)
    for i in range(w.size):
        wp, wm = w.copy(), w.copy()
        wp[i] += eps
        wm[i] -= eps
        out[i] = (
            batch_mean_loss(problem, wp, dataset, batch)
            - batch_mean_loss(problem, wm, dataset, batch)
        ) / (2.0 * eps)
    return out


def fd_hvp(problem, w, dataset, batch, v) -> np.ndarray:
    """Central differences of grad along v, step 1e-5*(1+||w||)/||v||."""
    eps = 1e-5 * (1.0 + np.linalg.norm(w)) / np.linalg.norm(v)
    return (
        grad(problem, w + eps * v, dataset, batch) - grad(problem, w - eps * v, dataset, batch)
    ) / (2.0 * eps)
