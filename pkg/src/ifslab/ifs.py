"""Iterated-function systems: iteration, invariant-measure sampling, probes.

A system is a finite family of maps h_i with selection probabilities p_i;
iterating w_k = h_{U_k}(w_{k-1}) with U_k ~ p approximates the stationary
(invariant) measure after burn-in.  Maps are either explicit affine maps
M w + q or SGD steps backed by a problem/dataset/batch triple.

Geometric ergodicity of problem-backed systems is *not* certified here;
stationarity is only spot-checked empirically (see the KS-distance test).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import complexity as cx
from . import problems as pr
from .errors import ConfigError, DegenerateProbe, NonFiniteState
from .fileio import atomic_write_text, fmt_float
from .rng import Xoshiro256PP, draw_indices

# --------------------------------------------------------------------------
# map descriptors


@dataclass(frozen=True)
class AffineMap:
    """h(w) = matrix @ w + offset; its Jacobian is the constant matrix."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float))
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ConfigError("AffineMap matrix must be square")
        if self.offset.shape != (self.matrix.shape[0],):
            raise ConfigError("AffineMap offset shape mismatch")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, w: np.ndarray) -> np.ndarray:
        return self.matrix @ w + self.offset

    def jacobian_matvec(self, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def jacobian_rmatvec(self, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.matrix.T @ v

    jacobian_symmetric = False  # not assumed; norms go through M^T M

    def jacobian_norm(self, w: Optional[np.ndarray] = None, config: cx.PowerIterConfig = cx.PowerIterConfig()) -> float:
        return cx.matrix_operator_norm(self.matrix, config)


@dataclass(frozen=True)
class ProblemMap:
    """One SGD step h(w) = w - eta * P(grad of the batch risk at w).

    ``solve`` is the preconditioner application P (identity when None), in
    which case the Jacobian I - eta * P H(w) is generally nonsymmetric and
    norms are computed through J^T J.
    """

    problem: pr.Problem
    dataset: pr.Dataset
    batch: np.ndarray
    eta: float
    solve: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def dim(self) -> int:
        return pr.param_dim(self.problem, self.dataset)

    def apply(self, w: np.ndarray) -> np.ndarray:
        g = pr.grad(self.problem, w, self.dataset, self.batch)
        if self.solve is not None:
            g = self.solve(g)
        return w - self.eta * g

    def jacobian_matvec(self, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        h = pr.hvp(self.problem, w, self.dataset, self.batch, v)
        if self.solve is not None:
            h = self.solve(h)
        return v - self.eta * h

    def jacobian_rmatvec(self, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.solve is None:
            return self.jacobian_matvec(w, v)
        return v - self.eta * pr.hvp(self.problem, w, self.dataset, self.batch, self.solve(v))

    @property
    def jacobian_symmetric(self) -> bool:
        return self.solve is None

    def jacobian_norm(self, w: np.ndarray, config: cx.PowerIterConfig = cx.PowerIterConfig()) -> float:
        if self.jacobian_symmetric:
            return cx.spectral_norm_power_iter(
                lambda v: self.jacobian_matvec(w, v), self.dim, config
            ).value
        res = cx.spectral_norm_power_iter(
            lambda v: self.jacobian_rmatvec(w, self.jacobian_matvec(w, v)), self.dim, config
        )
        return math.sqrt(res.value)


MapDescriptor = Union[AffineMap, ProblemMap]


@dataclass(frozen=True)
class IfsSystem:
    """Finite map family with selection probabilities summing to one."""

    maps: tuple[MapDescriptor, ...]
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float))
        if len(self.maps) == 0:
            raise ConfigError("IfsSystem needs at least one map")
        if self.probs.shape != (len(self.maps),):
            raise ConfigError("probs length must match maps")
        if np.any(self.probs <= 0.0) or abs(float(self.probs.sum()) - 1.0) > 1e-12:
            raise ConfigError("probs must be positive and sum to 1 within 1e-12")
        dims = {m.dim for m in self.maps}
        if len(dims) != 1:
            raise ConfigError("all maps must share one ambient dimension")

    @property
    def dim(self) -> int:
        return self.maps[0].dim

    @property
    def is_affine(self) -> bool:
        return all(isinstance(m, AffineMap) for m in self.maps)


# --------------------------------------------------------------------------
# results


@dataclass
class Trajectory:
    states: np.ndarray  # (k+1, d), w0 first
    indices: np.ndarray  # (k,) chosen map per step
    seed: int


@dataclass
class SampleCloud:
    """Post-burn-in iterates: row j is iterate burn_in + (j+1)*thin."""

    points: np.ndarray  # (n_samples, d)
    burn_in: int
    thin: int
    seed: int

    @property
    def iterations(self) -> np.ndarray:
        n = self.points.shape[0]
        return self.burn_in + self.thin * np.arange(1, n + 1, dtype=np.int64)

    def write_csv(self, path: str) -> None:
        d = self.points.shape[1]
        header = "iter," + ",".join(f"w{i}" for i in range(d))
        lines = [header]
        iters = self.iterations
        for k in range(self.points.shape[0]):
            lines.append(str(int(iters[k])) + "," + ",".join(fmt_float(x) for x in self.points[k]))
        atomic_write_text(path, "\n".join(lines) + "\n")


def read_cloud_csv(path: str) -> SampleCloud:
    """Inverse of SampleCloud.write_csv (burn_in/thin recovered from iters)."""
    with open(path, newline="") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if not header or header[0] != "iter" or header[1:] != [f"w{i}" for i in range(len(header) - 1)]:
            raise ConfigError(f"{path}: bad sample-cloud header {header!r}")
        rows = []
        iters = []
        for rownum, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(header):
                raise ConfigError(f"{path}: row {rownum}: wrong field count")
            try:
                iters.append(int(parts[0]))
                rows.append([float(x) for x in parts[1:]])
            except ValueError:
                raise ConfigError(f"{path}: row {rownum}: non-numeric field") from None
    if not rows:
        raise ConfigError(f"{path}: no samples")
    points = np.array(rows)
    thin = iters[1] - iters[0] if len(iters) > 1 else 1
    burn_in = iters[0] - thin
    return SampleCloud(points=points, burn_in=burn_in, thin=thin, seed=0)


@dataclass(frozen=True)
class SampledPairsProbe:
    """Lipschitz probing by pair sampling from a ball (center defaults to 0)."""

    n_pairs: int
    radius: float
    seed: int
    center: Optional[np.ndarray] = None


@dataclass
class ContractivityReport:
    lipschitz: tuple[float, ...]
    mean_log: float
    contractive: bool  # sum_i p_i log L_i < 0
    mode: str  # "analytic" | "sampled_pairs"


@dataclass
class LyapunovEstimate:
    rho: float
    chain_length: int
    renorm_interval: int
    seed: int


# --------------------------------------------------------------------------
# iteration cores


def _check_recorded_finite(arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteState("iterate overflowed (system appears to diverge)")


def _run_chain(
    system: IfsSystem,
    w0: np.ndarray,
    idx: np.ndarray,
    record_from: int,
    thin: int,
    n_record: int,
) -> np.ndarray:
    """Shared driver: apply maps along ``idx``; record ``n_record`` thinned
    states after step ``record_from``.  Scalar affine systems take a
    float-arithmetic fast path (the long-chain Cantor runs live there)."""
    d = system.dim
    out = np.empty((n_record, d))
    if system.is_affine and d == 1:
        ms = [float(m.matrix[0, 0]) for m in system.maps]
        qs = [float(m.offset[0]) for m in system.maps]
        w = float(w0[0])
        r = 0
        steps = idx.tolist()
        for t, i in enumerate(steps, start=1):
            w = ms[i] * w + qs[i]
            if t > record_from and (t - record_from) % thin == 0 and r < n_record:
                out[r, 0] = w
                r += 1
        _check_recorded_finite(out[:r])
        if not math.isfinite(w):
            raise NonFiniteState("iterate overflowed (system appears to diverge)")
        return out
    w = np.asarray(w0, dtype=float).copy()
    r = 0
    steps = idx.tolist()
    # overflow to inf/nan is an anticipated outcome here, reported as
    # NonFiniteState below rather than as a numpy warning mid-loop
    if system.is_affine:
        ms = [m.matrix for m in system.maps]
        qs = [m.offset for m in system.maps]
        with np.errstate(over="ignore", invalid="ignore"):
            for t, i in enumerate(steps, start=1):
                w = ms[i] @ w + qs[i]
                if t > record_from and (t - record_from) % thin == 0 and r < n_record:
                    out[r] = w
                    r += 1
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            for t, i in enumerate(steps, start=1):
                w = system.maps[i].apply(w)
                if t > record_from and (t - record_from) % thin == 0 and r < n_record:
                    out[r] = w
                    r += 1
    _check_recorded_finite(out[:r])
    if not np.isfinite(w).all():
        raise NonFiniteState("iterate overflowed (system appears to diverge)")
    return out


def iterate(system: IfsSystem, w0: np.ndarray, k: int, seed: int) -> Trajectory:
    """Run w_t = h_{U_t}(w_{t-1}) for k steps; returns all k+1 states.

    The seed's uniform stream is consumed only by the index draws, one per
    step in step order.
    """
    if k < 0:
        raise ConfigError("k must be nonnegative")
    w0 = np.atleast_1d(np.asarray(w0, dtype=float))
    gen = Xoshiro256PP(seed)
    idx = draw_indices(gen, system.probs, k)
    states = np.empty((k + 1, system.dim))
    states[0] = w0
    if k:
        states[1:] = _run_chain(system, w0, idx, record_from=0, thin=1, n_record=k)
    _check_recorded_finite(states)
    return Trajectory(states=states, indices=idx, seed=seed)


def sample_invariant(
    system: IfsSystem,
    w0: np.ndarray,
    burn_in: int,
    n_samples: int,
    thin: int = 1,
    seed: int = 0,
) -> SampleCloud:
    """Approximate the invariant measure: record iterates burn_in + j*thin,
    j = 1..n_samples, streaming (burn-in states are never materialized)."""
    if burn_in < 0 or n_samples <= 0 or thin <= 0:
        raise ConfigError("need burn_in >= 0, n_samples > 0, thin > 0")
    w0 = np.atleast_1d(np.asarray(w0, dtype=float))
    total = burn_in + n_samples * thin
    gen = Xoshiro256PP(seed)
    idx = draw_indices(gen, system.probs, total)
    pts = _run_chain(system, w0, idx, record_from=burn_in, thin=thin, n_record=n_samples)
    return SampleCloud(points=pts, burn_in=burn_in, thin=thin, seed=seed)


# --------------------------------------------------------------------------
# probes


def contractivity_report(
    system: IfsSystem, probe: Union[str, SampledPairsProbe] = "analytic"
) -> ContractivityReport:
    """Per-map Lipschitz constants and the average-contractivity criterion
    sum_i p_i log L_i < 0.

    Analytic mode (affine systems only) computes L_i = ||M_i|| by power
    iteration on M_i^T M_i.  Sampled-pairs mode lower-bounds L_i by
    max ||h(x)-h(y)||/||x-y|| over pairs drawn uniformly from a ball.
    Probe stream order: per map in system order, per pair: point x
    (dim gaussians + 1 radius uniform), then point y.
    """
    if isinstance(probe, str):
        if probe != "analytic":
            raise ConfigError(f"unknown probe mode {probe!r}")
        if not system.is_affine:
            raise ConfigError("analytic contractivity needs affine maps; use SampledPairsProbe")
        lip = [m.jacobian_norm() for m in system.maps]
        mode = "analytic"
    else:
        if probe.n_pairs <= 0 or probe.radius <= 0.0:
            raise ConfigError("probe needs n_pairs > 0 and radius > 0")
        gen = Xoshiro256PP(probe.seed)
        d = system.dim
        center = (
            np.zeros(d) if probe.center is None else np.asarray(probe.center, dtype=float)
        )

        def ball_point() -> np.ndarray:
            g = gen.normals(d)
            ng = float(np.linalg.norm(g))
            while ng == 0.0:  # pragma: no cover - probability ~0
                g = gen.normals(d)
                ng = float(np.linalg.norm(g))
            r = probe.radius * gen.uniform() ** (1.0 / d)
            return center + r * g / ng

        lip = []
        for m in system.maps:
            worst = 0.0
            for _ in range(probe.n_pairs):
                x = ball_point()
                y = ball_point()
                dxy = float(np.linalg.norm(x - y))
                if dxy < 1e-12:
                    raise DegenerateProbe("sampled pair collapsed (distance < 1e-12)")
                worst = max(worst, float(np.linalg.norm(m.apply(x) - m.apply(y))) / dxy)
            lip.append(worst)
        mode = "sampled_pairs"
    logs = np.array([math.log(L) if L > 0.0 else -math.inf for L in lip])
    mean_log = float(np.dot(system.probs, logs))
    return ContractivityReport(
        lipschitz=tuple(lip), mean_log=mean_log, contractive=mean_log < 0.0, mode=mode
    )


def lyapunov_exponent(
    system: IfsSystem,
    w0: np.ndarray,
    k: int,
    renorm_interval: int = 16,
    seed: int = 0,
) -> LyapunovEstimate:
    """Top Lyapunov exponent: average log growth of a random unit vector
    pushed through J_{h_{U_k}}(w_{k-1}) ... J_{h_{U_1}}(w_0), renormalized
    every ``renorm_interval`` steps.

    Stream order: the direction's gaussians first, then the index draws.
    """
    if k < 1000:
        raise ConfigError("lyapunov_exponent needs k >= 1000")
    if renorm_interval <= 0:
        raise ConfigError("renorm_interval must be positive")
    w = np.atleast_1d(np.asarray(w0, dtype=float)).copy()
    gen = Xoshiro256PP(seed)
    v = gen.normals(system.dim)
    v /= np.linalg.norm(v)
    idx = draw_indices(gen, system.probs, k)
    total = 0.0
    for t in range(k):
        m = system.maps[idx[t]]
        v = m.jacobian_matvec(w, v)
        w = m.apply(w)
        if (t + 1) % renorm_interval == 0:
            nv = float(np.linalg.norm(v))
            if nv == 0.0:
                return LyapunovEstimate(-math.inf, k, renorm_interval, seed)
            total += math.log(nv)
            v /= nv
    if k % renorm_interval:
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            return LyapunovEstimate(-math.inf, k, renorm_interval, seed)
        total += math.log(nv)
    if not (np.isfinite(w).all() and math.isfinite(total)):
        raise NonFiniteState("state or tangent overflowed during Lyapunov accumulation")
    return LyapunovEstimate(rho=total / k, chain_length=k, renorm_interval=renorm_interval, seed=seed)
