"""Fractal-dimension estimates: box counting, closed-form bounds, Rams ratio.

The box counter snaps points to grids anchored at the cloud's coordinate-wise
minimum at geometrically shrinking scales and fits log counts against
log(1/delta).  The analytic bounds evaluate log(n/b)/log(1/Gamma) with each
proposition's contraction factor Gamma.  The Rams ratio divides selection
entropy by the mean log Jacobian norm under the sampled invariant measure.

All bounds are treated as upper bounds only; no tightness is claimed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .complexity import PowerIterConfig
from .errors import ConfigError, InsufficientScales, NonContractiveEstimate, PreconditionViolation
from .ifs import AffineMap, IfsSystem, SampleCloud
from .rng import child_seed

# --------------------------------------------------------------------------
# box counting


@dataclass(frozen=True)
class BoxCountConfig:
    num_scales: int = 12
    scale_ratio: float = 0.5
    coarsest_scale: Optional[float] = None  # delta_0; default diameter/4
    mass_truncation: float = 0.01  # drop lowest-count cells up to this point mass
    min_occupied: int = 10  # saturation guard: counts > sqrt(N)*min_occupied
    fit_range: Optional[tuple[int, int]] = None  # half-open scale-index window

    def __post_init__(self):
        if self.num_scales < 4:
            raise ConfigError("num_scales must be at least 4")
        if not 0.0 < self.scale_ratio < 1.0:
            raise ConfigError("scale_ratio must lie in (0, 1)")
        if not 0.0 <= self.mass_truncation < 1.0:
            raise ConfigError("mass_truncation must lie in [0, 1)")
        if self.min_occupied < 1:
            raise ConfigError("min_occupied must be a positive integer")
        if self.fit_range is not None:
            lo, hi = self.fit_range
            if not (0 <= lo < hi <= self.num_scales):
                raise ConfigError("fit_range must satisfy 0 <= lo < hi <= num_scales")


@dataclass
class DimensionEstimate:
    value: float  # slope clipped to [0, ambient]
    scales: tuple[float, ...]  # the deltas that survived saturation
    counts: tuple[int, ...]  # truncated occupied-cell counts at those deltas
    fit_r2: float
    raw_slope: float  # unclipped diagnostic
    ambient_dim: int

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "scales": list(self.scales),
            "counts": [int(c) for c in self.counts],
            "fit_r2": self.fit_r2,
        }


def _cloud_points(cloud: Union[SampleCloud, np.ndarray]) -> np.ndarray:
    pts = cloud.points if isinstance(cloud, SampleCloud) else np.asarray(cloud, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ConfigError("cloud must be a nonempty (N, d) array")
    return pts


def _occupied_count(pts: np.ndarray, mins: np.ndarray, delta: float, mass_truncation: float) -> int:
    idx = np.floor((pts - mins) / delta).astype(np.int64)
    if idx.shape[1] == 1:
        codes = idx[:, 0]
    else:
        dims = idx.max(axis=0) + 1
        if float(np.prod(dims.astype(float))) < 2**62:
            codes = np.ravel_multi_index(idx.T, dims)
        else:  # pragma: no cover - astronomically fine grids
            _, counts = np.unique(idx, axis=0, return_counts=True)
            return _truncate(counts, pts.shape[0], mass_truncation)
    _, counts = np.unique(codes, return_counts=True)
    return _truncate(counts, pts.shape[0], mass_truncation)


def _truncate(counts: np.ndarray, n_points: int, mass_truncation: float) -> int:
    """Drop lowest-count cells while the removed mass stays <= the budget."""
    if mass_truncation == 0.0:
        return int(len(counts))
    order = np.sort(counts)
    cum = np.cumsum(order)
    k_drop = int(np.searchsorted(cum, mass_truncation * n_points, side="right"))
    return int(len(counts) - min(k_drop, len(counts) - 1))


def box_counting_dimension(
    cloud: Union[SampleCloud, np.ndarray], config: BoxCountConfig = BoxCountConfig()
) -> DimensionEstimate:
    """Box-counting (Minkowski) dimension of a sample cloud.

    Grids are anchored at the coordinate-wise minimum; delta_j =
    delta_0 * ratio^j; the coarsest scale defaults to a quarter of the
    bounding-box diagonal.  Scales whose counts exceed sqrt(N)*min_occupied
    are discarded as saturated (too few points per box for a measure
    estimate); the slope is fitted over ``fit_range`` intersected with the
    survivors, defaulting to the middle six surviving scales.
    """
    pts = _cloud_points(cloud)
    n_points, ambient = pts.shape
    mins = pts.min(axis=0)
    diameter = float(np.linalg.norm(pts.max(axis=0) - mins))
    if diameter == 0.0:
        raise InsufficientScales("cloud is a single point; no scales to fit")
    delta0 = config.coarsest_scale if config.coarsest_scale is not None else diameter / 4.0
    if delta0 <= 0.0:
        raise ConfigError("coarsest_scale must be positive")

    deltas = [delta0 * config.scale_ratio**j for j in range(config.num_scales)]
    counts = [
        _occupied_count(pts, mins, d, config.mass_truncation) for d in deltas
    ]
    saturation = math.sqrt(n_points) * config.min_occupied
    surviving = [j for j in range(config.num_scales) if counts[j] <= saturation]
    if len(surviving) < 4:
        raise InsufficientScales(
            f"only {len(surviving)} scales survive the saturation filter (need 4)"
        )
    if config.fit_range is None:
        if len(surviving) > 6:
            start = (len(surviving) - 6) // 2
            window = surviving[start : start + 6]
        else:
            window = surviving
    else:
        lo, hi = config.fit_range
        window = [j for j in surviving if lo <= j < hi]
        if len(window) < 2:
            raise InsufficientScales("fit_range intersects fewer than 2 surviving scales")

    x = np.array([math.log(1.0 / deltas[j]) for j in window])
    y = np.array([math.log(counts[j]) for j in window])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    fit_r2 = 1.0 if ss_tot == 0.0 else 1.0 - float((resid**2).sum()) / ss_tot
    value = min(max(float(slope), 0.0), float(ambient))
    return DimensionEstimate(
        value=value,
        scales=tuple(deltas[j] for j in surviving),
        counts=tuple(counts[j] for j in surviving),
        fit_r2=fit_r2,
        raw_slope=float(slope),
        ambient_dim=ambient,
    )


# --------------------------------------------------------------------------
# closed-form dimension bounds


def _violation(kind: str, relation: str, value: float, bound: float) -> PreconditionViolation:
    return PreconditionViolation(
        f"{kind}: requires {relation}, got value={value:.6g} vs bound={bound:.6g} "
        f"(margin {bound - value:.6g})"
    )


def analytic_bound(
    kind: str,
    *,
    n: int,
    b: int,
    eta: float,
    lam: float = 0.0,
    radius: float = 0.0,
    t0: float = 0.0,
    sigma_smooth: float = 0.0,
    c_const: float = 0.0,
    m_low: float = 0.0,
    m_high: float = 0.0,
    m_b: Optional[int] = None,
) -> float:
    """Closed-form upper bound log(m_b)/log(1/Gamma) on the support dimension.

    ``kind`` selects the proposition: lsq, logistic, robust, svm, one_hidden,
    their precond_* variants, and newton.  m_b defaults to n/b (Partition);
    pass the subset count C(n, b) explicitly for Subset mode.  Violated
    step-size/radius hypotheses raise PreconditionViolation naming the
    inequality and its margin.
    """
    if n <= 0 or b <= 0 or b > n:
        raise ConfigError(f"need 0 < b <= n, got n={n}, b={b}")
    if eta <= 0.0:
        raise _violation(kind, "eta > 0", eta, 0.0)
    R = radius
    m, M = m_low, m_high
    if kind.startswith("precond_"):
        if not 0.0 < m <= M:
            raise ConfigError("preconditioned kinds need 0 < m_low <= m_high")

    if kind == "lsq":
        if lam <= 0.0:
            raise _violation(kind, "lambda > 0", lam, 0.0)
        if not eta < 1.0 / (R**2 + lam):
            raise _violation(kind, "eta < 1/(R^2 + lambda)", eta, 1.0 / (R**2 + lam))
        gamma = 1.0 - eta * lam
    elif kind == "logistic":
        if lam <= 0.0:
            raise _violation(kind, "lambda > 0", lam, 0.0)
        if not eta < 1.0 / lam:
            raise _violation(kind, "eta < 1/lambda", eta, 1.0 / lam)
        if not R < 2.0 * math.sqrt(lam):
            raise _violation(kind, "R < 2 sqrt(lambda)", R, 2.0 * math.sqrt(lam))
        gamma = 1.0 - eta * lam + 0.25 * eta * R**2
    elif kind == "robust":
        if t0 <= 0.0:
            raise ConfigError("robust bound needs t0 > 0")
        if lam <= 0.0:
            raise _violation(kind, "lambda_r > 0", lam, 0.0)
        lam_r, s = lam, 2.0 / t0
        if not eta < 1.0 / (lam_r + s * R**2):
            raise _violation(kind, "eta < 1/(lambda_r + 2R^2/t0)", eta, 1.0 / (lam_r + s * R**2))
        if not R < math.sqrt(lam_r * t0 / 2.0):
            raise _violation(kind, "R < sqrt(lambda_r t0 / 2)", R, math.sqrt(lam_r * t0 / 2.0))
        gamma = 1.0 - eta * lam_r + eta * s * R**2
    elif kind == "svm":
        if lam <= 0.0:
            raise _violation(kind, "lambda > 0", lam, 0.0)
        if sigma_smooth <= 0.0:
            raise ConfigError("svm bound needs sigma_smooth > 0")
        bound = 1.0 / (lam + R**2 / (4.0 * sigma_smooth))
        if not eta < bound:
            raise _violation(kind, "eta < 1/(lambda + R^2/(4 sigma))", eta, bound)
        gamma = 1.0 - eta * lam
    elif kind == "one_hidden":
        if lam <= 0.0:
            raise _violation(kind, "lambda > 0", lam, 0.0)
        if not eta < 1.0 / (2.0 * lam):
            raise _violation(kind, "eta < 1/(2 lambda)", eta, 1.0 / (2.0 * lam))
        if not c_const < lam:
            raise _violation(kind, "C < lambda", c_const, lam)
        gamma = 1.0 - eta * (lam - c_const)
    elif kind == "precond_lsq":
        if lam <= 0.0:
            raise _violation(kind, "lambda > 0", lam, 0.0)
        if not eta < m / (R**2 + lam):
            raise _violation(kind, "eta < m/(R^2 + lambda)", eta, m / (R**2 + lam))
        gamma = 1.0 - eta * lam / M
    elif kind == "precond_logistic":
        if lam <= 0.0:
            raise _violation(kind, "lambda > 0", lam, 0.0)
        if not eta < m / lam:
            raise _violation(kind, "eta < m/lambda", eta, m / lam)
        rb = 2.0 * math.sqrt(m * lam / M)
        if not R < rb:
            raise _violation(kind, "R < 2 sqrt(m lambda / M)", R, rb)
        gamma = 1.0 - eta * lam / M + 0.25 * eta * R**2 / m
    elif kind == "precond_robust":
        if t0 <= 0.0:
            raise ConfigError("robust bound needs t0 > 0")
        if lam <= 0.0:
            raise _violation(kind, "lambda_r > 0", lam, 0.0)
        lam_r, s = lam, 2.0 / t0
        if not eta < m / (lam_r + s * R**2):
            raise _violation(kind, "eta < m/(lambda_r + 2R^2/t0)", eta, m / (lam_r + s * R**2))
        rb = math.sqrt(lam_r * t0 * m / (2.0 * M))
        if not R < rb:
            raise _violation(kind, "R < sqrt(lambda_r t0 m / (2M))", R, rb)
        gamma = 1.0 - eta * lam_r / M + eta * s * R**2 / m
    elif kind == "precond_svm":
        if lam <= 0.0:
            raise _violation(kind, "lambda > 0", lam, 0.0)
        if sigma_smooth <= 0.0:
            raise ConfigError("svm bound needs sigma_smooth > 0")
        bound = m / (lam + R**2 / (4.0 * sigma_smooth))
        if not eta < bound:
            raise _violation(kind, "eta < m/(lambda + R^2/(4 sigma))", eta, bound)
        gamma = 1.0 - eta * lam / M
    elif kind == "precond_one_hidden":
        if lam <= 0.0:
            raise _violation(kind, "lambda > 0", lam, 0.0)
        if not eta < m / (c_const + lam):
            raise _violation(kind, "eta < m/(C + lambda)", eta, m / (c_const + lam))
        if not lam > (M / m) * c_const:
            raise _violation(kind, "lambda > (M/m) C", lam, (M / m) * c_const)
        gamma = 1.0 - eta * (lam / M - c_const / m)
    elif kind == "newton":
        if not eta < 1.0:
            raise _violation(kind, "eta < 1", eta, 1.0)
        gamma = 1.0 - eta
    else:
        raise ConfigError(f"unknown bound kind {kind!r}")

    if not 0.0 < gamma < 1.0:
        raise _violation(kind, "0 < Gamma < 1 (contractive factor)", gamma, 1.0)
    count = float(m_b) if m_b is not None else n / b
    return math.log(count) / math.log(1.0 / gamma)


def subset_map_count(n: int, b: int) -> int:
    """m_b = C(n, b) for the without-replacement batch family."""
    return math.comb(n, b)


# --------------------------------------------------------------------------
# Rams ratio


@dataclass
class RamsBound:
    neg_entropy: float  # -sum p_i log p_i
    mean_log_jacobian: float  # sum_i p_i E_w log ||J_{h_i}(w)||
    ratio: float  # neg_entropy / |mean_log_jacobian|
    n_mc_samples: int  # number of measure points the Jacobians were evaluated at


def rams_ratio(
    system: IfsSystem,
    cloud: SampleCloud,
    power_config: PowerIterConfig = PowerIterConfig(),
    n_w: Optional[int] = None,
    neg_entropy_override: Optional[float] = None,
) -> RamsBound:
    """Entropy-to-contraction dimension bound for contractive-on-average IFS.

    Affine maps have position-free Jacobians, so one norm per map suffices;
    problem-backed maps average log norms over ``n_w`` evenly strided cloud
    points (default min(N, 128)), each norm from a power iteration seeded
    with child index 1 + map_index*n_w + point_index.
    ``neg_entropy_override`` substitutes log C(n,b) for Subset-mode systems.
    """
    probs = system.probs
    active = probs > 0.0
    if neg_entropy_override is not None:
        neg_entropy = float(neg_entropy_override)
    else:
        neg_entropy = float(-(probs[active] * np.log(probs[active])).sum())

    if system.is_affine:
        logs = np.array(
            [
                math.log(m.jacobian_norm(config=power_config)) if active[i] else 0.0
                for i, m in enumerate(system.maps)
            ]
        )
        mean_log = float(np.dot(probs, logs))
        n_mc = 1
    else:
        pts = cloud.points
        n_mc = min(pts.shape[0], 128) if n_w is None else n_w
        if pts.shape[0] < n_mc:
            raise ConfigError(f"cloud has {pts.shape[0]} points; need at least n_w={n_mc}")
        W = pts[(np.arange(n_mc, dtype=np.int64) * pts.shape[0]) // n_mc]
        mean_log = 0.0
        for i, m in enumerate(system.maps):
            if not active[i]:
                continue
            acc = 0.0
            for k in range(n_mc):
                cfg = PowerIterConfig(
                    power_config.tol,
                    power_config.max_iters,
                    child_seed(power_config.seed, 1 + i * n_mc + k),
                )
                acc += math.log(m.jacobian_norm(W[k], cfg))
            mean_log += float(probs[i]) * acc / n_mc

    if mean_log >= 0.0:
        raise NonContractiveEstimate(
            f"mean log Jacobian norm {mean_log:.6g} >= 0; system is not contractive on average"
        )
    return RamsBound(
        neg_entropy=neg_entropy,
        mean_log_jacobian=mean_log,
        ratio=neg_entropy / abs(mean_log),
        n_mc_samples=n_mc,
    )
