"""Experiment presets: Cantor chain, 2-D regression heatmaps, and (eta, b) sweeps.

Each runner is a pure function of its config (seeds included) that writes its
artifacts atomically into an output directory and returns the in-memory
results.  File formats: CSV with LF endings and 17-significant-digit floats,
binary PGM (P5) heatmaps, and JSON summaries.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import problems as pr
from .complexity import ComplexityConfig, estimate_R, generalization_gap
from .dimension import BoxCountConfig, DimensionEstimate, analytic_bound, box_counting_dimension
from .errors import ComputeError, ConfigError, DegenerateVariance, IfslabError, PreconditionViolation
from .fileio import atomic_write_bytes, atomic_write_text, fmt_float, write_json
from .ifs import IfsSystem, sample_invariant
from .optimizers import build_sgd_ifs, partition_batches
from .rng import Xoshiro256PP, child_seed, draw_indices

# --------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class UniformLinReg:
    """n rows of d features and a target, every entry i.i.d. uniform on [-1, 1]."""

    n: int
    d: int


@dataclass(frozen=True)
class MlpRegression:
    """Teacher-generated regression: uniform inputs, noisy one-hidden-layer targets."""

    n: int
    d: int
    teacher_seed: int = 1234
    teacher_hidden: int = 8
    noise_sigma: float = 0.1


DataSpec = Union[UniformLinReg, MlpRegression]


def _teacher_predict(spec: MlpRegression, features: np.ndarray) -> np.ndarray:
    gen = Xoshiro256PP(spec.teacher_seed)
    m, d = spec.teacher_hidden, spec.d
    W = gen.normals(m * d).reshape(m, d) / math.sqrt(d)
    b = gen.normals(m) / math.sqrt(m)
    return np.tanh(features @ W.T) @ b


def generate_synthetic(spec: DataSpec, seed: int) -> pr.Dataset:
    """Deterministic synthetic dataset for the given spec and seed.

    Stream order: features first (row-major), then targets.  The MLP teacher's
    weights come from ``teacher_seed`` (hidden layer first, then output), and
    its additive noise from the child stream ``child_seed(seed, 1)``, so the
    same teacher can label many input draws.
    """
    if spec.n < 1 or spec.d < 1:
        raise ConfigError("synthetic data needs n >= 1 and d >= 1")
    gen = Xoshiro256PP(seed)
    features = gen.uniforms(spec.n * spec.d).reshape(spec.n, spec.d) * 2.0 - 1.0
    if isinstance(spec, UniformLinReg):
        targets = gen.uniforms(spec.n) * 2.0 - 1.0
    else:
        clean = _teacher_predict(spec, features)
        noise_gen = Xoshiro256PP(child_seed(seed, 1))
        targets = clean + spec.noise_sigma * noise_gen.normals(spec.n)
    return pr.Dataset(features, targets)


# --------------------------------------------------------------------------
# histogram / heatmap emitters


HIST_BINS = 1000
HIST_RANGE = (-0.1, 1.1)


def histogram_csv_text(samples: np.ndarray) -> str:
    counts, edges = np.histogram(samples, bins=HIST_BINS, range=HIST_RANGE)
    lines = ["bin_left,bin_right,count"]
    for i in range(HIST_BINS):
        lines.append(f"{fmt_float(edges[i])},{fmt_float(edges[i + 1])},{counts[i]}")
    return "\n".join(lines) + "\n"


def density_grid(points: np.ndarray, resolution: int = 512) -> np.ndarray:
    """Occupancy counts of a 2-D cloud on a resolution^2 grid over its bbox."""
    if points.ndim != 2 or points.shape[1] != 2:
        raise ConfigError("density grid needs an (N, 2) cloud")
    mins = points.min(axis=0)
    spans = points.max(axis=0) - mins
    spans[spans == 0.0] = 1.0  # degenerate axis: everything lands in bin 0
    ix = np.minimum((points[:, 0] - mins[0]) / spans[0] * resolution, resolution - 1).astype(np.int64)
    iy = np.minimum((points[:, 1] - mins[1]) / spans[1] * resolution, resolution - 1).astype(np.int64)
    grid = np.zeros((resolution, resolution), dtype=np.int64)
    np.add.at(grid, (iy, ix), 1)
    return grid


def pgm_bytes(grid: np.ndarray) -> bytes:
    """Binary PGM (P5, maxval 255), log-scaled: round(255*log(1+c)/log(1+c_max)).

    Row 0 of the image is the top of the plot (largest second coordinate), so
    the picture reads like a conventional x-right / y-up scatter plot.
    """
    c_max = int(grid.max())
    if c_max <= 0:
        raise ComputeError("cannot render an empty density grid")
    scaled = np.round(255.0 * np.log1p(grid) / math.log1p(c_max)).astype(np.uint8)
    h, w = scaled.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + scaled[::-1, :].tobytes()


# --------------------------------------------------------------------------
# Cantor preset (two-point quadratic, batch size 1)


def cantor_dataset() -> pr.Dataset:
    """Two scalar least-squares rows giving the losses w^2/2 and (w-1)^2/2."""
    return pr.Dataset(np.array([[1.0], [1.0]]), np.array([0.0, 1.0]))


def cantor_system(eta: float) -> IfsSystem:
    data = cantor_dataset()
    scheme = partition_batches(data.n, 1)
    return build_sgd_ifs(pr.LeastSquares(lam=0.0), data, scheme, eta)


@dataclass
class EtaRunRecord:
    eta: float
    files: dict[str, str]
    dimension: Optional[DimensionEstimate]
    error: str = ""


def _write_summary(out_dir: str, records: list[EtaRunRecord], extra: Optional[dict] = None) -> None:
    payload = {
        "runs": [
            {
                "eta": r.eta,
                "files": r.files,
                "dimension": r.dimension.to_json_dict() if r.dimension is not None else None,
                "error": r.error,
            }
            for r in records
        ]
    }
    if extra:
        payload.update(extra)
    write_json(os.path.join(out_dir, "summary.json"), payload)


def run_cantor(
    etas: list[float],
    out_dir: str,
    n_samples: int = 1_000_000,
    burn_in: int = 10_000,
    seed: int = 0,
    box_config: BoxCountConfig = BoxCountConfig(),
) -> list[EtaRunRecord]:
    """Scalar quadratic-pair chains: histogram CSV + dimension JSON per eta."""
    for eta in etas:
        if not 0.0 < eta < 1.0:
            raise ConfigError(f"cantor preset needs eta in (0, 1), got {eta}")
    os.makedirs(out_dir, exist_ok=True)
    records = []
    for i, eta in enumerate(etas):
        system = cantor_system(eta)
        cloud = sample_invariant(system, np.array([0.0]), burn_in, n_samples, 1, seed)
        hist_name, dim_name = f"hist_{i:02d}.csv", f"dim_{i:02d}.json"
        atomic_write_text(os.path.join(out_dir, hist_name), histogram_csv_text(cloud.points[:, 0]))
        record = EtaRunRecord(eta, {"histogram": hist_name}, None)
        try:
            est = box_counting_dimension(cloud, box_config)
            write_json(os.path.join(out_dir, dim_name), {"eta": eta, **est.to_json_dict()})
            record.files["dimension"] = dim_name
            record.dimension = est
        except IfslabError as exc:
            record.error = f"{type(exc).__name__}: {exc}"
        records.append(record)
    _write_summary(out_dir, records)
    return records


# --------------------------------------------------------------------------
# 2-D regression preset (Fig.-style heatmaps)


def run_linreg2d(
    etas: list[float],
    seed: int,
    out_dir: str,
    n_samples: int = 400_000,
    burn_in: int = 10_000,
    box_config: BoxCountConfig = BoxCountConfig(),
) -> list[EtaRunRecord]:
    """Unregularized 2-D least squares, b=1: PGM heatmap + dimension JSON per eta.

    Divergent step sizes are recorded in the per-eta ``error`` field without
    aborting the remaining etas.
    """
    for eta in etas:
        if eta <= 0.0:
            raise ConfigError(f"linreg2d preset needs eta > 0, got {eta}")
    os.makedirs(out_dir, exist_ok=True)
    data = generate_synthetic(UniformLinReg(n=5, d=2), seed)
    scheme = partition_batches(data.n, 1)
    problem = pr.LeastSquares(lam=0.0)
    records = []
    for i, eta in enumerate(etas):
        record = EtaRunRecord(eta, {}, None)
        try:
            system = build_sgd_ifs(problem, data, scheme, eta)
            cloud = sample_invariant(system, np.zeros(2), burn_in, n_samples, 1, seed)
            pgm_name, dim_name = f"heatmap_{i:02d}.pgm", f"dim_{i:02d}.json"
            atomic_write_bytes(os.path.join(out_dir, pgm_name), pgm_bytes(density_grid(cloud.points)))
            record.files["heatmap"] = pgm_name
            est = box_counting_dimension(cloud, box_config)
            write_json(os.path.join(out_dir, dim_name), {"eta": eta, **est.to_json_dict()})
            record.files["dimension"] = dim_name
            record.dimension = est
        except IfslabError as exc:
            record.error = f"{type(exc).__name__}: {exc}"
        records.append(record)
    _write_summary(out_dir, records)
    return records


# --------------------------------------------------------------------------
# correlation statistics


def _rank_average_ties(xs: np.ndarray) -> np.ndarray:
    order = np.argsort(xs, kind="stable")
    ranks = np.empty(len(xs), dtype=float)
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average of ranks i+1 .. j+1
        i = j + 1
    return ranks


def correlation_stats(xs, ys) -> tuple[float, float]:
    """(Pearson r, Spearman rho with average ranks on ties)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ConfigError("correlation needs two equal-length 1-D inputs with >= 2 entries")

    def pearson(a: np.ndarray, b: np.ndarray) -> float:
        a = a - a.mean()
        b = b - b.mean()
        na, nb = float(np.sqrt((a * a).sum())), float(np.sqrt((b * b).sum()))
        if na == 0.0 or nb == 0.0:
            raise DegenerateVariance("correlation undefined for a constant input")
        return float((a * b).sum() / (na * nb))

    return pearson(x, y), pearson(_rank_average_ties(x), _rank_average_ties(y))


# --------------------------------------------------------------------------
# (eta, b) sweep


@dataclass(frozen=True)
class SweepConfig:
    data: MlpRegression
    etas: tuple[float, ...]
    batch_sizes: tuple[int, ...]
    hidden: int = 8
    activation: str = "tanh"
    lam: float = 0.01
    out_scale: float = 2.0  # student output weights alternate +/- this value
    n_test: Optional[int] = None  # default: same size as training set
    loss_tol: float = 1e-3
    max_iters: int = 100_000
    check_every: int = 250
    burn_in: int = 1_000
    n_cloud: int = 2_000
    thin: int = 1
    n_w: int = 64
    n_u: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.etas or not self.batch_sizes:
            raise ConfigError("sweep grid must be nonempty")
        if any(e <= 0 for e in self.etas):
            raise ConfigError("sweep etas must be positive")


@dataclass
class SweepRow:
    eta: float
    b: int
    R: float
    box_dim: float
    analytic_bound: float
    gen_gap: float
    error: str = ""


@dataclass
class SweepResult:
    rows: list[SweepRow]
    stats: dict[str, dict[str, float]]  # pair name -> {"pearson": r, "spearman": rho}
    warnings: list[str]


SWEEP_COLUMNS = ("eta", "b", "R", "box_dim", "analytic_bound", "gen_gap", "error")


def _student_problem(config: SweepConfig) -> pr.OneHiddenLayer:
    outs = tuple(config.out_scale * (1.0 if r % 2 == 0 else -1.0) for r in range(config.hidden))
    return pr.OneHiddenLayer(lam=config.lam, out_weights=outs, activation=config.activation)


def _train_point(
    problem: pr.OneHiddenLayer,
    train: pr.Dataset,
    b: int,
    eta: float,
    config: SweepConfig,
    point_seed: int,
) -> np.ndarray:
    """Constant-step SGD until mean train loss < loss_tol or max_iters steps."""
    scheme = partition_batches(train.n, b)
    gen = Xoshiro256PP(point_seed)
    w = 0.5 * gen.normals(pr.param_dim(problem, train))
    steps = 0
    while steps < config.max_iters:
        block = min(config.check_every, config.max_iters - steps)
        idx = draw_indices(gen, scheme.probs, block)
        for k in idx:
            w = w - eta * pr.grad(problem, w, train, scheme.batches[k])
        steps += block
        if not np.all(np.isfinite(w)):
            raise ComputeError(f"training diverged at step {steps}")
        if pr.mean_loss(problem, w, train) < config.loss_tol:
            break
    return w


def _sweep_point(
    config: SweepConfig,
    train: pr.Dataset,
    test: pr.Dataset,
    eta: float,
    b: int,
    point_seed: int,
) -> SweepRow:
    problem = _student_problem(config)
    w_trained = _train_point(problem, train, b, eta, config, point_seed)
    gap = generalization_gap(problem, train, test, w_trained)

    scheme = partition_batches(train.n, b)
    system = build_sgd_ifs(problem, train, scheme, eta)
    cloud = sample_invariant(
        system, w_trained, config.burn_in, config.n_cloud, config.thin, child_seed(point_seed, 1)
    )
    est = estimate_R(
        problem, train, scheme, eta, cloud,
        ComplexityConfig(n_w=config.n_w, n_u=config.n_u, seed=child_seed(point_seed, 2)),
    )

    dim = pr.param_dim(problem, train)
    box_dim = math.nan
    if dim <= 3:
        try:
            box_dim = box_counting_dimension(cloud).value
        except IfslabError:
            pass
    bound = math.nan
    try:
        c_const = pr.compute_one_layer_C(problem, train, cloud.points)
        bound = analytic_bound(
            "one_hidden", n=train.n, b=b, eta=eta, lam=config.lam, c_const=c_const
        )
    except (PreconditionViolation, ConfigError):
        pass
    return SweepRow(eta=eta, b=b, R=est.R, box_dim=box_dim, analytic_bound=bound, gen_gap=gap)


def run_sweep(config: SweepConfig, out_dir: str) -> SweepResult:
    """Grid sweep over (eta, b): train, collect cloud, compute R / dims / gap.

    Per-point failures land in the row's ``error`` column and the sweep
    continues.  Correlations are computed over the rows that produced finite
    values; with fewer than two such rows they are NaN and a warning is
    recorded.  Points use seeds derived from the config seed by grid index,
    so any execution order (or a parallel driver) yields identical artifacts.
    """
    os.makedirs(out_dir, exist_ok=True)
    train = generate_synthetic(config.data, config.seed)
    test_spec = MlpRegression(
        n=config.n_test if config.n_test is not None else config.data.n,
        d=config.data.d,
        teacher_seed=config.data.teacher_seed,
        teacher_hidden=config.data.teacher_hidden,
        noise_sigma=config.data.noise_sigma,
    )
    test = generate_synthetic(test_spec, child_seed(config.seed, 2))

    rows: list[SweepRow] = []
    for g, (b, eta) in enumerate(
        (b, eta) for b in config.batch_sizes for eta in config.etas
    ):
        point_seed = child_seed(config.seed, 10 + g)
        try:
            rows.append(_sweep_point(config, train, test, eta, b, point_seed))
        except IfslabError as exc:
            rows.append(
                SweepRow(eta, b, math.nan, math.nan, math.nan, math.nan,
                         error=f"{type(exc).__name__}: {exc}")
            )

    warnings: list[str] = []
    stats: dict[str, dict[str, float]] = {}
    ok = [r for r in rows if not r.error and math.isfinite(r.R) and math.isfinite(r.gen_gap)]
    for name, xs, ys in (
        ("R_vs_gen_gap", [r.R for r in ok], [r.gen_gap for r in ok]),
        ("R_vs_eta", [r.R for r in ok], [r.eta for r in ok]),
    ):
        try:
            p, s = correlation_stats(xs, ys)
        except (ConfigError, DegenerateVariance) as exc:
            p, s = math.nan, math.nan
            warnings.append(f"{name}: correlation undefined ({exc})")
        stats[name] = {"pearson": p, "spearman": s}

    lines = [",".join(SWEEP_COLUMNS)]
    for r in rows:
        lines.append(
            ",".join(
                [fmt_float(r.eta), str(r.b), fmt_float(r.R), fmt_float(r.box_dim),
                 fmt_float(r.analytic_bound), fmt_float(r.gen_gap), r.error.replace(",", ";")]
            )
        )
    atomic_write_text(os.path.join(out_dir, "sweep.csv"), "\n".join(lines) + "\n")
    write_json(os.path.join(out_dir, "sweep_stats.json"), {"stats": stats, "warnings": warnings})
    return SweepResult(rows=rows, stats=stats, warnings=warnings)


def reference_sweep_config(
    etas: tuple[float, ...] = (0.07, 0.09, 0.11, 0.13, 0.15, 0.17),
    batch_sizes: tuple[int, ...] = (16, 32),
    seed: int = 0,
) -> SweepConfig:
    """The calibrated grid shared by scripts/run_sweep.py and the acceptance run.

    Sized so the trained chains sit in the locally expanding regime (R > 0,
    falling with eta).  The gap correlations are noisy at this problem scale;
    the signs quoted in the README hold for the default seed.
    """
    return SweepConfig(
        data=MlpRegression(n=256, d=4, teacher_hidden=16),
        etas=tuple(etas),
        batch_sizes=tuple(batch_sizes),
        hidden=8,
        activation="tanh",
        lam=0.001,
        out_scale=3.0,
        seed=seed,
    )
