"""Synthetic data, artifact emitters, preset experiments, and the sweep."""

import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifslab.errors import ComputeError, ConfigError, DegenerateVariance
from ifslab.experiments import (
    MlpRegression,
    SweepConfig,
    UniformLinReg,
    cantor_system,
    correlation_stats,
    density_grid,
    generate_synthetic,
    histogram_csv_text,
    pgm_bytes,
    run_cantor,
    run_linreg2d,
    run_sweep,
)


# ---------------------------------------------------------------------------
# correlation_stats


def test_correlation_perfect():
    p, s = correlation_stats((1, 2, 3), (2, 4, 6))
    assert p == pytest.approx(1.0, rel=1e-15)
    assert s == pytest.approx(1.0, rel=1e-15)
    p, s = correlation_stats((1, 2, 3), (3, 2, 1))
    assert p == pytest.approx(-1.0, rel=1e-15)
    assert s == pytest.approx(-1.0, rel=1e-15)


def test_correlation_hand_value():
    p, s = correlation_stats((1, 2, 3, 4), (1, 4, 2, 8))
    assert p == pytest.approx(9.5 / math.sqrt(5.0 * 28.75), rel=1e-12)
    assert p == pytest.approx(0.7923547734168841, rel=1e-12)
    assert s == pytest.approx(0.8, rel=1e-12)


def test_correlation_ties_get_average_ranks():
    # ys has a tie: ranks (1, 2.5, 2.5, 4)
    p, s = correlation_stats((1, 2, 3, 4), (1, 2, 2, 3))
    rx = np.array([1.0, 2.0, 3.0, 4.0])
    ry = np.array([1.0, 2.5, 2.5, 4.0])
    expected = np.corrcoef(rx, ry)[0, 1]
    assert s == pytest.approx(expected, rel=1e-12)


def test_correlation_degenerate_and_config_errors():
    with pytest.raises(DegenerateVariance):
        correlation_stats((1, 1, 1), (1, 2, 3))
    with pytest.raises(DegenerateVariance):
        correlation_stats((1, 2, 3), (5, 5, 5))
    with pytest.raises(ConfigError):
        correlation_stats((1,), (2,))
    with pytest.raises(ConfigError):
        correlation_stats((1, 2, 3), (1, 2))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_correlation_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 30))
    xs = rng.normal(size=n)
    ys = rng.normal(size=n)
    p, s = correlation_stats(xs, ys)
    assert -1.0 <= p <= 1.0
    assert -1.0 <= s <= 1.0
    assert p == pytest.approx(np.corrcoef(xs, ys)[0, 1], rel=1e-9, abs=1e-12)


# ---------------------------------------------------------------------------
# generate_synthetic


def test_uniform_linreg_shape_range_determinism():
    spec = UniformLinReg(n=50, d=3)
    a = generate_synthetic(spec, seed=7)
    b = generate_synthetic(spec, seed=7)
    c = generate_synthetic(spec, seed=8)
    assert a.features.shape == (50, 3) and a.targets.shape == (50,)
    assert np.all(np.abs(a.features) <= 1.0) and np.all(np.abs(a.targets) <= 1.0)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.targets, b.targets)
    assert not np.array_equal(a.features, c.features)


def test_mlp_regression_teacher_and_noise():
    clean_spec = MlpRegression(n=40, d=2, teacher_seed=5, teacher_hidden=4, noise_sigma=0.0)
    noisy_spec = MlpRegression(n=40, d=2, teacher_seed=5, teacher_hidden=4, noise_sigma=0.3)
    clean = generate_synthetic(clean_spec, seed=3)
    noisy = generate_synthetic(noisy_spec, seed=3)
    # same seed => same inputs; noise only perturbs the targets
    np.testing.assert_array_equal(clean.features, noisy.features)
    resid = noisy.targets - clean.targets
    assert np.std(resid) == pytest.approx(0.3, rel=0.5)
    assert not np.allclose(resid, 0.0)
    # a different teacher seed relabels the same draw
    other = generate_synthetic(
        MlpRegression(n=40, d=2, teacher_seed=6, teacher_hidden=4, noise_sigma=0.0), seed=3
    )
    np.testing.assert_array_equal(clean.features, other.features)
    assert not np.allclose(clean.targets, other.targets)


def test_mlp_regression_targets_bounded_by_teacher_scale():
    # tanh features through unit-scaled output weights: |clean target| <= sum|b|
    spec = MlpRegression(n=200, d=3, teacher_seed=11, teacher_hidden=8, noise_sigma=0.0)
    data = generate_synthetic(spec, seed=0)
    assert np.all(np.isfinite(data.targets))
    assert np.max(np.abs(data.targets)) < 8.0


def test_generate_synthetic_validates():
    with pytest.raises(ConfigError):
        generate_synthetic(UniformLinReg(n=0, d=2), seed=0)
    with pytest.raises(ConfigError):
        generate_synthetic(UniformLinReg(n=2, d=0), seed=0)


# ---------------------------------------------------------------------------
# artifact emitters


def test_histogram_csv_layout():
    samples = np.array([0.0, 0.5, 0.5, 1.0])
    text = histogram_csv_text(samples)
    lines = text.splitlines()
    assert lines[0] == "bin_left,bin_right,count"
    assert len(lines) == 1001
    assert text.endswith("\n")
    counts = np.array([int(line.rsplit(",", 1)[1]) for line in lines[1:]])
    assert counts.sum() == 4


def test_density_grid_placement():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    grid = density_grid(pts, resolution=2)
    assert grid.shape == (2, 2)
    assert grid[0, 0] == 1  # (x=0, y=0) -> column 0, row 0
    assert grid[1, 1] == 2  # both copies of (1, 1)
    assert grid.sum() == 3


def test_density_grid_degenerate_axis():
    pts = np.column_stack([np.linspace(0, 1, 100), np.full(100, 0.5)])
    grid = density_grid(pts, resolution=4)
    assert grid.sum() == 100
    assert grid[1:, :].sum() == 0  # constant axis collapses to bin 0


def test_density_grid_rejects_non_planar():
    with pytest.raises(ConfigError):
        density_grid(np.zeros((10, 3)))


def test_pgm_bytes_format():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, size=(5000, 2))
    blob = pgm_bytes(density_grid(pts, resolution=512))
    assert blob.startswith(b"P5\n512 512\n255\n")
    assert len(blob) == len(b"P5\n512 512\n255\n") + 512 * 512
    assert len(blob) == 262159
    assert max(blob[15:]) == 255  # the densest cell saturates the gray scale


def test_pgm_flips_rows_for_y_up():
    # single occupied cell at max y: must appear in the first written row
    pts = np.array([[0.0, 0.0], [0.5, 1.0]])
    grid = density_grid(pts, resolution=4)
    blob = pgm_bytes(grid)
    header_len = len(b"P5\n4 4\n255\n")
    rows = np.frombuffer(blob[header_len:], dtype=np.uint8).reshape(4, 4)
    assert rows[0].max() > 0  # y = 1 renders at the top
    assert rows[3].max() > 0  # y = 0 renders at the bottom


def test_pgm_rejects_empty_grid():
    with pytest.raises(ComputeError):
        pgm_bytes(np.zeros((4, 4), dtype=np.int64))


# ---------------------------------------------------------------------------
# preset experiments (reduced sizes; the acceptance suite runs full scale)


def test_run_cantor_smoke(tmp_path):
    out = str(tmp_path / "cantor")
    records = run_cantor([2.0 / 3.0], out, n_samples=40_000, burn_in=1_000, seed=0)
    assert len(records) == 1
    rec = records[0]
    assert rec.error == ""
    assert rec.dimension is not None
    assert rec.dimension.value == pytest.approx(math.log(2) / math.log(3), abs=0.1)
    for name in ("hist_00.csv", "dim_00.json", "summary.json"):
        assert os.path.exists(os.path.join(out, name))
    summary = json.loads(open(os.path.join(out, "summary.json")).read())
    assert summary["runs"][0]["files"]["histogram"] == "hist_00.csv"
    assert summary["runs"][0]["dimension"]["value"] == rec.dimension.value


def test_run_cantor_middle_third_gap(tmp_path):
    out = str(tmp_path / "cantor_gap")
    run_cantor([2.0 / 3.0], out, n_samples=50_000, burn_in=1_000, seed=1)
    lines = open(os.path.join(out, "hist_00.csv")).read().splitlines()[1:]
    inner = 0
    total = 0
    for line in lines:
        left, right, count = line.split(",")
        lo, hi, c = float(left), float(right), int(count)
        total += c
        if lo >= 1.0 / 3.0 + 1e-9 and hi <= 2.0 / 3.0 - 1e-9:
            inner += c
    assert total == 50_000
    assert inner / total < 0.001


def test_run_cantor_validates_eta(tmp_path):
    with pytest.raises(ConfigError):
        run_cantor([1.0], str(tmp_path / "x"))


def test_run_linreg2d_smoke_and_error_rows(tmp_path):
    out = str(tmp_path / "lin2d")
    records = run_linreg2d([0.3, 80.0], seed=0, out_dir=out, n_samples=30_000, burn_in=1_000)
    ok, bad = records
    assert ok.error == "" and ok.dimension is not None
    assert 0.0 <= ok.dimension.value <= 2.0
    assert os.path.exists(os.path.join(out, "heatmap_00.pgm"))
    assert os.path.exists(os.path.join(out, "dim_00.json"))
    # the divergent step size is recorded, not raised
    assert bad.error.startswith("NonFiniteState")
    assert "dimension" not in bad.files
    summary = json.loads(open(os.path.join(out, "summary.json")).read())
    assert summary["runs"][1]["error"].startswith("NonFiniteState")


def test_run_linreg2d_heatmap_is_valid_pgm(tmp_path):
    out = str(tmp_path / "lin2d_pgm")
    run_linreg2d([0.5], seed=2, out_dir=out, n_samples=20_000, burn_in=500)
    blob = open(os.path.join(out, "heatmap_00.pgm"), "rb").read()
    assert blob.startswith(b"P5\n512 512\n255\n")
    assert len(blob) == 262159


def test_cantor_system_maps():
    system = cantor_system(2.0 / 3.0)
    assert len(system.maps) == 2
    for m in system.maps:
        assert m.matrix[0, 0] == pytest.approx(1.0 / 3.0, rel=1e-15)


# ---------------------------------------------------------------------------
# run_sweep (miniature grids)


def tiny_sweep_config(**overrides):
    base = dict(
        data=MlpRegression(n=24, d=2, teacher_seed=3, teacher_hidden=4, noise_sigma=0.1),
        etas=(0.05,),
        batch_sizes=(4,),
        hidden=2,
        activation="tanh",
        lam=0.01,
        out_scale=1.0,
        max_iters=3_000,
        check_every=100,
        burn_in=200,
        n_cloud=300,
        n_w=16,
        n_u=8,
        seed=0,
    )
    base.update(overrides)
    return SweepConfig(**base)


def test_sweep_single_point_grid_warns_nan(tmp_path):
    out = str(tmp_path / "sweep1")
    result = run_sweep(tiny_sweep_config(), out)
    assert len(result.rows) == 1
    assert result.warnings  # correlation undefined on one point
    for pair in ("R_vs_gen_gap", "R_vs_eta"):
        assert math.isnan(result.stats[pair]["pearson"])
        assert math.isnan(result.stats[pair]["spearman"])
    stats_blob = json.loads(open(os.path.join(out, "sweep_stats.json")).read())
    assert stats_blob["warnings"]
    assert stats_blob["stats"]["R_vs_eta"]["pearson"] is None or math.isnan(
        stats_blob["stats"]["R_vs_eta"]["pearson"]
    )


def test_sweep_csv_layout_and_determinism(tmp_path):
    cfg = tiny_sweep_config(etas=(0.05, 0.1), batch_sizes=(4, 8))
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    res_a = run_sweep(cfg, out_a)
    res_b = run_sweep(cfg, out_b)
    csv_a = open(os.path.join(out_a, "sweep.csv"), "rb").read()
    csv_b = open(os.path.join(out_b, "sweep.csv"), "rb").read()
    assert csv_a == csv_b
    stats_a = open(os.path.join(out_a, "sweep_stats.json"), "rb").read()
    stats_b = open(os.path.join(out_b, "sweep_stats.json"), "rb").read()
    assert stats_a == stats_b
    lines = csv_a.decode().splitlines()
    assert lines[0] == "eta,b,R,box_dim,analytic_bound,gen_gap,error"
    assert len(lines) == 5
    assert len(res_a.rows) == 4
    for row in res_a.rows:
        assert row.error == ""
        assert math.isfinite(row.R) and math.isfinite(row.gen_gap)
        assert row.gen_gap >= 0.0


def test_sweep_rejects_empty_or_bad_grid():
    with pytest.raises(ConfigError):
        tiny_sweep_config(etas=())
    with pytest.raises(ConfigError):
        tiny_sweep_config(etas=(0.0,))


def test_scripts_run_end_to_end(tmp_path):
    # the argparse wrappers and their summary print loops have no other coverage
    import subprocess
    import sys

    scripts = os.path.join(os.path.dirname(__file__), "..", "scripts")
    common = {"cwd": str(tmp_path), "capture_output": True, "text": True, "timeout": 120}

    proc = subprocess.run(
        [sys.executable, os.path.join(scripts, "run_cantor.py"),
         "--out", "cantor", "--etas", "0.6666666666666666",
         "--n-samples", "20000", "--burn-in", "1000"],
        **common,
    )
    assert proc.returncode == 0, proc.stderr
    assert "dimension=" in proc.stdout
    assert os.path.exists(tmp_path / "cantor" / "summary.json")

    proc = subprocess.run(
        [sys.executable, os.path.join(scripts, "run_linreg2d.py"),
         "--out", "lin", "--etas", "0.5", "80.0",
         "--n-samples", "20000", "--burn-in", "1000"],
        **common,
    )
    assert proc.returncode == 0, proc.stderr
    assert "dimension=" in proc.stdout  # healthy eta
    assert "error: NonFiniteState" in proc.stdout  # divergent eta
    assert os.path.exists(tmp_path / "lin" / "summary.json")
