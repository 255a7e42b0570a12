"""Power iteration, the R estimator, and the generalization bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_problem_config
from ifslab.complexity import (
    ComplexityConfig,
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
from ifslab.dimension import RamsBound
from ifslab.errors import (
    ConfigError,
    DimensionTooLarge,
    NonContractiveEstimate,
    ZeroMeanLogNorm,
    ZeroOperator,
)
from ifslab.ifs import SampleCloud
from ifslab.optimizers import partition_batches
from ifslab.problems import Dataset, LeastSquares, mean_loss, param_dim
from ifslab.rng import Xoshiro256PP, child_seed, draw_indices


def cloud_of(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return SampleCloud(points=pts, burn_in=0, thin=1, seed=0)


# ---------------------------------------------------------------------------
# spectral_norm_power_iter


def test_power_iter_diagonal():
    D = np.diag([0.9, 0.8, 0.7])
    res = spectral_norm_power_iter(lambda v: D @ v, 3)
    assert res.converged
    assert res.value == pytest.approx(0.9, rel=1e-5)


def test_power_iter_negative_identity():
    res = spectral_norm_power_iter(lambda v: -v, 4)
    assert res.converged
    assert res.value == pytest.approx(1.0, rel=1e-12)


def test_power_iter_opposite_sign_tie():
    # eigenvalues +1 and -1: the norm estimate still converges to 1
    D = np.diag([1.0, -1.0])
    res = spectral_norm_power_iter(lambda v: D @ v, 2)
    assert res.value == pytest.approx(1.0, rel=1e-6)


def test_power_iter_zero_operator():
    with pytest.raises(ZeroOperator):
        spectral_norm_power_iter(lambda v: np.zeros_like(v), 3)


def test_power_iter_nonconverged_flag():
    D = np.diag([1.0, 0.9999])
    res = spectral_norm_power_iter(
        lambda v: D @ v, 2, PowerIterConfig(tol=1e-14, max_iters=3)
    )
    assert not res.converged
    assert res.iterations == 3


def test_power_iter_seed_determinism():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    A = Q @ np.diag([2.0, 1.5, 1.0, 0.5, 0.2, 0.1]) @ Q.T
    a = spectral_norm_power_iter(lambda v: A @ v, 6, PowerIterConfig(seed=3))
    b = spectral_norm_power_iter(lambda v: A @ v, 6, PowerIterConfig(seed=3))
    assert a.value == b.value and a.iterations == b.iterations


def test_power_iter_matches_dense_eigensolver():
    rng = np.random.default_rng(1)
    for trial in range(10):
        d = int(rng.integers(2, 21))
        eigs = np.sort(rng.uniform(0.1, 2.0, size=d))
        eigs[-1] = eigs[-2] + max(1e-2, eigs[-2] * 0.05)  # enforce a spectral gap
        Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        A = Q @ np.diag(eigs) @ Q.T
        res = spectral_norm_power_iter(
            lambda v: A @ v, d, PowerIterConfig(tol=1e-10, max_iters=10_000)
        )
        dense = float(np.max(np.abs(np.linalg.eigvalsh(A))))
        assert res.converged
        assert res.value == pytest.approx(dense, rel=1e-6)


def test_matrix_operator_norm_nonsymmetric():
    M = np.array([[0.0, 2.0], [0.0, 0.0]])  # singular values (2, 0)
    assert matrix_operator_norm(M) == pytest.approx(2.0, rel=1e-6)


# ---------------------------------------------------------------------------
# dense_jacobian_oracle


def test_dense_oracle_least_squares_diagonal():
    data = Dataset([[1.0, 0.0], [0.0, 1.0]], [1.0, -1.0])
    batch = np.array([0, 1])
    J, norm = dense_jacobian_oracle(
        LeastSquares(lam=0.2), np.zeros(2), data, batch, 0.1
    )
    # H = lam I + A^T A / 2 = diag(0.7, 0.7)... columns give I - 0.1 * diag(0.7)
    np.testing.assert_allclose(J, np.diag([0.93, 0.93]), atol=1e-12)
    assert norm == pytest.approx(0.93, rel=1e-12)


def test_dense_oracle_example_values():
    # singleton batch a=(1,0), y=1, lam=0.5, eta=0.1:
    # J = I - 0.1 (0.5 I + a a^T) = diag(0.85, 0.95)
    data = Dataset([[1.0, 0.0]], [1.0])
    J, norm = dense_jacobian_oracle(
        LeastSquares(lam=0.5), np.zeros(2), data, np.array([0]), 0.1
    )
    np.testing.assert_allclose(J, np.diag([0.85, 0.95]), atol=1e-12)
    assert norm == pytest.approx(0.95, rel=1e-12)


def test_dense_oracle_eta_zero_is_identity():
    problem, dataset, w, batch = make_problem_config("one_hidden", seed=4)
    J, norm = dense_jacobian_oracle(problem, w, dataset, batch, 0.0)
    np.testing.assert_allclose(J, np.eye(param_dim(problem, dataset)), atol=1e-12)
    assert norm == pytest.approx(1.0, rel=1e-12)


def test_dense_oracle_dimension_cap():
    rng = np.random.default_rng(2)
    data = Dataset(rng.normal(size=(3, 65)), rng.normal(size=3))
    with pytest.raises(DimensionTooLarge):
        dense_jacobian_oracle(LeastSquares(lam=0.1), np.zeros(65), data, np.array([0]), 0.1)


# ---------------------------------------------------------------------------
# estimate_R


def quadratic_pair_setup():
    data = Dataset([[1.0], [1.0]], [0.0, 1.0])
    return LeastSquares(lam=0.0), data, partition_batches(2, 1)


def test_estimate_r_cantor_constant_jacobian():
    problem, data, scheme = quadratic_pair_setup()
    cloud = cloud_of(np.linspace(0, 1, 300))
    est = estimate_R(problem, data, scheme, 2.0 / 3.0, cloud, ComplexityConfig(n_w=8, n_u=6))
    assert est.inverse_R == pytest.approx(math.log(1.0 / 3.0), rel=1e-12)
    assert est.R == pytest.approx(1.0 / math.log(1.0 / 3.0), rel=1e-12)
    assert est.R == pytest.approx(-0.9102, abs=1e-4)
    assert est.converged_fraction == 1.0


def test_estimate_r_two_batch_limit():
    """Batch Hessians 1 and 2 at eta=0.1: lognorms are ln0.9 / ln0.8 and the
    mean tends to their average as the batch draw count grows."""
    data = Dataset([[1.0], [math.sqrt(2.0)]], [0.0, 0.0])
    scheme = partition_batches(2, 1)
    cloud = cloud_of(np.zeros(64))
    est = estimate_R(
        LeastSquares(lam=0.0), data, scheme, 0.1, cloud, ComplexityConfig(n_w=4, n_u=4000)
    )
    exact = (math.log(0.9) + math.log(0.8)) / 2.0
    assert est.inverse_R == pytest.approx(exact, abs=5e-3)
    assert est.R == pytest.approx(1.0 / exact, abs=0.25)
    # every cell is exactly one of the two closed-form lognorms
    cells = est.per_sample_lognorms
    match = np.isclose(cells, math.log(0.9), atol=1e-12) | np.isclose(
        cells, math.log(0.8), atol=1e-12
    )
    assert match.all()
    # and the mean is the drawn mixture of those two values, bit for bit
    draws = draw_indices(Xoshiro256PP(child_seed(0, 0)), scheme.probs, 4000)
    k = np.bincount(draws, minlength=2)
    mix = (k[0] * math.log(0.9) + k[1] * math.log(0.8)) / 4000.0
    assert est.inverse_R == pytest.approx(mix, rel=1e-12)


def test_estimate_r_eta_scaling_linearity():
    data = Dataset([[1.0]], [0.0])
    scheme = partition_batches(1, 1)
    cloud = cloud_of(np.zeros(16))
    cfg = ComplexityConfig(n_w=4, n_u=4)
    for eta in (0.3, 0.6, 0.9):
        est = estimate_R(LeastSquares(lam=0.0), data, scheme, eta, cloud, cfg)
        np.testing.assert_allclose(
            est.per_sample_lognorms, math.log(abs(1.0 - eta)), atol=1e-12
        )


def test_estimate_r_matches_dense_oracle_on_mlp():
    problem, dataset, _, _ = make_problem_config("one_hidden", seed=11)
    scheme = partition_batches(dataset.n, 1)
    rng = np.random.default_rng(12)
    dim = param_dim(problem, dataset)
    cloud = cloud_of(rng.normal(scale=0.4, size=(40, dim)))
    # eta large enough to spread J's spectrum; near eta=0 the top eigenvalues
    # of I - eta*H nearly tie and the power iteration converges too slowly
    eta = 2.0
    cfg = ComplexityConfig(
        n_w=5, n_u=6, power_iter=PowerIterConfig(tol=1e-10, max_iters=20_000)
    )
    est = estimate_R(problem, dataset, scheme, eta, cloud, cfg)
    assert est.converged_fraction == 1.0
    W = cloud.points[(np.arange(5, dtype=np.int64) * 40) // 5]
    draws = draw_indices(Xoshiro256PP(child_seed(0, 0)), scheme.probs, 6)
    for i in range(5):
        for j in range(6):
            _, dense = dense_jacobian_oracle(
                problem, W[i], dataset, scheme.batches[draws[j]], eta
            )
            assert math.exp(est.per_sample_lognorms[i, j]) == pytest.approx(dense, rel=1e-5)


def test_estimate_r_determinism_and_json():
    problem, data, scheme = quadratic_pair_setup()
    cloud = cloud_of(np.linspace(0, 1, 50))
    cfg = ComplexityConfig(n_w=6, n_u=5, seed=42)
    a = estimate_R(problem, data, scheme, 0.5, cloud, cfg)
    b = estimate_R(problem, data, scheme, 0.5, cloud, cfg)
    assert a.R == b.R
    np.testing.assert_array_equal(a.per_sample_lognorms, b.per_sample_lognorms)
    blob = a.to_json_dict()
    assert set(blob) == {"R", "inverse_R", "n_w", "n_u", "converged_fraction"}


def test_estimate_r_zero_mean_lognorm():
    # |1 - eta * 2| = 1 at eta = 1: every factor has unit norm
    data = Dataset([[math.sqrt(2.0)]], [0.0])
    scheme = partition_batches(1, 1)
    with pytest.raises(ZeroMeanLogNorm):
        estimate_R(
            LeastSquares(lam=0.0),
            data,
            scheme,
            1.0,
            cloud_of(np.zeros(8)),
            ComplexityConfig(n_w=2, n_u=2),
        )


def test_estimate_r_cloud_too_small():
    problem, data, scheme = quadratic_pair_setup()
    with pytest.raises(ConfigError):
        estimate_R(problem, data, scheme, 0.5, cloud_of(np.zeros(3)), ComplexityConfig(n_w=10, n_u=2))


def test_estimate_r_subset_mode():
    rng = np.random.default_rng(13)
    data = Dataset(rng.uniform(-1, 1, size=(6, 2)), rng.uniform(-1, 1, size=6))
    scheme = partition_batches(6, 2, mode="subset")
    cloud = cloud_of(rng.normal(size=(30, 2)))
    est = estimate_R(
        LeastSquares(lam=0.5), data, scheme, 0.1, cloud, ComplexityConfig(n_w=4, n_u=8)
    )
    assert np.isfinite(est.R)
    assert est.inverse_R < 0.0  # small eta: contractive on average


# ---------------------------------------------------------------------------
# generalization bounds


def std_inputs(**overrides):
    base = dict(nu=1.0, lipschitz=1.0, n=10_000, m_const=1.0, zeta=0.05)
    base.update(overrides)
    return GeneralizationInputs(**base)


def test_theorem1_hand_value():
    got = bound_theorem1(2.0, std_inputs())
    expected = 8.0 * math.sqrt(2.0 * math.log(1e4) ** 2 / 1e4 + math.log(260.0) / 1e4)
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(1.0590, abs=1e-3)


def test_theorem1_zero_dimension_form():
    for zeta in (0.01, 0.05, 0.5):
        got = bound_theorem1(0.0, std_inputs(zeta=zeta))
        assert got == pytest.approx(8.0 * math.sqrt(math.log(13.0 / zeta) / 1e4), rel=1e-12)


def test_theorem1_monotone_in_dimension():
    vals = [bound_theorem1(d, std_inputs()) for d in (0.0, 0.5, 1.0, 2.0, 10.0, 43.7)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_theorem1_rejects_bad_inputs():
    with pytest.raises(ConfigError):
        bound_theorem1(-1.0, std_inputs())
    with pytest.raises(ConfigError):
        std_inputs(zeta=1.0)
    with pytest.raises(ConfigError):
        std_inputs(n=0)
    with pytest.raises(ConfigError):
        std_inputs(nu=0.0)


def test_corollary1_hand_value():
    ratio = math.log(100.0) / math.log(1.0 / 0.9)
    rams = RamsBound(
        neg_entropy=math.log(100.0),
        mean_log_jacobian=math.log(0.9),
        ratio=ratio,
        n_mc_samples=1,
    )
    got = bound_corollary1(rams, std_inputs())
    assert got == pytest.approx(bound_theorem1(ratio, std_inputs()), rel=1e-15)
    assert got == pytest.approx(4.875, abs=1e-3)


def test_corollary1_cantor_value():
    rams = RamsBound(
        neg_entropy=math.log(2.0),
        mean_log_jacobian=math.log(1.0 / 3.0),
        ratio=math.log(2.0) / math.log(3.0),
        n_mc_samples=1,
    )
    got = bound_corollary1(rams, std_inputs())
    expected = 8.0 * math.sqrt(
        math.log(2.0) / math.log(3.0) * math.log(1e4) ** 2 / 1e4 + math.log(260.0) / 1e4
    )
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(0.6149, abs=1e-3)


def test_corollary1_noncontractive():
    rams = RamsBound(
        neg_entropy=math.log(2.0), mean_log_jacobian=0.1, ratio=-6.93, n_mc_samples=1
    )
    with pytest.raises(NonContractiveEstimate):
        bound_corollary1(rams, std_inputs())


@settings(max_examples=30, deadline=None)
@given(
    dim=st.floats(0.0, 100.0),
    nu=st.floats(0.1, 5.0),
    n=st.integers(10, 10**6),
)
def test_theorem1_positive_and_scales_with_nu(dim, nu, n):
    inputs = GeneralizationInputs(nu=nu, lipschitz=1.0, n=n, m_const=1.0, zeta=0.05)
    base = GeneralizationInputs(nu=1.0, lipschitz=1.0, n=n, m_const=1.0, zeta=0.05)
    assert bound_theorem1(dim, inputs) == pytest.approx(
        nu * bound_theorem1(dim, base), rel=1e-12
    )
    assert bound_theorem1(dim, inputs) > 0.0


# ---------------------------------------------------------------------------
# generalization_gap


def test_gap_identical_sets_is_zero():
    rng = np.random.default_rng(14)
    data = Dataset(rng.uniform(-1, 1, size=(8, 2)), rng.uniform(-1, 1, size=8))
    w = rng.normal(size=2)
    assert generalization_gap(LeastSquares(lam=0.3), data, data, w) == 0.0


def test_gap_permutation_invariant():
    rng = np.random.default_rng(15)
    feats = rng.uniform(-1, 1, size=(8, 2))
    ys = rng.uniform(-1, 1, size=8)
    perm = rng.permutation(8)
    train = Dataset(feats, ys)
    test = Dataset(feats[perm], ys[perm])
    rng2 = np.random.default_rng(16)
    other = Dataset(rng2.uniform(-1, 1, size=(6, 2)), rng2.uniform(-1, 1, size=6))
    w = rng.normal(size=2)
    problem = LeastSquares(lam=0.3)
    a = generalization_gap(problem, train, other, w)
    b = generalization_gap(problem, test, other, w)
    assert a == pytest.approx(b, rel=1e-12)


def test_gap_is_mean_loss_difference():
    rng = np.random.default_rng(17)
    train = Dataset(rng.uniform(-1, 1, size=(8, 2)), rng.uniform(-1, 1, size=8))
    test = Dataset(rng.uniform(-1, 1, size=(5, 2)), rng.uniform(-1, 1, size=5))
    w = rng.normal(size=2)
    problem = LeastSquares(lam=0.1)
    got = generalization_gap(problem, train, test, w)
    assert got == pytest.approx(
        abs(mean_loss(problem, w, train) - mean_loss(problem, w, test)), rel=1e-15
    )
    assert got >= 0.0
