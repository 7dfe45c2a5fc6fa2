import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from choroidkit.gp import (
    CovarianceSpec,
    GpModel,
    PosteriorSummary,
    default_bounds,
    kernel_value,
    log_marginal_likelihood,
    optimise_hyperparameters,
    posterior,
    sample_curves,
)

# ---------------------------------------------------------------------------
# Oracles: direct dense-matrix formulas, no factorisation tricks.


def oracle_kernel(kind, sf, sl, xa, xb):
    r = np.abs(np.asarray(xa, float)[:, None] - np.asarray(xb, float)[None, :])
    if kind == "rbf":
        return sf**2 * np.exp(-(r**2) / (2 * sl**2))
    if kind == "matern32":
        a = np.sqrt(3) * r / sl
        return sf**2 * (1 + a) * np.exp(-a)
    a = np.sqrt(5) * r / sl
    return sf**2 * (1 + a + 5 * r**2 / (3 * sl**2)) * np.exp(-a)


def oracle_posterior(kind, sf, sl, sy, xs, ys, xt):
    k_nn = oracle_kernel(kind, sf, sl, xs, xs)
    k_sn = oracle_kernel(kind, sf, sl, xt, xs)
    k_ss = oracle_kernel(kind, sf, sl, xt, xt)
    a_inv = np.linalg.inv(k_nn + sy**2 * np.eye(len(xs)))
    mean = k_sn @ a_inv @ np.asarray(ys, float)
    cov = k_ss - k_sn @ a_inv @ k_sn.T
    return mean, cov


def oracle_lml(kind, sf, sl, sy, xs, ys):
    ys = np.asarray(ys, float)
    a = oracle_kernel(kind, sf, sl, xs, xs) + sy**2 * np.eye(len(xs))
    sign, logdet = np.linalg.slogdet(a)
    assert sign > 0
    return -0.5 * ys @ np.linalg.inv(a) @ ys - 0.5 * logdet - 0.5 * len(xs) * np.log(2 * np.pi)


def random_problem(rng, n_obs=10, n_test=7):
    kind = rng.choice(["rbf", "matern32", "matern52"])
    sf = float(rng.uniform(0.5, 30.0))
    sl = float(rng.uniform(2.0, 80.0))
    sy = float(rng.uniform(0.05, 3.0))
    xs = rng.choice(np.arange(0, 256), size=n_obs, replace=False).astype(float)
    ys = rng.normal(0, sf, size=n_obs)
    xt = np.sort(rng.uniform(0, 255, size=n_test))
    return kind, sf, sl, sy, xs, ys, xt


class TestKernelValue:
    def test_rbf_zero_distance(self):
        cov = CovarianceSpec("rbf", 2.5, 7.0)
        assert kernel_value(cov, 3.0, 3.0) == pytest.approx(6.25)

    def test_matern32_zero_distance(self):
        cov = CovarianceSpec("matern32", 1.7, 4.0)
        assert kernel_value(cov, 0.0, 0.0) == pytest.approx(1.7**2)

    def test_rbf_unit(self):
        cov = CovarianceSpec("rbf", 1.0, 1.0)
        assert kernel_value(cov, 0.0, 1.0) == pytest.approx(np.exp(-0.5))

    def test_matches_oracle_all_kinds(self):
        rng = np.random.default_rng(7)
        for kind in ("rbf", "matern32", "matern52"):
            sf, sl = rng.uniform(0.5, 10, 2)
            cov = CovarianceSpec(kind, sf, sl)
            xa = rng.uniform(0, 100, 6)
            xb = rng.uniform(0, 100, 5)
            got = kernel_value(cov, xa[:, None], xb[None, :])
            np.testing.assert_allclose(got, oracle_kernel(kind, sf, sl, xa, xb), rtol=1e-12)

    def test_rejects_bad_params(self):
        with pytest.raises(ValueError):
            CovarianceSpec("rbf", -1.0, 1.0)
        with pytest.raises(ValueError):
            CovarianceSpec("cubic", 1.0, 1.0)

    @given(
        kind=st.sampled_from(["rbf", "matern32", "matern52"]),
        sf=st.floats(0.1, 50),
        sl=st.floats(0.5, 200),
        seed=st.integers(0, 10_000),
    )
    @settings(max_examples=60, deadline=None)
    def test_psd_on_random_inputs(self, kind, sf, sl, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(0, 300, size=12)
        k = kernel_value(CovarianceSpec(kind, sf, sl), x[:, None], x[None, :])
        eig = np.linalg.eigvalsh(k)
        assert eig.min() >= -1e-8 * np.trace(k)


class TestPosterior:
    def test_no_observations_is_prior(self):
        cov = CovarianceSpec("matern52", 3.0, 10.0)
        xt = np.array([0.0, 5.0, 9.0])
        model = GpModel(cov, 1.0, [], [], xt)
        post = posterior(model)
        np.testing.assert_array_equal(post.mean, np.zeros(3))
        np.testing.assert_allclose(post.cov, oracle_kernel("matern52", 3.0, 10.0, xt, xt), rtol=1e-12)

    def test_single_noiseless_observation_interpolates(self):
        cov = CovarianceSpec("rbf", 2.0, 5.0)
        model = GpModel(cov, 0.0, [10.0], [42.0], [10.0])
        post = posterior(model)
        assert post.mean[0] == pytest.approx(42.0, abs=1e-6)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(3)
        kind, sf, sl, sy, xs, ys, xt = random_problem(rng, n_obs=2, n_test=3)
        model = GpModel(CovarianceSpec(kind, sf, sl), sy, xs, ys, xt)
        post = posterior(model)
        mean, cov = oracle_posterior(kind, sf, sl, sy, xs, ys, xt)
        np.testing.assert_allclose(post.mean, mean, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(post.cov, cov, rtol=1e-8, atol=1e-8)

    def test_variance_never_exceeds_prior(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            kind, sf, sl, sy, xs, ys, xt = random_problem(rng)
            post = posterior(GpModel(CovarianceSpec(kind, sf, sl), sy, xs, ys, xt))
            assert np.diag(post.cov).max() <= sf**2 + 1e-8

    def test_noiseless_interpolation_many_points(self):
        rng = np.random.default_rng(5)
        xs = np.arange(0, 100, 12, dtype=float)
        ys = rng.normal(0, 5, xs.size)
        model = GpModel(CovarianceSpec("matern52", 5.0, 20.0), 0.0, xs, ys, xs)
        post = posterior(model)
        np.testing.assert_allclose(post.mean, ys, atol=1e-6)

    def test_reversion_to_prior_far_away(self):
        cov = CovarianceSpec("rbf", 4.0, 3.0)
        model = GpModel(cov, 0.5, [0.0], [10.0], [500.0])
        post = posterior(model)
        assert abs(post.mean[0]) < 0.01 * 4.0
        assert post.cov[0, 0] == pytest.approx(16.0, rel=0.01)

    def test_duplicate_observations_rejected(self):
        with pytest.raises(ValueError):
            GpModel(CovarianceSpec("rbf", 1.0, 1.0), 1.0, [1.0, 1.0], [0.0, 0.0], [2.0])

    def test_band_half_width(self):
        post = PosteriorSummary(np.zeros(2), np.diag([4.0, 9.0]))
        np.testing.assert_allclose(post.band_half_width, [4.0, 6.0])


class TestSampling:
    def test_zero_cov_returns_mean(self):
        post = PosteriorSummary(np.array([1.0, 2.0, 3.0]), np.zeros((3, 3)))
        s = sample_curves(post, 5, seed=0)
        assert s.shape == (5, 3)
        np.testing.assert_array_equal(s, np.tile([1.0, 2.0, 3.0], (5, 1)))

    def test_deterministic_for_seed(self):
        post = PosteriorSummary(np.zeros(4), oracle_kernel("rbf", 2.0, 3.0, np.arange(4.0), np.arange(4.0)))
        np.testing.assert_array_equal(sample_curves(post, 10, 123), sample_curves(post, 10, 123))
        assert not np.array_equal(sample_curves(post, 10, 123), sample_curves(post, 10, 124))

    def test_sample_mean_approaches_posterior_mean(self):
        xt = np.arange(5.0)
        mean = np.array([0.0, 1.0, -2.0, 3.0, 0.5])
        cov = oracle_kernel("matern32", 1.5, 2.0, xt, xt)
        post = PosteriorSummary(mean, cov)
        s = sample_curves(post, 100_000, seed=42)
        se = np.sqrt(np.diag(cov) / 100_000)
        assert np.all(np.abs(s.mean(axis=0) - mean) <= 3 * se + 1e-12)


class TestLogMarginalLikelihood:
    def test_one_observation_closed_form(self):
        sf, sy = 2.0, 0.3
        model = GpModel(CovarianceSpec("rbf", sf, 5.0), sy, [0.0], [0.0], [0.0])
        expect = -0.5 * np.log(sf**2 + sy**2) - 0.5 * np.log(2 * np.pi)
        assert log_marginal_likelihood(model) == pytest.approx(expect, rel=1e-12)

    def test_zero_y_drops_quadratic_term(self):
        xs = np.array([0.0, 3.0, 7.0])
        model = GpModel(CovarianceSpec("matern52", 2.0, 4.0), 0.5, xs, np.zeros(3), xs)
        a = oracle_kernel("matern52", 2.0, 4.0, xs, xs) + 0.25 * np.eye(3)
        expect = -0.5 * np.linalg.slogdet(a)[1] - 1.5 * np.log(2 * np.pi)
        assert log_marginal_likelihood(model) == pytest.approx(expect, rel=1e-10)

    def test_matches_dense_oracle_random(self):
        rng = np.random.default_rng(19)
        for _ in range(5):
            kind, sf, sl, sy, xs, ys, xt = random_problem(rng, n_obs=5)
            model = GpModel(CovarianceSpec(kind, sf, sl), sy, xs, ys, xt)
            got = log_marginal_likelihood(model)
            assert got == pytest.approx(oracle_lml(kind, sf, sl, sy, xs, ys), rel=1e-8)

    def test_requires_observation(self):
        model = GpModel(CovarianceSpec("rbf", 1.0, 1.0), 1.0, [], [], [0.0])
        with pytest.raises(ValueError):
            log_marginal_likelihood(model)


class TestOptimise:
    def test_lengthscale_recovery_within_factor_two(self):
        rng = np.random.default_rng(0)
        true = CovarianceSpec("rbf", 5.0, 30.0)
        xs = np.arange(0.0, 256.0, 8.0)
        k = oracle_kernel("rbf", 5.0, 30.0, xs, xs) + 1e-8 * np.eye(xs.size)
        ys = np.linalg.cholesky(k) @ rng.standard_normal(xs.size)
        model = GpModel(CovarianceSpec("rbf", 2.0, 10.0), 0.5, xs, ys, xs)
        bounds = default_bounds(256, 256)
        fitted = optimise_hyperparameters(model, bounds, seed=1)
        assert 15.0 <= fitted.cov.sigma_l <= 60.0
        # grid oracle: fitted likelihood must beat every grid point up to tolerance
        grid_best = -np.inf
        for sl in np.geomspace(bounds["sigma_l"][0], bounds["sigma_l"][1], 12):
            for sf in np.geomspace(1.0, 256.0, 8):
                for sy in np.geomspace(1e-3, 10.0, 6):
                    grid_best = max(grid_best, oracle_lml("rbf", sf, sl, sy, xs, ys))
        assert log_marginal_likelihood(fitted) >= grid_best - 1.0

    def test_dense_interpolable_data_drives_noise_down(self):
        xs = np.arange(0.0, 60.0, 2.0)
        ys = 5.0 * np.sin(xs / 15.0)
        model = GpModel(CovarianceSpec("matern52", 3.0, 15.0), 1.0, xs, ys, xs)
        fitted = optimise_hyperparameters(model, default_bounds(100, 60), seed=2)
        assert fitted.noise_sigma <= 0.05

    def test_never_worse_than_input(self):
        rng = np.random.default_rng(9)
        kind, sf, sl, sy, xs, ys, xt = random_problem(rng)
        model = GpModel(CovarianceSpec(kind, sf, sl), sy, xs, ys, xt)
        fitted = optimise_hyperparameters(model, default_bounds(256, 256), seed=3)
        assert log_marginal_likelihood(fitted) >= log_marginal_likelihood(model) - 1e-6

    def test_needs_two_observations(self):
        model = GpModel(CovarianceSpec("rbf", 1.0, 1.0), 1.0, [0.0], [1.0], [0.0])
        with pytest.raises(ValueError):
            optimise_hyperparameters(model, default_bounds(10, 10))


class TestAcceptanceScale:
    def test_fifty_random_problems_match_oracle(self):
        # mirrors the acceptance gate: 50 random 10-point problems, 1e-8 relative
        rng = np.random.default_rng(2024)
        for _ in range(50):
            kind, sf, sl, sy, xs, ys, xt = random_problem(rng)
            post = posterior(GpModel(CovarianceSpec(kind, sf, sl), sy, xs, ys, xt))
            mean, cov = oracle_posterior(kind, sf, sl, sy, xs, ys, xt)
            np.testing.assert_allclose(post.mean, mean, rtol=1e-8, atol=1e-8)
            np.testing.assert_allclose(post.cov, cov, rtol=1e-8, atol=1e-8)
