"""One-dimensional Gaussian-process regression (column -> row).

Covariance functions, posterior conditioning, sampling, log marginal
likelihood, and bounded multi-start hyperparameter optimisation. All
randomness flows through explicit integer seeds.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

COV_KINDS = ("rbf", "matern32", "matern52")

_JITTER_START = 1e-10
_JITTER_STOP = 1e-4


@dataclass(frozen=True)
class CovarianceSpec:
    """Stationary covariance: amplitude sigma_f, length-scale sigma_l."""

    kind: str
    sigma_f: float
    sigma_l: float

    def __post_init__(self):
        if self.kind not in COV_KINDS:
            raise ValueError(f"kind must be one of {COV_KINDS}")
        if not (self.sigma_f > 0 and self.sigma_l > 0):
            raise ValueError("hyperparameters must be positive")


@dataclass(frozen=True)
class GpModel:
    """Observations plus test inputs under a covariance and noise level."""

    cov: CovarianceSpec
    noise_sigma: float
    obs_x: np.ndarray
    obs_y: np.ndarray
    test_x: np.ndarray

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        for name in ("obs_x", "obs_y", "test_x"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.obs_x.shape != self.obs_y.shape:
            raise ValueError("obs_x and obs_y must have equal length")
        if self.obs_x.size and np.unique(self.obs_x).size != self.obs_x.size:
            raise ValueError("observation x-values must be unique")


@dataclass(frozen=True)
class PosteriorSummary:
    """Posterior mean and dense covariance over the test inputs."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("cov must be square over the test inputs")
        if not np.allclose(cov, cov.T, atol=1e-8):
            raise ValueError("cov must be symmetric")
        if cov.size and np.diag(cov).min() < -1e-8:
            raise ValueError("cov diagonal below numerical floor")
        for name, arr in (("mean", mean), ("cov", cov)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def band_half_width(self):
        """Half-width of the 95% credible band: 2 posterior standard deviations."""
        return 2.0 * np.sqrt(np.maximum(np.diag(self.cov), 0.0))


def kernel_value(cov: CovarianceSpec, x, x2):
    """Covariance k(x, x2) under the selected stationary kernel."""
    r = np.abs(np.asarray(x, dtype=float) - np.asarray(x2, dtype=float))
    s2 = cov.sigma_f**2
    if cov.kind == "rbf":
        return s2 * np.exp(-(r**2) / (2.0 * cov.sigma_l**2))
    if cov.kind == "matern32":
        a = np.sqrt(3.0) * r / cov.sigma_l
        return s2 * (1.0 + a) * np.exp(-a)
    a = np.sqrt(5.0) * r / cov.sigma_l
    return s2 * (1.0 + a + 5.0 * r**2 / (3.0 * cov.sigma_l**2)) * np.exp(-a)


def _kernel_matrix(cov: CovarianceSpec, xa, xb):
    return kernel_value(cov, np.asarray(xa, dtype=float)[:, None], np.asarray(xb, dtype=float)[None, :])


def _cholesky_with_jitter(a: np.ndarray) -> np.ndarray:
    """Cholesky factor of a, escalating relative jitter before giving up."""
    mean_diag = float(np.mean(np.diag(a))) if a.size else 0.0
    jitter = 0.0
    while True:
        try:
            return np.linalg.cholesky(a + jitter * np.eye(a.shape[0]))
        except np.linalg.LinAlgError:
            if jitter == 0.0:
                jitter = _JITTER_START * (mean_diag if mean_diag > 0 else 1.0)
            else:
                jitter *= 10.0
            if jitter > _JITTER_STOP * (mean_diag if mean_diag > 0 else 1.0):
                raise np.linalg.LinAlgError("ill-conditioned kernel matrix")


def posterior(model: GpModel) -> PosteriorSummary:
    """Posterior mean and covariance at the test inputs.

    With no observations this is the prior: zero mean, covariance
    K(test, test).
    """
    k_ss = _kernel_matrix(model.cov, model.test_x, model.test_x)
    n = model.obs_x.size
    if n == 0:
        return PosteriorSummary(np.zeros(model.test_x.size), k_ss)
    k_nn = _kernel_matrix(model.cov, model.obs_x, model.obs_x)
    k_sn = _kernel_matrix(model.cov, model.test_x, model.obs_x)
    a = k_nn + model.noise_sigma**2 * np.eye(n)
    chol = _cholesky_with_jitter(a)
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, model.obs_y))
    v = np.linalg.solve(chol, k_sn.T)
    mean = k_sn @ alpha
    cov = k_ss - v.T @ v
    cov = 0.5 * (cov + cov.T)
    return PosteriorSummary(mean, cov)


def sample_curves(post: PosteriorSummary, count: int, seed: int) -> np.ndarray:
    """Draw `count` curves from the posterior; rows are curves.

    A zero covariance matrix returns the mean exactly; otherwise a small
    jitter stabilises the factorisation, as the noise term does in the
    exact-observation limit.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    n = post.mean.size
    if not np.any(post.cov):
        return np.tile(post.mean, (count, 1))
    chol = _cholesky_with_jitter(post.cov)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, n))
    return post.mean[None, :] + z @ chol.T


def log_marginal_likelihood(model: GpModel) -> float:
    """log p(y | X, theta) under the Gaussian observation model."""
    n = model.obs_x.size
    if n < 1:
        raise ValueError("log marginal likelihood needs at least one observation")
    k_nn = _kernel_matrix(model.cov, model.obs_x, model.obs_x)
    a = k_nn + model.noise_sigma**2 * np.eye(n)
    chol = _cholesky_with_jitter(a)
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, model.obs_y))
    return float(
        -0.5 * model.obs_y @ alpha - np.sum(np.log(np.diag(chol))) - 0.5 * n * np.log(2.0 * np.pi)
    )


def default_bounds(n_rows: int, n_cols: int) -> dict:
    """Hyperparameter search bounds scaled to the image extent."""
    return {
        "sigma_f": (1.0, float(n_rows)),
        "sigma_l": (n_cols / 50.0, 2.0 * float(n_cols)),
        "sigma_y": (1e-3, 10.0),
    }


def optimise_hyperparameters(model: GpModel, bounds: dict, n_starts: int = 8, seed: int = 0) -> GpModel:
    """Maximise the log marginal likelihood over (sigma_f, sigma_l, sigma_y).

    Multi-start Nelder-Mead in log-parameter space, clipped to bounds.
    Returns the best model found, never worse than the input; if every
    search fails a warning is issued and the input model returned.
    """
    if model.obs_x.size < 2:
        raise ValueError("hyperparameter optimisation needs at least 2 observations")
    names = ("sigma_f", "sigma_l", "sigma_y")
    lo = np.log([bounds[k][0] for k in names])
    hi = np.log([bounds[k][1] for k in names])

    def rebuild(log_params):
        p = np.exp(np.clip(log_params, lo, hi))
        return replace(model, cov=replace(model.cov, sigma_f=p[0], sigma_l=p[1]), noise_sigma=p[2])

    def objective(log_params):
        try:
            return -log_marginal_likelihood(rebuild(log_params))
        except np.linalg.LinAlgError:
            return np.inf

    start0 = np.log(
        np.clip([model.cov.sigma_f, model.cov.sigma_l, max(model.noise_sigma, bounds["sigma_y"][0])], np.exp(lo), np.exp(hi))
    )
    rng = np.random.default_rng(seed)
    starts = [start0] + [rng.uniform(lo, hi) for _ in range(n_starts - 1)]

    best_logp = None
    best_value = np.inf
    for s in starts:
        try:
            res = optimize.minimize(objective, s, method="Nelder-Mead", options={"xatol": 1e-4, "fatol": 1e-6, "maxiter": 400})
        except Exception:
            continue
        if np.isfinite(res.fun) and res.fun < best_value:
            best_value = res.fun
            best_logp = res.x
    if best_logp is None:
        warnings.warn("hyperparameter optimisation failed; keeping input model", RuntimeWarning)
        return model
    f0 = objective(start0)
    if np.isfinite(f0) and f0 < best_value:
        best_logp = start0
    return rebuild(best_logp)
