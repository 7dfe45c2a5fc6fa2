"""Edge tracing by iterated Gaussian-process posterior sampling.

The tracer alternates four steps until one observation occupies every
column bin: sample candidate curves from the current posterior, score
them against the edge map, turn the best curves into a kernel density
over pixels, and accept the best-scoring pixel per bin. The accepted
pixels become the next round's observations. At convergence the kernel
hyperparameters (including the noise level, fixed until then) are
optimised and the posterior mean with a 95% credible band is returned
at every column of the traced span.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from choroidkit.core import BScan, BoundaryTrace, RegionMask, region_from_traces, round_half_away
from choroidkit.gp import (
    CovarianceSpec,
    GpModel,
    default_bounds,
    optimise_hyperparameters,
    posterior,
    sample_curves,
)
from choroidkit.preprocess import EdgeMap, edge_map_lower, edge_map_upper

_LOWER_SEED_OFFSET = 1_000_003  # distinct stream for the second boundary


@dataclass(frozen=True)
class GpetConfig:
    """Tracer settings; kernels default to scan-shaped values when None.

    noise_sigma is the fixed observation noise used during the loop; it
    balances trust in accepted pixels against posterior flexibility.
    """

    cov_upper: CovarianceSpec | None = None
    cov_lower: CovarianceSpec | None = None
    noise_sigma: float = 1.0
    n_curves: int = 500
    keep_fraction: float = 0.10
    delta_x: int = 10
    seed: int = 42
    kde_truncation_radius: int = 3
    relative_threshold_decrement: bool = True

    def __post_init__(self):
        if self.n_curves < 10:
            raise ValueError("n_curves must be >= 10")
        if not 0 < self.keep_fraction <= 1:
            raise ValueError("keep_fraction must be in (0, 1]")
        if self.delta_x < 1:
            raise ValueError("delta_x must be >= 1")
        if self.kde_truncation_radius < 1:
            raise ValueError("kde_truncation_radius must be >= 1")

    def cov_for(self, target: str, shape) -> CovarianceSpec:
        m, n = shape
        if target == "upper":
            return self.cov_upper or CovarianceSpec("matern52", m / 10.0, 2.0 * n / 3.0)
        return self.cov_lower or CovarianceSpec("matern52", m / 4.0, n / 2.0)


@dataclass(frozen=True)
class TraceResult:
    trace: BoundaryTrace
    observations: np.ndarray  # (k, 2) int array of (col, row), sorted by column
    iterations: int
    optimised_cov: CovarianceSpec
    optimised_noise: float

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=int)
        obs = obs.copy()
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)


def _edge_values_at(values: np.ndarray, rows, cols) -> np.ndarray:
    """Bilinear interpolation of the edge map; out-of-bounds reads 0."""
    return ndimage.map_coordinates(
        values, np.vstack([np.ravel(rows), np.ravel(cols)]), order=1, mode="constant", cval=0.0
    ).reshape(np.shape(rows))


def _simpson(y: np.ndarray, axis=-1) -> np.ndarray:
    from scipy.integrate import simpson

    return simpson(y, dx=1.0, axis=axis)


def _score_curve_batch(curve_rows: np.ndarray, cols: np.ndarray, edge: EdgeMap) -> np.ndarray:
    """Mean edge response along each curve: line integral over arc length."""
    rows = np.atleast_2d(curve_rows)
    n = rows.shape[1]
    if n < 2:
        raise ValueError("zero arc length")
    g = _edge_values_at(edge.values, rows, np.broadcast_to(cols, rows.shape))
    # finite-difference speed |r'(t)| with t the column parameter
    dy = np.gradient(rows, axis=1)
    speed = np.sqrt(1.0 + dy**2)
    num = _simpson(g * speed, axis=1)
    den = _simpson(speed, axis=1)
    if np.any(den <= 0):
        raise ValueError("zero arc length")
    return num / den


def score_curve(curve_rows, cols, edge: EdgeMap) -> float:
    """Score one curve: integral of edge response over the curve divided by its length."""
    return float(_score_curve_batch(np.asarray(curve_rows, dtype=float), np.asarray(cols, dtype=float), edge)[0])


def frequency_density(curve_rows, cols, scores, shape, truncation_radius: int = 3) -> np.ndarray:
    """Score-weighted Gaussian kernel density of curve points, min-max normalised.

    Every curve point deposits a unit-length-scale isotropic Gaussian,
    truncated to a square window of the given radius, weighted by its
    curve's share of the total score. Zero total score falls back to
    equal weights.
    """
    rows = np.atleast_2d(np.asarray(curve_rows, dtype=float))
    scores = np.atleast_1d(np.asarray(scores, dtype=float))
    if rows.shape[0] != scores.size:
        raise ValueError("one score per curve required")
    m, n = int(shape[0]), int(shape[1])
    total = scores.sum()
    weights = scores / total if total > 0 else np.full(scores.size, 1.0 / scores.size)

    cols = np.asarray(cols, dtype=float)
    pt_rows = rows.ravel()
    pt_cols = np.broadcast_to(cols, rows.shape).ravel()
    pt_w = np.repeat(weights, rows.shape[1])

    phi = np.zeros((m, n), dtype=float)
    r = truncation_radius
    base_row = np.floor(pt_rows).astype(int)
    base_col = np.floor(pt_cols).astype(int)
    norm = 1.0 / (2.0 * np.pi)
    for dy in range(-r, r + 2):
        py = base_row + dy
        off_y = py - pt_rows
        for dx in range(-r, r + 2):
            px = base_col + dx
            off_x = px - pt_cols
            inside = (
                (np.abs(off_y) <= r)
                & (np.abs(off_x) <= r)
                & (py >= 0)
                & (py < m)
                & (px >= 0)
                & (px < n)
            )
            if not inside.any():
                continue
            contrib = pt_w[inside] * norm * np.exp(-0.5 * (off_y[inside] ** 2 + off_x[inside] ** 2))
            np.add.at(phi, (py[inside], px[inside]), contrib)
    hi = phi.max()
    lo = phi.min()
    if hi - lo > 0:
        phi = (phi - lo) / (hi - lo)
    return phi


def score_pixels(phi: np.ndarray, edge: EdgeMap) -> np.ndarray:
    """Combine curve density and edge response with equal weight."""
    g = edge.values
    if phi.shape != g.shape:
        raise ValueError("density and edge map shapes differ")
    return (phi * g + phi + g) / 3.0


def _bin_index(col, c_lo, delta_x):
    return (np.asarray(col) - c_lo) // delta_x


def accept_discard(scores, prev_obs, span, delta_x, pinned, relative_decrement: bool = True):
    """Select at most one observation per column bin by adaptive thresholding.

    The threshold starts at 1 and is lowered (by 1% of its value, or an
    absolute 0.01 step) until the per-bin selection grows beyond
    prev_obs. Previously accepted pixels compete at their current
    scores; pinned pixels are always retained. Below 1e-12 the
    threshold snaps to zero, which admits every pixel, so the loop
    always terminates.
    """
    scores = np.asarray(scores, dtype=float)
    prev = {(int(c), int(r)) for c, r in np.atleast_2d(np.asarray(prev_obs, dtype=int)).reshape(-1, 2)} if len(prev_obs) else set()
    pinned_set = {(int(c), int(r)) for c, r in np.atleast_2d(np.asarray(pinned, dtype=int)).reshape(-1, 2)} if len(pinned) else set()
    if not pinned_set <= prev:
        raise ValueError("pinned pixels must be a subset of prev_obs")
    c_lo, c_hi = int(span[0]), int(span[1])
    width = c_hi - c_lo + 1
    n_bins = math.ceil(width / delta_x)

    slab = scores[:, c_lo : c_hi + 1]
    bin_of_col = _bin_index(np.arange(c_lo, c_hi + 1), c_lo, delta_x)
    bin_max = np.full(n_bins, -np.inf)
    col_max = slab.max(axis=0)
    np.maximum.at(bin_max, bin_of_col, col_max)

    pinned_by_bin = {}
    for c, r in sorted(pinned_set):
        pinned_by_bin.setdefault(int(_bin_index(c, c_lo, delta_x)), []).append((c, r))
    prev_by_bin = {}
    for c, r in sorted(prev):
        prev_by_bin.setdefault(int(_bin_index(c, c_lo, delta_x)), []).append((c, r))

    free_bins = np.array([b for b in range(n_bins) if b not in pinned_by_bin], dtype=int)
    has_prev = np.array([b in prev_by_bin for b in free_bins], dtype=bool)
    n_pinned_total = len(pinned_set)

    def count_at(t):
        filled = (bin_max[free_bins] >= t) | has_prev
        return n_pinned_total + int(filled.sum())

    t = 1.0
    while count_at(t) <= len(prev) and t > 0.0:
        t = t * 0.99 if relative_decrement else t - 0.01
        if t < 1e-12:
            t = 0.0

    selection = list(pinned_set)
    for b in free_bins:
        lo = c_lo + b * delta_x
        hi = min(lo + delta_x, c_hi + 1)
        if bin_max[b] >= t:
            block = scores[:, lo:hi]
            target = bin_max[b]
            cols_hit = np.where(block.max(axis=0) == target)[0]
            c = int(cols_hit[0]) + lo
            r = int(np.argmax(scores[:, c] == target))
            selection.append((c, r))
        elif b in prev_by_bin:
            cand = prev_by_bin[b]
            best = max(cand, key=lambda p: (scores[p[1], p[0]], -p[0], -p[1]))
            # max with negated coords keeps the lowest column/row on ties
            selection.append(best)
    selection = sorted(set(selection))
    return np.array(selection, dtype=int).reshape(-1, 2)


def _validate_points(points, scan: BScan, label):
    pts = []
    for p in points:
        c, r = (p.col, p.row) if hasattr(p, "col") else (p[0], p[1])
        ci, ri = int(round_half_away(c)), int(round_half_away(r))
        if not (0 <= ci < scan.n_cols and 0 <= ri < scan.n_rows):
            raise ValueError(f"{label} point ({c}, {r}) outside image")
        pts.append((ci, ri))
    return pts


def trace_boundary(scan: BScan, edge: EdgeMap, endpoints, guides=(), config: GpetConfig | None = None) -> TraceResult:
    """Trace one boundary between two endpoint pixels.

    endpoints: two (col, row) points with distinct columns; guides:
    optional extra points strictly between the endpoint columns. Both
    are pinned: they stay in the observation set for the whole run.
    """
    config = config or GpetConfig()
    if edge.values.shape != scan.pixels.shape:
        raise ValueError("edge map and scan shapes differ")
    eps = _validate_points(endpoints, scan, "endpoint")
    if len(eps) != 2 or eps[0][0] == eps[1][0]:
        raise ValueError("exactly two endpoints with distinct columns required")
    eps = sorted(eps)
    c_lo, c_hi = eps[0][0], eps[1][0]
    gds = _validate_points(guides, scan, "guide")
    for c, _ in gds:
        if not c_lo < c < c_hi:
            raise ValueError("guides must lie strictly between the endpoint columns")

    span = (c_lo, c_hi)
    width = c_hi - c_lo + 1
    n_bins = math.ceil(width / config.delta_x)
    cols = np.arange(c_lo, c_hi + 1, dtype=float)
    cov = config.cov_for(edge.target, scan.pixels.shape)
    pinned = sorted(set(eps) | set(gds))
    pinned_cols = [c for c, _ in pinned]
    if len(set(pinned_cols)) != len(pinned_cols):
        raise ValueError("endpoints and guides must occupy distinct columns")
    obs = np.array(pinned, dtype=int).reshape(-1, 2)

    n_keep = max(1, int(round(config.keep_fraction * config.n_curves)))
    iterations = 0
    while obs.shape[0] < n_bins:
        iterations += 1
        model = GpModel(cov, config.noise_sigma, obs[:, 0].astype(float), obs[:, 1].astype(float), cols)
        post = posterior(model)
        curves = sample_curves(post, config.n_curves, seed=config.seed + iterations)
        curve_scores = _score_curve_batch(curves, cols, edge)
        order = np.argsort(-curve_scores, kind="stable")[:n_keep]
        phi = frequency_density(curves[order], cols, curve_scores[order], scan.pixels.shape, config.kde_truncation_radius)
        s = score_pixels(phi, edge)
        new_obs = accept_discard(s, obs, span, config.delta_x, pinned, config.relative_threshold_decrement)
        if new_obs.shape[0] <= obs.shape[0]:
            raise RuntimeError("observation set failed to grow")
        obs = new_obs

    model = GpModel(cov, config.noise_sigma, obs[:, 0].astype(float), obs[:, 1].astype(float), cols)
    fitted = optimise_hyperparameters(model, default_bounds(scan.n_rows, scan.n_cols), seed=config.seed)
    post = posterior(fitted)
    half = post.band_half_width
    kind = "rpe_choroid" if edge.target == "upper" else "choroid_sclera"
    trace = BoundaryTrace(kind, c_lo, post.mean, post.mean - half, post.mean + half)
    return TraceResult(trace, obs, iterations, fitted.cov, fitted.noise_sigma)


def config_for_target(config: GpetConfig, target: str) -> GpetConfig:
    """Per-boundary tracer settings: the lower boundary gets its own seed stream.

    Tracing the boundaries one at a time with the configs this returns is
    equivalent to a single :func:`trace_choroid` call.
    """
    if target == "upper":
        return config
    if target != "lower":
        raise ValueError("target must be 'upper' or 'lower'")
    return replace(config, seed=config.seed + _LOWER_SEED_OFFSET)


def trace_choroid(
    scan: BScan,
    upper_endpoints,
    lower_endpoints,
    guides_upper=(),
    guides_lower=(),
    config: GpetConfig | None = None,
):
    """Trace both boundaries and rasterise the region between them."""
    config = config or GpetConfig()
    if sorted(_validate_points(upper_endpoints, scan, "endpoint")) == sorted(
        _validate_points(lower_endpoints, scan, "endpoint")
    ):
        raise ValueError("degenerate endpoints: upper and lower boundaries coincide")
    upper = trace_boundary(scan, edge_map_upper(scan), upper_endpoints, guides_upper, config)
    lower_config = config_for_target(config, "lower")
    lower = trace_boundary(scan, edge_map_lower(scan), lower_endpoints, guides_lower, lower_config)
    region = region_from_traces(upper.trace, lower.trace, scan.pixels.shape)
    return upper, lower, region
