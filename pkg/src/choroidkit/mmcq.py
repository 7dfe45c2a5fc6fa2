"""Choroidal vessel segmentation by multi-scale median-cut quantisation.

The pipeline enhances the choroidal region of a B-scan at several patch
scales derived from the region's average pixel thickness, merges the
scales by a pixel-wise minimum, then clusters the enhanced values with
median-cut quantisation and keeps the darkest clusters as vessel.  The
choriocapillaris strip under the upper boundary and two depth-restricted
sub-bands are segmented separately and unioned into the final mask.

A Niblack local-threshold baseline and a brightness/contrast
majority-vote wrapper are provided for comparison experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BoundaryTrace, BScan, RegionMask, VesselMask, round_half_away
from .preprocess import clahe, median_filter, shadow_compensate

__all__ = [
    "MmcqConfig",
    "QuantisedPatch",
    "median_cut",
    "estimate_K",
    "enhancement_weight",
    "enhance_patch",
    "average_pixel_thickness",
    "patch_sizes",
    "tile_edges",
    "enhance_choroid",
    "choriocapillaris_mask",
    "depth_band_mask",
    "segment_vessels",
    "niblack_segment",
    "fit_gamma",
    "brightness_contrast_variants",
    "majority_vote_vessels",
]


@dataclass(frozen=True)
class MmcqConfig:
    """Parameters of the vessel segmentation pipeline.

    Parameters
    ----------
    K : int
        Nominal number of median-cut clusters for the vessel clustering
        stage.  Fewer clusters are produced when the data has fewer
        distinct values.
    k_vessel : int
        Nominal number of darkest clusters labelled vessel out of
        ``K``.  When fewer clusters are realised the kept count is
        scaled proportionally (never below one).
    patch_divisors : tuple of float
        Divisors of the average pixel thickness that set the square
        patch sizes of the enhancement scales, strictly decreasing so
        the scales are ordered fine to coarse.
    depth_fractions : tuple of float
        Fractions of the average pixel thickness bounding the
        depth-restricted sub-bands that receive their own clustering
        pass.
    choriocapillaris_microns : float
        Physical depth of the choriocapillaris strip under the upper
        boundary, converted to whole rows with the scan's axial scale.
    """

    K: int = 20
    k_vessel: int = 11
    patch_divisors: tuple = (10.0, 5.0, 2.0)
    depth_fractions: tuple = (1.0 / 3.0, 3.0 / 5.0)
    choriocapillaris_microns: float = 10.0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not 1 <= self.k_vessel <= self.K:
            raise ValueError("k_vessel must be in [1, K]")
        if len(self.patch_divisors) < 1:
            raise ValueError("at least one patch divisor required")
        if any(d <= 0 for d in self.patch_divisors):
            raise ValueError("patch divisors must be positive")
        if any(a <= b for a, b in zip(self.patch_divisors, self.patch_divisors[1:])):
            raise ValueError("patch divisors must be strictly decreasing")
        if any(f <= 0 for f in self.depth_fractions):
            raise ValueError("depth fractions must be positive")
        if self.choriocapillaris_microns < 0:
            raise ValueError("choriocapillaris_microns must be >= 0")


@dataclass(frozen=True)
class QuantisedPatch:
    """Result of median-cut quantisation of a 1-D value multiset.

    Clusters are contiguous intensity ranges in ascending order.
    ``levels[j]`` is the nearest-rank median of cluster ``j`` and acts
    as its quantisation level, ``upper_edges[j]`` is the largest value
    in cluster ``j``, and ``counts[j]`` its population.
    """

    levels: np.ndarray
    upper_edges: np.ndarray
    counts: np.ndarray

    @property
    def k(self):
        """Number of realised clusters."""
        return self.levels.size

    def assign(self, values):
        """Cluster index of each value (values between clusters join the one above)."""
        idx = np.searchsorted(self.upper_edges, np.asarray(values, dtype=float), side="left")
        return np.minimum(idx, self.k - 1)

    def map(self, values):
        """Replace each value with its cluster's quantisation level."""
        return self.levels[self.assign(values)]

    def floor_lut(self):
        """Lookup table over 0..255 mapping i to the largest level <= i, else 0."""
        idx = np.searchsorted(self.levels, np.arange(256.0), side="right") - 1
        out = self.levels[np.maximum(idx, 0)].astype(float)
        out[idx < 0] = 0.0
        return out


def _nearest_rank_median(sorted_values, start, count):
    # nearest-rank median: element at ceil(count / 2) in 1-based rank
    return sorted_values[start + (count + 1) // 2 - 1]


def median_cut(values, n_clusters):
    """Quantise a 1-D multiset into at most ``n_clusters`` contiguous clusters.

    Starting from one cluster spanning all values, the cluster with the
    largest value range (ties: larger population, then lower intensity)
    is split at its nearest-rank median, values less than or equal to
    the median going left.  When that rule would leave the right half
    empty the split is retried strictly below the median.  Clusters
    with a single distinct value cannot be split; splitting stops when
    ``n_clusters`` clusters exist or no cluster is splittable.

    Parameters
    ----------
    values : array_like
        Non-empty 1-D collection of finite values.
    n_clusters : int
        Maximum number of clusters, at least 1.

    Returns
    -------
    QuantisedPatch
    """
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        raise ValueError("median_cut requires at least one value")
    if not np.all(np.isfinite(vals)):
        raise ValueError("median_cut requires finite values")
    if n_clusters < 1:
        raise ValueError("n_clusters must be >= 1")
    sv = np.sort(vals)

    # clusters as half-open index ranges [i0, i1) into sv
    clusters = [(0, sv.size)]
    while len(clusters) < n_clusters:
        best = None
        best_key = None
        for ci, (i0, i1) in enumerate(clusters):
            span = sv[i1 - 1] - sv[i0]
            if span <= 0:
                continue
            key = (-span, -(i1 - i0), sv[i0])
            if best_key is None or key < best_key:
                best_key = key
                best = ci
        if best is None:
            break
        i0, i1 = clusters[best]
        med = _nearest_rank_median(sv, i0, i1 - i0)
        cut = i0 + np.searchsorted(sv[i0:i1], med, side="right")
        if cut == i1:
            cut = i0 + np.searchsorted(sv[i0:i1], med, side="left")
        clusters[best : best + 1] = [(i0, cut), (cut, i1)]

    clusters.sort()
    levels = np.array([_nearest_rank_median(sv, i0, i1 - i0) for i0, i1 in clusters])
    upper_edges = np.array([sv[i1 - 1] for i0, i1 in clusters])
    counts = np.array([i1 - i0 for i0, i1 in clusters])
    return QuantisedPatch(levels=levels, upper_edges=upper_edges, counts=counts)


_K_BANDS = [(0.0, 51.0), (51.0, 102.0), (102.0, 153.0), (153.0, 204.0), (204.0, 255.0)]


def estimate_K(values):
    """Cluster-count estimate from the trimmed intensity range of a patch.

    The 0.5th and 99.5th nearest-rank percentiles bound the patch's
    effective range; the estimate is the number of the five equal
    intensity bands [0, 51), ..., [204, 255] that range intersects,
    clamped to [2, 5].
    """
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        raise ValueError("estimate_K requires at least one value")
    sv = np.sort(vals)
    n = sv.size
    lo = sv[max(int(np.ceil(0.005 * n)) - 1, 0)]
    hi = sv[int(np.ceil(0.995 * n)) - 1]
    hits = 0
    for a, b in _K_BANDS[:-1]:
        if lo < b and hi >= a:
            hits += 1
    a, b = _K_BANDS[-1]
    if lo <= b and hi >= a:
        hits += 1
    return int(np.clip(hits, 2, 5))


def enhancement_weight(sigma_d):
    """Blend weight of the equalisation term, a sigmoid in the contrast ratio.

    ``w = 1 / (1 + exp(-2 pi (sigma_d - 1/2)))``: 1/2 exactly at
    ``sigma_d = 1/2``, approaching 0 for flat patches and 1 for patches
    at least as dispersed as the whole region.
    """
    return 1.0 / (1.0 + np.exp(-2.0 * np.pi * (sigma_d - 0.5)))


def _patch_lut(patch_values, image_sigma):
    """256-entry lookup table enhancing one patch's intensities.

    The table blends a histogram-equalisation map of the quantised
    patch with the raw quantisation map, weighted by the patch's
    contrast relative to the whole region.
    """
    vals = np.asarray(patch_values, dtype=float).ravel()
    k_p = estimate_K(vals)
    quant = median_cut(vals, k_p)

    # equalisation CDF of the quantised patch, anchored so the darkest
    # occupied level maps to 0 and the top intensity to 255
    hist = np.zeros(256)
    np.add.at(hist, np.clip(quant.levels.astype(int), 0, 255), quant.counts)
    cdf = np.cumsum(hist)
    n = vals.size
    denom = n - cdf[0]
    if denom > 0:
        cdf_norm = (cdf - cdf[0]) * (255.0 / denom)
    else:
        cdf_norm = np.zeros(256)

    if image_sigma > 0:
        sigma_d = float(np.std(vals)) / image_sigma
    else:
        sigma_d = 0.0
    w = enhancement_weight(sigma_d)
    return w * cdf_norm + (1.0 - w) * quant.floor_lut()


def enhance_patch(patch_values, image_sigma):
    """Enhanced values of one patch (lookup of its own blended table).

    Parameters
    ----------
    patch_values : array_like
        Intensities of the patch's region pixels, in 0..255.
    image_sigma : float
        Intensity standard deviation of the whole region, the reference
        for the patch's contrast ratio.
    """
    vals = np.asarray(patch_values, dtype=float).ravel()
    lut = _patch_lut(vals, image_sigma)
    return lut[np.clip(round_half_away(vals), 0, 255)]


def average_pixel_thickness(region):
    """Mean per-column pixel distance between the region's extremal rows.

    Columns with no region pixels are excluded.  For a region spanning
    rows ``r0..r1`` in a column the contribution is ``r1 - r0``.
    """
    px = region.pixels if isinstance(region, RegionMask) else np.asarray(region, dtype=bool)
    occupied = px.any(axis=0)
    if not occupied.any():
        raise ValueError("empty region")
    top = px.argmax(axis=0)
    bottom = px.shape[0] - 1 - px[::-1].argmax(axis=0)
    return float(np.mean((bottom - top)[occupied]))


def patch_sizes(thickness, divisors=(10.0, 5.0, 2.0)):
    """Square patch sizes for the enhancement scales.

    Each size is the average pixel thickness divided by one divisor,
    rounded half away from zero and floored at 2.
    """
    return tuple(max(2, int(round_half_away(thickness / d))) for d in divisors)


def tile_edges(length, size):
    """Patch grid edges along one axis of the region bounding box.

    Full tiles of ``size`` are laid from 0; a remainder of at least
    half a tile becomes its own ragged tile, a smaller one is merged
    into the last full tile.  An extent below ``size`` is one tile.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if size < 1:
        raise ValueError("size must be >= 1")
    if length <= size:
        return np.array([0, length])
    n_full = length // size
    rem = length - n_full * size
    edges = list(range(0, n_full * size + 1, size))
    if rem >= size / 2:
        edges.append(length)
    else:
        edges[-1] = length
    return np.array(edges)


def _axis_blend(centres, coords):
    # bilinear weights between neighbouring tile centres, clamped at the borders
    centres = np.asarray(centres, dtype=float)
    coords = np.asarray(coords, dtype=float)
    i0 = np.clip(np.searchsorted(centres, coords, side="right") - 1, 0, centres.size - 1)
    i1 = np.minimum(i0 + 1, centres.size - 1)
    span = centres[i1] - centres[i0]
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(span > 0, (coords - centres[i0]) / np.where(span > 0, span, 1.0), 0.0)
    return i0, i1, np.clip(w, 0.0, 1.0)


def _preprocess_region(scan, region):
    """Preprocessed crop of the region bounding box and its bounds.

    Shadow compensation, a 3x3 median filter, and CLAHE are applied to
    the bounding-box crop before any quantisation.
    """
    rows = np.flatnonzero(region.pixels.any(axis=1))
    cols = np.flatnonzero(region.pixels.any(axis=0))
    if rows.size == 0:
        raise ValueError("empty region")
    r0, r1 = int(rows[0]), int(rows[-1])
    c0, c1 = int(cols[0]), int(cols[-1])
    crop = scan.pixels[r0 : r1 + 1, c0 : c1 + 1]
    crop_scan = BScan(
        pixels=crop,
        axial_scale=scan.axial_scale,
        lateral_scale=scan.lateral_scale,
        eye=scan.eye,
        id=scan.id,
    )
    compensated = shadow_compensate(crop_scan).pixels
    smoothed = median_filter(compensated, 3)
    tiles = max(1, min(8, smoothed.shape[0], smoothed.shape[1]))
    equalised = clahe(smoothed, tiles=tiles, clip_limit=2.0)
    return equalised, (r0, r1, c0, c1)


def _enhance_one_scale(pre, reg, size, image_sigma):
    """Blended patch enhancement of one scale over the bounding-box crop.

    Returns a float array over the crop; values are meaningful at
    region pixels only.
    """
    h, w = pre.shape
    ye = tile_edges(h, size)
    xe = tile_edges(w, size)
    n_ty = ye.size - 1
    n_tx = xe.size - 1
    centres_y = (ye[:-1] + ye[1:] - 1) / 2.0
    centres_x = (xe[:-1] + xe[1:] - 1) / 2.0

    luts = np.zeros((n_ty, n_tx, 256))
    valid = np.zeros((n_ty, n_tx), dtype=bool)
    for ty in range(n_ty):
        for tx in range(n_tx):
            block_reg = reg[ye[ty] : ye[ty + 1], xe[tx] : xe[tx + 1]]
            block = pre[ye[ty] : ye[ty + 1], xe[tx] : xe[tx + 1]]
            vals = block[block_reg]
            if vals.size == 0:
                continue
            luts[ty, tx] = _patch_lut(vals.astype(float), image_sigma)
            valid[ty, tx] = True

    ry0, ry1, wy = _axis_blend(centres_y, np.arange(h))
    cx0, cx1, wx = _axis_blend(centres_x, np.arange(w))
    idx = pre.astype(int)

    out = np.zeros(pre.shape)
    total = np.zeros(pre.shape)
    corners = (
        (ry0, cx0, (1.0 - wy)[:, None] * (1.0 - wx)[None, :]),
        (ry0, cx1, (1.0 - wy)[:, None] * wx[None, :]),
        (ry1, cx0, wy[:, None] * (1.0 - wx)[None, :]),
        (ry1, cx1, wy[:, None] * wx[None, :]),
    )
    for ri, ci, wgt in corners:
        tile_r = np.broadcast_to(ri[:, None], pre.shape)
        tile_c = np.broadcast_to(ci[None, :], pre.shape)
        wgt = wgt * valid[tile_r, tile_c]
        out += wgt * luts[tile_r, tile_c, idx]
        total += wgt
    safe = total > 0
    out[safe] /= total[safe]
    out[~safe] = np.nan
    return out


def enhance_choroid(scan, region, config=None):
    """Multi-scale contrast enhancement of the choroidal region.

    The region bounding box is shadow-compensated, median-filtered and
    CLAHE-equalised, then enhanced independently at each patch scale
    from :func:`patch_sizes`.  Per-patch lookup tables are blended
    bilinearly between patch centres (patches without region pixels are
    skipped and the blend reweighted), and the scales are merged by a
    pixel-wise minimum so vessel interiors stay dark.

    Parameters
    ----------
    scan : BScan
    region : RegionMask
    config : MmcqConfig, optional

    Returns
    -------
    ndarray
        Float array shaped like the scan, enhanced values at region
        pixels and NaN elsewhere.
    """
    cfg = config if config is not None else MmcqConfig()
    if region.pixels.shape != scan.pixels.shape:
        raise ValueError("region and scan must share a shape")
    pre, (r0, r1, c0, c1) = _preprocess_region(scan, region)
    reg = region.pixels[r0 : r1 + 1, c0 : c1 + 1]

    thickness = average_pixel_thickness(region)
    sizes = patch_sizes(thickness, cfg.patch_divisors)
    image_sigma = float(np.std(pre[reg].astype(float)))

    merged = None
    for size in dict.fromkeys(sizes):
        scale = _enhance_one_scale(pre, reg, size, image_sigma)
        merged = scale if merged is None else np.fmin(merged, scale)

    out = np.full(scan.pixels.shape, np.nan)
    block = out[r0 : r1 + 1, c0 : c1 + 1]
    block[reg] = merged[reg]
    return out


def choriocapillaris_mask(region, upper_trace, axial_scale, microns=10.0):
    """Region pixels within a physical depth of the upper boundary.

    The strip covers ``round(microns / axial_scale)`` whole rows
    starting at the rounded upper-boundary row of each traced column.
    """
    if microns < 0:
        raise ValueError("microns must be >= 0")
    if axial_scale <= 0:
        raise ValueError("axial_scale must be positive")
    n_rows = int(round_half_away(microns / axial_scale))
    px = region.pixels
    top = np.full(px.shape[1], np.inf)
    cols = upper_trace.columns
    inside = (cols >= 0) & (cols < px.shape[1])
    top[cols[inside]] = round_half_away(upper_trace.rows[inside]).astype(float)
    offset = np.arange(px.shape[0])[:, None] - top[None, :]
    return px & (offset >= 0) & (offset <= n_rows - 1)


def depth_band_mask(region, upper_trace, depth):
    """Region pixels within ``depth`` rows below the rounded upper boundary."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    px = region.pixels
    top = np.full(px.shape[1], np.inf)
    cols = upper_trace.columns
    inside = (cols >= 0) & (cols < px.shape[1])
    top[cols[inside]] = round_half_away(upper_trace.rows[inside]).astype(float)
    offset = np.arange(px.shape[0])[:, None] - top[None, :]
    return px & (offset >= 0) & (offset <= depth)


def _darkest_cluster_mask(enhanced, band, K, k_vessel):
    """Vessel pixels of one clustering pass: the darkest clusters of a band.

    Enhanced values are snapped to the integer grid before clustering
    so blend round-off cannot split clusters.  The kept count scales
    the nominal ``k_vessel / K`` ratio by the realised cluster
    count, never below one.
    """
    out = np.zeros(band.shape, dtype=bool)
    flat = np.flatnonzero(band)
    if flat.size == 0:
        return out
    vals = np.clip(round_half_away(enhanced.reshape(-1)[flat]), 0, 255).astype(float)
    quant = median_cut(vals, K)
    n_keep = max(1, int(round_half_away(quant.k * k_vessel / K)))
    keep = quant.assign(vals) < n_keep
    out.reshape(-1)[flat[keep]] = True
    return out


def segment_vessels(scan, region, upper_trace, config=None):
    """Segment the choroidal vasculature of one B-scan.

    The enhanced region is clustered three times (two depth-restricted
    sub-bands and the full region), the darkest clusters of each pass
    are kept, and the choriocapillaris strip is added unconditionally.

    Parameters
    ----------
    scan : BScan
    region : RegionMask
    upper_trace : BoundaryTrace
        Trace of the boundary the depth bands hang from.
    config : MmcqConfig, optional

    Returns
    -------
    VesselMask
    """
    cfg = config if config is not None else MmcqConfig()
    enhanced = enhance_choroid(scan, region, cfg)
    thickness = average_pixel_thickness(region)

    vessel = choriocapillaris_mask(
        region, upper_trace, scan.axial_scale, cfg.choriocapillaris_microns
    )
    for fraction in cfg.depth_fractions:
        band = depth_band_mask(region, upper_trace, fraction * thickness)
        vessel = vessel | _darkest_cluster_mask(enhanced, band, cfg.K, cfg.k_vessel)
    vessel = vessel | _darkest_cluster_mask(enhanced, region.pixels, cfg.K, cfg.k_vessel)
    return VesselMask.clipped(vessel, region)


def _sliding_sums(values, window):
    # exact integer window sums via a zero-padded integral image on a
    # symmetric border extension
    r = window // 2
    padded = np.pad(np.asarray(values, dtype=np.int64), r, mode="symmetric")
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    integral[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    h, w = values.shape
    s = (
        integral[window:, window:]
        - integral[:-window, window:]
        - integral[window:, :-window]
        + integral[:-window, :-window]
    )
    return s[:h, :w]


def niblack_segment(scan, region, window=51, k=-0.05, region_only=False):
    """Local-threshold vessel baseline: dark pixels under a Niblack surface.

    A pixel is vessel iff its raw intensity is strictly below
    ``mu + k * sigma`` of its square window, intersected with the
    region.  Window statistics use exact integer sums on a
    symmetric border extension, so results are reproducible
    bit-for-bit against a direct per-window evaluation.

    Parameters
    ----------
    scan : BScan
    region : RegionMask
    window : int
        Odd window side length.
    k : float
        Threshold offset in standard deviations; negative values
        demand darker-than-mean pixels.
    region_only : bool
        When true, window statistics are computed over region pixels
        only instead of the full scan.

    Returns
    -------
    VesselMask
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    if region.pixels.shape != scan.pixels.shape:
        raise ValueError("region and scan must share a shape")
    px = scan.pixels.astype(np.int64)
    if region_only:
        inside = region.pixels.astype(np.int64)
        cnt = _sliding_sums(inside, window)
        s1 = _sliding_sums(px * inside, window)
        s2 = _sliding_sums(px * px * inside, window)
        ok = cnt > 0
        cnt_safe = np.where(ok, cnt, 1)
    else:
        cnt_safe = np.int64(window) * np.int64(window)
        ok = np.ones(scan.pixels.shape, dtype=bool)
        s1 = _sliding_sums(px, window)
        s2 = _sliding_sums(px * px, window)
    mu = s1 / cnt_safe
    var = np.maximum(s2 / cnt_safe - mu * mu, 0.0)
    threshold = mu + k * np.sqrt(var)
    vessel = (scan.pixels < threshold) & ok
    return VesselMask.clipped(vessel, region)


def fit_gamma(pixels, target, lo=0.02, hi=50.0, iterations=100):
    """Gamma exponent driving the mean of ``(I/255) ** gamma`` to a target.

    The objective is strictly decreasing in gamma for non-constant
    images, so plain bisection suffices; when the target is outside the
    attainable range the nearer bound is returned.
    """
    v = np.asarray(pixels, dtype=float) / 255.0
    if v.size == 0:
        raise ValueError("empty image")

    def mean_at(g):
        return float(np.mean(v**g))

    if mean_at(lo) <= target:
        return float(lo)
    if mean_at(hi) >= target:
        return float(hi)
    a, b = float(lo), float(hi)
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        if mean_at(mid) > target:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def brightness_contrast_variants(scan, brightness_targets=None, contrast_factors=None):
    """Grid of brightness and contrast perturbations of one scan.

    Five gamma exponents drive the normalised mean brightness to evenly
    spaced targets, and each gamma image is stretched about its mean by
    five contrast factors, giving 25 variants in row-major
    (brightness, contrast) order.
    """
    if brightness_targets is None:
        brightness_targets = np.linspace(0.2, 0.5, 5)
    if contrast_factors is None:
        contrast_factors = np.linspace(0.5, 3.0, 5)
    base = scan.pixels.astype(float)
    variants = []
    for target in brightness_targets:
        gamma = fit_gamma(scan.pixels, float(target))
        bright = 255.0 * (base / 255.0) ** gamma
        mean = bright.mean()
        for factor in contrast_factors:
            adjusted = np.clip((bright - mean) * factor + mean, 0.0, 255.0)
            variants.append(
                BScan(
                    pixels=np.clip(round_half_away(adjusted), 0, 255).astype(np.uint8),
                    axial_scale=scan.axial_scale,
                    lateral_scale=scan.lateral_scale,
                    frontal_scale=scan.frontal_scale,
                    eye=scan.eye,
                    id=scan.id,
                )
            )
    return variants


def majority_vote_vessels(scan, region, upper_trace, config=None, votes_required=15):
    """Vessel mask stable across brightness and contrast perturbations.

    The full segmentation runs once per variant from
    :func:`brightness_contrast_variants`; a pixel is vessel iff at
    least ``votes_required`` of the 25 runs label it vessel.
    """
    variants = brightness_contrast_variants(scan)
    if not 1 <= votes_required <= len(variants):
        raise ValueError("votes_required must be in [1, number of variants]")
    votes = np.zeros(scan.pixels.shape, dtype=np.int64)
    for variant in variants:
        votes += segment_vessels(variant, region, upper_trace, config).pixels
    return _mask_from_votes(votes, votes_required, region)


def _mask_from_votes(votes, votes_required, region):
    return VesselMask.clipped(votes >= votes_required, region)
