"""Preprocessing for choroid segmentation.

Denoising, contrast-limited adaptive histogram equalisation, directional
edge maps for the two choroid boundaries, and compensation of the dark
columns cast by retinal vessel shadows.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from choroidkit.core import BScan, round_half_away

EDGE_TARGETS = ("upper", "lower")


@dataclass(frozen=True)
class EdgeMap:
    """Edge-strength image in [0, 1] for one boundary target."""

    values: np.ndarray
    target: str

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValueError("edge map must be 2-D")
        if vals.size and (vals.min() < -1e-12 or vals.max() > 1 + 1e-12):
            raise ValueError("edge map values must lie in [0, 1]")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.target not in EDGE_TARGETS:
            raise ValueError(f"target must be one of {EDGE_TARGETS}")


def median_filter(image, window: int) -> np.ndarray:
    """Square median filter with edge replication at the borders."""
    if window % 2 == 0 or window < 3:
        raise ValueError("window must be an odd integer >= 3")
    image = np.asarray(image)
    return ndimage.median_filter(image, size=window, mode="nearest")


def _minmax_normalise(values: np.ndarray) -> np.ndarray:
    lo = values.min()
    hi = values.max()
    if hi - lo <= 0:
        return np.zeros_like(values, dtype=float)
    return (values - lo) / (hi - lo)


def _tile_mapping(tile: np.ndarray, clip_limit: float) -> np.ndarray:
    """Clipped-histogram equalisation mapping for one tile, as 256 reals."""
    n = tile.size
    hist = np.bincount(tile.ravel(), minlength=256).astype(float)
    clip = clip_limit * n / 256.0
    clipped = np.minimum(hist, clip)
    excess = n - clipped.sum()
    bins = clipped + excess / 256.0
    cdf = np.cumsum(bins)
    occupied = np.nonzero(bins)[0]
    cdf_min = cdf[occupied[0]] if occupied.size else 0.0
    denom = n - cdf_min
    if denom <= 0:
        return np.arange(256, dtype=float)
    return 255.0 * (cdf - cdf_min) / denom


def clahe(image, tiles: int = 8, clip_limit: float = 5.0) -> np.ndarray:
    """Contrast-limited adaptive histogram equalisation.

    The image is divided into a tiles x tiles grid. Each tile's histogram
    is clipped at clip_limit multiples of the uniform bin count and the
    excess is redistributed uniformly over all 256 bins in one pass; the
    per-tile equalisation mappings are then blended bilinearly between
    tile centres.

    Parameters
    ----------
    image : ndarray
        2-D uint8 array.
    tiles : int
        Grid side; 1 gives plain (clipped) global equalisation.
    clip_limit : float
        Histogram clip as a multiple of tile_pixels / 256.

    Returns
    -------
    ndarray
        uint8 image of the same shape.
    """
    if tiles < 1:
        raise ValueError("tiles must be >= 1")
    if not clip_limit > 0:
        raise ValueError("clip_limit must be positive")
    image = np.asarray(image)
    if image.dtype != np.uint8:
        image = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    m, n = image.shape
    if m < tiles or n < tiles:
        raise ValueError("image smaller than tile grid")

    row_edges = np.linspace(0, m, tiles + 1).round().astype(int)
    col_edges = np.linspace(0, n, tiles + 1).round().astype(int)
    maps = np.empty((tiles, tiles, 256), dtype=float)
    row_centres = np.empty(tiles)
    col_centres = np.empty(tiles)
    for i in range(tiles):
        row_centres[i] = (row_edges[i] + row_edges[i + 1] - 1) / 2.0
        for j in range(tiles):
            tile = image[row_edges[i] : row_edges[i + 1], col_edges[j] : col_edges[j + 1]]
            maps[i, j] = _tile_mapping(tile, clip_limit)
    for j in range(tiles):
        col_centres[j] = (col_edges[j] + col_edges[j + 1] - 1) / 2.0

    def axis_blend(coords, centres):
        i0 = np.clip(np.searchsorted(centres, coords, side="right") - 1, 0, len(centres) - 1)
        i1 = np.minimum(i0 + 1, len(centres) - 1)
        span = centres[i1] - centres[i0]
        w = np.where(span > 0, (coords - centres[i0]) / np.where(span > 0, span, 1.0), 0.0)
        w = np.clip(w, 0.0, 1.0)
        return i0, i1, w

    r0, r1, wr = axis_blend(np.arange(m, dtype=float), row_centres)
    c0, c1, wc = axis_blend(np.arange(n, dtype=float), col_centres)
    wr = wr[:, None]
    wc = wc[None, :]
    idx = image.astype(int)
    out = (
        (1 - wr) * (1 - wc) * maps[r0[:, None], c0[None, :], idx]
        + (1 - wr) * wc * maps[r0[:, None], c1[None, :], idx]
        + wr * (1 - wc) * maps[r1[:, None], c0[None, :], idx]
        + wr * wc * maps[r1[:, None], c1[None, :], idx]
    )
    return np.clip(round_half_away(out), 0, 255).astype(np.uint8)


def directional_edge_kernels():
    """The 5x5 derivative kernels for bright-to-dark and dark-to-bright edges."""
    f_b2d = np.array(
        [
            [-1, -1, -2, -1, -1],
            [-1, -2, -3, -2, -1],
            [0, 0, 0, 0, 0],
            [1, 1, 2, 1, 1],
            [1, 2, 3, 2, 1],
        ],
        dtype=int,
    )
    return f_b2d, -f_b2d


def _convolve(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # reflect-101 borders avoid dark halos that would attract the tracer
    return ndimage.convolve(image.astype(float), kernel.astype(float), mode="mirror")


def edge_map_upper(scan: BScan) -> EdgeMap:
    """Edge map favouring the bright-to-dark upper choroid boundary.

    The 5x5-median-smoothed image is convolved with the bright-to-dark
    kernel and the response convolved again with the dark-to-bright
    kernel; negative values are clamped to zero and the result min-max
    normalised to [0, 1].
    """
    f_b2d, f_d2b = directional_edge_kernels()
    smoothed = median_filter(scan.pixels, 5)
    response = _convolve(_convolve(smoothed, f_b2d), f_d2b)
    return EdgeMap(_minmax_normalise(np.maximum(response, 0.0)), "upper")


def edge_map_lower(scan: BScan) -> EdgeMap:
    """Edge map favouring the dark-to-bright lower choroid boundary.

    The CLAHE-enhanced image (8x8 tiles, clip 5) is convolved with the
    dark-to-bright kernel; the nonnegative response is cleaned with a
    grayscale 5x15 opening followed by a 5x5 erosion, then min-max
    normalised.
    """
    _, f_d2b = directional_edge_kernels()
    enhanced = clahe(scan.pixels, tiles=8, clip_limit=5.0)
    response = np.maximum(_convolve(enhanced, f_d2b), 0.0)
    opened = ndimage.grey_opening(response, size=(5, 15), mode="reflect")
    eroded = ndimage.grey_erosion(opened, size=(5, 5), mode="reflect")
    return EdgeMap(_minmax_normalise(eroded), "lower")


def shadow_compensate(scan: BScan, ma_window: int = 101, literal_ratio: bool = False) -> BScan:
    """Brighten columns darkened by retinal vessel shadows.

    Each column is scaled by the ratio of the lateral moving average of
    column mean intensities to the column's own mean, so dim columns are
    lifted toward their neighbourhood. ``literal_ratio`` inverts the
    factor to mean / moving-average, which darkens shadowed columns
    instead; it is kept for comparability.
    """
    if ma_window % 2 == 0 or ma_window < 3:
        raise ValueError("ma_window must be an odd integer >= 3")
    pixels = scan.pixels.astype(float)
    mu = pixels.mean(axis=0)
    ma = ndimage.uniform_filter1d(mu, size=ma_window, mode="reflect")
    if literal_ratio:
        factor = np.where(ma > 0, mu / np.where(ma > 0, ma, 1.0), 1.0)
    else:
        factor = np.where(mu > 0, ma / np.where(mu > 0, mu, 1.0), 1.0)
    out = np.clip(round_half_away(pixels * factor[None, :]), 0, 255).astype(np.uint8)
    return BScan(
        out,
        scan.axial_scale,
        scan.lateral_scale,
        frontal_scale=scan.frontal_scale,
        eye=scan.eye,
        id=scan.id,
    )
