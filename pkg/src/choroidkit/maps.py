"""En-face choroid maps from volume stacks, ETDRS and peripapillary sub-field means."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import BScan, PixelPoint, round_half_away

ETDRS_FIELDS = (
    "central",
    "inner_superior",
    "inner_nasal",
    "inner_inferior",
    "inner_temporal",
    "outer_superior",
    "outer_nasal",
    "outer_inferior",
    "outer_temporal",
)

# angular spans in degrees about the temporal centre, half-open [lo, hi)
PERIPAPILLARY_SPANS = (
    ("temporal", -45, 45),
    ("supero_temporal", 45, 90),
    ("supero_nasal", 90, 135),
    ("nasal", 135, 225),
    ("infero_nasal", 225, 270),
    ("infero_temporal", 270, 315),
)

LATERALITIES = ("right", "left")


@dataclass(frozen=True)
class EnFaceMap:
    """Frontal-plane map of a choroid quantity (microns or density).

    ``values`` uses NaN to mark positions outside the sampled region;
    ``px_scale_x``/``px_scale_y`` give microns per map pixel; ``fovea`` is
    in map coordinates. ``rotation_deg`` records the acquisition angle the
    map was rotated by: angles are measured from the +x axis towards +y
    (rows increase downwards), so positive angles turn clockwise on
    screen.
    """

    values: np.ndarray
    px_scale_x: float
    px_scale_y: float
    fovea: PixelPoint
    rotation_deg: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        if np.any(np.isinf(values)):
            raise ValueError("values must not be infinite")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not (self.px_scale_x > 0 and self.px_scale_y > 0):
            raise ValueError("pixel scales must be positive")


@dataclass(frozen=True)
class EtdrsReport:
    """Nine sub-field means on the 1/3/6 mm fovea-centred grid.

    ``coverage`` maps each sub-field name to its fraction of non-absent
    map pixels; names with coverage below one half are listed in
    ``low_coverage`` (their means are still reported).
    """

    central: float
    inner_superior: float
    inner_nasal: float
    inner_inferior: float
    inner_temporal: float
    outer_superior: float
    outer_nasal: float
    outer_inferior: float
    outer_temporal: float
    coverage: dict
    low_coverage: tuple

    def to_dict(self):
        out = {name: getattr(self, name) for name in ETDRS_FIELDS}
        out["coverage"] = dict(self.coverage)
        out["low_coverage"] = list(self.low_coverage)
        return out


@dataclass(frozen=True)
class PeripapillaryReport:
    """Six peripapillary sub-field means plus PMB, N/T ratio, and overall mean.

    ``nt_ratio`` is None when the temporal mean is zero (the ratio would
    be infinite) or when either sub-field has no samples.
    """

    temporal: float
    supero_temporal: float
    supero_nasal: float
    nasal: float
    infero_nasal: float
    infero_temporal: float
    pmb: float
    nt_ratio: float | None
    overall: float

    def to_dict(self):
        out = {name: getattr(self, name) for name, _, _ in PERIPAPILLARY_SPANS}
        out["pmb"] = self.pmb
        out["overall"] = self.overall
        if self.nt_ratio is not None:
            out["nt_ratio"] = self.nt_ratio
        return out


def _bilinear_nan(src: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear sample of ``src`` at (ys, xs); NaN outside bounds.

    Neighbours with exactly zero weight never contribute, so on-grid
    samples copy pixels exactly and NaN cells poison only samples that
    genuinely overlap them. Constant inputs are preserved exactly because
    each 1-D step is computed as a + f*(b - a).
    """
    ys, xs = np.broadcast_arrays(np.asarray(ys, float), np.asarray(xs, float))
    h, w = src.shape
    oob = (ys < 0) | (ys > h - 1) | (xs < 0) | (xs > w - 1)
    yc = np.clip(ys, 0, h - 1)
    xc = np.clip(xs, 0, w - 1)
    y0 = np.minimum(np.floor(yc).astype(int), max(h - 2, 0))
    x0 = np.minimum(np.floor(xc).astype(int), max(w - 2, 0))
    fy = yc - y0
    fx = xc - x0
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    a = src[y0, x0]
    b = src[y0, x1]
    c = src[y1, x0]
    d = src[y1, x1]
    with np.errstate(invalid="ignore"):
        r0 = np.where(fx >= 1, b, np.where(fx > 0, a + fx * (b - a), a))
        r1 = np.where(fx >= 1, d, np.where(fx > 0, c + fx * (d - c), c))
        out = np.where(fy >= 1, r1, np.where(fy > 0, r0 + fy * (r1 - r0), r0))
    out = np.where(oob, np.nan, out)
    return out


def _smooth_nan(values: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian smoothing that ignores NaN cells and keeps them absent."""
    if sigma <= 0:
        return values.copy()
    valid = np.isfinite(values)
    filled = np.where(valid, values, 0.0)
    num = gaussian_filter(filled, sigma, mode="nearest", truncate=3.0)
    den = gaussian_filter(valid.astype(float), sigma, mode="nearest", truncate=3.0)
    out = np.full(values.shape, np.nan)
    ok = valid & (den > 0)
    out[ok] = num[ok] / den[ok]
    return out


def _rotate_about(values: np.ndarray, centre_col: float, centre_row: float, deg: float) -> np.ndarray:
    """Rotate map content by ``deg`` about a centre, NaN outside the frame.

    Sample coordinates within 1e-9 px of the integer grid are snapped so
    axis-aligned angles (90/180/270) copy pixels exactly despite trig
    round-off.
    """
    if deg % 360 == 0:
        return values.copy()
    h, w = values.shape
    t = math.radians(deg)
    cos_t, sin_t = math.cos(t), math.sin(t)
    dx = np.arange(w) - centre_col
    dy = np.arange(h) - centre_row
    xs = centre_col + cos_t * dx[None, :] + sin_t * dy[:, None]
    ys = centre_row - sin_t * dx[None, :] + cos_t * dy[:, None]
    xs_r = np.rint(xs)
    ys_r = np.rint(ys)
    xs = np.where(np.abs(xs - xs_r) < 1e-9, xs_r, xs)
    ys = np.where(np.abs(ys - ys_r) < 1e-9, ys_r, ys)
    return _bilinear_nan(values, ys, xs)


def build_map(
    arrays,
    fovea_cols,
    fovea_scan_index: int,
    scan: BScan,
    target_shape,
    rotation_deg: float = 0.0,
) -> EnFaceMap:
    """Assemble an en-face map from per-B-scan thickness arrays.

    Arrays are aligned so their fovea columns coincide, stacked along the
    frontal axis, padded horizontally by duplicating edge values, bilinear
    interpolated to the target resolution, Gaussian smoothed with a
    standard deviation equal to the frontal-plane spacing in map pixels
    (truncated at three sigma), shifted vertically so the fovea sits at
    the map's vertical centre, trimmed of the duplicated padding, and
    finally rotated by the acquisition angle about the fovea.

    Parameters
    ----------
    arrays : sequence of 1-D arrays
        One thickness (or density) array per B-scan, NaN for absent
        columns. At least two.
    fovea_cols : sequence of int
        Index of the fovea column within each array.
    fovea_scan_index : int
        Index of the B-scan containing the fovea.
    scan : BScan
        Scale carrier; ``lateral_scale`` spaces array columns and
        ``frontal_scale`` (required) spaces consecutive B-scans.
    target_shape : (rows, cols)
        Output map resolution.
    rotation_deg : float
        Acquisition angle; positive turns clockwise on screen.
    """
    if len(arrays) < 2:
        raise ValueError("at least two thickness arrays are required")
    if len(fovea_cols) != len(arrays):
        raise ValueError("one fovea column per thickness array is required")
    if scan.frontal_scale is None:
        raise ValueError("frontal_scale is required to build an en-face map")
    n_scans = len(arrays)
    if not 0 <= fovea_scan_index < n_scans:
        raise ValueError("fovea_scan_index outside the array stack")
    rows_t, cols_t = int(target_shape[0]), int(target_shape[1])
    if rows_t < 2 or cols_t < 2:
        raise ValueError("target_shape must be at least 2x2")

    clean = []
    offsets = []
    for i, (arr, col) in enumerate(zip(arrays, fovea_cols)):
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("thickness arrays must be non-empty and 1-D")
        col = int(round_half_away(col))
        if not 0 <= col < arr.size:
            raise ValueError(
                f"fovea column {col} outside thickness array {i} of length {arr.size}"
            )
        clean.append(arr)
        offsets.append(-col)

    min_p = min(offsets)
    max_p = max(o + a.size - 1 for o, a in zip(offsets, clean))
    width_c = max_p - min_p + 1
    if width_c < 2:
        raise ValueError("aligned arrays must span at least two columns")
    coarse = np.full((n_scans, width_c), np.nan)
    for i, (arr, off) in enumerate(zip(clean, offsets)):
        start = off - min_p
        coarse[i, start : start + arr.size] = arr
    fovea_coarse_col = -min_p

    # map pixels between consecutive B-scans sets pad width and smoothing
    k_y = (rows_t - 1) / (n_scans - 1)
    n_pad = math.ceil(k_y)
    padded = np.pad(coarse, ((0, 0), (n_pad, n_pad)), mode="edge")
    m_pad = math.ceil(n_pad * (cols_t - 1) / (width_c - 1))

    u = np.arange(-m_pad, cols_t + m_pad)
    x_src = n_pad + u * (width_c - 1) / (cols_t - 1)
    x_src = np.clip(x_src, 0, padded.shape[1] - 1)
    v = np.arange(rows_t)
    y_src = v * (n_scans - 1) / (rows_t - 1)
    grid = _bilinear_nan(padded, y_src[:, None], x_src[None, :])

    grid = _smooth_nan(grid, k_y)
    grid = grid[:, m_pad : m_pad + cols_t]

    fovea_row_raw = fovea_scan_index * k_y
    shift = int(round_half_away((rows_t - 1) / 2 - fovea_row_raw))
    if shift != 0:
        moved = np.full_like(grid, np.nan)
        if shift > 0:
            moved[shift:] = grid[: rows_t - shift]
        else:
            moved[: rows_t + shift] = grid[-shift:]
        grid = moved
    fovea_row = fovea_row_raw + shift
    fovea_col = fovea_coarse_col * (cols_t - 1) / (width_c - 1)

    grid = _rotate_about(grid, fovea_col, fovea_row, rotation_deg)
    return EnFaceMap(
        values=grid,
        px_scale_x=scan.lateral_scale * (width_c - 1) / (cols_t - 1),
        px_scale_y=scan.frontal_scale * (n_scans - 1) / (rows_t - 1),
        fovea=PixelPoint(fovea_col, fovea_row),
        rotation_deg=float(rotation_deg),
    )


def _etdrs_masks(m: EnFaceMap, acquisition_angle_deg: float, eye: str) -> dict:
    """Boolean pixel masks of the nine grid sub-fields on the map.

    Rings are half-open in radius (central r <= 500 um, inner
    500 < r <= 1500, outer 1500 < r <= 3000); quadrants are half-open
    [lo, hi) in the angle about the acquisition axis, so the nine masks
    partition the 6 mm disc exactly.
    """
    h, w = m.values.shape
    dx = (np.arange(w) - m.fovea.col) * m.px_scale_x
    dy = (np.arange(h) - m.fovea.row) * m.px_scale_y
    radius = np.hypot(dx[None, :], dy[:, None])
    phi = np.degrees(np.arctan2(dy[:, None], dx[None, :]))
    alpha = (phi - acquisition_angle_deg + 180.0) % 360.0 - 180.0

    superior = (alpha >= -135.0) & (alpha < -45.0)
    inferior = (alpha >= 45.0) & (alpha < 135.0)
    toward_x = (alpha >= -45.0) & (alpha < 45.0)
    away_x = ~(superior | inferior | toward_x)
    if eye == "right":
        temporal, nasal = toward_x, away_x
    else:
        temporal, nasal = away_x, toward_x

    central = radius <= 500.0
    inner = (radius > 500.0) & (radius <= 1500.0)
    outer = (radius > 1500.0) & (radius <= 3000.0)
    return {
        "central": central,
        "inner_superior": inner & superior,
        "inner_nasal": inner & nasal,
        "inner_inferior": inner & inferior,
        "inner_temporal": inner & temporal,
        "outer_superior": outer & superior,
        "outer_nasal": outer & nasal,
        "outer_inferior": outer & inferior,
        "outer_temporal": outer & temporal,
    }


def etdrs_means(m: EnFaceMap, acquisition_angle_deg: float = 0.0, eye: str = "right") -> EtdrsReport:
    """Mean map value in each of the nine ETDRS sub-fields.

    Quadrant boundaries sit at 45 degrees either side of the acquisition
    axis. ``eye`` fixes the temporal direction: for a right eye the
    temporal quadrant lies along the +x acquisition axis, for a left eye
    it is mirrored. Absent (NaN) pixels are excluded from the means;
    sub-fields with less than half their pixels present are listed in
    ``low_coverage``.

    Raises
    ------
    ValueError
        When the 6 mm circle extends beyond the map bounds.
    """
    if eye not in LATERALITIES:
        raise ValueError("eye must be 'right' or 'left'")
    h, w = m.values.shape
    reach_x = 3000.0 / m.px_scale_x
    reach_y = 3000.0 / m.px_scale_y
    if (
        m.fovea.col - reach_x < -0.5
        or m.fovea.col + reach_x > w - 0.5
        or m.fovea.row - reach_y < -0.5
        or m.fovea.row + reach_y > h - 0.5
    ):
        raise ValueError("map does not cover the 6 mm circle")

    masks = _etdrs_masks(m, acquisition_angle_deg, eye)
    finite = np.isfinite(m.values)
    means = {}
    coverage = {}
    low = []
    for name, mask in masks.items():
        total = int(mask.sum())
        valid = mask & finite
        n_valid = int(valid.sum())
        coverage[name] = n_valid / total if total else 0.0
        means[name] = float(m.values[valid].mean()) if n_valid else float("nan")
        if coverage[name] < 0.5:
            low.append(name)
    return EtdrsReport(coverage=coverage, low_coverage=tuple(low), **means)


def _span_members(n: int, lo_deg: int, hi_deg: int) -> np.ndarray:
    """Offsets k in [0, n) whose angle k*360/n lies in [lo_deg, hi_deg).

    Bounds are resolved in exact integer arithmetic (k >= lo*n/360 iff
    k >= ceil(lo*n/360)), so sub-field membership is immune to float
    rounding and the six spans partition the circle for every n.
    """
    a = -((-lo_deg * n) // 360)
    b = -((-hi_deg * n) // 360)
    k = np.arange(n)
    return (k - a) % n < (b - a)


def peripapillary_means(
    thickness, temporal_centre_index: int, eye: str = "right"
) -> PeripapillaryReport:
    """Sub-field means of a circular (wrap-around) thickness array.

    Array position maps linearly to angle, 360 degrees over the full
    length, with the temporal centre at 0 degrees. Angles increase
    counter-clockwise on screen for right eyes and clockwise for left
    eyes, which in array terms makes ``eye`` flip the traversal
    direction. Values are gathered relative to the temporal centre, so
    rolling the array and the centre together reproduces the report
    exactly. Sub-fields with no samples (arrays shorter than 8) get NaN.
    """
    values = np.asarray(thickness, dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise ValueError("thickness must be a non-empty 1-D array")
    n = values.size
    if not 0 <= temporal_centre_index < n:
        raise ValueError("temporal_centre_index outside the array")
    if eye not in LATERALITIES:
        raise ValueError("eye must be 'right' or 'left'")

    step = 1 if eye == "right" else -1
    order = (temporal_centre_index + step * np.arange(n)) % n
    rotated = values[order]

    means = {}
    for name, lo, hi in PERIPAPILLARY_SPANS:
        members = _span_members(n, lo, hi)
        means[name] = float(rotated[members].mean()) if members.any() else float("nan")
    pmb_members = _span_members(n, -30, 30)
    pmb = float(rotated[pmb_members].mean()) if pmb_members.any() else float("nan")

    nt = None
    if math.isfinite(means["temporal"]) and math.isfinite(means["nasal"]) and means["temporal"] != 0:
        nt = means["nasal"] / means["temporal"]
    return PeripapillaryReport(
        pmb=pmb,
        nt_ratio=nt,
        overall=float(rotated.mean()),
        **means,
    )
