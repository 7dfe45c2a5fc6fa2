"""Fovea-centred choroid measurements: ROI construction, thickness, area, vascularity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BoundaryTrace,
    BScan,
    PixelPoint,
    VesselMask,
    pixel_area_mm2,
    region_from_traces,
)

ALIGNMENTS = ("choroid_aligned", "image_aligned")


class NoIntersectionError(ValueError):
    """Perpendicular ray leaves the traced range before reaching the lower boundary."""


@dataclass(frozen=True)
class RoiSpec:
    """Fovea-centred region-of-interest request.

    Parameters
    ----------
    fovea : PixelPoint
        Image coordinate of the foveal centre.
    half_width_microns : float
        Arc-length distance from the ROI centre to each endpoint, measured
        along the upper boundary in micron space (3000 gives a 6 mm ROI).
    alignment : str
        ``choroid_aligned`` cuts the ROI with boundary-perpendicular
        segments; ``image_aligned`` cuts with vertical lines at the same
        endpoints.
    tangent_offset_px : int
        Column offset on each side used to estimate boundary tangents.
    """

    fovea: PixelPoint
    half_width_microns: float
    alignment: str = "choroid_aligned"
    tangent_offset_px: int = 15

    def __post_init__(self):
        if not self.half_width_microns > 0:
            raise ValueError("half_width_microns must be positive")
        if self.alignment not in ALIGNMENTS:
            raise ValueError("alignment must be 'choroid_aligned' or 'image_aligned'")
        if self.tangent_offset_px != int(self.tangent_offset_px) or self.tangent_offset_px < 1:
            raise ValueError("tangent_offset_px must be a positive integer")


@dataclass(frozen=True)
class RoiGeometry:
    """Geometric precursor of a measured ROI.

    ``segments`` holds the two cutting segments as (upper, lower) pixel
    points; ``polygon`` lists the four corners in traversal order
    (upper-left, lower-left, lower-right, upper-right); ``mask`` marks
    member pixels over the full scan shape.
    """

    centre_col: int
    centre: PixelPoint
    endpoint_cols: tuple
    segments: tuple
    polygon: list
    mask: np.ndarray
    alignment: str


@dataclass(frozen=True)
class RoiReport:
    """Metrics of one fovea-centred ROI.

    ``vessel_area_mm2`` and ``cvi`` are None when no vessel mask was
    supplied; ``cvi`` is the vessel-to-total area ratio inside the ROI.
    """

    sfct_microns: float
    avg_thickness_microns: float
    area_mm2: float
    vessel_area_mm2: float | None
    cvi: float | None
    roi_polygon: list

    def __post_init__(self):
        if self.cvi is not None and not 0.0 <= self.cvi <= 1.0:
            raise ValueError("cvi must lie in [0, 1]")
        if self.vessel_area_mm2 is not None and self.vessel_area_mm2 > self.area_mm2:
            raise ValueError("vessel area cannot exceed total area")

    def to_dict(self):
        out = {
            "sfct_microns": self.sfct_microns,
            "avg_thickness_microns": self.avg_thickness_microns,
            "area_mm2": self.area_mm2,
            "roi_polygon": [[p.col, p.row] for p in self.roi_polygon],
        }
        if self.vessel_area_mm2 is not None:
            out["vessel_area_mm2"] = self.vessel_area_mm2
            out["cvi"] = self.cvi
        return out


def _tangent_columns(trace: BoundaryTrace, col: int, offset: int):
    """Column pair used to estimate the tangent at ``col``.

    The offset shrinks symmetrically near the trace ends (minimum 1); at an
    exact end the pair is one-sided.
    """
    o = min(offset, col - trace.c0, trace.c1 - col)
    if o >= 1:
        return col - o, col + o
    if trace.c0 == trace.c1:
        raise ValueError("tangent estimation needs at least two trace columns")
    return (col, col + 1) if col == trace.c0 else (col - 1, col)


def _perpendicular_direction(upper: BoundaryTrace, col: int, scan: BScan, offset: int):
    """Unit vector perpendicular to the upper boundary in micron space.

    The rotation is chosen so the row component points into the choroid
    (increasing row).
    """
    ca, cb = _tangent_columns(upper, col, offset)
    dx = (cb - ca) * scan.lateral_scale
    dy = (upper.row_at(cb) - upper.row_at(ca)) * scan.axial_scale
    # (-dy, dx) always has a positive row component because cb > ca
    norm = math.hypot(dx, dy)
    return -dy / norm, dx / norm


def _ray_polyline_hit(px, py, dx, dy, polyline_x, polyline_y):
    """First intersection of the ray (px, py) + t*(dx, dy) with a polyline.

    Returns (t, x, y) for the smallest non-negative ray parameter, or None
    when the ray misses every segment.
    """
    if polyline_x.size < 2:
        return None
    ex = np.diff(polyline_x)
    ey = np.diff(polyline_y)
    qx = polyline_x[:-1] - px
    qy = polyline_y[:-1] - py
    det = ex * dy - ey * dx
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ex * qy - ey * qx) / det
        s = (dx * qy - dy * qx) / det
    ok = (det != 0) & (s >= -1e-9) & (s <= 1 + 1e-9) & (t >= -1e-9)
    cand = np.where(ok, t, np.inf)
    i = int(np.argmin(cand))
    if not np.isfinite(cand[i]):
        return None
    ti = max(float(t[i]), 0.0)
    return ti, px + ti * dx, py + ti * dy


def _lower_hit(upper: BoundaryTrace, lower: BoundaryTrace, col: int, scan: BScan, offset: int):
    """Perpendicular foot on the lower trace, in micron coordinates."""
    dx, dy = _perpendicular_direction(upper, col, scan, offset)
    px = col * scan.lateral_scale
    py = upper.row_at(col) * scan.axial_scale
    hit = _ray_polyline_hit(
        px,
        py,
        dx,
        dy,
        lower.columns * scan.lateral_scale,
        lower.rows * scan.axial_scale,
    )
    if hit is None:
        raise NoIntersectionError(
            f"no intersection: perpendicular ray at column {col} leaves the lower trace range"
        )
    return hit


def perpendicular_thickness(
    upper: BoundaryTrace,
    lower: BoundaryTrace,
    at_col: int,
    scan: BScan,
    tangent_offset_px: int = 15,
) -> float:
    """Choroid thickness in microns, perpendicular to the upper boundary.

    The tangent at ``at_col`` is estimated from trace points offset by
    ``tangent_offset_px`` columns on each side (shrunk near the trace
    ends), converted to micron space with the scan's pixel scales, rotated
    90 degrees towards the lower boundary, and intersected with the lower
    trace treated as a piecewise-linear curve.

    Raises
    ------
    ValueError
        When ``at_col`` lies outside either trace.
    NoIntersectionError
        When the perpendicular ray exits the traced range before meeting
        the lower boundary.
    """
    upper.row_at(at_col)
    lower.row_at(at_col)
    return _lower_hit(upper, lower, at_col, scan, tangent_offset_px)[0]


def thickness_array(
    upper: BoundaryTrace,
    lower: BoundaryTrace,
    scan: BScan,
    mode: str = "perpendicular",
) -> np.ndarray:
    """Thickness in microns at every column shared by both traces.

    ``per_ascan`` measures vertically (axial_scale times the row gap);
    ``perpendicular`` measures locally perpendicular to the upper
    boundary. Perpendicular rays that exit the traced range yield NaN.
    """
    if mode not in ("perpendicular", "per_ascan"):
        raise ValueError("mode must be 'perpendicular' or 'per_ascan'")
    c_lo = max(upper.c0, lower.c0)
    c_hi = min(upper.c1, lower.c1)
    if c_lo > c_hi:
        raise ValueError("no overlap")
    ru = upper.rows[c_lo - upper.c0 : c_hi - upper.c0 + 1]
    rl = lower.rows[c_lo - lower.c0 : c_hi - lower.c0 + 1]
    if mode == "per_ascan":
        return scan.axial_scale * (rl - ru)
    out = np.empty(c_hi - c_lo + 1)
    for j, col in enumerate(range(c_lo, c_hi + 1)):
        try:
            out[j] = perpendicular_thickness(upper, lower, col, scan)
        except NoIntersectionError:
            out[j] = np.nan
    return out


def _arc_lengths(upper: BoundaryTrace, scan: BScan) -> np.ndarray:
    """Cumulative micron arc length along the trace, one entry per column."""
    dr = np.diff(upper.rows) * scan.axial_scale
    seg = np.hypot(scan.lateral_scale, dr)
    return np.concatenate(([0.0], np.cumsum(seg)))


def _nearest_arc_offset(arc: np.ndarray, target: float) -> int:
    """Index whose arc distance is nearest the target; ties round outward."""
    diffs = np.abs(arc - target)
    k = int(np.argmin(diffs))
    if k + 1 < arc.size and diffs[k + 1] == diffs[k]:
        k += 1
    return k


def build_roi(
    upper: BoundaryTrace,
    lower: BoundaryTrace,
    scan: BScan,
    spec: RoiSpec,
) -> RoiGeometry:
    """Construct the fovea-centred ROI geometry between two traces.

    The centre is the upper-trace point nearest the fovea; endpoints sit
    ``half_width_microns`` of arc length away on each side, measured in
    micron space along the upper trace. The ROI contains every choroid
    pixel whose centre lies between the two endpoint cutting lines; the
    interval is half-open (the low-column line is included, the
    high-column line excluded) so adjacent ROIs tile without overlap.

    Raises
    ------
    ValueError
        When the fovea lies outside the traced span, or the trace is too
        short for the requested half-width (the message reports the
        achievable maximum).
    """
    region = region_from_traces(upper, lower, scan.pixels.shape)
    if not upper.c0 <= spec.fovea.col <= upper.c1:
        raise ValueError(
            f"fovea column {spec.fovea.col} outside traced span [{upper.c0}, {upper.c1}]"
        )
    cols = upper.columns
    d2 = (cols - spec.fovea.col) ** 2 + (upper.rows - spec.fovea.row) ** 2
    ci = int(np.argmin(d2))

    cum = _arc_lengths(upper, scan)
    hw = float(spec.half_width_microns)
    left_max = float(cum[ci] - cum[0])
    right_max = float(cum[-1] - cum[ci])
    if min(left_max, right_max) < hw:
        raise ValueError(
            f"trace too short for half-width {hw:.1f} microns: "
            f"achievable maximum is {min(left_max, right_max):.1f} microns"
        )
    kl = _nearest_arc_offset(cum[ci] - cum[: ci + 1][::-1], hw)
    kr = _nearest_arc_offset(cum[ci:] - cum[ci], hw)
    if kl == 0 or kr == 0:
        raise ValueError("half_width_microns too small: endpoint coincides with the ROI centre")
    il, ir = ci - kl, ci + kr

    lat, ax = scan.lateral_scale, scan.axial_scale
    segments = []
    directions = []
    for idx in (il, ir):
        col_e = int(cols[idx])
        row_e = float(upper.rows[idx])
        if spec.alignment == "choroid_aligned":
            d = _perpendicular_direction(upper, col_e, scan, spec.tangent_offset_px)
            _, fx, fy = _lower_hit(upper, lower, col_e, scan, spec.tangent_offset_px)
            foot = PixelPoint(fx / lat, fy / ax)
        else:
            d = (0.0, 1.0)
            foot = PixelPoint(float(col_e), lower.row_at(col_e))
        directions.append(d)
        segments.append((PixelPoint(float(col_e), row_e), foot))

    fx_mic = spec.fovea.col * lat
    fy_mic = spec.fovea.row * ax
    shape = scan.pixels.shape
    xs = np.arange(shape[1]) * lat
    ys = np.arange(shape[0]) * ax
    mask = region.pixels.copy()
    for k, (top, _) in enumerate(segments):
        dx, dy = directions[k]
        px, py = top.col * lat, top.row * ax
        s_f = dx * (fy_mic - py) - dy * (fx_mic - px)
        if s_f == 0.0:
            raise ValueError("degenerate ROI: fovea lies on an endpoint cutting line")
        g = dx * (ys[:, None] - py) - dy * (xs[None, :] - px)
        # half-open interval: include the low-column line, exclude the other
        if k == 0:
            keep = g >= 0 if s_f > 0 else g <= 0
        else:
            keep = g > 0 if s_f > 0 else g < 0
        mask &= keep

    polygon = [segments[0][0], segments[0][1], segments[1][1], segments[1][0]]
    return RoiGeometry(
        centre_col=int(cols[ci]),
        centre=PixelPoint(float(cols[ci]), float(upper.rows[ci])),
        endpoint_cols=(int(cols[il]), int(cols[ir])),
        segments=tuple(segments),
        polygon=polygon,
        mask=mask,
        alignment=spec.alignment,
    )


def measure_roi(
    upper: BoundaryTrace,
    lower: BoundaryTrace,
    vessels: VesselMask | None,
    scan: BScan,
    spec: RoiSpec,
) -> RoiReport:
    """Measure SFCT, average thickness, area, vessel area, and CVI.

    SFCT is the perpendicular thickness at the ROI centre column; average
    thickness is the mean perpendicular thickness sampled at every ROI
    column (columns whose ray exits the traced range are skipped); areas
    multiply pixel counts by the physical pixel area. With ``vessels``
    None the vessel area and CVI are omitted.
    """
    geo = build_roi(upper, lower, scan, spec)
    n_pixels = int(np.count_nonzero(geo.mask))
    if n_pixels == 0:
        raise ValueError("ROI contains no pixels")
    pa = pixel_area_mm2(scan)
    area = n_pixels * pa
    sfct = perpendicular_thickness(upper, lower, geo.centre_col, scan, spec.tangent_offset_px)

    samples = []
    for col in np.flatnonzero(geo.mask.any(axis=0)):
        try:
            samples.append(
                perpendicular_thickness(upper, lower, int(col), scan, spec.tangent_offset_px)
            )
        except NoIntersectionError:
            continue
    if not samples:
        raise NoIntersectionError(
            "no intersection: every ROI column's perpendicular ray leaves the lower trace range"
        )
    avg = float(np.mean(samples))

    vessel_area = None
    cvi = None
    if vessels is not None:
        if vessels.pixels.shape != scan.pixels.shape:
            raise ValueError("vessel mask and scan must share a shape")
        vessel_area = int(np.count_nonzero(vessels.pixels & geo.mask)) * pa
        cvi = vessel_area / area
    return RoiReport(
        sfct_microns=sfct,
        avg_thickness_microns=avg,
        area_mm2=area,
        vessel_area_mm2=vessel_area,
        cvi=cvi,
        roi_polygon=geo.polygon,
    )
