"""Shared domain types for OCT choroid analysis.

Images are 8-bit grayscale arrays in raster order: row 0 at the top,
rows increase downward, columns increase rightward. Pixel scales are
anisotropic (axial microns-per-pixel vertically, lateral horizontally).
"""

import contextlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

EYES = ("left", "right", "unknown")
TRACE_KINDS = ("rpe_choroid", "choroid_sclera")


def round_half_away(x):
    """Round to nearest integer, halves away from zero (numpy rounds halves to even)."""
    x = np.asarray(x, dtype=float)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(int)


@dataclass(frozen=True)
class PixelPoint:
    """A (column, row) image coordinate; real-valued unless used as an index."""

    col: float
    row: float

    def as_int(self):
        return PixelPoint(int(round_half_away(self.col)), int(round_half_away(self.row)))


@dataclass(frozen=True)
class BScan:
    """A grayscale OCT B-scan with physical pixel scales.

    Parameters
    ----------
    pixels : ndarray
        2-D uint8 array, rows M x columns N.
    axial_scale : float
        Microns per pixel, vertical.
    lateral_scale : float
        Microns per pixel, horizontal.
    frontal_scale : float or None
        Microns between adjacent B-scans in a volume; only needed for maps.
    eye : str
        One of "left", "right", "unknown".
    id : str
        Opaque identifier.
    """

    pixels: np.ndarray
    axial_scale: float
    lateral_scale: float
    frontal_scale: float | None = None
    eye: str = "unknown"
    id: str = ""

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("pixels must be a non-empty 2-D array")
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise ValueError("intensities must lie in [0, 255]")
            px = px.astype(np.uint8)
        else:
            px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        if not (self.axial_scale > 0 and self.lateral_scale > 0):
            raise ValueError("pixel scales must be positive")
        if self.frontal_scale is not None and not self.frontal_scale > 0:
            raise ValueError("frontal_scale must be positive when set")
        if self.eye not in EYES:
            raise ValueError(f"eye must be one of {EYES}")

    @property
    def n_rows(self):
        return self.pixels.shape[0]

    @property
    def n_cols(self):
        return self.pixels.shape[1]


@dataclass(frozen=True)
class BoundaryTrace:
    """Sub-pixel row position per column for one choroid boundary.

    ``rows[i]`` is the boundary row at column ``c0 + i``; ``band_lower`` and
    ``band_upper`` bound the 95% credible band pointwise
    (band_lower <= rows <= band_upper in row coordinates).
    """

    kind: str
    c0: int
    rows: np.ndarray
    band_lower: np.ndarray
    band_upper: np.ndarray

    def __post_init__(self):
        if self.kind not in TRACE_KINDS:
            raise ValueError(f"kind must be one of {TRACE_KINDS}")
        for name in ("rows", "band_lower", "band_upper"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.size < 1:
                raise ValueError(f"{name} must be a non-empty 1-D array")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.rows.shape == self.band_lower.shape == self.band_upper.shape):
            raise ValueError("rows and bands must have equal length")
        if np.any(self.band_lower > self.rows + 1e-9) or np.any(self.band_upper < self.rows - 1e-9):
            raise ValueError("credible band must contain the trace pointwise")
        object.__setattr__(self, "c0", int(self.c0))

    @property
    def c1(self):
        return self.c0 + self.rows.size - 1

    @property
    def columns(self):
        return np.arange(self.c0, self.c1 + 1)

    def row_at(self, col):
        """Boundary row at an integer column inside [c0, c1]."""
        if not self.c0 <= col <= self.c1:
            raise ValueError(f"column {col} outside trace range [{self.c0}, {self.c1}]")
        return float(self.rows[int(col) - self.c0])

    def to_dict(self):
        return {
            "kind": self.kind,
            "c0": int(self.c0),
            "rows": [float(v) for v in self.rows],
            "band_lower": [float(v) for v in self.band_lower],
            "band_upper": [float(v) for v in self.band_upper],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            kind=d["kind"],
            c0=int(d["c0"]),
            rows=np.asarray(d["rows"], dtype=float),
            band_lower=np.asarray(d["band_lower"], dtype=float),
            band_upper=np.asarray(d["band_upper"], dtype=float),
        )


@dataclass(frozen=True)
class RegionMask:
    """Binary mask of the choroidal space."""

    pixels: np.ndarray
    provenance: str = "external"

    def __post_init__(self):
        px = np.asarray(self.pixels).astype(bool)
        if px.ndim != 2:
            raise ValueError("mask must be 2-D")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        if self.provenance not in ("gpet_traces", "external"):
            raise ValueError("provenance must be 'gpet_traces' or 'external'")


@dataclass(frozen=True)
class VesselMask:
    """Binary mask of choroidal vasculature, clipped to its region."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels).astype(bool)
        if px.ndim != 2:
            raise ValueError("mask must be 2-D")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def clipped(cls, pixels, region: RegionMask):
        pixels = np.asarray(pixels).astype(bool)
        if pixels.shape != region.pixels.shape:
            raise ValueError("vessel and region masks must share a shape")
        return cls(pixels & region.pixels)


def region_from_traces(upper: BoundaryTrace, lower: BoundaryTrace, shape) -> RegionMask:
    """Rasterise the space between two boundary traces into a RegionMask.

    A pixel is inside iff its row lies between the rounded upper and lower
    trace rows (inclusive) and its column is inside both traces' ranges.
    Rounding is half-away-from-zero.

    Raises
    ------
    ValueError
        "no overlap" when the column ranges are disjoint; "crossing traces"
        when the lower trace sits above the upper trace at a shared column.
    """
    m_rows, n_cols = int(shape[0]), int(shape[1])
    c_lo = max(upper.c0, lower.c0)
    c_hi = min(upper.c1, lower.c1)
    if c_lo > c_hi:
        raise ValueError("no overlap")
    cols = np.arange(c_lo, c_hi + 1)
    ru = round_half_away(upper.rows[c_lo - upper.c0 : c_hi - upper.c0 + 1])
    rl = round_half_away(lower.rows[c_lo - lower.c0 : c_hi - lower.c0 + 1])
    if np.any(rl < ru):
        raise ValueError("crossing traces")
    ru = np.clip(ru, 0, m_rows - 1)
    rl = np.clip(rl, 0, m_rows - 1)
    mask = np.zeros((m_rows, n_cols), dtype=bool)
    rows_grid = np.arange(m_rows)[:, None]
    in_cols = (cols >= 0) & (cols < n_cols)
    mask[:, cols[in_cols]] = (rows_grid >= ru[in_cols]) & (rows_grid <= rl[in_cols])
    return RegionMask(mask, provenance="gpet_traces")


def pixel_area_mm2(scan: BScan) -> float:
    """Physical area of one pixel in mm^2 (axial * lateral * 1e-6)."""
    return scan.axial_scale * scan.lateral_scale * 1e-6


def read_image(path) -> np.ndarray:
    """Read an 8-bit grayscale PNG as a uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def image_png_bytes(pixels) -> bytes:
    """Encode an 8-bit grayscale image as PNG bytes (deterministic)."""
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8:
        pixels = np.clip(np.rint(pixels), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def mask_png_bytes(mask) -> bytes:
    """Encode a boolean mask as {0,255} PNG bytes."""
    arr = np.where(np.asarray(mask).astype(bool), 255, 0).astype(np.uint8)
    return image_png_bytes(arr)


def write_image(path, pixels) -> None:
    """Write a grayscale image as an 8-bit PNG, rounding and clipping if needed."""
    with open(path, "wb") as f:
        f.write(image_png_bytes(pixels))


def read_mask(path) -> np.ndarray:
    """Read a {0,255} PNG mask as a boolean array."""
    return read_image(path) >= 128


def write_mask(path, mask) -> None:
    """Write a boolean mask as an 8-bit {0,255} PNG."""
    with open(path, "wb") as f:
        f.write(mask_png_bytes(mask))


def write_atomic(path, data: bytes) -> str:
    """Write bytes via a same-directory temp file and an atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise
    return str(path)


def canonical_json(obj) -> str:
    """Deterministic JSON serialisation used for every artifact this package writes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"
