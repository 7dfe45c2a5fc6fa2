"""Synthetic two-band fixtures with exact ground truth.

Each fixture mimics a B-scan's vertical structure: a bright layer above
the upper boundary, a darker band between the boundaries, and a brighter
layer below. Transitions are smooth logistic ramps so the directional
edge maps respond the way they do on real scans, where boundaries blur
over several rows.
"""

from dataclasses import dataclass, field

import numpy as np

from choroidkit.core import BScan, BoundaryTrace, RegionMask, VesselMask, region_from_traces

PHANTOM_KINDS = ("flat", "skewed", "parabolic")


@dataclass(frozen=True)
class Phantom:
    """A synthetic scan plus the ground truth used to generate it."""

    scan: BScan
    upper_rows: np.ndarray
    lower_rows: np.ndarray
    region: RegionMask
    vessel_mask: VesselMask | None
    params: dict = field(default_factory=dict)

    def truth_traces(self):
        upper = BoundaryTrace("rpe_choroid", 0, self.upper_rows, self.upper_rows, self.upper_rows)
        lower = BoundaryTrace("choroid_sclera", 0, self.lower_rows, self.lower_rows, self.lower_rows)
        return upper, lower

    def endpoints_upper(self):
        n = self.upper_rows.size
        return (0.0, float(self.upper_rows[0])), (float(n - 1), float(self.upper_rows[-1]))

    def endpoints_lower(self):
        n = self.lower_rows.size
        return (0.0, float(self.lower_rows[0])), (float(n - 1), float(self.lower_rows[-1]))


def _logistic(z):
    return 1.0 / (1.0 + np.exp(-z))


def make_phantom(
    kind: str = "flat",
    shape=(256, 256),
    upper_row: float | None = None,
    thickness: float | None = None,
    angle_deg: float = 5.0,
    sag: float | None = None,
    noise_sigma: float = 0.0,
    seed: int = 0,
    transition_upper: float = 0.75,
    transition_lower: float = 2.0,
    levels=(185, 60, 150),
    axial_scale: float = 10.0,
    lateral_scale: float = 10.0,
    eye: str = "right",
    n_vessels: int = 0,
) -> Phantom:
    """Build a two-band fixture of the given kind.

    kind
        "flat": horizontal boundaries. "skewed": both boundaries tilted
        by angle_deg (positive tilts down to the right, measured in
        micron space). "parabolic": both boundaries follow a parabola
        sagging by `sag` pixels at the centre.
    levels
        Intensities (above, band, below).
    n_vessels
        Dark elliptical blobs placed inside the band, with the exact
        ground-truth mask recorded.
    """
    if kind not in PHANTOM_KINDS:
        raise ValueError(f"kind must be one of {PHANTOM_KINDS}")
    m, n = int(shape[0]), int(shape[1])
    if upper_row is None:
        upper_row = 0.35 * m
    if thickness is None:
        thickness = 0.3 * m
    cols = np.arange(n, dtype=float)
    if kind == "flat":
        upper = np.full(n, float(upper_row))
    elif kind == "skewed":
        slope = np.tan(np.deg2rad(angle_deg)) * lateral_scale / axial_scale
        upper = upper_row + slope * (cols - (n - 1) / 2.0)
    else:
        if sag is None:
            sag = 0.08 * m
        xc = (cols - (n - 1) / 2.0) / ((n - 1) / 2.0)
        upper = upper_row + sag * (xc**2 - 0.5)
    lower = upper + float(thickness)
    if upper.min() < 5 or lower.max() > m - 6:
        raise ValueError("boundaries leave the image; shrink thickness or tilt")

    rows = np.arange(m, dtype=float)[:, None]
    above, band, below = (float(v) for v in levels)
    # the upper junction is sharp (hyperreflective layer above), the
    # lower one diffuse, matching how the boundaries appear in OCT
    img = (
        above
        + (band - above) * _logistic((rows - upper[None, :]) / transition_upper)
        + (below - band) * _logistic((rows - lower[None, :]) / transition_lower)
    )

    vessel_mask = None
    rng = np.random.default_rng(seed)
    if n_vessels > 0:
        vessels = np.zeros((m, n), dtype=bool)
        yy = np.arange(m)[:, None]
        xx = np.arange(n)[None, :]
        for _ in range(n_vessels):
            cx = rng.uniform(0.1 * n, 0.9 * n)
            t_at = np.interp(cx, cols, upper)
            b_at = np.interp(cx, cols, lower)
            ry = rng.uniform(0.08, 0.18) * thickness
            rx = ry * rng.uniform(1.0, 2.0)
            cy = rng.uniform(t_at + ry + 4, b_at - ry - 4)
            blob = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
            vessels |= blob
        img = np.where(vessels, band - 35.0, img)
        vessel_mask = VesselMask(vessels)

    if noise_sigma > 0:
        img = img + rng.normal(0.0, noise_sigma, size=img.shape)
    pixels = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    scan = BScan(pixels, axial_scale, lateral_scale, frontal_scale=None, eye=eye, id=f"phantom-{kind}")

    upper_tr = BoundaryTrace("rpe_choroid", 0, upper, upper, upper)
    lower_tr = BoundaryTrace("choroid_sclera", 0, lower, lower, lower)
    region = region_from_traces(upper_tr, lower_tr, (m, n))
    params = {
        "kind": kind,
        "shape": [m, n],
        "upper_row": float(upper_row),
        "thickness": float(thickness),
        "angle_deg": float(angle_deg),
        "noise_sigma": float(noise_sigma),
        "seed": int(seed),
        "transition_upper": float(transition_upper),
        "transition_lower": float(transition_lower),
        "axial_scale": float(axial_scale),
        "lateral_scale": float(lateral_scale),
        "eye": eye,
        "n_vessels": int(n_vessels),
    }
    return Phantom(scan, upper, lower, region, vessel_mask, params)


def two_tone(
    shape=(64, 64),
    bright: int = 200,
    dark: int = 40,
    n_blobs: int = 3,
    seed: int = 0,
):
    """Bright field with dark blobs: the exact two-cluster vessel fixture.

    Returns (pixels, blob_mask). Blobs are axis-aligned rectangles at
    least 3 px apart from each other and from the border, so every
    pixel is exactly `bright` or `dark` and the clusters are unambiguous.
    """
    m, n = int(shape[0]), int(shape[1])
    rng = np.random.default_rng(seed)
    img = np.full((m, n), bright, dtype=np.uint8)
    mask = np.zeros((m, n), dtype=bool)
    placed = 0
    attempts = 0
    while placed < n_blobs and attempts < 200:
        attempts += 1
        h = int(rng.integers(3, max(4, m // 6)))
        w = int(rng.integers(3, max(4, n // 6)))
        y = int(rng.integers(3, m - h - 3))
        x = int(rng.integers(3, n - w - 3))
        pad = mask[max(0, y - 3) : y + h + 3, max(0, x - 3) : x + w + 3]
        if pad.any():
            continue
        mask[y : y + h, x : x + w] = True
        placed += 1
    img[mask] = dark
    return img, mask
