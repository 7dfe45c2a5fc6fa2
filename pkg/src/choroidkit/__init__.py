"""Choroid segmentation and fovea-centred measurement toolkit for OCT B-scans."""

from choroidkit.core import (
    BScan,
    BoundaryTrace,
    PixelPoint,
    RegionMask,
    VesselMask,
    pixel_area_mm2,
    region_from_traces,
)
from choroidkit.maps import (
    EnFaceMap,
    EtdrsReport,
    PeripapillaryReport,
    build_map,
    etdrs_means,
    peripapillary_means,
)
from choroidkit.measure import (
    RoiReport,
    RoiSpec,
    build_roi,
    measure_roi,
    perpendicular_thickness,
    thickness_array,
)
from choroidkit.metrics import (
    PairedSeries,
    auc,
    average_repeats,
    mae,
    mask_agreement,
    mean_difference,
    measurement_noise,
    pearson,
    spearman,
)

__version__ = "0.1.0"

__all__ = [
    "BScan",
    "BoundaryTrace",
    "EnFaceMap",
    "EtdrsReport",
    "PairedSeries",
    "PeripapillaryReport",
    "PixelPoint",
    "RegionMask",
    "RoiReport",
    "RoiSpec",
    "VesselMask",
    "auc",
    "average_repeats",
    "build_map",
    "build_roi",
    "etdrs_means",
    "mae",
    "mask_agreement",
    "mean_difference",
    "measure_roi",
    "measurement_noise",
    "pearson",
    "peripapillary_means",
    "perpendicular_thickness",
    "pixel_area_mm2",
    "region_from_traces",
    "spearman",
    "thickness_array",
    "__version__",
]
