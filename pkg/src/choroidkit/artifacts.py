"""Canonical artifact payloads shared by the command line and the HTTP service.

Both front ends must emit byte-identical artifacts for identical inputs,
so every JSON document they produce is built here and serialised with
:func:`choroidkit.core.canonical_json`.
"""

import math

import numpy as np

from choroidkit.core import canonical_json, pixel_area_mm2


def jsonable(obj):
    """Recursively convert an object into plain JSON-serialisable values.

    Numpy scalars and arrays become Python numbers and lists; non-finite
    floats become None (strict JSON has no NaN/Infinity literal).
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    return obj


def dumps(payload) -> bytes:
    """Canonical JSON bytes of a payload (sanitised, sorted keys, trailing newline)."""
    return canonical_json(jsonable(payload)).encode("utf-8")


def trace_payload(result) -> dict:
    """JSON document for one traced boundary.

    Carries the trace with its credible band, the accepted observation
    set, the iteration count, and the optimised hyperparameters.
    """
    return {
        "trace": result.trace.to_dict(),
        "observations": [[int(c), int(r)] for c, r in result.observations],
        "iterations": int(result.iterations),
        "optimised_cov": {
            "kind": result.optimised_cov.kind,
            "sigma_f": float(result.optimised_cov.sigma_f),
            "sigma_l": float(result.optimised_cov.sigma_l),
        },
        "optimised_noise": float(result.optimised_noise),
    }


def vessels_payload(mask, region, scan) -> dict:
    """JSON summary of a vessel segmentation: pixel counts, areas, CVI preview.

    The CVI preview is the vessel-to-region area ratio over the whole
    segmented region (a fovea-centred ROI refines it later); None when
    the region is empty.
    """
    v = int(np.count_nonzero(mask.pixels))
    r = int(np.count_nonzero(region.pixels))
    pa = pixel_area_mm2(scan)
    return {
        "vessel_pixels": v,
        "region_pixels": r,
        "vessel_area_mm2": v * pa,
        "region_area_mm2": r * pa,
        "cvi_preview": (v / r) if r > 0 else None,
    }


def measure_payload(report) -> dict:
    """JSON document for one ROI measurement report."""
    return report.to_dict()
