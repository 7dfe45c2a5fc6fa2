"""Command-line workflows: fixtures, tracing, vessels, measurement, maps, comparison.

Every subcommand resolves its inputs in the same order: command-line
flag, then config-file entry, then built-in default. Artifacts are
written atomically (temporary file + rename) and serialised
canonically, so re-running a command with identical inputs and seed
reproduces every output byte for byte.

Exit codes: 0 success, 1 usage error, 2 processing error.
"""

import argparse
import contextlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from choroidkit import artifacts, maps, metrics, mmcq
from choroidkit.core import (
    EYES,
    BScan,
    BoundaryTrace,
    PixelPoint,
    RegionMask,
    VesselMask,
    image_png_bytes,
    mask_png_bytes,
    read_image,
    read_mask,
    write_atomic,
)
from choroidkit.gpet import GpetConfig, trace_choroid
from choroidkit.measure import ALIGNMENTS, RoiSpec, measure_roi
from choroidkit.phantom import PHANTOM_KINDS, make_phantom

_DEFAULT_SEED = 42
_SEED_ENV = "CHOROID_TRACE_SEED"
_METHODS = ("mmcq", "niblack", "vote")


class UsageError(Exception):
    """Invalid command line or config file; exits with status 1."""

    def __init__(self, message, usage=""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    # argparse would sys.exit(2); usage problems must exit 1 instead
    def error(self, message):
        raise UsageError(message, usage=self.format_usage())


def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int(text):
    return int(str(text).strip())


def _float(text):
    return float(str(text).strip())


def _point(text):
    parts = str(text).split(",")
    if len(parts) != 2:
        raise ValueError(f"expected 'col,row', got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _points(text):
    items = [p for p in str(text).split(";") if p.strip()]
    return tuple(_point(p) for p in items)


def _endpoints(text):
    pts = _points(text)
    if len(pts) != 2:
        raise ValueError(f"expected two points 'col,row;col,row', got {text!r}")
    return pts


def _shape(text):
    parts = str(text).lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"expected 'ROWSxCOLS', got {text!r}")
    rows, cols = int(parts[0]), int(parts[1])
    if rows < 1 or cols < 1:
        raise ValueError("shape dimensions must be positive")
    return (rows, cols)


def _choice(options):
    def convert(text):
        value = str(text).strip()
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return value

    return convert


class _FlagSet:
    """Registry of a subcommand's flags; backs the key=value config file.

    Flags are registered with a None default so resolution can tell
    "given on the command line" from "absent"; config entries fill the
    gaps and real defaults apply last.
    """

    def __init__(self, parser):
        self.parser = parser
        self.specs = {}

    def add(self, name, convert, default=None, required=False, nargs=None, help=""):
        dest = name[2:].replace("-", "_")
        if convert is _bool:
            self.parser.add_argument(name, dest=dest, action="store_const", const="true", help=help)
        elif nargs is not None:
            self.parser.add_argument(name, dest=dest, nargs=nargs, default=None, metavar="X", help=help)
        else:
            self.parser.add_argument(name, dest=dest, default=None, metavar="X", help=help)
        self.specs[dest] = (name, convert, default, required, nargs)


def _read_config(path):
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for number, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        key, sep, value = text.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise UsageError(f"{path}:{number}: expected key = value")
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
            value = value[1:-1]
        out[key] = value
    return out


def _resolve(args):
    """Merge command line, config file, and defaults into one namespace."""
    flags = args._flags
    cfg = {}
    for key, value in (_read_config(args.config) if args.config else {}).items():
        dest = key.replace("-", "_")
        if dest not in flags.specs:
            raise UsageError(f"unknown config key '{key}'")
        cfg[dest] = value
    out = {}
    for dest, (name, convert, default, required, nargs) in flags.specs.items():
        raw = getattr(args, dest)
        if raw is None and dest in cfg:
            raw = cfg[dest].split() if nargs is not None else cfg[dest]
        if raw is None:
            if required:
                raise UsageError(f"missing required input: {name}")
            out[dest] = default
            continue
        try:
            if nargs is not None:
                if nargs != "+" and len(raw) != nargs:
                    raise ValueError(f"expected exactly {nargs} values")
                out[dest] = [convert(v) for v in raw]
            else:
                out[dest] = convert(raw)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid value for {name}: {exc}") from exc
    return argparse.Namespace(**out)


def _seed(ns):
    if getattr(ns, "seed", None) is not None:
        return ns.seed
    env = os.environ.get(_SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"invalid {_SEED_ENV} value: {env!r}") from exc
    return _DEFAULT_SEED


def _emit(ns, event, **fields):
    if getattr(ns, "json_log", False):
        sys.stderr.write(json.dumps({"event": event, **fields}, sort_keys=True) + "\n")


def _read_series(path):
    """One float per line; a single non-numeric first line is skipped as a header."""
    values = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for index, line in enumerate(lines):
        text = line.strip()
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError:
            if index == 0:
                continue
            raise ValueError(f"{path}: line {index + 1} is not a number: {text!r}") from None
    if not values:
        raise ValueError(f"{path}: no numeric values")
    return np.asarray(values, dtype=float)


def _load_metadata(image_path: Path):
    sibling = image_path.with_suffix(".json")
    if not sibling.exists():
        return {}
    return json.loads(sibling.read_text(encoding="utf-8"))


def _meta_points(meta, key):
    pts = meta.get(key)
    if pts is None:
        return None
    return tuple((float(c), float(r)) for c, r in pts)


def _scan_from(image_path: Path, ns, meta, require_scales: bool) -> BScan:
    axial = ns.axial if ns.axial is not None else meta.get("axial_scale")
    lateral = ns.lateral if ns.lateral is not None else meta.get("lateral_scale")
    if require_scales:
        if axial is None:
            raise UsageError(f"missing required input: --axial (no sibling metadata for {image_path.name})")
        if lateral is None:
            raise UsageError(f"missing required input: --lateral (no sibling metadata for {image_path.name})")
    axial = 10.0 if axial is None else float(axial)
    lateral = 10.0 if lateral is None else float(lateral)
    eye = meta.get("eye", "unknown")
    if eye not in EYES:
        eye = "unknown"
    return BScan(read_image(image_path), axial, lateral, eye=eye, id=image_path.stem)


def _run_batch(ns, tasks, jobs):
    """Run (label, callable) tasks, maybe in parallel; report collected failures.

    Each callable returns the paths it wrote and touches no shared
    state, so the artifact bytes cannot depend on scheduling.
    """
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    results = []
    errors = []
    if jobs <= 1 or len(tasks) <= 1:
        outcomes = []
        for label, task in tasks:
            try:
                outcomes.append((label, task(), None))
            except (ValueError, OSError, KeyError, RuntimeError) as exc:
                outcomes.append((label, None, exc))
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [(label, pool.submit(task)) for label, task in tasks]
            outcomes = []
            for label, future in futures:
                try:
                    outcomes.append((label, future.result(), None))
                except (ValueError, OSError, KeyError, RuntimeError) as exc:
                    outcomes.append((label, None, exc))
    for label, written, exc in outcomes:
        if exc is not None:
            errors.append(f"{label}: {exc}")
        else:
            results.extend(written)
    for path in results:
        _emit(ns, "written", path=path)
    for message in errors:
        print(f"error: {message}", file=sys.stderr)
    _emit(ns, "done", written=len(results), failed=len(errors))
    return 2 if errors else 0


def _out_json(ns, payload) -> int:
    data = artifacts.dumps(payload)
    written = []
    if getattr(ns, "out", None):
        written.append(write_atomic(ns.out, data))
    for path in written:
        _emit(ns, "written", path=path)
    sys.stdout.write(data.decode("utf-8"))
    _emit(ns, "done", written=len(written), failed=0)
    return 0


def cmd_phantom(ns) -> int:
    ph = make_phantom(
        kind=ns.kind,
        shape=ns.shape,
        upper_row=ns.upper_row,
        thickness=ns.thickness,
        angle_deg=ns.angle,
        sag=ns.sag,
        noise_sigma=ns.noise,
        seed=_seed(ns),
        axial_scale=ns.axial,
        lateral_scale=ns.lateral,
        eye=ns.eye,
        n_vessels=ns.n_vessels,
    )
    prefix = str(ns.out)
    meta = {
        "axial_scale": ph.scan.axial_scale,
        "lateral_scale": ph.scan.lateral_scale,
        "eye": ph.scan.eye,
        "endpoints_upper": [list(p) for p in ph.endpoints_upper()],
        "endpoints_lower": [list(p) for p in ph.endpoints_lower()],
        "upper_rows": ph.upper_rows,
        "lower_rows": ph.lower_rows,
        "params": ph.params,
    }
    written = [
        write_atomic(prefix + ".png", image_png_bytes(ph.scan.pixels)),
        write_atomic(prefix + ".json", artifacts.dumps(meta)),
        write_atomic(prefix + "_truth_region.png", mask_png_bytes(ph.region.pixels)),
    ]
    if ph.vessel_mask is not None:
        written.append(write_atomic(prefix + "_truth_vessels.png", mask_png_bytes(ph.vessel_mask.pixels)))
    for path in written:
        _emit(ns, "written", path=path)
    _emit(ns, "done", written=len(written), failed=0)
    return 0


def _gpet_config(ns, seed) -> GpetConfig:
    kwargs = {
        "n_curves": ns.n_curves,
        "keep_fraction": ns.keep_fraction,
        "delta_x": ns.delta_x,
        "noise_sigma": ns.noise_sigma,
        "kde_truncation_radius": ns.kde_radius,
    }
    kwargs = {k: v for k, v in kwargs.items() if v is not None}
    return GpetConfig(seed=seed, **kwargs)


def cmd_trace(ns) -> int:
    seed = _seed(ns)
    config = _gpet_config(ns, seed)
    tasks = []
    for image in ns.image:
        image_path = Path(image)
        meta = _load_metadata(image_path)
        scan = _scan_from(image_path, ns, meta, require_scales=False)
        upper = ns.endpoints_upper or _meta_points(meta, "endpoints_upper")
        lower = ns.endpoints_lower or _meta_points(meta, "endpoints_lower")
        if upper is None:
            raise UsageError(f"missing required input: --endpoints-upper (no sibling metadata for {image_path.name})")
        if lower is None:
            raise UsageError(f"missing required input: --endpoints-lower (no sibling metadata for {image_path.name})")
        guides_upper = ns.guides_upper or ()
        guides_lower = ns.guides_lower or ()
        out_dir = Path(ns.out_dir) if ns.out_dir else image_path.parent
        stem = image_path.stem

        def task(scan=scan, upper=upper, lower=lower, gu=guides_upper, gl=guides_lower, out_dir=out_dir, stem=stem):
            up, low, region = trace_choroid(scan, upper, lower, gu, gl, config)
            return [
                write_atomic(out_dir / f"{stem}_upper.json", artifacts.dumps(artifacts.trace_payload(up))),
                write_atomic(out_dir / f"{stem}_lower.json", artifacts.dumps(artifacts.trace_payload(low))),
                write_atomic(out_dir / f"{stem}_region.png", mask_png_bytes(region.pixels)),
            ]

        tasks.append((str(image_path), task))
    return _run_batch(ns, tasks, ns.jobs)


def _mmcq_config(ns) -> mmcq.MmcqConfig:
    kwargs = {
        "K": ns.clusters,
        "k_vessel": ns.keep_clusters,
        "choriocapillaris_microns": ns.cc_microns,
    }
    kwargs = {k: v for k, v in kwargs.items() if v is not None}
    return mmcq.MmcqConfig(**kwargs)


def _load_trace(path) -> BoundaryTrace:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "trace" not in doc:
        raise ValueError(f"{path}: not a trace artifact (no 'trace' key)")
    return BoundaryTrace.from_dict(doc["trace"])


def cmd_vessels(ns) -> int:
    config = _mmcq_config(ns)
    if len(ns.image) > 1 and (ns.region or ns.upper):
        raise UsageError("--region and --upper apply to a single --image")
    tasks = []
    for image in ns.image:
        image_path = Path(image)
        meta = _load_metadata(image_path)
        scan = _scan_from(image_path, ns, meta, require_scales=True)
        art_dir = Path(ns.artifacts_dir) if ns.artifacts_dir else image_path.parent
        stem = image_path.stem
        region_path = Path(ns.region) if ns.region else art_dir / f"{stem}_region.png"
        if not region_path.exists():
            raise UsageError(f"missing required input: --region (no {region_path})")
        upper_path = Path(ns.upper) if ns.upper else art_dir / f"{stem}_upper.json"
        if ns.method != "niblack" and not upper_path.exists():
            raise UsageError(f"missing required input: --upper (no {upper_path})")
        out_dir = Path(ns.out_dir) if ns.out_dir else image_path.parent

        def task(scan=scan, region_path=region_path, upper_path=upper_path, out_dir=out_dir, stem=stem):
            region = RegionMask(read_mask(region_path))
            if ns.method == "niblack":
                mask = mmcq.niblack_segment(scan, region, window=ns.window, k=ns.offset)
            else:
                upper = _load_trace(upper_path)
                if ns.method == "vote":
                    mask = mmcq.majority_vote_vessels(scan, region, upper, config, votes_required=ns.votes_required)
                else:
                    mask = mmcq.segment_vessels(scan, region, upper, config)
            payload = artifacts.vessels_payload(mask, region, scan)
            return [
                write_atomic(out_dir / f"{stem}_vessels.png", mask_png_bytes(mask.pixels)),
                write_atomic(out_dir / f"{stem}_vessels.json", artifacts.dumps(payload)),
            ]

        tasks.append((str(image_path), task))
    return _run_batch(ns, tasks, ns.jobs)


def cmd_measure(ns) -> int:
    image_path = Path(ns.image)
    meta = _load_metadata(image_path)
    scan = _scan_from(image_path, ns, meta, require_scales=True)
    stem = image_path.stem
    upper_path = Path(ns.upper) if ns.upper else image_path.parent / f"{stem}_upper.json"
    lower_path = Path(ns.lower) if ns.lower else image_path.parent / f"{stem}_lower.json"
    for name, path in (("--upper", upper_path), ("--lower", lower_path)):
        if not path.exists():
            raise UsageError(f"missing required input: {name} (no {path})")
    vessels = None
    if not ns.ignore_vessels:
        vessels_path = Path(ns.vessels) if ns.vessels else image_path.parent / f"{stem}_vessels.png"
        if ns.vessels or vessels_path.exists():
            vessels = VesselMask(read_mask(vessels_path))
    spec = RoiSpec(
        fovea=PixelPoint(*ns.fovea),
        half_width_microns=ns.roi_microns,
        alignment=ns.alignment,
        tangent_offset_px=ns.tangent_offset,
    )
    report = measure_roi(_load_trace(upper_path), _load_trace(lower_path), vessels, scan, spec)
    return _out_json(ns, artifacts.measure_payload(report))


def _map_preview(values) -> bytes:
    finite = np.isfinite(values)
    img = np.zeros(values.shape, dtype=float)
    if finite.any():
        lo = float(values[finite].min())
        hi = float(values[finite].max())
        if hi > lo:
            img[finite] = (values[finite] - lo) / (hi - lo) * 255.0
        else:
            img[finite] = 255.0
    return image_png_bytes(img)


def cmd_map(ns) -> int:
    doc = json.loads(Path(ns.stack).read_text(encoding="utf-8"))
    for key in ("arrays", "fovea_cols", "fovea_scan_index", "lateral_scale", "frontal_scale"):
        if key not in doc:
            raise ValueError(f"{ns.stack}: missing key '{key}'")
    arrays = [
        np.asarray([np.nan if v is None else float(v) for v in arr], dtype=float)
        for arr in doc["arrays"]
    ]
    carrier = BScan(
        np.zeros((1, 1), dtype=np.uint8),
        axial_scale=float(doc.get("axial_scale", 1.0)),
        lateral_scale=float(doc["lateral_scale"]),
        frontal_scale=float(doc["frontal_scale"]),
    )
    built = maps.build_map(
        arrays,
        [int(c) for c in doc["fovea_cols"]],
        int(doc["fovea_scan_index"]),
        carrier,
        ns.target,
        rotation_deg=ns.rotation,
    )
    payload = {
        "values": built.values,
        "fovea": [built.fovea.col, built.fovea.row],
        "px_scale_x": built.px_scale_x,
        "px_scale_y": built.px_scale_y,
        "rotation_deg": built.rotation_deg,
    }
    written = [write_atomic(ns.out, artifacts.dumps(payload))]
    if ns.png:
        written.append(write_atomic(ns.png, _map_preview(built.values)))
    for path in written:
        _emit(ns, "written", path=path)
    if ns.etdrs:
        eye = ns.eye if ns.eye is not None else doc.get("eye", "right")
        report = maps.etdrs_means(built, acquisition_angle_deg=ns.acquisition_angle, eye=eye)
        sys.stdout.write(artifacts.dumps(report.to_dict()).decode("utf-8"))
    _emit(ns, "done", written=len(written), failed=0)
    return 0


def cmd_peri(ns) -> int:
    values = _read_series(ns.thickness)
    report = maps.peripapillary_means(values, ns.temporal_centre, eye=ns.eye)
    return _out_json(ns, report.to_dict())


def cmd_compare(ns) -> int:
    mask_mode = ns.pred is not None or ns.truth is not None
    series_mode = ns.series is not None
    if mask_mode == series_mode:
        raise UsageError("exactly one of --pred/--truth or --series is required")
    if mask_mode:
        if ns.pred is None:
            raise UsageError("missing required input: --pred")
        if ns.truth is None:
            raise UsageError("missing required input: --truth")
        if ns.bland_altman:
            raise UsageError("--bland-altman applies to --series comparisons")
        truth = read_mask(ns.truth)
        out = {}
        if ns.auc:
            scores = read_image(ns.pred).astype(float) / 255.0
            out["auc"] = metrics.auc(scores, truth)
            pred = scores >= 0.5
        else:
            pred = read_mask(ns.pred)
        out.update(metrics.mask_agreement(pred, truth))
        return _out_json(ns, out)

    if ns.auc:
        raise UsageError("--auc applies to --pred/--truth comparisons")
    x = _read_series(ns.series[0])
    y = _read_series(ns.series[1])
    pairs = metrics.PairedSeries(x, y)
    out = {
        "n": pairs.n,
        "mean_difference": metrics.mean_difference(pairs),
        "mae": metrics.mae(pairs),
    }
    # constant or single-pair series leave these statistics undefined
    with contextlib.suppress(ValueError):
        out["pearson"] = metrics.pearson(pairs)
    with contextlib.suppress(ValueError):
        out["spearman"] = metrics.spearman(pairs)
    with contextlib.suppress(ValueError):
        out["measurement_noise_mean"] = float(np.mean(metrics.measurement_noise(pairs)))
    if ns.bland_altman:
        means = ((x + y) / 2.0).tolist()
        diffs = (x - y).tolist()
        lines = ["mean,diff"] + [f"{m!r},{d!r}" for m, d in zip(means, diffs)]
        path = write_atomic(ns.bland_altman, ("\n".join(lines) + "\n").encode("utf-8"))
        _emit(ns, "written", path=path)
    return _out_json(ns, out)


def cmd_serve(ns) -> int:
    import uvicorn

    from choroidkit.server import build_app

    app = build_app(persist_dir=ns.persist, default_seed=_seed(ns))
    uvicorn.run(app, host=ns.host, port=ns.port, log_level="warning")
    return 0


def _common_flags(flags):
    flags.add("--seed", _int, help="deterministic seed (flag > config > CHOROID_TRACE_SEED > 42)")
    flags.add("--json-log", _bool, default=False, help="emit JSON-lines progress on stderr")


def _scale_flags(flags):
    flags.add("--axial", _float, help="microns per pixel, vertical")
    flags.add("--lateral", _float, help="microns per pixel, horizontal")


def build_parser() -> _Parser:
    parser = _Parser(prog="choroidkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    def new(name, func, help):
        p = sub.add_parser(name, help=help, description=help)
        p.add_argument("--config", default=None, metavar="FILE", help="key = value file mirroring every flag")
        flags = _FlagSet(p)
        p.set_defaults(func=func, _flags=flags, _parser=p)
        return flags

    f = new("trace", cmd_trace, "trace both choroid boundaries and write trace JSONs plus a region mask")
    f.add("--image", str, required=True, nargs="+", help="input B-scan PNGs")
    f.add("--out-dir", str, help="output directory (default: beside each image)")
    f.add("--endpoints-upper", _endpoints, help="'col,row;col,row' (default: sibling metadata)")
    f.add("--endpoints-lower", _endpoints, help="'col,row;col,row' (default: sibling metadata)")
    f.add("--guides-upper", _points, help="extra pinned points 'col,row;...'")
    f.add("--guides-lower", _points, help="extra pinned points 'col,row;...'")
    f.add("--n-curves", _int, help="posterior curve samples per iteration")
    f.add("--keep-fraction", _float, help="fraction of best-scoring curves kept")
    f.add("--delta-x", _int, help="column bin width in pixels")
    f.add("--noise-sigma", _float, help="observation noise during tracing")
    f.add("--kde-radius", _int, help="kernel density truncation radius in pixels")
    f.add("--jobs", _int, default=1, help="parallel workers over input images")
    _scale_flags(f)
    _common_flags(f)

    f = new("vessels", cmd_vessels, "segment choroidal vessels inside a traced region")
    f.add("--image", str, required=True, nargs="+", help="input B-scan PNGs")
    f.add("--artifacts-dir", str, help="directory holding <stem>_region.png and <stem>_upper.json")
    f.add("--out-dir", str, help="output directory (default: beside each image)")
    f.add("--region", str, help="region mask PNG (single image only)")
    f.add("--upper", str, help="upper trace JSON (single image only)")
    f.add("--method", _choice(_METHODS), default="mmcq", help="mmcq, niblack, or vote")
    f.add("--clusters", _int, help="median-cut cluster count")
    f.add("--keep-clusters", _int, help="darkest clusters labelled vessel")
    f.add("--cc-microns", _float, help="choriocapillaris strip depth in microns")
    f.add("--window", _int, default=51, help="niblack window side length")
    f.add("--offset", _float, default=-0.05, help="niblack threshold offset in standard deviations")
    f.add("--votes-required", _int, default=15, help="votes needed across the 25 perturbed runs")
    f.add("--jobs", _int, default=1, help="parallel workers over input images")
    _scale_flags(f)
    _common_flags(f)

    f = new("measure", cmd_measure, "measure a fovea-centred ROI: SFCT, thickness, area, CVI")
    f.add("--image", str, required=True, help="input B-scan PNG")
    f.add("--upper", str, help="upper trace JSON (default: sibling <stem>_upper.json)")
    f.add("--lower", str, help="lower trace JSON (default: sibling <stem>_lower.json)")
    f.add("--vessels", str, help="vessel mask PNG (default: sibling <stem>_vessels.png when present)")
    f.add("--ignore-vessels", _bool, default=False, help="skip vessel area and CVI")
    f.add("--fovea", _point, required=True, help="fovea centre 'col,row'")
    f.add("--roi-microns", _float, default=3000.0, help="ROI half-width along the upper boundary")
    f.add("--alignment", _choice(ALIGNMENTS), default="choroid_aligned", help="ROI cutting geometry")
    f.add("--tangent-offset", _int, default=15, help="tangent estimation column offset")
    f.add("--out", str, help="also write the report JSON here")
    _scale_flags(f)
    _common_flags(f)

    f = new("map", cmd_map, "build an en-face map from per-scan thickness arrays")
    f.add("--stack", str, required=True, help="stack JSON: arrays, fovea_cols, fovea_scan_index, scales")
    f.add("--target", _shape, required=True, help="map resolution 'ROWSxCOLS'")
    f.add("--rotation", _float, default=0.0, help="acquisition rotation in degrees")
    f.add("--out", str, required=True, help="map JSON output path")
    f.add("--png", str, help="also write a grayscale preview PNG")
    f.add("--etdrs", _bool, default=False, help="print nine-field means to stdout")
    f.add("--eye", _choice(maps.LATERALITIES), help="laterality for field naming (default: stack file, then right)")
    f.add("--acquisition-angle", _float, default=0.0, help="quadrant axis angle in degrees")
    _common_flags(f)

    f = new("peri", cmd_peri, "sub-field means of a circular peripapillary thickness profile")
    f.add("--thickness", str, required=True, help="CSV of thickness values, one per line")
    f.add("--temporal-centre", _int, required=True, help="index of the temporal centre sample")
    f.add("--eye", _choice(maps.LATERALITIES), default="right", help="laterality")
    f.add("--out", str, help="also write the report JSON here")
    _common_flags(f)

    f = new("compare", cmd_compare, "agreement between two masks or two measurement series")
    f.add("--pred", str, help="predicted mask PNG (scores PNG with --auc)")
    f.add("--truth", str, help="ground-truth mask PNG")
    f.add("--auc", _bool, default=False, help="treat --pred as a score map and add AUC")
    f.add("--series", str, nargs=2, help="two CSV series to compare")
    f.add("--bland-altman", str, help="write mean,diff pairs to this CSV")
    _common_flags(f)

    f = new("phantom", cmd_phantom, "generate a synthetic two-band fixture with ground truth")
    f.add("--out", str, required=True, help="output prefix; writes <prefix>.png/.json and truth masks")
    f.add("--kind", _choice(PHANTOM_KINDS), default="flat", help="flat, skewed, or parabolic")
    f.add("--shape", _shape, default=(256, 256), help="image size 'ROWSxCOLS'")
    f.add("--upper-row", _float, help="upper boundary row (default: 0.35 * rows)")
    f.add("--thickness", _float, help="band thickness in pixels (default: 0.3 * rows)")
    f.add("--angle", _float, default=5.0, help="skew angle in degrees (skewed kind)")
    f.add("--sag", _float, help="parabola sag in pixels (parabolic kind)")
    f.add("--noise", _float, default=0.0, help="additive Gaussian noise sigma")
    f.add("--n-vessels", _int, default=0, help="dark elliptical blobs inside the band")
    f.add("--eye", _choice(EYES), default="right", help="laterality recorded in the metadata")
    f.add("--axial", _float, default=10.0, help="microns per pixel, vertical")
    f.add("--lateral", _float, default=10.0, help="microns per pixel, horizontal")
    _common_flags(f)

    f = new("serve", cmd_serve, "serve the annotation HTTP API and bundled UI")
    f.add("--host", str, default="127.0.0.1", help="bind address")
    f.add("--port", _int, default=8787, help="port")
    f.add("--persist", str, help="directory for session artifacts (default: memory only)")
    _common_flags(f)

    return parser


def run(argv) -> int:
    """Parse and execute one command line; returns the process exit code.

    0 on success, 1 on usage errors (unknown flags, bad values, missing
    required inputs), 2 on processing errors (unreadable inputs,
    algorithm failures).
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(exc.usage or parser.format_usage())
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        ns = _resolve(args)
        return args.func(ns)
    except UsageError as exc:
        sys.stderr.write(exc.usage or args._parser.format_usage())
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
