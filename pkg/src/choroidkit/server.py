"""Local HTTP service for interactive tracing, segmentation, and measurement.

Sessions hold one uploaded B-scan each plus the latest traces and vessel
mask. All state lives in memory (optionally mirrored to a persist
directory); operations on one session are serialized by a per-session
lock and never read another session. Responses reuse the command-line
payload builders, so a given (session state, request body, seed) always
yields the same bytes.
"""

import io
import secrets
import threading
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image
from fastapi import Body, FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from choroidkit import artifacts, mmcq
from choroidkit.core import (
    EYES,
    BScan,
    PixelPoint,
    VesselMask,
    image_png_bytes,
    mask_png_bytes,
    region_from_traces,
    write_atomic,
)
from choroidkit.gp import CovarianceSpec
from choroidkit.gpet import GpetConfig, config_for_target, trace_boundary
from choroidkit.measure import ALIGNMENTS, RoiSpec, measure_roi
from choroidkit.preprocess import edge_map_lower, edge_map_upper

TARGETS = ("upper", "lower")

_GPET_OVERRIDES = {
    "n_curves": int,
    "keep_fraction": float,
    "delta_x": int,
    "noise_sigma": float,
    "kde_truncation_radius": int,
    "sigma_f": float,
    "sigma_l": float,
}
_VESSEL_OVERRIDES = {
    "clusters": int,
    "keep_clusters": int,
    "cc_microns": float,
    "window": int,
    "offset": float,
    "votes_required": int,
}


class ApiError(Exception):
    """Domain error carrying an HTTP status and a structured body."""

    def __init__(self, status: int, message: str, **extra):
        super().__init__(message)
        self.status = status
        self.body = {"error": message, **extra}


@dataclass
class Session:
    """One uploaded scan plus the latest derived artifacts and an audit log."""

    id: str
    scan: BScan
    png: bytes
    traces: dict = field(default_factory=dict)
    vessels: VesselMask | None = None
    vessels_png: bytes | None = None
    audit: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """Thread-safe registry of live sessions, optionally mirrored to disk."""

    def __init__(self, persist_dir=None):
        self._lock = threading.Lock()
        self._sessions = {}
        self.persist_dir = Path(persist_dir) if persist_dir else None

    def create(self, scan: BScan, png: bytes) -> Session:
        with self._lock:
            while True:
                sid = secrets.token_hex(16)
                if sid not in self._sessions:
                    break
            session = Session(id=sid, scan=scan, png=png)
            self._sessions[sid] = session
        self.persist(session, "image.png", png)
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown session", session_id=session_id)
        return session

    def delete(self, session_id: str) -> None:
        with self._lock:
            if session_id not in self._sessions:
                raise ApiError(404, "unknown session", session_id=session_id)
            del self._sessions[session_id]

    def persist(self, session: Session, name: str, data: bytes) -> None:
        # persisted artifacts survive session deletion by design
        if self.persist_dir is not None:
            write_atomic(self.persist_dir / session.id / name, data)


def _float_field(body, key, default):
    value = body.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ApiError(422, f"'{key}' must be a number")
    return float(value)


def _parse_point(value, scan: BScan, label: str):
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
    ):
        raise ApiError(422, f"invalid coordinates: {label} must be a [col, row] number pair")
    col, row = float(value[0]), float(value[1])
    if not (0 <= round(col) < scan.n_cols and 0 <= round(row) < scan.n_rows):
        raise ApiError(422, f"invalid coordinates: {label} ({col}, {row}) outside the image")
    return (col, row)


def _parse_points(values, scan: BScan, label: str, expect=None):
    if not isinstance(values, (list, tuple)):
        raise ApiError(422, f"invalid coordinates: {label} must be a list of [col, row] pairs")
    points = tuple(_parse_point(v, scan, label) for v in values)
    if expect is not None and len(points) != expect:
        raise ApiError(422, f"invalid coordinates: {label} needs exactly {expect} points")
    return points


def _overrides(body, key, allowed, rename=()):
    config = body.get(key, {})
    if not isinstance(config, dict):
        raise ApiError(422, f"'{key}' must be an object")
    out = {}
    for name, value in config.items():
        if name not in allowed:
            raise ApiError(422, f"unknown config key '{name}'")
        try:
            out[dict(rename).get(name, name)] = allowed[name](value)
        except (TypeError, ValueError):
            raise ApiError(422, f"invalid config value for '{name}'") from None
    return out


def _audit(store: SessionStore, session: Session, op: str, **params):
    session.audit.append({"op": op, **params})
    store.persist(session, "audit.json", artifacts.dumps(session.audit))


def _session_region(session: Session):
    if not all(t in session.traces for t in TARGETS):
        missing = [t for t in TARGETS if t not in session.traces]
        raise ApiError(409, f"both traces are required first (missing: {', '.join(missing)})")
    upper = session.traces["upper"].trace
    lower = session.traces["lower"].trace
    try:
        return upper, lower, region_from_traces(upper, lower, session.scan.pixels.shape)
    except ValueError as exc:
        raise ApiError(500, str(exc), operation="region") from exc


def _json_bytes(data: bytes) -> Response:
    return Response(content=data, media_type="application/json")


def build_app(persist_dir=None, default_seed: int = 42, trace_timeout_s: float = 120.0) -> FastAPI:
    """Assemble the annotation service.

    Parameters
    ----------
    persist_dir : path, optional
        Mirror each session's artifacts into ``persist_dir/<session_id>/``.
    default_seed : int
        Seed for trace requests that do not carry one.
    trace_timeout_s : float
        Server-side cap on one synchronous trace computation.
    """
    app = FastAPI(title="choroidkit annotation service", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"http://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(persist_dir)
    app.state.store = store
    executor = ThreadPoolExecutor(max_workers=4)

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body)

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"error": "invalid request", "detail": exc.errors()})

    @app.post("/api/session")
    def create_session(
        image: UploadFile = File(...),
        axial_scale: float = Form(...),
        lateral_scale: float = Form(...),
        eye: str = Form("unknown"),
    ):
        png = image.file.read()
        try:
            with Image.open(io.BytesIO(png)) as decoded:
                pixels = np.asarray(decoded.convert("L"), dtype=np.uint8)
        except Exception as exc:
            raise ApiError(422, f"image is not a decodable PNG: {exc}") from exc
        if eye not in EYES:
            raise ApiError(422, f"eye must be one of {', '.join(EYES)}")
        try:
            scan = BScan(pixels, float(axial_scale), float(lateral_scale), eye=eye)
        except ValueError as exc:
            raise ApiError(422, str(exc)) from exc
        session = store.create(scan, png)
        _audit(store, session, "create", width=scan.n_cols, height=scan.n_rows)
        return {"session_id": session.id, "width": scan.n_cols, "height": scan.n_rows}

    @app.get("/api/session/{session_id}")
    def session_state(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return {
                "session_id": session.id,
                "width": session.scan.n_cols,
                "height": session.scan.n_rows,
                "axial_scale": session.scan.axial_scale,
                "lateral_scale": session.scan.lateral_scale,
                "eye": session.scan.eye,
                "traces": sorted(session.traces),
                "has_vessels": session.vessels is not None,
                "audit": list(session.audit),
            }

    @app.get("/api/session/{session_id}/image")
    def session_image(session_id: str):
        session = store.get(session_id)
        return Response(content=session.png, media_type="image/png")

    @app.get("/api/session/{session_id}/edgemap")
    def session_edgemap(session_id: str, target: str):
        session = store.get(session_id)
        if target not in TARGETS:
            raise ApiError(422, "target must be 'upper' or 'lower'")
        edge = edge_map_upper(session.scan) if target == "upper" else edge_map_lower(session.scan)
        return Response(content=image_png_bytes(edge.values * 255.0), media_type="image/png")

    @app.post("/api/session/{session_id}/trace")
    def session_trace(session_id: str, body: dict = Body(default={})):
        session = store.get(session_id)
        target = body.get("target")
        if target not in TARGETS:
            raise ApiError(422, "target must be 'upper' or 'lower'")
        endpoints = _parse_points(body.get("endpoints"), session.scan, "endpoints", expect=2)
        guides = _parse_points(body.get("guides", []), session.scan, "guides")
        seed = body.get("seed", default_seed)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ApiError(422, "'seed' must be an integer")
        overrides = _overrides(body, "config", _GPET_OVERRIDES)
        recorded = dict(overrides)
        kernel = {k: overrides.pop(k) for k in ("sigma_f", "sigma_l") if k in overrides}
        try:
            config = GpetConfig(seed=seed, **overrides)
            if kernel:
                base = config.cov_for(target, session.scan.pixels.shape)
                spec = CovarianceSpec(
                    base.kind,
                    kernel.get("sigma_f", base.sigma_f),
                    kernel.get("sigma_l", base.sigma_l),
                )
                config = replace(config, **{f"cov_{target}": spec})
        except ValueError as exc:
            raise ApiError(422, str(exc)) from exc
        edge = edge_map_upper(session.scan) if target == "upper" else edge_map_lower(session.scan)

        with session.lock:
            future = executor.submit(
                trace_boundary, session.scan, edge, endpoints, guides, config_for_target(config, target)
            )
            try:
                result = future.result(timeout=trace_timeout_s)
            except FutureTimeout:
                future.cancel()
                raise ApiError(500, f"trace timed out after {trace_timeout_s:g} s", operation="trace") from None
            except ValueError as exc:
                # tracer entry validation: endpoint/guide geometry
                raise ApiError(422, f"invalid coordinates: {exc}") from exc
            except RuntimeError as exc:
                raise ApiError(500, str(exc), operation="trace") from exc
            session.traces[target] = result
            data = artifacts.dumps(artifacts.trace_payload(result))
            store.persist(session, f"{target}.json", data)
            _audit(store, session, "trace", target=target, seed=seed,
                   endpoints=[list(p) for p in endpoints], guides=[list(p) for p in guides],
                   config=recorded)
        return _json_bytes(data)

    @app.post("/api/session/{session_id}/vessels")
    def session_vessels(session_id: str, body: dict = Body(default={})):
        session = store.get(session_id)
        method = body.get("method", "mmcq")
        if method not in ("mmcq", "niblack", "vote"):
            raise ApiError(422, "method must be 'mmcq', 'niblack', or 'vote'")
        overrides = _overrides(
            body, "config", _VESSEL_OVERRIDES,
            rename=(("clusters", "K"), ("keep_clusters", "k_vessel"), ("cc_microns", "choriocapillaris_microns")),
        )
        recorded = dict(overrides)
        window = overrides.pop("window", 51)
        offset = overrides.pop("offset", -0.05)
        votes_required = overrides.pop("votes_required", 15)
        try:
            config = mmcq.MmcqConfig(**overrides)
        except ValueError as exc:
            raise ApiError(422, str(exc)) from exc

        with session.lock:
            upper, lower, region = _session_region(session)
            try:
                if method == "niblack":
                    mask = mmcq.niblack_segment(session.scan, region, window=window, k=offset)
                elif method == "vote":
                    mask = mmcq.majority_vote_vessels(session.scan, region, upper, config, votes_required)
                else:
                    mask = mmcq.segment_vessels(session.scan, region, upper, config)
            except (ValueError, RuntimeError) as exc:
                raise ApiError(500, str(exc), operation="vessels") from exc
            session.vessels = mask
            session.vessels_png = mask_png_bytes(mask.pixels)
            payload = artifacts.vessels_payload(mask, region, session.scan)
            data = artifacts.dumps({"mask": f"/api/session/{session.id}/vessels/mask", **payload})
            store.persist(session, "vessels.png", session.vessels_png)
            store.persist(session, "vessels.json", data)
            _audit(store, session, "vessels", method=method, config=recorded)
        return _json_bytes(data)

    @app.get("/api/session/{session_id}/vessels/mask")
    def session_vessels_mask(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if session.vessels_png is None:
                raise ApiError(404, "no vessel mask yet; POST /vessels first")
            return Response(content=session.vessels_png, media_type="image/png")

    @app.post("/api/session/{session_id}/measure")
    def session_measure(session_id: str, body: dict = Body(default={})):
        session = store.get(session_id)
        fovea = _parse_point(body.get("fovea"), session.scan, "fovea")
        roi_microns = _float_field(body, "roi_microns", 3000.0)
        alignment = body.get("alignment", "choroid_aligned")
        if alignment not in ALIGNMENTS:
            raise ApiError(422, "alignment must be 'choroid_aligned' or 'image_aligned'")
        tangent_offset = body.get("tangent_offset", 15)
        if isinstance(tangent_offset, bool) or not isinstance(tangent_offset, int):
            raise ApiError(422, "'tangent_offset' must be an integer")

        with session.lock:
            upper, lower, region = _session_region(session)
            try:
                spec = RoiSpec(
                    fovea=PixelPoint(*fovea),
                    half_width_microns=roi_microns,
                    alignment=alignment,
                    tangent_offset_px=tangent_offset,
                )
            except ValueError as exc:
                raise ApiError(422, str(exc)) from exc
            try:
                report = measure_roi(upper, lower, session.vessels, session.scan, spec)
            except (ValueError, RuntimeError) as exc:
                raise ApiError(500, str(exc), operation="measure") from exc
            data = artifacts.dumps(artifacts.measure_payload(report))
            store.persist(session, "measure.json", data)
            _audit(store, session, "measure", fovea=list(fovea), roi_microns=roi_microns)
        return _json_bytes(data)

    @app.delete("/api/session/{session_id}")
    def delete_session(session_id: str):
        store.delete(session_id)
        return {"session_id": session_id, "deleted": True}

    ui_dir = Path(__file__).resolve().parent / "ui"
    if ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
