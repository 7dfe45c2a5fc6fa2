import io
import json
from dataclasses import replace

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from choroidkit import artifacts, mmcq
from choroidkit.gp import CovarianceSpec
from choroidkit.core import (
    BoundaryTrace,
    PixelPoint,
    VesselMask,
    image_png_bytes,
    mask_png_bytes,
    region_from_traces,
)
from choroidkit.gpet import GpetConfig, config_for_target, trace_boundary
from choroidkit.measure import RoiSpec, measure_roi
from choroidkit.phantom import make_phantom
from choroidkit.preprocess import edge_map_lower, edge_map_upper
from choroidkit.server import build_app

FAST = {"n_curves": 120, "delta_x": 16}


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8)


@pytest.fixture(scope="module")
def ctx():
    """Flat noisy phantom with pixel-perfect truth endpoints."""
    ph = make_phantom("flat", shape=(96, 128), noise_sigma=4.0, seed=42, n_vessels=3)
    return {
        "phantom": ph,
        "png": image_png_bytes(ph.scan.pixels),
        "eps_upper": [list(p) for p in ph.endpoints_upper()],
        "eps_lower": [list(p) for p in ph.endpoints_lower()],
    }


@pytest.fixture(scope="module")
def client():
    return TestClient(build_app(default_seed=42))


def create_session(client, ctx, eye="right") -> str:
    r = client.post(
        "/api/session",
        files={"image": ("scan.png", ctx["png"], "image/png")},
        data={"axial_scale": "10.0", "lateral_scale": "10.0", "eye": eye},
    )
    assert r.status_code == 200, r.text
    return r.json()["session_id"]


def post_trace(client, sid, target, endpoints, seed=None, config=FAST):
    body = {"target": target, "endpoints": endpoints, "config": dict(config)}
    if seed is not None:
        body["seed"] = seed
    return client.post(f"/api/session/{sid}/trace", json=body)


@pytest.fixture(scope="module")
def traced(client, ctx):
    """Session with both boundaries traced; vessels and measure run on it."""
    sid = create_session(client, ctx)
    upper = post_trace(client, sid, "upper", ctx["eps_upper"])
    lower = post_trace(client, sid, "lower", ctx["eps_lower"])
    assert upper.status_code == 200 and lower.status_code == 200
    return {"sid": sid, "upper": upper.content, "lower": lower.content}


@pytest.fixture(scope="module")
def traced_no_vessels(client, ctx):
    """Session with both traces but no vessel mask, kept that way."""
    sid = create_session(client, ctx)
    assert post_trace(client, sid, "upper", ctx["eps_upper"]).status_code == 200
    assert post_trace(client, sid, "lower", ctx["eps_lower"]).status_code == 200
    return sid


class TestSessionLifecycle:
    def test_create_reports_dimensions(self, client, ctx):
        r = client.post(
            "/api/session",
            files={"image": ("scan.png", ctx["png"], "image/png")},
            data={"axial_scale": "10.0", "lateral_scale": "10.0"},
        )
        assert r.status_code == 200
        body = r.json()
        assert body["width"] == 128
        assert body["height"] == 96
        assert isinstance(body["session_id"], str) and body["session_id"]

    def test_session_ids_are_unique(self, client, ctx):
        ids = {create_session(client, ctx) for _ in range(5)}
        assert len(ids) == 5

    def test_image_round_trip_is_byte_identical(self, client, ctx):
        sid = create_session(client, ctx)
        r = client.get(f"/api/session/{sid}/image")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.content == ctx["png"]

    def test_state_reports_progress(self, client, ctx, traced_no_vessels):
        sid = create_session(client, ctx)
        fresh = client.get(f"/api/session/{sid}").json()
        assert fresh["traces"] == []
        assert fresh["has_vessels"] is False
        assert fresh["width"] == 128 and fresh["height"] == 96
        assert fresh["axial_scale"] == 10.0 and fresh["eye"] == "right"
        assert [e["op"] for e in fresh["audit"]] == ["create"]
        done = client.get(f"/api/session/{traced_no_vessels}").json()
        assert done["traces"] == ["lower", "upper"]

    def test_delete_removes_session(self, client, ctx):
        sid = create_session(client, ctx)
        r = client.delete(f"/api/session/{sid}")
        assert r.status_code == 200
        assert r.json() == {"session_id": sid, "deleted": True}
        assert client.get(f"/api/session/{sid}/image").status_code == 404

    def test_unknown_session_is_404_everywhere(self, client):
        paths = [
            ("get", "/api/session/deadbeef"),
            ("get", "/api/session/deadbeef/image"),
            ("get", "/api/session/deadbeef/edgemap?target=upper"),
            ("post", "/api/session/deadbeef/trace"),
            ("post", "/api/session/deadbeef/vessels"),
            ("get", "/api/session/deadbeef/vessels/mask"),
            ("post", "/api/session/deadbeef/measure"),
            ("delete", "/api/session/deadbeef"),
        ]
        for method, path in paths:
            r = getattr(client, method)(path) if method != "post" else client.post(path, json={})
            assert r.status_code == 404, path
            assert r.json()["error"] == "unknown session"


class TestUploadValidation:
    def test_undecodable_image_is_422(self, client):
        r = client.post(
            "/api/session",
            files={"image": ("scan.png", b"not a png", "image/png")},
            data={"axial_scale": "10.0", "lateral_scale": "10.0"},
        )
        assert r.status_code == 422
        assert "not a decodable PNG" in r.json()["error"]

    def test_invalid_eye_is_422(self, client, ctx):
        r = client.post(
            "/api/session",
            files={"image": ("scan.png", ctx["png"], "image/png")},
            data={"axial_scale": "10.0", "lateral_scale": "10.0", "eye": "middle"},
        )
        assert r.status_code == 422
        assert "eye" in r.json()["error"]

    def test_nonpositive_scale_is_422(self, client, ctx):
        r = client.post(
            "/api/session",
            files={"image": ("scan.png", ctx["png"], "image/png")},
            data={"axial_scale": "-1.0", "lateral_scale": "10.0"},
        )
        assert r.status_code == 422
        assert "scale" in r.json()["error"]

    def test_missing_image_field_is_422_with_error_body(self, client):
        r = client.post("/api/session", data={"axial_scale": "10.0", "lateral_scale": "10.0"})
        assert r.status_code == 422
        assert r.json()["error"] == "invalid request"


class TestEdgeMap:
    def test_edgemap_matches_library(self, client, ctx):
        sid = create_session(client, ctx)
        scan = ctx["phantom"].scan
        for target, fn in (("upper", edge_map_upper), ("lower", edge_map_lower)):
            r = client.get(f"/api/session/{sid}/edgemap", params={"target": target})
            assert r.status_code == 200
            assert r.content == image_png_bytes(fn(scan).values * 255.0)

    def test_bad_target_is_422(self, client, ctx):
        sid = create_session(client, ctx)
        r = client.get(f"/api/session/{sid}/edgemap", params={"target": "sideways"})
        assert r.status_code == 422


class TestTrace:
    def test_response_matches_direct_tracing(self, ctx, traced):
        scan = ctx["phantom"].scan
        config = GpetConfig(seed=42, **FAST)
        for target, eps, fn in (
            ("upper", ctx["eps_upper"], edge_map_upper),
            ("lower", ctx["eps_lower"], edge_map_lower),
        ):
            result = trace_boundary(scan, fn(scan), [tuple(p) for p in eps], (), config_for_target(config, target))
            assert traced[target] == artifacts.dumps(artifacts.trace_payload(result)), target

    def test_same_request_gives_identical_bytes(self, client, ctx, traced):
        r = post_trace(client, traced["sid"], "upper", ctx["eps_upper"])
        assert r.status_code == 200
        assert r.content == traced["upper"]

    def test_explicit_default_seed_matches_omitted(self, client, ctx, traced):
        r = post_trace(client, traced["sid"], "upper", ctx["eps_upper"], seed=42)
        assert r.content == traced["upper"]

    def test_seed_changes_result(self, client, ctx, traced):
        r = post_trace(client, traced["sid"], "upper", ctx["eps_upper"], seed=7)
        assert r.status_code == 200
        assert r.content != traced["upper"]
        # restore the shared session's canonical trace
        assert post_trace(client, traced["sid"], "upper", ctx["eps_upper"]).content == traced["upper"]

    def test_payload_fields(self, traced):
        doc = json.loads(traced["upper"])
        assert set(doc) == {"trace", "observations", "iterations", "optimised_cov", "optimised_noise"}
        trace = BoundaryTrace.from_dict(doc["trace"])
        assert trace.kind == "rpe_choroid"
        assert doc["iterations"] >= 1

    def test_bad_target_is_422(self, client, ctx, traced):
        r = client.post(f"/api/session/{traced['sid']}/trace", json={"target": "middle", "endpoints": ctx["eps_upper"]})
        assert r.status_code == 422

    def test_out_of_range_endpoint_is_422(self, client, traced):
        r = post_trace(client, traced["sid"], "upper", [[-5, 30], [127, 30]])
        assert r.status_code == 422
        assert "invalid coordinates" in r.json()["error"]

    def test_same_column_endpoints_are_422(self, client, traced):
        r = post_trace(client, traced["sid"], "upper", [[10, 30], [10, 60]])
        assert r.status_code == 422
        assert "invalid coordinates" in r.json()["error"]

    def test_malformed_endpoints_are_422(self, client, traced):
        for endpoints in (None, "0,30;127,30", [[0, 30]], [[0, 30], [127, 30], [60, 30]], [[0], [127, 30]], [[0, "x"], [127, 30]]):
            body = {"target": "upper", "endpoints": endpoints}
            r = client.post(f"/api/session/{traced['sid']}/trace", json=body)
            assert r.status_code == 422, endpoints

    def test_guide_outside_span_is_422(self, client, ctx, traced):
        body = {"target": "upper", "endpoints": [[10, 33], [100, 33]], "guides": [[5, 33]], "config": dict(FAST)}
        r = client.post(f"/api/session/{traced['sid']}/trace", json=body)
        assert r.status_code == 422
        assert "invalid coordinates" in r.json()["error"]

    def test_bad_seed_type_is_422(self, client, ctx, traced):
        r = post_trace(client, traced["sid"], "upper", ctx["eps_upper"], seed="lucky")
        assert r.status_code == 422

    def test_unknown_config_key_is_422(self, client, ctx, traced):
        body = {"target": "upper", "endpoints": ctx["eps_upper"], "config": {"curviness": 3}}
        r = client.post(f"/api/session/{traced['sid']}/trace", json=body)
        assert r.status_code == 422
        assert "curviness" in r.json()["error"]

    def test_invalid_config_value_is_422(self, client, ctx, traced):
        body = {"target": "upper", "endpoints": ctx["eps_upper"], "config": {"n_curves": 2}}
        r = client.post(f"/api/session/{traced['sid']}/trace", json=body)
        assert r.status_code == 422

    def test_kernel_overrides_match_direct_tracing(self, client, ctx, traced):
        scan = ctx["phantom"].scan
        config = GpetConfig(seed=42, **FAST)
        base = config.cov_for("upper", scan.pixels.shape)
        spec = CovarianceSpec(base.kind, 3.5, base.sigma_l)
        expected = trace_boundary(
            scan, edge_map_upper(scan), [tuple(p) for p in ctx["eps_upper"]], (),
            replace(config, cov_upper=spec),
        )
        body = {"target": "upper", "endpoints": ctx["eps_upper"],
                "config": {**FAST, "sigma_f": 3.5}}
        r = client.post(f"/api/session/{traced['sid']}/trace", json=body)
        assert r.status_code == 200
        assert r.content == artifacts.dumps(artifacts.trace_payload(expected))
        assert r.content != traced["upper"]
        # restore the shared session's canonical trace
        assert post_trace(client, traced["sid"], "upper", ctx["eps_upper"]).content == traced["upper"]

    def test_default_kernel_matches_omitted_overrides(self, client, ctx, traced):
        scan = ctx["phantom"].scan
        base = GpetConfig(seed=42, **FAST).cov_for("upper", scan.pixels.shape)
        body = {"target": "upper", "endpoints": ctx["eps_upper"],
                "config": {**FAST, "sigma_f": base.sigma_f, "sigma_l": base.sigma_l}}
        r = client.post(f"/api/session/{traced['sid']}/trace", json=body)
        assert r.content == traced["upper"]

    def test_non_positive_kernel_value_is_422(self, client, ctx, traced):
        body = {"target": "upper", "endpoints": ctx["eps_upper"], "config": {"sigma_f": -1.0}}
        r = client.post(f"/api/session/{traced['sid']}/trace", json=body)
        assert r.status_code == 422


class TestVessels:
    def test_before_traces_is_409(self, client, ctx):
        sid = create_session(client, ctx)
        r = client.post(f"/api/session/{sid}/vessels", json={})
        assert r.status_code == 409
        assert "upper" in r.json()["error"] and "lower" in r.json()["error"]

    def test_mask_reference_and_summary(self, client, traced):
        r = client.post(f"/api/session/{traced['sid']}/vessels", json={})
        assert r.status_code == 200
        body = r.json()
        assert body["mask"] == f"/api/session/{traced['sid']}/vessels/mask"
        mask = decode_png(client.get(body["mask"]).content)
        assert int((mask == 255).sum()) == body["vessel_pixels"]
        assert 0.0 <= body["cvi_preview"] <= 1.0

    def test_matches_direct_segmentation(self, client, ctx, traced):
        scan = ctx["phantom"].scan
        upper = BoundaryTrace.from_dict(json.loads(traced["upper"])["trace"])
        lower = BoundaryTrace.from_dict(json.loads(traced["lower"])["trace"])
        region = region_from_traces(upper, lower, scan.pixels.shape)
        mask = mmcq.segment_vessels(scan, region, upper, mmcq.MmcqConfig())
        r = client.post(f"/api/session/{traced['sid']}/vessels", json={})
        expected = {"mask": f"/api/session/{traced['sid']}/vessels/mask"}
        expected.update(artifacts.vessels_payload(mask, region, scan))
        assert r.content == artifacts.dumps(expected)
        assert client.get(expected["mask"]).content == mask_png_bytes(mask.pixels)

    def test_repeat_request_gives_identical_bytes(self, client, traced):
        first = client.post(f"/api/session/{traced['sid']}/vessels", json={})
        second = client.post(f"/api/session/{traced['sid']}/vessels", json={})
        assert first.content == second.content

    def test_niblack_method(self, client, traced):
        r = client.post(f"/api/session/{traced['sid']}/vessels", json={"method": "niblack"})
        assert r.status_code == 200
        assert r.json()["vessel_pixels"] >= 0

    def test_bad_method_is_422(self, client, traced):
        r = client.post(f"/api/session/{traced['sid']}/vessels", json={"method": "watershed"})
        assert r.status_code == 422

    def test_unknown_config_key_is_422(self, client, traced):
        r = client.post(f"/api/session/{traced['sid']}/vessels", json={"config": {"blobs": 4}})
        assert r.status_code == 422
        assert "blobs" in r.json()["error"]

    def test_mask_before_vessels_is_404(self, client, traced_no_vessels):
        r = client.get(f"/api/session/{traced_no_vessels}/vessels/mask")
        assert r.status_code == 404


class TestMeasure:
    def test_before_traces_is_409(self, client, ctx):
        sid = create_session(client, ctx)
        r = client.post(f"/api/session/{sid}/measure", json={"fovea": [64, 40]})
        assert r.status_code == 409

    def test_matches_direct_measurement(self, client, ctx, traced):
        scan = ctx["phantom"].scan
        upper = BoundaryTrace.from_dict(json.loads(traced["upper"])["trace"])
        lower = BoundaryTrace.from_dict(json.loads(traced["lower"])["trace"])
        region = region_from_traces(upper, lower, scan.pixels.shape)
        assert client.post(f"/api/session/{traced['sid']}/vessels", json={}).status_code == 200
        vessels = VesselMask.clipped(
            decode_png(client.get(f"/api/session/{traced['sid']}/vessels/mask").content) == 255, region
        )
        r = client.post(f"/api/session/{traced['sid']}/measure", json={"fovea": [64, 40], "roi_microns": 400.0})
        assert r.status_code == 200
        spec = RoiSpec(PixelPoint(64, 40), 400.0, "choroid_aligned", 15)
        report = measure_roi(upper, lower, vessels, scan, spec)
        assert r.content == artifacts.dumps(artifacts.measure_payload(report))

    def test_without_vessels_omits_vascular_indices(self, client, traced_no_vessels):
        r = client.post(f"/api/session/{traced_no_vessels}/measure", json={"fovea": [64, 40], "roi_microns": 400.0})
        assert r.status_code == 200
        body = r.json()
        assert "cvi" not in body and "vessel_area_mm2" not in body
        assert body["sfct_microns"] > 0

    def test_image_aligned_option(self, client, traced):
        body = {"fovea": [64, 40], "roi_microns": 400.0, "alignment": "image_aligned"}
        r = client.post(f"/api/session/{traced['sid']}/measure", json=body)
        assert r.status_code == 200

    def test_missing_fovea_is_422(self, client, traced):
        r = client.post(f"/api/session/{traced['sid']}/measure", json={})
        assert r.status_code == 422
        assert "invalid coordinates" in r.json()["error"]

    def test_bad_alignment_is_422(self, client, traced):
        body = {"fovea": [64, 40], "alignment": "diagonal"}
        r = client.post(f"/api/session/{traced['sid']}/measure", json=body)
        assert r.status_code == 422

    def test_roi_past_trace_end_is_500_with_structured_body(self, client, traced):
        body = {"fovea": [0, 33], "roi_microns": 400.0}
        r = client.post(f"/api/session/{traced['sid']}/measure", json=body)
        assert r.status_code == 500
        assert r.json()["operation"] == "measure"
        assert r.json()["error"]


class TestComputationErrors:
    def test_crossing_traces_give_structured_500(self, client, ctx):
        sid = create_session(client, ctx)
        assert post_trace(client, sid, "upper", ctx["eps_upper"]).status_code == 200
        # lower endpoints straddle the upper boundary so the traces must cross
        assert post_trace(client, sid, "lower", [[0, 10], [127, 80]]).status_code == 200
        r = client.post(f"/api/session/{sid}/vessels", json={})
        assert r.status_code == 500
        assert r.json() == {"error": "crossing traces", "operation": "region"}
        r = client.post(f"/api/session/{sid}/measure", json={"fovea": [64, 40]})
        assert r.status_code == 500
        assert r.json()["error"] == "crossing traces"

    def test_trace_timeout_is_structured_500(self, ctx):
        client = TestClient(build_app(trace_timeout_s=0.001))
        sid = create_session(client, ctx)
        r = post_trace(client, sid, "upper", ctx["eps_upper"])
        assert r.status_code == 500
        assert "timed out" in r.json()["error"]
        assert r.json()["operation"] == "trace"


class TestIsolation:
    def test_interleaved_sessions_do_not_interact(self, client, ctx, traced):
        other = make_phantom("skewed", shape=(96, 128), noise_sigma=6.0, seed=9, n_vessels=2)
        other_ctx = {
            "png": image_png_bytes(other.scan.pixels),
            "eps_upper": [list(p) for p in other.endpoints_upper()],
            "eps_lower": [list(p) for p in other.endpoints_lower()],
        }
        sid_a = create_session(client, ctx)
        sid_b = create_session(client, other_ctx)
        a_upper = post_trace(client, sid_a, "upper", ctx["eps_upper"])
        b_upper = post_trace(client, sid_b, "upper", other_ctx["eps_upper"])
        a_lower = post_trace(client, sid_a, "lower", ctx["eps_lower"])
        b_lower = post_trace(client, sid_b, "lower", other_ctx["eps_lower"])
        # interleaving another session's work must not perturb results
        assert a_upper.content == traced["upper"]
        assert a_lower.content == traced["lower"]
        assert b_upper.content != a_upper.content
        assert client.get(f"/api/session/{sid_b}/image").content == other_ctx["png"]
        assert client.get(f"/api/session/{sid_a}/image").content == ctx["png"]


class TestPersistence:
    def test_artifacts_mirrored_to_disk(self, ctx, tmp_path):
        client = TestClient(build_app(persist_dir=tmp_path, default_seed=42))
        sid = create_session(client, ctx)
        upper = post_trace(client, sid, "upper", ctx["eps_upper"])
        lower = post_trace(client, sid, "lower", ctx["eps_lower"])
        vessels = client.post(f"/api/session/{sid}/vessels", json={})
        measure = client.post(f"/api/session/{sid}/measure", json={"fovea": [64, 40], "roi_microns": 400.0})
        assert measure.status_code == 200

        root = tmp_path / sid
        assert (root / "image.png").read_bytes() == ctx["png"]
        assert (root / "upper.json").read_bytes() == upper.content
        assert (root / "lower.json").read_bytes() == lower.content
        assert (root / "vessels.json").read_bytes() == vessels.content
        assert (root / "vessels.png").read_bytes() == client.get(f"/api/session/{sid}/vessels/mask").content
        assert (root / "measure.json").read_bytes() == measure.content
        audit = json.loads((root / "audit.json").read_text())
        assert [e["op"] for e in audit] == ["create", "trace", "trace", "vessels", "measure"]
        assert audit[1]["seed"] == 42

        assert client.delete(f"/api/session/{sid}").status_code == 200
        # persisted artifacts survive deletion
        assert (root / "measure.json").exists()


class TestCors:
    def test_local_origins_allowed(self, client, ctx):
        sid = create_session(client, ctx)
        r = client.get(f"/api/session/{sid}/image", headers={"Origin": "http://localhost:5173"})
        assert r.headers.get("access-control-allow-origin") == "http://localhost:5173"
        r = client.options(
            f"/api/session/{sid}/trace",
            headers={"Origin": "http://127.0.0.1:8080", "Access-Control-Request-Method": "POST"},
        )
        assert r.status_code == 200
        assert r.headers.get("access-control-allow-origin") == "http://127.0.0.1:8080"

    def test_foreign_origin_not_allowed(self, client, ctx):
        sid = create_session(client, ctx)
        r = client.get(f"/api/session/{sid}/image", headers={"Origin": "http://example.com"})
        assert "access-control-allow-origin" not in r.headers


class TestStaticUi:
    def test_root_serves_annotation_app(self, client):
        r = client.get("/")
        assert r.status_code == 200
        assert "text/html" in r.headers["content-type"]
        assert "view-canvas" in r.text
        # the app script ships alongside the page
        r = client.get("/main.js")
        assert r.status_code == 200

    def test_api_routes_win_over_static_mount(self, client):
        r = client.get("/api/session/nope/image")
        assert r.status_code == 404
        assert r.json()["error"] == "unknown session"
