"""Record live server responses into the browser UI's test fixtures.

Drives the HTTP service end to end on a small phantom (session, traces,
re-runs, vessels, measurement, and every error class the UI must surface)
and freezes the exact response bytes into a single JSON file. The UI's
contract tests replay these against the client code without a server.

Run from the repository root:

    python3 scripts/record_ui_fixtures.py
"""

import argparse
import base64
import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

from choroidkit.core import image_png_bytes
from choroidkit.phantom import make_phantom
from choroidkit.server import build_app

FAST = {"n_curves": 120, "delta_x": 16}


def record(client, responses, name, response):
    """File one response under ``name``, keeping the raw body text."""
    responses[name] = {"status": response.status_code, "body": response.text}
    return response


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--out",
        default="frontend/tests/fixtures/recorded.json",
        help="fixture file to write",
    )
    args = parser.parse_args(argv)

    ph = make_phantom("flat", shape=(96, 128), noise_sigma=4.0, seed=42, n_vessels=3)
    png = image_png_bytes(ph.scan.pixels)
    scales = {
        "axial_scale": str(ph.scan.axial_scale),
        "lateral_scale": str(ph.scan.lateral_scale),
    }

    client = TestClient(build_app(default_seed=42))
    responses = {}

    r = client.post(
        "/api/session",
        files={"image": ("scan.png", png, "image/png")},
        data={**scales, "eye": "right"},
    )
    record(client, responses, "session", r)
    sid = r.json()["session_id"]

    requests = {
        "trace_upper": {
            "target": "upper",
            "endpoints": [list(p) for p in ph.endpoints_upper()],
            "guides": [],
            "seed": 42,
            "config": dict(FAST),
        },
        "trace_lower": {
            "target": "lower",
            "endpoints": [list(p) for p in ph.endpoints_lower()],
            "guides": [],
            "seed": 42,
            "config": dict(FAST),
        },
        "vessels": {"method": "mmcq", "config": {}},
    }

    upper = record(client, responses, "trace_upper",
                   client.post(f"/api/session/{sid}/trace", json=requests["trace_upper"]))
    record(client, responses, "trace_upper_rerun",
           client.post(f"/api/session/{sid}/trace", json=requests["trace_upper"]))
    seed7 = dict(requests["trace_upper"], seed=7)
    record(client, responses, "trace_upper_seed7",
           client.post(f"/api/session/{sid}/trace", json=seed7))
    # restore the canonical upper trace before segmenting
    client.post(f"/api/session/{sid}/trace", json=requests["trace_upper"])
    record(client, responses, "trace_lower",
           client.post(f"/api/session/{sid}/trace", json=requests["trace_lower"]))

    record(client, responses, "vessels",
           client.post(f"/api/session/{sid}/vessels", json=requests["vessels"]))
    mask = client.get(f"/api/session/{sid}/vessels/mask")
    assert mask.status_code == 200

    rows = json.loads(upper.text)["trace"]["rows"]
    centre = ph.scan.n_cols // 2
    requests["measure"] = {
        "fovea": [centre, int(round(rows[centre - json.loads(upper.text)["trace"]["c0"]]))],
        "roi_microns": 400.0,
        "alignment": "choroid_aligned",
    }
    record(client, responses, "measure",
           client.post(f"/api/session/{sid}/measure", json=requests["measure"]))

    record(client, responses, "err_unknown_session", client.get("/api/session/nope"))
    bad = {"target": "upper", "endpoints": [[10, 30], [10, 60]]}
    record(client, responses, "err_bad_coordinates",
           client.post(f"/api/session/{sid}/trace", json=bad))

    fresh = client.post(
        "/api/session",
        files={"image": ("scan.png", png, "image/png")},
        data=scales,
    )
    fresh_id = fresh.json()["session_id"]
    record(client, responses, "err_vessels_before_traces",
           client.post(f"/api/session/{fresh_id}/vessels", json={}))

    # crossing scenario on its own session: a lower trace that straddles the
    # flat upper boundary makes region construction fail with a 500
    client.post(f"/api/session/{fresh_id}/trace", json=requests["trace_upper"])
    crossing = {
        "target": "lower",
        "endpoints": [[0, 10], [127, 80]],
        "guides": [],
        "seed": 42,
        "config": dict(FAST),
    }
    record(client, responses, "trace_lower_crossing",
           client.post(f"/api/session/{fresh_id}/trace", json=crossing))
    record(client, responses, "err_crossing",
           client.post(f"/api/session/{fresh_id}/vessels", json={}))

    doc = {
        "image": {
            "width": ph.scan.n_cols,
            "height": ph.scan.n_rows,
            "axial_scale": ph.scan.axial_scale,
            "lateral_scale": ph.scan.lateral_scale,
        },
        "requests": requests,
        "responses": responses,
        "mask_png_base64": base64.b64encode(mask.content).decode("ascii"),
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {out} ({len(responses)} responses)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
