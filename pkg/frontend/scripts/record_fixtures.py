"""Record real service responses for the sketchpad's replay tests.

Drives the design service through the exact request sequence the UI issues
(draw -> lift -> drag -> no-op drag -> encode -> paint -> sketch -> two
identical generate jobs) and dumps every exchange, in order, to
tests/fixtures/recorded.json.  Rerun whenever the wire format changes:

    python3 scripts/record_fixtures.py
"""
import json
import sys
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from sketchfold.service import create_app

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "recorded.json"

# raw stroke in canvas pixels; the client scales by STROKE_SCALE (A per px)
# before uploading, and so does this recorder
STROKE_SCALE = 0.25
STROKE_PX = [[20.0 + 14.0 * i, 200.0 + 90.0 * (1 if i % 2 else -1) * (i / 24.0)]
             for i in range(24)]
STROKE_2D = [[x * STROKE_SCALE, y * STROKE_SCALE, 0.0] for x, y in STROKE_PX]
LIFT = {"amplitude": 6.0, "period": 24, "noise_amplitude": 1.0, "seed": 3}
DRAG = {"anchor": 5, "displacement": [4.0, -2.0, 1.0], "falloff": 8.0}
NOOP_DRAG = {"anchor": 5, "displacement": [0.0, 0.0, 0.0], "falloff": 8.0}
CONFIG = {"guidance": 0.6667, "gate_gamma": 0.2, "gate_eta": 0.7,
          "fixed_phase_switch": None, "seed": 5, "mode": "guided", "schedule_T": 20}


def main() -> None:
    exchanges = []
    tmp = tempfile.mkdtemp(prefix="sketchfold-record-")
    app = create_app(tmp, workers=1)
    client = TestClient(app)

    def call(method: str, path: str, body=None):
        if method == "GET":
            res = client.get(path)
        else:
            res = client.post(path, json=body)
        try:
            payload = res.json()
        except ValueError:
            payload = res.text
        exchanges.append({"method": method, "path": path, "status": res.status_code,
                          "response": payload})
        return payload

    call("GET", "/health")
    curve = call("POST", "/curves", {"points": STROKE_2D})
    lifted = call("POST", f"/curves/{curve['id']}/ops/lift", LIFT)
    dragged = call("POST", f"/curves/{lifted['id']}/ops/drag", DRAG)
    noop = call("POST", f"/curves/{dragged['id']}/ops/drag", NOOP_DRAG)
    assert noop["points"] == dragged["points"], "no-op drag must leave geometry alone"

    encoded = call("POST", f"/curves/{noop['id']}/encode", {})
    # arg-max runs, first maximum wins (mirrors the client's decode)
    classes = encoded["classes"]
    labels = []
    for row in encoded["probabilities"]:
        best = 0
        for k in range(1, len(row)):
            if row[k] > row[best]:
                best = k
        labels.append(classes[best])
    current = noop["id"]
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            doc = call("POST", f"/curves/{current}/ops/edit-sse",
                       {"start": start, "stop": i, "label": labels[start]})
            current = doc["id"]
            start = i
    call("POST", "/sketches", {"curve_id": current})

    def run_job(body):
        job = call("POST", "/jobs", body)
        while True:
            snap = client.get(f"/jobs/{job['id']}").json()
            if snap["status"] in ("done", "failed"):
                break
            time.sleep(0.05)
        assert snap["status"] == "done", snap
        exchanges.append({"method": "GET", "path": f"/jobs/{job['id']}",
                          "status": 200, "response": snap})
        return job["id"], snap

    job_body = {"kind": "generate", "curve_id": current, "config": CONFIG,
                "denoiser": {"kind": "toy"}, "dump_coords": False}
    results = []
    for _ in range(2):
        job_id, snap = run_job(job_body)
        traj = client.get(f"/jobs/{job_id}/trajectory")
        exchanges.append({"method": "GET", "path": f"/jobs/{job_id}/trajectory",
                          "status": 200, "response": traj.text})
        results.append(snap["result"])

    assert results[0]["backbone"] == results[1]["backbone"], "service must be deterministic"
    assert results[0]["metrics"]["sctf1"] == results[1]["metrics"]["sctf1"]

    # one coordinate-bearing trajectory for the scrubber, truncated to its
    # first and last records to keep the fixture small
    job_id, _ = run_job({**job_body, "dump_coords": True})
    lines = client.get(f"/jobs/{job_id}/trajectory").text.strip().splitlines()
    exchanges.append({"method": "GET", "path": f"/jobs/{job_id}/trajectory",
                      "status": 200, "response": lines[0] + "\n" + lines[-1] + "\n",
                      "truncated": True})

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(
        {
            "inputs": {"stroke_px": STROKE_PX, "stroke_scale": STROKE_SCALE,
                       "lift": LIFT, "drag": DRAG, "noop_drag": NOOP_DRAG,
                       "config": CONFIG},
            "exchanges": exchanges,
        },
        indent=1,
    ))
    print(f"recorded {len(exchanges)} exchanges -> {OUT}")


if __name__ == "__main__":
    sys.exit(main())
