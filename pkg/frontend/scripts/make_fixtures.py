#!/usr/bin/env python3
"""Capture real API responses as frontend test fixtures.

Runs the full workflow against the actual service (in-process) on the
drift-benchmark log and freezes every JSON response the explorer needs, so
the vitest end-to-end test exercises the view code against genuine server
output.  Rerun after changing the API or the fixture scenario.
"""

import json
import sys
import tempfile
import warnings
from pathlib import Path

warnings.filterwarnings("ignore")

from fastapi.testclient import TestClient

from driftscope import testkit
from driftscope.api import create_app
from driftscope.eventlog import write_csv

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

N_TRACES = 2400
DRIFT_AT = 1200
TRAIN_EVENTS = 4000
SEED = 5


def save(name: str, response) -> dict:
    if hasattr(response, "status_code"):
        assert response.status_code < 300, f"{name}: {response.status_code} {response.text}"
        payload = response.json()
    else:
        payload = response
    path = FIXTURES / f"{name}.json"
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    print(f"wrote {path.relative_to(FIXTURES.parent.parent)}")
    return payload


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    spec, drift = testkit.drift_benchmark(seed=SEED, at_trace=DRIFT_AT)
    log, _ = testkit.generate_log(spec, N_TRACES, [drift])
    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as fh:
        csv_path = fh.name
    write_csv(log, csv_path)

    app = create_app(run_jobs_inline=True)
    client = TestClient(app)

    upload = save("upload", client.post(
        "/logs",
        files={"file": ("log.csv", open(csv_path, "rb").read(), "text/csv")},
        data={"trace_id": "case"},
    ))
    log_id = upload["log_id"]

    first = save("train_events",
                 client.post(f"/logs/{log_id}/models", json={"train_events": TRAIN_EVENTS}))
    save("job_initial", client.get(f"/jobs/{first['job_id']}"))
    model_a = first["model_id"]
    save("model_initial", client.get(f"/models/{model_a}"))
    save("scores_initial", client.get(f"/models/{model_a}/scores"))

    for window in (200, 400, 800, 1600):
        save(f"drift_w{window}",
             client.get(f"/models/{model_a}/drift", params={"window": window}))

    second = save("train_segment",
                  client.post(f"/logs/{log_id}/models", json={"segment": [0, DRIFT_AT]}))
    save("job_reference", client.get(f"/jobs/{second['job_id']}"))
    model_b = second["model_id"]
    save("model_reference", client.get(f"/models/{model_b}"))

    segments = save("segments_reference", client.post(
        f"/models/{model_b}/segments",
        json={"ranges": [[0, DRIFT_AT], [DRIFT_AT, N_TRACES]]},
    ))

    for seg in segments["segments"]:
        save(f"density_seg{seg['id']}",
             client.get(f"/models/{model_b}/segments/{seg['id']}/density"))
    save("decompose_doctype",
         client.get(f"/models/{model_b}/segments/1/decompose",
                    params={"attribute": "doctype"}))
    save("outliers", client.get(f"/models/{model_b}/outliers", params={"k": 2.5}))

    save("manifest", {
        "log_id": log_id,
        "model_initial": model_a,
        "model_reference": model_b,
        "job_initial": first["job_id"],
        "job_reference": second["job_id"],
        "n_traces": N_TRACES,
        "drift_at": DRIFT_AT,
        "train_events": TRAIN_EVENTS,
        "windows": [200, 400, 800, 1600],
    })
    return 0


if __name__ == "__main__":
    sys.exit(main())
