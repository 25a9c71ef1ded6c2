import io
import json
import time

import numpy as np
import pytest

pytest.importorskip("fastapi")
from fastapi.testclient import TestClient

from driftscope import testkit
from driftscope.api import create_app
from driftscope.eventlog import write_csv


@pytest.fixture(scope="module")
def fixture_csv(tmp_path_factory):
    root = tmp_path_factory.mktemp("api")
    spec, drift = testkit.drift_benchmark(seed=5, at_trace=600)
    log, truth = testkit.generate_log(spec, 1200, [drift])
    path = root / "log.csv"
    write_csv(log, path)
    return path, truth


@pytest.fixture(scope="module")
def client(fixture_csv):
    app = create_app(run_jobs_inline=True)
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="module")
def session(client, fixture_csv):
    """Uploaded log + trained model, shared by the read-only tests."""
    path, truth = fixture_csv
    response = client.post(
        "/logs",
        files={"file": ("log.csv", path.read_bytes(), "text/csv")},
        data={"trace_id": "case"},
    )
    assert response.status_code == 200, response.text
    log_id = response.json()["log_id"]
    response = client.post(f"/logs/{log_id}/models", json={"train_events": 2000})
    assert response.status_code == 202
    body = response.json()
    job = client.get(f"/jobs/{body['job_id']}").json()
    assert job["status"] == "done", job
    return log_id, body["model_id"], truth


def test_upload_reports_size(session, client):
    log_id, _, _ = session
    info = client.get(f"/logs/{log_id}").json()
    assert info["n_traces"] == 1200
    assert info["n_events"] == 12000


def test_scores_document(session, client):
    _, model_id, _ = session
    doc = client.get(f"/models/{model_id}/scores").json()
    assert doc["kind"] == "trace-scores"
    assert len(doc["series"][0]["y"]) == 1200
    assert any(a["label"] == "training boundary" for a in doc["annotations"])


def test_drift_deterministic_and_no_rescoring(session, client):
    _, model_id, _ = session
    assert client.get(f"/models/{model_id}").json()["scoring_runs"] == 1
    first = client.get(f"/models/{model_id}/drift", params={"window": 400}).json()
    second = client.get(f"/models/{model_id}/drift", params={"window": 400}).json()
    assert first == second
    for window in (200, 400, 800):
        response = client.get(f"/models/{model_id}/drift", params={"window": window})
        assert response.status_code == 200
    # window changes never trigger rescoring
    assert client.get(f"/models/{model_id}").json()["scoring_runs"] == 1


def test_drift_points_near_planted_index(session, client):
    _, model_id, truth = session
    body = client.get(f"/models/{model_id}/drift", params={"window": 400}).json()
    points = body["drift_points"]
    assert len(points) == 1
    assert abs(points[0]["trace_index"] - truth.drift_indices[0]) <= 200


def test_segments_from_drifts_then_density(session, client):
    _, model_id, truth = session
    response = client.post(f"/models/{model_id}/segments",
                           json={"from_drifts": {"window": 400}})
    assert response.status_code == 200
    segments = response.json()["segments"]
    assert segments[0]["start_trace"] == 0
    assert segments[-1]["end_trace"] == 1200

    density = client.get(f"/models/{model_id}/segments/{segments[-1]['id']}/density")
    assert density.status_code == 200
    doc = density.json()
    doctype = [s for s in doc["series"] if s["name"] == "doctype"][0]
    assert doctype["median"] <= 0.0  # log scale: never above certainty


def test_manual_segment_ranges(session, client):
    _, model_id, _ = session
    response = client.post(f"/models/{model_id}/segments",
                           json={"ranges": [[0, 500], [500, 1200]]})
    assert response.status_code == 200
    assert [s["id"] for s in response.json()["segments"]] == [0, 1]


def test_decompose_endpoint(session, client):
    _, model_id, _ = session
    client.post(f"/models/{model_id}/segments", json={"ranges": [[600, 1200]]})
    doc = client.get(f"/models/{model_id}/segments/0/decompose",
                     params={"attribute": "doctype"}).json()
    assert doc["kind"] == "component-breakdown"
    names = [s["name"] for s in doc["series"]]
    assert "value" in names and "cpt" in names


def test_outliers_endpoint(session, client):
    _, model_id, _ = session
    doc = client.get(f"/models/{model_id}/outliers", params={"k": 2.5}).json()
    assert doc["kind"] == "outlier-report"
    assert doc["k"] == 2.5


def test_unknown_ids_404(client):
    assert client.get("/models/missing/scores").status_code == 404
    assert client.get("/logs/missing").status_code == 404
    assert client.get("/jobs/missing").status_code == 404
    assert client.get("/models/missing/drift").status_code == 404


def test_invalid_params_422(session, client):
    log_id, model_id, _ = session
    assert client.post(f"/logs/{log_id}/models", json={}).status_code == 422
    assert client.post(
        f"/logs/{log_id}/models", json={"train_events": 10, "segment": [0, 5]}
    ).status_code == 422
    assert client.get(f"/models/{model_id}/drift",
                      params={"window": 999999}).status_code == 422
    assert client.get(f"/models/{model_id}/drift",
                      params={"window": 33}).status_code == 422
    assert client.post(f"/models/{model_id}/segments",
                       json={"ranges": [[5, 5]]}).status_code == 422


def test_upload_rejects_unparseable(client):
    response = client.post(
        "/logs",
        files={"file": ("log.csv", b"case,activity\n", "text/csv")},
        data={"trace_id": "case"},
    )
    assert response.status_code == 422


def test_concurrent_training_conflicts(fixture_csv):
    """A second training request for the same log is refused while one runs."""
    path, _ = fixture_csv
    app = create_app()  # real background threads
    with TestClient(app) as client:
        log_id = client.post(
            "/logs",
            files={"file": ("log.csv", path.read_bytes(), "text/csv")},
            data={"trace_id": "case"},
        ).json()["log_id"]
        first = client.post(f"/logs/{log_id}/models", json={"train_events": 2000})
        assert first.status_code == 202
        second = client.post(f"/logs/{log_id}/models", json={"train_events": 1000})
        # either the first finished already (fast machine) or we get a conflict
        assert second.status_code in (202, 409)
        job_id = first.json()["job_id"]
        for _ in range(200):
            status = client.get(f"/jobs/{job_id}").json()["status"]
            if status in ("done", "error"):
                break
            time.sleep(0.05)
        assert status == "done"
        # model only becomes visible once fully trained
        model_id = first.json()["model_id"]
        assert client.get(f"/models/{model_id}").status_code == 200


def test_model_invisible_until_job_done(fixture_csv):
    path, _ = fixture_csv
    app = create_app()
    with TestClient(app) as client:
        log_id = client.post(
            "/logs",
            files={"file": ("log.csv", path.read_bytes(), "text/csv")},
            data={"trace_id": "case"},
        ).json()["log_id"]
        body = client.post(f"/logs/{log_id}/models", json={"train_events": 2000}).json()
        model_id, job_id = body["model_id"], body["job_id"]
        saw_pending_404 = False
        for _ in range(400):
            job = client.get(f"/jobs/{job_id}").json()
            response = client.get(f"/models/{model_id}")
            if job["status"] in ("queued", "running"):
                assert response.status_code == 404  # never a partial model
                saw_pending_404 = response.status_code == 404 or saw_pending_404
            if job["status"] == "done":
                assert client.get(f"/models/{model_id}").status_code == 200
                break
            time.sleep(0.01)
        assert job["status"] == "done"
