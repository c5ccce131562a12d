from __future__ import annotations

import time

import pytest
from fastapi.testclient import TestClient

from fastdata.service import create_app


@pytest.fixture
def data_dir(tmp_path):
    rows = ["latency,device"]
    rows += [f"{50 + (i % 7)}.0,d{i % 5}" for i in range(400)]
    rows += ["250.0,bad"] * 8
    (tmp_path / "requests.csv").write_text("\n".join(rows) + "\n")
    return tmp_path


@pytest.fixture
def client(data_dir):
    app = create_app(data_dir=str(data_dir))
    with TestClient(app) as c:
        yield c


def oneshot_spec(**kwargs):
    spec = {
        "source": {"kind": "csv", "dataset": "requests"},
        "metricColumns": ["latency"],
        "attributeColumns": ["device"],
        "outlierPercentile": 0.02,
        "randomSeed": 5,
    }
    spec.update(kwargs)
    return spec


def wait_done(client, query_id, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = client.get(f"/api/queries/{query_id}").json()
        if status["state"] != "running":
            return status
        time.sleep(0.02)
    raise TimeoutError("query did not finish")


class TestBasics:
    def test_health(self, client):
        assert client.get("/api/health").json() == {"status": "ok"}

    def test_submit_returns_query_id(self, client):
        response = client.post("/api/queries", json=oneshot_spec())
        assert response.status_code == 200
        assert response.json()["queryId"]

    def test_invalid_spec_400_with_field_errors(self, client):
        response = client.post("/api/queries", json=oneshot_spec(minRiskRatio=-1))
        assert response.status_code == 400
        assert any("minRiskRatio" in d for d in response.json()["detail"])

    def test_unknown_query_404(self, client):
        assert client.get("/api/queries/q999").status_code == 404
        assert client.get("/api/queries/q999/report").status_code == 404
        assert client.delete("/api/queries/q999").status_code == 404

    def test_source_outside_data_dir_rejected(self, client):
        spec = oneshot_spec(source={"kind": "csv", "path": "/etc/passwd"})
        response = client.post("/api/queries", json=spec)
        assert response.status_code == 400

    def test_dataset_schema(self, client):
        response = client.get("/api/datasets/requests/schema")
        assert response.status_code == 200
        columns = {c["name"]: c["type"] for c in response.json()["columns"]}
        assert columns == {"latency": "numeric", "device": "categorical"}

    def test_unknown_dataset_schema_404(self, client):
        assert client.get("/api/datasets/nope/schema").status_code == 404

    def test_dataset_listing(self, client):
        assert client.get("/api/datasets").json() == {"datasets": ["requests"]}


class TestQueryLifecycle:
    def test_oneshot_completes_with_report(self, client):
        query_id = client.post("/api/queries", json=oneshot_spec()).json()["queryId"]
        status = wait_done(client, query_id)
        assert status["state"] == "done"
        report = client.get(f"/api/queries/{query_id}/report").json()
        assert report["pointsProcessed"] == 408
        assert any(e["attributes"] == {"device": "bad"} for e in report["explanations"])

    def test_report_before_completion_409(self, client):
        # a large streaming source keeps the worker busy past the first poll
        spec = oneshot_spec(
            source={"kind": "synthetic-devices", "n_points": 400_000,
                    "n_devices": 50, "seed": 0},
            metricColumns=["value"],
            attributeColumns=["device"],
            mode="streaming",
            batchSize=4_000,
        )
        query_id = client.post("/api/queries", json=spec).json()["queryId"]
        response = client.get(f"/api/queries/{query_id}/report")
        assert response.status_code == 409
        assert response.json()["detail"]["state"] == "running"
        wait_done(client, query_id)

    def test_emit_then_report_reflects_progress(self, client):
        spec = oneshot_spec(
            source={"kind": "synthetic-devices", "n_points": 400_000,
                    "n_devices": 50, "seed": 1},
            metricColumns=["value"],
            attributeColumns=["device"],
            mode="streaming",
            batchSize=4_000,
        )
        query_id = client.post("/api/queries", json=spec).json()["queryId"]
        assert client.post(f"/api/queries/{query_id}/emit").json()["accepted"]
        deadline = time.time() + 30
        while time.time() < deadline:
            response = client.get(f"/api/queries/{query_id}/report")
            if response.status_code == 200:
                break
            time.sleep(0.02)
        report = response.json()
        status = client.get(f"/api/queries/{query_id}").json()
        if status["state"] == "running":
            assert report["pointsProcessed"] <= 400_000
        wait_done(client, query_id)

    def test_emit_on_oneshot_409(self, client):
        query_id = client.post("/api/queries", json=oneshot_spec()).json()["queryId"]
        wait_done(client, query_id)
        assert client.post(f"/api/queries/{query_id}/emit").status_code == 409

    def test_cancel_streaming_query(self, client):
        spec = oneshot_spec(
            source={"kind": "synthetic-devices", "n_points": 2_000_000,
                    "n_devices": 50, "seed": 2},
            metricColumns=["value"],
            attributeColumns=["device"],
            mode="streaming",
            batchSize=2_000,
        )
        query_id = client.post("/api/queries", json=spec).json()["queryId"]
        assert client.delete(f"/api/queries/{query_id}").json()["accepted"]
        status = wait_done(client, query_id)
        assert status["state"] == "failed"
        assert status["detail"] == "cancelled"


class TestSnapshotReads:
    def test_polling_client_does_not_block_ingestion(self, client):
        """Handlers only read immutable snapshots, so a polling client must
        not stall the pipeline thread.  This is a smoke check with a loose
        bound; tight ratios need quiet hardware."""
        import threading

        def run_query():
            spec = oneshot_spec(
                source={"kind": "synthetic-devices", "n_points": 200_000,
                        "n_devices": 20, "seed": 3},
                metricColumns=["value"],
                attributeColumns=["device"],
                mode="streaming",
                batchSize=5_000,
            )
            query_id = client.post("/api/queries", json=spec).json()["queryId"]
            t0 = time.time()
            wait_done(client, query_id, timeout=60)
            return time.time() - t0

        quiet = run_query()

        stop = threading.Event()
        spec = oneshot_spec(
            source={"kind": "synthetic-devices", "n_points": 200_000,
                    "n_devices": 20, "seed": 4},
            metricColumns=["value"],
            attributeColumns=["device"],
            mode="streaming",
            batchSize=5_000,
        )
        query_id = client.post("/api/queries", json=spec).json()["queryId"]

        def hammer():
            while not stop.is_set():
                client.get(f"/api/queries/{query_id}")
                client.get(f"/api/queries/{query_id}/report")

        poller = threading.Thread(target=hammer)
        poller.start()
        t0 = time.time()
        wait_done(client, query_id, timeout=60)
        polled = time.time() - t0
        stop.set()
        poller.join()
        assert polled < max(quiet * 1.5, quiet + 1.0)


class TestIsolation:
    def test_interleaved_queries_match_serial(self, client):
        spec_a = oneshot_spec(randomSeed=11, outlierPercentile=0.02)
        spec_b = oneshot_spec(randomSeed=22, outlierPercentile=0.05)

        id_a = client.post("/api/queries", json=spec_a).json()["queryId"]
        id_b = client.post("/api/queries", json=spec_b).json()["queryId"]
        wait_done(client, id_a)
        wait_done(client, id_b)
        interleaved_a = client.get(f"/api/queries/{id_a}/report").json()
        interleaved_b = client.get(f"/api/queries/{id_b}/report").json()

        id_a2 = client.post("/api/queries", json=spec_a).json()["queryId"]
        wait_done(client, id_a2)
        serial_a = client.get(f"/api/queries/{id_a2}/report").json()
        id_b2 = client.post("/api/queries", json=spec_b).json()["queryId"]
        wait_done(client, id_b2)
        serial_b = client.get(f"/api/queries/{id_b2}/report").json()

        def core(doc):
            return {k: v for k, v in doc.items() if k != "timings"}

        assert core(interleaved_a) == core(serial_a)
        assert core(interleaved_b) == core(serial_b)
