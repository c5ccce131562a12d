"""Walk the REST API that backs the browser console.

Runs the service in-process: register the bundled dataset directory,
inspect a dataset's schema, submit a query, poll it, and fetch the ranked
explanation report.
"""

import json
import time
from pathlib import Path

from fastapi.testclient import TestClient

from fastdata.service import create_app

data_dir = Path(__file__).resolve().parent.parent / "data"
client = TestClient(create_app(data_dir=str(data_dir)))

print("datasets:", client.get("/api/datasets").json()["datasets"])
schema = client.get("/api/datasets/sample/schema").json()
print("sample schema:", {c["name"]: c["type"] for c in schema["columns"]})

spec = {
    "source": {"kind": "csv", "dataset": "sample"},
    "metricColumns": ["latency"],
    "attributeColumns": ["device", "version"],
    "minSupport": 0.001,
    "minRiskRatio": 3.0,
    "outlierPercentile": 0.01,
    "randomSeed": 17,
}
query_id = client.post("/api/queries", json=spec).json()["queryId"]
print("submitted:", query_id)

while True:
    status = client.get(f"/api/queries/{query_id}").json()
    print("  status:", status)
    if status["state"] != "running":
        break
    time.sleep(0.1)

report = client.get(f"/api/queries/{query_id}/report").json()
print(f"report: {report['pointsProcessed']} points, {report['outlierCount']} outliers")
for explanation in report["explanations"]:
    print(" ", json.dumps(explanation["attributes"]),
          f"support {explanation['outlierSupport']:.1%}",
          f"risk ratio {explanation['riskRatio']}")
print("\n(the same API serves the browser console in frontend/)")
