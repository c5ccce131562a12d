"""Regenerate the console test fixtures.

Builds data/console-fixture.csv with one strongly-associated bad device
(infinite risk ratio) and one weakly-associated one (ratio between 3 and
10), then runs the same query at minRiskRatio 3 and 10 so the frontend
tests can verify the threshold-subset property against real reports.
"""

import json
from pathlib import Path

import numpy as np

from fastdata.core import QuerySpec
from fastdata.engine import run_oneshot
from fastdata.report import report_to_dict

HERE = Path(__file__).resolve().parent.parent


def main() -> None:
    rng = np.random.default_rng(7_31)
    rows = []
    for _ in range(1700):
        rows.append((rng.normal(50, 10), f"d{rng.integers(20)}", f"v{rng.integers(4)}"))
    for _ in range(14):  # strongly associated: all its rows are extreme
        rows.append((rng.normal(250, 10), "b1", "v3"))
    for i in range(200):  # weakly associated: a few extreme rows in a big population
        latency = rng.normal(250, 10) if i < 6 else rng.normal(50, 10)
        rows.append((latency, "b2", f"v{rng.integers(4)}"))
    rng.shuffle(rows)

    csv_path = HERE / "data" / "console-fixture.csv"
    with open(csv_path, "w") as f:
        f.write("latency,device,version\n")
        for latency, device, version in rows:
            f.write(f"{latency:.3f},{device},{version}\n")

    fixtures = HERE / "frontend" / "tests" / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)
    for ratio in (3.0, 10.0):
        spec = QuerySpec(
            source={"kind": "csv", "path": str(csv_path.relative_to(HERE))},
            metric_columns=["latency"],
            attribute_columns=["device", "version"],
            min_risk_ratio=ratio,
            random_seed=31,
        )
        report = run_oneshot(spec)
        out = fixtures / f"report-r{int(ratio)}.json"
        out.write_text(json.dumps(report_to_dict(report), indent=2) + "\n")
        ratios = [e.risk_ratio for e in report.explanations]
        print(f"r={ratio}: {len(report.explanations)} explanations, ratios={ratios}")


if __name__ == "__main__":
    main()
