"""Regenerate the bundled sample dataset (data/sample.csv).

A small request-latency log: most rows draw latency around 50ms, while one
(device, version) pair misbehaves at ~250ms.  A default query at the 1%
outlier percentile recovers that pair as its top explanation.
"""

from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent.parent


def main() -> None:
    rng = np.random.default_rng(20_17)
    n_normal, n_bad = 1976, 24

    devices = np.array([f"d{rng.integers(12)}" for _ in range(n_normal)])
    versions = np.array([f"v{rng.integers(4)}" for _ in range(n_normal)])
    latency = rng.normal(50.0, 10.0, n_normal)

    bad_devices = np.full(n_bad, "d7")
    bad_versions = np.full(n_bad, "v3")
    bad_latency = rng.normal(250.0, 10.0, n_bad)

    rows = np.concatenate
    order = rng.permutation(n_normal + n_bad)
    all_latency = rows([latency, bad_latency])[order]
    all_devices = rows([devices, bad_devices])[order]
    all_versions = rows([versions, bad_versions])[order]

    out = HERE / "data" / "sample.csv"
    out.parent.mkdir(exist_ok=True)
    with open(out, "w") as f:
        f.write("latency,device,version\n")
        for lat, dev, ver in zip(all_latency, all_devices, all_versions):
            f.write(f"{lat:.3f},{dev},{ver}\n")
    print(f"wrote {n_normal + n_bad} rows -> {out}")


if __name__ == "__main__":
    main()
