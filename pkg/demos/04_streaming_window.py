"""Streaming execution over a drifting stream.

The engine retrains its model from a damped reservoir at every decay tick
and emits explanations on demand.  Halfway through, a new device starts
misbehaving; the damped window forgets the old regime and the emissions
track the change.
"""

import numpy as np

from fastdata import QuerySpec, Mode
from fastdata.core import PointBatch
from fastdata.engine import MdpStreamingPipeline
from fastdata.ingest import encode_column

spec = QuerySpec(
    source={},  # batches are fed manually below
    metric_columns=["value"],
    attribute_columns=["device"],
    mode=Mode.STREAMING,
    decay_rate=0.3,
    decay_period_points=10_000,
    reservoir_size=5_000,
    random_seed=7,
)
pipeline = MdpStreamingPipeline(spec)
rng = np.random.default_rng(7)


def make_batch(bad_device: str | None, n: int = 10_000) -> PointBatch:
    devices = np.array([f"dev{rng.integers(20)}" for _ in range(n)])
    values = rng.normal(10.0, 5.0, n)
    if bad_device is not None:
        mask = devices == bad_device
        values[mask] = rng.normal(60.0, 5.0, mask.sum())
    ids = encode_column(devices, "device", pipeline.dictionary)
    return PointBatch(values[:, None], ids[:, None])


def show(tag: str) -> None:
    report = pipeline.emit()
    top = ", ".join(
        f"{dict(r.items)['device']} (rr {'inf' if r.risk_ratio == float('inf') else f'{r.risk_ratio:.0f}'})"
        for r in report.explanations[:3]
    )
    print(f"{tag:<26} outliers so far {report.outlier_count:>4}; top: {top or '(none)'}")


print("phase 1: dev3 misbehaves")
for _ in range(5):
    pipeline.process_batch(make_batch("dev3"))
show("after 50K points")

print("phase 2: dev3 recovers, dev11 misbehaves")
for _ in range(5):
    pipeline.process_batch(make_batch("dev11"))
show("after 50K more")

for _ in range(3):
    pipeline.process_batch(make_batch("dev11"))
show("three windows later")
