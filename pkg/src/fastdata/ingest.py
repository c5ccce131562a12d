"""Point-stream sources: delimited files and scripted synthetic generators.

File sources parse configured metric columns as reals and take attribute
columns verbatim; rows with unparseable metrics are skipped and counted,
never silently dropped.  Synthetic generators are pure functions of their
parameters and seed, and attach ground truth as a reserved "_truth"
attribute column that evaluation reads but queries simply do not select.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import AttributeDictionary, FastdataError, PointBatch, QuerySpec


class SourceConfigError(FastdataError):
    pass


@dataclass
class IngestStats:
    rows_read: int = 0
    rows_skipped: int = 0
    points_emitted: int = 0


@dataclass
class ColumnData:
    """Raw columnar source data before query-specific selection."""

    metrics: dict[str, np.ndarray]
    attributes: dict[str, np.ndarray]  # unicode arrays
    timestamps: np.ndarray | None = None


def encode_column(values: np.ndarray, name: str, dictionary: AttributeDictionary) -> np.ndarray:
    """Dictionary-encode one attribute column (vectorized per distinct value)."""
    uniques, inverse = np.unique(np.asarray(values, dtype=str), return_inverse=True)
    ids = np.array([dictionary.encode(name, str(v)) for v in uniques], dtype=np.int32)
    return ids[inverse]


def batch_from_columns(
    data: ColumnData, spec: QuerySpec, dictionary: AttributeDictionary
) -> PointBatch:
    missing = [c for c in spec.metric_columns if c not in data.metrics]
    missing += [c for c in spec.attribute_columns if c not in data.attributes]
    if missing:
        raise SourceConfigError(f"configured column(s) not in source: {missing}")
    n = len(next(iter(data.metrics.values()))) if data.metrics else 0
    metrics = np.column_stack([data.metrics[c] for c in spec.metric_columns])
    if spec.attribute_columns:
        attrs = np.column_stack(
            [encode_column(data.attributes[c], c, dictionary) for c in spec.attribute_columns]
        )
    else:
        attrs = np.empty((n, 0), dtype=np.int32)
    return PointBatch(metrics, attrs, data.timestamps)


# ---------------------------------------------------------------------------
# file sources


def _iter_file_batches(
    rows: Iterator[dict], spec: QuerySpec, dictionary: AttributeDictionary, stats: IngestStats
) -> Iterator[PointBatch]:
    metric_cols, attr_cols = spec.metric_columns, spec.attribute_columns
    buf_metrics: list[list[float]] = []
    buf_attrs: list[list[str]] = []
    for row in rows:
        stats.rows_read += 1
        try:
            metrics = [float(row[c]) for c in metric_cols]
            if not all(math.isfinite(m) for m in metrics):
                raise ValueError("non-finite metric")
            attrs = [str(row[c]) for c in attr_cols]
        except (ValueError, TypeError, KeyError):
            stats.rows_skipped += 1
            continue
        buf_metrics.append(metrics)
        buf_attrs.append(attrs)
        if len(buf_metrics) == spec.batch_size:
            yield _flush(buf_metrics, buf_attrs, attr_cols, dictionary, stats)
            buf_metrics, buf_attrs = [], []
    if buf_metrics:
        yield _flush(buf_metrics, buf_attrs, attr_cols, dictionary, stats)


def _flush(buf_metrics, buf_attrs, attr_cols, dictionary, stats) -> PointBatch:
    n = len(buf_metrics)
    stats.points_emitted += n
    metrics = np.asarray(buf_metrics, dtype=np.float64).reshape(n, -1)
    if attr_cols:
        raw = np.asarray(buf_attrs, dtype=str)
        attrs = np.column_stack(
            [encode_column(raw[:, j], c, dictionary) for j, c in enumerate(attr_cols)]
        )
    else:
        attrs = np.empty((n, 0), dtype=np.int32)
    return PointBatch(metrics, attrs)


def _csv_rows(path: str, spec: QuerySpec) -> Iterator[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [
            c for c in spec.metric_columns + spec.attribute_columns if c not in header
        ]
        if missing:
            raise SourceConfigError(f"CSV {path} lacks configured column(s): {missing}")
        yield from reader


def _jsonl_rows(path: str) -> Iterator[dict]:
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)


# ---------------------------------------------------------------------------
# synthetic generators


@dataclass
class SynthDeviceParams:
    """Device population where a fraction of devices draws its metric from
    a shifted distribution: inliers N(10, 10), outliers N(70, 10), both
    read as (mean, standard deviation)."""

    n_points: int
    n_devices: int
    outlier_device_fraction: float = 0.01
    label_noise: float = 0.0
    measurement_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 1 or self.n_devices < 1:
            raise ValueError("n_points and n_devices must be positive")
        if not (0.0 < self.outlier_device_fraction < 1.0):
            raise ValueError("outlier_device_fraction must be in (0, 1)")
        for name in ("label_noise", "measurement_noise"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise ValueError(f"{name} must be in [0, 1), got {v}")
        if self.n_outlier_devices < 1:
            raise ValueError("parameters must designate at least one outlier device")

    @property
    def n_outlier_devices(self) -> int:
        return max(1, round(self.n_devices * self.outlier_device_fraction))


@dataclass
class DeviceStreamData:
    metrics: np.ndarray  # (n, 1)
    device_names: np.ndarray  # (n,) str
    outlier_devices: set[str]

    def truth_column(self) -> np.ndarray:
        flags = np.isin(self.device_names, sorted(self.outlier_devices))
        return np.where(flags, "outlier", "inlier")


INLIER_MEAN, INLIER_SD = 10.0, 10.0
OUTLIER_MEAN, OUTLIER_SD = 70.0, 10.0


def synth_device_stream(p: SynthDeviceParams) -> DeviceStreamData:
    """Deterministic under seed; points round-robin across devices so every
    device receives an equal share in arrival order."""
    rng = np.random.default_rng(p.seed)
    outlier_idx = rng.choice(p.n_devices, size=p.n_outlier_devices, replace=False)
    is_outlier_device = np.zeros(p.n_devices, dtype=bool)
    is_outlier_device[outlier_idx] = True

    device = np.arange(p.n_points) % p.n_devices
    from_outlier_dist = is_outlier_device[device]
    if p.label_noise > 0.0:
        swap = rng.random(p.n_points) < p.label_noise
        from_outlier_dist = from_outlier_dist ^ swap
    means = np.where(from_outlier_dist, OUTLIER_MEAN, INLIER_MEAN)
    sds = np.where(from_outlier_dist, OUTLIER_SD, INLIER_SD)
    metrics = rng.normal(means, sds)
    if p.measurement_noise > 0.0:
        noisy = rng.random(p.n_points) < p.measurement_noise
        metrics[noisy] = rng.uniform(0.0, 80.0, size=int(noisy.sum()))

    names = np.array([f"d{i}" for i in range(p.n_devices)])
    return DeviceStreamData(
        metrics=metrics[:, None],
        device_names=names[device],
        outlier_devices={f"d{i}" for i in outlier_idx},
    )


@dataclass
class ContaminationData:
    metrics: np.ndarray  # (n, dims)
    is_outlier: np.ndarray  # (n,) bool

    def truth_column(self) -> np.ndarray:
        return np.where(self.is_outlier, "outlier", "inlier")


def contamination_stream(
    n: int, contamination: float, dims: int = 1, seed: int = 0
) -> ContaminationData:
    """Two uniform balls of radius 50: inliers centered at the origin,
    outliers at 1000 per coordinate; floor(contamination * n) points come
    from the outlier ball.  Arrival order is a seeded shuffle."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= contamination < 1.0):
        raise ValueError("contamination must be in [0, 1)")
    if dims not in (1, 2):
        raise ValueError("dims must be 1 or 2")
    rng = np.random.default_rng(seed)
    n_out = int(math.floor(contamination * n))
    n_in = n - n_out

    def ball(count: int, center: float) -> np.ndarray:
        if dims == 1:
            return center + rng.uniform(-50.0, 50.0, size=(count, 1))
        radius = 50.0 * np.sqrt(rng.random(count))
        theta = rng.uniform(0.0, 2.0 * math.pi, size=count)
        return np.column_stack(
            [center + radius * np.cos(theta), center + radius * np.sin(theta)]
        )

    metrics = np.vstack([ball(n_in, 0.0), ball(n_out, 1000.0)])
    truth = np.concatenate([np.zeros(n_in, bool), np.ones(n_out, bool)])
    perm = rng.permutation(n)
    return ContaminationData(metrics[perm], truth[perm])


@dataclass
class AdaptivityData:
    timestamps: np.ndarray
    metrics: np.ndarray  # (n, 1)
    device_names: np.ndarray
    base_rate: float
    burst_window: tuple[float, float]


def adaptivity_script_stream(
    seed: int = 0,
    base_rate: float = 1000.0,
    n_devices: int = 100,
    duration: float = 400.0,
) -> AdaptivityData:
    """Scripted time-varying stream over n_devices, device 0 is "D0".

    Phase 1 (0-150s): all devices N(10,10); D0 reads N(70,10) during
    50-100s.  Phase 2 (150-300s): baseline shifts to N(40,10); D0 reads
    N(-10,10) during 225-250s.  Phase 3 (300s+): baseline continues, and
    during a four-second burst starting at 320s the arrival rate rises
    ten-fold with the extra readings drawn from N(85,15) by the non-D0
    devices, while D0 keeps its base-rate N(40,10) output.
    """
    rng = np.random.default_rng(seed)
    names = np.array([f"D{i}" for i in range(n_devices)])
    burst_start, burst_end = 320.0, 324.0

    ts_parts, metric_parts, device_parts = [], [], []
    for second in range(int(duration)):
        t0 = float(second)
        burst = burst_start <= t0 < burst_end and t0 + 1 <= duration
        base_mean = 10.0 if t0 < 150.0 else 40.0
        d0_mean, d0_sd = base_mean, 10.0
        if 50.0 <= t0 < 100.0:
            d0_mean = 70.0
        elif 225.0 <= t0 < 250.0:
            d0_mean = -10.0

        if not burst:
            n = int(base_rate)
            device = np.arange(n) % n_devices
            means = np.where(device == 0, d0_mean, base_mean)
            values = rng.normal(means, 10.0)
        else:
            n_d0 = max(1, int(base_rate / n_devices))
            n_noise = int(base_rate * 10) - n_d0
            device = np.concatenate(
                [np.zeros(n_d0, dtype=int), 1 + np.arange(n_noise) % (n_devices - 1)]
            )
            values = np.concatenate(
                [rng.normal(d0_mean, d0_sd, n_d0), rng.normal(85.0, 15.0, n_noise)]
            )
            n = n_d0 + n_noise
            order = rng.permutation(n)
            device, values = device[order], values[order]
        ts_parts.append(t0 + np.arange(n) / n)
        metric_parts.append(values)
        device_parts.append(device)

    device_all = np.concatenate(device_parts)
    return AdaptivityData(
        timestamps=np.concatenate(ts_parts),
        metrics=np.concatenate(metric_parts)[:, None],
        device_names=names[device_all],
        base_rate=base_rate,
        burst_window=(burst_start, burst_end),
    )


# ---------------------------------------------------------------------------
# source dispatch


def _synthetic_columns(source: dict) -> ColumnData:
    kind = source["kind"]
    params = {k: v for k, v in source.items() if k != "kind"}
    if kind == "synthetic-devices":
        data = synth_device_stream(SynthDeviceParams(**params))
        return ColumnData(
            metrics={"value": data.metrics[:, 0]},
            attributes={"device": data.device_names, "_truth": data.truth_column()},
        )
    if kind == "synthetic-contamination":
        data = contamination_stream(**params)
        metrics = {f"m{j}": data.metrics[:, j] for j in range(data.metrics.shape[1])}
        return ColumnData(metrics=metrics, attributes={"_truth": data.truth_column()})
    if kind == "synthetic-adaptivity":
        data = adaptivity_script_stream(**params)
        return ColumnData(
            metrics={"value": data.metrics[:, 0]},
            attributes={"device": data.device_names},
            timestamps=data.timestamps,
        )
    raise SourceConfigError(f"unknown synthetic source kind {kind!r}")


def open_source(
    spec: QuerySpec, dictionary: AttributeDictionary
) -> tuple[Iterator[PointBatch], IngestStats]:
    """Open the spec's source as an order-preserving stream of batches."""
    source = spec.source
    kind = source.get("kind")
    stats = IngestStats()
    if kind in ("csv", "jsonl"):
        path = source.get("path")
        if not path:
            raise SourceConfigError(f"{kind} source requires a path")
        rows = _csv_rows(path, spec) if kind == "csv" else _jsonl_rows(path)
        return _iter_file_batches(rows, spec, dictionary, stats), stats
    if kind in ("synthetic-devices", "synthetic-contamination", "synthetic-adaptivity"):
        data = _synthetic_columns(source)
        batch = batch_from_columns(data, spec, dictionary)
        stats.rows_read = stats.points_emitted = len(batch)

        def batches() -> Iterator[PointBatch]:
            for start in range(0, len(batch), spec.batch_size):
                end = min(start + spec.batch_size, len(batch))
                ts = None if batch.timestamps is None else batch.timestamps[start:end]
                yield PointBatch(batch.metrics[start:end], batch.attr_ids[start:end], ts)

        return batches(), stats
    raise SourceConfigError(f"unknown source kind {kind!r}")
