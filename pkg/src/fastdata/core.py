"""Domain types shared by every pipeline stage.

A query analyzes a stream of points.  Each point carries an ordered vector
of real-valued *metrics* (used for outlier scoring) and an ordered list of
categorical *attributes* (used for explanation), dictionary-encoded to
dense integer ids.  Batches are stored columnar (numpy) so that the hot
paths vectorize; ``Point`` is the per-record view used at the edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

# Reserved id for a missing attribute value.  Never enters explanations.
NULL_ID = -1


class FastdataError(Exception):
    pass


class DictionaryOverflowError(FastdataError):
    pass


class QuerySpecError(FastdataError):
    """Raised with the full list of violated parameter ranges."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


class PipelineTypeError(FastdataError):
    pass


class AttributeDictionary:
    """Bijection between observed (attribute name, value) pairs and dense ids.

    Single-writer: only the ingestion path may call encode().  snapshot()
    returns a read-only copy safe to hand to other threads for decoding.
    """

    def __init__(self, capacity: int | None = None):
        self.capacity = capacity
        self._ids: dict[tuple[str, str], int] = {}
        self._pairs: list[tuple[str, str]] = []

    def __len__(self) -> int:
        return len(self._pairs)

    def encode(self, name: str, value: str) -> int:
        key = (name, value)
        existing = self._ids.get(key)
        if existing is not None:
            return existing
        if self.capacity is not None and len(self._pairs) >= self.capacity:
            raise DictionaryOverflowError(
                f"attribute dictionary capacity {self.capacity} exceeded by {key!r}"
            )
        new_id = len(self._pairs)
        self._ids[key] = new_id
        self._pairs.append(key)
        return new_id

    def decode(self, item_id: int) -> tuple[str, str]:
        if item_id == NULL_ID:
            raise KeyError("NULL id has no decoding")
        return self._pairs[item_id]

    def get(self, name: str, value: str) -> int | None:
        return self._ids.get((name, value))

    def snapshot(self) -> "AttributeDictionary":
        copy = AttributeDictionary(self.capacity)
        copy._ids = dict(self._ids)
        copy._pairs = list(self._pairs)
        return copy


def encode_attribute(name: str, value: str, dictionary: AttributeDictionary) -> int:
    """Encode one (name, value) pair; same pair always yields the same id."""
    return dictionary.encode(name, value)


@dataclass(frozen=True)
class Point:
    """One record: metric vector, attribute values, optional timestamp."""

    metrics: tuple[float, ...]
    attributes: tuple[tuple[str, str], ...]
    timestamp: float | None = None


class PointBatch:
    """Columnar batch of points.

    metrics: float64 (n, d); attr_ids: int32 (n, a) with one dictionary id
    per configured attribute column (NULL_ID when missing); timestamps:
    optional float64 (n,).  Row order is the arrival order.
    """

    __slots__ = ("metrics", "attr_ids", "timestamps")

    def __init__(
        self,
        metrics: np.ndarray,
        attr_ids: np.ndarray,
        timestamps: np.ndarray | None = None,
    ):
        metrics = np.asarray(metrics, dtype=np.float64)
        if metrics.ndim != 2:
            raise ValueError("metrics must be 2-D (n, d)")
        attr_ids = np.asarray(attr_ids, dtype=np.int32)
        if attr_ids.ndim != 2 or attr_ids.shape[0] != metrics.shape[0]:
            raise ValueError("attr_ids must be 2-D (n, a) aligned with metrics")
        if not np.all(np.isfinite(metrics)):
            raise ValueError("metric values must be finite")
        self.metrics = metrics
        self.attr_ids = attr_ids
        self.timestamps = (
            None if timestamps is None else np.asarray(timestamps, dtype=np.float64)
        )

    def __len__(self) -> int:
        return self.metrics.shape[0]

    @property
    def n_metrics(self) -> int:
        return self.metrics.shape[1]

    @property
    def n_attrs(self) -> int:
        return self.attr_ids.shape[1]

    def iter_points(self, dictionary: AttributeDictionary) -> Iterator[Point]:
        for i in range(len(self)):
            attrs = tuple(
                dictionary.decode(int(a))
                for a in self.attr_ids[i]
                if int(a) != NULL_ID
            )
            ts = None if self.timestamps is None else float(self.timestamps[i])
            yield Point(tuple(float(m) for m in self.metrics[i]), attrs, ts)

    @staticmethod
    def concat(batches: Sequence["PointBatch"]) -> "PointBatch":
        if not batches:
            raise ValueError("cannot concat zero batches")
        ts = None
        if all(b.timestamps is not None for b in batches):
            ts = np.concatenate([b.timestamps for b in batches])
        return PointBatch(
            np.concatenate([b.metrics for b in batches]),
            np.concatenate([b.attr_ids for b in batches]),
            ts,
        )


@dataclass(frozen=True)
class Label:
    """Classifier output for one point: outlier flag plus the raw score."""

    is_outlier: bool
    score: float


@dataclass(frozen=True)
class ExplanationRecord:
    """An attribute-value combination common in outliers, rare in inliers.

    Counts may be decayed reals in streaming mode.  ao/ai are the counts of
    the combination among outliers/inliers; bo/bi the complements.
    """

    items: tuple[tuple[str, str], ...]
    ao: float
    ai: float
    bo: float
    bi: float
    outlier_support: float
    risk_ratio: float
    ci: tuple[float, float] | None = None
    num_tests: int = 1
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        for name, c in (("ao", self.ao), ("ai", self.ai), ("bo", self.bo), ("bi", self.bi)):
            if c < 0:
                raise ValueError(f"{name} must be nonnegative, got {c}")
        if self.ci is not None:
            lo, hi = self.ci
            if not (lo <= self.risk_ratio <= hi):
                raise ValueError("risk ratio must lie inside its confidence interval")


class Mode(str, Enum):
    ONESHOT = "oneshot"
    STREAMING = "streaming"


@dataclass
class QuerySpec:
    """Validated query configuration; defaults follow the engine defaults."""

    source: dict = field(default_factory=dict)
    metric_columns: list[str] = field(default_factory=list)
    attribute_columns: list[str] = field(default_factory=list)
    min_support: float = 0.001
    min_risk_ratio: float = 3.0
    outlier_percentile: float = 0.01
    reservoir_size: int = 10_000
    amc_stable_size: int = 10_000
    decay_rate: float = 0.01
    decay_period_points: int | None = 100_000
    decay_period_seconds: float | None = None
    mode: Mode = Mode.ONESHOT
    random_seed: int = 0
    batch_size: int = 10_000
    transforms: list[str] = field(default_factory=list)

    @property
    def retention(self) -> float:
        """Multiplier applied per decay period: 1 - decay_rate."""
        return 1.0 - self.decay_rate

    def to_json_dict(self) -> dict:
        return {
            "source": self.source,
            "metricColumns": list(self.metric_columns),
            "attributeColumns": list(self.attribute_columns),
            "minSupport": self.min_support,
            "minRiskRatio": self.min_risk_ratio,
            "outlierPercentile": self.outlier_percentile,
            "reservoirSize": self.reservoir_size,
            "amcStableSize": self.amc_stable_size,
            "decayRate": self.decay_rate,
            "decayPeriod": (
                {"points": self.decay_period_points}
                if self.decay_period_points is not None
                else {"seconds": self.decay_period_seconds}
            ),
            "mode": self.mode.value,
            "randomSeed": self.random_seed,
            "batchSize": self.batch_size,
            "transforms": list(self.transforms),
        }


_JSON_FIELDS = {
    "source": "source",
    "metricColumns": "metric_columns",
    "attributeColumns": "attribute_columns",
    "minSupport": "min_support",
    "minRiskRatio": "min_risk_ratio",
    "outlierPercentile": "outlier_percentile",
    "reservoirSize": "reservoir_size",
    "amcStableSize": "amc_stable_size",
    "decayRate": "decay_rate",
    "mode": "mode",
    "randomSeed": "random_seed",
    "batchSize": "batch_size",
    "transforms": "transforms",
}


def spec_from_json_dict(doc: dict) -> QuerySpec:
    """Build an (unvalidated) QuerySpec from its JSON mirror."""
    unknown = set(doc) - set(_JSON_FIELDS) - {"decayPeriod"}
    if unknown:
        raise QuerySpecError([f"unknown config field(s): {sorted(unknown)}"])
    kwargs = {}
    for json_name, attr in _JSON_FIELDS.items():
        if json_name in doc:
            kwargs[attr] = doc[json_name]
    if "mode" in kwargs:
        try:
            kwargs["mode"] = Mode(kwargs["mode"])
        except ValueError:
            raise QuerySpecError([f"mode must be one of {[m.value for m in Mode]}"])
    period = doc.get("decayPeriod")
    if period is not None:
        if not isinstance(period, dict) or len(period) != 1:
            raise QuerySpecError(['decayPeriod must be {"points": n} or {"seconds": t}'])
        if "points" in period:
            kwargs["decay_period_points"] = period["points"]
            kwargs["decay_period_seconds"] = None
        elif "seconds" in period:
            kwargs["decay_period_seconds"] = period["seconds"]
            kwargs["decay_period_points"] = None
        else:
            raise QuerySpecError(['decayPeriod must be {"points": n} or {"seconds": t}'])
    return QuerySpec(**kwargs)


def validate_query_spec(spec: QuerySpec | dict) -> QuerySpec:
    """Normalize and range-check a spec; raises QuerySpecError listing all violations."""
    if isinstance(spec, dict):
        spec = spec_from_json_dict(spec)
    errors = []
    if not (0.0 < spec.min_support <= 1.0):
        errors.append(f"minSupport must be in (0, 1], got {spec.min_support}")
    if not (spec.min_risk_ratio > 0.0):
        errors.append(f"minRiskRatio must be > 0, got {spec.min_risk_ratio}")
    if not (0.0 < spec.outlier_percentile < 1.0):
        errors.append(
            f"outlierPercentile must be in (0, 1), got {spec.outlier_percentile}"
        )
    if spec.reservoir_size < 1:
        errors.append(f"reservoirSize must be >= 1, got {spec.reservoir_size}")
    if spec.amc_stable_size < 1:
        errors.append(f"amcStableSize must be >= 1, got {spec.amc_stable_size}")
    # decayRate 1.0 would retain nothing after a single period.
    if not (0.0 <= spec.decay_rate < 1.0):
        errors.append(f"decayRate must be in [0, 1), got {spec.decay_rate}")
    if spec.decay_period_points is not None and spec.decay_period_points <= 0:
        errors.append(f"decayPeriod points must be positive, got {spec.decay_period_points}")
    if spec.decay_period_seconds is not None and spec.decay_period_seconds <= 0:
        errors.append(f"decayPeriod seconds must be positive, got {spec.decay_period_seconds}")
    if spec.decay_period_points is None and spec.decay_period_seconds is None:
        errors.append("decayPeriod must define either points or seconds")
    if spec.batch_size < 1:
        errors.append(f"batchSize must be >= 1, got {spec.batch_size}")
    if not isinstance(spec.random_seed, int):
        errors.append(f"randomSeed must be an integer, got {spec.random_seed!r}")
    for col in spec.metric_columns:
        if col in spec.attribute_columns:
            errors.append(f"column {col!r} listed as both metric and attribute")
    for name in spec.transforms:
        if name not in ("identity", "standardize"):
            errors.append(f"unknown transform {name!r}")
    if errors:
        raise QuerySpecError(errors)
    # normalize numeric types so identical configs serialize identically
    # regardless of whether a field arrived as 3 or 3.0
    return replace(
        spec,
        min_support=float(spec.min_support),
        min_risk_ratio=float(spec.min_risk_ratio),
        outlier_percentile=float(spec.outlier_percentile),
        decay_rate=float(spec.decay_rate),
        reservoir_size=int(spec.reservoir_size),
        amc_stable_size=int(spec.amc_stable_size),
        batch_size=int(spec.batch_size),
        decay_period_points=(
            None if spec.decay_period_points is None else int(spec.decay_period_points)
        ),
        decay_period_seconds=(
            None if spec.decay_period_seconds is None else float(spec.decay_period_seconds)
        ),
        metric_columns=list(spec.metric_columns),
        attribute_columns=list(spec.attribute_columns),
        transforms=list(spec.transforms),
    )


class OperatorKind(str, Enum):
    INGESTOR = "ingestor"
    TRANSFORMER = "transformer"
    CLASSIFIER = "classifier"
    EXPLAINER = "explainer"


class StreamType(str, Enum):
    EXTERNAL = "external"
    POINTS = "stream<Point>"
    LABELED_POINTS = "stream<(label, Point)>"
    EXPLANATIONS = "stream<Explanation>"


# Fixed signature per operator kind.
_KIND_SIGNATURES = {
    OperatorKind.INGESTOR: (StreamType.EXTERNAL, StreamType.POINTS),
    OperatorKind.TRANSFORMER: (StreamType.POINTS, StreamType.POINTS),
    OperatorKind.CLASSIFIER: (StreamType.POINTS, StreamType.LABELED_POINTS),
    OperatorKind.EXPLAINER: (StreamType.LABELED_POINTS, StreamType.EXPLANATIONS),
}


@dataclass(frozen=True)
class OperatorSignature:
    kind: OperatorKind
    input_type: StreamType
    output_type: StreamType

    @staticmethod
    def for_kind(kind: OperatorKind) -> "OperatorSignature":
        inp, out = _KIND_SIGNATURES[kind]
        return OperatorSignature(kind, inp, out)

    def __post_init__(self):
        expected = _KIND_SIGNATURES[self.kind]
        if (self.input_type, self.output_type) != expected:
            raise PipelineTypeError(
                f"{self.kind.value} must have signature {expected[0].value} -> "
                f"{expected[1].value}"
            )


def typecheck_pipeline(stages: Sequence[OperatorSignature]) -> None:
    """Accept iff the stages compose into Ingestor -> ... -> stream<Explanation>."""
    if not stages:
        raise PipelineTypeError("pipeline must contain at least one stage")
    if stages[0].kind is not OperatorKind.INGESTOR:
        raise PipelineTypeError(
            f"pipeline must start with an ingestor, got {stages[0].kind.value}"
        )
    for i in range(len(stages) - 1):
        left, right = stages[i], stages[i + 1]
        if left.output_type is not right.input_type:
            raise PipelineTypeError(
                f"stage {i} ({left.kind.value}) outputs {left.output_type.value} "
                f"but stage {i + 1} ({right.kind.value}) consumes {right.input_type.value}"
            )
    if stages[-1].output_type is not StreamType.EXPLANATIONS:
        raise PipelineTypeError(
            f"pipeline must end in {StreamType.EXPLANATIONS.value}, got "
            f"{stages[-1].output_type.value}"
        )


def nearest_rank_quantile(values: np.ndarray, q: float) -> float:
    """Nearest-rank quantile: the ceil(q*n)-th smallest of the sample."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n == 0:
        raise ValueError("quantile of an empty sample")
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must be in (0, 1), got {q}")
    rank = max(math.ceil(q * n), 1)
    # kth smallest without a full sort
    return float(np.partition(values, rank - 1)[rank - 1])
