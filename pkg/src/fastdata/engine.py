"""The default pipeline: ingest, transform, score robustly, threshold at a
score percentile, and explain — in one-shot or damped streaming mode.

Model family follows the metric dimension: one metric trains MAD, two or
more train FastMCD with Mahalanobis scoring.  Streaming execution keeps a
damped reservoir of raw inputs (for periodic retraining) and one of scores
(for the percentile cutoff); every decay tick retrains the model, refreshes
the cutoff, and advances the explanation window.  Model and cutoff swaps
happen only at batch boundaries, so each point is scored by exactly one
model version.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .classify import (
    DegenerateModelError,
    MadModel,
    McdModel,
    ThresholdState,
    score_mad,
    score_mahalanobis,
    train_fastmcd,
    train_mad,
)
from .core import (
    NULL_ID,
    AttributeDictionary,
    ExplanationRecord,
    Mode,
    OperatorKind,
    OperatorSignature,
    PointBatch,
    QuerySpec,
    nearest_rank_quantile,
    typecheck_pipeline,
    validate_query_spec,
)
from .explain import ExplainStats, attach_confidence, explain_batch
from .ingest import open_source
from .sketches import AdaptableDampedReservoir, DecayDriver, PeriodSampleFolder
from .streamexplain import EmitStats, StreamingSummarizer

logger = logging.getLogger(__name__)

ONESHOT_TRAINING_CAP = 1_000_000
CONFIDENCE_P = 0.05

Model = MadModel | McdModel


@dataclass
class Timings:
    train_ms: float = 0.0
    score_ms: float = 0.0
    explain_ms: float = 0.0


@dataclass
class QueryReport:
    query_id: str
    mode: Mode
    points_processed: int
    outlier_count: int
    cutoff: float
    explanations: list[ExplanationRecord]
    timings: Timings
    config: dict
    seed: int


def _query_id(spec: QuerySpec) -> str:
    blob = json.dumps(spec.to_json_dict(), sort_keys=True).encode()
    return hashlib.sha1(blob).hexdigest()[:12]


def default_pipeline_signatures() -> list[OperatorSignature]:
    return [
        OperatorSignature.for_kind(OperatorKind.INGESTOR),
        OperatorSignature.for_kind(OperatorKind.TRANSFORMER),
        OperatorSignature.for_kind(OperatorKind.CLASSIFIER),
        OperatorSignature.for_kind(OperatorKind.EXPLAINER),
    ]


# ---------------------------------------------------------------------------
# transforms (stage 2)

KNOWN_TRANSFORMS = ("identity", "standardize")


@dataclass
class Standardizer:
    mean: np.ndarray
    sd: np.ndarray

    @staticmethod
    def fit(metrics: np.ndarray) -> "Standardizer":
        sd = metrics.std(axis=0)
        sd[sd == 0.0] = 1.0
        return Standardizer(metrics.mean(axis=0), sd)

    def apply(self, metrics: np.ndarray) -> np.ndarray:
        return (metrics - self.mean) / self.sd


def transform_stage(
    metrics: np.ndarray, names: list[str], standardizer: Standardizer | None = None
) -> np.ndarray:
    """Apply the configured chain of built-in transforms to metric columns."""
    for name in names:
        if name == "identity":
            continue
        if name == "standardize":
            fitted = standardizer or Standardizer.fit(metrics)
            metrics = fitted.apply(metrics)
            continue
        raise ValueError(f"unknown transform {name!r}; known: {KNOWN_TRANSFORMS}")
    return metrics


# ---------------------------------------------------------------------------
# model training / scoring


def train_model(metrics: np.ndarray, seed: int) -> Model:
    if metrics.shape[1] == 1:
        return train_mad(metrics[:, 0])
    return train_fastmcd(metrics, seed=seed)


def score_points(model: Model, metrics: np.ndarray) -> np.ndarray:
    if isinstance(model, MadModel):
        return score_mad(model, metrics[:, 0])
    return score_mahalanobis(model, metrics)


# ---------------------------------------------------------------------------
# one-shot execution


def run_oneshot(spec: QuerySpec) -> QueryReport:
    spec = validate_query_spec(spec)
    typecheck_pipeline(default_pipeline_signatures())
    dictionary = AttributeDictionary()
    batches, stats = open_source(spec, dictionary)
    collected = list(batches)
    timings = Timings()
    if not collected:
        return QueryReport(
            _query_id(spec), Mode.ONESHOT, 0, 0, float("inf"), [], timings,
            spec.to_json_dict(), spec.random_seed,
        )
    data = PointBatch.concat(collected)
    metrics = transform_stage(data.metrics, spec.transforms)

    t0 = time.perf_counter()
    if len(data) > ONESHOT_TRAINING_CAP:
        adr = AdaptableDampedReservoir(
            spec.reservoir_size, 0.0, seed=spec.random_seed,
            item_shape=(metrics.shape[1],),
        )
        adr.observe_many(metrics)
        model = train_model(adr.sample(), spec.random_seed)
    else:
        model = train_model(metrics, spec.random_seed)
    timings.train_ms = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    scores = score_points(model, metrics)
    cutoff = nearest_rank_quantile(scores, 1.0 - spec.outlier_percentile)
    outlier_mask = scores > cutoff
    timings.score_ms = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    explain_stats = ExplainStats()
    records = explain_batch(
        data.attr_ids[outlier_mask],
        data.attr_ids[~outlier_mask],
        dictionary,
        spec.min_support,
        spec.min_risk_ratio,
        stats=explain_stats,
    )
    records = attach_confidence(records, CONFIDENCE_P, max(explain_stats.num_tests, 1))
    timings.explain_ms = (time.perf_counter() - t0) * 1e3

    if stats.rows_skipped:
        logger.warning("skipped %d unparseable row(s)", stats.rows_skipped)
    return QueryReport(
        query_id=_query_id(spec),
        mode=Mode.ONESHOT,
        points_processed=len(data),
        outlier_count=int(outlier_mask.sum()),
        cutoff=float(cutoff),
        explanations=records,
        timings=timings,
        config=spec.to_json_dict(),
        seed=spec.random_seed,
    )


# ---------------------------------------------------------------------------
# streaming execution


class MdpStreamingPipeline:
    """Stateful streaming executor for one query.

    sampler selects the reservoir decay mechanics: "adr" (decay at window
    ticks), "per-tuple" (the tuple-at-a-time damped comparison mode), or
    "uniform" (no decay).  The retrain/window schedule is the decay driver
    in every mode, so the sampler is the only moving part.
    """

    def __init__(
        self, spec: QuerySpec, sampler: str = "adr", tuple_retention: float | None = None
    ):
        self.spec = spec = validate_query_spec(spec)
        typecheck_pipeline(default_pipeline_signatures())
        if sampler not in ("adr", "per-tuple", "uniform"):
            raise ValueError(f"unknown sampler {sampler!r}")
        self.sampler = sampler
        self.dictionary = AttributeDictionary()
        self.model: Model | None = None
        self.standardizer: Standardizer | None = None
        self.points_processed = 0
        self.outlier_count = 0
        seed = spec.random_seed
        self._tuple_retention = 1.0
        if sampler == "per-tuple":
            if tuple_retention is not None:
                self._tuple_retention = tuple_retention
            elif spec.decay_period_points:
                # same aggregate decay per period, applied one tuple at a time
                self._tuple_retention = (1.0 - spec.decay_rate) ** (
                    1.0 / spec.decay_period_points
                )
            else:
                raise ValueError(
                    "per-tuple sampler with a time-based period needs an "
                    "explicit tuple_retention"
                )
        if sampler == "per-tuple":
            decay = 1.0 - self._tuple_retention
        elif sampler == "uniform":
            decay = 0.0
        else:
            decay = spec.decay_rate
        self.input_adr: AdaptableDampedReservoir | None = None  # sized on first batch
        self._input_seed = seed
        self._decay = decay
        self.score_adr = AdaptableDampedReservoir(spec.reservoir_size, decay, seed + 1)
        # real-time windows get the uniform-sample-per-period fold policy,
        # which keeps arrival-rate spikes from flooding the damped samples
        self._fold = sampler == "adr" and spec.decay_period_seconds is not None
        self.input_folder: PeriodSampleFolder | None = None
        self.score_folder = (
            PeriodSampleFolder(self.score_adr, seed + 2) if self._fold else None
        )
        self.threshold = ThresholdState(self.score_adr, spec.outlier_percentile)
        self.summarizer = StreamingSummarizer(
            spec.min_support, spec.retention, spec.amc_stable_size
        )
        self.driver = DecayDriver(spec.decay_period_points, spec.decay_period_seconds)
        self.ticks = 0

    def process_batch(self, batch: PointBatch) -> None:
        spec = self.spec
        metrics = batch.metrics
        if self.input_adr is None:
            self.input_adr = AdaptableDampedReservoir(
                spec.reservoir_size, self._decay, self._input_seed,
                item_shape=(metrics.shape[1],),
            )
            if self._fold:
                self.input_folder = PeriodSampleFolder(self.input_adr, self._input_seed + 3)
        if "standardize" in spec.transforms and self.standardizer is None:
            self.standardizer = Standardizer.fit(metrics)
        metrics = transform_stage(metrics, spec.transforms, self.standardizer)

        if self.model is None:
            # warm-up: first batch trains the initial model and cutoff
            self.model = train_model(metrics, spec.random_seed)
            warm_scores = score_points(self.model, metrics)
            self.threshold.cutoff = nearest_rank_quantile(
                warm_scores, 1.0 - spec.outlier_percentile
            )
        scores = score_points(self.model, metrics)
        outlier_mask = scores > self.threshold.cutoff

        if self.sampler == "per-tuple":
            self.input_adr.observe_many_tuple_decayed(metrics)
            self.score_adr.observe_many_tuple_decayed(scores)
        elif self._fold:
            self.input_folder.observe_many(metrics)
            self.score_folder.observe_many(scores)
        else:
            self.input_adr.observe_many(metrics)
            self.score_adr.observe_many(scores)

        attr_ids = batch.attr_ids
        for i in range(len(batch)):
            attrs = [int(a) for a in attr_ids[i] if a != NULL_ID]
            self.summarizer.observe_labeled_point(bool(outlier_mask[i]), attrs)

        n_out = int(outlier_mask.sum())
        self.points_processed += len(batch)
        self.outlier_count += n_out
        self.threshold.record_labels(n_out, len(batch))
        if self.threshold.drift_check():
            self.threshold.refresh()

        last_ts = None if batch.timestamps is None else float(batch.timestamps[-1])
        if last_ts is None and self.spec.decay_period_seconds is not None:
            if self.points_processed == len(batch):
                logger.warning(
                    "time-based decay configured but the source carries no "
                    "timestamps; no decay ticks will fire"
                )
        for _ in range(self.driver.advance(len(batch), last_ts)):
            self._tick()

    def _tick(self) -> None:
        self.ticks += 1
        if self._fold:
            if self.input_folder is not None:
                self.input_folder.tick()
            self.score_folder.tick()
        elif self.sampler == "adr":
            self.input_adr.decay()
            self.score_adr.decay()
        self.summarizer.advance_window()
        self.retrain()

    def retrain(self) -> None:
        """Retrain from the input reservoir and refresh the cutoff; on a
        degenerate sample the previous model is kept."""
        sample = self.input_adr.sample() if self.input_adr is not None else []
        if len(sample) == 0:
            logger.warning("retrain skipped: empty input reservoir")
        else:
            try:
                new_model = train_model(np.asarray(sample), self.spec.random_seed)
            except (DegenerateModelError, ValueError) as exc:
                logger.warning("retrain kept previous model: %s", exc)
            else:
                if "standardize" in self.spec.transforms:
                    self.standardizer = Standardizer.fit(np.asarray(sample))
                self.model = new_model
        self.threshold.refresh()

    def emit(self) -> QueryReport:
        """Assemble a report from the current summarizer state (read-only)."""
        t0 = time.perf_counter()
        stats = EmitStats()
        records = self.summarizer.emit_explanations(
            self.spec.min_risk_ratio, self.dictionary, stats
        )
        records = attach_confidence(records, CONFIDENCE_P, max(stats.num_tests, 1))
        explain_ms = (time.perf_counter() - t0) * 1e3
        return QueryReport(
            query_id=_query_id(self.spec),
            mode=Mode.STREAMING,
            points_processed=self.points_processed,
            outlier_count=self.outlier_count,
            cutoff=float(self.threshold.cutoff),
            explanations=records,
            timings=Timings(explain_ms=explain_ms),
            config=self.spec.to_json_dict(),
            seed=self.spec.random_seed,
        )


def run_streaming(
    spec: QuerySpec,
    emit_every_points: int | None = None,
    emit_every_seconds: float | None = None,
    sampler: str = "adr",
    on_emit: Callable[[QueryReport, MdpStreamingPipeline], None] | None = None,
    tuple_retention: float | None = None,
) -> list[QueryReport]:
    """Drive a streaming query over its (finite) source, emitting reports on
    the requested schedule plus once at end of stream."""
    spec = validate_query_spec(spec)
    pipeline = MdpStreamingPipeline(spec, sampler, tuple_retention)
    batches, _stats = open_source(spec, pipeline.dictionary)
    schedule = DecayDriver(emit_every_points, emit_every_seconds) if (
        emit_every_points or emit_every_seconds
    ) else None
    reports = []
    for batch in batches:
        pipeline.process_batch(batch)
        if schedule is not None:
            last_ts = None if batch.timestamps is None else float(batch.timestamps[-1])
            for _ in range(schedule.advance(len(batch), last_ts)):
                report = pipeline.emit()
                reports.append(report)
                if on_emit is not None:
                    on_emit(report, pipeline)
    report = pipeline.emit()
    reports.append(report)
    if on_emit is not None:
        on_emit(report, pipeline)
    return reports
