"""Density-based outlier scoring and thresholding.

The default detectors are robust: MAD for a single metric, a FastMCD
estimate of location/scatter with Mahalanobis scoring for several.  A
plain Z-score and a rule predicate are kept as baselines, and labels from
several classifiers can be OR-combined for hybrid supervision.  Scores are
turned into labels by a strict percentile cutoff maintained from a damped
reservoir of recent scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import FastdataError, Label
from .sketches import AdaptableDampedReservoir


class DegenerateModelError(FastdataError):
    pass


@dataclass(frozen=True)
class MadModel:
    """Median / median-absolute-deviation location and scale.

    When the training sample has MAD = 0 (quantized or constant data) the
    model scores against fallback_scale instead and flags the degeneracy.
    No consistency constant is applied: the downstream cutoff is a score
    percentile, so constant factors cancel.
    """

    median: float
    mad: float
    fallback_scale: float
    degenerate: bool = False

    @property
    def scale(self) -> float:
        return self.fallback_scale if self.degenerate else self.mad


def train_mad(sample: np.ndarray, fallback_scale: float | None = None) -> MadModel:
    sample = np.asarray(sample, dtype=np.float64).ravel()
    if sample.size == 0:
        raise ValueError("cannot train MAD on an empty sample")
    median = float(np.median(sample))
    deviations = np.abs(sample - median)
    mad = float(np.median(deviations))
    if mad > 0.0:
        return MadModel(median, mad, mad)
    if fallback_scale is None:
        nonzero = deviations[deviations > 0.0]
        fallback_scale = float(np.median(nonzero)) if nonzero.size else 1.0
    return MadModel(median, 0.0, fallback_scale, degenerate=True)


def score_mad(model: MadModel, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=np.float64)
    scores = np.abs(x - model.median) / model.scale
    return float(scores) if scores.ndim == 0 else scores


def score_zscore(mean: float, sd: float, x) -> np.ndarray | float:
    if sd <= 0:
        raise ValueError("z-score requires sd > 0")
    x = np.asarray(x, dtype=np.float64)
    scores = np.abs(x - mean) / sd
    return float(scores) if scores.ndim == 0 else scores


@dataclass(frozen=True)
class McdModel:
    """Robust multivariate location (mu) and scatter (cov) from FastMCD."""

    mu: np.ndarray
    cov: np.ndarray
    cov_inv: np.ndarray
    det: float
    h_fraction: float
    iterations: int
    det_history: tuple[tuple[float, ...], ...] = ()  # per start, per C-step


def _regularize(cov: np.ndarray, max_condition: float = 1e12) -> np.ndarray:
    """Trace-scaled ridge, escalated until the condition number is sane."""
    d = cov.shape[0]
    scale = np.trace(cov) / d
    if scale <= 0 or not np.isfinite(scale):
        scale = 1.0
    lam = 1e-10
    out = cov
    while True:
        try:
            cond = np.linalg.cond(out)
        except np.linalg.LinAlgError:
            cond = np.inf
        if np.isfinite(cond) and cond <= max_condition:
            return out
        out = cov + lam * scale * np.eye(d)
        lam *= 10.0
        if lam > 1e6:
            raise DegenerateModelError("covariance is singular even after ridge")


def _mean_cov(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = points.mean(axis=0)
    centered = points - mu
    cov = centered.T @ centered / max(len(points) - 1, 1)
    return mu, cov


def _mahalanobis_sq(points: np.ndarray, mu: np.ndarray, cov: np.ndarray) -> np.ndarray:
    centered = points - mu
    solved = np.linalg.solve(cov, centered.T)
    return np.einsum("ij,ji->i", centered, solved)


def train_fastmcd(
    sample: np.ndarray,
    h_fraction: float = 0.5,
    stopping_epsilon: float = 1e-3,
    n_starts: int = 5,
    seed: int = 0,
    max_iterations: int = 100,
) -> McdModel:
    """Iterative concentration-step approximation of the minimum covariance
    determinant estimator.

    Each start draws a small random subset, fits (mu, C), then repeatedly
    keeps the h points of smallest Mahalanobis distance and refits until
    the determinant's relative improvement drops below stopping_epsilon.
    The determinant never increases across a step; the best start wins.
    """
    points = np.asarray(sample, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("sample must be 2-D (n, d)")
    n, d = points.shape
    if n < d + 1:
        raise ValueError(f"need at least d+1={d + 1} points, got {n}")
    if float(np.ptp(points, axis=0).max()) == 0.0:
        raise DegenerateModelError("sample has zero scatter in every dimension")
    # h >= (n + d + 1) / 2 gives the maximal-breakdown subset size
    h = max(int(math.floor((n + d + 1) / 2)), int(math.ceil(h_fraction * n)))
    h = min(h, n)
    rng = np.random.default_rng(seed)

    best: tuple[float, np.ndarray, np.ndarray, int] | None = None
    histories = []
    for _ in range(n_starts):
        subset = rng.choice(n, size=min(d + 1, n), replace=False)
        mu, cov = _mean_cov(points[subset])
        cov = _regularize(cov)
        prev_det = np.inf
        history = []
        iterations = 0
        for iterations in range(1, max_iterations + 1):
            dist = _mahalanobis_sq(points, mu, cov)
            keep = np.argpartition(dist, h - 1)[:h]
            mu, cov = _mean_cov(points[keep])
            cov = _regularize(cov)
            det = float(np.linalg.det(cov))
            history.append(det)
            if det <= 0:
                break
            if prev_det < np.inf and (prev_det - det) < stopping_epsilon * prev_det:
                break
            prev_det = det
        det = history[-1]
        histories.append(tuple(history))
        if det <= 0:
            continue
        if best is None or det < best[0]:
            best = (det, mu, cov, iterations)
    if best is None:
        raise DegenerateModelError("all starts collapsed to a singular covariance")
    det, mu, cov, iterations = best
    cov_inv = np.linalg.inv(cov)
    return McdModel(mu, cov, cov_inv, det, h / n, iterations, tuple(histories))


def score_mahalanobis(model: McdModel, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.shape[1] != model.mu.shape[0]:
        raise ValueError(
            f"dimension mismatch: model is {model.mu.shape[0]}-D, point is {pts.shape[1]}-D"
        )
    scores = np.sqrt(np.maximum(_mahalanobis_sq(pts, model.mu, model.cov), 0.0))
    return float(scores[0]) if single else scores


@dataclass(frozen=True)
class RulePredicate:
    """Threshold rule on one metric index or on the metric L2-norm."""

    target: int | str  # metric index, or "l2norm"
    op: str  # ">", ">=", "<", "<="
    threshold: float

    _OPS = {
        ">": np.greater,
        ">=": np.greater_equal,
        "<": np.less,
        "<=": np.less_equal,
    }

    @staticmethod
    def parse(text: str) -> "RulePredicate":
        """Parse e.g. "metric[0] > 100" or "l2norm > 5"."""
        parts = text.split()
        if len(parts) != 3 or parts[1] not in RulePredicate._OPS:
            raise ValueError(f"cannot parse rule {text!r}")
        lhs, op, rhs = parts
        if lhs == "l2norm":
            target: int | str = "l2norm"
        elif lhs.startswith("metric[") and lhs.endswith("]"):
            target = int(lhs[len("metric[") : -1])
        else:
            raise ValueError(f"cannot parse rule target {lhs!r}")
        return RulePredicate(target, op, float(rhs))


def rule_classifier(rule: RulePredicate, metrics: np.ndarray) -> list[Label]:
    """Label points by a fixed predicate; the score is the tested quantity."""
    metrics = np.atleast_2d(np.asarray(metrics, dtype=np.float64))
    if rule.target == "l2norm":
        values = np.linalg.norm(metrics, axis=1)
    else:
        if not (0 <= rule.target < metrics.shape[1]):
            raise ValueError(
                f"rule references metric[{rule.target}] but points have "
                f"{metrics.shape[1]} metric(s)"
            )
        values = metrics[:, rule.target]
    hits = RulePredicate._OPS[rule.op](values, rule.threshold)
    return [Label(bool(h), float(v)) for h, v in zip(hits, values)]


def hybrid_or(labels: list[Label]) -> Label:
    """Logical OR over classifier outputs; keeps the maximum score."""
    if not labels:
        raise ValueError("hybrid_or needs at least one label")
    return Label(any(l.is_outlier for l in labels), max(l.score for l in labels))


def classify(score: float, cutoff: float) -> Label:
    """Outlier iff strictly above the cutoff."""
    return Label(score > cutoff, score)


@dataclass
class ThresholdState:
    """Percentile cutoff maintained from a damped reservoir of scores.

    refresh() recomputes the cutoff at the (1 - outlier_percentile)
    nearest-rank quantile.  Between refreshes, drift_check() watches the
    observed outlier fraction; if it leaves the 99% binomial band around
    the target, an immediate refresh is warranted.
    """

    reservoir: AdaptableDampedReservoir
    outlier_percentile: float
    cutoff: float = math.inf
    warned_empty: bool = False
    _seen: int = field(default=0, repr=False)
    _outliers: int = field(default=0, repr=False)

    def refresh(self) -> float:
        if len(self.reservoir) == 0:
            self.warned_empty = True
            return self.cutoff
        self.cutoff = self.reservoir.quantile(1.0 - self.outlier_percentile)
        self._seen = 0
        self._outliers = 0
        return self.cutoff

    def record_labels(self, n_outliers: int, n_total: int) -> None:
        self._outliers += n_outliers
        self._seen += n_total

    def drift_check(self, z: float = 2.576) -> bool:
        """True when the observed outlier fraction has left the binomial
        99% interval around the target percentile."""
        if self._seen < 100:
            return False
        p = self.outlier_percentile
        band = z * math.sqrt(p * (1.0 - p) / self._seen)
        return abs(self._outliers / self._seen - p) > band
