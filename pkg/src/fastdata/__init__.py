"""fastdata: streaming classify-and-explain analytics.

Pipelines ingest high-volume point streams, label outliers with robust
density estimates behind a percentile cutoff, and aggregate the labeled
stream into ranked attribute-combination explanations scored by relative
risk ratio — in a single pass or over exponentially damped windows.
"""

from .core import (
    AttributeDictionary,
    ExplanationRecord,
    Label,
    Mode,
    Point,
    PointBatch,
    QuerySpec,
    QuerySpecError,
    encode_attribute,
    typecheck_pipeline,
    validate_query_spec,
)
from .classify import (
    MadModel,
    McdModel,
    classify,
    hybrid_or,
    score_mad,
    score_mahalanobis,
    score_zscore,
    train_fastmcd,
    train_mad,
)
from .engine import MdpStreamingPipeline, QueryReport, run_oneshot, run_streaming
from .explain import (
    brute_force_explain,
    confidence_interval,
    explain_batch,
    fpgrowth,
    rank_explanations,
    risk_ratio,
)
from .sketches import (
    AdaptableDampedReservoir,
    AmortizedMaintenanceCounter,
    SpaceSaving,
)
from .streamexplain import StreamingSummarizer

__version__ = "0.1.0"

__all__ = [
    "AdaptableDampedReservoir",
    "AmortizedMaintenanceCounter",
    "AttributeDictionary",
    "ExplanationRecord",
    "Label",
    "MadModel",
    "McdModel",
    "MdpStreamingPipeline",
    "Mode",
    "Point",
    "PointBatch",
    "QueryReport",
    "QuerySpec",
    "QuerySpecError",
    "SpaceSaving",
    "StreamingSummarizer",
    "brute_force_explain",
    "classify",
    "confidence_interval",
    "encode_attribute",
    "explain_batch",
    "fpgrowth",
    "hybrid_or",
    "rank_explanations",
    "risk_ratio",
    "run_oneshot",
    "run_streaming",
    "score_mad",
    "score_mahalanobis",
    "score_zscore",
    "train_fastmcd",
    "train_mad",
    "typecheck_pipeline",
    "validate_query_spec",
]
