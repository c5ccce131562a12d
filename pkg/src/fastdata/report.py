"""JSON report documents.

Reports round-trip losslessly: parse(serialize(report)) == report, modulo
nothing.  Infinite risk ratios (a combination absent from "other
outliers") serialize as the string "inf" because strict JSON has no
infinity literal; parsers convert it back.
"""

from __future__ import annotations

import json
import math

from .core import ExplanationRecord, Mode
from .engine import QueryReport, Timings

SCHEMA_VERSION = 1


def _num(value: float):
    return "inf" if math.isinf(value) else value


def _unnum(value) -> float:
    return math.inf if value == "inf" else float(value)


def record_to_dict(record: ExplanationRecord) -> dict:
    return {
        "attributes": {name: value for name, value in record.items},
        "outlierSupport": record.outlier_support,
        "riskRatio": _num(record.risk_ratio),
        "ao": record.ao,
        "ai": record.ai,
        "bo": record.bo,
        "bi": record.bi,
        "ci95": None if record.ci is None else [record.ci[0], record.ci[1]],
        "numTests": record.num_tests,
        "flags": list(record.flags),
    }


def record_from_dict(doc: dict) -> ExplanationRecord:
    ci = doc.get("ci95")
    return ExplanationRecord(
        items=tuple(sorted((n, v) for n, v in doc["attributes"].items())),
        ao=float(doc["ao"]),
        ai=float(doc["ai"]),
        bo=float(doc["bo"]),
        bi=float(doc["bi"]),
        outlier_support=float(doc["outlierSupport"]),
        risk_ratio=_unnum(doc["riskRatio"]),
        ci=None if ci is None else (float(ci[0]), float(ci[1])),
        num_tests=int(doc.get("numTests", 1)),
        flags=tuple(doc.get("flags", [])),
    )


def report_to_dict(report: QueryReport) -> dict:
    return {
        "schemaVersion": SCHEMA_VERSION,
        "queryId": report.query_id,
        "mode": report.mode.value,
        "pointsProcessed": report.points_processed,
        "outlierCount": report.outlier_count,
        "cutoff": _num(report.cutoff),
        "explanations": [record_to_dict(r) for r in report.explanations],
        "timings": {
            "trainMs": report.timings.train_ms,
            "scoreMs": report.timings.score_ms,
            "explainMs": report.timings.explain_ms,
        },
        "config": report.config,
        "seed": report.seed,
    }


def report_from_dict(doc: dict) -> QueryReport:
    timings = doc.get("timings", {})
    return QueryReport(
        query_id=doc["queryId"],
        mode=Mode(doc["mode"]),
        points_processed=int(doc["pointsProcessed"]),
        outlier_count=int(doc["outlierCount"]),
        cutoff=_unnum(doc["cutoff"]),
        explanations=[record_from_dict(r) for r in doc["explanations"]],
        timings=Timings(
            train_ms=float(timings.get("trainMs", 0.0)),
            score_ms=float(timings.get("scoreMs", 0.0)),
            explain_ms=float(timings.get("explainMs", 0.0)),
        ),
        config=doc["config"],
        seed=int(doc["seed"]),
    )


def serialize_report(report: QueryReport, indent: int | None = 2) -> str:
    return json.dumps(report_to_dict(report), indent=indent, allow_nan=False)


def parse_report(text: str) -> QueryReport:
    return report_from_dict(json.loads(text))
