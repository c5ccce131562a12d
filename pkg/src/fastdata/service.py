"""REST service backing the interactive console.

Each submitted query runs on its own thread; request handlers only touch
immutable report snapshots and a small control mailbox (emit / cancel),
never pipeline internals.  Streaming queries retain their most recent
emissions (bounded), and file sources resolve strictly inside the
configured data directory.
"""

from __future__ import annotations

import csv
import itertools
import queue
import threading
from collections import deque
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .core import Mode, QuerySpec, QuerySpecError, validate_query_spec
from .engine import MdpStreamingPipeline, run_oneshot
from .ingest import SourceConfigError, open_source
from .report import report_to_dict

MAX_RETAINED_EMISSIONS = 16


class QueryHandle:
    def __init__(self, query_id: str, spec: QuerySpec):
        self.query_id = query_id
        self.spec = spec
        self.state = "running"
        self.error: str | None = None
        self.points_processed = 0
        self.reports: deque[dict] = deque(maxlen=MAX_RETAINED_EMISSIONS)
        self.mailbox: queue.Queue[str] = queue.Queue()
        self.lock = threading.Lock()
        self.thread: threading.Thread | None = None

    def snapshot(self) -> dict:
        with self.lock:
            return {
                "state": self.state,
                "progress": self.points_processed,
                **({"detail": self.error} if self.error else {}),
            }

    def latest_report(self) -> dict | None:
        with self.lock:
            return self.reports[-1] if self.reports else None


def _run_oneshot_worker(handle: QueryHandle) -> None:
    try:
        report = run_oneshot(handle.spec)
        with handle.lock:
            handle.reports.append(report_to_dict(report))
            handle.points_processed = report.points_processed
            handle.state = "done"
    except Exception as exc:  # surfaced through the status endpoint
        with handle.lock:
            handle.state = "failed"
            handle.error = str(exc)


def _run_streaming_worker(handle: QueryHandle) -> None:
    try:
        pipeline = MdpStreamingPipeline(handle.spec)
        batches, _stats = open_source(handle.spec, pipeline.dictionary)
        cancelled = False
        for batch in batches:
            pipeline.process_batch(batch)
            with handle.lock:
                handle.points_processed = pipeline.points_processed
            while True:
                try:
                    message = handle.mailbox.get_nowait()
                except queue.Empty:
                    break
                if message == "emit":
                    report = report_to_dict(pipeline.emit())
                    with handle.lock:
                        handle.reports.append(report)
                elif message == "cancel":
                    cancelled = True
            if cancelled:
                break
        with handle.lock:
            if cancelled:
                handle.state = "failed"
                handle.error = "cancelled"
            else:
                handle.reports.append(report_to_dict(pipeline.emit()))
                handle.state = "done"
    except Exception as exc:
        with handle.lock:
            handle.state = "failed"
            handle.error = str(exc)


def _resolve_source(spec: QuerySpec, data_dir: Path) -> QuerySpec:
    """Map dataset ids onto files under data_dir; reject escapes."""
    source = dict(spec.source)
    kind = source.get("kind")
    if kind in ("csv", "jsonl"):
        dataset = source.pop("dataset", None)
        if dataset is not None:
            source["path"] = str(data_dir / f"{dataset}.{'csv' if kind == 'csv' else 'jsonl'}")
        path = Path(source.get("path", "")).resolve()
        if not path.is_relative_to(data_dir.resolve()):
            raise SourceConfigError(f"source path {path} is outside the data directory")
        source["path"] = str(path)
    spec.source = source
    return spec


def _dataset_schema(path: Path) -> dict:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            return {"columns": []}
        probe_rows = list(itertools.islice(reader, 50))
    columns = []
    for j, name in enumerate(header):
        numeric = True
        for row in probe_rows:
            if j >= len(row):
                continue
            try:
                float(row[j])
            except ValueError:
                numeric = False
                break
        columns.append({"name": name, "type": "numeric" if numeric else "categorical"})
    return {"columns": columns}


def create_app(data_dir: str = ".") -> FastAPI:
    app = FastAPI(title="fastdata", version="0.1.0")
    base = Path(data_dir)
    registry: dict[str, QueryHandle] = {}
    counter = itertools.count(1)
    registry_lock = threading.Lock()

    def error(status: int, message: str, detail=None) -> JSONResponse:
        return JSONResponse({"error": message, "detail": detail}, status_code=status)

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/queries")
    def submit(doc: dict):
        try:
            spec = validate_query_spec(doc)
            spec = _resolve_source(spec, base)
        except QuerySpecError as exc:
            return error(400, "invalid query spec", exc.errors)
        except SourceConfigError as exc:
            return error(400, "invalid source", str(exc))
        with registry_lock:
            query_id = f"q{next(counter)}"
        handle = QueryHandle(query_id, spec)
        worker = (
            _run_streaming_worker if spec.mode is Mode.STREAMING else _run_oneshot_worker
        )
        handle.thread = threading.Thread(target=worker, args=(handle,), daemon=True)
        registry[query_id] = handle
        handle.thread.start()
        return {"queryId": query_id}

    def _handle_or_none(query_id: str) -> QueryHandle | None:
        return registry.get(query_id)

    @app.get("/api/queries/{query_id}")
    def status(query_id: str):
        handle = _handle_or_none(query_id)
        if handle is None:
            return error(404, "unknown query", query_id)
        return handle.snapshot()

    @app.get("/api/queries/{query_id}/report")
    def report(query_id: str):
        handle = _handle_or_none(query_id)
        if handle is None:
            return error(404, "unknown query", query_id)
        latest = handle.latest_report()
        if latest is None:
            snap = handle.snapshot()
            return error(409, "no report yet", snap)
        return latest

    @app.post("/api/queries/{query_id}/emit")
    def emit(query_id: str):
        handle = _handle_or_none(query_id)
        if handle is None:
            return error(404, "unknown query", query_id)
        if handle.spec.mode is not Mode.STREAMING:
            return error(409, "emit applies to streaming queries", handle.snapshot())
        with handle.lock:
            running = handle.state == "running"
        if not running:
            return {"accepted": False, "state": handle.snapshot()["state"]}
        handle.mailbox.put("emit")
        return {"accepted": True}

    @app.delete("/api/queries/{query_id}")
    def cancel(query_id: str):
        handle = _handle_or_none(query_id)
        if handle is None:
            return error(404, "unknown query", query_id)
        handle.mailbox.put("cancel")
        return {"accepted": True}

    @app.get("/api/datasets/{dataset_id}/schema")
    def schema(dataset_id: str):
        path = (base / f"{dataset_id}.csv").resolve()
        if not path.is_relative_to(base.resolve()) or not path.exists():
            return error(404, "unknown dataset", dataset_id)
        return _dataset_schema(path)

    @app.get("/api/datasets")
    def datasets():
        return {"datasets": sorted(p.stem for p in base.glob("*.csv"))}

    return app
