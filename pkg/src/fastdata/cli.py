"""Command-line entry points: run a query, run a bundled experiment, or
serve the REST console backend.

Exit codes: 0 success, 2 configuration error, 3 data error.  Every flag
can also be supplied through a FASTDATA_-prefixed environment variable
(e.g. FASTDATA_CONFIG, FASTDATA_SEED).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .core import Mode, QuerySpecError, validate_query_spec
from .engine import run_oneshot, run_streaming
from .experiments import EXPERIMENTS
from .ingest import SourceConfigError
from .report import serialize_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _env_default(name: str, fallback=None):
    return os.environ.get(f"FASTDATA_{name.upper().replace('-', '_')}", fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fastdata",
        description="streaming classify-and-explain analytics engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one query from a JSON config")
    run.add_argument("--config", default=_env_default("config"), help="query config JSON path")
    run.add_argument("--seed", type=int, default=_env_default("seed"), help="override randomSeed")
    run.add_argument("--mode", choices=[m.value for m in Mode], default=_env_default("mode"))
    run.add_argument("--out", default=_env_default("out", "report.json"), help="report output path")
    run.add_argument("--emit-every-points", type=int, default=None)
    run.add_argument("--emit-every-seconds", type=float, default=None)
    run.add_argument(
        "--emissions-log", default=None,
        help="append every streaming emission to this NDJSON file",
    )

    exp = sub.add_parser("experiment", help="run a bundled experiment")
    exp.add_argument("name", help=f"one of {sorted(EXPERIMENTS)}")
    exp.add_argument("--out", default=_env_default("out"), help="CSV output path")
    exp.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                     help="override an experiment keyword argument")

    serve = sub.add_parser("serve", help="start the REST service")
    serve.add_argument("--serve-addr", default=_env_default("serve_addr", "127.0.0.1:8080"))
    serve.add_argument("--data-dir", default=_env_default("data_dir", "."))
    return parser


def cmd_run(args) -> int:
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with open(args.config) as f:
            doc = json.load(f)
    except FileNotFoundError:
        print(f"error: config not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        doc["randomSeed"] = int(args.seed)
    if args.mode is not None:
        doc["mode"] = args.mode
    try:
        spec = validate_query_spec(doc)
    except QuerySpecError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if spec.mode is Mode.STREAMING:
            reports = run_streaming(
                spec,
                emit_every_points=args.emit_every_points,
                emit_every_seconds=args.emit_every_seconds,
            )
            if args.emissions_log:
                with open(args.emissions_log, "a") as f:
                    for r in reports:
                        f.write(serialize_report(r, indent=None) + "\n")
            report = reports[-1]
        else:
            report = run_oneshot(spec)
    except SourceConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    with open(args.out, "w") as f:
        f.write(serialize_report(report) + "\n")
    print(
        f"{report.query_id}: {report.points_processed} points, "
        f"{report.outlier_count} outliers, {len(report.explanations)} explanation(s) "
        f"-> {args.out}"
    )
    return EXIT_OK


def _parse_params(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        key, _, raw = pair.partition("=")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def cmd_experiment(args) -> int:
    fn = EXPERIMENTS.get(args.name)
    if fn is None:
        print(f"error: unknown experiment {args.name!r}; known: {sorted(EXPERIMENTS)}",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows, summary = fn(**_parse_params(args.param))
    except TypeError as exc:
        print(f"error: bad experiment parameter: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_path = args.out or f"{args.name}.csv"
    with open(out_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(f"{args.name}: {summary}")
    print(f"wrote {len(rows)} row(s) -> {out_path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.serve_addr.partition(":")
    app = create_app(data_dir=args.data_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "experiment":
        return cmd_experiment(args)
    return cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
