"""Command-line interface.

Exit codes: 0 success, 1 store/runtime error, 2 usage error (argparse).
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import time
from pathlib import Path

from ..errors import CastoretteError
from ..platform import Platform
from ..timeutil import parse_duration, parse_rfc3339
from .app import ServerThread, make_server
from .config import ServiceConfig
from .csvio import ingest_csv, write_rows_csv
from .report import render_forecast_figures


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", metavar="DIR", default="./castorette-data",
                        help="state directory (default ./castorette-data)")


def _platform(args, fsync: bool = True, workers=None, **kwargs) -> Platform:
    return Platform(data_dir=args.data, fsync=fsync, workers=workers, **kwargs)


def _parse_ts(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        return parse_rfc3339(text)


# ----------------------------------------------------------------------
# verbs

def cmd_ingest(args) -> int:
    path = Path(args.csv)
    text = path.read_text()
    platform = _platform(args)
    try:
        report = ingest_csv(
            platform, text, strict=args.strict,
            entity_type=args.entity_type, signal_type=args.signal_type)
    finally:
        platform.close()
    print(f"stored {report['stored']} points across {report['contexts']} series")
    if report["created"]:
        print(f"created: {', '.join(report['created'])}")
    for err in report["errors"]:
        print(f"  row {err['row']}: {err['message']}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    cfg = ServiceConfig.load(
        args.config,
        data_dir=args.data if args.data != "./castorette-data" else None,
        host=args.host, port=args.port, workers=args.workers,
        ui_dir=args.ui_dir,
    )
    platform = Platform(
        data_dir=cfg.data_dir or args.data, workers=cfg.workers,
        poll_every=cfg.poll_every, update_every=cfg.update_every,
        holidays=cfg.holidays(),
    )
    server = make_server(platform, cfg.host, cfg.port, ui_dir=cfg.ui_dir)
    if cfg.scheduler:
        platform.scheduler.start()
    host, port = server.server_address[:2]
    print(f"listening on http://{host}:{port} (data: {cfg.data_dir or args.data})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        platform.close()
    return 0


def cmd_model_put(args) -> int:
    doc = json.loads(Path(args.json).read_text())
    platform = _platform(args)
    try:
        model = platform.models.store_model(doc)
        print(f"stored model {model.id}: {model.name}")
    finally:
        platform.close()
    return 0


def cmd_model_list(args) -> int:
    platform = _platform(args)
    try:
        models = platform.models.list_models_for_context(
            args.entity, args.signal, include_related=args.related)
        if args.json:
            print(json.dumps(platform.models.model_hierarchy(
                args.entity, args.signal), indent=2))
            return 0
        if not models:
            print("no models")
            return 0
        for m in models:
            versions = platform.models.versions(m.id)
            active = platform.models.active_version_id(m.id)
            tag = f" active=v{active}" if active else ""
            print(f"{m.id:>4}  {m.name:<28} {m.target_ref.entity}/"
                  f"{m.target_ref.signal}  versions={len(versions)}{tag}")
    finally:
        platform.close()
    return 0


def cmd_model_show(args) -> int:
    platform = _platform(args)
    try:
        model = platform.models.get_model(args.id)
        doc = {
            "id": model.id,
            "name": model.name,
            "description": model.description,
            "target": model.target_ref.to_json(),
            "train_schedule": model.train_schedule.to_json(),
            "pipeline": model.doc.get("pipeline", {}),
            "versions": [
                {"id": v.id, "trained_at": v.trained_at, "metrics": v.metrics}
                for v in platform.models.versions(model.id)
            ],
        }
        print(json.dumps(doc, indent=2))
    finally:
        platform.close()
    return 0


def cmd_model_activate(args) -> int:
    platform = _platform(args)
    try:
        platform.models.activate_version(args.model, args.version)
        print(f"model {args.model}: active version is now {args.version}")
    finally:
        platform.close()
    return 0


def cmd_sched_run(args) -> int:
    platform = _platform(args, workers=args.workers,
                         poll_every=parse_duration(args.poll),
                         update_every=parse_duration(args.update))
    stop = {"flag": False}

    def _sigint(signum, frame):
        stop["flag"] = True
        platform.scheduler.stop()

    signal.signal(signal.SIGINT, _sigint)
    signal.signal(signal.SIGTERM, _sigint)
    print(f"scheduler running (poll {args.poll}, update {args.update})")
    platform.scheduler.start()
    try:
        while not stop["flag"]:
            time.sleep(0.5)
    finally:
        platform.close()
    return 0


def cmd_sched_once(args) -> int:
    # Queue state is in-memory, rebuilt from the registry, so every
    # one-shot invocation starts with a scan.
    platform = _platform(args)
    try:
        sched = platform.scheduler
        sched.init()
        if args.action == "poll":
            dispatched = sched.poll()
            sched.wait_idle(timeout=600)
            out = {
                "dispatched": [t.to_json() for t in dispatched],
                "jobs": platform.recent_jobs(),
            }
        else:
            out = sched.queues()
        print(json.dumps(out, indent=2))
    finally:
        platform.close()
    return 0


def cmd_forecast_show(args) -> int:
    platform = _platform(args)
    try:
        now = int(platform.clock.now())
        start = _parse_ts(args.start) if args.start else now - 7 * 86400
        end = _parse_ts(args.end) if args.end else now + 2 * 86400
        rows = platform.forecast_rows(
            args.entity, args.signal, start, end,
            model_id=args.model, version=args.version)
        if args.json:
            print(json.dumps({"rows": rows}, indent=2))
        elif args.out:
            out_path = Path(args.out)
            with out_path.open("w", newline="") as fh:
                write_rows_csv(rows, fh)
            print(f"wrote {len(rows)} rows to {out_path}")
        else:
            print(f"{'ts':>12}  {'observed':>12}  {'forecast':>12}  "
                  f"{'lower':>12}  {'upper':>12}  producer")
            for r in rows:
                cells = [
                    f"{r['ts']:>12}",
                    *(f"{r[k]:>12.3f}" if r[k] is not None else f"{'-':>12}"
                      for k in ("observed", "forecast", "lower", "upper")),
                    r["producer"] or "-",
                ]
                print("  ".join(cells))
        if args.plot is not None:
            plot_dir = args.plot or (str(Path(args.out).parent) if args.out else ".")
            stem = Path(args.out).stem if args.out else "forecast"
            paths = render_forecast_figures(
                rows, plot_dir, stem=stem,
                title=f"{args.entity}/{args.signal}")
            for p in paths:
                print(f"wrote {p}")
    finally:
        platform.close()
    return 0


# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="castorette",
        description="Contextual time-series platform: ingest, model, "
                    "schedule, forecast.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a ts,entity,signal,value CSV")
    p.add_argument("csv")
    p.add_argument("--strict", action="store_true",
                   help="reject rows for unknown contexts instead of creating them")
    p.add_argument("--entity-type", default="entity")
    p.add_argument("--signal-type", default="signal")
    _add_common(p)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--config", metavar="FILE", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--ui-dir", default=None)
    _add_common(p)
    p.set_defaults(fn=cmd_serve)

    model = sub.add_parser("model", help="model registry operations")
    msub = model.add_subparsers(dest="subcommand", required=True)
    p = msub.add_parser("put", help="store a model document")
    p.add_argument("json")
    _add_common(p)
    p.set_defaults(fn=cmd_model_put)
    p = msub.add_parser("list")
    p.add_argument("--entity", default=None)
    p.add_argument("--signal", default=None)
    p.add_argument("--related", action="store_true")
    p.add_argument("--json", action="store_true")
    _add_common(p)
    p.set_defaults(fn=cmd_model_list)
    p = msub.add_parser("show")
    p.add_argument("id", type=int)
    _add_common(p)
    p.set_defaults(fn=cmd_model_show)
    p = msub.add_parser("activate")
    p.add_argument("model", type=int)
    p.add_argument("version", type=int)
    _add_common(p)
    p.set_defaults(fn=cmd_model_activate)

    sched = sub.add_parser("sched", help="scheduler operations")
    ssub = sched.add_subparsers(dest="subcommand", required=True)
    p = ssub.add_parser("run", help="run the scheduler loop in the foreground")
    p.add_argument("--poll", default="60s")
    p.add_argument("--update", default="300s")
    p.add_argument("--workers", type=int, default=None)
    _add_common(p)
    p.set_defaults(fn=cmd_sched_run)
    for action in ("init", "poll", "update", "queues"):
        p = ssub.add_parser(action)
        _add_common(p)
        p.set_defaults(fn=cmd_sched_once, action=action)

    forecast = sub.add_parser("forecast", help="forecast reads and reports")
    fsub = forecast.add_subparsers(dest="subcommand", required=True)
    p = fsub.add_parser("show", help="observed vs forecast for a context")
    p.add_argument("entity")
    p.add_argument("signal")
    p.add_argument("--from", dest="start", default=None,
                   help="window start (RFC 3339 or epoch)")
    p.add_argument("--to", dest="end", default=None)
    p.add_argument("--model", type=int, default=None)
    p.add_argument("--version", default="latest",
                   help='version id, "latest", or "all"')
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", metavar="CSV", default=None,
                   help="write delimited output to this file")
    p.add_argument("--plot", nargs="?", const="", default=None, metavar="DIR",
                   help="render figures (next to --out unless DIR given)")
    _add_common(p)
    p.set_defaults(fn=cmd_forecast_show)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CastoretteError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
