"""Command line entry points: serve, simulate, replay, report.

Exit codes: 0 success, 1 domain error (corrupt file, failed verification,
port in use), 2 usage error (bad flags, malformed config, unknown profile).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .assessment import (
    Condition,
    GeqComponent,
    NoData,
    Report,
    aggregate,
    load_responses_csv,
    render_report,
    report_dict,
)
from .config import GameConfig
from .patient import load_profile
from .session import (
    InsufficientData,
    compute_metrics,
    load_session,
    metrics_csv,
    render_metrics,
    replay_session,
)
from .sim import run_session

USAGE_ERROR = 2
DOMAIN_ERROR = 1


def _load_config(path: str | None) -> GameConfig:
    if path is None:
        return GameConfig()
    try:
        with open(path, encoding="utf-8") as fp:
            return GameConfig.load(fp)
    except OSError as exc:
        raise SystemExit(f"config: cannot read {path}: {exc.strerror}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        print(f"config: invalid value in {path}: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR) from exc


def _data_dir(explicit: str | None) -> str:
    return explicit or os.environ.get("FISHTANK_DATA_DIR", ".")


def cmd_serve(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    host, _, port = args.bind.rpartition(":")
    if not host or not port.isdigit():
        print(f"serve: --bind must be HOST:PORT, got {args.bind!r}", file=sys.stderr)
        return USAGE_ERROR
    data_dir = _data_dir(args.data_dir)
    os.makedirs(data_dir, exist_ok=True)
    from .server import serve

    try:
        serve(cfg, host, int(port), data_dir)
    except OSError as exc:
        print(f"serve: cannot bind {args.bind}: {exc}", file=sys.stderr)
        return DOMAIN_ERROR
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    try:
        model = load_profile(args.patient)
    except KeyError as exc:
        print(f"simulate: {exc.args[0]}", file=sys.stderr)
        return USAGE_ERROR
    if args.duration < 0:
        print("simulate: --duration must be nonnegative", file=sys.stderr)
        return USAGE_ERROR
    cfg = replace(cfg, behavior=replace(cfg.behavior, rng_seed=args.seed))
    session_id = f"sim-{model.name}-{args.seed}"
    out_path = args.out or os.path.join(_data_dir(None), f"{session_id}.jsonl")
    with open(out_path, "w", encoding="utf-8") as fp:
        run_session(cfg, model, duration=args.duration, session_id=session_id, out=fp)
    with open(out_path, encoding="utf-8") as fp:
        record = load_session(fp)
    print(f"session {session_id} written to {out_path}")
    try:
        print(render_metrics(compute_metrics(record)), end="")
    except InsufficientData as exc:
        print(f"metrics unavailable: {exc}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        with open(args.session, encoding="utf-8") as fp:
            record = load_session(fp)
    except OSError as exc:
        print(f"replay: cannot read {args.session}: {exc.strerror}", file=sys.stderr)
        return DOMAIN_ERROR
    if not record.ok or record.truncated:
        print(
            f"replay: {args.session} is corrupt; recovered "
            f"{len(record.events)} events, {len(record.raw)} samples",
            file=sys.stderr,
        )
        return DOMAIN_ERROR
    result = replay_session(record)
    if args.verify:
        if result.ok:
            print(f"verified: {len(result.recorded)} events reproduced exactly")
            return 0
        if result.first_divergence is not None:
            print(
                f"verification failed: first divergence at event "
                f"{result.first_divergence} (tick {result.divergence_tick})",
                file=sys.stderr,
            )
        else:
            print(
                f"verification failed: hand trace diverges at tick "
                f"{result.trace_divergence_tick}",
                file=sys.stderr,
            )
        return DOMAIN_ERROR
    print(
        f"replayed {result.ok and 'cleanly' or 'with divergence'}: "
        f"{len(result.regenerated)} events regenerated, {len(result.recorded)} recorded"
    )
    return 0 if result.ok else DOMAIN_ERROR


def cmd_report_session(args: argparse.Namespace) -> int:
    try:
        with open(args.session, encoding="utf-8") as fp:
            record = load_session(fp)
    except OSError as exc:
        print(f"report: cannot read {args.session}: {exc.strerror}", file=sys.stderr)
        return DOMAIN_ERROR
    if not record.ok:
        print(f"report: {args.session} is corrupt beyond the header", file=sys.stderr)
        return DOMAIN_ERROR
    if record.truncated:
        print(
            f"report: note: {args.session} was truncated; using "
            f"{len(record.events)} recovered events",
            file=sys.stderr,
        )
    try:
        metrics = compute_metrics(record)
    except InsufficientData as exc:
        print(f"report: {exc}", file=sys.stderr)
        return DOMAIN_ERROR
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fp:
            fp.write(metrics_csv(metrics))
    if args.json:
        print(json.dumps(metrics.to_dict(), sort_keys=True, indent=2))
    else:
        print(render_metrics(metrics), end="")
    return 0


def cmd_report_geq(args: argparse.Namespace) -> int:
    responses = []
    for path in args.files:
        try:
            with open(path, encoding="utf-8", newline="") as fp:
                responses.extend(load_responses_csv(fp))
        except OSError as exc:
            print(f"report: cannot read {path}: {exc.strerror}", file=sys.stderr)
            return DOMAIN_ERROR
        except (ValueError, KeyError) as exc:
            print(f"report: bad response row in {path}: {exc}", file=sys.stderr)
            return DOMAIN_ERROR
    stats = []
    for condition in Condition:
        if not any(r.condition is condition for r in responses):
            continue
        for component in GeqComponent:
            try:
                stats.append(aggregate(responses, component, condition))
            except NoData:
                continue
    if not stats:
        print("report: no scorable responses", file=sys.stderr)
        return DOMAIN_ERROR
    report = Report(stats=stats)
    if args.json:
        print(json.dumps(report_dict(report), sort_keys=True, indent=2, ensure_ascii=False))
    else:
        print(render_report(report), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fishtank",
        description="Rehabilitation fish-tank game: server, simulator, replay, reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the WebSocket session server")
    p.add_argument("--config", default=None)
    p.add_argument("--bind", default="127.0.0.1:8765")
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="run a headless session with a simulated patient")
    p.add_argument("--config", default=None)
    p.add_argument("--patient", default="mid", help="profile name or JSON path")
    p.add_argument("--duration", type=float, default=120.0, help="seconds of simulated time")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="session file path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="re-execute a recorded session")
    p.add_argument("--session", required=True)
    p.add_argument(
        "--verify", action="store_true", help="diff regenerated events and hand trace vs record"
    )
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("report", help="produce metrics or questionnaire reports")
    rsub = p.add_subparsers(dest="report_kind", required=True)
    rp = rsub.add_parser("session", help="metrics summary for a session file")
    rp.add_argument("session")
    rp.add_argument("--json", action="store_true")
    rp.add_argument("--csv", default=None, help="also write CSV rows to this path")
    rp.set_defaults(func=cmd_report_session)
    rp = rsub.add_parser("geq", help="score questionnaire response files")
    rp.add_argument("files", nargs="+")
    rp.add_argument("--json", action="store_true")
    rp.set_defaults(func=cmd_report_geq)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def entry() -> None:
    sys.exit(main())
