"""Command line entry points: headless runs, cohort batches, log analytics,
and the interactive session server.

Exit codes: 0 success, 1 argument or log-format problem, 2 scenario problem
(missing or malformed blueprint).  Summaries are printed as `key=value`
structured lines so scripts can assert on them.
"""

from __future__ import annotations

import argparse
import importlib.resources
import logging
import os
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path

from .engine import Backend, SimConfig, run_to_completion
from .errors import ScenarioError
from .experiment import (
    CSV_HEADER,
    GroupLabel,
    aggregate_means,
    default_cohort_config,
    export_records,
    import_records,
    record_row,
    run_cohort,
)
from .scenario import GridMap, parse_blueprint

log = logging.getLogger("evacsim.cli")


def _configure_logging() -> None:
    level_name = os.environ.get("EVACSIM_LOG", "").upper()
    if level_name:
        logging.basicConfig(level=getattr(logging, level_name, logging.INFO))


class CliParser(argparse.ArgumentParser):
    """argparse exits 2 on bad arguments; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def load_map(name: str) -> GridMap:
    """Read and parse a blueprint; bare names fall back to bundled maps."""
    path = Path(name)
    if not path.exists() and os.sep not in name:
        ref = importlib.resources.files("evacsim.data").joinpath(name)
        if ref.is_file():
            log.info("using bundled map %s", name)
            return parse_blueprint(ref.read_text(encoding="utf-8"))
    return parse_blueprint(path.read_text(encoding="utf-8"))


def _apply_config_flags(config: SimConfig, args) -> SimConfig:
    """Overlay the flat --npcs/--backend/--dt/--max-time overrides."""
    updates = {}
    if args.npcs is not None:
        updates["npc_count"] = args.npcs
    if args.backend is not None:
        updates["backend"] = Backend(args.backend)
    if args.dt is not None:
        updates["dt"] = args.dt
    if args.max_time is not None:
        updates["max_sim_time"] = args.max_time
    return replace(config, **updates) if updates else config


def _events_dir(out: str) -> Path:
    return Path(out).with_suffix(".events")


def _mean_egress(times) -> str:
    return f"{sum(times) / len(times):.2f}" if times else ""


def cmd_run(args) -> int:
    gmap = load_map(args.scenario)
    config = replace(_apply_config_flags(SimConfig(), args), seed=args.seed)
    config.validate()
    record = run_to_completion(gmap, config)
    times = list(record.npc_egress_times or ())
    escaped = record.npc_escaped
    total = record.npc_total
    if record.player_egress_time is not None:
        times.append(record.player_egress_time)
        escaped += 1
    print(CSV_HEADER)
    print(record_row(record))
    print(
        f"summary session_id={record.session_id}"
        f" outcome={record.outcome.value}"
        f" escaped={escaped} total={total}"
        f" mean_egress_s={_mean_egress(times)}"
        f" events={len(record.events)}"
    )
    if args.out:
        n = export_records([record], args.out, events_dir=_events_dir(args.out))
        log.info("wrote %d bytes to %s", n, args.out)
    return 0


def cmd_cohort(args) -> int:
    gmap = load_map(args.scenario)
    config = _apply_config_flags(default_cohort_config(), args)
    config.validate()
    group = GroupLabel(args.group)
    records = run_cohort(gmap, config, group, args.runs, args.seed)
    print(CSV_HEADER)
    for r in records:
        print(record_row(r))
    times = [r.player_egress_time for r in records if r.player_egress_time is not None]
    print(
        f"summary group={group.value} runs={len(records)}"
        f" escaped={len(times)} mean_egress_s={_mean_egress(times)}"
    )
    if args.out:
        export_records(records, args.out, events_dir=_events_dir(args.out))
    return 0


def cmd_analyze(args) -> int:
    records = import_records(args.log)
    # Rows without a group or an egress time (aborted or timed-out sessions)
    # cannot contribute to a mean; they are skipped, not an error.
    eligible = [
        r for r in records
        if r.group is not None and r.player_egress_time is not None
    ]
    means = aggregate_means(eligible)
    counts = Counter(r.group for r in eligible)
    print("group n mean_egress_s")
    for group, mean in means.items():
        print(f"{group.value} {counts[group]} {mean:.1f}")
    print(f"summary records={len(records)} used={len(eligible)} groups={len(means)}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn  # the serve extra; only needed for this subcommand

    from .server import create_app

    gmap = load_map(args.scenario)
    config = replace(_apply_config_flags(SimConfig(), args), seed=args.seed)
    config.validate()
    app = create_app(gmap, config, log_path=args.out)
    log.info("serving on port %d", args.port)
    uvicorn.run(app, host="127.0.0.1", port=args.port)
    return 0


def _add_config_flags(parser, with_seed=True) -> None:
    if with_seed:
        parser.add_argument("--seed", type=int, default=0, help="simulation seed")
    parser.add_argument("--npcs", type=int, default=None, help="crowd size")
    parser.add_argument(
        "--backend", choices=["ca", "force"], default=None, help="movement backend"
    )
    parser.add_argument("--dt", type=float, default=None, help="tick length, seconds")
    parser.add_argument(
        "--max-time", type=float, default=None, dest="max_time",
        help="simulated-time cap, seconds",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(
        prog="evacsim",
        description="Grid-based fire-evacuation drills: headless runs, "
        "cohort batches, log analytics, and a live session server.",
    )
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="{run,cohort,analyze,serve}")

    run_p = sub.add_parser("run", help="run one headless simulation")
    run_p.add_argument("scenario", help="blueprint file; bare names resolve to bundled maps")
    _add_config_flags(run_p)
    run_p.add_argument("--out", default=None,
                       help="write the session record CSV here (events JSON alongside)")
    run_p.set_defaults(func=cmd_run)

    co_p = sub.add_parser("cohort", help="run a batch with a synthetic group player")
    co_p.add_argument("scenario", help="blueprint file; bare names resolve to bundled maps")
    co_p.add_argument("--group", required=True,
                      choices=[g.value for g in GroupLabel], help="participant group")
    co_p.add_argument("--runs", type=int, default=30, help="number of sessions")
    co_p.add_argument("--seed", type=int, default=0,
                      help="first seed; sessions use seed..seed+runs-1")
    _add_config_flags(co_p, with_seed=False)
    co_p.add_argument("--out", default=None,
                      help="write the session records CSV here (events JSON alongside)")
    co_p.set_defaults(func=cmd_cohort)

    an_p = sub.add_parser("analyze", help="per-group egress-time means from a log")
    an_p.add_argument("log", help="session records CSV")
    an_p.set_defaults(func=cmd_analyze)

    sv_p = sub.add_parser("serve", help="host interactive sessions over websockets")
    sv_p.add_argument("scenario", help="blueprint file; bare names resolve to bundled maps")
    sv_p.add_argument("--port", type=int, default=8000, help="listen port")
    _add_config_flags(sv_p)
    sv_p.add_argument("--out", default="sessions.csv",
                      help="append finalized session records here")
    sv_p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
