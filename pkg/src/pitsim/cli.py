"""Command line entry points: headless runs, sweeps, replay verification, serving."""

from __future__ import annotations

import argparse
import csv
import importlib.resources
import json
import math
import os
import sys

from . import engine, recording, report
from .engine import Command, CommandKind
from .errors import ConfigurationError, ReplayMismatchError, ScenarioError
from .scenario import PRESET_NAMES, ScenarioConfig, load_scenario_file, preset

_TRIGGER_KINDS = {
    "moshpit": CommandKind.TRIGGER_MOSHPIT,
    "circlepit": CommandKind.TRIGGER_CIRCLEPIT,
    "stop": CommandKind.STOP_BEHAVIOR,
}


def parse_trigger(spec: str, dt: float) -> tuple[int, Command]:
    """Parse 'kind@seconds,behavior', e.g. moshpit@5,aoe0."""
    try:
        kind_part, rest = spec.split("@", 1)
        time_part, behavior = rest.split(",", 1)
        at = float(time_part)
    except ValueError:
        raise ConfigurationError(f"bad trigger {spec!r}; expected kind@seconds,behavior") from None
    if kind_part not in _TRIGGER_KINDS:
        raise ConfigurationError(f"unknown trigger kind {kind_part!r}; expected one of {sorted(_TRIGGER_KINDS)}")
    if at < 0:
        raise ConfigurationError(f"trigger time must be non-negative, got {at}")
    step = max(1, round(at / dt))
    return step, Command(_TRIGGER_KINDS[kind_part], behavior_id=behavior.strip())


def _load_config(args) -> ScenarioConfig:
    if args.scenario and args.preset:
        raise ConfigurationError("--scenario and --preset are mutually exclusive")
    if args.scenario:
        config = load_scenario_file(args.scenario)
    elif args.preset:
        config = preset(args.preset)
    else:
        raise ConfigurationError("one of --scenario or --preset is required")
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    return config


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="path to a scenario JSON file")
    p.add_argument("--preset", choices=PRESET_NAMES, help="built-in scene")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")


def cmd_run(args) -> int:
    config = _load_config(args)
    timeline = [parse_trigger(t, config.params.dt) for t in args.trigger]
    sink = None
    fh = None
    if args.record:
        fh = open(args.record, "w", encoding="utf-8")
        total = engine.steps_for_duration(args.duration, config.params.dt)
        fh.write(recording.meta_line(config, total) + "\n")

        def sink(step, line, applied):
            for cmd in applied:
                fh.write(recording.command_line(step, cmd) + "\n")
            fh.write(line + "\n")

    try:
        result = engine.run(
            config,
            timeline=timeline,
            duration=args.duration,
            frame_sink=sink,
            checked=args.check,
        )
    finally:
        if fh is not None:
            fh.close()

    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as out:
            out.write(result.report.to_json() + "\n")
    if args.figures:
        os.makedirs(args.figures, exist_ok=True)
        report.save_scene(os.path.join(args.figures, "scene_final.png"), config, result.state)
        report.save_metrics_timeline(os.path.join(args.figures, "metrics_timeline.png"), result.history)
    print(json.dumps(result.report.to_obj(), indent=2))
    return 0


def _load_grid(spec: str) -> list[dict]:
    if spec == "table2":
        data = importlib.resources.files("pitsim.data").joinpath("table2_grid.json").read_text("utf-8")
    else:
        with open(spec, "r", encoding="utf-8") as fh:
            data = fh.read()
    grid = json.loads(data)
    if not isinstance(grid, list) or not all(isinstance(row, dict) for row in grid):
        raise ConfigurationError("grid must be a JSON list of parameter objects")
    return grid


def cmd_sweep(args) -> int:
    config = _load_config(args)
    grid = _load_grid(args.grid)
    seeds = list(range(args.seeds))
    rows = engine.sweep(
        grid,
        seeds,
        config,
        trigger_kind=args.behavior,
        trigger_time=args.trigger_time,
        duration=args.duration,
    )
    fieldnames = list(rows[0].keys())
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    if args.figures:
        os.makedirs(args.figures, exist_ok=True)
        report.save_sweep_summary(os.path.join(args.figures, "sweep_realized.png"), rows)
    failures = sum(1 for r in rows if r["error"])
    print(f"{len(rows)} rows written to {args.out}" + (f" ({failures} failed)" if failures else ""))
    return 0


def cmd_replay(args) -> int:
    log = recording.read_log(args.log)
    if args.verify:
        try:
            recording.verify(log)
        except ReplayMismatchError as exc:
            print(f"verification FAILED: {exc}", file=sys.stderr)
            print(f"expected: {exc.expected[:200]}", file=sys.stderr)
            print(f"actual:   {exc.actual[:200]}", file=sys.stderr)
            return 2
        print(f"verified: {len(log.frame_lines)} frames reproduced exactly")
        return 0
    result = recording.replay(log)
    print(json.dumps(result.report.to_obj(), indent=2))
    return 0


def cmd_serve(args) -> int:
    from .service import serve_session  # imported lazily: pulls in asyncio/websockets

    config = _load_config(args)
    serve_session(
        config,
        host=args.host,
        port=args.port,
        broadcast_every=args.broadcast_every,
        record_path=args.record,
        duration=args.duration,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pitsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario headless")
    _add_scenario_args(p_run)
    p_run.add_argument("--duration", type=float, default=60.0, help="simulated seconds")
    p_run.add_argument(
        "--trigger",
        action="append",
        default=[],
        metavar="KIND@T,AOE",
        help="schedule a behavior command, e.g. moshpit@5,aoe0 (repeatable)",
    )
    p_run.add_argument("--record", help="write a replayable session log here")
    p_run.add_argument("--metrics", help="write the metrics report (JSON) here")
    p_run.add_argument("--figures", help="directory for rendered figures")
    p_run.add_argument("--check", action="store_true", help="run per-step invariant checks")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter grid across seeds")
    _add_scenario_args(p_sweep)
    p_sweep.add_argument("--grid", required=True, help="grid JSON path, or 'table2' for the built-in grid")
    p_sweep.add_argument("--seeds", type=int, required=True, help="number of seeds (0..N-1)")
    p_sweep.add_argument("--out", required=True, help="output CSV path")
    p_sweep.add_argument("--behavior", choices=("moshpit", "circlepit"), default="moshpit")
    p_sweep.add_argument("--trigger-time", type=float, default=2.0)
    p_sweep.add_argument("--duration", type=float, default=15.0)
    p_sweep.add_argument("--figures", help="directory for rendered figures")
    p_sweep.set_defaults(func=cmd_sweep)

    p_replay = sub.add_parser("replay", help="re-run a recorded session log")
    p_replay.add_argument("--log", required=True, help="session log path")
    p_replay.add_argument("--verify", action="store_true", help="compare against the recorded stream")
    p_replay.set_defaults(func=cmd_replay)

    p_serve = sub.add_parser("serve", help="run live with a command/stream websocket")
    _add_scenario_args(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--broadcast-every", type=int, default=1, help="send every Nth frame")
    p_serve.add_argument("--record", help="write a replayable session log here")
    p_serve.add_argument("--duration", type=float, default=None, help="stop after this many simulated seconds")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
