"""Replayable session logs: newline-delimited JSON records.

A log file starts with one meta record (the full scenario plus the step
count), followed by command records interleaved before the frames they apply
to, and one frame record per step. Feeding the meta and commands back through
the engine regenerates the frame records byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .engine import Command, CommandKind, RunResult, run
from .errors import ReplayMismatchError, ScenarioError
from .scenario import ScenarioConfig, load_scenario_obj, scenario_to_obj

FORMAT_VERSION = 1


def meta_line(config: ScenarioConfig, total_steps: int) -> str:
    return json.dumps(
        {"type": "meta", "version": FORMAT_VERSION, "steps": total_steps, "scenario": scenario_to_obj(config)},
        separators=(",", ":"),
    )


def command_line(step: int, cmd: Command) -> str:
    obj: dict = {"type": "command", "step": step, "kind": cmd.kind.value}
    if cmd.behavior_id is not None:
        obj["behavior"] = cmd.behavior_id
    if cmd.factor is not None:
        obj["factor"] = cmd.factor
    return json.dumps(obj, separators=(",", ":"))


def parse_command(obj: dict) -> tuple[int, Command]:
    return obj["step"], Command(
        kind=CommandKind(obj["kind"]),
        behavior_id=obj.get("behavior"),
        factor=obj.get("factor"),
    )


@dataclass
class SessionLog:
    config: ScenarioConfig
    total_steps: int
    commands: list[tuple[int, Command]]
    frame_lines: list[str]


def write_log(path: str, config: ScenarioConfig, result: RunResult) -> None:
    if result.frames is None:
        raise ValueError("run was executed without frame collection; nothing to record")
    by_step: dict[int, list[Command]] = {}
    for at_step, cmd in result.applied_commands:
        by_step.setdefault(at_step, []).append(cmd)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(meta_line(config, len(result.frames)) + "\n")
        for i, frame in enumerate(result.frames, start=1):
            for cmd in by_step.get(i, []):
                fh.write(command_line(i, cmd) + "\n")
            fh.write(frame + "\n")


def read_log(path: str) -> SessionLog:
    config: ScenarioConfig | None = None
    total_steps = 0
    commands: list[tuple[int, Command]] = []
    frames: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"invalid JSON in log: {exc.msg}", f"line {lineno}") from None
            kind = obj.get("type")
            if kind == "meta":
                if obj.get("version") != FORMAT_VERSION:
                    raise ScenarioError(f"unsupported log version {obj.get('version')}", f"line {lineno}")
                config = load_scenario_obj(obj["scenario"])
                total_steps = obj["steps"]
            elif kind == "command":
                commands.append(parse_command(obj))
            elif kind == "frame":
                frames.append(line)
            else:
                raise ScenarioError(f"unknown record type {kind!r}", f"line {lineno}")
    if config is None:
        raise ScenarioError("log has no meta record")
    return SessionLog(config=config, total_steps=total_steps, commands=commands, frame_lines=frames)


def replay(log: SessionLog) -> RunResult:
    return run(log.config, timeline=log.commands, steps=log.total_steps, collect_frames=True)


def verify(log: SessionLog) -> RunResult:
    """Re-run the log and compare frames; raises ReplayMismatchError on divergence."""
    result = replay(log)
    regenerated = result.frames or []
    if len(regenerated) != len(log.frame_lines):
        raise ReplayMismatchError(
            line_number=0,
            step=min(len(regenerated), len(log.frame_lines)) + 1,
            expected=f"{len(log.frame_lines)} frames",
            actual=f"{len(regenerated)} frames",
        )
    for i, (want, got) in enumerate(zip(log.frame_lines, regenerated), start=1):
        if want != got:
            raise ReplayMismatchError(line_number=i, step=i, expected=want, actual=got)
    return result
