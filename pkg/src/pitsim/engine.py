"""Fixed-timestep simulation loop: spawning, ownership, behaviors, metrics.

Step order is fixed: (1) apply commands, (2) spawn due agents, (3) assign
marker ownership, (4) step behaviors, (5) integrate agents against the frozen
ownership map, (6) compute metrics, (7) emit the frame snapshot. Every step is
a pure function of (state, commands), which is what makes recorded sessions
replayable bit for bit.
"""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .behaviors import Kind, Phase, PitBehaviorState, record_movement, step_behavior, stop, trigger
from .dynamics import Agent, GoalProgram, Mode, Tag, step_agent
from .errors import BehaviorBusyError, ConfigurationError
from .geometry import Point, Rect, point_in_convex, polygon_bbox
from .markers import MarkerField, assign_ownership, generate_markers
from .metrics import LapTracker, QueueTracker, min_pairwise_distance, open_space_radius
from .scenario import ScenarioConfig, spawn_due

_SPAWN_ATTEMPTS = 1000


class CommandKind(enum.Enum):
    TRIGGER_MOSHPIT = "trigger_moshpit"
    TRIGGER_CIRCLEPIT = "trigger_circlepit"
    STOP_BEHAVIOR = "stop_behavior"
    PAUSE = "pause"
    RESUME = "resume"
    SET_SPEED = "set_speed"


SPEED_FACTORS = (0.25, 0.5, 1.0, 2.0, 4.0)

_BEHAVIOR_COMMANDS = {CommandKind.TRIGGER_MOSHPIT, CommandKind.TRIGGER_CIRCLEPIT, CommandKind.STOP_BEHAVIOR}


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    behavior_id: str | None = None
    factor: float | None = None
    issued_at_ms: int | None = None

    def __post_init__(self) -> None:
        if self.kind in _BEHAVIOR_COMMANDS and not self.behavior_id:
            raise ConfigurationError(f"{self.kind.value} requires a behavior id")
        if self.kind is CommandKind.SET_SPEED and self.factor not in SPEED_FACTORS:
            raise ConfigurationError(f"speed factor must be one of {SPEED_FACTORS}, got {self.factor}")


@dataclass(frozen=True)
class FrameSnapshot:
    """Immutable per-step record; the unit of streaming, recording and replay."""

    step: int
    time: float
    agents: tuple[tuple, ...]  # (id, x, y, mode, tag, goal_cursor)
    behaviors: tuple[tuple, ...]  # (behavior_id, kind, phase, participants, realized)
    metrics: tuple[tuple, ...]  # ordered (name, value) scalar pairs

    def to_obj(self) -> dict:
        return {
            "type": "frame",
            "step": self.step,
            "time": self.time,
            "agents": [
                {"id": a[0], "x": a[1], "y": a[2], "mode": a[3], "tag": a[4], "goal": a[5]}
                for a in self.agents
            ],
            "behaviors": [
                {"id": b[0], "kind": b[1], "phase": b[2], "participants": list(b[3]), "realized": b[4]}
                for b in self.behaviors
            ],
            "metrics": dict(self.metrics),
        }

    def to_line(self) -> str:
        return json.dumps(self.to_obj(), separators=(",", ":"))

    @staticmethod
    def from_obj(obj: dict) -> "FrameSnapshot":
        return FrameSnapshot(
            step=obj["step"],
            time=obj["time"],
            agents=tuple(
                (a["id"], a["x"], a["y"], a["mode"], a["tag"], a["goal"]) for a in obj["agents"]
            ),
            behaviors=tuple(
                (b["id"], b["kind"], b["phase"], tuple(b["participants"]), b["realized"])
                for b in obj["behaviors"]
            ),
            metrics=tuple(obj["metrics"].items()),
        )

    @staticmethod
    def from_line(line: str) -> "FrameSnapshot":
        return FrameSnapshot.from_obj(json.loads(line))


@dataclass
class BehaviorStats:
    active_steps: int = 0
    open_ok_steps: int = 0
    open_space_sum: float = 0.0


@dataclass
class SimState:
    config: ScenarioConfig
    field: MarkerField
    agents: list[Agent]
    behaviors: list[PitBehaviorState]
    step_index: int = 0
    spawn_clocks: list[float] = field(default_factory=list)
    next_agent_id: int = 0
    queue: QueueTracker | None = None
    lap_trackers: dict[str, LapTracker] = field(default_factory=dict)
    behavior_stats: dict[str, BehaviorStats] = field(default_factory=dict)
    min_pair_overall: float = math.inf
    _rng_spawn: random.Random | None = None
    _rng_selection: random.Random | None = None
    _obstacle_bboxes: tuple[Rect, ...] = ()
    _prev_phase: dict[str, Phase] = field(default_factory=dict)

    @property
    def sim_time(self) -> float:
        # Computed, never accumulated: no drift over long runs.
        return self.step_index * self.config.params.dt

    @property
    def dt(self) -> float:
        return self.config.params.dt

    def agents_by_id(self) -> dict[int, Agent]:
        return {a.id: a for a in self.agents}

    def behavior(self, behavior_id: str) -> PitBehaviorState | None:
        for b in self.behaviors:
            if b.behavior_id == behavior_id:
                return b
        return None


@dataclass(frozen=True)
class MetricsReport:
    realized_participants: dict[str, int]
    min_pairwise_agent_distance: float
    open_space_radius: dict[str, float]  # mean over ACTIVE steps
    open_space_ok_fraction: dict[str, float]  # fraction of ACTIVE steps >= radius/2
    queue_inversions: float | None
    queue_completed: int
    lap_counts: dict[str, dict[int, float]]
    lap_sign_consistency: dict[str, dict[int, float]]

    def to_obj(self) -> dict:
        return {
            "realized_participants": dict(self.realized_participants),
            "min_pairwise_agent_distance": self.min_pairwise_agent_distance,
            "open_space_radius": dict(self.open_space_radius),
            "open_space_ok_fraction": dict(self.open_space_ok_fraction),
            "queue_inversions": self.queue_inversions,
            "queue_completed": self.queue_completed,
            "lap_counts": {bid: {str(a): v for a, v in laps.items()} for bid, laps in self.lap_counts.items()},
            "lap_sign_consistency": {
                bid: {str(a): v for a, v in cons.items()} for bid, cons in self.lap_sign_consistency.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), indent=2)


@dataclass
class RunResult:
    state: SimState
    report: MetricsReport
    frames: list[str] | None
    applied_commands: list[tuple[int, Command]]
    history: dict[str, list]


def _spawn_position(state: SimState, region: Rect) -> Point:
    rng = state._rng_spawn
    for _ in range(_SPAWN_ATTEMPTS):
        p = region.sample(rng)
        if not any(point_in_convex(poly, p) for poly in state.config.obstacles):
            return p
    raise ConfigurationError(f"could not place an agent in spawn region {region}")


def _make_agent(state: SimState, area_index: int, position: Point) -> Agent:
    config = state.config
    area = config.spawn_areas[area_index]
    program = GoalProgram(
        goals=tuple(config.goals[name] for name in area.goal_list),
        waits=area.waits(),
        distance_threshold=config.params.goal_distance_threshold,
    )
    agent = Agent(
        id=state.next_agent_id,
        position=position,
        agent_radius=config.params.agent_radius,
        max_speed=config.params.max_speed,
        program=program,
        spawn_area=area_index,
    )
    state.next_agent_id += 1
    return agent


def _entry_line(config: ScenarioConfig) -> float | None:
    """Corridor-entry x for queue scenes: the obstacle front, else the first goal."""
    first = config.spawn_areas[0]
    if not config.obstacles and len(first.goal_list) < 2:
        return None
    if config.obstacles:
        return max(v[0] for poly in config.obstacles for v in poly)
    return config.goals[first.goal_list[0]][0]


def init(config: ScenarioConfig) -> SimState:
    """Generate markers, place initial agents, reset all behaviors to idle."""
    params = config.params
    field_ = generate_markers(
        config.bounds,
        params.marker_density,
        params.marker_radius,
        config.obstacles,
        seed=rngmod.derive(config.seed, "markers"),
        cell_size=params.agent_radius,
    )
    behaviors = [
        PitBehaviorState(
            behavior_id=f"aoe{i}",
            aoe=aoe,
            center_goal_pos=config.goals[aoe.center_goal],
            ring_goal_pos=tuple(config.goals[g] for g in aoe.ring_goals),
            goal_distance_threshold=params.goal_distance_threshold,
        )
        for i, aoe in enumerate(config.areas_of_effect)
    ]
    state = SimState(
        config=config,
        field=field_,
        agents=[],
        behaviors=behaviors,
        spawn_clocks=[0.0 for _ in config.spawn_areas],
    )
    state._rng_spawn = rngmod.substream(config.seed, "spawns")
    state._rng_selection = rngmod.substream(config.seed, "selection")
    state._obstacle_bboxes = tuple(polygon_bbox(p) for p in config.obstacles)
    entry = _entry_line(config)
    if entry is not None:
        first = config.spawn_areas[0]
        state.queue = QueueTracker(
            entry_x=entry,
            final_goal=config.goals[first.goal_list[-1]],
            threshold=params.goal_distance_threshold,
        )
    for b in behaviors:
        state.behavior_stats[b.behavior_id] = BehaviorStats()
        state._prev_phase[b.behavior_id] = b.phase

    for i, area in enumerate(config.spawn_areas):
        for _ in range(area.initial_agents):
            if len(state.agents) >= params.max_agents:
                break
            state.agents.append(_make_agent(state, i, _spawn_position(state, area.region)))
    return state


def snapshot(state: SimState) -> FrameSnapshot:
    agents = tuple(
        (a.id, a.position[0], a.position[1], a.mode.value, a.tag.value, a.program.cursor)
        for a in state.agents
    )
    behaviors = tuple(
        (
            b.behavior_id,
            b.kind.value if b.kind is not None else None,
            b.phase.value,
            tuple(sorted(b.participants)),
            b.last_realized,
        )
        for b in state.behaviors
    )
    metric_pairs: list[tuple[str, float | int]] = [("live", len(state.agents))]
    if state.agents:
        positions = np.array([a.position for a in state.agents], dtype=np.float64)
        mp = min_pairwise_distance(positions)
        metric_pairs.append(("min_pair", mp if math.isfinite(mp) else None))
        for b in state.behaviors:
            exclude = [aid for aid in b.participants]
            r = open_space_radius(positions, exclude, b.aoe.center, b.aoe.radius)
            metric_pairs.append((f"open_space_{b.behavior_id}", r))
    return FrameSnapshot(
        step=state.step_index,
        time=state.sim_time,
        agents=agents,
        behaviors=behaviors,
        metrics=tuple(metric_pairs),
    )


def _apply_commands(state: SimState, commands: list[Command]):
    applied: list[Command] = []
    rejected: list[tuple[Command, str]] = []
    for cmd in commands:
        if cmd.kind not in _BEHAVIOR_COMMANDS:
            applied.append(cmd)  # pacing commands carry no engine-side state
            continue
        b = state.behavior(cmd.behavior_id)
        if b is None:
            rejected.append((cmd, f"unknown behavior {cmd.behavior_id!r}"))
            continue
        try:
            if cmd.kind is CommandKind.TRIGGER_MOSHPIT:
                trigger(b, Kind.MOSHPIT, state.agents, state.sim_time)
            elif cmd.kind is CommandKind.TRIGGER_CIRCLEPIT:
                trigger(b, Kind.CIRCLEPIT, state.agents, state.sim_time)
            else:
                stop(b)
        except BehaviorBusyError as exc:
            rejected.append((cmd, str(exc)))
            continue
        applied.append(cmd)
    return applied, rejected


def _spawn_tick(state: SimState) -> None:
    params = state.config.params
    now = state.sim_time
    for i, area in enumerate(state.config.spawn_areas):
        due = spawn_due(area, now, state.spawn_clocks[i], len(state.agents), params.max_agents)
        if due <= 0:
            if now - state.spawn_clocks[i] >= area.cycle_length:
                state.spawn_clocks[i] = now  # cycle elapsed at capacity still re-arms
            continue
        for _ in range(due):
            state.agents.append(_make_agent(state, i, _spawn_position(state, area.region)))
        state.spawn_clocks[i] = now


def _check_invariants(state: SimState, ownership: dict[int, int], displacements: dict[int, float]) -> None:
    params = state.config.params
    if len(state.agents) > params.max_agents:
        raise AssertionError(f"step {state.step_index}: live agents {len(state.agents)} exceed max {params.max_agents}")
    by_id = state.agents_by_id()
    for mid, aid in ownership.items():
        marker = state.field.markers[mid]
        agent = by_id[aid]
        dx = marker.position[0] - agent.position[0]
        dy = marker.position[1] - agent.position[1]
        # Positions moved after assignment; allow one step of drift.
        slack = params.max_speed * params.dt + 1e-9
        if math.hypot(dx, dy) > params.agent_radius + slack:
            raise AssertionError(f"step {state.step_index}: marker {mid} owned beyond radius by agent {aid}")
    cap = params.max_speed * params.dt + 1e-9
    for aid, d in displacements.items():
        if d > cap:
            raise AssertionError(f"step {state.step_index}: agent {aid} moved {d:.6f} m > cap {cap:.6f}")
    for agent in state.agents:
        if not state.config.bounds.contains(agent.position):
            raise AssertionError(f"step {state.step_index}: agent {agent.id} left bounds")
        for poly in state.config.obstacles:
            if point_in_convex(poly, agent.position):
                raise AssertionError(f"step {state.step_index}: agent {agent.id} inside an obstacle")


def step(state: SimState, commands: list[Command] | None = None, checked: bool = False):
    """Advance one step; returns (snapshot, applied, rejected)."""
    commands = commands or []
    dt = state.dt
    state.step_index += 1

    applied, rejected = _apply_commands(state, commands)
    _spawn_tick(state)

    ownership = assign_ownership(state.field, state.agents)
    state.field.clear_owners()
    owned_positions: dict[int, list[Point]] = {}
    markers = state.field.markers
    for mid, aid in ownership.items():
        markers[mid].owner = aid
        owned_positions.setdefault(aid, []).append(markers[mid].position)

    agents_by_id = state.agents_by_id()
    for b in state.behaviors:
        step_behavior(b, agents_by_id, dt, state._rng_selection)
        if (
            state._prev_phase[b.behavior_id] is Phase.OPENING
            and b.phase is Phase.ACTIVE
            and b.kind is Kind.CIRCLEPIT
        ):
            state.lap_trackers[b.behavior_id] = LapTracker(
                center=b.aoe.center, window_steps=max(1, round(1.0 / dt))
            )
        state._prev_phase[b.behavior_id] = b.phase

    moved: set[int] = set()
    displacements: dict[int, float] = {}
    obstacles = state.config.obstacles
    bboxes = state._obstacle_bboxes
    for agent in state.agents:
        before = agent.position
        step_agent(
            agent,
            state.field,
            ownership,
            dt,
            obstacles=obstacles,
            owned_positions=owned_positions.get(agent.id, []),
            obstacle_bboxes=bboxes,
        )
        dx = agent.position[0] - before[0]
        dy = agent.position[1] - before[1]
        if dx != 0.0 or dy != 0.0:
            moved.add(agent.id)
        if checked:
            displacements[agent.id] = math.hypot(dx, dy)

    window_steps = max(1, round(1.0 / dt))
    positions = (
        np.array([a.position for a in state.agents], dtype=np.float64)
        if state.agents
        else np.zeros((0, 2))
    )
    if len(positions) >= 2:
        state.min_pair_overall = min(state.min_pair_overall, min_pairwise_distance(positions))
    for b in state.behaviors:
        record_movement(b, moved, window_steps)
        if b.phase is Phase.ACTIVE:
            stats = state.behavior_stats[b.behavior_id]
            stats.active_steps += 1
            exclude = [aid for aid in b.participants]
            r = open_space_radius(positions, exclude, b.aoe.center, b.aoe.radius)
            stats.open_space_sum += r
            if r >= 0.5 * b.aoe.radius:
                stats.open_ok_steps += 1
            tracker = state.lap_trackers.get(b.behavior_id)
            if tracker is not None and b.kind is Kind.CIRCLEPIT:
                tracker.observe({aid: agents_by_id[aid].position for aid in sorted(b.participants)})
    if state.queue is not None:
        for agent in state.agents:
            state.queue.observe(state.step_index, agent.id, agent.position)

    if checked:
        _check_invariants(state, ownership, displacements)

    return snapshot(state), applied, rejected


def report(state: SimState) -> MetricsReport:
    realized = {b.behavior_id: b.last_realized for b in state.behaviors}
    open_mean = {}
    open_frac = {}
    for bid, stats in state.behavior_stats.items():
        if stats.active_steps:
            open_mean[bid] = stats.open_space_sum / stats.active_steps
            open_frac[bid] = stats.open_ok_steps / stats.active_steps
    laps = {}
    cons = {}
    for bid, tracker in state.lap_trackers.items():
        ids = sorted(tracker.total_angle)
        laps[bid] = {aid: tracker.laps(aid) for aid in ids}
        cons[bid] = {aid: tracker.sign_consistency(aid) for aid in ids}
    return MetricsReport(
        realized_participants=realized,
        min_pairwise_agent_distance=state.min_pair_overall,
        open_space_radius=open_mean,
        open_space_ok_fraction=open_frac,
        queue_inversions=state.queue.inversions() if state.queue is not None else None,
        queue_completed=len(state.queue.completed()) if state.queue is not None else 0,
        lap_counts=laps,
        lap_sign_consistency=cons,
    )


def steps_for_duration(duration: float, dt: float) -> int:
    return int(math.ceil(duration / dt - 1e-9))


def run(
    config: ScenarioConfig,
    timeline: list[tuple[int, Command]] | None = None,
    duration: float = 60.0,
    *,
    steps: int | None = None,
    collect_frames: bool = False,
    frame_sink=None,
    checked: bool = False,
) -> RunResult:
    """Headless driver: run the scheduled timeline for a fixed duration.

    frame_sink, when given, receives (step, frame_line, applied_commands) per
    step; collect_frames keeps the lines in memory as well. An explicit steps
    count overrides duration (replay uses it to sidestep float rounding).
    """
    if steps is None and duration <= 0.0:
        raise ConfigurationError(f"duration must be positive, got {duration}")
    state = init(config)
    total = steps if steps is not None else steps_for_duration(duration, state.dt)
    by_step: dict[int, list[Command]] = {}
    for at_step, cmd in timeline or []:
        by_step.setdefault(at_step, []).append(cmd)

    frames: list[str] | None = [] if collect_frames else None
    applied_all: list[tuple[int, Command]] = []
    history: dict[str, list] = {"time": [], "live": [], "min_pair": []}
    for b in state.behaviors:
        history[f"open_space_{b.behavior_id}"] = []
        history[f"phase_{b.behavior_id}"] = []

    for k in range(1, total + 1):
        snap, applied, _rejected = step(state, by_step.get(k, []), checked=checked)
        applied_all.extend((k, cmd) for cmd in applied)
        line = snap.to_line() if (collect_frames or frame_sink is not None) else None
        if frames is not None:
            frames.append(line)
        if frame_sink is not None:
            frame_sink(k, line, applied)
        metric = dict(snap.metrics)
        history["time"].append(snap.time)
        history["live"].append(metric.get("live", 0))
        history["min_pair"].append(metric.get("min_pair"))
        for b in state.behaviors:
            history[f"open_space_{b.behavior_id}"].append(metric.get(f"open_space_{b.behavior_id}"))
            history[f"phase_{b.behavior_id}"].append(b.phase.value)

    return RunResult(
        state=state,
        report=report(state),
        frames=frames,
        applied_commands=applied_all,
        history=history,
    )


def sweep(
    grid: list[dict],
    seeds: list[int],
    base: ScenarioConfig,
    *,
    trigger_kind: str = "moshpit",
    trigger_time: float = 2.0,
    behavior_id: str = "aoe0",
    duration: float = 15.0,
) -> list[dict]:
    """Cross-product of grid rows x seeds, one result row per run.

    Failures are recorded in the row's error column and the sweep continues.
    """
    from .scenario import apply_param_overrides

    if not grid:
        raise ConfigurationError("sweep grid must not be empty")
    if not seeds:
        raise ConfigurationError("sweep needs at least one seed")
    kind = CommandKind.TRIGGER_MOSHPIT if trigger_kind == "moshpit" else CommandKind.TRIGGER_CIRCLEPIT
    rows: list[dict] = []
    for entry in grid:
        for seed in seeds:
            row = {
                "behavior": trigger_kind,
                "max_agents": entry.get("max_agents", base.params.max_agents),
                "marker_density": entry.get("marker_density", base.params.marker_density),
                "agent_radius": entry.get("agent_radius", base.params.agent_radius),
                "seed": seed,
                "realized_participants": "",
                "open_space_ok_fraction": "",
                "min_pairwise_agent_distance": "",
                "error": "",
            }
            try:
                config = apply_param_overrides(
                    base,
                    max_agents=entry.get("max_agents"),
                    marker_density=entry.get("marker_density"),
                    agent_radius=entry.get("agent_radius"),
                    seed=seed,
                )
                at_step = max(1, round(trigger_time / config.params.dt))
                result = run(
                    config,
                    timeline=[(at_step, Command(kind, behavior_id=behavior_id))],
                    duration=duration,
                )
                row["realized_participants"] = result.report.realized_participants.get(behavior_id, 0)
                row["open_space_ok_fraction"] = result.report.open_space_ok_fraction.get(behavior_id, "")
                mp = result.report.min_pairwise_agent_distance
                row["min_pairwise_agent_distance"] = mp if math.isfinite(mp) else ""
            except Exception as exc:  # per-run isolation: a bad row must not kill the sweep
                row["error"] = str(exc)
            rows.append(row)
    return rows
