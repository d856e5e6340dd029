"""Scenario declarations: world bounds, obstacles, goals, spawn areas, pit areas.

Scenario files are JSON object trees (UTF-8, lengths in meters, durations in
seconds). Unknown keys are rejected so typos fail loudly. The module also
ships the five preset scenes used by the experiments: three queue corridors
plus the concert floor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .errors import ScenarioError
from .geometry import Point, Polygon, Rect, point_in_convex, polygon_bbox

PRESET_NAMES = ("queue1", "queue2_wide", "queue2_narrow", "queue3_wide", "queue3_narrow", "concert")

# Corridor widths for the wide/narrow queue variants. The narrow gap fits
# roughly two bodies abreast, which is what forces the single-file tendency.
NARROW_GAP = 2.0
WIDE_GAP = 6.0

_PARAM_DEFAULTS = {
    "max_agents": 100,
    "agent_radius": 5.0,
    "marker_density": 0.5,
    "marker_radius": 0.3,
    "goal_distance_threshold": 2.0,
    "max_speed": 1.3,
    "dt": 1.0 / 30.0,
}

_AOE_DEFAULTS = {
    "radius": 5.0,
    "reflect_min": 1.0,
    "reflect_max": 4.0,
    "time_to_start": 3.0,
    "number_agents_pit": 20,
}


@dataclass(frozen=True)
class GlobalParams:
    max_agents: int = 100
    agent_radius: float = 5.0
    marker_density: float = 0.5
    marker_radius: float = 0.3
    goal_distance_threshold: float = 2.0
    max_speed: float = 1.3
    dt: float = 1.0 / 30.0


@dataclass(frozen=True)
class SpawnArea:
    region: Rect
    goal_list: tuple[str, ...]
    initial_agents: int = 0
    cycle_length: float = 5.0
    quantity_per_cycle: int = 0
    goal_waits: tuple[float, ...] = ()

    def waits(self) -> tuple[float, ...]:
        return self.goal_waits if self.goal_waits else tuple(0.0 for _ in self.goal_list)


@dataclass(frozen=True)
class AreaOfEffect:
    center: Point
    center_goal: str
    radius: float = 5.0
    ring_goals: tuple[str, ...] = ()
    number_agents_pit: int = 20
    reflect_min: float = 1.0
    reflect_max: float = 4.0
    time_to_start: float = 3.0


@dataclass(frozen=True)
class ScenarioConfig:
    bounds: Rect
    obstacles: tuple[Polygon, ...]
    goals: dict[str, Point]
    spawn_areas: tuple[SpawnArea, ...]
    areas_of_effect: tuple[AreaOfEffect, ...]
    params: GlobalParams
    seed: int = 0


def spawn_due(area: SpawnArea, sim_time: float, last_spawn_time: float, live_agents: int, max_agents: int) -> int:
    """How many agents this area creates now; capacity-capped, never negative."""
    if sim_time - last_spawn_time < area.cycle_length:
        return 0
    return max(0, min(area.quantity_per_cycle, max_agents - live_agents))


# --- loading -----------------------------------------------------------------


def _require_keys(obj: dict, allowed: set[str], required: set[str], path: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"unknown field(s) {sorted(unknown)}", path)
    missing = required - set(obj)
    if missing:
        raise ScenarioError(f"missing required field(s) {sorted(missing)}", path)


def _as_point(value, path: str) -> Point:
    if not (isinstance(value, (list, tuple)) and len(value) == 2) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ScenarioError(f"expected [x, y], got {value!r}", path)
    return (float(value[0]), float(value[1]))


def _as_rect(value, path: str) -> Rect:
    if not (isinstance(value, (list, tuple)) and len(value) == 4) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ScenarioError(f"expected [xmin, ymin, xmax, ymax], got {value!r}", path)
    try:
        return Rect(*(float(v) for v in value))
    except ValueError as exc:
        raise ScenarioError(str(exc), path) from None


def _as_number(value, path: str, *, minimum: float | None = None, strict: bool = False) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ScenarioError(f"expected a number, got {value!r}", path)
    v = float(value)
    if minimum is not None and (v <= minimum if strict else v < minimum):
        bound = "greater than" if strict else "at least"
        raise ScenarioError(f"must be {bound} {minimum}, got {v}", path)
    return v


def _as_int(value, path: str, *, minimum: int | None = None) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ScenarioError(f"expected an integer, got {value!r}", path)
    if minimum is not None and value < minimum:
        raise ScenarioError(f"must be at least {minimum}, got {value}", path)
    return value


def _load_params(obj, path: str) -> GlobalParams:
    if not isinstance(obj, dict):
        raise ScenarioError("params must be an object", path)
    _require_keys(obj, set(_PARAM_DEFAULTS), set(), path)
    merged = dict(_PARAM_DEFAULTS, **obj)
    return GlobalParams(
        max_agents=_as_int(merged["max_agents"], f"{path}.max_agents", minimum=1),
        agent_radius=_as_number(merged["agent_radius"], f"{path}.agent_radius", minimum=0, strict=True),
        marker_density=_as_number(merged["marker_density"], f"{path}.marker_density", minimum=0, strict=True),
        marker_radius=_as_number(merged["marker_radius"], f"{path}.marker_radius", minimum=0, strict=True),
        goal_distance_threshold=_as_number(
            merged["goal_distance_threshold"], f"{path}.goal_distance_threshold", minimum=0, strict=True
        ),
        max_speed=_as_number(merged["max_speed"], f"{path}.max_speed", minimum=0, strict=True),
        dt=_as_number(merged["dt"], f"{path}.dt", minimum=0, strict=True),
    )


def _load_spawn_area(obj, path: str) -> SpawnArea:
    if not isinstance(obj, dict):
        raise ScenarioError("spawn area must be an object", path)
    allowed = {"region", "goal_list", "initial_agents", "cycle_length", "quantity_per_cycle", "goal_waits"}
    _require_keys(obj, allowed, {"region", "goal_list"}, path)
    goal_list = obj["goal_list"]
    if not isinstance(goal_list, list) or not goal_list or not all(isinstance(g, str) for g in goal_list):
        raise ScenarioError("goal_list must be a non-empty list of goal names", f"{path}.goal_list")
    waits = obj.get("goal_waits", [])
    if not isinstance(waits, list) or not all(
        isinstance(w, (int, float)) and not isinstance(w, bool) and w >= 0 for w in waits
    ):
        raise ScenarioError("goal_waits must be a list of non-negative numbers", f"{path}.goal_waits")
    if waits and len(waits) != len(goal_list):
        raise ScenarioError("goal_waits must match goal_list one-to-one", f"{path}.goal_waits")
    return SpawnArea(
        region=_as_rect(obj["region"], f"{path}.region"),
        goal_list=tuple(goal_list),
        initial_agents=_as_int(obj.get("initial_agents", 0), f"{path}.initial_agents", minimum=0),
        cycle_length=_as_number(obj.get("cycle_length", 5.0), f"{path}.cycle_length", minimum=0, strict=True),
        quantity_per_cycle=_as_int(obj.get("quantity_per_cycle", 0), f"{path}.quantity_per_cycle", minimum=0),
        goal_waits=tuple(float(w) for w in waits),
    )


def _load_aoe(obj, path: str) -> AreaOfEffect:
    if not isinstance(obj, dict):
        raise ScenarioError("area of effect must be an object", path)
    allowed = {"center", "center_goal", "radius", "ring_goals", "number_agents_pit", "reflect_min", "reflect_max", "time_to_start"}
    _require_keys(obj, allowed, {"center", "center_goal"}, path)
    ring = obj.get("ring_goals", [])
    if not isinstance(ring, list) or not all(isinstance(g, str) for g in ring):
        raise ScenarioError("ring_goals must be a list of goal names", f"{path}.ring_goals")
    if not isinstance(obj["center_goal"], str):
        raise ScenarioError("center_goal must be a goal name", f"{path}.center_goal")
    merged = dict(_AOE_DEFAULTS, **{k: v for k, v in obj.items() if k in _AOE_DEFAULTS})
    return AreaOfEffect(
        center=_as_point(obj["center"], f"{path}.center"),
        center_goal=obj["center_goal"],
        radius=_as_number(merged["radius"], f"{path}.radius", minimum=0, strict=True),
        ring_goals=tuple(ring),
        number_agents_pit=_as_int(merged["number_agents_pit"], f"{path}.number_agents_pit", minimum=1),
        reflect_min=_as_number(merged["reflect_min"], f"{path}.reflect_min", minimum=0, strict=True),
        reflect_max=_as_number(merged["reflect_max"], f"{path}.reflect_max", minimum=0, strict=True),
        time_to_start=_as_number(merged["time_to_start"], f"{path}.time_to_start", minimum=0),
    )


def _validate(config: ScenarioConfig) -> ScenarioConfig:
    bounds = config.bounds
    for i, poly in enumerate(config.obstacles):
        if len(poly) < 3:
            raise ScenarioError("obstacle needs at least 3 vertices", f"obstacles[{i}]")
    for name, pos in config.goals.items():
        if not bounds.contains(pos):
            raise ScenarioError(f"goal {name!r} at {pos} is outside bounds", f"goals.{name}")
    for i, area in enumerate(config.spawn_areas):
        path = f"spawn_areas[{i}]"
        if not bounds.contains_rect(area.region):
            raise ScenarioError("spawn region extends outside bounds", f"{path}.region")
        for g in area.goal_list:
            if g not in config.goals:
                raise ScenarioError(f"goal_list references undeclared goal {g!r}", f"{path}.goal_list")
        if _region_fully_covered(area.region, config.obstacles):
            raise ScenarioError("spawn region is entirely covered by obstacles", f"{path}.region")
    for i, aoe in enumerate(config.areas_of_effect):
        path = f"areas_of_effect[{i}]"
        disk = Rect(
            aoe.center[0] - aoe.radius, aoe.center[1] - aoe.radius,
            aoe.center[0] + aoe.radius, aoe.center[1] + aoe.radius,
        )
        if not bounds.contains_rect(disk):
            raise ScenarioError("area of effect extends outside bounds", f"{path}.center")
        if not (0.0 < aoe.reflect_min < aoe.reflect_max <= aoe.radius):
            raise ScenarioError(
                f"need 0 < reflect_min < reflect_max <= radius, got "
                f"({aoe.reflect_min}, {aoe.reflect_max}, {aoe.radius})",
                path,
            )
        if aoe.center_goal not in config.goals:
            raise ScenarioError(f"center_goal references undeclared goal {aoe.center_goal!r}", f"{path}.center_goal")
        for g in aoe.ring_goals:
            if g not in config.goals:
                raise ScenarioError(f"ring_goals references undeclared goal {g!r}", f"{path}.ring_goals")
            gp = config.goals[g]
            if math.hypot(gp[0] - aoe.center[0], gp[1] - aoe.center[1]) > aoe.radius:
                raise ScenarioError(f"ring goal {g!r} lies outside the area of effect", f"{path}.ring_goals")
    return config


def _region_fully_covered(region: Rect, obstacles: tuple[Polygon, ...]) -> bool:
    if not obstacles:
        return False
    # 3x3 sample grid: the region counts as covered only if every sample
    # point falls inside some obstacle.
    for fx in (0.01, 0.5, 0.99):
        for fy in (0.01, 0.5, 0.99):
            p = (region.xmin + fx * region.width, region.ymin + fy * region.height)
            if not any(point_in_convex(poly, p) for poly in obstacles):
                return False
    return True


def load_scenario_obj(doc, path: str = "") -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object", path or "$")
    allowed = {"bounds", "obstacles", "goals", "spawn_areas", "areas_of_effect", "params", "seed"}
    _require_keys(doc, allowed, {"bounds", "goals", "spawn_areas"}, path or "$")

    obstacles = []
    for i, poly in enumerate(doc.get("obstacles", [])):
        if not isinstance(poly, list):
            raise ScenarioError("obstacle must be a list of [x, y] vertices", f"obstacles[{i}]")
        obstacles.append(tuple(_as_point(v, f"obstacles[{i}][{j}]") for j, v in enumerate(poly)))

    goals_obj = doc["goals"]
    if not isinstance(goals_obj, dict):
        raise ScenarioError("goals must map names to [x, y] points", "goals")
    goals = {name: _as_point(pos, f"goals.{name}") for name, pos in goals_obj.items()}

    areas = doc["spawn_areas"]
    if not isinstance(areas, list) or not areas:
        raise ScenarioError("spawn_areas must be a non-empty list", "spawn_areas")

    config = ScenarioConfig(
        bounds=_as_rect(doc["bounds"], "bounds"),
        obstacles=tuple(obstacles),
        goals=goals,
        spawn_areas=tuple(_load_spawn_area(a, f"spawn_areas[{i}]") for i, a in enumerate(areas)),
        areas_of_effect=tuple(
            _load_aoe(a, f"areas_of_effect[{i}]") for i, a in enumerate(doc.get("areas_of_effect", []))
        ),
        params=_load_params(doc.get("params", {}), "params"),
        seed=_as_int(doc.get("seed", 0), "seed"),
    )
    return _validate(config)


def load_scenario(document: str) -> ScenarioConfig:
    """Parse and validate a scenario document from JSON text."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from None
    return load_scenario_obj(doc)


def load_scenario_file(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return load_scenario(fh.read())


def scenario_to_obj(config: ScenarioConfig) -> dict:
    return {
        "bounds": config.bounds.as_list(),
        "obstacles": [[list(v) for v in poly] for poly in config.obstacles],
        "goals": {name: list(pos) for name, pos in config.goals.items()},
        "spawn_areas": [
            {
                "region": area.region.as_list(),
                "goal_list": list(area.goal_list),
                "initial_agents": area.initial_agents,
                "cycle_length": area.cycle_length,
                "quantity_per_cycle": area.quantity_per_cycle,
                "goal_waits": list(area.waits()),
            }
            for area in config.spawn_areas
        ],
        "areas_of_effect": [
            {
                "center": list(aoe.center),
                "center_goal": aoe.center_goal,
                "radius": aoe.radius,
                "ring_goals": list(aoe.ring_goals),
                "number_agents_pit": aoe.number_agents_pit,
                "reflect_min": aoe.reflect_min,
                "reflect_max": aoe.reflect_max,
                "time_to_start": aoe.time_to_start,
            }
            for aoe in config.areas_of_effect
        ],
        "params": {
            "max_agents": config.params.max_agents,
            "agent_radius": config.params.agent_radius,
            "marker_density": config.params.marker_density,
            "marker_radius": config.params.marker_radius,
            "goal_distance_threshold": config.params.goal_distance_threshold,
            "max_speed": config.params.max_speed,
            "dt": config.params.dt,
        },
        "seed": config.seed,
    }


def serialize(config: ScenarioConfig, indent: int | None = 2) -> str:
    return json.dumps(scenario_to_obj(config), indent=indent)


def apply_param_overrides(
    config: ScenarioConfig,
    *,
    max_agents: int | None = None,
    marker_density: float | None = None,
    agent_radius: float | None = None,
    seed: int | None = None,
) -> ScenarioConfig:
    """Derive a config variant for sweeps.

    When max_agents changes, initial spawn counts are redistributed so the
    scene still starts at capacity (experiment scenes begin fully populated).
    """
    params = config.params
    updates = {}
    if max_agents is not None:
        updates["max_agents"] = max_agents
    if marker_density is not None:
        updates["marker_density"] = marker_density
    if agent_radius is not None:
        updates["agent_radius"] = agent_radius
    if updates:
        params = replace(params, **updates)

    spawn_areas = config.spawn_areas
    if max_agents is not None and spawn_areas:
        initial_total = sum(a.initial_agents for a in spawn_areas)
        if initial_total > 0:
            per = max_agents // len(spawn_areas)
            extra = max_agents - per * len(spawn_areas)
            spawn_areas = tuple(
                replace(a, initial_agents=per + (1 if i < extra else 0)) for i, a in enumerate(spawn_areas)
            )

    return replace(
        config,
        params=params,
        spawn_areas=spawn_areas,
        seed=config.seed if seed is None else seed,
    )


# --- presets ------------------------------------------------------------------


def _rect_obstacle(xmin: float, ymin: float, xmax: float, ymax: float) -> Polygon:
    return ((xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax))


def _queue_base(goals: dict[str, Point], goal_list: list[str], obstacles: tuple[Polygon, ...],
                density: float, agent_radius: float) -> ScenarioConfig:
    config = ScenarioConfig(
        bounds=Rect(0.0, 0.0, 40.0, 16.0),
        obstacles=obstacles,
        goals=goals,
        spawn_areas=(
            SpawnArea(
                region=Rect(31.0, 3.0, 38.0, 13.0),
                goal_list=tuple(goal_list),
                initial_agents=24,
                cycle_length=4.0,
                quantity_per_cycle=2,
            ),
        ),
        areas_of_effect=(),
        params=GlobalParams(
            max_agents=48,
            agent_radius=agent_radius,
            marker_density=density,
            marker_radius=0.3,
        ),
    )
    return _validate(config)


def _queue_walls(gap: float) -> tuple[Polygon, ...]:
    half = gap / 2.0
    return (
        _rect_obstacle(6.0, 0.0, 28.0, 8.0 - half),
        _rect_obstacle(6.0, 8.0 + half, 28.0, 16.0),
    )


def _preset_queue1() -> ScenarioConfig:
    xs = [30.0 - i * (28.0 / 6.0) for i in range(7)]
    goals = {f"q{i + 1}": (x, 8.0) for i, x in enumerate(xs)}
    return _queue_base(goals, [f"q{i + 1}" for i in range(7)], (), density=0.75, agent_radius=1.0)


def _preset_queue2(gap: float) -> ScenarioConfig:
    goals = {"service": (4.0, 8.0)}
    return _queue_base(goals, ["service"], _queue_walls(gap), density=0.5, agent_radius=5.0)


def _preset_queue3(gap: float) -> ScenarioConfig:
    xs = [26.0, 20.5, 15.0, 9.5, 4.0]
    goals = {f"g{i + 1}": (x, 8.0) for i, x in enumerate(xs)}
    return _queue_base(goals, [f"g{i + 1}" for i in range(5)], _queue_walls(gap), density=0.5, agent_radius=5.0)


def _preset_concert() -> ScenarioConfig:
    center = (20.0, 20.0)
    goals: dict[str, Point] = {
        "stage_front": (20.0, 34.0),
        "pit_center": center,
    }
    ring_names = []
    for k in range(8):
        ang = math.radians(45.0 * k)  # counterclockwise ring order
        goals[f"ring_{k}"] = (center[0] + 3.5 * math.cos(ang), center[1] + 3.5 * math.sin(ang))
        ring_names.append(f"ring_{k}")

    # The audience blankets a 28x28 m block around the pit: one spawn area per
    # 4x4 m cell, each holding its agents at the cell's own standing spot so
    # the crowd is already in formation when a behavior is triggered. The
    # blanket is kept below marker density (about 0.26 agents per square meter
    # against 0.5 markers), otherwise marker starvation freezes the crowd and
    # no space can open.
    spawn_areas = []
    cells = [(i, j) for i in range(7) for j in range(7)]
    base_count, extra = divmod(200, len(cells))
    for idx, (i, j) in enumerate(cells):
        x0 = 6.0 + 4.0 * i
        y0 = 6.0 + 4.0 * j
        spot = (x0 + 2.0, y0 + 2.0)
        name = "pit_center" if spot == center else f"spot_{i}_{j}"
        if name != "pit_center":
            goals[name] = spot
        spawn_areas.append(
            SpawnArea(
                region=Rect(x0, y0, x0 + 4.0, y0 + 4.0),
                goal_list=(name,),
                initial_agents=base_count + (1 if idx < extra else 0),
                cycle_length=30.0,
                quantity_per_cycle=1,
            )
        )

    config = ScenarioConfig(
        bounds=Rect(0.0, 0.0, 40.0, 40.0),
        obstacles=(),
        goals=goals,
        spawn_areas=tuple(spawn_areas),
        areas_of_effect=(
            AreaOfEffect(
                center=center,
                center_goal="pit_center",
                radius=5.0,
                ring_goals=tuple(ring_names),
                number_agents_pit=20,
                reflect_min=1.0,
                reflect_max=4.0,
                time_to_start=3.0,
            ),
        ),
        params=GlobalParams(
            max_agents=200,
            agent_radius=5.0,
            marker_density=0.5,
            marker_radius=0.3,
        ),
    )
    return _validate(config)


def preset(name: str) -> ScenarioConfig:
    """One of the shipped scenes; see PRESET_NAMES."""
    builders = {
        "queue1": _preset_queue1,
        "queue2_wide": lambda: _preset_queue2(WIDE_GAP),
        "queue2_narrow": lambda: _preset_queue2(NARROW_GAP),
        "queue3_wide": lambda: _preset_queue3(WIDE_GAP),
        "queue3_narrow": lambda: _preset_queue3(NARROW_GAP),
        "concert": _preset_concert,
    }
    if name not in builders:
        raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return builders[name]()
