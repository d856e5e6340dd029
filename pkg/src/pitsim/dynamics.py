"""Per-agent motion: goal-weighted marker sums, goal programs, repulsion mode.

An agent's step is a convex combination of offsets to the markers it owns,
weighted by how well each marker points at the current goal. Repulsion flips
the weights (1 - w), which drives the agent away from its goal instead.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from .geometry import Point, Polygon, Rect, dist, normalize, point_in_convex, polygon_bbox, segment_first_hit
from .markers import MarkerField

# Nudge factor keeping truncated displacements strictly outside obstacle edges.
_EDGE_BACKOFF = 1e-9


class Mode(enum.Enum):
    ATTRACT = "attract"
    REPEL = "repel"


class Tag(enum.Enum):
    NONE = "none"
    OPENER = "opener"
    PARTICIPANT = "participant"


@dataclass
class GoalProgram:
    """Ordered goals with per-goal waits and a proximity advance rule."""

    goals: tuple[Point, ...]
    waits: tuple[float, ...]
    distance_threshold: float
    cursor: int = 0
    wait_remaining: float = 0.0
    looping: bool = False

    def __post_init__(self) -> None:
        if not self.goals:
            raise ValueError("goal program needs at least one goal")
        if len(self.waits) != len(self.goals):
            raise ValueError("waits must match goals one-to-one")
        if not 0 <= self.cursor < len(self.goals):
            raise ValueError(f"cursor {self.cursor} out of range")

    @property
    def current_goal(self) -> Point:
        return self.goals[self.cursor]

    def copy(self) -> "GoalProgram":
        return replace(self)


@dataclass
class Agent:
    id: int
    position: Point
    agent_radius: float
    max_speed: float
    program: GoalProgram
    mode: Mode = Mode.ATTRACT
    tag: Tag = Tag.NONE
    saved_program: GoalProgram | None = None
    spawn_area: int = 0

    def __post_init__(self) -> None:
        if self.agent_radius <= 0.0 or self.max_speed <= 0.0:
            raise ValueError("agent radius and max speed must be positive")


@dataclass(frozen=True)
class MotionResult:
    velocity: Point
    captured_count: int


def raw_weight(goal_dir: Point, marker_offset: Point, mode: Mode) -> float:
    """Angular marker weight in [0, 1]: (1 + cos t)/2 toward the goal.

    REPEL returns the complement. A zero-length offset has no angle and gets
    the neutral 0.5 in both modes.
    """
    n = math.hypot(marker_offset[0], marker_offset[1])
    if n <= 0.0:
        return 0.5
    cos_t = (goal_dir[0] * marker_offset[0] + goal_dir[1] * marker_offset[1]) / n
    cos_t = max(-1.0, min(1.0, cos_t))
    w = (1.0 + cos_t) / 2.0
    return w if mode is Mode.ATTRACT else 1.0 - w


def motion_vector(agent: Agent, owned_positions: list[Point], dt: float) -> MotionResult:
    """Velocity along the weighted mean of owned-marker offsets, at max speed.

    No owned markers means no claimed space, so the agent is locked in place.
    The agent moves a full speed step along the weighted sum whenever it is
    nonzero; it never decelerates onto the weighted centroid. A soft landing
    (step length min(|sum|, speed cap)) makes the centroid an absorbing fixed
    point: whole crowds crystallize within seconds, and an agent whose only
    owned marker sits underfoot can never move again, which starves the pit
    behaviors. Constant speed keeps claimed space churning the way the crowd
    scenes require, at the cost of a centimeter-scale hover around goals.
    """
    n = len(owned_positions)
    if n == 0:
        return MotionResult(velocity=(0.0, 0.0), captured_count=0)

    px, py = agent.position
    gx, gy = agent.program.current_goal
    goal_dir = normalize((gx - px, gy - py))

    weights = []
    total = 0.0
    for mx, my in owned_positions:
        if goal_dir is None:
            w = 0.5  # at the goal exactly: every direction is neutral
        else:
            w = raw_weight(goal_dir, (mx - px, my - py), agent.mode)
        weights.append(w)
        total += w

    if total <= 1e-12:
        return MotionResult(velocity=(0.0, 0.0), captured_count=n)

    mx_acc = 0.0
    my_acc = 0.0
    for w, (mx, my) in zip(weights, owned_positions):
        mx_acc += (w / total) * (mx - px)
        my_acc += (w / total) * (my - py)

    length = math.hypot(mx_acc, my_acc)
    if length <= 0.0:
        return MotionResult(velocity=(0.0, 0.0), captured_count=n)
    scale = agent.max_speed / length
    return MotionResult(velocity=(mx_acc * scale, my_acc * scale), captured_count=n)


def advance_goal_program(agent: Agent, dt: float) -> GoalProgram:
    """Count down the wait while within the goal threshold, then move the cursor.

    The cursor wraps on looping programs and clamps at the last goal otherwise.
    Leaving the threshold mid-wait re-arms the full wait for the next visit.
    """
    prog = agent.program
    if dist(agent.position, prog.current_goal) > prog.distance_threshold:
        prog.wait_remaining = 0.0
        return prog

    remaining = prog.wait_remaining if prog.wait_remaining > 0.0 else prog.waits[prog.cursor]
    remaining -= dt
    if remaining > 0.0:
        prog.wait_remaining = remaining
        return prog

    prog.wait_remaining = 0.0
    if prog.looping:
        prog.cursor = (prog.cursor + 1) % len(prog.goals)
    elif prog.cursor < len(prog.goals) - 1:
        prog.cursor += 1
    return prog


def _truncate_at_obstacles(
    start: Point, end: Point, obstacles: tuple[Polygon, ...], bboxes: tuple[Rect, ...] | None = None
) -> Point:
    """Cut the displacement at the first obstacle edge it crosses."""
    best: float | None = None
    for i, poly in enumerate(obstacles):
        if bboxes is not None:
            bb = bboxes[i]
            lo_x, hi_x = min(start[0], end[0]), max(start[0], end[0])
            lo_y, hi_y = min(start[1], end[1]), max(start[1], end[1])
            if hi_x < bb.xmin or lo_x > bb.xmax or hi_y < bb.ymin or lo_y > bb.ymax:
                continue
        t = segment_first_hit(start, end, poly)
        if t is not None and (best is None or t < best):
            best = t
    if best is None and not any(point_in_convex(poly, end) for poly in obstacles):
        return end
    t = max(0.0, (best if best is not None else 0.0) - _EDGE_BACKOFF)
    return (start[0] + (end[0] - start[0]) * t, start[1] + (end[1] - start[1]) * t)


def step_agent(
    agent: Agent,
    field: MarkerField,
    ownership: dict[int, int],
    dt: float,
    obstacles: tuple[Polygon, ...] = (),
    owned_positions: list[Point] | None = None,
    obstacle_bboxes: tuple[Rect, ...] | None = None,
) -> Agent:
    """Integrate one step: move along the motion vector, then advance the goals.

    owned_positions may be passed precomputed (the engine inverts the ownership
    map once per step); otherwise it is derived from the map here.
    """
    if owned_positions is None:
        owned_positions = [
            field.markers[mid].position for mid in sorted(ownership) if ownership[mid] == agent.id
        ]
    result = motion_vector(agent, owned_positions, dt)
    vx, vy = result.velocity
    if vx != 0.0 or vy != 0.0:
        target = (agent.position[0] + vx * dt, agent.position[1] + vy * dt)
        if obstacles:
            if obstacle_bboxes is None:
                obstacle_bboxes = tuple(polygon_bbox(p) for p in obstacles)
            target = _truncate_at_obstacles(agent.position, target, obstacles, obstacle_bboxes)
        agent.position = field.bounds.clamp(target)
    advance_goal_program(agent, dt)
    return agent
