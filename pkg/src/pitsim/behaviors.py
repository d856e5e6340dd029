"""Moshpit and circlepit lifecycles over one area of effect.

Both behaviors share the opening phase: every agent inside the area is
repelled from the center goal until the space is clear, then a seeded draw
from the innermost openers picks the participants. Moshpit participants
oscillate against the center inside a reflect-threshold hysteresis band;
circlepit participants loop a ring of goals. The queue scenes need none of
this machinery.
"""

from __future__ import annotations

import enum
import math
import random
from collections import deque
from dataclasses import dataclass, field

from .dynamics import Agent, GoalProgram, Mode, Tag
from .errors import BehaviorBusyError
from .geometry import Point, dist
from .scenario import AreaOfEffect


class Kind(enum.Enum):
    MOSHPIT = "moshpit"
    CIRCLEPIT = "circlepit"


class Phase(enum.Enum):
    IDLE = "idle"
    OPENING = "opening"
    ACTIVE = "active"
    ENDING = "ending"


@dataclass
class PitBehaviorState:
    """Lifecycle state for one behavior instance bound to one area of effect."""

    behavior_id: str
    aoe: AreaOfEffect
    center_goal_pos: Point
    ring_goal_pos: tuple[Point, ...]
    goal_distance_threshold: float
    kind: Kind | None = None
    phase: Phase = Phase.IDLE
    phase_elapsed: float = 0.0
    openers: set[int] = field(default_factory=set)
    participants: set[int] = field(default_factory=set)
    participant_modes: dict[int, Mode] = field(default_factory=dict)
    # Participant ids that moved, per step, over the trailing one-second window
    # (the engine appends; realized_participants reads).
    moved_window: deque = field(default_factory=deque)
    last_realized: int = 0

    def tagged(self) -> set[int]:
        return self.openers | self.participants


def _center_program(state: PitBehaviorState) -> GoalProgram:
    return GoalProgram(
        goals=(state.center_goal_pos,),
        waits=(0.0,),
        distance_threshold=state.goal_distance_threshold,
    )


def _ring_program(state: PitBehaviorState, agent_pos: Point) -> GoalProgram:
    start = min(
        range(len(state.ring_goal_pos)),
        key=lambda i: (dist(agent_pos, state.ring_goal_pos[i]), i),
    )
    return GoalProgram(
        goals=state.ring_goal_pos,
        waits=tuple(0.0 for _ in state.ring_goal_pos),
        distance_threshold=state.goal_distance_threshold,
        cursor=start,
        looping=True,
    )


def trigger(state: PitBehaviorState, kind: Kind, agents: list[Agent], sim_time: float) -> None:
    """Start the opening phase: repel everyone inside the area from its center."""
    if state.phase is not Phase.IDLE:
        raise BehaviorBusyError(f"behavior {state.behavior_id} is {state.phase.value}, not idle")
    if kind is Kind.CIRCLEPIT and not state.ring_goal_pos:
        raise BehaviorBusyError(f"behavior {state.behavior_id} has no ring goals for a circlepit")
    state.kind = kind
    state.phase = Phase.OPENING
    state.phase_elapsed = 0.0
    state.openers = set()
    state.participants = set()
    state.participant_modes = {}
    state.moved_window.clear()
    state.last_realized = 0
    for agent in agents:
        if dist(agent.position, state.aoe.center) <= state.aoe.radius:
            state.openers.add(agent.id)
            agent.saved_program = agent.program
            agent.program = _center_program(state)
            agent.mode = Mode.REPEL
            agent.tag = Tag.OPENER


def _select_participants(state: PitBehaviorState, agents_by_id: dict[int, Agent], rng: random.Random) -> None:
    pool = sorted(
        (aid for aid in state.openers if aid in agents_by_id),
        key=lambda aid: (dist(agents_by_id[aid].position, state.aoe.center), aid),
    )[: 2 * state.aoe.number_agents_pit]
    count = min(state.aoe.number_agents_pit, len(pool))
    chosen = sorted(rng.sample(pool, count)) if count else []
    state.participants = set(chosen)
    for aid in chosen:
        agent = agents_by_id[aid]
        agent.tag = Tag.PARTICIPANT
        if state.kind is Kind.MOSHPIT:
            agent.program = _center_program(state)
            agent.mode = Mode.ATTRACT
            state.participant_modes[aid] = Mode.ATTRACT
        else:
            agent.program = _ring_program(state, agent.position)
            agent.mode = Mode.ATTRACT


def _restore_all(state: PitBehaviorState, agents_by_id: dict[int, Agent]) -> None:
    for aid in state.tagged():
        agent = agents_by_id.get(aid)
        if agent is None:
            continue
        if agent.saved_program is not None:
            agent.program = agent.saved_program
        agent.saved_program = None
        agent.mode = Mode.ATTRACT
        agent.tag = Tag.NONE
    state.openers = set()
    state.participants = set()
    state.participant_modes = {}
    state.moved_window.clear()
    state.phase = Phase.IDLE
    state.phase_elapsed = 0.0


def step_behavior(state: PitBehaviorState, agents_by_id: dict[int, Agent], dt: float, rng: random.Random) -> None:
    """Advance the lifecycle one step; mutates tagged agents' goal overrides."""
    if state.phase is Phase.IDLE:
        return

    if state.phase is Phase.OPENING:
        if state.phase_elapsed >= state.aoe.time_to_start:
            _select_participants(state, agents_by_id, rng)
            state.phase = Phase.ACTIVE
            state.phase_elapsed = 0.0
            if not state.participants:
                state.phase = Phase.ENDING  # nobody to run the pit; wind down
        else:
            state.phase_elapsed += dt
        return

    if state.phase is Phase.ACTIVE:
        state.phase_elapsed += dt
        if state.kind is Kind.MOSHPIT:
            for aid in sorted(state.participants):
                agent = agents_by_id.get(aid)
                if agent is None:
                    continue
                d = dist(agent.position, state.aoe.center)
                # Hysteresis: flip only at the band edges, hold in between.
                if d <= state.aoe.reflect_min:
                    agent.mode = Mode.REPEL
                elif d >= state.aoe.reflect_max:
                    agent.mode = Mode.ATTRACT
                state.participant_modes[aid] = agent.mode
        return

    if state.phase is Phase.ENDING:
        _restore_all(state, agents_by_id)


def stop(state: PitBehaviorState) -> None:
    """Request wind-down; restoration happens on the next behavior step."""
    if state.phase in (Phase.OPENING, Phase.ACTIVE):
        state.phase = Phase.ENDING
        state.phase_elapsed = 0.0


def record_movement(state: PitBehaviorState, moved_ids: set[int], window_steps: int) -> None:
    """Engine hook: remember which participants moved this step."""
    if state.moved_window.maxlen != window_steps:
        state.moved_window = deque(state.moved_window, maxlen=window_steps)
    state.moved_window.append(frozenset(moved_ids & state.participants))
    if state.phase is Phase.ACTIVE:
        state.last_realized = realized_participants(state)


def realized_participants(state: PitBehaviorState) -> int:
    """Participants that actually moved within the trailing one-second window."""
    moved: set[int] = set()
    for step_set in state.moved_window:
        moved |= step_set
    return len(moved & state.participants)
