"""Run metrics: queue orderliness, open-space radius, laps, pairwise distance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Point


def normalized_kendall_distance(entry_order: list[int], arrival_order: list[int]) -> float:
    """Fraction of agent pairs served out of entry order; 0 is a perfect queue.

    Both orders must contain the same ids. Fewer than two ids gives 0.
    """
    if set(entry_order) != set(arrival_order):
        raise ValueError("entry and arrival orders must contain the same ids")
    n = len(entry_order)
    if n < 2:
        return 0.0
    rank_by_id = {aid: i for i, aid in enumerate(entry_order)}
    seq = [rank_by_id[aid] for aid in arrival_order]
    inversions = 0
    for i in range(n):
        for j in range(i + 1, n):
            if seq[i] > seq[j]:
                inversions += 1
    return inversions / (n * (n - 1) / 2)


def min_pairwise_distance(positions: np.ndarray) -> float:
    """Smallest distance between any two agents; inf for fewer than two."""
    n = len(positions)
    if n < 2:
        return math.inf
    dx = positions[:, 0:1] - positions[None, :, 0]
    dy = positions[:, 1:2] - positions[None, :, 1]
    d_sq = dx * dx + dy * dy
    d_sq[np.diag_indices(n)] = np.inf
    return float(math.sqrt(d_sq.min()))


def open_space_radius(positions: np.ndarray, exclude_rows: list[int], center: Point, cap: float) -> float:
    """Largest circle around center free of non-excluded agents, capped.

    The cap is the measurement bound (the area-of-effect radius): an empty
    neighborhood reports the cap, not infinity.
    """
    if len(positions) == 0:
        return cap
    mask = np.ones(len(positions), dtype=bool)
    if exclude_rows:
        mask[exclude_rows] = False
    pts = positions[mask]
    if len(pts) == 0:
        return cap
    dx = pts[:, 0] - center[0]
    dy = pts[:, 1] - center[1]
    d = float(np.sqrt((dx * dx + dy * dy).min()))
    return min(d, cap)


@dataclass
class QueueTracker:
    """Per-agent entry/arrival bookkeeping for the queue scenes.

    Entry: first crossing of the corridor-entry line, moving with the scene
    flow (all queue presets flow toward -x). Arrival: first time within the
    goal distance threshold of the agent's final goal. Inversions are counted
    over completed agents only.
    """

    entry_x: float
    final_goal: Point
    threshold: float
    entry_step: dict[int, int] = field(default_factory=dict)
    arrival_step: dict[int, int] = field(default_factory=dict)

    def observe(self, step: int, agent_id: int, position: Point) -> None:
        if agent_id not in self.entry_step and position[0] <= self.entry_x:
            self.entry_step[agent_id] = step
        if agent_id in self.entry_step and agent_id not in self.arrival_step:
            dx = position[0] - self.final_goal[0]
            dy = position[1] - self.final_goal[1]
            if math.hypot(dx, dy) <= self.threshold:
                self.arrival_step[agent_id] = step

    def completed(self) -> list[int]:
        return sorted(self.arrival_step)

    def inversions(self) -> float:
        done = set(self.arrival_step)
        if len(done) < 2:
            return 0.0
        entry_order = sorted(done, key=lambda aid: (self.entry_step[aid], aid))
        arrival_order = sorted(done, key=lambda aid: (self.arrival_step[aid], aid))
        return normalized_kendall_distance(entry_order, arrival_order)


@dataclass
class LapTracker:
    """Signed angular progress of circlepit participants about the pit center."""

    center: Point
    window_steps: int
    last_angle: dict[int, float] = field(default_factory=dict)
    total_angle: dict[int, float] = field(default_factory=dict)
    window_acc: dict[int, float] = field(default_factory=dict)
    window_signs: dict[int, list[int]] = field(default_factory=dict)
    steps_in_window: int = 0
    active_steps: int = 0

    def observe(self, participant_positions: dict[int, Point]) -> None:
        self.active_steps += 1
        for aid, pos in participant_positions.items():
            ang = math.atan2(pos[1] - self.center[1], pos[0] - self.center[0])
            prev = self.last_angle.get(aid)
            if prev is not None:
                delta = ang - prev
                while delta > math.pi:
                    delta -= 2 * math.pi
                while delta < -math.pi:
                    delta += 2 * math.pi
                self.total_angle[aid] = self.total_angle.get(aid, 0.0) + delta
                self.window_acc[aid] = self.window_acc.get(aid, 0.0) + delta
            self.last_angle[aid] = ang
        self.steps_in_window += 1
        if self.steps_in_window >= self.window_steps:
            for aid, acc in self.window_acc.items():
                sign = 1 if acc > 0 else (-1 if acc < 0 else 0)
                self.window_signs.setdefault(aid, []).append(sign)
            self.window_acc = {}
            self.steps_in_window = 0

    def laps(self, agent_id: int) -> float:
        return self.total_angle.get(agent_id, 0.0) / (2 * math.pi)

    def sign_consistency(self, agent_id: int) -> float:
        """Fraction of one-second windows whose net rotation shares the majority sign."""
        signs = self.window_signs.get(agent_id, [])
        if not signs:
            return 0.0
        pos = sum(1 for s in signs if s > 0)
        neg = sum(1 for s in signs if s < 0)
        return max(pos, neg) / len(signs)
