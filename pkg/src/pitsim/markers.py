"""Marker field: dart-thrown space samples plus per-step ownership queries.

Markers are fixed points of walkable space. Each simulation step every marker
belongs to at most one agent (the closest one within that agent's capture
radius); agents then move only through markers they own, which is what makes
the model collision-free.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .geometry import Point, Polygon, Rect, clip_polygon_rect, point_in_convex, polygon_area

# Dart throwing gives up after this many consecutive rejected darts, which
# bounds generation time when the domain is nearly saturated.
MAX_CONSECUTIVE_REJECTIONS = 500


@dataclass(slots=True)
class Marker:
    id: int
    position: Point
    owner: int | None = None


@dataclass
class MarkerField:
    """Immutable marker set with a uniform-grid index for range queries."""

    markers: list[Marker]
    cell_size: float
    bounds: Rect
    _grid: dict[tuple[int, int], list[int]] = field(default_factory=dict, repr=False)
    _xy: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self._xy is None:
            self._xy = np.array([m.position for m in self.markers], dtype=np.float64)
            if self._xy.size == 0:
                self._xy = self._xy.reshape(0, 2)
        if not self._grid:
            for m in self.markers:
                self._grid.setdefault(self._cell(m.position), []).append(m.id)

    def __len__(self) -> int:
        return len(self.markers)

    @property
    def positions(self) -> np.ndarray:
        return self._xy

    def _cell(self, p: Point) -> tuple[int, int]:
        return (int(math.floor(p[0] / self.cell_size)), int(math.floor(p[1] / self.cell_size)))

    def cells_overlapping(self, p: Point, radius: float):
        cx0 = int(math.floor((p[0] - radius) / self.cell_size))
        cx1 = int(math.floor((p[0] + radius) / self.cell_size))
        cy0 = int(math.floor((p[1] - radius) / self.cell_size))
        cy1 = int(math.floor((p[1] + radius) / self.cell_size))
        for cx in range(cx0, cx1 + 1):
            for cy in range(cy0, cy1 + 1):
                ids = self._grid.get((cx, cy))
                if ids:
                    yield from ids

    def clear_owners(self) -> None:
        for m in self.markers:
            m.owner = None


def walkable_area(bounds: Rect, obstacles: tuple[Polygon, ...]) -> float:
    """Bounds area minus obstacle area (obstacles clipped to bounds).

    Obstacles are assumed pairwise disjoint; overlaps would be double-counted.
    """
    area = bounds.area
    for poly in obstacles:
        area -= polygon_area(clip_polygon_rect(poly, bounds))
    return max(area, 0.0)


def generate_markers(
    bounds: Rect,
    density: float,
    marker_radius: float,
    obstacles: tuple[Polygon, ...] = (),
    seed: int = 0,
    cell_size: float | None = None,
) -> MarkerField:
    """Dart-throw markers until the density target is met or darts stop landing.

    The target count is floor(density x walkable area). Every accepted marker
    keeps at least marker_radius distance to all others and is never placed in
    an obstacle interior. Identical inputs produce an identical field.
    """
    if density <= 0.0:
        raise ConfigurationError(f"marker density must be positive, got {density}")
    if marker_radius <= 0.0:
        raise ConfigurationError(f"marker radius must be positive, got {marker_radius}")

    if cell_size is None:
        cell_size = max(2.0 * marker_radius, 0.5)

    target = int(math.floor(density * walkable_area(bounds, obstacles)))
    rng = random.Random(seed)
    r_sq = marker_radius * marker_radius

    # Acceptance grid sized to the min-distance constraint: any conflicting
    # marker lives within one cell ring.
    gen_cell = marker_radius
    grid: dict[tuple[int, int], list[Point]] = {}
    accepted: list[Point] = []
    rejections = 0
    while len(accepted) < target and rejections < MAX_CONSECUTIVE_REJECTIONS:
        p = bounds.sample(rng)
        if any(point_in_convex(poly, p) for poly in obstacles):
            rejections += 1
            continue
        cx = int(math.floor(p[0] / gen_cell))
        cy = int(math.floor(p[1] / gen_cell))
        ok = True
        for nx in range(cx - 1, cx + 2):
            for ny in range(cy - 1, cy + 2):
                for q in grid.get((nx, ny), ()):
                    dx = p[0] - q[0]
                    dy = p[1] - q[1]
                    if dx * dx + dy * dy < r_sq:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if not ok:
            rejections += 1
            continue
        grid.setdefault((cx, cy), []).append(p)
        accepted.append(p)
        rejections = 0

    markers = [Marker(id=i, position=p) for i, p in enumerate(accepted)]
    return MarkerField(markers=markers, cell_size=cell_size, bounds=bounds)


def assign_ownership(field: MarkerField, agents) -> dict[int, int]:
    """Map each marker to the closest agent within that agent's capture radius.

    Exact distance ties go to the lowest agent id; the result does not depend
    on the order of the agent list. Markers out of everyone's reach are absent
    from the map.
    """
    if not agents or not field.markers:
        return {}
    ordered = sorted(agents, key=lambda a: a.id)
    ax = np.array([a.position for a in ordered], dtype=np.float64)
    radii = np.array([a.agent_radius for a in ordered], dtype=np.float64)
    ids = np.array([a.id for a in ordered], dtype=np.int64)

    mx = field.positions  # (M, 2)
    dx = mx[:, 0:1] - ax[None, :, 0]
    dy = mx[:, 1:2] - ax[None, :, 1]
    d_sq = dx * dx + dy * dy  # (M, A)
    d_sq[d_sq > radii[None, :] * radii[None, :]] = np.inf

    nearest = np.argmin(d_sq, axis=1)  # first (= lowest id) among equal minima
    reached = np.isfinite(d_sq[np.arange(len(field.markers)), nearest])
    owners: dict[int, int] = {}
    for mid in np.nonzero(reached)[0]:
        owners[int(mid)] = int(ids[nearest[mid]])
    return owners


def markers_near(field: MarkerField, point: Point, radius: float) -> list[Marker]:
    """Markers within radius of point (inclusive), ascending id."""
    if radius < 0.0:
        raise ConfigurationError(f"query radius must be non-negative, got {radius}")
    r_sq = radius * radius
    hits = []
    for mid in field.cells_overlapping(point, radius):
        m = field.markers[mid]
        dx = m.position[0] - point[0]
        dy = m.position[1] - point[1]
        if dx * dx + dy * dy <= r_sq:
            hits.append(mid)
    hits.sort()
    return [field.markers[mid] for mid in hits]
