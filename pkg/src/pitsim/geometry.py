"""2-D geometry primitives: axis-aligned rectangles and convex polygons (meters)."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

Point = tuple[float, float]
Polygon = tuple[Point, ...]


def dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def dist_sq(a: Point, b: Point) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return dx * dx + dy * dy


def norm(v: Point) -> float:
    return math.hypot(v[0], v[1])


def normalize(v: Point) -> Point | None:
    """Unit vector along v, or None for the zero vector."""
    n = math.hypot(v[0], v[1])
    if n <= 0.0:
        return None
    return (v[0] / n, v[1] / n)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle. Degenerate (zero-area) rects are allowed."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self) -> None:
        if self.xmax < self.xmin or self.ymax < self.ymin:
            raise ValueError(f"inverted rect: {self!r}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point:
        return ((self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0)

    def contains(self, p: Point) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax

    def contains_rect(self, other: "Rect") -> bool:
        return (
            self.xmin <= other.xmin
            and self.ymin <= other.ymin
            and other.xmax <= self.xmax
            and other.ymax <= self.ymax
        )

    def clamp(self, p: Point) -> Point:
        return (
            min(max(p[0], self.xmin), self.xmax),
            min(max(p[1], self.ymin), self.ymax),
        )

    def sample(self, rng: random.Random) -> Point:
        return (rng.uniform(self.xmin, self.xmax), rng.uniform(self.ymin, self.ymax))

    def as_polygon(self) -> Polygon:
        return (
            (self.xmin, self.ymin),
            (self.xmax, self.ymin),
            (self.xmax, self.ymax),
            (self.xmin, self.ymax),
        )

    def as_list(self) -> list[float]:
        return [self.xmin, self.ymin, self.xmax, self.ymax]


def polygon_area(pts: Sequence[Point]) -> float:
    """Shoelace area (absolute value), 0 for fewer than 3 vertices."""
    if len(pts) < 3:
        return 0.0
    acc = 0.0
    for i, (x0, y0) in enumerate(pts):
        x1, y1 = pts[(i + 1) % len(pts)]
        acc += x0 * y1 - x1 * y0
    return abs(acc) / 2.0


def polygon_bbox(pts: Sequence[Point]) -> Rect:
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    return Rect(min(xs), min(ys), max(xs), max(ys))


def point_in_convex(pts: Sequence[Point], p: Point) -> bool:
    """Strict interior test for a convex polygon (boundary points are outside).

    Works for either vertex winding: the point is interior iff the cross
    products against all edges share one strict sign.
    """
    if len(pts) < 3:
        return False
    sign = 0
    for i, (x0, y0) in enumerate(pts):
        x1, y1 = pts[(i + 1) % len(pts)]
        cross = (x1 - x0) * (p[1] - y0) - (y1 - y0) * (p[0] - x0)
        if cross == 0.0:
            return False
        s = 1 if cross > 0.0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return True


def clip_polygon_rect(pts: Sequence[Point], rect: Rect) -> list[Point]:
    """Sutherland-Hodgman clip of a convex polygon against a rectangle."""

    def clip_edge(poly: list[Point], inside, intersect) -> list[Point]:
        out: list[Point] = []
        for i, cur in enumerate(poly):
            prev = poly[i - 1]
            cur_in = inside(cur)
            prev_in = inside(prev)
            if cur_in:
                if not prev_in:
                    out.append(intersect(prev, cur))
                out.append(cur)
            elif prev_in:
                out.append(intersect(prev, cur))
        return out

    def x_cut(x: float):
        def f(a: Point, b: Point) -> Point:
            t = (x - a[0]) / (b[0] - a[0])
            return (x, a[1] + t * (b[1] - a[1]))

        return f

    def y_cut(y: float):
        def f(a: Point, b: Point) -> Point:
            t = (y - a[1]) / (b[1] - a[1])
            return (a[0] + t * (b[0] - a[0]), y)

        return f

    poly = list(pts)
    for inside, intersect in (
        (lambda p: p[0] >= rect.xmin, x_cut(rect.xmin)),
        (lambda p: p[0] <= rect.xmax, x_cut(rect.xmax)),
        (lambda p: p[1] >= rect.ymin, y_cut(rect.ymin)),
        (lambda p: p[1] <= rect.ymax, y_cut(rect.ymax)),
    ):
        if not poly:
            return []
        poly = clip_edge(poly, inside, intersect)
    return poly


def segment_first_hit(p: Point, q: Point, pts: Sequence[Point]) -> float | None:
    """Smallest t in [0, 1] where segment p->q crosses a polygon edge, else None."""
    dx = q[0] - p[0]
    dy = q[1] - p[1]
    best: float | None = None
    for i, (ax, ay) in enumerate(pts):
        bx, by = pts[(i + 1) % len(pts)]
        ex = bx - ax
        ey = by - ay
        denom = dx * ey - dy * ex
        if denom == 0.0:
            continue
        # p + t*d = a + s*e
        t = ((ax - p[0]) * ey - (ay - p[1]) * ex) / denom
        s = ((ax - p[0]) * dy - (ay - p[1]) * dx) / denom
        if 0.0 <= t <= 1.0 and 0.0 <= s <= 1.0:
            if best is None or t < best:
                best = t
    return best
