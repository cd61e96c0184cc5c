"""2D grid navigation world: walkability, room labels, shortest paths, geodesic distances.

Movement is 8-connected with orthogonal cost 1 and diagonal cost sqrt(2).
Diagonal steps are forbidden when either adjacent orthogonal cell is blocked,
so every returned path is traversable by a cell-sized agent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import MalformedMap, NotWalkable, SamplingExhausted, Unreachable

SQRT2 = math.sqrt(2.0)

# Fixed neighbor expansion order; ties in path search break by this order
# so identical queries always reproduce the same path.
NEIGHBOR_STEPS: tuple[tuple[str, int, int], ...] = (
    ("E", 1, 0),
    ("NE", 1, -1),
    ("N", 0, -1),
    ("NW", -1, -1),
    ("W", -1, 0),
    ("SW", -1, 1),
    ("S", 0, 1),
    ("SE", 1, 1),
)

DIRECTIONS: dict[str, tuple[int, int]] = {name: (dx, dy) for name, dx, dy in NEIGHBOR_STEPS}

WALKABLE_GLYPH = "."
BLOCKED_GLYPH = "#"
ROOM_SECTION = "ROOMS:"


class Point(NamedTuple):
    x: int
    y: int


@dataclass
class GeodesicPath:
    """An 8-connected path; length is the sum of per-step costs."""

    points: list[Point]
    length: float

    @property
    def end(self) -> Point:
        return self.points[-1]


@dataclass(eq=False)
class GridMap:
    """Immutable occupancy grid with optional per-cell room labels.

    Instances are safe to share across concurrent readers; the distance-field
    and path caches are pure memoization of deterministic queries.
    """

    width: int
    height: int
    rows: tuple[str, ...]
    room_rows: tuple[str, ...] | None = None
    room_names: dict[str, str] = field(default_factory=dict)
    _dist_fields: dict[Point, list[float]] = field(default_factory=dict, repr=False)
    _path_cache: dict[tuple[Point, Point], GeodesicPath] = field(default_factory=dict, repr=False)
    _walkables: tuple[Point, ...] | None = field(default=None, repr=False)

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_walkable(self, x: int, y: int) -> bool:
        return self.in_bounds(x, y) and self.rows[y][x] == WALKABLE_GLYPH

    def room_at(self, p: Point) -> str | None:
        if self.room_rows is None or not self.in_bounds(p.x, p.y):
            return None
        return self.room_names.get(self.room_rows[p.y][p.x])

    def room_labels(self) -> set[str]:
        return set(self.room_names.values())

    def walkable_points(self) -> tuple[Point, ...]:
        if self._walkables is None:
            self._walkables = tuple(
                Point(x, y)
                for y in range(self.height)
                for x in range(self.width)
                if self.rows[y][x] == WALKABLE_GLYPH
            )
        return self._walkables

    def index(self, p: Point) -> int:
        return p.y * self.width + p.x


def load_map(text: str) -> GridMap:
    """Parse an ASCII map document into a GridMap.

    Format: one line per row, '.' walkable and '#' blocked; an optional
    section after a line reading 'ROOMS:' maps glyphs a-z to room names
    ('a=Kitchen') followed by a glyph grid of the same dimensions.
    """
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MalformedMap("empty map document")

    grid_lines: list[str] = []
    i = 0
    while i < len(lines) and lines[i].strip() != ROOM_SECTION:
        grid_lines.append(lines[i].rstrip("\r"))
        i += 1

    if not grid_lines:
        raise MalformedMap("map document has no grid rows")
    width = len(grid_lines[0])
    if width == 0:
        raise MalformedMap("map rows must be nonempty")
    for row_no, row in enumerate(grid_lines):
        if len(row) != width:
            raise MalformedMap(f"row {row_no} has length {len(row)}, expected {width}")
        for col_no, ch in enumerate(row):
            if ch not in (WALKABLE_GLYPH, BLOCKED_GLYPH):
                raise MalformedMap(f"unknown glyph {ch!r} at row {row_no}, col {col_no}")
    height = len(grid_lines)

    room_rows: tuple[str, ...] | None = None
    room_names: dict[str, str] = {}
    if i < len(lines):
        i += 1  # skip the ROOMS: line
        while i < len(lines) and "=" in lines[i]:
            glyph, _, name = lines[i].partition("=")
            glyph = glyph.strip()
            name = name.strip()
            if len(glyph) != 1 or not glyph.islower() or not glyph.isalpha():
                raise MalformedMap(f"bad room glyph {glyph!r} (want a single letter a-z)")
            if not name:
                raise MalformedMap(f"room glyph {glyph!r} has an empty name")
            if glyph in room_names:
                raise MalformedMap(f"room glyph {glyph!r} defined twice")
            room_names[glyph] = name
            i += 1
        glyph_lines = [ln.rstrip("\r") for ln in lines[i:]]
        if len(glyph_lines) != height:
            raise MalformedMap(
                f"room glyph grid has {len(glyph_lines)} rows, expected {height}"
            )
        for row_no, row in enumerate(glyph_lines):
            if len(row) != width:
                raise MalformedMap(f"room glyph row {row_no} has length {len(row)}")
            for col_no, ch in enumerate(row):
                walkable = grid_lines[row_no][col_no] == WALKABLE_GLYPH
                if walkable:
                    if ch != WALKABLE_GLYPH and ch not in room_names:
                        raise MalformedMap(
                            f"unmapped room glyph {ch!r} at row {row_no}, col {col_no}"
                        )
                elif ch in room_names:
                    raise MalformedMap(
                        f"room label on blocked cell at row {row_no}, col {col_no}"
                    )
        room_rows = tuple(glyph_lines)

    return GridMap(
        width=width,
        height=height,
        rows=tuple(grid_lines),
        room_rows=room_rows,
        room_names=room_names,
    )


def neighbors(grid: GridMap, p: Point) -> Iterator[tuple[Point, float]]:
    """Walkable 8-connected neighbors of p, in fixed expansion order."""
    for _, dx, dy in NEIGHBOR_STEPS:
        nx, ny = p.x + dx, p.y + dy
        if not grid.is_walkable(nx, ny):
            continue
        if dx and dy and not (grid.is_walkable(p.x + dx, p.y) and grid.is_walkable(p.x, p.y + dy)):
            continue  # no corner cutting
        yield Point(nx, ny), (SQRT2 if dx and dy else 1.0)


def step_target(grid: GridMap, p: Point, direction: str) -> Point | None:
    """Cell reached from p by one compass step, or None if the move is illegal."""
    dx, dy = DIRECTIONS[direction]
    nx, ny = p.x + dx, p.y + dy
    if not grid.is_walkable(nx, ny):
        return None
    if dx and dy and not (grid.is_walkable(p.x + dx, p.y) and grid.is_walkable(p.x, p.y + dy)):
        return None
    return Point(nx, ny)


def step_cost(a: Point, b: Point) -> float:
    dx, dy = abs(a.x - b.x), abs(a.y - b.y)
    if dx > 1 or dy > 1 or (dx == 0 and dy == 0):
        raise ValueError(f"{a} -> {b} is not a single 8-connected step")
    return SQRT2 if dx and dy else 1.0


def direction_of(a: Point, b: Point) -> str:
    """Compass name of the single step from a to b."""
    delta = (b.x - a.x, b.y - a.y)
    for name, dx, dy in NEIGHBOR_STEPS:
        if (dx, dy) == delta:
            return name
    raise ValueError(f"{a} -> {b} is not a single 8-connected step")


def _require_walkable(grid: GridMap, p: Point) -> None:
    if not grid.is_walkable(p.x, p.y):
        raise NotWalkable(f"({p.x},{p.y}) is blocked or out of bounds")


def distance_field(grid: GridMap, source: Point) -> list[float]:
    """Geodesic distance from source to every cell (inf where unreachable).

    Fields are memoized on the map, so repeated proximity queries against a
    fixed set of locations are O(1) after the first call.
    """
    cached = grid._dist_fields.get(source)
    if cached is not None:
        return cached
    _require_walkable(grid, source)
    dist = [math.inf] * (grid.width * grid.height)
    dist[grid.index(source)] = 0.0
    heap: list[tuple[float, int, Point]] = [(0.0, 0, source)]
    counter = 1
    while heap:
        d, _, p = heappop(heap)
        if d > dist[grid.index(p)]:
            continue
        for q, cost in neighbors(grid, p):
            nd = d + cost
            qi = grid.index(q)
            if nd < dist[qi]:
                dist[qi] = nd
                heappush(heap, (nd, counter, q))
                counter += 1
    grid._dist_fields[source] = dist
    return dist


def distance(grid: GridMap, a: Point, b: Point) -> float:
    """Geodesic distance between walkable cells, inf if disconnected."""
    _require_walkable(grid, b)
    return distance_field(grid, a)[grid.index(b)]


def shortest_path(grid: GridMap, a: Point, b: Point) -> GeodesicPath:
    """Minimum-cost 8-connected path from a to b (Dijkstra, deterministic ties)."""
    _require_walkable(grid, a)
    _require_walkable(grid, b)
    cached = grid._path_cache.get((a, b))
    if cached is not None:
        return cached
    if a == b:
        path = GeodesicPath([a], 0.0)
        grid._path_cache[(a, b)] = path
        return path

    dist: dict[Point, float] = {a: 0.0}
    parent: dict[Point, Point] = {}
    heap: list[tuple[float, int, Point]] = [(0.0, 0, a)]
    counter = 1
    while heap:
        d, _, p = heappop(heap)
        if d > dist.get(p, math.inf):
            continue
        if p == b:
            break
        for q, cost in neighbors(grid, p):
            nd = d + cost
            if nd < dist.get(q, math.inf):
                dist[q] = nd
                parent[q] = p
                heappush(heap, (nd, counter, q))
                counter += 1
    if b not in dist:
        raise Unreachable(f"no path from ({a.x},{a.y}) to ({b.x},{b.y})")

    points = [b]
    while points[-1] != a:
        points.append(parent[points[-1]])
    points.reverse()
    path = GeodesicPath(points, dist[b])
    grid._path_cache[(a, b)] = path
    return path


def distance_matrix(grid: GridMap, locations: Sequence[Point]) -> np.ndarray:
    """Pairwise geodesic distances; zero diagonal, coinciding points yield 0."""
    for p in locations:
        _require_walkable(grid, p)
    k = len(locations)
    mat = np.zeros((k, k), dtype=np.float64)
    fields = {p: distance_field(grid, p) for p in set(locations)}
    for i, p in enumerate(locations):
        fp = fields[p]
        for j, q in enumerate(locations):
            d = fp[grid.index(q)]
            if math.isinf(d):
                raise Unreachable(f"({p.x},{p.y}) cannot reach ({q.x},{q.y})")
            mat[i, j] = d
    return mat


def sample_navigable(
    grid: GridMap,
    rng,
    min_separation: float = 0.0,
    existing: Sequence[Point] = (),
    attempts: int = 10_000,
) -> Point:
    """Draw a walkable point at geodesic distance >= min_separation from `existing`.

    Raises SamplingExhausted once the attempt budget is spent (default 10,000).
    """
    walkables = grid.walkable_points()
    if not walkables:
        raise SamplingExhausted("map has no walkable cells")
    fields = [distance_field(grid, p) for p in existing]
    for _ in range(attempts):
        candidate = walkables[rng.randrange(len(walkables))]
        ci = grid.index(candidate)
        if all(f[ci] >= min_separation for f in fields):
            return candidate
    raise SamplingExhausted(
        f"no point at separation {min_separation} from {len(fields)} points "
        f"after {attempts} attempts"
    )
