"""Rearrangement-task model: bins, objects, semantic categories, scenario generation,
and the depot/pickup/dropoff location enumeration used by the planner."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

from .env import GridMap, Point, sample_navigable
from .errors import BadDifficulty, BadScenario, NotWalkable, SamplingExhausted

CATEGORIES: tuple[str, ...] = (
    "dishes",
    "toys",
    "books",
    "laundry",
    "office_supplies",
    "recycling",
)

# One small model list per category; the drawn name is cosmetic only.
DISPLAY_NAMES: dict[str, tuple[str, ...]] = {
    "dishes": ("plate", "mug", "bowl", "saucer", "teacup"),
    "toys": ("teddy bear", "toy car", "building blocks", "puzzle box", "rubber ball"),
    "books": ("novel", "magazine", "cookbook", "atlas", "comic book"),
    "laundry": ("sock", "t-shirt", "bath towel", "jeans", "sweater"),
    "office_supplies": ("stapler", "notebook", "pen cup", "binder", "tape dispenser"),
    "recycling": ("soda bottle", "newspaper", "tin can", "milk carton", "glass jar"),
}

POOL_SIZE = 40
POOL_MIN_SEPARATION = 1.0
STANDARD_DIFFICULTIES: tuple[int, ...] = (6, 12, 18, 24)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Bin:
    id: str
    category: str
    location: Point
    label: str


@dataclass(frozen=True)
class ObjectInstance:
    id: str
    category: str
    pickup: Point
    display_name: str


@dataclass(frozen=True)
class Scenario:
    map_name: str
    bins: tuple[Bin, ...]
    objects: tuple[ObjectInstance, ...]
    start: Point
    difficulty: int
    seed: int

    @property
    def n(self) -> int:
        return len(self.objects)


@dataclass(frozen=True)
class PointPool:
    """Sampled object-placement points with a fixed category assignment.

    Categories rotate round-robin over CATEGORIES, so every prefix whose
    length is a multiple of six is category-balanced; difficulties nest by
    taking prefixes of the same pool.
    """

    points: tuple[Point, ...]
    categories: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class LocationIndex:
    """Enumeration of the 2n+1 locations of interest.

    Index 0 is the depot (agent start), 1..n the pickups in object order,
    n+1..2n the dropoffs; delivery maps each pickup index to its dropoff.
    Objects sharing a bin get distinct dropoff indices at the same point.
    """

    points: tuple[Point, ...]
    n: int
    pickups: frozenset[int]
    dropoffs: frozenset[int]
    delivery: dict[int, int]

    @property
    def size(self) -> int:
        return 2 * self.n + 1

    def pickup_of(self, dropoff: int) -> int:
        return dropoff - self.n

    def object_ordinal(self, location: int) -> int:
        """0-based position in the scenario object list for a pickup or dropoff index."""
        if location in self.pickups:
            return location - 1
        if location in self.dropoffs:
            return location - self.n - 1
        raise ValueError(f"location {location} is neither pickup nor dropoff")


def build_point_pool(
    grid: GridMap,
    bins: Sequence[Bin],
    rng,
    size: int = POOL_SIZE,
    min_separation: float = POOL_MIN_SEPARATION,
) -> PointPool:
    """Sample `size` walkable points, each >= min_separation (geodesic) from
    every earlier point and every bin location."""
    for b in bins:
        if not grid.is_walkable(b.location.x, b.location.y):
            raise NotWalkable(f"bin {b.id} at ({b.location.x},{b.location.y}) is blocked")
    existing: list[Point] = [b.location for b in bins]
    points: list[Point] = []
    for _ in range(size):
        p = sample_navigable(grid, rng, min_separation, existing)
        points.append(p)
        existing.append(p)
    categories = tuple(CATEGORIES[i % len(CATEGORIES)] for i in range(size))
    return PointPool(tuple(points), categories)


def start_location(
    grid: GridMap,
    objects: Sequence[ObjectInstance],
    rng,
    radius: int = 3,
    widen_every: int = 1_000,
    attempts: int = 10_000,
) -> Point:
    """Centroid cell of the objects if walkable, else a walkable point sampled
    near it (radius 3 cells, widening by 2 per 1,000 failed attempts)."""
    if not objects:
        raise ValueError("start_location requires at least one object")
    cx = math.floor(sum(o.pickup.x for o in objects) / len(objects) + 0.5)
    cy = math.floor(sum(o.pickup.y for o in objects) / len(objects) + 0.5)
    if grid.is_walkable(cx, cy):
        return Point(cx, cy)
    r = radius
    for attempt in range(attempts):
        if attempt and attempt % widen_every == 0:
            r += 2
        x = cx + rng.randint(-r, r)
        y = cy + rng.randint(-r, r)
        if grid.is_walkable(x, y):
            return Point(x, y)
    raise SamplingExhausted(
        f"no walkable start near centroid ({cx},{cy}) after {attempts} attempts"
    )


def generate_scenario(
    grid: GridMap,
    bins: Sequence[Bin],
    pool: PointPool,
    n: int,
    rng,
    map_name: str = "map",
    seed: int = 0,
) -> Scenario:
    """Instantiate a scenario on the first n pool points (prefix nesting)."""
    if n <= 0 or n % len(CATEGORIES) != 0:
        raise BadDifficulty(f"object count {n} is not a positive multiple of {len(CATEGORIES)}")
    if n > len(pool):
        raise BadDifficulty(f"object count {n} exceeds pool size {len(pool)}")
    objects = tuple(
        ObjectInstance(
            id=f"obj_{i + 1:03d}",
            category=pool.categories[i],
            pickup=pool.points[i],
            display_name=rng.choice(DISPLAY_NAMES[pool.categories[i]]),
        )
        for i in range(n)
    )
    start = start_location(grid, objects, rng)
    return Scenario(
        map_name=map_name,
        bins=tuple(bins),
        objects=objects,
        start=start,
        difficulty=n,
        seed=seed,
    )


def index_locations(scenario: Scenario) -> LocationIndex:
    """Build the 2n+1 location enumeration for a scenario."""
    bins_by_category = {b.category: b for b in scenario.bins}
    n = scenario.n
    points: list[Point] = [scenario.start]
    for obj in scenario.objects:
        points.append(obj.pickup)
    for obj in scenario.objects:
        b = bins_by_category.get(obj.category)
        if b is None:
            raise BadScenario(f"no bin for category {obj.category!r}")
        points.append(b.location)
    return LocationIndex(
        points=tuple(points),
        n=n,
        pickups=frozenset(range(1, n + 1)),
        dropoffs=frozenset(range(n + 1, 2 * n + 1)),
        delivery={i: i + n for i in range(1, n + 1)},
    )


# --- serialization -----------------------------------------------------------


def scenario_to_json(scenario: Scenario) -> str:
    doc = {
        "v": SCHEMA_VERSION,
        "map_name": scenario.map_name,
        "seed": scenario.seed,
        "difficulty": scenario.difficulty,
        "bins": [
            {"id": b.id, "category": b.category, "x": b.location.x, "y": b.location.y, "label": b.label}
            for b in scenario.bins
        ],
        "objects": [
            {
                "id": o.id,
                "category": o.category,
                "x": o.pickup.x,
                "y": o.pickup.y,
                "display_name": o.display_name,
            }
            for o in scenario.objects
        ],
        "start": {"x": scenario.start.x, "y": scenario.start.y},
    }
    return json.dumps(doc, indent=2) + "\n"


def scenario_from_json(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadScenario(f"scenario is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("v") != SCHEMA_VERSION:
        raise BadScenario("scenario document must carry schema version v=1")
    try:
        bins = tuple(
            Bin(b["id"], b["category"], Point(b["x"], b["y"]), b["label"]) for b in doc["bins"]
        )
        objects = tuple(
            ObjectInstance(o["id"], o["category"], Point(o["x"], o["y"]), o["display_name"])
            for o in doc["objects"]
        )
        return Scenario(
            map_name=doc["map_name"],
            bins=bins,
            objects=objects,
            start=Point(doc["start"]["x"], doc["start"]["y"]),
            difficulty=doc["difficulty"],
            seed=doc["seed"],
        )
    except (KeyError, TypeError) as exc:
        raise BadScenario(f"scenario document missing field: {exc}") from exc


def load_bins(text: str) -> tuple[Bin, ...]:
    try:
        doc = json.loads(text)
        bins = tuple(
            Bin(b["id"], b["category"], Point(b["x"], b["y"]), b["label"]) for b in doc["bins"]
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise BadScenario(f"bad bins document: {exc}") from exc
    seen = [b.category for b in bins]
    for cat in seen:
        if cat not in CATEGORIES:
            raise BadScenario(f"unknown category {cat!r}")
    if sorted(seen) != sorted(set(seen)):
        raise BadScenario("duplicate bin category")
    return bins


def fixture_text(name: str) -> str:
    """Read a packaged data fixture (e.g. 'apartment.map')."""
    return resources.files("kondo").joinpath("data", name).read_text(encoding="utf-8")
