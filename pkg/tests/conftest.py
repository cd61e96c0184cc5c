"""Shared fixtures: the apartment world, derived scenarios, and small synthetic
maps/scenarios used for fuzzing and edge cases."""

from __future__ import annotations

import random

import pytest

from kondo import env, harness, task
from kondo.env import Point
from kondo.task import Bin, ObjectInstance, Scenario

FIXTURE_SEED = 7

# 16x12 studio: one interior wall with a gap, fully connected
STUDIO_ROWS = [
    "################",
    "#..............#",
    "#..............#",
    "#.....#........#",
    "#.....#........#",
    "#.....#........#",
    "#.....#........#",
    "#..............#",
    "#..............#",
    "#..............#",
    "#..............#",
    "################",
]
STUDIO_TEXT = "\n".join(STUDIO_ROWS) + "\n"


def open_map(width: int, height: int) -> env.GridMap:
    return env.load_map("\n".join("." * width for _ in range(height)) + "\n")


@pytest.fixture(scope="session")
def grid():
    return env.load_map(task.fixture_text("apartment.map"))


@pytest.fixture(scope="session")
def bins():
    return task.load_bins(task.fixture_text("apartment_bins.json"))


@pytest.fixture(scope="session")
def pool(grid, bins):
    return task.build_point_pool(grid, bins, random.Random(FIXTURE_SEED))


@pytest.fixture(scope="session")
def scenario6(grid, bins):
    return harness.build_scenario(grid, bins, FIXTURE_SEED, 6, "apartment.map")


@pytest.fixture(scope="session")
def index6(scenario6):
    return task.index_locations(scenario6)


@pytest.fixture(scope="session")
def distmat6(grid, index6):
    return env.distance_matrix(grid, index6.points)


@pytest.fixture(scope="session")
def studio():
    return env.load_map(STUDIO_TEXT)


@pytest.fixture(scope="session")
def studio_bins(studio):
    # two bins are enough for small hand-built scenarios
    return (
        Bin("bin_books", "books", Point(2, 2), "Bookshelf"),
        Bin("bin_toys", "toys", Point(13, 9), "Toy Box"),
    )


def make_scenario(grid: env.GridMap, bins, n: int, rng: random.Random) -> Scenario:
    """Hand-built scenario with arbitrary n (bypasses category balancing)."""
    cats = [b.category for b in bins]
    objects = []
    for i in range(n):
        cat = cats[i % len(cats)]
        p = env.sample_navigable(grid, rng)
        objects.append(ObjectInstance(f"obj_{i + 1:03d}", cat, p, f"{cat}-{i + 1}"))
    start = env.sample_navigable(grid, rng)
    return Scenario(
        map_name="studio",
        bins=tuple(bins),
        objects=tuple(objects),
        start=start,
        difficulty=n,
        seed=rng.randrange(1 << 30),
    )
