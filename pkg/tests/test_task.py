"""Task model: point pools, scenario generation, location indexing, serialization."""

from __future__ import annotations

import random

import pytest

from kondo import env, task
from kondo.env import Point
from kondo.errors import BadDifficulty, SamplingExhausted
from kondo.task import CATEGORIES, ObjectInstance

from .conftest import open_map


class TestPointPool:
    def test_pool_respects_separation_from_points_and_bins(self, grid, bins, pool):
        assert len(pool) == 40
        bin_points = [b.location for b in bins]
        for i, p in enumerate(pool.points):
            for q in pool.points[i + 1 :]:
                assert env.distance(grid, p, q) >= 1.0
            for q in bin_points:
                assert env.distance(grid, p, q) >= 1.0

    def test_round_robin_categories_balance_every_prefix(self, pool):
        for n in (6, 12, 18, 24):
            prefix = pool.categories[:n]
            for cat in CATEGORIES:
                assert prefix.count(cat) == n // 6

    def test_same_seed_same_pool(self, grid, bins, pool):
        again = task.build_point_pool(grid, bins, random.Random(7))
        assert again == pool

    def test_infeasible_pool_exhausts(self, bins):
        tiny = open_map(4, 2)  # 8 walkable cells, pool needs 40 distinct
        with pytest.raises(SamplingExhausted):
            task.build_point_pool(tiny, [], random.Random(0))


class TestGenerateScenario:
    def test_n6_uses_first_six_pool_points(self, grid, bins, pool):
        sc = task.generate_scenario(grid, bins, pool, 6, random.Random(1))
        assert [o.pickup for o in sc.objects] == list(pool.points[:6])
        assert [o.category for o in sc.objects] == list(pool.categories[:6])
        assert {o.category for o in sc.objects} == set(CATEGORIES)

    def test_difficulties_nest(self, grid, bins, pool):
        sc6 = task.generate_scenario(grid, bins, pool, 6, random.Random(1))
        sc12 = task.generate_scenario(grid, bins, pool, 12, random.Random(2))
        assert [o.pickup for o in sc12.objects[:6]] == [o.pickup for o in sc6.objects]
        sc18 = task.generate_scenario(grid, bins, pool, 18, random.Random(3))
        sc24 = task.generate_scenario(grid, bins, pool, 24, random.Random(4))
        assert [o.pickup for o in sc18.objects[:12]] == [o.pickup for o in sc12.objects]
        assert [o.pickup for o in sc24.objects[:18]] == [o.pickup for o in sc18.objects]

    @pytest.mark.parametrize("n", [7, 13, 0, -6, 42])
    def test_unbalanced_or_oversized_counts_rejected(self, grid, bins, pool, n):
        with pytest.raises(BadDifficulty):
            task.generate_scenario(grid, bins, pool, n, random.Random(0))

    def test_reproducible_bytes(self, grid, bins):
        def build():
            rng = random.Random(99)
            pool = task.build_point_pool(grid, bins, rng)
            sc = task.generate_scenario(
                grid, bins, pool, 12, rng, map_name="apartment.map", seed=99
            )
            return task.scenario_to_json(sc)

        assert build() == build()


class TestStartLocation:
    def test_walkable_centroid_returned(self):
        grid = open_map(5, 3)
        objs = [
            ObjectInstance("a", "books", Point(0, 0), "x"),
            ObjectInstance("b", "books", Point(4, 0), "y"),
        ]
        assert task.start_location(grid, objs, random.Random(0)) == Point(2, 0)

    def test_blocked_centroid_samples_nearby(self):
        grid = env.load_map(".....\n..#..\n.....\n")
        objs = [
            ObjectInstance("a", "books", Point(1, 1), "x"),
            ObjectInstance("b", "books", Point(3, 1), "y"),
        ]
        p = task.start_location(grid, objs, random.Random(0))
        assert grid.is_walkable(p.x, p.y)
        assert max(abs(p.x - 2), abs(p.y - 1)) <= 3

    def test_single_object_centroid_is_its_cell(self):
        grid = open_map(4, 4)
        objs = [ObjectInstance("a", "books", Point(3, 2), "x")]
        assert task.start_location(grid, objs, random.Random(0)) == Point(3, 2)

    def test_requires_objects(self):
        with pytest.raises(ValueError):
            task.start_location(open_map(3, 3), [], random.Random(0))


class TestIndexLocations:
    def test_n1_layout(self, studio, studio_bins):
        sc = task.Scenario(
            map_name="studio",
            bins=studio_bins,
            objects=(ObjectInstance("obj_001", "books", Point(5, 5), "novel"),),
            start=Point(1, 1),
            difficulty=1,
            seed=0,
        )
        idx = task.index_locations(sc)
        assert idx.points == (Point(1, 1), Point(5, 5), studio_bins[0].location)
        assert idx.pickups == {1} and idx.dropoffs == {2}
        assert idx.delivery == {1: 2}

    def test_shared_bin_dropoffs_coincide_at_zero_distance(self, studio, studio_bins):
        sc = task.Scenario(
            map_name="studio",
            bins=studio_bins,
            objects=(
                ObjectInstance("obj_001", "books", Point(5, 5), "novel"),
                ObjectInstance("obj_002", "books", Point(9, 3), "atlas"),
            ),
            start=Point(1, 1),
            difficulty=2,
            seed=0,
        )
        idx = task.index_locations(sc)
        assert idx.points[3] == idx.points[4] == studio_bins[0].location
        assert idx.delivery == {1: 3, 2: 4}
        mat = env.distance_matrix(studio, idx.points)
        assert mat[3, 4] == 0.0

    def test_standard_partition(self, index6):
        assert index6.pickups | index6.dropoffs == set(range(1, 13))
        assert index6.pickups & index6.dropoffs == set()
        assert sorted(index6.delivery.values()) == sorted(index6.dropoffs)
        # every dropoff sits at its object's bin
        assert len(index6.points) == 13


class TestScenarioJson:
    def test_roundtrip(self, scenario6):
        text = task.scenario_to_json(scenario6)
        again = task.scenario_from_json(text)
        assert again == scenario6
        assert task.scenario_to_json(again) == text

    def test_rejects_wrong_version(self):
        with pytest.raises(task.BadScenario):
            task.scenario_from_json('{"v": 2}')
