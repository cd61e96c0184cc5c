"""Objective metrics: deviations, IPL, task distance, grouped summaries."""

from __future__ import annotations

import random

import pytest

from kondo import agents, env, metrics, session
from kondo.agents import AgentPolicy, EpisodeTrace
from kondo.errors import EmptyGroup, IncompleteTrace, ZeroTravel
from kondo.task import index_locations

from .conftest import make_scenario, open_map


def complete_trace(studio, studio_bins, n, policy, seed):
    sc = make_scenario(studio, studio_bins, n, random.Random(seed))
    rng = random.Random(seed + 1)
    trace = agents.run_episode(studio, sc, "optimal", policy, rng=rng)
    distmat = env.distance_matrix(studio, index_locations(sc).points)
    return trace, distmat


class TestNormalizedDeviations:
    def test_compliant_is_zero(self, studio, studio_bins):
        trace, _ = complete_trace(studio, studio_bins, 3, AgentPolicy("compliant"), 0)
        assert metrics.normalized_deviations(trace) == 0.0

    def test_n1_has_no_possible_alternatives(self, studio, studio_bins):
        trace, _ = complete_trace(studio, studio_bins, 1, AgentPolicy("random_feasible"), 1)
        assert metrics.normalized_deviations(trace) == 0.0

    def test_counts_replans_over_two_n(self, studio, studio_bins):
        trace, _ = complete_trace(
            studio, studio_bins, 2, AgentPolicy("noisy_compliant", p_deviate=1.0), 3
        )
        replay_count = sum(1 for e in trace.events if e.kind == "replan")
        assert replay_count == trace.replans
        assert metrics.normalized_deviations(trace) == replay_count / 4

    def test_incomplete_trace_rejected(self, studio, studio_bins):
        trace, _ = complete_trace(studio, studio_bins, 2, AgentPolicy("compliant"), 4)
        partial = EpisodeTrace(**{**trace.__dict__, "visits": trace.visits[:2], "done": False})
        with pytest.raises(IncompleteTrace):
            metrics.normalized_deviations(partial)


class TestIpl:
    def test_geodesic_agents_reach_one(self, studio, studio_bins):
        trace, distmat = complete_trace(studio, studio_bins, 3, AgentPolicy("greedy_nearest"), 5)
        assert metrics.ipl(trace, distmat) == pytest.approx(1.0, abs=1e-9)

    def test_detour_drops_below_one(self, studio, studio_bins):
        sc = make_scenario(studio, studio_bins, 1, random.Random(6))
        state = session.start_session(studio, sc)
        # wander one step out and back, then finish the task on foot
        for direction in env.DIRECTIONS:
            if env.step_target(studio, state.position, direction) is not None:
                session.apply_move(state, direction)
                back = env.direction_of(state.position, sc.start)
                session.apply_move(state, back)
                break
        for target in (1, 2):
            point = state.index.points[target]
            path = env.shortest_path(studio, state.position, point)
            for a, b in zip(path.points, path.points[1:]):
                session.apply_move(state, env.direction_of(a, b))
            if target == 1:
                session.apply_pick(state, sc.objects[0].id)
            else:
                session.apply_place(state, sc.objects[0].id)
        trace = agents.trace_from_session(state, "wanderer")
        distmat = env.distance_matrix(studio, index_locations(sc).points)
        assert trace.done
        assert metrics.ipl(trace, distmat) < 1.0

    def test_hand_built_two_visit_trace(self):
        grid = open_map(5, 5)
        from kondo.env import Point
        from kondo.task import Bin, ObjectInstance, Scenario

        bins = (Bin("b", "books", Point(4, 0), "Shelf"),)
        sc = Scenario(
            map_name="open",
            bins=bins,
            objects=(ObjectInstance("obj_001", "books", Point(2, 0), "novel"),),
            start=Point(0, 0),
            difficulty=1,
            seed=0,
        )
        trace = agents.run_episode(grid, sc, "optimal", AgentPolicy("compliant"), rng=None)
        distmat = env.distance_matrix(grid, index_locations(sc).points)
        hand_sum = distmat[0, 1] + distmat[1, 2]  # 2 + 2 cells straight east
        assert hand_sum == 4.0
        assert metrics.ipl(trace, distmat) == pytest.approx(hand_sum / trace.traveled, abs=1e-12)
        assert trace.traveled == 4.0

    def test_zero_travel_rejected(self, studio, studio_bins):
        trace, distmat = complete_trace(studio, studio_bins, 1, AgentPolicy("compliant"), 7)
        still = EpisodeTrace(**{**trace.__dict__, "traveled": 0.0})
        with pytest.raises(ZeroTravel):
            metrics.ipl(still, distmat)


class TestTaskDistance:
    def test_equals_traveled(self, studio, studio_bins):
        trace, _ = complete_trace(studio, studio_bins, 2, AgentPolicy("greedy_nearest"), 8)
        assert metrics.task_distance(trace) == trace.traveled

    def test_bounded_below_by_visit_sequence_length(self, studio, studio_bins):
        for seed in range(5):
            trace, distmat = complete_trace(
                studio, studio_bins, 3, AgentPolicy("random_feasible"), 20 + seed
            )
            assert trace.traveled >= metrics.visit_sequence_length(trace, distmat) - 1e-9


class TestSummarize:
    def _metric(self, value):
        return metrics.EpisodeMetrics(
            normalized_deviations=value,
            ipl=1.0,
            task_distance=10 * value,
            completion_steps=int(10 * value),
            replans=0,
        )

    def test_single_trace_group(self):
        rows = [({"fidelity": "none", "difficulty": 6, "policy": "compliant"}, self._metric(0.5))]
        table = metrics.summarize(rows)
        assert len(table) == 1
        assert table[0]["count"] == 1
        assert table[0]["normalized_deviations_mean"] == 0.5
        assert table[0]["normalized_deviations_sd"] == 0.0

    def test_identical_traces_have_zero_sd(self):
        cond = {"fidelity": "optimal", "difficulty": 6, "policy": "compliant"}
        table = metrics.summarize([(cond, self._metric(0.25)), (cond, self._metric(0.25))])
        assert table[0]["count"] == 2
        assert table[0]["task_distance_sd"] == 0.0

    def test_groups_split_by_keys(self):
        rows = [
            ({"fidelity": "none", "difficulty": 6, "policy": "a"}, self._metric(0.0)),
            ({"fidelity": "none", "difficulty": 12, "policy": "a"}, self._metric(1.0)),
        ]
        table = metrics.summarize(rows)
        assert len(table) == 2
        assert {r["difficulty"] for r in table} == {6, 12}

    def test_empty_rejected(self):
        with pytest.raises(EmptyGroup):
            metrics.summarize([])
