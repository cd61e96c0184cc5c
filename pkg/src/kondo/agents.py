"""Scripted user policies standing in for human participants.

Agents choose the next location to visit, walk there along an exact shortest
path, and pick/place. Visit-order noise is the only modeled deviation from
optimal behavior; movement between visits is always geodesic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from . import env, planner, session
from .env import GridMap
from .errors import KondoError
from .session import EventRecord, SessionState
from .task import Scenario

POLICY_KINDS = ("compliant", "greedy_nearest", "random_feasible", "noisy_compliant")


@dataclass(frozen=True)
class AgentPolicy:
    kind: str
    p_deviate: float | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if (self.kind == "noisy_compliant") != (self.p_deviate is not None):
            raise ValueError("p_deviate must be given exactly for noisy_compliant")
        if self.p_deviate is not None and not 0.0 <= self.p_deviate <= 1.0:
            raise ValueError("p_deviate must lie in [0, 1]")

    @property
    def label(self) -> str:
        if self.kind == "noisy_compliant":
            return f"noisy_compliant(p={self.p_deviate:g})"
        return self.kind


@dataclass
class EpisodeTrace:
    map_name: str
    scenario_seed: int
    difficulty: int
    n: int
    fidelity: str
    policy: str
    visits: tuple[int, ...]
    traveled: float
    steps: int
    replans: int
    done: bool
    events: list[EventRecord]


def choose_next(policy: AgentPolicy, state: SessionState, rng) -> int:
    """Location index the agent visits next."""
    feasible = sorted(planner.feasible_next(state.index, state.prefix, state.capacity))
    if not feasible:
        raise KondoError("choose_next on a finished session")
    planned = session.planned_next(state)
    if policy.kind == "compliant":
        return planned
    if policy.kind == "greedy_nearest":
        return min(
            feasible,
            key=lambda loc: (env.distance(state.grid, state.index.points[loc], state.position), loc),
        )
    if policy.kind == "random_feasible":
        return feasible[rng.randrange(len(feasible))]
    # noisy_compliant: follow the plan except with probability p_deviate,
    # falling back to the plan when it is the only option. Two draws are
    # consumed per decision whatever happens, so runs that share a seed stay
    # step-aligned across conditions (paired comparisons between cells).
    coin = rng.random()
    pick = rng.random()
    others = [loc for loc in feasible if loc != planned]
    if not others or coin >= policy.p_deviate:
        return planned
    return others[min(int(pick * len(others)), len(others) - 1)]


def run_episode(
    grid: GridMap,
    scenario: Scenario,
    fidelity: str,
    policy: AgentPolicy,
    solver_policy: str = "auto",
    rng=None,
    budget: int = session.SESSION_BUDGET,
) -> EpisodeTrace:
    """Drive a full session with a scripted agent and record its trace."""
    state = session.start_session(
        grid, scenario, fidelity=fidelity, solver_policy=solver_policy, budget=budget
    )
    while not state.done:
        target = choose_next(policy, state, rng)
        point = state.index.points[target]
        path = env.shortest_path(grid, state.position, point)
        for prev, cur in zip(path.points, path.points[1:]):
            session.apply_move(state, env.direction_of(prev, cur))
            assert state.position == cur, "legal path step must never be rejected"
        obj = scenario.objects[state.index.object_ordinal(target)]
        if target in state.index.pickups:
            session.apply_pick(state, obj.id)
        else:
            session.apply_place(state, obj.id)
        assert state.prefix.visits[-1] == target, "visit must be accepted"
    return trace_from_session(state, policy.label)


def trace_from_session(state: SessionState, policy_label: str) -> EpisodeTrace:
    return EpisodeTrace(
        map_name=state.scenario.map_name,
        scenario_seed=state.scenario.seed,
        difficulty=state.scenario.difficulty,
        n=state.n,
        fidelity=state.fidelity,
        policy=policy_label,
        visits=state.prefix.visits,
        traveled=state.traveled,
        steps=state.steps,
        replans=state.replans,
        done=state.done,
        events=list(state.event_log),
    )


# --- trace files ---------------------------------------------------------------


def trace_to_json(trace: EpisodeTrace, metrics: dict | None = None) -> str:
    doc = {
        "v": 1,
        "map_name": trace.map_name,
        "seed": trace.scenario_seed,
        "difficulty": trace.difficulty,
        "n": trace.n,
        "fidelity": trace.fidelity,
        "policy": trace.policy,
        "visits": list(trace.visits),
        "traveled": trace.traveled,
        "steps": trace.steps,
        "replans": trace.replans,
        "done": trace.done,
        "events": [{"kind": e.kind, "step": e.step, "payload": e.payload} for e in trace.events],
    }
    if metrics is not None:
        doc["metrics"] = metrics
    return json.dumps(doc, indent=2) + "\n"


def trace_from_json(text: str) -> EpisodeTrace:
    doc = json.loads(text)
    if doc.get("v") != 1:
        raise KondoError("trace document must carry schema version v=1")
    return EpisodeTrace(
        map_name=doc["map_name"],
        scenario_seed=doc["seed"],
        difficulty=doc["difficulty"],
        n=doc["n"],
        fidelity=doc["fidelity"],
        policy=doc["policy"],
        visits=tuple(doc["visits"]),
        traveled=doc["traveled"],
        steps=doc["steps"],
        replans=doc["replans"],
        done=doc["done"],
        events=[EventRecord(e["kind"], e["step"], e["payload"]) for e in doc["events"]],
    )
