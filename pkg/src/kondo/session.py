"""Live task state machine.

Applies move/pick/place events, enforces the two-slot knapsack and the
pick/place reach rule, detects deviations from the current plan, re-solves the
routing problem when one occurs, and renders assistance payloads for the
three fidelity levels. One session is single-writer: apply events serially.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field

import numpy as np

from . import env, planner
from .env import GeodesicPath, GridMap, Point
from .errors import KondoError, UnknownObject, InfeasibleVisit
from .planner import PlanResult, Prefix, Route
from .task import LocationIndex, Scenario, index_locations

FIDELITIES = ("none", "highlight", "optimal")

R_INTERACT = 1.5  # pick/place reach in cell units: same cell or any of the 8 neighbors
SESSION_BUDGET = 60  # local-search budget for in-session replans

MSG_BLOCKED = "Can't move there."
MSG_KNAPSACK_FULL = "Your knapsack is full."
MSG_TOO_FAR_PICK = "Too far away to pick that up."
MSG_ALREADY_PICKED = "That item is already picked up."
MSG_NOT_HOLDING = "You're not holding that item."
MSG_COMPLETE = "All items put away. Task complete!"


class SessionComplete(KondoError):
    """Event applied to a finished session."""


@dataclass
class EventRecord:
    kind: str  # move | pick | place | replan | reject
    step: int  # log ordinal, strictly increasing
    payload: dict


@dataclass
class ChecklistItem:
    text: str
    done: bool
    ref: str  # object id the step concerns


@dataclass
class AssistancePayload:
    breadcrumbs: GeodesicPath | None
    highlights: list[str]
    checklist: list[ChecklistItem]
    numbered: bool
    message: str | None


@dataclass
class SessionState:
    scenario: Scenario
    grid: GridMap
    index: LocationIndex
    distmat: np.ndarray
    fidelity: str
    solver_policy: str
    budget: int
    capacity: int
    r_interact: float
    rng_seed: int
    position: Point
    knapsack: list[str]
    prefix: Prefix
    plan: PlanResult
    traveled: float = 0.0
    steps: int = 0
    replans: int = 0
    done: bool = False
    message: str | None = None
    event_log: list[EventRecord] = field(default_factory=list)
    checklist_order: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.scenario.n

    def object_by_id(self, object_id: str):
        for obj in self.scenario.objects:
            if obj.id == object_id:
                return obj
        raise UnknownObject(f"no object {object_id!r} in scenario")

    def pickup_index(self, object_id: str) -> int:
        for ordinal, obj in enumerate(self.scenario.objects):
            if obj.id == object_id:
                return ordinal + 1
        raise UnknownObject(f"no object {object_id!r} in scenario")

    def dropoff_index(self, object_id: str) -> int:
        return self.pickup_index(object_id) + self.n

    def bin_for(self, category: str):
        for b in self.scenario.bins:
            if b.category == category:
                return b
        raise UnknownObject(f"no bin for category {category!r}")

    def is_picked(self, object_id: str) -> bool:
        return self.pickup_index(object_id) in self.prefix.visits

    def is_placed(self, object_id: str) -> bool:
        return self.dropoff_index(object_id) in self.prefix.visits


def start_session(
    grid: GridMap,
    scenario: Scenario,
    fidelity: str = "optimal",
    solver_policy: str = "auto",
    budget: int = SESSION_BUDGET,
    capacity: int = planner.DEFAULT_CAPACITY,
    r_interact: float = R_INTERACT,
    rng_seed: int | None = None,
) -> SessionState:
    """Initialize a session at the scenario start with an empty history."""
    if fidelity not in FIDELITIES:
        raise ValueError(f"unknown fidelity {fidelity!r}, want one of {FIDELITIES}")
    index = index_locations(scenario)
    distmat = env.distance_matrix(grid, index.points)
    prefix = Prefix((0,))
    plan = planner.solve(index, distmat, capacity, prefix, policy=solver_policy, budget=budget)
    seed = scenario.seed if rng_seed is None else rng_seed
    order = [obj.id for obj in scenario.objects]
    random.Random(seed).shuffle(order)  # one shuffle at session start, stable after
    state = SessionState(
        scenario=scenario,
        grid=grid,
        index=index,
        distmat=distmat,
        fidelity=fidelity,
        solver_policy=solver_policy,
        budget=budget,
        capacity=capacity,
        r_interact=r_interact,
        rng_seed=seed,
        position=scenario.start,
        knapsack=[],
        prefix=prefix,
        plan=plan,
        checklist_order=order,
    )
    if len(prefix.visits) == index.size:
        state.done = True
        state.message = MSG_COMPLETE
    return state


def _log(state: SessionState, kind: str, payload: dict) -> None:
    state.event_log.append(EventRecord(kind, len(state.event_log) + 1, payload))


def _reject(state: SessionState, action: str, reason: str, message: str, **extra) -> None:
    state.message = message
    state.steps += 1
    _log(state, "reject", {"action": action, "reason": reason, **extra})


def _require_live(state: SessionState) -> None:
    if state.done:
        raise SessionComplete("session is complete")


def planned_next(state: SessionState) -> int | None:
    """The plan's next location index, or None when the task is done."""
    if len(state.prefix.visits) >= state.index.size:
        return None
    return state.plan.route.visits[len(state.prefix.visits)]


def apply_move(state: SessionState, direction: str) -> SessionState:
    """One compass step; blocked moves are recorded rejections."""
    _require_live(state)
    if direction not in env.DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    target = env.step_target(state.grid, state.position, direction)
    if target is None:
        _reject(state, "move", "blocked", MSG_BLOCKED, direction=direction)
        return state
    cost = env.step_cost(state.position, target)
    _log(
        state,
        "move",
        {"direction": direction, "from": list(state.position), "to": list(target), "cost": cost},
    )
    state.position = target
    state.traveled += cost
    state.steps += 1
    state.message = None
    return state


def apply_pick(state: SessionState, object_id: str) -> SessionState:
    """Pick an object into the knapsack if in reach, below capacity, unpicked."""
    _require_live(state)
    obj = state.object_by_id(object_id)
    if state.is_picked(object_id):
        _reject(state, "pick", "already_picked", MSG_ALREADY_PICKED, object_id=object_id)
        return state
    if len(state.knapsack) >= state.capacity:
        _reject(state, "pick", "knapsack_full", MSG_KNAPSACK_FULL, object_id=object_id)
        return state
    if env.distance(state.grid, obj.pickup, state.position) > state.r_interact:
        _reject(state, "pick", "too_far", MSG_TOO_FAR_PICK, object_id=object_id)
        return state
    state.knapsack.append(object_id)
    state.steps += 1
    state.message = f"Picked up {obj.display_name}."
    _log(state, "pick", {"object_id": object_id, "location": state.pickup_index(object_id)})
    _on_visit(state, state.pickup_index(object_id))
    return state


def apply_place(state: SessionState, object_id: str) -> SessionState:
    """Place a held object into its category bin if in reach."""
    _require_live(state)
    obj = state.object_by_id(object_id)
    if object_id not in state.knapsack:
        _reject(state, "place", "not_holding", MSG_NOT_HOLDING, object_id=object_id)
        return state
    target_bin = state.bin_for(obj.category)
    if env.distance(state.grid, target_bin.location, state.position) > state.r_interact:
        _reject(
            state,
            "place",
            "too_far",
            f"Too far from the {target_bin.label}.",
            object_id=object_id,
        )
        return state
    state.knapsack.remove(object_id)
    state.steps += 1
    state.message = f"Placed {obj.display_name} in {target_bin.label}."
    _log(state, "place", {"object_id": object_id, "location": state.dropoff_index(object_id)})
    _on_visit(state, state.dropoff_index(object_id))
    if state.done:
        state.message = MSG_COMPLETE
    return state


def _on_visit(state: SessionState, visited: int) -> None:
    """Advance the history; replan when the visit deviates from the plan."""
    feasible = planner.feasible_next(state.index, state.prefix, state.capacity)
    if visited not in feasible:
        raise InfeasibleVisit(
            f"visit {visited} outside feasible set {sorted(feasible)}; state-machine bug"
        )
    expected = planned_next(state)
    state.prefix = Prefix(state.prefix.visits + (visited,))
    if visited != expected:
        state.replans += 1
        remaining = state.index.size - len(state.prefix.visits)
        if remaining <= 1:
            # the continuation is forced; no solver call needed
            visits = state.prefix.visits
            if remaining == 1:
                (last,) = set(range(state.index.size)) - set(visits)
                visits = visits + (last,)
            state.plan = PlanResult(
                Route(visits),
                planner.route_cost(Route(visits), state.distmat),
                state.plan.solver,
                0,
                0.0,
            )
        else:
            state.plan = planner.solve(
                state.index,
                state.distmat,
                state.capacity,
                state.prefix,
                policy=state.solver_policy,
                budget=state.budget,
            )
        _log(
            state,
            "replan",
            {
                "deviated_to": visited,
                "expected": expected,
                "plan_cost": state.plan.cost,
                "solver": state.plan.solver,
            },
        )
    if len(state.prefix.visits) == state.index.size:
        state.done = True
    assert (
        state.plan.route.visits[: len(state.prefix.visits)] == state.prefix.visits
    ), "plan must extend the executed history"


# --- assistance rendering -----------------------------------------------------


def assistance_view(state: SessionState) -> AssistancePayload:
    """Render the assistance payload for the session's fidelity level."""
    if state.fidelity == "optimal":
        return _optimal_view(state)
    items = []
    for object_id in state.checklist_order:
        obj = state.object_by_id(object_id)
        target_bin = state.bin_for(obj.category)
        where = ""
        if state.fidelity == "highlight":
            room = state.grid.room_at(obj.pickup)
            where = f" ({room})" if room else ""
        items.append(
            ChecklistItem(
                text=f"{obj.display_name}{where} -> {target_bin.label}",
                done=state.is_picked(object_id),
                ref=object_id,
            )
        )
    items = [it for it in items if not it.done] + [it for it in items if it.done]
    highlights = []
    if state.fidelity == "highlight":
        highlights = [o.id for o in state.scenario.objects if not state.is_picked(o.id)]
    return AssistancePayload(
        breadcrumbs=None,
        highlights=highlights,
        checklist=items,
        numbered=False,
        message=state.message,
    )


def _optimal_view(state: SessionState) -> AssistancePayload:
    items = []
    for pos, loc in enumerate(state.plan.route.visits[1:], start=1):
        ordinal = state.index.object_ordinal(loc)
        obj = state.scenario.objects[ordinal]
        if loc in state.index.pickups:
            room = state.grid.room_at(obj.pickup)
            where = f" ({room})" if room else ""
            text = f"Pick up {obj.display_name}{where}"
        else:
            text = f"Place {obj.display_name} in {state.bin_for(obj.category).label}"
        items.append(ChecklistItem(text=text, done=pos < len(state.prefix.visits), ref=obj.id))
    breadcrumbs = None
    nxt = planned_next(state)
    if nxt is not None:
        breadcrumbs = env.shortest_path(state.grid, state.position, state.index.points[nxt])
    return AssistancePayload(
        breadcrumbs=breadcrumbs,
        highlights=[],
        checklist=items,
        numbered=True,
        message=state.message,
    )


# --- snapshots ------------------------------------------------------------------


def object_status(state: SessionState, object_id: str) -> str:
    """Where an object currently is: at_pickup, held, or placed."""
    if state.is_placed(object_id):
        return "placed"
    if object_id in state.knapsack:
        return "held"
    return "at_pickup"


def snapshot(state: SessionState) -> dict:
    """Full renderable state; a client needs nothing else to draw the world."""
    return {
        "position": list(state.position),
        "knapsack": list(state.knapsack),
        "objects": {o.id: object_status(state, o.id) for o in state.scenario.objects},
        "prefix": list(state.prefix.visits),
        "plan": list(state.plan.route.visits),
        "plan_cost": state.plan.cost,
        "traveled": state.traveled,
        "steps": state.steps,
        "replans": state.replans,
        "done": state.done,
        "message": state.message,
        "fidelity": state.fidelity,
        "events": len(state.event_log),
    }


def state_hash(state: SessionState) -> str:
    """Canonical digest of the session's mutable state."""
    blob = json.dumps(snapshot(state), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
