"""Solvers and validator for the single-vehicle capacitated pickup-and-delivery
routing problem, including re-solving constrained to an executed visit prefix.

Routes visit each of the 2n+1 locations exactly once, start at the depot
(index 0), never carry more than `capacity` objects, and visit every pickup
before its dropoff. There is no return-to-depot term: a route ends at its
final dropoff.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InfeasiblePrefix, TooLarge
from .task import LocationIndex, Point

DEFAULT_CAPACITY = 2
EXACT_STATE_LIMIT = 20  # largest 2n the exact DP accepts
AUTO_EXACT_LIMIT = 16  # auto policy: exact when 2n <= 16, heuristic beyond
DEFAULT_BUDGET = 300
_EPS_IMPROVE = 1e-12


@dataclass(frozen=True)
class Route:
    """A full visit sequence x(0..2n)."""

    visits: tuple[int, ...]


@dataclass(frozen=True)
class Prefix:
    """The executed visit history x(0..m), m <= 2n; always starts at the depot."""

    visits: tuple[int, ...] = (0,)

    def __len__(self) -> int:
        return len(self.visits)


@dataclass(frozen=True)
class Violation:
    family: str  # permutation | capacity | precedence | prefix
    step: int
    message: str


@dataclass
class PlanResult:
    route: Route
    cost: float
    solver: str  # exact | heuristic
    nodes_expanded: int
    elapsed: float


def abstract_index(n: int) -> LocationIndex:
    """LocationIndex for matrix-only instances (placeholder coordinates)."""
    return LocationIndex(
        points=tuple(Point(0, 0) for _ in range(2 * n + 1)),
        n=n,
        pickups=frozenset(range(1, n + 1)),
        dropoffs=frozenset(range(n + 1, 2 * n + 1)),
        delivery={i: i + n for i in range(1, n + 1)},
    )


def route_cost(route: Route | Prefix, distmat: np.ndarray) -> float:
    """Sum of consecutive-pair distances along the visit sequence."""
    visits = route.visits
    if len(visits) != distmat.shape[0]:
        raise DimensionMismatch(
            f"route has {len(visits)} visits, matrix is {distmat.shape[0]}x{distmat.shape[1]}"
        )
    return float(_fold_cost(visits, distmat))


def _fold_cost(visits: Sequence[int], distmat: np.ndarray) -> float:
    # Left fold, matching the exact solver's accumulation order so equal
    # routes always produce bit-identical costs.
    total = 0.0
    for i in range(1, len(visits)):
        total = total + distmat[visits[i - 1], visits[i]]
    return total


def prefix_load(index: LocationIndex, visits: Sequence[int]) -> int:
    load = 0
    for loc in visits:
        if loc in index.pickups:
            load += 1
        elif loc in index.dropoffs:
            load -= 1
    return load


def validate(
    route: Route,
    index: LocationIndex,
    capacity: int = DEFAULT_CAPACITY,
    prefix: Prefix | None = None,
) -> list[Violation]:
    """Check a route against all four constraint families.

    Returns one violation per broken family (first offending step each);
    an empty list means the route is feasible and extends the prefix.
    """
    if prefix is None:
        prefix = Prefix()
    visits = route.visits
    size = index.size
    violations: list[Violation] = []

    # permutation: exactly the locations 0..2n, each once, depot first
    perm_issue: Violation | None = None
    if len(visits) != size:
        perm_issue = Violation(
            "permutation", len(visits), f"route has {len(visits)} visits, expected {size}"
        )
    elif visits[0] != 0:
        perm_issue = Violation("permutation", 0, f"route starts at {visits[0]}, not the depot")
    else:
        seen: set[int] = set()
        for step, loc in enumerate(visits):
            if not 0 <= loc < size:
                perm_issue = Violation("permutation", step, f"location {loc} out of range")
                break
            if loc in seen:
                perm_issue = Violation("permutation", step, f"location {loc} visited twice")
                break
            seen.add(loc)
    if perm_issue is not None:
        violations.append(perm_issue)

    # capacity: running load never exceeds c
    load = 0
    for step, loc in enumerate(visits):
        if loc in index.pickups:
            load += 1
        elif loc in index.dropoffs:
            load -= 1
        if load > capacity:
            violations.append(
                Violation("capacity", step, f"load {load} exceeds capacity {capacity} at step {step}")
            )
            break

    # precedence: each pickup before its dropoff
    first_pos: dict[int, int] = {}
    for step, loc in enumerate(visits):
        first_pos.setdefault(loc, step)
    for p in sorted(index.pickups):
        d = index.delivery[p]
        if d not in first_pos:
            continue  # covered by the permutation family
        if p not in first_pos or first_pos[d] <= first_pos[p]:
            violations.append(
                Violation(
                    "precedence",
                    first_pos[d],
                    f"dropoff {d} at step {first_pos[d]} precedes pickup {p}",
                )
            )
            break

    # prefix: route must reproduce the executed history
    for step in range(len(prefix.visits)):
        if step >= len(visits):
            violations.append(
                Violation("prefix", step, f"route ends before prefix step {step}")
            )
            break
        if visits[step] != prefix.visits[step]:
            violations.append(
                Violation(
                    "prefix",
                    step,
                    f"route visits {visits[step]} at step {step}, history says {prefix.visits[step]}",
                )
            )
            break

    return violations


def check_prefix(index: LocationIndex, prefix: Prefix, capacity: int) -> None:
    """Raise InfeasiblePrefix unless the executed history itself is feasible."""
    visits = prefix.visits
    if not visits or visits[0] != 0:
        raise InfeasiblePrefix("history must start at the depot (location 0)")
    if len(visits) > index.size:
        raise InfeasiblePrefix(f"history length {len(visits)} exceeds {index.size}")
    seen: set[int] = set()
    load = 0
    for step, loc in enumerate(visits):
        if not 0 <= loc < index.size:
            raise InfeasiblePrefix(f"location {loc} out of range at step {step}")
        if loc in seen:
            raise InfeasiblePrefix(f"location {loc} repeated at step {step}")
        seen.add(loc)
        if loc in index.pickups:
            load += 1
            if load > capacity:
                raise InfeasiblePrefix(f"load {load} exceeds capacity {capacity} at step {step}")
        elif loc in index.dropoffs:
            if index.pickup_of(loc) not in seen:
                raise InfeasiblePrefix(f"dropoff {loc} before its pickup at step {step}")
            load -= 1


def feasible_next(index: LocationIndex, prefix: Prefix, capacity: int = DEFAULT_CAPACITY) -> set[int]:
    """Locations the agent may visit next: unvisited pickups while below
    capacity, plus unvisited dropoffs whose pickup is already in the history."""
    visited = set(prefix.visits)
    load = prefix_load(index, prefix.visits)
    out: set[int] = set()
    if load < capacity:
        out.update(p for p in index.pickups if p not in visited)
    out.update(
        d for d in index.dropoffs if d not in visited and index.pickup_of(d) in visited
    )
    return out


# --- exact solver -------------------------------------------------------------


def solve_exact(
    index: LocationIndex,
    distmat: np.ndarray,
    capacity: int = DEFAULT_CAPACITY,
    prefix: Prefix | None = None,
) -> PlanResult:
    """Minimum-cost feasible route extending the prefix, by dynamic programming
    over (visited-set, last-location) states with capacity and precedence
    pruning. Whenever two candidates compare equal in cost, the
    lexicographically smaller visit sequence wins, so the returned plan is
    deterministic.
    """
    if prefix is None:
        prefix = Prefix()
    n = index.n
    if 2 * n > EXACT_STATE_LIMIT:
        raise TooLarge(f"2n = {2 * n} exceeds the exact solver limit {EXACT_STATE_LIMIT}")
    check_prefix(index, prefix, capacity)
    t0 = time.perf_counter()
    size = index.size

    if len(prefix.visits) == size:
        cost = float(_fold_cost(prefix.visits, distmat))
        return PlanResult(Route(prefix.visits), cost, "exact", 0, time.perf_counter() - t0)

    bit = [0] * size
    pick_mask = 0
    for loc in range(1, size):
        bit[loc] = 1 << (loc - 1)
        if loc in index.pickups:
            pick_mask |= bit[loc]
    partner_bit = {d: bit[index.pickup_of(d)] for d in index.dropoffs}
    full_mask = (1 << (2 * n)) - 1

    mask0 = 0
    for loc in prefix.visits[1:]:
        mask0 |= bit[loc]
    g0 = _fold_cost(prefix.visits, distmat)

    # layer-by-layer forward DP; state value = (cost, visit sequence)
    layer: dict[tuple[int, int], tuple[float, tuple[int, ...]]] = {
        (mask0, prefix.visits[-1]): (g0, prefix.visits)
    }
    expanded = 0
    for _ in range(size - len(prefix.visits)):
        nxt: dict[tuple[int, int], tuple[float, tuple[int, ...]]] = {}
        for (mask, last), (g, seq) in layer.items():
            expanded += 1
            load = (mask & pick_mask).bit_count() - (mask & ~pick_mask & full_mask).bit_count()
            row = distmat[last]
            for loc in range(1, size):
                b = bit[loc]
                if mask & b:
                    continue
                if b & pick_mask:
                    if load >= capacity:
                        continue
                elif not mask & partner_bit[loc]:
                    continue
                g2 = g + row[loc]
                key = (mask | b, loc)
                cur = nxt.get(key)
                if cur is None or g2 < cur[0] or (g2 == cur[0] and seq < cur[1][:-1]):
                    nxt[key] = (g2, seq + (loc,))
        layer = nxt

    assert layer, "feasible prefix must admit a completion"
    best_cost, best_seq = min(layer.values(), key=lambda v: (v[0], v[1]))
    return PlanResult(
        Route(best_seq), float(best_cost), "exact", expanded, time.perf_counter() - t0
    )


# --- heuristic solver ---------------------------------------------------------


def _insertion_arrays(route: list[int], distmat: np.ndarray, free_from: int):
    """Per-gap insertion geometry for the free zone of `route`.

    Gap g (free_from <= g <= len(route)) inserts between route[g-1] and
    route[g]; gap len(route) appends. Returns (gaps, pre, post, base) where
    inserting node v into gap g costs pre[v,g] + post[v,g] - base[g].
    """
    r = np.asarray(route, dtype=np.intp)
    gaps = np.arange(free_from, len(route) + 1)
    left = r[gaps - 1]
    pre = distmat[left]  # pre[k, v] = D[route[g-1], v]
    post = np.zeros((len(gaps), distmat.shape[0]))
    base = np.zeros(len(gaps))
    interior = gaps < len(route)
    if interior.any():
        right = r[gaps[interior]]
        post[interior] = distmat[:, right].T
        base[interior] = distmat[left[interior], right]
    return gaps, pre, post, base


def _loads(index: LocationIndex, route: Sequence[int]) -> np.ndarray:
    out = np.zeros(len(route), dtype=np.int64)
    load = 0
    for t, loc in enumerate(route):
        if loc in index.pickups:
            load += 1
        elif loc in index.dropoffs:
            load -= 1
        out[t] = load
    return out


def _cheapest_insertion(
    index: LocationIndex,
    distmat: np.ndarray,
    capacity: int,
    route: list[int],
    free_from: int,
) -> list[int]:
    """Complete `route` by repeatedly inserting the globally cheapest feasible
    pickup-dropoff pair (or orphan dropoff whose pickup is already routed)."""
    routed = set(route)
    pairs = sorted(p for p in index.pickups if p not in routed)
    orphans = sorted(
        d for d in index.dropoffs if d not in routed and index.pickup_of(d) in routed
    )

    while pairs or orphans:
        gaps, pre, post, base = _insertion_arrays(route, distmat, free_from)
        G = len(gaps)
        loads = _loads(index, route)
        # lv[k]: load in effect at gap k's slot; the running max over a gap
        # window bounds the +1 a carried object adds across it. Only gap
        # combinations with the dropoff at or after the pickup are legal.
        lv = loads[gaps - 1]
        upper = np.arange(G)[None, :] >= np.arange(G)[:, None]
        window = np.where(upper, lv[None, :], -np.inf)
        runmax = np.maximum.accumulate(window, axis=1)
        pair_ok = upper & (runmax <= capacity - 1)

        best = None  # (delta, kind, payload)
        for p in pairs:
            d = index.delivery[p]
            ap = pre[:, p] + post[:, p] - base
            ad = pre[:, d] + post[:, d] - base
            grid = ap[:, None] + ad[None, :]
            diag = pre[:, p] + distmat[p, d] + post[:, d] - base
            np.fill_diagonal(grid, diag)
            grid = np.where(pair_ok, grid, np.inf)
            gi, gj = np.unravel_index(np.argmin(grid), grid.shape)
            delta = grid[gi, gj]
            if np.isfinite(delta) and (best is None or delta < best[0]):
                best = (delta, "pair", (p, d, int(gaps[gi]), int(gaps[gj])))
        for d in orphans:
            ad = pre[:, d] + post[:, d] - base
            k = int(np.argmin(ad))
            if best is None or ad[k] < best[0]:
                best = (ad[k], "orphan", (d, int(gaps[k])))

        assert best is not None, "feasible prefix must admit an insertion"
        if best[1] == "pair":
            p, d, gp, gd = best[2]
            route.insert(gp, p)
            route.insert(gd + 1, d)
            pairs.remove(p)
        else:
            d, g = best[2]
            route.insert(g, d)
            orphans.remove(d)
    return route


def _route_feasible(index: LocationIndex, capacity: int, route: Sequence[int]) -> bool:
    pos = {loc: t for t, loc in enumerate(route)}
    load = 0
    for loc in route:
        if loc in index.pickups:
            load += 1
            if load > capacity:
                return False
            if pos[index.delivery[loc]] < pos[loc]:
                return False
        elif loc in index.dropoffs:
            load -= 1
    return True


def _local_search(
    index: LocationIndex,
    distmat: np.ndarray,
    capacity: int,
    route: list[int],
    free_from: int,
    budget: int,
) -> tuple[list[int], int]:
    """First-improvement local search over relocate-pair, swap-pair and or-opt
    moves, all restricted to the free zone. Returns the route and move count."""
    applied = 0
    free_pairs = sorted(
        p for p in index.pickups if p in route[free_from:] and index.delivery[p] in route[free_from:]
    )

    while applied < budget:
        improved = False
        pos = {loc: t for t, loc in enumerate(route)}

        # relocate-pair: rip a pair out, reinsert at its cheapest position
        for p in free_pairs:
            d = index.delivery[p]
            reduced = [loc for loc in route if loc not in (p, d)]
            removal = _fold_cost(route, distmat) - _fold_cost(reduced, distmat)
            gaps, pre, post, base = _insertion_arrays(reduced, distmat, free_from)
            loads = _loads(index, reduced)
            lv = loads[gaps - 1]
            G = len(gaps)
            upper = np.arange(G)[None, :] >= np.arange(G)[:, None]
            window = np.where(upper, lv[None, :], -np.inf)
            runmax = np.maximum.accumulate(window, axis=1)
            ap = pre[:, p] + post[:, p] - base
            ad = pre[:, d] + post[:, d] - base
            grid = ap[:, None] + ad[None, :]
            diag = pre[:, p] + distmat[p, d] + post[:, d] - base
            np.fill_diagonal(grid, diag)
            grid = np.where(upper & (runmax <= capacity - 1), grid, np.inf)
            gi, gj = np.unravel_index(np.argmin(grid), grid.shape)
            if grid[gi, gj] - removal < -_EPS_IMPROVE:
                reduced.insert(int(gaps[gi]), p)
                reduced.insert(int(gaps[gj]) + 1, d)
                route[:] = reduced
                applied += 1
                improved = True
                break
        if improved:
            continue

        # swap-pair: exchange two pairs slot-for-slot; the load profile is
        # untouched and each pickup slot stays ahead of its dropoff slot
        base_cost = _fold_cost(route, distmat)
        done = False
        for a_i in range(len(free_pairs)):
            for b_i in range(a_i + 1, len(free_pairs)):
                pa, pb = free_pairs[a_i], free_pairs[b_i]
                da, db = index.delivery[pa], index.delivery[pb]
                trial = list(route)
                trial[pos[pa]], trial[pos[pb]] = trial[pos[pb]], trial[pos[pa]]
                trial[pos[da]], trial[pos[db]] = trial[pos[db]], trial[pos[da]]
                if _fold_cost(trial, distmat) - base_cost < -_EPS_IMPROVE:
                    route[:] = trial
                    applied += 1
                    improved = done = True
                    break
            if done:
                break
        if improved:
            continue

        # or-opt: shift a short segment (optionally reversed) within the free zone
        L = len(route)
        base_cost = _fold_cost(route, distmat)
        done = False
        for seg_len in (1, 2, 3):
            for s in range(free_from, L - seg_len + 1):
                seg = route[s : s + seg_len]
                rest = route[:s] + route[s + seg_len :]
                variants = (seg, seg[::-1]) if seg_len > 1 else (seg,)
                for g in range(free_from, len(rest) + 1):
                    for sv in variants:
                        if g == s and sv == seg:
                            continue
                        trial = rest[:g] + sv + rest[g:]
                        delta = _fold_cost(trial, distmat) - base_cost
                        if delta < -_EPS_IMPROVE and _route_feasible(index, capacity, trial):
                            route[:] = trial
                            applied += 1
                            improved = done = True
                            break
                    if done:
                        break
                if done:
                    break
            if done:
                break
        if not improved:
            break

    return route, applied


def _random_insert_pair(
    index: LocationIndex,
    capacity: int,
    route: list[int],
    free_from: int,
    p: int,
    rng: random.Random,
) -> None:
    """Insert the pair (p, delivery(p)) at a random feasible position."""
    d = index.delivery[p]
    loads = _loads(index, route)
    gaps = np.arange(free_from, len(route) + 1)
    lv = loads[gaps - 1]
    G = len(gaps)
    upper = np.arange(G)[None, :] >= np.arange(G)[:, None]
    window = np.where(upper, lv[None, :], -np.inf)
    runmax = np.maximum.accumulate(window, axis=1)
    options = np.flatnonzero(upper & (runmax <= capacity - 1))
    flat = int(options[rng.randrange(len(options))])
    gi, gj = divmod(flat, G)
    route.insert(int(gaps[gi]), p)
    route.insert(int(gaps[gj]) + 1, d)


def solve_heuristic(
    index: LocationIndex,
    distmat: np.ndarray,
    capacity: int = DEFAULT_CAPACITY,
    prefix: Prefix | None = None,
    budget: int = DEFAULT_BUDGET,
) -> PlanResult:
    """Feasible route extending the prefix.

    Cheapest-insertion construction, then first-improvement local search over
    relocate-pair, swap-pair and or-opt. When a local optimum is reached with
    budget to spare, a seeded perturbation (remove a few random pairs,
    reinsert each at its cheapest slot) kicks the search and descent resumes
    from the incumbent. Fully deterministic for identical inputs; budget
    counts applied moves plus kicks, and budget=0 returns the
    construction-only route.
    """
    if prefix is None:
        prefix = Prefix()
    check_prefix(index, prefix, capacity)
    t0 = time.perf_counter()

    route = list(prefix.visits)
    free_from = len(route)
    route = _cheapest_insertion(index, distmat, capacity, route, free_from)
    inserted = len(route) - free_from

    kick_rng = random.Random(0x5EED ^ (index.n << 8) ^ len(prefix.visits))
    free_pairs = sorted(
        p
        for p in index.pickups
        if p in route[free_from:] and index.delivery[p] in route[free_from:]
    )
    best = list(route)
    best_cost = _fold_cost(route, distmat)
    spent = 0
    while spent < budget:
        route, applied = _local_search(
            index, distmat, capacity, route, free_from, budget - spent
        )
        spent += applied
        cost = _fold_cost(route, distmat)
        if cost < best_cost - _EPS_IMPROVE:
            best, best_cost = list(route), cost
        else:
            route = list(best)
        if spent >= budget or len(free_pairs) < 2:
            break
        k = min(len(free_pairs), 2 + kick_rng.randrange(2))
        for p in kick_rng.sample(free_pairs, k):
            d = index.delivery[p]
            route = [loc for loc in route if loc not in (p, d)]
            _random_insert_pair(index, capacity, route, free_from, p, kick_rng)
        spent += 1

    return PlanResult(
        Route(tuple(best)),
        float(best_cost),
        "heuristic",
        inserted + spent,
        time.perf_counter() - t0,
    )


def solve(
    index: LocationIndex,
    distmat: np.ndarray,
    capacity: int = DEFAULT_CAPACITY,
    prefix: Prefix | None = None,
    policy: str = "auto",
    budget: int = DEFAULT_BUDGET,
) -> PlanResult:
    """Dispatch to the exact or heuristic solver.

    auto: exact while 2n <= 16 (so the 6-object task plans optimally),
    heuristic beyond.
    """
    if policy == "exact":
        return solve_exact(index, distmat, capacity, prefix)
    if policy == "heuristic":
        return solve_heuristic(index, distmat, capacity, prefix, budget)
    if policy == "auto":
        if 2 * index.n <= AUTO_EXACT_LIMIT:
            return solve_exact(index, distmat, capacity, prefix)
        return solve_heuristic(index, distmat, capacity, prefix, budget)
    raise ValueError(f"unknown solver policy {policy!r}")


# --- instance files -----------------------------------------------------------


def instance_to_json(
    index: LocationIndex,
    distmat: np.ndarray,
    capacity: int,
    prefix: Prefix | None = None,
) -> str:
    import json

    doc = {
        "v": 1,
        "n": index.n,
        "capacity": capacity,
        "dist": [float(x) for x in np.asarray(distmat).ravel()],
        "delivery": {str(p): d for p, d in sorted(index.delivery.items())},
    }
    if prefix is not None:
        doc["prefix"] = list(prefix.visits)
    return json.dumps(doc, indent=2) + "\n"


def instance_from_json(text: str) -> tuple[LocationIndex, np.ndarray, int, Prefix | None]:
    import json

    from .errors import BadScenario

    try:
        doc = json.loads(text)
        n = int(doc["n"])
        capacity = int(doc["capacity"])
        flat = doc["dist"]
        delivery = {int(k): int(v) for k, v in doc["delivery"].items()}
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise BadScenario(f"bad instance document: {exc}") from exc
    size = 2 * n + 1
    if doc.get("v") != 1:
        raise BadScenario("instance document must carry schema version v=1")
    if len(flat) != size * size:
        raise DimensionMismatch(f"dist has {len(flat)} entries, expected {size * size}")
    index = abstract_index(n)
    if delivery != index.delivery:
        index = LocationIndex(
            points=tuple(Point(0, 0) for _ in range(size)),
            n=n,
            pickups=frozenset(delivery.keys()),
            dropoffs=frozenset(delivery.values()),
            delivery=delivery,
        )
    distmat = np.asarray(flat, dtype=np.float64).reshape(size, size)
    prefix = Prefix(tuple(doc["prefix"])) if "prefix" in doc else None
    return index, distmat, capacity, prefix
