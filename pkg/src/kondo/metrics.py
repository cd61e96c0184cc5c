"""Objective episode metrics: normalized deviations, inverse path length,
task distance, and condition-grouped summaries."""

from __future__ import annotations

from dataclasses import dataclass
from statistics import mean, pstdev

import numpy as np

from .agents import EpisodeTrace
from .errors import EmptyGroup, IncompleteTrace, ZeroTravel

METRIC_FIELDS = ("normalized_deviations", "ipl", "task_distance", "completion_steps", "replans")


@dataclass
class EpisodeMetrics:
    normalized_deviations: float
    ipl: float
    task_distance: float
    completion_steps: int
    replans: int

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in METRIC_FIELDS}


def _require_complete(trace: EpisodeTrace) -> None:
    if not trace.done or len(trace.visits) != 2 * trace.n + 1:
        raise IncompleteTrace(
            f"trace has {len(trace.visits)} visits of {2 * trace.n + 1} and done={trace.done}"
        )


def normalized_deviations(trace: EpisodeTrace) -> float:
    """Fraction of pick/place visits that differed from the then-current
    plan's next location; all 2n visits count as possible deviations."""
    _require_complete(trace)
    if trace.n == 0:
        return 0.0
    return trace.replans / (2 * trace.n)


def visit_sequence_length(trace: EpisodeTrace, distmat: np.ndarray) -> float:
    """Geodesic length of the visit sequence: sum of d over consecutive visits."""
    total = 0.0
    for a, b in zip(trace.visits, trace.visits[1:]):
        total += float(distmat[a, b])
    return total


def ipl(trace: EpisodeTrace, distmat: np.ndarray) -> float:
    """Inverse path length: visit-sequence geodesic length over distance traveled."""
    if trace.traveled <= 0.0:
        raise ZeroTravel("episode traveled zero distance")
    return visit_sequence_length(trace, distmat) / trace.traveled


def task_distance(trace: EpisodeTrace) -> float:
    """Total distance traveled by the agent."""
    return trace.traveled


def episode_metrics(trace: EpisodeTrace, distmat: np.ndarray) -> EpisodeMetrics:
    return EpisodeMetrics(
        normalized_deviations=normalized_deviations(trace),
        ipl=ipl(trace, distmat),
        task_distance=task_distance(trace),
        completion_steps=trace.steps,
        replans=trace.replans,
    )


def partial_metrics(trace: EpisodeTrace, distmat: np.ndarray) -> dict:
    """Best-effort metrics for an abandoned episode (flagged partial)."""
    out = {
        "normalized_deviations": trace.replans / (2 * trace.n) if trace.n else 0.0,
        "ipl": None,
        "task_distance": trace.traveled,
        "completion_steps": trace.steps,
        "replans": trace.replans,
        "partial": True,
    }
    if trace.traveled > 0.0:
        out["ipl"] = visit_sequence_length(trace, distmat) / trace.traveled
    return out


def summarize(
    rows: list[tuple[dict, EpisodeMetrics]],
    group_by: tuple[str, ...] = ("fidelity", "difficulty", "policy"),
) -> list[dict]:
    """Per-group mean, standard deviation (population), and count per metric.

    Each row pairs a condition dict (fidelity, difficulty, policy, ...) with
    the episode's metrics; groups are formed over the requested keys.
    """
    if not rows:
        raise EmptyGroup("no traces to summarize")
    groups: dict[tuple, list[EpisodeMetrics]] = {}
    for cond, m in rows:
        key = tuple(cond[k] for k in group_by)
        groups.setdefault(key, []).append(m)
    table = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        ms = groups[key]
        row: dict = dict(zip(group_by, key))
        row["count"] = len(ms)
        for f in METRIC_FIELDS:
            values = [float(getattr(m, f)) for m in ms]
            row[f"{f}_mean"] = mean(values)
            row[f"{f}_sd"] = pstdev(values)
        table.append(row)
    return table
