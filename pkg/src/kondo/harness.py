"""Command-line front end: scenario generation, single-instance solving, batch
experiments over the assistance-fidelity x difficulty grid, and the session
server.

Exit codes: 0 success, 2 usage or config error, 3 infeasible input,
4 internal invariant breach.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import json
import logging
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import agents, env, metrics, planner, task
from .agents import AgentPolicy
from .errors import (
    BadDifficulty,
    BadScenario,
    DimensionMismatch,
    InfeasiblePrefix,
    InfeasibleVisit,
    KondoError,
    MalformedMap,
    NotWalkable,
    SamplingExhausted,
    TooLarge,
    Unreachable,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_INTERNAL = 4

log = logging.getLogger("kondo")

SUMMARY_COLUMNS = ["fidelity", "difficulty", "policy", "count"] + [
    f"{f}_{stat}" for f in metrics.METRIC_FIELDS for stat in ("mean", "sd")
]


def _read_source(ref: str) -> str:
    """Read a file path, falling back to a packaged fixture name."""
    p = Path(ref)
    if p.is_file():
        return p.read_text(encoding="utf-8")
    try:
        return task.fixture_text(ref)
    except (FileNotFoundError, OSError):
        raise BadScenario(f"no such file or fixture: {ref}")


def load_world(map_ref: str, bins_ref: str):
    grid = env.load_map(_read_source(map_ref))
    bins = task.load_bins(_read_source(bins_ref))
    return grid, bins


def build_scenario(grid, bins, seed: int, n: int, map_ref: str) -> task.Scenario:
    """Deterministic pipeline: pool from the seed, then the n-object prefix."""
    rng = random.Random(seed)
    pool = task.build_point_pool(grid, bins, rng)
    return task.generate_scenario(grid, bins, pool, n, rng, map_name=map_ref, seed=seed)


# --- generate -------------------------------------------------------------------


def cmd_generate(args) -> int:
    grid, bins = load_world(args.map, args.bins)
    scenario = build_scenario(grid, bins, args.seed, args.n, args.map)
    text = task.scenario_to_json(scenario)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- solve ----------------------------------------------------------------------


def _load_problem(args):
    text = Path(args.file).read_text(encoding="utf-8")
    doc = json.loads(text)
    if "dist" in doc:
        index, distmat, capacity, prefix = planner.instance_from_json(text)
        if args.capacity is not None:
            capacity = args.capacity
        return index, distmat, capacity, prefix
    scenario = task.scenario_from_json(text)
    map_ref = args.map or scenario.map_name
    grid = env.load_map(_read_source(map_ref))
    index = task.index_locations(scenario)
    distmat = env.distance_matrix(grid, index.points)
    capacity = args.capacity if args.capacity is not None else planner.DEFAULT_CAPACITY
    return index, distmat, capacity, None


def cmd_solve(args) -> int:
    index, distmat, capacity, prefix = _load_problem(args)
    if args.prefix:
        prefix = planner.Prefix(tuple(int(x) for x in args.prefix.split(",")))
    result = planner.solve(
        index, distmat, capacity, prefix, policy=args.policy, budget=args.budget
    )
    print(f"solver:   {result.solver}")
    print(f"cost:     {result.cost!r}")
    print(f"route:    {' '.join(str(v) for v in result.route.visits)}")
    print(f"expanded: {result.nodes_expanded}")
    print(f"elapsed:  {result.elapsed * 1000:.1f} ms")
    if args.validate:
        violations = planner.validate(result.route, index, capacity, prefix)
        if violations:
            for v in violations:
                print(f"VIOLATION [{v.family}] step {v.step}: {v.message}")
            return EXIT_INTERNAL
        print("validate: clean")
    if args.out:
        report = {
            "v": 1,
            "solver": result.solver,
            "cost": result.cost,
            "route": list(result.route.visits),
            "nodes_expanded": result.nodes_expanded,
        }
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


# --- batch ----------------------------------------------------------------------

_worker_world = {}


def load_experiment_config(path: str) -> dict:
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BadScenario(f"cannot read config {path}: {exc}")
    if config.get("v") != 1:
        raise BadScenario("experiment config must carry schema version v=1")
    for key in ("map", "bins", "difficulties", "fidelities", "policies", "seeds", "out"):
        if key not in config:
            raise BadScenario(f"experiment config missing {key!r}")
    if not config["difficulties"] or any(
        n not in task.STANDARD_DIFFICULTIES for n in config["difficulties"]
    ):
        raise BadScenario(f"difficulties must be among {task.STANDARD_DIFFICULTIES}")
    if int(config["seeds"].get("count", 0)) < 1:
        raise BadScenario("seeds.count must be >= 1")
    config.setdefault("solver_policy", "auto")
    config.setdefault("budget", 60)
    return config


def _policies(config: dict) -> list[AgentPolicy]:
    out = []
    for p in config["policies"]:
        out.append(AgentPolicy(p["kind"], p.get("p_deviate")))
    return out


def episode_specs(config: dict) -> list[dict]:
    specs = []
    ordinal = 0
    for n in config["difficulties"]:
        for fidelity in config["fidelities"]:
            for policy in _policies(config):
                for seed_idx in range(int(config["seeds"]["count"])):
                    specs.append(
                        {
                            "ordinal": ordinal,
                            "difficulty": n,
                            "fidelity": fidelity,
                            "policy_kind": policy.kind,
                            "p_deviate": policy.p_deviate,
                            "seed_idx": seed_idx,
                        }
                    )
                    ordinal += 1
    return specs


def _episode_rng(master: int, spec: dict) -> random.Random:
    # the difficulty is deliberately left out of the key: episodes with the
    # same seed ordinal share their random draws across difficulty cells
    # (common random numbers), which stabilizes cross-difficulty comparisons
    key = (
        f"{master}:{spec['fidelity']}:"
        f"{spec['policy_kind']}:{spec['p_deviate']}:{spec['seed_idx']}"
    )
    return random.Random(key)


def _worker_init(config: dict) -> None:
    grid, bins = load_world(config["map"], config["bins"])
    master = int(config["seeds"]["master"])
    scenarios = {
        n: build_scenario(grid, bins, master, n, config["map"])
        for n in config["difficulties"]
    }
    distmats = {
        n: env.distance_matrix(grid, task.index_locations(sc).points)
        for n, sc in scenarios.items()
    }
    _worker_world.update(
        grid=grid, scenarios=scenarios, distmats=distmats, config=config, master=master
    )


def _run_spec(spec: dict) -> tuple[int, str, dict]:
    grid = _worker_world["grid"]
    config = _worker_world["config"]
    scenario = _worker_world["scenarios"][spec["difficulty"]]
    distmat = _worker_world["distmats"][spec["difficulty"]]
    policy = AgentPolicy(spec["policy_kind"], spec["p_deviate"])
    trace = agents.run_episode(
        grid,
        scenario,
        spec["fidelity"],
        policy,
        solver_policy=config["solver_policy"],
        rng=_episode_rng(_worker_world["master"], spec),
        budget=int(config["budget"]),
    )
    m = metrics.episode_metrics(trace, distmat)
    cond = {
        "fidelity": spec["fidelity"],
        "difficulty": spec["difficulty"],
        "policy": policy.label,
    }
    return spec["ordinal"], agents.trace_to_json(trace, m.as_dict()), {**cond, **m.as_dict()}


def run_batch(config: dict, jobs: int = 1) -> Path:
    """Run the full condition grid; write ordered traces and the summary CSV."""
    out_dir = Path(config["out"])
    traces_dir = out_dir / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    specs = episode_specs(config)
    log.info("running %d episodes on %d workers", len(specs), jobs)

    results: list[tuple[int, str, dict]] = []
    if jobs <= 1:
        _worker_init(config)
        for spec in specs:
            results.append(_run_spec(spec))
    else:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_worker_init, initargs=(config,)
        ) as pool:
            results = list(pool.map(_run_spec, specs, chunksize=8))

    results.sort(key=lambda r: r[0])
    rows = []
    for ordinal, trace_json, cond_metrics in results:
        (traces_dir / f"trace_{ordinal:05d}.json").write_text(trace_json, encoding="utf-8")
        m = metrics.EpisodeMetrics(
            **{f: cond_metrics[f] for f in metrics.METRIC_FIELDS}
        )
        cond = {k: cond_metrics[k] for k in ("fidelity", "difficulty", "policy")}
        rows.append((cond, m))

    table = metrics.summarize(rows)
    summary_path = out_dir / "summary.csv"
    with summary_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for row in table:
            writer.writerow({k: row[k] for k in SUMMARY_COLUMNS})
    (out_dir / "config.json").write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out_dir


def cmd_batch(args) -> int:
    config = load_experiment_config(args.config)
    if args.out:
        config["out"] = args.out
    out_dir = run_batch(config, jobs=args.jobs)
    print(f"wrote {out_dir}/summary.csv")
    return EXIT_OK


# --- serve ----------------------------------------------------------------------


def cmd_serve(args) -> int:
    from .service.engine import ProtocolEngine, SessionRegistry
    from .service.server import KondoServer

    registry = SessionRegistry(trace_dir=args.trace_dir)
    server = KondoServer(
        ProtocolEngine(registry),
        host=args.host,
        port=args.port,
        http_port=args.http_port,
        ui_dir=args.ui,
    )
    print(f"ndjson: {args.host}:{args.port}")
    print(f"ws/http: http://{args.host}:{server.http_port}/ (ws at /ws)")
    try:
        asyncio.run(server.run_forever())
    except KeyboardInterrupt:
        pass
    return EXIT_OK


# --- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kondo",
        description="Rearrangement-task planning, simulation, and serving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a scenario file")
    g.add_argument("--map", default="apartment.map", help="map file or fixture name")
    g.add_argument("--bins", default="apartment_bins.json", help="bins file or fixture name")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, required=True, help="object count (multiple of 6)")
    g.add_argument("--out", help="output path (stdout when omitted)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve an instance or scenario file")
    s.add_argument("file", help="instance JSON (with dist) or scenario JSON")
    s.add_argument("--map", help="map override for scenario files")
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="policy", action="store_const", const="exact")
    mode.add_argument("--heuristic", dest="policy", action="store_const", const="heuristic")
    s.add_argument("--budget", type=int, default=planner.DEFAULT_BUDGET)
    s.add_argument("--capacity", type=int, default=None)
    s.add_argument("--prefix", help="comma-separated executed visits, e.g. 0,2,8")
    s.add_argument("--validate", action="store_true", help="re-check the route")
    s.add_argument("--out", help="write a JSON plan report")
    s.set_defaults(func=cmd_solve, policy="auto")

    b = sub.add_parser("batch", help="run an experiment grid from a config file")
    b.add_argument("--config", required=True)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", help="override the config's output directory")
    b.set_defaults(func=cmd_batch)

    v = sub.add_parser("serve", help="run the interactive session server")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8765, help="ndjson tcp port")
    v.add_argument("--http-port", type=int, default=None, help="ws/http port (default port+1)")
    v.add_argument("--ui", help="static UI bundle directory to serve")
    v.add_argument("--trace-dir", default="traces")
    v.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("KONDO_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BadDifficulty, BadScenario, MalformedMap, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        InfeasiblePrefix,
        Unreachable,
        NotWalkable,
        SamplingExhausted,
        TooLarge,
        DimensionMismatch,
    ) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (AssertionError, InfeasibleVisit) as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except KondoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
