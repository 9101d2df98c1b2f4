"""End-to-end runs: world -> dataset -> models -> map -> evaluation.

Pure functions over RunConfig; file placement lives in the CLI. Every
metric row carries the seed and config hash that produced it.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .errors import ConfigError
from .explorer.frontier import ExploreResult, ModelBundle, explore_to_goal, navigate_with_hints
from .explorer.heuristic import OverheadHeuristic, TraversalRecord, train_heuristic
from .explorer.overhead import GpsReading, build_overhead, gps_read
from .mentalmap.graph import MentalMap, NavConfig
from .mentalmap.navigate import OUTCOME_NO_PATH, OUTCOME_REACHED, OUTCOME_TRAPPED, build_map_from_dataset, navigate
from .seeding import CORRUPT, EVAL, EXPLORE, GPS, INIT, POLICY, stream
from .skills.models import DistanceRegressor, EventPredictor, GoalConditionedPolicy, QFunction, SubgoalEncoder
from .trajdata.dataset import Dataset, make_provenance
from .trajdata.relabel import MODE_NEGATIVE, RelabelStrategy
from .worldsim.oracles import geometric_baseline_plan, oracle_distance, safe_mask, shortest_path
from .worldsim.sim import Action, AgentState, DELTAS, StickyWalk, observe_cell, random_start, run_episode, step, uniform_walk
from .worldsim.suites import (
    make_explore_world,
    make_grass_shortcut_world,
    make_maze_world,
    make_mud_trap_world,
    make_training_world,
    sample_reachable_pair,
)
from .worldsim.world import World, WorldSpec, generate_world

_ACTION_OF_DELTA = {delta: Action(a) for a, delta in DELTAS.items()}


def make_world(config: RunConfig) -> World:
    w = config.section("world")
    seed = config.seed
    kind = w["kind"]
    if kind == "generated":
        spec = WorldSpec(
            width=w["width"],
            height=w["height"],
            densities=dict(w["densities"]),
            blob_scale=w["blob_scale"],
            seed=seed,
        )
        return generate_world(spec)
    if kind == "grass_shortcut":
        return make_grass_shortcut_world(seed)
    if kind == "mud_trap":
        return make_mud_trap_world(seed)
    if kind == "maze":
        return make_maze_world(seed, nodes=w["maze_nodes"])
    return make_explore_world(seed, size=w["width"])


def collect_dataset(world: World, config: RunConfig) -> Dataset:
    c = config.section("collection")
    init_rng = stream(config.seed, INIT)
    walk_rng = stream(config.seed, POLICY)
    trajectories = []
    for _ in range(c["episodes"]):
        start = random_start(world, init_rng)
        policy = StickyWalk(c["p_repeat"]) if c["policy"] == "sticky" else uniform_walk
        trajectories.append(
            run_episode(world, policy, start, c["horizon"], walk_rng, monitor=c["monitor"], radius=c["radius"])
        )
    prov = make_provenance(
        [config.seed],
        c["policy"],
        extra={"config_hash": config.hash, "episodes": c["episodes"], "world_id": world.world_id},
    )
    return Dataset(trajectories=trajectories, provenance=prov)


def _positive_part(strategy: RelabelStrategy) -> RelabelStrategy:
    return strategy.base if strategy.mode == MODE_NEGATIVE else strategy


def train_models(dataset: Dataset, config: RunConfig) -> dict:
    t = config.section("training")
    strategy = config.strategy()
    pos_strategy = _positive_part(strategy)
    seed = config.seed
    common = dict(hidden=t["hidden"], learning_rate=t["learning_rate"], batch_size=t["batch_size"], steps=t["steps"], random_state=seed)
    models: dict = {}
    q_model = None
    if t["objective"] in ("expected_q", "awac"):
        q_model = QFunction(mode=t["q_mode"], gamma=t["gamma"], strategy=pos_strategy, target_refresh=t["target_refresh"], **common).fit(dataset)
        models["q"] = q_model
    for name in t["models"]:
        if name == "policy":
            models["policy"] = GoalConditionedPolicy(
                objective=t["objective"],
                strategy=strategy,
                gamma=t["gamma"],
                awac_lambda=t["awac_lambda"],
                w_max=t["w_max"],
                target_refresh=t["target_refresh"],
                **common,
            ).fit(dataset, q_model=q_model)
        elif name == "distance":
            models["distance"] = DistanceRegressor(strategy=pos_strategy, **common).fit(dataset)
        elif name == "events":
            models["events"] = EventPredictor(horizon=t["event_horizon"], **common).fit(dataset)
        elif name == "encoder":
            models["encoder"] = SubgoalEncoder(latent_dim=t["latent_dim"], beta=t["vib_beta"], strategy=pos_strategy, **common).fit(dataset)
    return models


def build_map(dataset: Dataset, models: dict, config: RunConfig) -> MentalMap:
    if "distance" not in models:
        raise ConfigError("map building needs a trained distance model; add 'distance' to training.models")
    return build_map_from_dataset(dataset, models["distance"], config.nav_config())


@dataclass
class MetricsReport:
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"summary": self.summary, "rows": self.rows}, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path) -> None:
        cols = sorted({k for row in self.rows for k in row})
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols)
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row)


def _traj_counts(trajectory) -> tuple[int, int, int]:
    if trajectory is None:
        return 0, 0, 0
    return int(trajectory.collision.sum()), int(trajectory.trapped.sum()), int(trajectory.disengagement.sum())


def execute_plan(world: World, cells: list, rng) -> dict:
    """Walk a cell path open-loop; traps can cut it short."""
    state = AgentState(cells[0][0], cells[0][1], trapped=False)
    collisions = traps = walked = 0
    for nxt in cells[1:]:
        delta = (nxt[0] - state.x, nxt[1] - state.y)
        state, event = step(world, state, _ACTION_OF_DELTA[delta], rng)
        walked += 1
        collisions += int(event.collision)
        traps += int(event.trapped)
        if event.trapped:
            break
    return {
        "final": (state.x, state.y),
        "steps": walked,
        "collisions": collisions,
        "trapped": bool(traps),
    }


def _summarize(rows: list, runner: str, seed: int, config_hash: str) -> dict:
    mine = [r for r in rows if r["runner"] == runner]
    n = len(mine)
    successes = [r for r in mine if r["success"]]
    ratios = sorted(r["ratio_vs_safe"] for r in successes if r["ratio_vs_safe"] is not None)
    total_steps = sum(r["steps"] for r in mine)
    return {
        "runner": runner,
        "runs": n,
        "success_rate": len(successes) / n if n else 0.0,
        "median_path_ratio": ratios[len(ratios) // 2] if ratios else None,
        "trap_rate": sum(r["outcome"] == OUTCOME_TRAPPED for r in mine) / n if n else 0.0,
        "collision_rate": sum(r["collisions"] for r in mine) / total_steps if total_steps else 0.0,
        "median_steps": float(np.median([r["steps"] for r in mine])) if mine else None,
        "wall_clock_s": sum(r["wall_clock_s"] for r in mine),
        "seed": seed,
        "config_hash": config_hash,
    }


def run_navigation_eval(
    world: World,
    models: dict,
    mmap: MentalMap,
    config: RunConfig,
    runners: tuple = ("learned", "geometric"),
) -> MetricsReport:
    """Paired evaluation on sampled (start, goal) cells: learned navigator
    against the obstacle-geometry planner, both scored against BFS oracles."""
    nav = config.nav_config()
    n = config.section("navigation")
    radius = config.section("collection")["radius"]
    seed = config.seed
    chash = config.hash
    pair_rng = stream(seed, EVAL)
    rows = []
    event_model = models.get("events") if nav.veto_threshold is not None else None
    for i in range(n["pairs"]):
        start, goal, bfs_safe = sample_reachable_pair(world, pair_rng, n["pair_min_steps"], n["pair_max_steps"])
        reckless = oracle_distance(world, start, goal, reckless=True)
        goal_obs = observe_cell(world, goal[0], goal[1], radius)
        base = {
            "pair": i,
            "start": list(start),
            "goal": list(goal),
            "bfs_safe": bfs_safe,
            "bfs_reckless": reckless,
            "seed": seed,
            "config_hash": chash,
        }
        if "learned" in runners:
            t0 = time.perf_counter()
            res = navigate(world, models["policy"], models["distance"], mmap, goal_obs, nav, stream(seed, EVAL, index=1000 + i), start, radius=radius, event_model=event_model)
            wall = time.perf_counter() - t0
            final = tuple(int(v) for v in res.positions[-1])
            success = res.outcome == OUTCOME_REACHED and final == tuple(goal)
            collisions, _, disengagements = _traj_counts(res.trajectory)
            rows.append(
                base
                | {
                    "runner": "learned",
                    "outcome": res.outcome,
                    "success": bool(success),
                    "steps": res.steps,
                    "ratio_vs_safe": res.steps / bfs_safe if success and bfs_safe > 0 else None,
                    "collisions": collisions,
                    "disengagements": disengagements,
                    "replans": res.replans,
                    "wall_clock_s": wall,
                }
            )
        if "geometric" in runners:
            t0 = time.perf_counter()
            plan = geometric_baseline_plan(world, start, goal)
            if plan is None:
                rows.append(
                    base
                    | {
                        "runner": "geometric",
                        "outcome": OUTCOME_NO_PATH,
                        "success": False,
                        "steps": 0,
                        "ratio_vs_safe": None,
                        "collisions": 0,
                        "disengagements": 0,
                        "replans": 0,
                        "wall_clock_s": time.perf_counter() - t0,
                    }
                )
            else:
                result = execute_plan(world, plan, stream(seed, EVAL, index=2000 + i))
                success = not result["trapped"] and result["final"] == tuple(goal)
                outcome = OUTCOME_TRAPPED if result["trapped"] else (OUTCOME_REACHED if success else "diverged")
                rows.append(
                    base
                    | {
                        "runner": "geometric",
                        "outcome": outcome,
                        "success": bool(success),
                        "steps": result["steps"],
                        "ratio_vs_safe": result["steps"] / bfs_safe if success and bfs_safe > 0 else None,
                        "collisions": result["collisions"],
                        "disengagements": 0,
                        "replans": 0,
                        "wall_clock_s": time.perf_counter() - t0,
                    }
                )
    rows.sort(key=lambda r: (r["runner"], r["pair"]))
    summary = {runner: _summarize(rows, runner, seed, chash) for runner in runners}
    return MetricsReport(rows=rows, summary=summary)


def heuristic_training_records(config: RunConfig) -> list:
    """Successful traversals for heuristic training, taken from safe BFS
    routes on freshly generated worlds (never the evaluation worlds)."""
    e = config.section("exploration")
    records = []
    for k in range(e["heuristic_worlds"]):
        wseed = config.seed + e["world_seed_offset"] + 500_000 + k
        world = make_training_world(wseed, size=e["world_size"])
        corrupt_rng = stream(wseed, CORRUPT)
        overhead = build_overhead(world, corrupt_rng, factor=e["downsample"], p_corrupt=e["p_corrupt"])
        pair_rng = stream(wseed, EVAL, index=7)
        gps_rng = stream(wseed, GPS)
        free = safe_mask(world)
        for _ in range(e["heuristic_paths"]):
            try:
                start, goal, _ = sample_reachable_pair(world, pair_rng, 15, 3 * e["world_size"])
            except ConfigError:
                continue
            path = shortest_path(world, start, goal, free)
            if path is None:
                continue
            goal_gps = gps_read(goal, gps_rng, sigma=e["sigma_gps"], world_width=world.terrain.shape[1], world_height=world.terrain.shape[0])
            records.append(TraversalRecord(overhead=overhead, goal_gps=goal_gps, path_cells=np.asarray(path, dtype=np.int64)))
    if not records:
        raise ConfigError("no heuristic training records could be generated; loosen exploration settings")
    return records


def fit_exploration_heuristic(config: RunConfig) -> OverheadHeuristic:
    e = config.section("exploration")
    records = heuristic_training_records(config)
    rng = stream(config.seed, EXPLORE, index=99)
    return train_heuristic(
        records,
        config.explore_config(),
        rng,
        patch_radius=e["patch_radius"],
        sigma_gps=e["sigma_gps"],
        steps=e["heuristic_train_steps"],
        random_state=config.seed,
    )


def run_exploration(config: RunConfig, models: dict, heuristic: OverheadHeuristic | None = None) -> tuple[MetricsReport, list]:
    """Explore novel worlds; after a successful first traversal, re-run
    the same pair with the grown map to measure reuse."""
    e = config.section("exploration")
    nav = config.nav_config()
    explore_cfg = config.explore_config()
    radius = config.section("collection")["radius"]
    seed = config.seed
    chash = config.hash
    bundle = ModelBundle(
        policy=models["policy"],
        distance=models["distance"],
        encoder=models.get("encoder"),
        events=None,
    )
    if bundle.encoder is None:
        raise ConfigError("exploration needs a trained latent-subgoal model; add 'encoder' to training.models")
    rows = []
    artifacts = []
    for r in range(e["runs"]):
        wseed = config.seed + e["world_seed_offset"] + r
        world = make_explore_world(wseed, size=e["world_size"])
        pair_rng = stream(wseed, EVAL, index=3)
        start, goal, bfs_safe = sample_reachable_pair(world, pair_rng, e["world_size"] // 2, 4 * e["world_size"])
        goal_obs = observe_cell(world, goal[0], goal[1], radius)
        run_rng = stream(seed, EXPLORE, index=r)
        t0 = time.perf_counter()
        if heuristic is not None:
            corrupt_rng = stream(wseed, CORRUPT)
            overhead = build_overhead(world, corrupt_rng, factor=e["downsample"], p_corrupt=e["p_corrupt"])
            goal_gps = gps_read(goal, stream(wseed, GPS, index=1), sigma=e["sigma_gps"], world_width=world.terrain.shape[1], world_height=world.terrain.shape[0])
            res = navigate_with_hints(world, bundle, heuristic, overhead, goal_obs, goal_gps, explore_cfg, run_rng, start, nav=nav, radius=radius, sigma_gps=e["sigma_gps"])
        else:
            res = explore_to_goal(world, bundle, goal_obs, explore_cfg, run_rng, start, nav=nav, radius=radius, sigma_gps=e["sigma_gps"])
        wall = time.perf_counter() - t0
        second_steps = None
        second_outcome = None
        if res.outcome == OUTCOME_REACHED:
            nav2 = NavConfig(
                tau_edge=nav.tau_edge,
                tau_sparse=nav.tau_sparse,
                tau_wp=nav.tau_wp,
                replan_period=nav.replan_period,
                budget=explore_cfg.budget,
                greedy=nav.greedy,
                veto_threshold=nav.veto_threshold,
            )
            res2 = navigate(world, bundle.policy, bundle.distance, res.mmap, goal_obs, nav2, stream(seed, EXPLORE, index=10_000 + r), start, radius=radius)
            second_steps = res2.steps
            second_outcome = res2.outcome
        collisions, _, _ = _traj_counts(res.trajectory)
        rows.append(
            {
                "runner": "hinted" if heuristic is not None else "frontier",
                "run": r,
                "world_seed": wseed,
                "start": list(start),
                "goal": list(goal),
                "bfs_safe": bfs_safe,
                "outcome": res.outcome,
                "success": res.outcome == OUTCOME_REACHED,
                "steps": res.steps,
                "landmarks": len(res.mmap),
                "collisions": collisions,
                "second_outcome": second_outcome,
                "second_steps": second_steps,
                "wall_clock_s": wall,
                "seed": seed,
                "config_hash": chash,
            }
        )
        artifacts.append(res)
    runner = "hinted" if heuristic is not None else "frontier"
    n = len(rows)
    successes = [r for r in rows if r["success"]]
    reuse = [r["second_steps"] / r["steps"] for r in successes if r["second_steps"] is not None and r["steps"] > 0 and r["second_outcome"] == OUTCOME_REACHED]
    summary = {
        runner: {
            "runs": n,
            "success_rate": len(successes) / n if n else 0.0,
            "median_steps": float(np.median([r["steps"] for r in rows])) if rows else None,
            "median_reuse_ratio": float(np.median(reuse)) if reuse else None,
            "wall_clock_s": sum(r["wall_clock_s"] for r in rows),
            "seed": seed,
            "config_hash": chash,
        }
    }
    return MetricsReport(rows=rows, summary=summary), artifacts
