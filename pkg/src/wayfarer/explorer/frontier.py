"""Goal-directed search in unmapped worlds.

The agent grows a mental map while moving: every step the current
observation is offered to the sparse admission rule, then the loop either
follows a plan to the goal, heads for a fringe landmark, or burns a few
steps chasing a sampled latent subgoal. Fringe choice is either the
lowest visit count or a learned overhead heuristic discounted by travel
cost.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..mentalmap.graph import MentalMap, NavConfig
from ..mentalmap.navigate import OUTCOME_BUDGET, OUTCOME_REACHED, OUTCOME_TRAPPED, distance_fn, pick_action
from ..trajdata.dataset import Trajectory
from ..worldsim.sim import Action, AgentState, reached, render_observation, step
from ..worldsim.world import World
from .overhead import DEFAULT_GPS_SIGMA, GpsReading, OverheadMap, gps_read


@dataclass
class ExploreConfig:
    budget: int = 5000
    c_fringe: int = 2
    subgoal_horizon: int = 10
    alpha: float = 0.1
    n_neg: int = 16

    def validate(self) -> None:
        if self.budget < 1 or self.c_fringe < 1 or self.subgoal_horizon < 1:
            raise ConfigError("budget, c_fringe, subgoal_horizon must be >= 1")
        if self.alpha <= 0 or self.n_neg <= 0:
            raise ConfigError("alpha and n_neg must be positive")


@dataclass
class ModelBundle:
    policy: object
    distance: object
    encoder: object
    events: object = None

    def dfn(self):
        return distance_fn(self.distance)


@dataclass
class ExploreResult:
    mmap: MentalMap
    outcome: str
    steps: int
    trajectory: Trajectory | None
    trace: list[dict]
    gps_table: dict[int, GpsReading] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.outcome == OUTCOME_REACHED


def physical_frontier_score(
    mmap: MentalMap,
    landmark_id: int,
    current_id: int,
    heuristic,
    goal_gps: GpsReading,
    alpha: float,
    *,
    overhead: OverheadMap | None = None,
    gps_table: dict[int, GpsReading] | None = None,
    graph_costs: np.ndarray | None = None,
) -> float:
    """Heuristic promise minus alpha times graph travel cost; unreachable
    landmarks score -inf. A missing heuristic scores every location 0."""
    if graph_costs is None:
        graph_costs = mmap.graph_costs_from(current_id)
    cost = float(graph_costs[landmark_id])
    if not np.isfinite(cost):
        return float("-inf")
    if heuristic is None:
        h = 0.0
    else:
        reading = gps_table[landmark_id]
        h = float(heuristic.score(overhead, reading, goal_gps))
    return h - alpha * cost


def _count_fringe(mmap: MentalMap, current_id: int, config: ExploreConfig, ctx: dict) -> int | None:
    counts = np.array([lm.visit_count for lm in mmap.landmarks])
    return int(np.argmin(counts))


def _heuristic_fringe(mmap: MentalMap, current_id: int, config: ExploreConfig, ctx: dict) -> int | None:
    graph_costs = mmap.graph_costs_from(current_id)
    best_id = None
    best_score = float("-inf")
    for lm in mmap.landmarks:
        if lm.visit_count > config.c_fringe:
            continue
        s = physical_frontier_score(
            mmap,
            lm.id,
            current_id,
            ctx["heuristic"],
            ctx["goal_gps"],
            config.alpha,
            overhead=ctx["overhead"],
            gps_table=ctx["gps_table"],
            graph_costs=graph_costs,
        )
        if np.isfinite(s) and s > best_score:
            best_score = s
            best_id = lm.id
    if best_id is None:
        return _count_fringe(mmap, current_id, config, ctx)
    return best_id


_DECIDE = "decide"
_PURSUE = "pursue"
_SUBGOAL = "subgoal"


def _run_search(
    world: World,
    models: ModelBundle,
    goal_obs: np.ndarray,
    config: ExploreConfig,
    nav: NavConfig,
    rng,
    start: tuple[int, int],
    radius: int,
    fringe_chooser,
    ctx: dict,
    sigma_gps: float,
) -> ExploreResult:
    config.validate()
    nav.validate()
    dfn = models.dfn()
    goal_obs = np.asarray(goal_obs, dtype=np.float64).reshape(-1)
    state = AgentState(int(start[0]), int(start[1]), trapped=False)
    obs = render_observation(world, state, radius)

    mmap = MentalMap()
    gps_table: dict[int, GpsReading] = ctx.setdefault("gps_table", {})
    goal_dist: list[float] = []  # D(landmark, goal), cached at admission

    observations: list[np.ndarray] = []
    actions_taken: list[int] = []
    ev = {"collision": [], "trapped": [], "disengagement": [], "bumpiness": []}
    positions: list[tuple[int, int]] = []
    trace: list[dict] = []

    phase = _DECIDE
    waypoints: list[int] = []
    wp_index = 0
    pursuing_goal = False
    fringe_target: int | None = None
    plan_age = 0
    pursuit_cap = 0
    subgoal_left = 0
    z = None
    outcome = OUTCOME_BUDGET
    steps = 0

    while steps < config.budget:
        if reached(obs, goal_obs):
            outcome = OUTCOME_REACHED
            break

        d_out, d_in = mmap.distances_to(obs, dfn)
        dup = mmap.find_duplicate(obs)
        if dup is not None:
            admitted, localized = False, dup
        else:
            admitted, new_id = mmap.admit_with_distances(obs, d_out, d_in, nav, eval_position=(state.x, state.y))
            if admitted:
                gps_table[new_id] = gps_read((state.x, state.y), rng, sigma=sigma_gps, world_width=world.terrain.shape[1], world_height=world.terrain.shape[0])
                goal_dist.append(float(dfn(np.atleast_2d(obs), np.atleast_2d(goal_obs))[0]))
                self_d = float(dfn(np.atleast_2d(obs), np.atleast_2d(obs))[0])
                d_out = np.append(d_out, self_d)
                d_in = np.append(d_in, self_d)
                localized = new_id
            else:
                localized = int(np.argmin(d_out + d_in))
        mmap.landmarks[localized].visit_count += 1

        if phase == _PURSUE:
            while wp_index < len(waypoints):
                wp_obs = mmap.landmarks[waypoints[wp_index]].observation
                if float(dfn(np.atleast_2d(obs), np.atleast_2d(wp_obs))[0]) <= nav.tau_wp:
                    wp_index += 1
                else:
                    break
            if pursuing_goal:
                if plan_age >= nav.replan_period:
                    phase = _DECIDE
            else:
                if wp_index >= len(waypoints) or localized == fringe_target:
                    phase = _SUBGOAL
                    subgoal_left = config.subgoal_horizon
                    z = models.encoder.sample_subgoal(rng)
                elif plan_age >= pursuit_cap:
                    phase = _SUBGOAL
                    subgoal_left = config.subgoal_horizon
                    z = models.encoder.sample_subgoal(rng)
        elif phase == _SUBGOAL and subgoal_left <= 0:
            phase = _DECIDE

        if phase == _DECIDE:
            direct = float(dfn(np.atleast_2d(obs), np.atleast_2d(goal_obs))[0])
            plan = mmap.plan_given(d_out, np.asarray(goal_dist), direct, nav)
            if plan.found:
                phase = _PURSUE
                pursuing_goal = True
                waypoints = plan.waypoints
                wp_index = 0
                plan_age = 0
                pursuit_cap = config.budget
            else:
                fringe_target = fringe_chooser(mmap, localized, config, ctx)
                fplan = None
                if fringe_target is not None and fringe_target != localized:
                    fplan = mmap.plan_to_landmark(d_out, fringe_target, nav)
                if fplan is not None and fplan.found:
                    phase = _PURSUE
                    pursuing_goal = False
                    waypoints = fplan.waypoints
                    wp_index = 0
                    plan_age = 0
                    # stall guard: abandon the fringe run if it drags on
                    pursuit_cap = max(2 * nav.replan_period, int(2 * fplan.cost) + 4)
                else:
                    phase = _SUBGOAL
                    subgoal_left = config.subgoal_horizon
                    z = models.encoder.sample_subgoal(rng)
            agent_gps = gps_read((state.x, state.y), rng, sigma=sigma_gps, world_width=world.terrain.shape[1], world_height=world.terrain.shape[0])
            trace.append(
                {
                    "step": steps,
                    "agent_gps": [agent_gps.x, agent_gps.y],
                    "landmarks": len(mmap),
                    "planned_path": list(waypoints) if phase == _PURSUE else [],
                    "phase": phase if phase != _PURSUE else ("goal" if pursuing_goal else f"fringe:{fringe_target}"),
                }
            )

        if phase == _PURSUE:
            if wp_index < len(waypoints):
                target_obs = mmap.landmarks[waypoints[wp_index]].observation
            else:
                target_obs = goal_obs
            action = pick_action(models.policy, obs, target_obs, nav, rng, models.events)
        else:
            probs = np.asarray(models.encoder.action_probabilities(obs, z), dtype=np.float64).reshape(-1)
            action = int(rng.choice(len(probs), p=probs / probs.sum()))
            subgoal_left -= 1

        positions.append((state.x, state.y))
        observations.append(obs)
        actions_taken.append(action)
        state, event = step(world, state, Action(action), rng, monitor=False)
        ev["collision"].append(event.collision)
        ev["trapped"].append(event.trapped)
        ev["disengagement"].append(event.disengagement)
        ev["bumpiness"].append(event.bumpiness)
        steps += 1
        plan_age += 1
        obs = render_observation(world, state, radius)
        if event.trapped:
            outcome = OUTCOME_TRAPPED
            break
    else:
        if reached(obs, goal_obs):
            outcome = OUTCOME_REACHED

    trajectory = None
    if steps > 0:
        trajectory = Trajectory(
            observations=np.asarray(observations, dtype=np.float64),
            actions=np.asarray(actions_taken, dtype=np.uint8),
            collision=np.asarray(ev["collision"], dtype=bool),
            trapped=np.asarray(ev["trapped"], dtype=bool),
            disengagement=np.asarray(ev["disengagement"], dtype=bool),
            bumpiness=np.asarray(ev["bumpiness"], dtype=np.float64),
            eval_positions=np.asarray(positions, dtype=np.int64),
            world_id=world.world_id,
        )
    trace.append({"step": steps, "landmarks": len(mmap), "outcome": outcome})
    return ExploreResult(mmap=mmap, outcome=outcome, steps=steps, trajectory=trajectory, trace=trace, gps_table=gps_table)


def explore_to_goal(
    world: World,
    models: ModelBundle,
    goal_obs: np.ndarray,
    config: ExploreConfig,
    rng,
    start: tuple[int, int],
    nav: NavConfig | None = None,
    radius: int = 2,
    sigma_gps: float = DEFAULT_GPS_SIGMA,
) -> ExploreResult:
    """Count-based frontier search: fringe is the least-visited landmark."""
    return _run_search(world, models, goal_obs, config, nav or NavConfig(), rng, start, radius, _count_fringe, {}, sigma_gps)


def navigate_with_hints(
    world: World,
    models: ModelBundle,
    heuristic,
    overhead: OverheadMap,
    goal_obs: np.ndarray,
    goal_gps: GpsReading,
    config: ExploreConfig,
    rng,
    start: tuple[int, int],
    nav: NavConfig | None = None,
    radius: int = 2,
    sigma_gps: float = DEFAULT_GPS_SIGMA,
) -> ExploreResult:
    """Same loop with fringe selection scored by the overhead heuristic
    discounted by graph travel cost."""
    ctx = {"heuristic": heuristic, "overhead": overhead, "goal_gps": goal_gps}
    return _run_search(world, models, goal_obs, config, nav or NavConfig(), rng, start, radius, _heuristic_fringe, ctx, sigma_gps)


def write_trace(path, trace: list[dict]) -> None:
    with open(path, "w") as fh:
        for row in trace:
            fh.write(json.dumps(row) + "\n")
