"""Goal-reaching control loop over a mental map.

Plans through the landmark graph, tracks waypoints, lets the policy pick
actions toward the active waypoint, and optionally vetoes actions whose
predicted immediate disengagement risk crosses a threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..trajdata.dataset import Trajectory
from ..worldsim.sim import Action, AgentState, reached, render_observation, step
from ..worldsim.world import World
from .graph import MentalMap, NavConfig, PlanResult, STATUS_NO_PATH

OUTCOME_REACHED = "reached"
OUTCOME_BUDGET = "budget_exhausted"
OUTCOME_TRAPPED = "trapped"
OUTCOME_NO_PATH = "no_path"


@dataclass
class NavResult:
    outcome: str
    steps: int
    trajectory: Trajectory | None
    replans: int
    positions: np.ndarray

    @property
    def success(self) -> bool:
        return self.outcome == OUTCOME_REACHED


def distance_fn(distance_model):
    """Adapt a fitted distance regressor to the dfn(a, b) protocol.

    Byte-identical observation pairs are the same place (the signature
    window is unique in practice), so they are clamped to 0 rather than
    handed to the regressor, which never sees zero-offset pairs in
    relabeled data and extrapolates poorly there."""

    def dfn(a, b):
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        b = np.atleast_2d(np.asarray(b, dtype=np.float64))
        out = np.asarray(distance_model.predict(a, b), dtype=np.float64).reshape(-1)
        same = np.all(a == b, axis=-1)
        if same.any():
            out = np.where(same, 0.0, out)
        return out

    return dfn


def pick_action(policy, obs: np.ndarray, target_obs: np.ndarray, config: NavConfig, rng, event_model=None) -> int:
    probs = np.asarray(policy.action_probabilities(obs, target_obs), dtype=np.float64).reshape(-1)
    if event_model is not None and config.veto_threshold is not None:
        horizon = event_model.horizon
        seqs = np.repeat(np.arange(len(Action), dtype=np.int64)[:, None], horizon, axis=1)
        obs_rows = np.broadcast_to(obs, (len(Action), obs.shape[-1]))
        risk = event_model.predict(obs_rows, seqs)["disengagement"][:, 0]
        allowed = risk <= config.veto_threshold
        if allowed.any():
            probs = np.where(allowed, probs, 0.0)
        else:
            # everything looks risky; least-bad action instead of freezing
            probs = np.where(risk <= risk.min(), probs + 1e-12, 0.0)
    if config.greedy:
        return int(np.argmax(probs))
    total = probs.sum()
    if total <= 0:
        return int(np.argmax(probs))
    return int(rng.choice(len(probs), p=probs / total))


def navigate(
    world: World,
    policy,
    distance_model,
    mmap: MentalMap,
    goal_obs: np.ndarray,
    config: NavConfig,
    rng,
    start: tuple[int, int],
    radius: int = 2,
    event_model=None,
    monitor: bool = False,
) -> NavResult:
    """Run the controller until the goal signature is observed, the step
    budget runs out, the agent gets trapped, or planning fails."""
    config.validate()
    dfn = distance_fn(distance_model)
    goal_obs = np.asarray(goal_obs, dtype=np.float64).reshape(-1)
    state = AgentState(int(start[0]), int(start[1]), trapped=False)
    obs = render_observation(world, state, radius)

    observations: list[np.ndarray] = []
    actions: list[int] = []
    events = {"collision": [], "trapped": [], "disengagement": [], "bumpiness": []}
    positions: list[tuple[int, int]] = []

    plan: PlanResult | None = None
    plan_age = 0
    wp_index = 0
    replans = 0
    outcome = OUTCOME_BUDGET
    steps = 0

    while steps < config.budget:
        if reached(obs, goal_obs):
            outcome = OUTCOME_REACHED
            break
        if plan is None or plan_age >= config.replan_period:
            plan = mmap.plan(obs, goal_obs, dfn, config)
            plan_age = 0
            wp_index = 0
            replans += 1
            if plan.status == STATUS_NO_PATH:
                outcome = OUTCOME_NO_PATH
                break
        while wp_index < len(plan.waypoints):
            wp_obs = mmap.landmarks[plan.waypoints[wp_index]].observation
            if float(dfn(np.atleast_2d(obs), np.atleast_2d(wp_obs))[0]) <= config.tau_wp:
                wp_index += 1
            else:
                break
        if wp_index < len(plan.waypoints):
            target_obs = mmap.landmarks[plan.waypoints[wp_index]].observation
        else:
            target_obs = goal_obs
        action = pick_action(policy, obs, target_obs, config, rng, event_model)

        positions.append((state.x, state.y))
        observations.append(obs)
        actions.append(action)
        state, event = step(world, state, Action(action), rng, monitor=monitor)
        events["collision"].append(event.collision)
        events["trapped"].append(event.trapped)
        events["disengagement"].append(event.disengagement)
        events["bumpiness"].append(event.bumpiness)
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
            actions=np.asarray(actions, dtype=np.uint8),
            collision=np.asarray(events["collision"], dtype=bool),
            trapped=np.asarray(events["trapped"], dtype=bool),
            disengagement=np.asarray(events["disengagement"], dtype=bool),
            bumpiness=np.asarray(events["bumpiness"], dtype=np.float64),
            eval_positions=np.asarray(positions, dtype=np.int64),
            world_id=world.world_id,
        )
    final_positions = np.asarray(positions + [(state.x, state.y)], dtype=np.int64)
    return NavResult(outcome=outcome, steps=steps, trajectory=trajectory, replans=replans, positions=final_positions)


def build_map_from_dataset(dataset, distance_model, config: NavConfig) -> MentalMap:
    """Sweep every recorded observation through sparse admission, in
    dataset order, so map construction is reproducible."""
    config.validate()
    dfn = distance_fn(distance_model)
    mmap = MentalMap()
    for traj_index, traj in enumerate(dataset.trajectories):
        for t in range(len(traj)):
            pos = (int(traj.eval_positions[t, 0]), int(traj.eval_positions[t, 1]))
            mmap.add_landmark(traj.observations[t], dfn, config, eval_position=pos)
    return mmap
