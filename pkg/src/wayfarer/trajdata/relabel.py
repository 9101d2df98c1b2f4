"""Hindsight goal relabeling.

Anchors are uniform over eligible (trajectory, timestep) pairs; the goal
is a later observation of the same trajectory (positives) or a random
observation from another trajectory (negatives).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, UsageError
from .dataset import Dataset, replay_positions

MODE_UNIFORM = "uniform_future"
MODE_FIXED = "fixed_offset"
MODE_FINAL = "trajectory_final"
MODE_NEGATIVE = "negative_mix"


@dataclass(frozen=True)
class RelabelStrategy:
    mode: str
    k: int = 0
    p_neg: float = 0.0
    base: "RelabelStrategy | None" = None

    def validate(self) -> None:
        if self.mode == MODE_FIXED:
            if self.k < 1:
                raise ConfigError("fixed_offset needs k >= 1")
        elif self.mode == MODE_NEGATIVE:
            if not 0.0 <= self.p_neg <= 1.0:
                raise ConfigError("p_neg outside [0, 1]")
            if self.base is None or self.base.mode == MODE_NEGATIVE:
                raise ConfigError("negative_mix needs a non-negative base strategy")
            self.base.validate()
        elif self.mode not in (MODE_UNIFORM, MODE_FINAL):
            raise ConfigError(f"unknown relabel mode {self.mode!r}")


def uniform_future() -> RelabelStrategy:
    return RelabelStrategy(MODE_UNIFORM)


def fixed_offset(k: int) -> RelabelStrategy:
    return RelabelStrategy(MODE_FIXED, k=k)


def trajectory_final() -> RelabelStrategy:
    return RelabelStrategy(MODE_FINAL)


def negative_mix(base: RelabelStrategy, p_neg: float) -> RelabelStrategy:
    return RelabelStrategy(MODE_NEGATIVE, p_neg=p_neg, base=base)


@dataclass(frozen=True)
class RelabeledSample:
    o_t: np.ndarray
    a_t: int
    o_g: np.ndarray
    delta_t: int  # steps to goal; 0 for negatives (meaningless there)
    is_negative: bool
    traj_index: int
    t_index: int
    goal_traj_index: int
    goal_t_index: int


@dataclass
class RelabeledArrays:
    """Batch layout of RelabeledSamples for the training loops."""

    obs: np.ndarray  # (B, L)
    actions: np.ndarray  # (B,)
    goals: np.ndarray  # (B, L)
    delta: np.ndarray  # (B,) int64, 0 on negatives
    negative: np.ndarray  # (B,) bool
    anchor_traj: np.ndarray
    anchor_t: np.ndarray
    goal_traj: np.ndarray
    goal_t: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)


def _base_mode(strategy: RelabelStrategy) -> RelabelStrategy:
    return strategy.base if strategy.mode == MODE_NEGATIVE else strategy


def eligible_anchors(dataset: Dataset, strategy: RelabelStrategy, need_next: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """All (trajectory, t) pairs the strategy may anchor at. need_next
    additionally requires o_{t+1} to exist for Bellman transitions."""
    base = _base_mode(strategy)
    traj_idx, t_idx = [], []
    for i, traj in enumerate(dataset.trajectories):
        h = len(traj)
        if base.mode == MODE_FIXED:
            hi = h - base.k
        else:
            hi = h - 1
        if need_next:
            hi = min(hi, h - 1)
        if hi <= 0:
            continue
        traj_idx.append(np.full(hi, i, dtype=np.int64))
        t_idx.append(np.arange(hi, dtype=np.int64))
    if not traj_idx:
        raise UsageError("no eligible relabel anchors in dataset")
    return np.concatenate(traj_idx), np.concatenate(t_idx)


def _gather_obs(dataset: Dataset, traj: np.ndarray, t: np.ndarray) -> np.ndarray:
    width = dataset.obs_width()
    out = np.empty((len(traj), width), dtype=np.float64)
    for row, (i, ti) in enumerate(zip(traj, t)):
        out[row] = dataset.trajectories[i].observations[ti]
    return out


def sample_relabeled_arrays(
    dataset: Dataset,
    strategy: RelabelStrategy,
    batch_size: int,
    rng: np.random.Generator,
    need_next: bool = False,
) -> RelabeledArrays:
    dataset.require_nonempty()
    strategy.validate()
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if strategy.mode == MODE_NEGATIVE and strategy.p_neg > 0.0 and len(dataset) < 2:
        raise ConfigError("negative_mix needs at least 2 trajectories")

    all_traj, all_t = eligible_anchors(dataset, strategy, need_next=need_next)
    pick = rng.integers(len(all_traj), size=batch_size)
    a_traj = all_traj[pick]
    a_t = all_t[pick]
    lengths = np.array([len(tr) for tr in dataset.trajectories], dtype=np.int64)

    base = _base_mode(strategy)
    if base.mode == MODE_UNIFORM:
        g_t = rng.integers(a_t + 1, lengths[a_traj])
    elif base.mode == MODE_FIXED:
        g_t = a_t + base.k
    else:
        g_t = lengths[a_traj] - 1
    g_traj = a_traj.copy()
    negative = np.zeros(batch_size, dtype=bool)

    if strategy.mode == MODE_NEGATIVE and strategy.p_neg > 0.0:
        negative = rng.random(batch_size) < strategy.p_neg
        n_neg = int(negative.sum())
        if n_neg:
            other = rng.integers(len(dataset) - 1, size=n_neg)
            other += other >= a_traj[negative]
            g_traj[negative] = other
            g_t[negative] = rng.integers(lengths[other])

    delta = np.where(negative, 0, g_t - a_t)
    return RelabeledArrays(
        obs=_gather_obs(dataset, a_traj, a_t),
        actions=np.array([dataset.trajectories[i].actions[t] for i, t in zip(a_traj, a_t)], dtype=np.int64),
        goals=_gather_obs(dataset, g_traj, g_t),
        delta=delta.astype(np.int64),
        negative=negative,
        anchor_traj=a_traj,
        anchor_t=a_t,
        goal_traj=g_traj,
        goal_t=g_t,
    )


def sample_relabeled(
    dataset: Dataset,
    strategy: RelabelStrategy,
    batch_size: int,
    rng: np.random.Generator,
) -> list[RelabeledSample]:
    arrays = sample_relabeled_arrays(dataset, strategy, batch_size, rng)
    return [
        RelabeledSample(
            o_t=arrays.obs[i],
            a_t=int(arrays.actions[i]),
            o_g=arrays.goals[i],
            delta_t=int(arrays.delta[i]),
            is_negative=bool(arrays.negative[i]),
            traj_index=int(arrays.anchor_traj[i]),
            t_index=int(arrays.anchor_t[i]),
            goal_traj_index=int(arrays.goal_traj[i]),
            goal_t_index=int(arrays.goal_t[i]),
        )
        for i in range(len(arrays))
    ]


def sample_transitions(
    dataset: Dataset,
    strategy: RelabelStrategy,
    batch_size: int,
    rng: np.random.Generator,
) -> tuple[RelabeledArrays, np.ndarray]:
    """Relabeled batch plus o_{t+1} for Bellman targets."""
    arrays = sample_relabeled_arrays(dataset, strategy, batch_size, rng, need_next=True)
    next_obs = _gather_obs(dataset, arrays.anchor_traj, arrays.anchor_t + 1)
    return arrays, next_obs


def sample_event_windows(
    dataset: Dataset,
    k_e: int,
    batch_size: int,
    rng: np.random.Generator,
) -> dict[str, np.ndarray]:
    """Batches of (o_t, action sequence, recorded per-step event labels)."""
    dataset.require_nonempty()
    if k_e < 1:
        raise ConfigError("event horizon must be >= 1")
    traj_idx, t_idx = [], []
    for i, traj in enumerate(dataset.trajectories):
        hi = len(traj) - k_e + 1
        if hi > 0:
            traj_idx.append(np.full(hi, i, dtype=np.int64))
            t_idx.append(np.arange(hi, dtype=np.int64))
    if not traj_idx:
        raise UsageError(f"no trajectory long enough for event horizon {k_e}")
    all_traj = np.concatenate(traj_idx)
    all_t = np.concatenate(t_idx)
    pick = rng.integers(len(all_traj), size=batch_size)
    a_traj = all_traj[pick]
    a_t = all_t[pick]

    n_actions = 4
    actions = np.zeros((batch_size, k_e), dtype=np.int64)
    onehot = np.zeros((batch_size, k_e * n_actions), dtype=np.float64)
    collision = np.zeros((batch_size, k_e), dtype=np.float64)
    bumpiness = np.zeros((batch_size, k_e), dtype=np.float64)
    disengagement = np.zeros((batch_size, k_e), dtype=np.float64)
    for row, (i, t) in enumerate(zip(a_traj, a_t)):
        traj = dataset.trajectories[i]
        sl = slice(t, t + k_e)
        acts = traj.actions[sl]
        actions[row] = acts
        onehot[row, np.arange(k_e) * n_actions + acts] = 1.0
        collision[row] = traj.collision[sl]
        bumpiness[row] = traj.bumpiness[sl]
        disengagement[row] = traj.disengagement[sl]
    return {
        "obs": _gather_obs(dataset, a_traj, a_t),
        "actions": actions,
        "action_onehot": onehot,
        "collision": collision,
        "bumpiness": bumpiness,
        "disengagement": disengagement,
        "anchor_traj": a_traj,
        "anchor_t": a_t,
    }


def replay_reaches_goal(dataset: Dataset, arrays: RelabeledArrays) -> np.ndarray:
    """For each positive sample, replay the recorded actions from the
    anchor's true cell and test arrival at the goal's true cell."""
    ok = np.ones(len(arrays), dtype=bool)
    for i in range(len(arrays)):
        if arrays.negative[i]:
            continue
        traj = dataset.trajectories[arrays.anchor_traj[i]]
        t0 = int(arrays.anchor_t[i])
        t1 = int(arrays.goal_t[i])
        pos = replay_positions(
            traj.eval_positions[t0],
            traj.actions[t0:t1],
            traj.collision[t0:t1],
            traj.disengagement[t0:t1],
        )
        end = pos[-1] if len(pos) else traj.eval_positions[t0]
        ok[i] = bool(np.array_equal(end, traj.eval_positions[t1]))
    return ok
