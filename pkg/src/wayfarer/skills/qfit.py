"""Fitted Q iteration on relabeled transitions.

Reward is -1 every step until the goal is reached; reaching ends the
episode, so Q(o, a, g) = -1 + gamma * V(o', g) with V(o', g) = 0 when o'
has arrived. Tabular mode runs exact value iteration over the distinct
observations of the dataset and is the oracle-checkable path; mlp mode
does minibatch Bellman regression with a frozen target copy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, UsageError
from ..trajdata.dataset import Dataset
from ..trajdata.relabel import RelabelStrategy, sample_transitions
from ..worldsim.sim import reached, signature_channel
from .losses import N_ACTIONS, build_q, forward_q
from .nets import mlp_backward, mlp_forward
from .params import ParamVector
from .train import TrainConfig, adam_minimize

_TABULAR_CAP = 2048
_UNSEEN = -1e18


@dataclass
class TabularQ:
    obs_matrix: np.ndarray  # (S, L)
    index: dict[bytes, int]
    q: np.ndarray  # (S, A, S) anchor x action x goal
    seen: np.ndarray  # (S, A) bool
    gamma: float

    def state_index(self, obs: np.ndarray) -> int:
        key = np.ascontiguousarray(obs, dtype=np.float64).tobytes()
        if key not in self.index:
            raise UsageError("observation not in the fitted table")
        return self.index[key]

    def lookup(self, obs: np.ndarray) -> int:
        """state_index without the error; -1 for unknown observations."""
        return self.index.get(np.ascontiguousarray(obs, dtype=np.float64).tobytes(), -1)

    def q_values(self, obs: np.ndarray, goal: np.ndarray) -> np.ndarray:
        return self.q[self.state_index(obs), :, self.state_index(goal)].copy()

    def value(self, obs: np.ndarray, goal: np.ndarray) -> float:
        s, g = self.state_index(obs), self.state_index(goal)
        if reached(self.obs_matrix[s], self.obs_matrix[g]):
            return 0.0
        row = self.q[s, :, g]
        usable = self.seen[s]
        if not usable.any():
            return float(row.min())
        return float(row[usable].max())

    def values_by_index(self, s: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Batched state values for index arrays (as from lookup)."""
        s = np.asarray(s, dtype=np.int64)
        g = np.asarray(g, dtype=np.int64)
        rows = self.q[s, :, g]  # (B, A)
        usable = self.seen[s]
        best = np.where(usable, rows, -np.inf).max(axis=1)
        none = ~usable.any(axis=1)
        if none.any():
            best[none] = rows[none].min(axis=1)
        return np.where(s == g, 0.0, best)


def _index_observations(dataset: Dataset) -> tuple[np.ndarray, dict[bytes, int]]:
    index: dict[bytes, int] = {}
    rows = []
    for traj in dataset.trajectories:
        for obs in traj.observations:
            key = np.ascontiguousarray(obs).tobytes()
            if key not in index:
                index[key] = len(rows)
                rows.append(obs)
    return np.array(rows), index


def fit_q_tabular(dataset: Dataset, gamma: float) -> TabularQ:
    """Exact dynamic programming over every distinct observation, with all
    of them as candidate goals. gamma=1 reproduces negated shortest-path
    step counts for reachable pairs; unreachable pairs sink below any
    reachable value."""
    if not 0.0 < gamma <= 1.0:
        raise ConfigError("gamma must be in (0, 1]")
    dataset.require_nonempty()
    obs_matrix, index = _index_observations(dataset)
    n = len(obs_matrix)
    if n > _TABULAR_CAP:
        raise UsageError(f"tabular mode is for small spaces; {n} distinct observations > {_TABULAR_CAP}")

    next_state = np.full((n, N_ACTIONS), -1, dtype=np.int64)
    for traj in dataset.trajectories:
        keys = [np.ascontiguousarray(o).tobytes() for o in traj.observations]
        for t in range(len(traj) - 1):
            s = index[keys[t]]
            a = int(traj.actions[t])
            next_state[s, a] = index[keys[t + 1]]
    seen = next_state >= 0

    sig = signature_channel(obs_matrix)
    arrived = (sig[:, None, :] == sig[None, :, :]).all(axis=2)  # (state, goal)

    ns = np.where(seen, next_state, 0)
    sink = -float(2 * n + 2)
    if gamma == 1.0:
        # Layered shortest-path relaxation to the exact fixpoint: values
        # are negated step counts; pairs that never reach the goal sink
        # to a value strictly below any reachable pair's -n.
        steps = np.full((n, n), np.inf)
        steps[arrived] = 0.0
        for _ in range(n + 1):
            nxt = steps[ns.reshape(-1)].reshape(n, N_ACTIONS, n)
            nxt = np.where(seen[:, :, None], nxt, np.inf)
            cand = 1.0 + nxt.min(axis=1)
            new = np.minimum(steps, cand)
            new[arrived] = 0.0
            if np.array_equal(new, steps):
                break
            steps = new
        v = np.where(np.isfinite(steps), -steps, sink)
    else:
        v = np.zeros((n, n))
        for _ in range(50 * n):
            v_next = np.where(arrived[ns.reshape(-1)].reshape(n, N_ACTIONS, n), 0.0, v[ns.reshape(-1)].reshape(n, N_ACTIONS, n))
            q = -1.0 + gamma * v_next
            q[~seen] = _UNSEEN
            new_v = q.max(axis=1)
            new_v[~seen.any(axis=1)] = _UNSEEN / 2
            new_v[arrived] = 0.0
            if np.max(np.abs(new_v - v)) < 1e-13:
                v = new_v
                break
            v = new_v

    v_next = np.where(arrived[ns.reshape(-1)].reshape(n, N_ACTIONS, n), 0.0, v[ns.reshape(-1)].reshape(n, N_ACTIONS, n))
    q = -1.0 + gamma * v_next
    q[~seen] = _UNSEEN
    return TabularQ(obs_matrix=obs_matrix, index=index, q=q, seen=seen, gamma=gamma)


def loss_q_mse(pv: ParamVector, obs: np.ndarray, actions: np.ndarray, goals: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Bellman regression on the taken action; targets are constants."""
    b = len(actions)
    x = np.concatenate([obs, goals], axis=1)
    q, cache = mlp_forward(pv, "q", x)
    err = q[np.arange(b), actions] - targets
    loss = float((err**2).mean())
    dq = np.zeros_like(q)
    dq[np.arange(b), actions] = 2.0 * err / b
    grad = pv.zeros_like()
    mlp_backward(pv, "q", cache, dq, grad)
    return loss, grad.flat


@dataclass
class MlpQ:
    pv: ParamVector
    gamma: float
    curve: list[float]

    def q_values(self, obs: np.ndarray, goals: np.ndarray) -> np.ndarray:
        return forward_q(self.pv, obs, goals)


def fit_q_mlp(
    dataset: Dataset,
    strategy: RelabelStrategy,
    config: TrainConfig,
    rng: np.random.Generator,
) -> MlpQ:
    config.validate()
    obs_len = dataset.obs_width()
    pv = build_q(obs_len, config.hidden, rng)
    target = pv.copy()
    gamma = config.gamma

    def step_fn(p: ParamVector, step: int) -> tuple[float, np.ndarray]:
        if step % config.target_refresh == 0:
            target.flat[:] = p.flat
        batch, next_obs = sample_transitions(dataset, strategy, config.batch_size, rng)
        q_next = forward_q(target, next_obs, batch.goals)
        done = center_signature(next_obs) == center_signature(batch.goals)
        targets = -1.0 + gamma * np.where(done, 0.0, q_next.max(axis=1))
        return loss_q_mse(p, batch.obs, batch.actions, batch.goals, targets)

    curve = adam_minimize(step_fn, pv, config.steps, config.learning_rate)
    return MlpQ(pv=pv, gamma=gamma, curve=curve)


def value_to_steps(v: float, gamma: float, delta_max: float = 500.0) -> tuple[float, bool]:
    """Invert the geometric-series value of "-1 per step until arrival".
    Returns (steps, saturated); saturated means v sat at or below the
    gamma<1 horizon -1/(1-gamma) and steps was clamped to delta_max."""
    if not 0.0 < gamma <= 1.0:
        raise ConfigError("gamma must be in (0, 1]")
    if gamma == 1.0:
        return -float(v), False
    arg = 1.0 + (1.0 - gamma) * float(v)
    if arg <= 0.0:
        return float(delta_max), True
    steps = float(np.log(arg) / np.log(gamma))
    if steps > delta_max:
        return float(delta_max), True
    return steps, False


def steps_to_value(delta: float, gamma: float) -> float:
    """Forward geometric series; the test oracle partner of value_to_steps."""
    if gamma == 1.0:
        return -float(delta)
    return -(1.0 - gamma ** float(delta)) / (1.0 - gamma)
