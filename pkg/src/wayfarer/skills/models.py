"""Estimator wrappers over the functional core.

Scikit-learn conventions: hyperparameters in __init__, fit(dataset)
returns self, fitted state in trailing-underscore attributes, access
before fit raises NotFittedError.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .. import seeding
from ..errors import ConfigError
from ..trajdata.relabel import RelabelStrategy, uniform_future
from ..worldsim.sim import reached
from . import losses
from .params import ParamVector
from .qfit import MlpQ, TabularQ, fit_q_mlp, fit_q_tabular, value_to_steps
from .train import TrainConfig, train

N_ACTIONS = losses.N_ACTIONS


def encode_action_sequences(actions: np.ndarray) -> np.ndarray:
    """(B, K) action ids -> (B, 4K) one-hot blocks."""
    actions = np.atleast_2d(np.asarray(actions, dtype=np.int64))
    b, k = actions.shape
    if actions.min() < 0 or actions.max() >= N_ACTIONS:
        raise ValueError("action ids outside range")
    out = np.zeros((b, k * N_ACTIONS), dtype=np.float64)
    rows = np.repeat(np.arange(b), k)
    cols = np.arange(k)[None, :] * N_ACTIONS + actions
    out[rows, cols.reshape(-1)] = 1.0
    return out


class _PairInputMixin:
    """Shared (obs, goal) validation: promotes single vectors, broadcasts
    a lone goal across a batch, and checks feature width."""

    def _require_fitted(self, attr: str = "params_"):
        if not hasattr(self, attr):
            raise NotFittedError(f"{type(self).__name__} is not fitted; call fit first")

    def _check_pairs(self, obs, goals):
        obs = np.asarray(obs, dtype=np.float64)
        goals = np.asarray(goals, dtype=np.float64)
        single = obs.ndim == 1
        obs = np.atleast_2d(obs)
        goals = np.atleast_2d(goals)
        if goals.shape[0] == 1 and obs.shape[0] > 1:
            goals = np.broadcast_to(goals, obs.shape)
        if obs.shape != goals.shape:
            raise ValueError(f"obs {obs.shape} and goals {goals.shape} do not align")
        if obs.shape[1] != self.obs_len_:
            raise ValueError(f"feature width {obs.shape[1]} != fitted width {self.obs_len_}")
        if not (np.isfinite(obs).all() and np.isfinite(goals).all()):
            raise ValueError("non-finite features")
        return obs, goals, single

    def _train_config(self, **overrides) -> TrainConfig:
        cfg = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            steps=self.steps,
            hidden=self.hidden,
        )
        for key, val in overrides.items():
            setattr(cfg, key, val)
        return cfg

    def _strategy(self) -> RelabelStrategy:
        return self.strategy if self.strategy is not None else uniform_future()


class GoalConditionedPolicy(BaseEstimator, _PairInputMixin):
    """pi(a | o, g) as a softmax MLP, trained by imitation (gcbc), exact
    expected-Q ascent, or advantage-weighted imitation (awac)."""

    def __init__(
        self,
        objective: str = "gcbc",
        hidden: int = 64,
        learning_rate: float = 3e-3,
        batch_size: int = 64,
        steps: int = 2000,
        strategy: RelabelStrategy | None = None,
        gamma: float = 0.95,
        awac_lambda: float = 1.0,
        w_max: float = 20.0,
        target_refresh: int = 500,
        random_state: int = 0,
    ):
        self.objective = objective
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.steps = steps
        self.strategy = strategy
        self.gamma = gamma
        self.awac_lambda = awac_lambda
        self.w_max = w_max
        self.target_refresh = target_refresh
        self.random_state = random_state

    def fit(self, dataset, q_model=None):
        if self.objective not in ("gcbc", "expected_q", "awac"):
            raise ConfigError(f"unknown policy objective {self.objective!r}")
        cfg = self._train_config(
            gamma=self.gamma,
            awac_lambda=self.awac_lambda,
            w_max=self.w_max,
            target_refresh=self.target_refresh,
        )
        rng = seeding.stream(self.random_state, seeding.TRAIN)
        self.obs_len_ = dataset.obs_width()
        self.params_, self.loss_curve_ = train(self.objective, dataset, self._strategy(), cfg, rng, q_model=q_model)
        return self

    def action_probabilities(self, obs, goals) -> np.ndarray:
        self._require_fitted()
        obs, goals, single = self._check_pairs(obs, goals)
        probs = losses.forward_policy(self.params_, obs, goals)
        return probs[0] if single else probs

    def predict(self, obs, goals):
        probs = self.action_probabilities(obs, goals)
        if probs.ndim == 1:
            return int(np.argmax(probs))
        return np.argmax(probs, axis=1)


class DistanceRegressor(BaseEstimator, _PairInputMixin):
    """D(o, g): predicted steps to reach g from o, softplus head."""

    def __init__(
        self,
        hidden: int = 64,
        learning_rate: float = 3e-3,
        batch_size: int = 64,
        steps: int = 2000,
        strategy: RelabelStrategy | None = None,
        random_state: int = 0,
    ):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.steps = steps
        self.strategy = strategy
        self.random_state = random_state

    def fit(self, dataset):
        cfg = self._train_config()
        rng = seeding.stream(self.random_state, seeding.TRAIN, 1)
        self.obs_len_ = dataset.obs_width()
        self.params_, self.loss_curve_ = train("distance", dataset, self._strategy(), cfg, rng)
        return self

    def predict(self, obs, goals):
        self._require_fitted()
        obs, goals, single = self._check_pairs(obs, goals)
        pred = losses.forward_distance(self.params_, obs, goals)
        return float(pred[0]) if single else pred


class QFunction(BaseEstimator, _PairInputMixin):
    """Q(o, a, g) under the -1-per-step goal-indicator reward. mode
    "tabular" runs exact value iteration (small spaces, oracle-checkable);
    mode "mlp" runs minibatch Bellman regression with a target network."""

    def __init__(
        self,
        mode: str = "tabular",
        gamma: float = 1.0,
        strategy: RelabelStrategy | None = None,
        hidden: int = 64,
        learning_rate: float = 3e-3,
        batch_size: int = 64,
        steps: int = 4000,
        target_refresh: int = 500,
        random_state: int = 0,
    ):
        self.mode = mode
        self.gamma = gamma
        self.strategy = strategy
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.steps = steps
        self.target_refresh = target_refresh
        self.random_state = random_state

    def fit(self, dataset):
        if self.mode == "tabular":
            self.table_ = fit_q_tabular(dataset, self.gamma)
            self.obs_len_ = self.table_.obs_matrix.shape[1]
        elif self.mode == "mlp":
            cfg = self._train_config(gamma=self.gamma, target_refresh=self.target_refresh)
            rng = seeding.stream(self.random_state, seeding.TRAIN, 2)
            self.mlp_ = fit_q_mlp(dataset, self._strategy(), cfg, rng)
            self.obs_len_ = dataset.obs_width()
            self.loss_curve_ = self.mlp_.curve
        else:
            raise ConfigError(f"unknown Q mode {self.mode!r}")
        return self

    def _require_fitted(self, attr: str = ""):
        if not (hasattr(self, "table_") or hasattr(self, "mlp_")):
            raise NotFittedError("QFunction is not fitted; call fit first")

    def q_values(self, obs, goals) -> np.ndarray:
        self._require_fitted()
        obs, goals, single = self._check_pairs(obs, goals)
        if hasattr(self, "table_"):
            out = np.stack([self.table_.q_values(o, g) for o, g in zip(obs, goals)])
        else:
            out = self.mlp_.q_values(obs, goals)
        return out[0] if single else out

    def q_values_raw(self, obs: np.ndarray, goals: np.ndarray) -> np.ndarray:
        """Batch path for training loops; no single-sample squeezing."""
        self._require_fitted()
        if hasattr(self, "table_"):
            return np.stack([self.table_.q_values(o, g) for o, g in zip(obs, goals)])
        return self.mlp_.q_values(obs, goals)

    def state_value(self, obs, goals, probs=None):
        """V = sum_a pi(a) Q(a) when action probabilities are given, else
        the greedy max; arrived pairs pin at 0."""
        self._require_fitted()
        obs_b, goals_b, single = self._check_pairs(obs, goals)
        if hasattr(self, "table_"):
            vals = np.array([self.table_.value(o, g) for o, g in zip(obs_b, goals_b)])
        else:
            q = self.mlp_.q_values(obs_b, goals_b)
            if probs is None:
                vals = q.max(axis=1)
            else:
                vals = (np.atleast_2d(probs) * q).sum(axis=1)
            vals = np.where(reached(obs_b, goals_b), 0.0, vals)
        if probs is not None and hasattr(self, "table_"):
            q = np.stack([self.table_.q_values(o, g) for o, g in zip(obs_b, goals_b)])
            vals = (np.atleast_2d(probs) * q).sum(axis=1)
            vals = np.where(reached(obs_b, goals_b), 0.0, vals)
        return float(vals[0]) if single else vals

    def distance(self, obs, goals, delta_max: float = 500.0):
        """-V mapped through the geometric-series inverse; steps are
        floored at 0 because an approximate V may overshoot the arrival
        value and edge weights must stay non-negative."""
        v = self.state_value(obs, goals)
        if np.isscalar(v) or np.ndim(v) == 0:
            return max(0.0, value_to_steps(float(v), self.gamma, delta_max)[0])
        return np.array([max(0.0, value_to_steps(float(x), self.gamma, delta_max)[0]) for x in v])


class EventPredictor(BaseEstimator, _PairInputMixin):
    """Per-step collision/bumpiness/disengagement prediction for a
    candidate action sequence."""

    def __init__(
        self,
        horizon: int = 4,
        hidden: int = 64,
        learning_rate: float = 3e-3,
        batch_size: int = 64,
        steps: int = 2000,
        random_state: int = 0,
    ):
        self.horizon = horizon
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.steps = steps
        self.random_state = random_state

    def fit(self, dataset):
        cfg = self._train_config(event_horizon=self.horizon)
        rng = seeding.stream(self.random_state, seeding.TRAIN, 3)
        self.obs_len_ = dataset.obs_width()
        self.params_, self.loss_curve_ = train("events", dataset, uniform_future(), cfg, rng)
        return self

    def predict(self, obs, action_seqs) -> dict[str, np.ndarray]:
        self._require_fitted()
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        action_seqs = np.atleast_2d(np.asarray(action_seqs, dtype=np.int64))
        if action_seqs.shape[1] != self.horizon:
            raise ValueError(f"action sequences must have length {self.horizon}")
        if obs.shape[0] == 1 and action_seqs.shape[0] > 1:
            obs = np.broadcast_to(obs, (action_seqs.shape[0], obs.shape[1]))
        if obs.shape[1] != self.obs_len_:
            raise ValueError(f"feature width {obs.shape[1]} != fitted width {self.obs_len_}")
        onehot = encode_action_sequences(action_seqs)
        return losses.forward_events(self.params_, obs, onehot)


class SubgoalEncoder(BaseEstimator, _PairInputMixin):
    """Bottlenecked latent goals: encoder q(z | o_g, o_t) with a standard
    normal prior, plus z-conditioned policy and distance heads."""

    def __init__(
        self,
        latent_dim: int = 8,
        beta: float = 0.05,
        hidden: int = 64,
        learning_rate: float = 3e-3,
        batch_size: int = 64,
        steps: int = 2000,
        strategy: RelabelStrategy | None = None,
        random_state: int = 0,
    ):
        self.latent_dim = latent_dim
        self.beta = beta
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.steps = steps
        self.strategy = strategy
        self.random_state = random_state

    def fit(self, dataset):
        cfg = self._train_config(latent_dim=self.latent_dim, vib_beta=self.beta)
        rng = seeding.stream(self.random_state, seeding.TRAIN, 4)
        self.obs_len_ = dataset.obs_width()
        self.params_, self.loss_curve_ = train("vib", dataset, self._strategy(), cfg, rng)
        return self

    def encode(self, obs, goals):
        self._require_fitted()
        obs, goals, single = self._check_pairs(obs, goals)
        mu, logvar = losses.vib_encode(self.params_, obs, goals)
        if single:
            return mu[0], logvar[0]
        return mu, logvar

    def sample_subgoal(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        self._require_fitted()
        return losses.sample_subgoal(self.latent_dim, rng, n)

    def action_probabilities(self, obs, z) -> np.ndarray:
        self._require_fitted()
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        z2 = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if obs.shape[0] == 1 and z2.shape[0] > 1:
            obs = np.broadcast_to(obs, (z2.shape[0], obs.shape[1]))
        probs = losses.vib_policy_probs(self.params_, obs, z2)
        return probs[0] if np.asarray(z).ndim == 1 and obs.shape[0] == 1 else probs

    def distance(self, obs, z):
        self._require_fitted()
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        z2 = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if obs.shape[0] == 1 and z2.shape[0] > 1:
            obs = np.broadcast_to(obs, (z2.shape[0], obs.shape[1]))
        d = losses.vib_distance(self.params_, obs, z2)
        return float(d[0]) if len(d) == 1 else d


def fit_q(dataset, strategy=None, config: TrainConfig | None = None, mode: str = "tabular", random_state: int = 0) -> QFunction:
    """Convenience constructor mirroring the training entry points."""
    cfg = config or TrainConfig()
    est = QFunction(
        mode=mode,
        gamma=cfg.gamma,
        strategy=strategy,
        hidden=cfg.hidden,
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        steps=cfg.steps,
        target_refresh=cfg.target_refresh,
        random_state=random_state,
    )
    return est.fit(dataset)
