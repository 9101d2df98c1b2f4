"""Minibatch Adam training loop shared by every objective."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, TrainingDiverged
from ..trajdata.dataset import Dataset
from ..trajdata.relabel import (
    MODE_NEGATIVE,
    RelabelStrategy,
    sample_event_windows,
    sample_relabeled_arrays,
)
from .losses import (
    awac_weights,
    build_distance,
    build_events,
    build_policy,
    build_vib,
    forward_policy_logits,
    loss_awac,
    loss_distance_regression,
    loss_events,
    loss_expected_q,
    loss_gcbc,
    loss_vib,
    vib_latent_dim,
)
from .nets import softmax
from .params import ParamVector

ADAM_B1 = 0.9
ADAM_B2 = 0.999
ADAM_EPS = 1e-8

POSITIVE_ONLY_OBJECTIVES = {"gcbc", "distance", "vib"}
OBJECTIVES = POSITIVE_ONLY_OBJECTIVES | {"expected_q", "awac", "events"}


def _q_batch(q_model, obs: np.ndarray, goals: np.ndarray) -> np.ndarray:
    """(B, 4) critic values from whichever Q container was handed in."""
    if hasattr(q_model, "q_values_raw"):
        return q_model.q_values_raw(obs, goals)
    return np.asarray(q_model.q_values(obs, goals), dtype=np.float64)


@dataclass
class TrainConfig:
    learning_rate: float = 3e-3
    batch_size: int = 64
    steps: int = 2000
    gamma: float = 0.95
    awac_lambda: float = 1.0
    w_max: float = 20.0
    vib_beta: float = 0.05
    target_refresh: int = 500
    hidden: int = 64
    event_horizon: int = 4
    latent_dim: int = 8

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.steps < 1:
            raise ConfigError("batch_size and steps must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must be in (0, 1]")
        if self.awac_lambda <= 0:
            raise ConfigError("awac_lambda must be positive")
        if self.w_max <= 0:
            raise ConfigError("w_max must be positive")
        if self.vib_beta < 0:
            raise ConfigError("vib_beta must be >= 0")
        if self.target_refresh < 1:
            raise ConfigError("target_refresh must be >= 1")
        if self.hidden < 1 or self.event_horizon < 1 or self.latent_dim < 1:
            raise ConfigError("hidden, event_horizon, latent_dim must be >= 1")


def adam_minimize(step_fn, pv: ParamVector, steps: int, learning_rate: float) -> list[float]:
    """step_fn(pv, step) -> (loss, flat grad); updates pv in place and
    returns the loss curve. Aborts on the first non-finite loss."""
    m = np.zeros_like(pv.flat)
    v = np.zeros_like(pv.flat)
    curve = []
    for step in range(steps):
        loss, grad = step_fn(pv, step)
        if not np.isfinite(loss) or not np.isfinite(grad).all():
            raise TrainingDiverged(step, loss)
        t = step + 1
        m = ADAM_B1 * m + (1.0 - ADAM_B1) * grad
        v = ADAM_B2 * v + (1.0 - ADAM_B2) * grad * grad
        m_hat = m / (1.0 - ADAM_B1**t)
        v_hat = v / (1.0 - ADAM_B2**t)
        pv.flat -= learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        curve.append(float(loss))
    return curve


def save_loss_curve(curve: list[float], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for step, loss in enumerate(curve):
            writer.writerow([step, repr(loss)])


def train(
    objective: str,
    dataset: Dataset,
    strategy: RelabelStrategy,
    config: TrainConfig,
    rng: np.random.Generator,
    q_model=None,
) -> tuple[ParamVector, list[float]]:
    """Build fresh parameters for the named objective and fit them with
    minibatch Adam. Deterministic given rng state."""
    config.validate()
    strategy.validate()
    dataset.require_nonempty()
    if objective not in OBJECTIVES:
        raise ConfigError(f"unknown objective {objective!r}")
    if objective in POSITIVE_ONLY_OBJECTIVES and strategy.mode == MODE_NEGATIVE and strategy.p_neg > 0:
        raise ConfigError(f"{objective} trains on positives only; drop the negative mix")
    if objective in ("expected_q", "awac") and q_model is None:
        raise ConfigError(f"{objective} needs a fitted q_model")

    obs_len = dataset.obs_width()

    if objective == "events":
        pv = build_events(obs_len, config.event_horizon, config.hidden, rng)

        def step_fn(p, step):
            windows = sample_event_windows(dataset, config.event_horizon, config.batch_size, rng)
            return loss_events(p, windows)

    elif objective == "distance":
        pv = build_distance(obs_len, config.hidden, rng)

        def step_fn(p, step):
            batch = sample_relabeled_arrays(dataset, strategy, config.batch_size, rng)
            return loss_distance_regression(p, batch)

    elif objective == "vib":
        pv = build_vib(obs_len, config.latent_dim, config.hidden, rng)
        d_z = vib_latent_dim(pv)

        def step_fn(p, step):
            batch = sample_relabeled_arrays(dataset, strategy, config.batch_size, rng)
            eps = rng.standard_normal((len(batch), d_z))
            return loss_vib(p, batch, config.vib_beta, eps)

    elif objective == "gcbc":
        pv = build_policy(obs_len, config.hidden, rng)

        def step_fn(p, step):
            batch = sample_relabeled_arrays(dataset, strategy, config.batch_size, rng)
            return loss_gcbc(p, batch)

    elif objective == "expected_q":
        pv = build_policy(obs_len, config.hidden, rng)

        def step_fn(p, step):
            batch = sample_relabeled_arrays(dataset, strategy, config.batch_size, rng)
            q_values = _q_batch(q_model, batch.obs, batch.goals)
            return loss_expected_q(p, batch, q_values)

    else:  # awac
        pv = build_policy(obs_len, config.hidden, rng)
        snapshot = {"pv": None}

        def step_fn(p, step):
            if step % config.target_refresh == 0:
                snapshot["pv"] = p.copy()
            batch = sample_relabeled_arrays(dataset, strategy, config.batch_size, rng)
            q_values = _q_batch(q_model, batch.obs, batch.goals)
            probs = softmax(forward_policy_logits(snapshot["pv"], batch.obs, batch.goals))
            v_values = (probs * q_values).sum(axis=1)
            return loss_awac(p, batch, q_values, v_values, config.awac_lambda, config.w_max)

    curve = adam_minimize(step_fn, pv, config.steps, config.learning_rate)
    return pv, curve


__all__ = [
    "TrainConfig",
    "adam_minimize",
    "train",
    "save_loss_curve",
    "awac_weights",
]
