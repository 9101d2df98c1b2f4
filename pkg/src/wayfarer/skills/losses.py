"""Model parameter layouts and training objectives.

Every loss is a pure function of a flat ParamVector returning
(scalar loss, flat gradient), so the same callable feeds Adam and the
finite-difference checker. Quantities that must not carry gradient
(Q values, AWAC weights' V term, reparameterization noise) enter as
explicit constant arguments.
"""
from __future__ import annotations

import numpy as np

from ..errors import UsageError
from ..trajdata.relabel import RelabeledArrays
from .nets import bce_with_logits, log_softmax, mlp_backward, mlp_forward, sigmoid, softmax, softplus
from .params import ParamVector, mlp_blocks

N_ACTIONS = 4

POLICY = "pi"
DISTANCE = "dist"
QVALUES = "q"
EVENTS = "ev"
VIB_ENC = "enc"
VIB_POLICY = "zpi"
VIB_DIST = "zdist"


def build_policy(obs_len: int, hidden: int, rng) -> ParamVector:
    return ParamVector.from_blocks(mlp_blocks(POLICY, [2 * obs_len, hidden, hidden, N_ACTIONS], rng))


def build_distance(obs_len: int, hidden: int, rng) -> ParamVector:
    return ParamVector.from_blocks(mlp_blocks(DISTANCE, [2 * obs_len, hidden, hidden, 1], rng))


def build_q(obs_len: int, hidden: int, rng) -> ParamVector:
    return ParamVector.from_blocks(mlp_blocks(QVALUES, [2 * obs_len, hidden, hidden, N_ACTIONS], rng))


def build_events(obs_len: int, k_e: int, hidden: int, rng) -> ParamVector:
    return ParamVector.from_blocks(mlp_blocks(EVENTS, [obs_len + N_ACTIONS * k_e, hidden, hidden, 3 * k_e], rng))


def build_vib(obs_len: int, d_z: int, hidden: int, rng) -> ParamVector:
    blocks = (
        mlp_blocks(VIB_ENC, [2 * obs_len, hidden, hidden, 2 * d_z], rng)
        + mlp_blocks(VIB_POLICY, [obs_len + d_z, hidden, hidden, N_ACTIONS], rng)
        + mlp_blocks(VIB_DIST, [obs_len + d_z, hidden, hidden, 1], rng)
    )
    return ParamVector.from_blocks(blocks)


def vib_latent_dim(pv: ParamVector) -> int:
    _, shape = pv.table[f"{VIB_ENC}/b3"]
    return shape[0] // 2


def _pair_input(obs: np.ndarray, goals: np.ndarray) -> np.ndarray:
    return np.concatenate([np.atleast_2d(obs), np.atleast_2d(goals)], axis=1)


def forward_policy_logits(pv: ParamVector, obs: np.ndarray, goals: np.ndarray) -> np.ndarray:
    logits, _ = mlp_forward(pv, POLICY, _pair_input(obs, goals))
    return logits


def forward_policy(pv: ParamVector, obs: np.ndarray, goals: np.ndarray) -> np.ndarray:
    return softmax(forward_policy_logits(pv, obs, goals))


def forward_distance(pv: ParamVector, obs: np.ndarray, goals: np.ndarray) -> np.ndarray:
    raw, _ = mlp_forward(pv, DISTANCE, _pair_input(obs, goals))
    return softplus(raw[:, 0])


def forward_q(pv: ParamVector, obs: np.ndarray, goals: np.ndarray) -> np.ndarray:
    q, _ = mlp_forward(pv, QVALUES, _pair_input(obs, goals))
    return q


def forward_events(pv: ParamVector, obs: np.ndarray, action_onehot: np.ndarray) -> dict[str, np.ndarray]:
    out, _ = mlp_forward(pv, EVENTS, np.concatenate([np.atleast_2d(obs), np.atleast_2d(action_onehot)], axis=1))
    k_e = out.shape[1] // 3
    return {
        "collision": sigmoid(out[:, :k_e]),
        "bumpiness": softplus(out[:, k_e : 2 * k_e]),
        "disengagement": sigmoid(out[:, 2 * k_e :]),
    }


def vib_encode(pv: ParamVector, obs: np.ndarray, goals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    out, _ = mlp_forward(pv, VIB_ENC, _pair_input(obs, goals))
    d_z = out.shape[1] // 2
    return out[:, :d_z], out[:, d_z:]


def vib_policy_probs(pv: ParamVector, obs: np.ndarray, z: np.ndarray) -> np.ndarray:
    logits, _ = mlp_forward(pv, VIB_POLICY, np.concatenate([np.atleast_2d(obs), np.atleast_2d(z)], axis=1))
    return softmax(logits)


def vib_distance(pv: ParamVector, obs: np.ndarray, z: np.ndarray) -> np.ndarray:
    raw, _ = mlp_forward(pv, VIB_DIST, np.concatenate([np.atleast_2d(obs), np.atleast_2d(z)], axis=1))
    return softplus(raw[:, 0])


def sample_subgoal(d_z: int, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Draw latent goals from the standard-normal prior."""
    if n is None:
        return rng.standard_normal(d_z)
    return rng.standard_normal((n, d_z))


def _require_positives(batch: RelabeledArrays, what: str) -> None:
    if batch.negative.any():
        raise UsageError(f"{what} accepts positive samples only")


def _nll_and_dlogits(logits: np.ndarray, actions: np.ndarray) -> tuple[float, np.ndarray]:
    b = len(actions)
    logp = log_softmax(logits)
    loss = float(-logp[np.arange(b), actions].mean())
    dlogits = softmax(logits)
    dlogits[np.arange(b), actions] -= 1.0
    return loss, dlogits / b


def loss_gcbc(pv: ParamVector, batch: RelabeledArrays) -> tuple[float, np.ndarray]:
    """Goal-conditioned imitation: mean negative log likelihood of the
    taken action given (o_t, o_g)."""
    _require_positives(batch, "loss_gcbc")
    x = _pair_input(batch.obs, batch.goals)
    logits, cache = mlp_forward(pv, POLICY, x)
    loss, dlogits = _nll_and_dlogits(logits, batch.actions)
    grad = pv.zeros_like()
    mlp_backward(pv, POLICY, cache, dlogits, grad)
    return loss, grad.flat


def loss_expected_q(pv: ParamVector, batch: RelabeledArrays, q_values: np.ndarray) -> tuple[float, np.ndarray]:
    """Maximize E_{a~pi}[Q]: exact expectation over the 4 actions.
    q_values is a constant (B, 4) array from a frozen critic."""
    q_values = np.asarray(q_values, dtype=np.float64)
    b = len(batch)
    if q_values.shape != (b, N_ACTIONS):
        raise ValueError(f"q_values must be ({b}, {N_ACTIONS})")
    x = _pair_input(batch.obs, batch.goals)
    logits, cache = mlp_forward(pv, POLICY, x)
    probs = softmax(logits)
    expected = (probs * q_values).sum(axis=1)
    loss = float(-expected.mean())
    dlogits = -probs * (q_values - expected[:, None]) / b
    grad = pv.zeros_like()
    mlp_backward(pv, POLICY, cache, dlogits, grad)
    return loss, grad.flat


def awac_weights(q_values: np.ndarray, v_values: np.ndarray, actions: np.ndarray, lam: float, w_max: float) -> np.ndarray:
    q_taken = q_values[np.arange(len(actions)), actions]
    return np.minimum(np.exp((q_taken - v_values) / lam), w_max)


def loss_awac(
    pv: ParamVector,
    batch: RelabeledArrays,
    q_values: np.ndarray,
    v_values: np.ndarray,
    lam: float = 1.0,
    w_max: float = 20.0,
) -> tuple[float, np.ndarray]:
    """Advantage-weighted imitation: w = min(exp((Q - V)/lam), w_max),
    w constant under differentiation. q_values and v_values come from the
    frozen critic (and the policy snapshot used for V)."""
    if lam <= 0:
        raise UsageError("AWAC temperature must be positive")
    b = len(batch)
    w = awac_weights(np.asarray(q_values, dtype=np.float64), np.asarray(v_values, dtype=np.float64), batch.actions, lam, w_max)
    x = _pair_input(batch.obs, batch.goals)
    logits, cache = mlp_forward(pv, POLICY, x)
    logp = log_softmax(logits)
    loss = float(-(w * logp[np.arange(b), batch.actions]).mean())
    dlogits = softmax(logits) * w[:, None]
    dlogits[np.arange(b), batch.actions] -= w
    grad = pv.zeros_like()
    mlp_backward(pv, POLICY, cache, dlogits / b, grad)
    return loss, grad.flat


def loss_distance_regression(pv: ParamVector, batch: RelabeledArrays) -> tuple[float, np.ndarray]:
    """Mean squared error between softplus-headed D(o_t, o_g) and the
    relabeled step count."""
    _require_positives(batch, "loss_distance_regression")
    b = len(batch)
    x = _pair_input(batch.obs, batch.goals)
    raw, cache = mlp_forward(pv, DISTANCE, x)
    pred = softplus(raw[:, 0])
    err = pred - batch.delta.astype(np.float64)
    loss = float((err**2).mean())
    d_raw = (2.0 * err * sigmoid(raw[:, 0]) / b)[:, None]
    grad = pv.zeros_like()
    mlp_backward(pv, DISTANCE, cache, d_raw, grad)
    return loss, grad.flat


def loss_events(pv: ParamVector, windows: dict[str, np.ndarray]) -> tuple[float, np.ndarray]:
    """Per-step BCE on collision and disengagement plus squared error on
    bumpiness, summed over the horizon, averaged over the batch."""
    obs = windows["obs"]
    onehot = windows["action_onehot"]
    b = len(obs)
    k_e = windows["collision"].shape[1]
    x = np.concatenate([obs, onehot], axis=1)
    out, cache = mlp_forward(pv, EVENTS, x)
    if out.shape[1] != 3 * k_e:
        raise ValueError(f"event head width {out.shape[1]} != 3*{k_e}")
    z_col = out[:, :k_e]
    raw_bump = out[:, k_e : 2 * k_e]
    z_dis = out[:, 2 * k_e :]
    col_loss, d_col = bce_with_logits(z_col, windows["collision"])
    dis_loss, d_dis = bce_with_logits(z_dis, windows["disengagement"])
    bump_err = softplus(raw_bump) - windows["bumpiness"]
    loss = float(col_loss.sum(axis=1).mean() + dis_loss.sum(axis=1).mean() + (bump_err**2).sum(axis=1).mean())
    d_out = np.concatenate([d_col, 2.0 * bump_err * sigmoid(raw_bump), d_dis], axis=1) / b
    grad = pv.zeros_like()
    mlp_backward(pv, EVENTS, cache, d_out, grad)
    return loss, grad.flat


def kl_standard_normal(mu: np.ndarray, logvar: np.ndarray) -> np.ndarray:
    """Closed-form KL(N(mu, diag exp(logvar)) || N(0, I)) per row."""
    return 0.5 * (mu**2 + np.exp(logvar) - logvar - 1.0).sum(axis=1)


def loss_vib(
    pv: ParamVector,
    batch: RelabeledArrays,
    beta: float,
    eps: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Bottleneck objective: z-conditioned imitation + distance regression
    with z = mu + sigma*eps, plus beta * KL to the standard-normal prior.
    eps is the frozen reparameterization draw."""
    if beta < 0:
        raise UsageError("beta must be non-negative")
    _require_positives(batch, "loss_vib")
    b = len(batch)
    obs = batch.obs
    enc_out, enc_cache = mlp_forward(pv, VIB_ENC, _pair_input(obs, batch.goals))
    d_z = enc_out.shape[1] // 2
    if eps.shape != (b, d_z):
        raise ValueError(f"eps must be ({b}, {d_z})")
    mu = enc_out[:, :d_z]
    logvar = enc_out[:, d_z:]
    sigma = np.exp(0.5 * logvar)
    z = mu + sigma * eps

    pol_in = np.concatenate([obs, z], axis=1)
    logits, pol_cache = mlp_forward(pv, VIB_POLICY, pol_in)
    nll, dlogits = _nll_and_dlogits(logits, batch.actions)

    dist_in = np.concatenate([obs, z], axis=1)
    raw, dist_cache = mlp_forward(pv, VIB_DIST, dist_in)
    pred = softplus(raw[:, 0])
    err = pred - batch.delta.astype(np.float64)
    mse = float((err**2).mean())
    d_raw = (2.0 * err * sigmoid(raw[:, 0]) / b)[:, None]

    kl = float(kl_standard_normal(mu, logvar).mean())
    loss = nll + mse + beta * kl

    grad = pv.zeros_like()
    d_pol_in = mlp_backward(pv, VIB_POLICY, pol_cache, dlogits, grad)
    d_dist_in = mlp_backward(pv, VIB_DIST, dist_cache, d_raw, grad)
    obs_len = obs.shape[1]
    dz = d_pol_in[:, obs_len:] + d_dist_in[:, obs_len:]
    dmu = dz + beta * mu / b
    dlogvar = dz * eps * sigma * 0.5 + beta * 0.5 * (np.exp(logvar) - 1.0) / b
    mlp_backward(pv, VIB_ENC, enc_cache, np.concatenate([dmu, dlogvar], axis=1), grad)
    return loss, grad.flat
