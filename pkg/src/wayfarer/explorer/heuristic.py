"""Overhead-map search heuristic trained with a contrastive objective.

Scores how promising a map location looks for reaching a goal, given a
local overhead patch and the GPS offset to the goal. Positives come from
locations on successful traversals, negatives from uniform grid cells.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..errors import ConfigError, UsageError
from ..seeding import TRAIN, stream
from ..skills.nets import mlp_backward, mlp_forward
from ..skills.params import ParamVector, mlp_params
from ..skills.train import adam_minimize
from .overhead import DEFAULT_GPS_SIGMA, GpsReading, OverheadMap, gps_read

DEFAULT_PATCH_RADIUS = 4


@dataclass
class TraversalRecord:
    overhead: OverheadMap
    goal_gps: GpsReading
    path_cells: np.ndarray  # (n, 2) int cells of one successful traversal


def feature_length(patch_radius: int) -> int:
    from ..worldsim.terrain import N_KINDS

    side = 2 * patch_radius + 1
    return N_KINDS * side * side + 2


def build_features(overhead: OverheadMap, qx: np.ndarray, qy: np.ndarray, goal: GpsReading, patch_radius: int) -> np.ndarray:
    """Feature rows for query locations on one overhead map: one-hot
    texture patch (out-of-grid cells all-zero) plus normalized goal offset."""
    from ..worldsim.terrain import N_KINDS

    qx = np.asarray(qx, dtype=np.float64).reshape(-1)
    qy = np.asarray(qy, dtype=np.float64).reshape(-1)
    ch, cw = overhead.textures.shape
    f = overhead.factor
    cx = np.clip(np.floor(qx / f), 0, cw - 1).astype(np.int64)
    cy = np.clip(np.floor(qy / f), 0, ch - 1).astype(np.int64)
    offs = np.arange(-patch_radius, patch_radius + 1)
    side = 2 * patch_radius + 1
    shape = (len(qx), side, side)
    gx = np.broadcast_to(cx[:, None, None] + offs[None, None, :], shape)
    gy = np.broadcast_to(cy[:, None, None] + offs[None, :, None], shape)
    valid = (gx >= 0) & (gx < cw) & (gy >= 0) & (gy < ch)
    tex = overhead.textures[np.clip(gy, 0, ch - 1), np.clip(gx, 0, cw - 1)]
    onehot = np.eye(N_KINDS)[tex] * valid[..., None]
    scale = f * (2 * patch_radius + 1)
    off = np.stack([(goal.x - qx) / scale, (goal.y - qy) / scale], axis=1)
    return np.concatenate([onehot.reshape(len(qx), -1), off], axis=1)


def heuristic_blocks(rng, patch_radius: int, hidden: int) -> ParamVector:
    return mlp_params("heur", [feature_length(patch_radius), hidden, hidden, 1], rng)


def loss_infonce(pv: ParamVector, pos_feats: np.ndarray, neg_feats: np.ndarray) -> tuple[float, np.ndarray]:
    """Softmax-over-candidates loss: each row pits one positive against
    its negatives. Zero negatives makes the loss exactly zero."""
    b, f = pos_feats.shape
    n_neg = neg_feats.shape[1] if neg_feats.ndim == 3 else 0
    if n_neg:
        if neg_feats.shape != (b, n_neg, f):
            raise UsageError(f"negative feature shape {neg_feats.shape} does not match positives {(b, f)}")
        all_feats = np.concatenate([pos_feats[:, None, :], neg_feats], axis=1).reshape(b * (n_neg + 1), f)
    else:
        all_feats = pos_feats
    scores, caches = mlp_forward(pv, "heur", all_feats)
    s = scores.reshape(b, n_neg + 1)
    m = s.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(s - m).sum(axis=1))
    loss = float(np.mean(lse - s[:, 0]))
    p = np.exp(s - lse[:, None])
    d_s = p.copy()
    d_s[:, 0] -= 1.0
    d_s /= b
    grad = pv.zeros_like()
    mlp_backward(pv, "heur", caches, d_s.reshape(-1, 1), grad)
    return loss, grad.flat


class OverheadHeuristic(BaseEstimator):
    """MLP scorer over (overhead patch, goal offset) features."""

    def __init__(
        self,
        hidden_size: int = 32,
        learning_rate: float = 3e-3,
        steps: int = 1500,
        batch_size: int = 32,
        n_negatives: int = 16,
        patch_radius: int = DEFAULT_PATCH_RADIUS,
        sigma_gps: float = DEFAULT_GPS_SIGMA,
        random_state: int = 0,
    ):
        self.hidden_size = hidden_size
        self.learning_rate = learning_rate
        self.steps = steps
        self.batch_size = batch_size
        self.n_negatives = n_negatives
        self.patch_radius = patch_radius
        self.sigma_gps = sigma_gps
        self.random_state = random_state

    def _validate(self) -> None:
        if self.n_negatives < 0:
            raise ConfigError("n_negatives must be non-negative")
        if self.patch_radius < 0:
            raise ConfigError("patch_radius must be non-negative")
        if self.batch_size < 1 or self.steps < 0:
            raise ConfigError("batch_size must be >= 1 and steps >= 0")

    def fit(self, records: list[TraversalRecord], rng=None) -> "OverheadHeuristic":
        self._validate()
        if not records:
            raise UsageError("no traversal records to train on")
        for k, rec in enumerate(records):
            if len(rec.path_cells) == 0:
                raise UsageError(f"traversal record {k} has an empty path")
        if rng is None:
            rng = stream(self.random_state, TRAIN, index=5)
        pv = heuristic_blocks(rng, self.patch_radius, self.hidden_size)

        def sample_batch():
            rec_ids = rng.integers(0, len(records), size=self.batch_size)
            pos = np.empty((self.batch_size, feature_length(self.patch_radius)))
            neg = np.empty((self.batch_size, self.n_negatives, feature_length(self.patch_radius)))
            for row, ri in enumerate(rec_ids):
                rec = records[ri]
                cell = rec.path_cells[rng.integers(0, len(rec.path_cells))]
                reading = gps_read(
                    (int(cell[0]), int(cell[1])),
                    rng,
                    sigma=self.sigma_gps,
                    world_width=rec.overhead.world_width,
                    world_height=rec.overhead.world_height,
                )
                pos[row] = build_features(rec.overhead, [reading.x], [reading.y], rec.goal_gps, self.patch_radius)[0]
                if self.n_negatives:
                    nx = rng.integers(0, rec.overhead.world_width, size=self.n_negatives)
                    ny = rng.integers(0, rec.overhead.world_height, size=self.n_negatives)
                    neg[row] = build_features(rec.overhead, nx, ny, rec.goal_gps, self.patch_radius)
            return pos, neg

        def step_fn(p, step):
            pos, neg = sample_batch()
            return loss_infonce(p, pos, neg)

        curve = adam_minimize(step_fn, pv, self.steps, self.learning_rate)
        self.params_ = pv
        self.loss_curve_ = curve
        return self

    def _require_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise NotFittedError("heuristic model is not fitted; call fit first")

    def score_locations(self, overhead: OverheadMap, qx, qy, goal: GpsReading) -> np.ndarray:
        self._require_fitted()
        feats = build_features(overhead, qx, qy, goal, self.patch_radius)
        scores, _ = mlp_forward(self.params_, "heur", feats)
        return scores[:, 0]

    def score(self, overhead: OverheadMap, query: GpsReading, goal: GpsReading) -> float:
        return float(self.score_locations(overhead, [query.x], [query.y], goal)[0])


def train_heuristic(experience: list[TraversalRecord], config, rng, **overrides) -> OverheadHeuristic:
    """Fit a heuristic from successful-traversal records; config supplies
    the negative count, overrides tune the rest."""
    model = OverheadHeuristic(n_negatives=config.n_neg, **overrides)
    return model.fit(experience, rng=rng)


def auc_score(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Probability a positive outranks a negative, ties at half credit."""
    pos = np.asarray(pos_scores, dtype=np.float64).reshape(-1)
    neg = np.asarray(neg_scores, dtype=np.float64).reshape(-1)
    if pos.size == 0 or neg.size == 0:
        raise UsageError("auc needs at least one score on each side")
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return float(wins / (pos.size * neg.size))
