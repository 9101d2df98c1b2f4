"""Trajectory and dataset containers.

Observations, actions, and events are stored as parallel arrays per
trajectory. eval_positions carry true cells for oracle checks and must
never be handed to a learner.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import UsageError
from ..worldsim.sim import Action, DELTAS, Event

TOOLKIT_VERSION = "wayfarer-0.1.0"


@dataclass
class Trajectory:
    observations: np.ndarray  # (H, L) float64
    actions: np.ndarray  # (H,) uint8
    collision: np.ndarray  # (H,) bool
    bumpiness: np.ndarray  # (H,) float64
    trapped: np.ndarray  # (H,) bool
    disengagement: np.ndarray  # (H,) bool
    eval_positions: np.ndarray  # (H, 2) int64
    world_id: str

    def __post_init__(self):
        n = len(self.observations)
        if n == 0:
            raise ValueError("empty trajectory")
        self.observations = np.asarray(self.observations, dtype=np.float64)
        if self.observations.ndim != 2:
            raise ValueError("observations must be (H, L)")
        self.actions = np.asarray(self.actions, dtype=np.uint8)
        self.collision = np.asarray(self.collision, dtype=bool)
        self.bumpiness = np.asarray(self.bumpiness, dtype=np.float64)
        self.trapped = np.asarray(self.trapped, dtype=bool)
        self.disengagement = np.asarray(self.disengagement, dtype=bool)
        self.eval_positions = np.asarray(self.eval_positions, dtype=np.int64)
        for name in ("actions", "collision", "bumpiness", "trapped", "disengagement"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length != observation count")
        if self.eval_positions.shape != (n, 2):
            raise ValueError("eval_positions must be (H, 2)")
        if self.trapped[:-1].any():
            raise ValueError("trapped step must be the last step")

    @classmethod
    def from_steps(cls, observations, actions, events, eval_positions, world_id) -> "Trajectory":
        return cls(
            observations=observations,
            actions=actions,
            collision=np.array([e.collision for e in events], dtype=bool),
            bumpiness=np.array([e.bumpiness for e in events], dtype=np.float64),
            trapped=np.array([e.trapped for e in events], dtype=bool),
            disengagement=np.array([e.disengagement for e in events], dtype=bool),
            eval_positions=eval_positions,
            world_id=world_id,
        )

    def __len__(self) -> int:
        return len(self.observations)

    def event(self, t: int) -> Event:
        return Event(
            collision=bool(self.collision[t]),
            bumpiness=float(self.bumpiness[t]),
            trapped=bool(self.trapped[t]),
            disengagement=bool(self.disengagement[t]),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.world_id == other.world_id
            and np.array_equal(self.observations, other.observations)
            and np.array_equal(self.actions, other.actions)
            and np.array_equal(self.collision, other.collision)
            and np.array_equal(self.bumpiness, other.bumpiness)
            and np.array_equal(self.trapped, other.trapped)
            and np.array_equal(self.disengagement, other.disengagement)
            and np.array_equal(self.eval_positions, other.eval_positions)
        )


@dataclass
class Dataset:
    trajectories: list[Trajectory] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def record(self, trajectory: Trajectory) -> "Dataset":
        self.trajectories.append(trajectory)
        return self

    def __len__(self) -> int:
        return len(self.trajectories)

    def require_nonempty(self) -> None:
        if not self.trajectories:
            raise UsageError("operation needs a non-empty dataset")

    def obs_width(self) -> int:
        self.require_nonempty()
        return self.trajectories[0].observations.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.provenance == other.provenance and self.trajectories == other.trajectories


def make_provenance(world_seeds, policy: str, extra: dict | None = None) -> dict:
    prov = {
        "world_seeds": [int(s) for s in world_seeds],
        "policy": policy,
        "version": TOOLKIT_VERSION,
    }
    if extra:
        prov.update(extra)
    return prov


def replay_positions(start_xy: tuple[int, int], actions, collision, disengagement) -> np.ndarray:
    """Positions after each recorded step, from the event record alone:
    a step moves unless it was a collision or a monitor veto."""
    x, y = int(start_xy[0]), int(start_xy[1])
    out = np.empty((len(actions), 2), dtype=np.int64)
    for i, act in enumerate(actions):
        if not collision[i] and not disengagement[i]:
            dx, dy = DELTAS[Action(int(act))]
            x += dx
            y += dy
        out[i] = (x, y)
    return out
