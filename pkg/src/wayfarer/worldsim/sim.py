"""Agent dynamics and observation rendering.

Observations carry appearance only (height/texture one-hots plus a
per-cell signature byte); traversability and trap physics never appear
in the feature vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..errors import UsageError
from .terrain import CATALOG, HEIGHT_TALL, N_KINDS, WALL
from .world import World

OBS_CHANNELS = 2 + N_KINDS + 1
DEFAULT_RADIUS = 2


class Action(IntEnum):
    NORTH = 0
    SOUTH = 1
    EAST = 2
    WEST = 3


# (dx, dy); y grows southward.
DELTAS = {
    Action.NORTH: (0, -1),
    Action.SOUTH: (0, 1),
    Action.EAST: (1, 0),
    Action.WEST: (-1, 0),
}


@dataclass(frozen=True)
class AgentState:
    x: int
    y: int
    trapped: bool = False


@dataclass(frozen=True)
class Event:
    collision: bool
    bumpiness: float
    trapped: bool
    disengagement: bool


def obs_length(radius: int) -> int:
    return (2 * radius + 1) ** 2 * OBS_CHANNELS


def radius_for_length(length: int) -> int:
    cells, rem = divmod(length, OBS_CHANNELS)
    side = int(round(cells**0.5))
    if rem or side * side != cells or side % 2 == 0:
        raise ValueError(f"not an observation length: {length}")
    return (side - 1) // 2


def center_signature(obs: np.ndarray) -> np.ndarray:
    """Signature scalar of the window's center cell; works on batches."""
    cells = obs.shape[-1] // OBS_CHANNELS
    idx = (cells // 2) * OBS_CHANNELS + (OBS_CHANNELS - 1)
    return obs[..., idx]


def signature_channel(obs: np.ndarray) -> np.ndarray:
    """Signature scalars of every cell in the window; works on batches."""
    return obs[..., OBS_CHANNELS - 1 :: OBS_CHANNELS]


def reached(obs: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """Goal attainment: the full signature channel matches.

    A single byte repeats once per ~256 cells, so comparing only the
    center cell mislabels unrelated far-apart cells as the same place
    once worlds pass a few hundred cells; the whole window collides
    with probability (1/256)^cells and is unique in practice.
    Signatures are k/255 grid points, exact in float64, so equality
    is safe."""
    return np.all(signature_channel(obs) == signature_channel(goal), axis=-1)


def _feature_grid(world: World, radius: int) -> np.ndarray:
    """Padded (h+2r, w+2r, C) feature array; pad cells look like wall."""
    cached = world._features.get(radius)
    if cached is not None:
        return cached
    heights = np.array([k.height == HEIGHT_TALL for k in CATALOG], dtype=np.float64)
    h, w = world.height, world.width
    feats = np.zeros((h + 2 * radius, w + 2 * radius, OBS_CHANNELS), dtype=np.float64)
    feats[..., 1] = 1.0
    feats[..., 2 + WALL.texture] = 1.0
    inner = feats[radius : radius + h, radius : radius + w]
    inner[..., :] = 0.0
    tall = heights[world.terrain]
    inner[..., 0] = 1.0 - tall
    inner[..., 1] = tall
    rows = np.arange(h)[:, None]
    cols = np.arange(w)[None, :]
    inner[rows, cols, 2 + world.terrain] = 1.0
    inner[..., -1] = world.signature / 255.0
    world._features[radius] = feats
    return feats


def observe_cell(world: World, x: int, y: int, radius: int = DEFAULT_RADIUS) -> np.ndarray:
    if not world.in_grid(x, y):
        raise ValueError(f"cell ({x}, {y}) outside grid")
    feats = _feature_grid(world, radius)
    side = 2 * radius + 1
    window = feats[y : y + side, x : x + side]
    return window.reshape(-1).copy()


def render_observation(world: World, state: AgentState, radius: int = DEFAULT_RADIUS) -> np.ndarray:
    return observe_cell(world, state.x, state.y, radius)


def step(
    world: World,
    state: AgentState,
    action: Action,
    rng: np.random.Generator,
    monitor: bool = False,
    forbidden: frozenset[str] = frozenset({"mud"}),
) -> tuple[AgentState, Event]:
    if state.trapped:
        raise UsageError("step() from a trapped state")
    dx, dy = DELTAS[Action(action)]
    tx, ty = state.x + dx, state.y + dy
    target = world.kind_at(tx, ty) if world.in_grid(tx, ty) else WALL
    here = world.kind_at(state.x, state.y)
    if not target.traversable:
        return state, Event(collision=True, bumpiness=here.bumpiness, trapped=False, disengagement=False)
    if monitor and target.name in forbidden:
        return state, Event(collision=False, bumpiness=here.bumpiness, trapped=False, disengagement=True)
    trapped = bool(target.trap_prob > 0.0 and rng.random() < target.trap_prob)
    new_state = AgentState(tx, ty, trapped)
    return new_state, Event(collision=False, bumpiness=target.bumpiness, trapped=trapped, disengagement=False)


def safe_start_cells(world: World) -> np.ndarray:
    """(n, 2) array of (x, y) cells that are traversable and trap-free."""
    ok = np.array([k.traversable and k.trap_prob == 0.0 for k in CATALOG])
    ys, xs = np.nonzero(ok[world.terrain])
    return np.stack([xs, ys], axis=1)


def random_start(world: World, rng: np.random.Generator) -> AgentState:
    cells = safe_start_cells(world)
    if len(cells) == 0:
        raise ValueError("world has no safe start cell")
    x, y = cells[rng.integers(len(cells))]
    return AgentState(int(x), int(y))


class StickyWalk:
    """Random walk that repeats its previous action with probability p;
    fresh instance per episode."""

    def __init__(self, p_repeat: float = 0.6):
        self.p_repeat = p_repeat
        self._prev: int | None = None

    def __call__(self, obs: np.ndarray, rng: np.random.Generator) -> Action:
        if self._prev is not None and rng.random() < self.p_repeat:
            return Action(self._prev)
        act = Action(int(rng.integers(len(Action))))
        self._prev = int(act)
        return act


def uniform_walk(obs: np.ndarray, rng: np.random.Generator) -> Action:
    return Action(int(rng.integers(len(Action))))


def run_episode(
    world: World,
    policy,
    start: AgentState,
    max_steps: int,
    rng: np.random.Generator,
    monitor: bool = False,
    forbidden: frozenset[str] = frozenset({"mud"}),
    radius: int = DEFAULT_RADIUS,
):
    """Roll out policy(obs, rng) for max_steps or until trapped; returns a
    Trajectory with eval-only true positions riding alongside."""
    from ..trajdata.dataset import Trajectory

    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    obs_list, actions, events, positions = [], [], [], []
    state = start
    for _ in range(max_steps):
        obs = render_observation(world, state, radius)
        positions.append((state.x, state.y))
        act = Action(policy(obs, rng))
        state, event = step(world, state, act, rng, monitor=monitor, forbidden=forbidden)
        obs_list.append(obs)
        actions.append(int(act))
        events.append(event)
        if state.trapped:
            break
    return Trajectory.from_steps(
        observations=np.array(obs_list),
        actions=np.array(actions, dtype=np.uint8),
        events=events,
        eval_positions=np.array(positions, dtype=np.int64),
        world_id=world.world_id,
    )
