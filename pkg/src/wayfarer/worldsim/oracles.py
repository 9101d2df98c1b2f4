"""Ground-truth shortest-path oracles. Test/eval only: nothing here may
feed a learner."""
from __future__ import annotations

import numpy as np

from .terrain import CATALOG, HEIGHT_FLAT
from .world import World

_TRAVERSABLE = np.array([k.traversable for k in CATALOG])
_SAFE = np.array([k.traversable and k.trap_prob == 0.0 for k in CATALOG])
_FLAT = np.array([k.height == HEIGHT_FLAT for k in CATALOG])


def safe_mask(world: World) -> np.ndarray:
    return _SAFE[world.terrain]


def reckless_mask(world: World) -> np.ndarray:
    return _TRAVERSABLE[world.terrain]


def geometric_mask(world: World) -> np.ndarray:
    """The geometric abstraction: flat = free, tall = obstacle."""
    return _FLAT[world.terrain]


def bfs_field(free: np.ndarray, start: tuple[int, int]) -> np.ndarray:
    """4-connected BFS step counts from start over free cells; -1 where
    unreachable. The start cell itself is 0 even if its mask bit is off
    (an agent may leave a cell it could not enter)."""
    h, w = free.shape
    sx, sy = start
    dist = np.full((h, w), -1, dtype=np.int32)
    dist[sy, sx] = 0
    frontier = np.zeros((h, w), dtype=bool)
    frontier[sy, sx] = True
    d = 0
    while frontier.any():
        d += 1
        grow = np.zeros_like(frontier)
        grow[1:, :] |= frontier[:-1, :]
        grow[:-1, :] |= frontier[1:, :]
        grow[:, 1:] |= frontier[:, :-1]
        grow[:, :-1] |= frontier[:, 1:]
        grow &= free & (dist < 0)
        dist[grow] = d
        frontier = grow
    return dist


def oracle_distance(
    world: World,
    from_cell: tuple[int, int],
    to_cell: tuple[int, int],
    reckless: bool = False,
) -> int | None:
    """True shortest path length; None when unreachable. Safe oracle treats
    mud as blocked, reckless oracle walks through it."""
    if tuple(from_cell) == tuple(to_cell):
        return 0
    free = reckless_mask(world) if reckless else safe_mask(world)
    dist = bfs_field(free, tuple(from_cell))
    tx, ty = to_cell
    d = int(dist[ty, tx])
    return None if d < 0 else d


# neighbor probe order for deterministic path reconstruction
_STEPS = ((0, -1), (0, 1), (1, 0), (-1, 0))


def _trace_path(dist: np.ndarray, free: np.ndarray, goal: tuple[int, int]) -> list[tuple[int, int]]:
    h, w = dist.shape
    x, y = goal
    path = [(x, y)]
    d = int(dist[y, x])
    while d > 0:
        for dx, dy in _STEPS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and dist[ny, nx] == d - 1:
                x, y, d = nx, ny, d - 1
                path.append((x, y))
                break
        else:
            raise AssertionError("broken BFS field")
    path.reverse()
    return path


def shortest_path(
    world: World,
    from_cell: tuple[int, int],
    to_cell: tuple[int, int],
    free: np.ndarray,
) -> list[tuple[int, int]] | None:
    if tuple(from_cell) == tuple(to_cell):
        return [tuple(from_cell)]
    dist = bfs_field(free, tuple(from_cell))
    tx, ty = to_cell
    if dist[ty, tx] < 0:
        return None
    return _trace_path(dist, free, (tx, ty))


def geometric_baseline_plan(
    world: World,
    from_cell: tuple[int, int],
    to_cell: tuple[int, int],
) -> list[tuple[int, int]] | None:
    """Plan over the sensed height channel only: tall cells are obstacles,
    flat cells are free. Refuses grass shortcuts, routes through mud."""
    return shortest_path(world, from_cell, to_cell, geometric_mask(world))
