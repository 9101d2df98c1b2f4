"""Scripted evaluation worlds.

Each builder paints a terrain layout where appearance and physics
disagree in a controlled way, so learned and geometric planners can be
compared on known ground truth.
"""
from __future__ import annotations

import numpy as np

from .. import seeding
from ..errors import ConfigError
from .oracles import bfs_field, safe_mask
from .terrain import BRUSH, DIRT, MUD, PAVEMENT, TALL_GRASS, WALL
from .world import World, WorldSpec, generate_world


def _painted_world(width: int, height: int, seed: int) -> np.ndarray:
    grid = np.full((height, width), DIRT.texture, dtype=np.uint8)
    grid[0, :] = WALL.texture
    grid[-1, :] = WALL.texture
    grid[:, 0] = WALL.texture
    grid[:, -1] = WALL.texture
    return grid


def _finish(grid: np.ndarray, seed: int) -> World:
    h, w = grid.shape
    sig = seeding.stream(seed, seeding.SIGNATURE).integers(0, 256, size=(h, w), dtype=np.uint8)
    return World(width=w, height=h, terrain=grid, signature=sig, seed=seed)


def make_grass_shortcut_world(seed: int = 0) -> World:
    """A tall-grass band is the only way across: passable in truth,
    an obstacle to the height-channel planner."""
    grid = _painted_world(24, 16, seed)
    grid[1:15, 10:14] = TALL_GRASS.texture
    grid[2:5, 4:7] = BRUSH.texture
    grid[11:14, 17:20] = BRUSH.texture
    grid[7:10, 1:10] = PAVEMENT.texture
    grid[7:10, 14:23] = PAVEMENT.texture
    grid[7:10, 10:14] = TALL_GRASS.texture
    return _finish(grid, seed)


GRASS_START = (3, 8)
GRASS_GOAL = (20, 8)


def make_mud_trap_world(seed: int = 0) -> World:
    """A flat mud band sits on the straight route; the only safe crossing
    is a dirt corridor along the top edge."""
    grid = _painted_world(24, 16, seed)
    grid[2:15, 10:14] = MUD.texture
    grid[7:10, 1:10] = PAVEMENT.texture
    grid[7:10, 14:23] = PAVEMENT.texture
    grid[3:6, 5:8] = BRUSH.texture
    grid[11:14, 16:19] = BRUSH.texture
    return _finish(grid, seed)


MUD_START = (3, 8)
MUD_GOAL = (20, 8)


def make_training_world(seed: int = 0, size: int = 32) -> World:
    return generate_world(
        WorldSpec(
            width=size,
            height=size,
            densities={"tall_grass": 0.10, "brush": 0.15, "pavement": 0.12},
            blob_scale=4,
            seed=seed,
        )
    )


def make_explore_world(seed: int = 0, size: int = 64) -> World:
    return generate_world(
        WorldSpec(
            width=size,
            height=size,
            densities={"tall_grass": 0.12, "brush": 0.18, "pavement": 0.10},
            blob_scale=5,
            seed=seed,
        )
    )


def make_maze_world(seed: int = 0, nodes: int = 15, corridor: int = 5, wall_t: int = 3) -> World:
    """Corridor maze (spanning tree, no loops) padded to a 128-square by
    default. Walls are brush, rooms dirt with pavement accents."""
    period = corridor + wall_t
    content = 2 + wall_t + nodes * period
    side = content + (-content % 8)
    rng = seeding.stream(seed, seeding.TERRAIN, 0)
    grid = np.full((side, side), WALL.texture, dtype=np.uint8)
    grid[1 : content - 1, 1 : content - 1] = BRUSH.texture

    def room(i: int, j: int) -> tuple[slice, slice]:
        x0 = 1 + wall_t + i * period
        y0 = 1 + wall_t + j * period
        return slice(y0, y0 + corridor), slice(x0, x0 + corridor)

    for i in range(nodes):
        for j in range(nodes):
            ys, xs = room(i, j)
            grid[ys, xs] = PAVEMENT.texture if rng.random() < 0.25 else DIRT.texture

    visited = np.zeros((nodes, nodes), dtype=bool)
    visited[0, 0] = True
    stack = [(0, 0)]
    while stack:
        i, j = stack[-1]
        options = [
            (ni, nj)
            for ni, nj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1))
            if 0 <= ni < nodes and 0 <= nj < nodes and not visited[ni, nj]
        ]
        if not options:
            stack.pop()
            continue
        ni, nj = options[rng.integers(len(options))]
        ys, xs = room(i, j)
        if ni != i:
            x_gap = 1 + wall_t + max(i, ni) * period - wall_t
            grid[ys, x_gap : x_gap + wall_t] = DIRT.texture
        else:
            y_gap = 1 + wall_t + max(j, nj) * period - wall_t
            grid[y_gap : y_gap + wall_t, xs] = DIRT.texture
        visited[ni, nj] = True
        stack.append((ni, nj))

    grid[0, :] = WALL.texture
    grid[-1, :] = WALL.texture
    grid[:, 0] = WALL.texture
    grid[:, -1] = WALL.texture
    return _finish(grid, seed)


def sample_reachable_pair(
    world: World,
    rng: np.random.Generator,
    min_steps: int,
    max_steps: int,
    tries: int = 64,
) -> tuple[tuple[int, int], tuple[int, int], int]:
    """Random (start, goal, bfs_steps) with safe-oracle distance in range."""
    free = safe_mask(world)
    ys, xs = np.nonzero(free)
    if len(xs) == 0:
        raise ConfigError("world has no safe cells")
    for _ in range(tries):
        k = rng.integers(len(xs))
        start = (int(xs[k]), int(ys[k]))
        field = bfs_field(free, start)
        ok = (field >= min_steps) & (field <= max_steps) & free
        gys, gxs = np.nonzero(ok)
        if len(gxs) == 0:
            continue
        g = rng.integers(len(gxs))
        goal = (int(gxs[g]), int(gys[g]))
        return start, goal, int(field[goal[1], goal[0]])
    raise ConfigError(f"no pair with distance in [{min_steps}, {max_steps}] after {tries} tries")
