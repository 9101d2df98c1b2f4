"""Coarse overhead imagery and noisy GPS.

Neither signal is allowed anywhere near the low-level models; they exist
only for the search heuristic and frontier scoring.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..worldsim.terrain import N_KINDS
from ..worldsim.world import World

DEFAULT_DOWNSAMPLE = 4
DEFAULT_P_CORRUPT = 0.1
DEFAULT_GPS_SIGMA = 2.0


@dataclass(frozen=True)
class GpsReading:
    x: float
    y: float

    def offset_to(self, other: "GpsReading") -> tuple[float, float]:
        return (other.x - self.x, other.y - self.y)


@dataclass
class OverheadMap:
    textures: np.ndarray  # (coarse_h, coarse_w) uint8 texture ids
    factor: int
    world_width: int
    world_height: int

    def coarse_cell(self, x: float, y: float) -> tuple[int, int]:
        cx = int(np.clip(np.floor(x / self.factor), 0, self.textures.shape[1] - 1))
        cy = int(np.clip(np.floor(y / self.factor), 0, self.textures.shape[0] - 1))
        return cx, cy


def build_overhead(world: World, rng, factor: int = DEFAULT_DOWNSAMPLE, p_corrupt: float = DEFAULT_P_CORRUPT) -> OverheadMap:
    """Downsample textures by dominant id per block (ties to the lowest
    id), then corrupt each coarse cell independently with p_corrupt."""
    if factor < 1:
        raise ConfigError("overhead downsample factor must be >= 1")
    if not 0.0 <= p_corrupt <= 1.0:
        raise ConfigError("p_corrupt must lie in [0, 1]")
    h, w = world.terrain.shape
    ch = -(-h // factor)
    cw = -(-w // factor)
    textures = np.zeros((ch, cw), dtype=np.uint8)
    tex = texture_grid(world)
    for cy in range(ch):
        for cx in range(cw):
            block = tex[cy * factor : (cy + 1) * factor, cx * factor : (cx + 1) * factor]
            counts = np.bincount(block.reshape(-1), minlength=N_KINDS)
            textures[cy, cx] = int(np.argmax(counts))
    corrupt = rng.random(textures.shape) < p_corrupt
    noise = rng.integers(0, N_KINDS, size=textures.shape, dtype=np.uint8)
    textures[corrupt] = noise[corrupt]
    return OverheadMap(textures=textures, factor=factor, world_width=w, world_height=h)


def texture_grid(world: World) -> np.ndarray:
    from ..worldsim.terrain import CATALOG

    lut = np.array([k.texture for k in CATALOG], dtype=np.uint8)
    return lut[world.terrain]


def gps_read(cell: tuple[int, int], rng, sigma: float = DEFAULT_GPS_SIGMA, world_width: int | None = None, world_height: int | None = None) -> GpsReading:
    """True cell plus isotropic Gaussian noise, clamped to the grid."""
    x = cell[0] + sigma * rng.standard_normal()
    y = cell[1] + sigma * rng.standard_normal()
    if world_width is not None:
        x = float(np.clip(x, 0.0, world_width - 1))
    if world_height is not None:
        y = float(np.clip(y, 0.0, world_height - 1))
    return GpsReading(x=float(x), y=float(y))
