"""World generation and the versioned world file format."""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .. import seeding
from ..errors import ConfigError, DataFormatError
from .terrain import CATALOG, KIND_BY_NAME, N_KINDS, WALL, TerrainKind

WORLD_MAGIC = b"WFW1"
_HEADER = struct.Struct("<4sIIQ")

MAX_SEED = 2**64


@dataclass(frozen=True)
class WorldSpec:
    """Generation parameters. densities maps kind name -> interior fraction;
    dirt is the remainder and may not be listed."""

    width: int
    height: int
    densities: dict[str, float] = field(default_factory=dict)
    blob_scale: int = 4
    seed: int = 0

    def validate(self) -> None:
        if self.width < 8 or self.height < 8:
            raise ConfigError(f"world dims {self.width}x{self.height} below minimum 8x8")
        if self.blob_scale < 1:
            raise ConfigError("blob_scale must be >= 1")
        if not 0 <= self.seed < MAX_SEED:
            raise ConfigError("seed must fit in 64 bits")
        total = 0.0
        for name, frac in self.densities.items():
            if name == "dirt":
                raise ConfigError("dirt is the remainder kind; do not give it a density")
            if name not in KIND_BY_NAME:
                raise ConfigError(f"unknown terrain kind {name!r}")
            if not 0.0 <= frac <= 1.0:
                raise ConfigError(f"density for {name!r} outside [0, 1]: {frac}")
            total += frac
        if total > 1.0 + 1e-12:
            raise ConfigError(f"densities sum to {total}, above 1")


@dataclass(eq=False)
class World:
    """Immutable after generation. terrain holds catalog ids, signature the
    per-cell appearance byte; both are (height, width) row-major."""

    width: int
    height: int
    terrain: np.ndarray
    signature: np.ndarray
    seed: int
    _features: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        expect = (self.height, self.width)
        if self.terrain.shape != expect or self.signature.shape != expect:
            raise ValueError("grid shape mismatch")
        self.terrain = np.ascontiguousarray(self.terrain, dtype=np.uint8)
        self.signature = np.ascontiguousarray(self.signature, dtype=np.uint8)

    def __eq__(self, other) -> bool:
        if not isinstance(other, World):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.seed == other.seed
            and np.array_equal(self.terrain, other.terrain)
            and np.array_equal(self.signature, other.signature)
        )

    def in_grid(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def kind_at(self, x: int, y: int) -> TerrainKind:
        return CATALOG[self.terrain[y, x]]

    @property
    def world_id(self) -> str:
        digest = hashlib.sha256(self.to_bytes()).hexdigest()[:12]
        return f"w{digest}"

    def to_bytes(self) -> bytes:
        cells = np.empty((self.height, self.width, 2), dtype=np.uint8)
        cells[..., 0] = self.terrain
        cells[..., 1] = self.signature
        return _HEADER.pack(WORLD_MAGIC, self.width, self.height, self.seed) + cells.tobytes()


def _value_noise(height: int, width: int, scale: int, rng: np.random.Generator) -> np.ndarray:
    """Bilinear value noise with smoothstep fade: lattice spacing = scale."""
    grid_h = height // scale + 2
    grid_w = width // scale + 2
    lattice = rng.random((grid_h, grid_w))
    ys = np.arange(height) / scale
    xs = np.arange(width) / scale
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    sy = fy * fy * (3.0 - 2.0 * fy)
    sx = fx * fx * (3.0 - 2.0 * fx)
    a = lattice[np.ix_(y0, x0)]
    b = lattice[np.ix_(y0, x0 + 1)]
    c = lattice[np.ix_(y0 + 1, x0)]
    d = lattice[np.ix_(y0 + 1, x0 + 1)]
    top = a + (b - a) * sx
    bottom = c + (d - c) * sx
    return top + (bottom - top) * sy


def generate_world(spec: WorldSpec) -> World:
    """Deterministic blob-terrain generation via per-kind quantile thresholds."""
    spec.validate()
    h, w = spec.height, spec.width
    terrain = np.full((h, w), KIND_BY_NAME["dirt"].texture, dtype=np.uint8)

    configured = [(KIND_BY_NAME[name], frac) for name, frac in spec.densities.items() if frac > 0.0]
    configured.sort(key=lambda pair: pair[0].texture)
    if configured:
        n_interior = (h - 2) * (w - 2)
        # strength = depth into each kind's own top-density quantile; the
        # deepest claim wins so overlaps stay contiguous per kind.
        best_strength = np.full(n_interior, -1.0)
        winner = np.full(n_interior, -1, dtype=np.int64)
        for kind, frac in configured:
            rng = seeding.stream(spec.seed, seeding.TERRAIN, kind.texture)
            noise = _value_noise(h, w, spec.blob_scale, rng)[1:-1, 1:-1].ravel()
            ranks = np.empty(n_interior, dtype=np.int64)
            ranks[np.argsort(noise, kind="stable")] = np.arange(n_interior)
            pct = (ranks + 0.5) / n_interior
            strength = (pct - (1.0 - frac)) / frac
            take = (strength > 0.0) & (strength > best_strength)
            best_strength[take] = strength[take]
            winner[take] = kind.texture
        assigned = winner.reshape(h - 2, w - 2)
        interior = terrain[1:-1, 1:-1]
        interior[assigned >= 0] = assigned[assigned >= 0]

    terrain[0, :] = WALL.texture
    terrain[-1, :] = WALL.texture
    terrain[:, 0] = WALL.texture
    terrain[:, -1] = WALL.texture

    sig_rng = seeding.stream(spec.seed, seeding.SIGNATURE)
    signature = sig_rng.integers(0, 256, size=(h, w), dtype=np.uint8)
    return World(width=w, height=h, terrain=terrain, signature=signature, seed=spec.seed)


def save_world(world: World, path) -> None:
    with open(path, "wb") as fh:
        fh.write(world.to_bytes())


def load_world(path) -> World:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise DataFormatError(f"world file truncated at offset {len(blob)}: header needs {_HEADER.size} bytes")
    magic, width, height, seed = _HEADER.unpack_from(blob, 0)
    if magic != WORLD_MAGIC:
        raise DataFormatError(f"bad world magic {magic!r} at offset 0")
    need = _HEADER.size + width * height * 2
    if len(blob) != need:
        raise DataFormatError(f"world file length {len(blob)} != {need} expected from header (offset {min(len(blob), need)})")
    cells = np.frombuffer(blob, dtype=np.uint8, offset=_HEADER.size).reshape(height, width, 2)
    bad = cells[..., 0] >= N_KINDS
    if bad.any():
        y, x = np.argwhere(bad)[0]
        off = _HEADER.size + 2 * (int(y) * width + int(x))
        raise DataFormatError(f"unknown terrain id {cells[y, x, 0]} at offset {off}")
    return World(width=width, height=height, terrain=cells[..., 0].copy(), signature=cells[..., 1].copy(), seed=seed)
