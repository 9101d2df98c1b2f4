"""Terrain kinds and the versioned catalog.

Appearance (height, texture) deliberately diverges from physics
(traversable, trap_prob): tall grass looks like an obstacle but is
passable, mud looks like open ground but can trap.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import DataFormatError

CATALOG_VERSION = 1

HEIGHT_FLAT = "flat"
HEIGHT_TALL = "tall"


@dataclass(frozen=True)
class TerrainKind:
    """One row of the terrain catalog.

    texture is the kind's stable id; it doubles as the index into the
    texture one-hot block of observations.
    """

    name: str
    height: str
    texture: int
    traversable: bool
    trap_prob: float
    bumpiness: float

    def __post_init__(self):
        if self.height not in (HEIGHT_FLAT, HEIGHT_TALL):
            raise ValueError(f"bad height {self.height!r}")
        if not 0.0 <= self.trap_prob <= 1.0:
            raise ValueError("trap_prob outside [0, 1]")
        if not 0.0 <= self.bumpiness <= 1.0:
            raise ValueError("bumpiness outside [0, 1]")


PAVEMENT = TerrainKind("pavement", HEIGHT_FLAT, 0, True, 0.0, 0.0)
DIRT = TerrainKind("dirt", HEIGHT_FLAT, 1, True, 0.0, 0.5)
TALL_GRASS = TerrainKind("tall_grass", HEIGHT_TALL, 2, True, 0.0, 0.3)
BRUSH = TerrainKind("brush", HEIGHT_TALL, 3, False, 0.0, 0.7)
WALL = TerrainKind("wall", HEIGHT_TALL, 4, False, 0.0, 1.0)
MUD = TerrainKind("mud", HEIGHT_FLAT, 5, True, 0.8, 0.9)

CATALOG: tuple[TerrainKind, ...] = (PAVEMENT, DIRT, TALL_GRASS, BRUSH, WALL, MUD)
KIND_BY_NAME = {k.name: k for k in CATALOG}
N_KINDS = len(CATALOG)

# grep-able sanity: ids must equal catalog positions.
assert all(k.texture == i for i, k in enumerate(CATALOG))

_FIELDS = ("name", "height", "texture", "traversable", "trap_prob", "bumpiness")


def catalog_to_text(catalog: tuple[TerrainKind, ...] = CATALOG) -> str:
    """Serialize a catalog as the plain-text key-value table."""
    lines = [f"catalog_version {CATALOG_VERSION}"]
    for kind in catalog:
        parts = [
            f"name={kind.name}",
            f"height={kind.height}",
            f"texture={kind.texture}",
            f"traversable={int(kind.traversable)}",
            f"trap_prob={kind.trap_prob!r}",
            f"bumpiness={kind.bumpiness!r}",
        ]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def catalog_from_text(text: str) -> tuple[TerrainKind, ...]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataFormatError("empty catalog text")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "catalog_version":
        raise DataFormatError(f"bad catalog header: {lines[0]!r}")
    if int(head[1]) != CATALOG_VERSION:
        raise DataFormatError(f"unsupported catalog version {head[1]}")
    kinds = []
    for ln in lines[1:]:
        kv = dict(part.split("=", 1) for part in ln.split())
        missing = [f for f in _FIELDS if f not in kv]
        if missing:
            raise DataFormatError(f"catalog row missing {missing}: {ln!r}")
        kinds.append(
            TerrainKind(
                name=kv["name"],
                height=kv["height"],
                texture=int(kv["texture"]),
                traversable=bool(int(kv["traversable"])),
                trap_prob=float(kv["trap_prob"]),
                bumpiness=float(kv["bumpiness"]),
            )
        )
    return tuple(kinds)
