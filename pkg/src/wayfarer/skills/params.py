"""Flat parameter vectors with a named shape table.

Losses are pure functions of the flat array, which is what both Adam and
finite-difference checking want; named views keep layer access readable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ParamVector:
    flat: np.ndarray
    table: dict[str, tuple[int, tuple[int, ...]]]

    def __post_init__(self):
        self.flat = np.asarray(self.flat, dtype=np.float64)
        total = sum(int(np.prod(shape)) for _, shape in self.table.values())
        if total != self.flat.size:
            raise ValueError(f"shape table covers {total} entries, flat has {self.flat.size}")

    @classmethod
    def from_blocks(cls, blocks: list[tuple[str, np.ndarray]]) -> "ParamVector":
        table = {}
        offset = 0
        chunks = []
        for name, arr in blocks:
            arr = np.asarray(arr, dtype=np.float64)
            table[name] = (offset, arr.shape)
            chunks.append(arr.reshape(-1))
            offset += arr.size
        return cls(flat=np.concatenate(chunks) if chunks else np.zeros(0), table=table)

    def get(self, name: str) -> np.ndarray:
        offset, shape = self.table[name]
        size = int(np.prod(shape))
        return self.flat[offset : offset + size].reshape(shape)

    def block_slice(self, name: str) -> slice:
        offset, shape = self.table[name]
        return slice(offset, offset + int(np.prod(shape)))

    def block_names(self) -> list[str]:
        return list(self.table)

    def copy(self) -> "ParamVector":
        return ParamVector(flat=self.flat.copy(), table=self.table)

    def zeros_like(self) -> "ParamVector":
        return ParamVector(flat=np.zeros_like(self.flat), table=self.table)

    def check_finite(self) -> None:
        if not np.isfinite(self.flat).all():
            raise ValueError("non-finite parameter entries")


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def mlp_blocks(prefix: str, sizes: list[int], rng: np.random.Generator) -> list[tuple[str, np.ndarray]]:
    """Weight/bias blocks for a chain of linear layers (sizes includes
    input and output widths)."""
    blocks = []
    for i in range(len(sizes) - 1):
        blocks.append((f"{prefix}/W{i + 1}", glorot(rng, sizes[i], sizes[i + 1])))
        blocks.append((f"{prefix}/b{i + 1}", np.zeros(sizes[i + 1])))
    return blocks


def mlp_params(prefix: str, sizes: list[int], rng: np.random.Generator) -> ParamVector:
    return ParamVector.from_blocks(mlp_blocks(prefix, sizes, rng))
