"""Dataset persistence: versioned binary (canonical) and JSON-lines (debug).

Observations are stored as 16-bit fixed point v*65535. Every rendered
channel value is k/255 for integer k and 65535 = 257*255, so the round
trip is bit-identical, not merely within tolerance.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import DataFormatError
from .dataset import Dataset, Trajectory

DATA_MAGIC = b"WFD1"

_FLAG_COLLISION = 1
_FLAG_TRAPPED = 2
_FLAG_DISENGAGE = 4


class _Reader:
    """Buffer cursor whose errors carry the failing offset."""

    def __init__(self, blob: bytes):
        self.blob = blob
        self.off = 0

    def take(self, n: int, what: str) -> bytes:
        if self.off + n > len(self.blob):
            raise DataFormatError(f"dataset file truncated at offset {self.off} while reading {what}")
        out = self.blob[self.off : self.off + n]
        self.off += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def array(self, dtype, count: int, what: str) -> np.ndarray:
        raw = self.take(count * np.dtype(dtype).itemsize, what)
        return np.frombuffer(raw, dtype=dtype).copy()


def quantize_obs(obs: np.ndarray) -> np.ndarray:
    if obs.min() < 0.0 or obs.max() > 1.0:
        raise ValueError("observation values outside [0, 1]")
    return np.round(obs * 65535.0).astype(np.uint16)


def dequantize_obs(q: np.ndarray) -> np.ndarray:
    return q.astype(np.float64) / 65535.0


def save_dataset(dataset: Dataset, path) -> None:
    prov = json.dumps(dataset.provenance, sort_keys=True).encode()
    parts = [DATA_MAGIC, struct.pack("<I", len(dataset.trajectories)), struct.pack("<I", len(prov)), prov]
    for traj in dataset.trajectories:
        h, width = traj.observations.shape
        wid = traj.world_id.encode()
        flags = (
            traj.collision.astype(np.uint8) * _FLAG_COLLISION
            | traj.trapped.astype(np.uint8) * _FLAG_TRAPPED
            | traj.disengagement.astype(np.uint8) * _FLAG_DISENGAGE
        )
        parts += [
            struct.pack("<IIH", h, width, len(wid)),
            wid,
            quantize_obs(traj.observations).tobytes(),
            traj.actions.astype(np.uint8).tobytes(),
            flags.tobytes(),
            traj.bumpiness.astype(np.float64).tobytes(),
            traj.eval_positions.astype(np.int32).tobytes(),
        ]
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob)
    magic = r.take(4, "magic")
    if magic != DATA_MAGIC:
        raise DataFormatError(f"bad dataset magic {magic!r} at offset 0")
    count = r.u32("trajectory count")
    prov_len = r.u32("provenance length")
    try:
        provenance = json.loads(r.take(prov_len, "provenance").decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"bad provenance JSON before offset {r.off}: {exc}") from exc
    trajectories = []
    for i in range(count):
        head = r.take(struct.calcsize("<IIH"), f"trajectory {i} header")
        h, width, wid_len = struct.unpack("<IIH", head)
        if h == 0:
            raise DataFormatError(f"trajectory {i} has zero length (offset {r.off})")
        world_id = r.take(wid_len, f"trajectory {i} world id").decode()
        obs = dequantize_obs(r.array(np.uint16, h * width, f"trajectory {i} observations").reshape(h, width))
        actions = r.array(np.uint8, h, f"trajectory {i} actions")
        flags = r.array(np.uint8, h, f"trajectory {i} event flags")
        bump = r.array(np.float64, h, f"trajectory {i} bumpiness")
        pos = r.array(np.int32, h * 2, f"trajectory {i} positions").reshape(h, 2).astype(np.int64)
        trajectories.append(
            Trajectory(
                observations=obs,
                actions=actions,
                collision=(flags & _FLAG_COLLISION) > 0,
                bumpiness=bump,
                trapped=(flags & _FLAG_TRAPPED) > 0,
                disengagement=(flags & _FLAG_DISENGAGE) > 0,
                eval_positions=pos,
                world_id=world_id,
            )
        )
    if r.off != len(blob):
        raise DataFormatError(f"dataset file has {len(blob) - r.off} trailing bytes at offset {r.off}")
    return Dataset(trajectories=trajectories, provenance=provenance)


def export_jsonl(dataset: Dataset, path) -> None:
    """Debug-only readable dump; not the canonical format."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"provenance": dataset.provenance}) + "\n")
        for i, traj in enumerate(dataset.trajectories):
            for t in range(len(traj)):
                row = {
                    "trajectory": i,
                    "t": t,
                    "world_id": traj.world_id,
                    "action": int(traj.actions[t]),
                    "collision": bool(traj.collision[t]),
                    "bumpiness": float(traj.bumpiness[t]),
                    "trapped": bool(traj.trapped[t]),
                    "disengagement": bool(traj.disengagement[t]),
                    "eval_position": [int(v) for v in traj.eval_positions[t]],
                    "observation": [float(v) for v in traj.observations[t]],
                }
                fh.write(json.dumps(row) + "\n")
