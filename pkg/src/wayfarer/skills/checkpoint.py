"""Model checkpoints: magic "WFM1", JSON metadata, named float64 arrays.

Covers every estimator kind plus bare ParamVectors; hyperparameters are
restored through the constructor so a loaded model behaves like the
original, fitted state included.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import DataFormatError
from ..trajdata.relabel import RelabelStrategy
from .params import ParamVector
from .qfit import MlpQ, TabularQ
from . import models

MODEL_MAGIC = b"WFM1"


def strategy_to_json(strategy: RelabelStrategy | None):
    if strategy is None:
        return None
    return {
        "mode": strategy.mode,
        "k": strategy.k,
        "p_neg": strategy.p_neg,
        "base": strategy_to_json(strategy.base),
    }


def strategy_from_json(data) -> RelabelStrategy | None:
    if data is None:
        return None
    return RelabelStrategy(
        mode=data["mode"],
        k=data["k"],
        p_neg=data["p_neg"],
        base=strategy_from_json(data["base"]),
    )


def _pack_arrays(arrays: list[tuple[str, np.ndarray]]) -> bytes:
    parts = [struct.pack("<I", len(arrays))]
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        nm = name.encode()
        parts.append(struct.pack("<H", len(nm)))
        parts.append(nm)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
        parts.append(arr.tobytes())
    return b"".join(parts)


def _unpack_arrays(blob: bytes, off: int) -> list[tuple[str, np.ndarray]]:
    def need(n: int, what: str):
        nonlocal off
        if off + n > len(blob):
            raise DataFormatError(f"model file truncated at offset {off} while reading {what}")
        chunk = blob[off : off + n]
        off += n
        return chunk

    (count,) = struct.unpack("<I", need(4, "array count"))
    arrays = []
    for i in range(count):
        (name_len,) = struct.unpack("<H", need(2, f"array {i} name length"))
        name = need(name_len, f"array {i} name").decode()
        (ndim,) = struct.unpack("<B", need(1, f"array {i} ndim"))
        shape = struct.unpack(f"<{ndim}I", need(4 * ndim, f"array {i} shape")) if ndim else ()
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(need(8 * size, f"array {i} data"), dtype=np.float64).reshape(shape).copy()
        arrays.append((name, data))
    if off != len(blob):
        raise DataFormatError(f"model file has trailing bytes at offset {off}")
    return arrays


def _param_arrays(pv: ParamVector) -> list[tuple[str, np.ndarray]]:
    return [(name, pv.get(name)) for name in pv.block_names()]


_KINDS = {
    "GoalConditionedPolicy": models.GoalConditionedPolicy,
    "DistanceRegressor": models.DistanceRegressor,
    "QFunction": models.QFunction,
    "EventPredictor": models.EventPredictor,
    "SubgoalEncoder": models.SubgoalEncoder,
}


def save_model(est, path) -> None:
    kind = type(est).__name__
    if kind not in _KINDS:
        raise ValueError(f"cannot checkpoint {kind}")
    hyper = est.get_params(deep=False)
    if "strategy" in hyper:
        hyper["strategy"] = strategy_to_json(hyper["strategy"])
    fitted: dict = {}
    arrays: list[tuple[str, np.ndarray]] = []
    if hasattr(est, "obs_len_"):
        fitted["obs_len"] = int(est.obs_len_)
    if hasattr(est, "loss_curve_"):
        fitted["loss_curve"] = [float(x) for x in est.loss_curve_]
    if hasattr(est, "params_"):
        fitted["param_blocks"] = [[n, list(est.params_.table[n][1])] for n in est.params_.block_names()]
        arrays += _param_arrays(est.params_)
    if isinstance(est, models.QFunction) and hasattr(est, "table_"):
        fitted["tabular"] = True
        arrays += [
            ("table/obs_matrix", est.table_.obs_matrix),
            ("table/q", est.table_.q),
            ("table/seen", est.table_.seen.astype(np.float64)),
        ]
    if isinstance(est, models.QFunction) and hasattr(est, "mlp_"):
        fitted["mlp_gamma"] = est.mlp_.gamma
        fitted["param_blocks"] = [[n, list(est.mlp_.pv.table[n][1])] for n in est.mlp_.pv.block_names()]
        arrays += _param_arrays(est.mlp_.pv)
        fitted["loss_curve"] = [float(x) for x in est.mlp_.curve]
    meta = json.dumps({"kind": kind, "hyper": hyper, "fitted": fitted}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC + struct.pack("<I", len(meta)) + meta + _pack_arrays(arrays))


def load_model(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != MODEL_MAGIC:
        raise DataFormatError(f"bad model magic {blob[:4]!r} at offset 0")
    (meta_len,) = struct.unpack("<I", blob[4:8])
    if 8 + meta_len > len(blob):
        raise DataFormatError(f"model file truncated at offset 8: metadata needs {meta_len} bytes")
    try:
        meta = json.loads(blob[8 : 8 + meta_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"bad model metadata at offset 8: {exc}") from exc
    arrays = dict(_unpack_arrays(blob, 8 + meta_len))
    kind = meta.get("kind")
    if kind not in _KINDS:
        raise DataFormatError(f"unknown model kind {kind!r}")
    hyper = meta["hyper"]
    if "strategy" in hyper:
        hyper["strategy"] = strategy_from_json(hyper["strategy"])
    est = _KINDS[kind](**hyper)
    fitted = meta["fitted"]
    if "obs_len" in fitted:
        est.obs_len_ = fitted["obs_len"]
    if "param_blocks" in fitted:
        blocks = [(name, arrays[name].reshape(shape)) for name, shape in fitted["param_blocks"]]
        pv = ParamVector.from_blocks(blocks)
        if kind == "QFunction":
            est.mlp_ = MlpQ(pv=pv, gamma=fitted["mlp_gamma"], curve=fitted.get("loss_curve", []))
        else:
            est.params_ = pv
    if fitted.get("tabular"):
        obs_matrix = arrays["table/obs_matrix"]
        index = {np.ascontiguousarray(row).tobytes(): i for i, row in enumerate(obs_matrix)}
        est.table_ = TabularQ(
            obs_matrix=obs_matrix,
            index=index,
            q=arrays["table/q"],
            seen=arrays["table/seen"] > 0.5,
            gamma=est.gamma,
        )
    if "loss_curve" in fitted and kind != "QFunction":
        est.loss_curve_ = fitted["loss_curve"]
    return est
