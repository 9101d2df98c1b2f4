"""Run configuration: TOML in, validated and fully-defaulted dict out.

Every run emits its resolved config next to its outputs; the sha256 of
that text is the config hash stamped on all metrics.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .mentalmap.graph import NavConfig
from .explorer.frontier import ExploreConfig
from .skills.train import TrainConfig
from .trajdata.relabel import (
    RelabelStrategy,
    fixed_offset,
    negative_mix,
    trajectory_final,
    uniform_future,
)

try:
    import tomllib as _toml
except ModuleNotFoundError:  # Python < 3.11
    import tomli as _toml

WORLD_KINDS = ("generated", "grass_shortcut", "mud_trap", "maze", "explore")
POLICY_KINDS = ("sticky", "uniform")
MODEL_NAMES = ("policy", "distance", "events", "encoder")
STRATEGY_MODES = ("uniform_future", "fixed_offset", "trajectory_final", "negative_mix")

DEFAULTS: dict = {
    "seed": 0,
    "world": {
        "kind": "generated",
        "width": 32,
        "height": 32,
        "blob_scale": 4,
        "maze_nodes": 15,
        "densities": {"tall_grass": 0.10, "brush": 0.15, "pavement": 0.12},
    },
    "collection": {
        "episodes": 200,
        "horizon": 60,
        "policy": "sticky",
        "p_repeat": 0.6,
        "monitor": True,
        "radius": 2,
    },
    "training": {
        "objective": "gcbc",
        "models": ["policy", "distance", "events"],
        "strategy": {"mode": "uniform_future", "k": 1, "p_neg": 0.2, "base": "uniform_future"},
        "learning_rate": 3e-3,
        "batch_size": 64,
        "steps": 2000,
        "gamma": 0.95,
        "awac_lambda": 1.0,
        "w_max": 20.0,
        "vib_beta": 0.05,
        "target_refresh": 500,
        "hidden": 64,
        "event_horizon": 4,
        "latent_dim": 8,
        "q_mode": "tabular",
    },
    "navigation": {
        "tau_edge": 8.0,
        "tau_sparse": 3.0,
        "tau_wp": 2.0,
        "replan_period": 5,
        "budget": 400,
        "greedy": True,
        "veto_threshold": 0.0,
        "pairs": 50,
        "pair_min_steps": 10,
        "pair_max_steps": 40,
    },
    "exploration": {
        "budget": 5000,
        "c_fringe": 2,
        "subgoal_horizon": 10,
        "alpha": 0.1,
        "n_neg": 16,
        "sigma_gps": 2.0,
        "p_corrupt": 0.1,
        "downsample": 4,
        "patch_radius": 4,
        "use_heuristic": False,
        "world_size": 64,
        "world_seed_offset": 1000,
        "runs": 1,
        "heuristic_worlds": 40,
        "heuristic_paths": 5,
        "heuristic_train_steps": 600,
    },
}


def _check_type(path: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"key '{path}' must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"key '{path}' must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"key '{path}' must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"key '{path}' must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"key '{path}' must be a list of strings")
        return list(value)
    raise ConfigError(f"key '{path}' has unsupported type")


def _merge_section(name: str, user: dict, defaults: dict) -> dict:
    out = {}
    for key, value in user.items():
        if key not in defaults:
            raise ConfigError(f"unknown key '{name}.{key}'")
    for key, default in defaults.items():
        path = f"{name}.{key}"
        if key not in user:
            out[key] = json.loads(json.dumps(default))  # deep copy of plain data
        elif isinstance(default, dict):
            if not isinstance(user[key], dict):
                raise ConfigError(f"key '{path}' must be a table")
            if key == "densities":
                from .worldsim.terrain import KIND_BY_NAME

                for dk, dv in user[key].items():
                    if dk not in KIND_BY_NAME or dk in ("dirt", "wall"):
                        raise ConfigError(f"unknown key '{path}.{dk}'")
                    if isinstance(dv, bool) or not isinstance(dv, (int, float)):
                        raise ConfigError(f"key '{path}.{dk}' must be a number")
                out[key] = {dk: float(dv) for dk, dv in user[key].items()}
            else:
                out[key] = _merge_section(path, user[key], default)
        else:
            out[key] = _check_type(path, user[key], default)
    return out


def _validate_choices(resolved: dict) -> None:
    checks = [
        ("world.kind", resolved["world"]["kind"], WORLD_KINDS),
        ("collection.policy", resolved["collection"]["policy"], POLICY_KINDS),
        ("training.strategy.mode", resolved["training"]["strategy"]["mode"], STRATEGY_MODES),
        ("training.strategy.base", resolved["training"]["strategy"]["base"], STRATEGY_MODES[:3]),
    ]
    checks.append(("training.objective", resolved["training"]["objective"], ("gcbc", "expected_q", "awac")))
    checks.append(("training.q_mode", resolved["training"]["q_mode"], ("tabular", "mlp")))
    for path, value, allowed in checks:
        if value not in allowed:
            raise ConfigError(f"key '{path}' must be one of {list(allowed)}, got {value!r}")
    for m in resolved["training"]["models"]:
        if m not in MODEL_NAMES:
            raise ConfigError(f"key 'training.models' contains unknown model {m!r}")
    if not 0.0 <= resolved["navigation"]["veto_threshold"] < 1.0:
        raise ConfigError("key 'navigation.veto_threshold' must lie in [0, 1)")
    if not 0 <= resolved["seed"] < 2**64:
        raise ConfigError("key 'seed' must be a non-negative 64-bit integer")


@dataclass
class RunConfig:
    resolved: dict

    @property
    def seed(self) -> int:
        return self.resolved["seed"]

    def section(self, name: str) -> dict:
        return self.resolved[name]

    def with_seed(self, seed: int) -> "RunConfig":
        out = json.loads(json.dumps(self.resolved))
        out["seed"] = seed
        cfg = RunConfig(resolved=out)
        _validate_choices(out)
        return cfg

    def text(self) -> str:
        lines = [f"seed = {self.resolved['seed']}", ""]
        for name in ("world", "collection", "training", "navigation", "exploration"):
            lines.append(f"[{name}]")
            for key, value in self.resolved[name].items():
                lines.append(f"{key} = {_toml_value(value)}")
            lines.append("")
        return "\n".join(lines)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()[:12]

    def nav_config(self) -> NavConfig:
        s = self.resolved["navigation"]
        veto = s["veto_threshold"] if s["veto_threshold"] > 0.0 else None
        cfg = NavConfig(
            tau_edge=s["tau_edge"],
            tau_sparse=s["tau_sparse"],
            tau_wp=s["tau_wp"],
            replan_period=s["replan_period"],
            budget=s["budget"],
            greedy=s["greedy"],
            veto_threshold=veto,
        )
        cfg.validate()
        return cfg

    def explore_config(self) -> ExploreConfig:
        s = self.resolved["exploration"]
        cfg = ExploreConfig(
            budget=s["budget"],
            c_fringe=s["c_fringe"],
            subgoal_horizon=s["subgoal_horizon"],
            alpha=s["alpha"],
            n_neg=s["n_neg"],
        )
        cfg.validate()
        return cfg

    def train_config(self) -> TrainConfig:
        s = self.resolved["training"]
        cfg = TrainConfig(
            learning_rate=s["learning_rate"],
            batch_size=s["batch_size"],
            steps=s["steps"],
            gamma=s["gamma"],
            awac_lambda=s["awac_lambda"],
            w_max=s["w_max"],
            vib_beta=s["vib_beta"],
            target_refresh=s["target_refresh"],
            hidden=s["hidden"],
            event_horizon=s["event_horizon"],
            latent_dim=s["latent_dim"],
        )
        cfg.validate()
        return cfg

    def strategy(self) -> RelabelStrategy:
        s = self.resolved["training"]["strategy"]
        base = _plain_strategy(s["base"], s["k"])
        if s["mode"] == "negative_mix":
            return negative_mix(base, s["p_neg"])
        return _plain_strategy(s["mode"], s["k"])


def _plain_strategy(mode: str, k: int) -> RelabelStrategy:
    if mode == "uniform_future":
        return uniform_future()
    if mode == "fixed_offset":
        return fixed_offset(k)
    return trajectory_final()


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    if isinstance(value, dict):
        inner = ", ".join(f"{k} = {_toml_value(v)}" for k, v in value.items())
        return "{" + inner + "}"
    raise ConfigError(f"cannot serialize config value {value!r}")


def resolve(user: dict) -> RunConfig:
    if not isinstance(user, dict):
        raise ConfigError("config root must be a table")
    for key in user:
        if key != "seed" and key not in DEFAULTS:
            raise ConfigError(f"unknown config section '{key}'")
    resolved = {"seed": _check_type("seed", user.get("seed", DEFAULTS["seed"]), 0)}
    for name in ("world", "collection", "training", "navigation", "exploration"):
        section = user.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"section '{name}' must be a table")
        resolved[name] = _merge_section(name, section, DEFAULTS[name])
    _validate_choices(resolved)
    return RunConfig(resolved=resolved)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = _toml.load(fh)
    except FileNotFoundError:
        raise
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}")
    return resolve(data)


def default_config() -> RunConfig:
    return resolve({})
