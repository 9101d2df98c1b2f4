"""Experiment runner.

Verbs cover the full pipeline; every command reads --config (TOML),
honors --seed as an override, and keeps all artifacts in --out. A
resolved copy of the config is written next to every output so each file
is traceable to a config hash.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import RunConfig, default_config, load_config
from .errors import ConfigError, DataFormatError
from .explorer.frontier import write_trace
from .mentalmap.graph import load_map, save_map
from .pipeline import (
    build_map,
    collect_dataset,
    fit_exploration_heuristic,
    make_world,
    run_exploration,
    run_navigation_eval,
    train_models,
)
from .skills.checkpoint import load_model, save_model
from .skills.train import save_loss_curve
from .trajdata.io import load_dataset, save_dataset
from .worldsim.world import load_world, save_world

WORLD_FILE = "world.wfw"
DATASET_FILE = "dataset.wfd"
MAP_FILE = "map.wfg"
MODELS_DIR = "models"


def _emit_resolved(config: RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved.toml").write_text(config.text())


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"missing {path} ({hint})")
    return path


def _load_models(out: Path, names: list[str]) -> dict:
    models = {}
    for name in names:
        models[name] = load_model(_require(out / MODELS_DIR / f"{name}.wfm", f"run `wayfarer train` first"))
    return models


def cmd_gen_world(config: RunConfig, out: Path) -> int:
    world = make_world(config)
    save_world(world, out / WORLD_FILE)
    print(f"wrote {out / WORLD_FILE} ({world.terrain.shape[1]}x{world.terrain.shape[0]}, id {world.world_id}, config {config.hash})")
    return 0


def cmd_collect(config: RunConfig, out: Path) -> int:
    world = load_world(_require(out / WORLD_FILE, "run `wayfarer gen-world` first"))
    dataset = collect_dataset(world, config)
    save_dataset(dataset, out / DATASET_FILE)
    steps = sum(len(t) for t in dataset.trajectories)
    print(f"wrote {out / DATASET_FILE} ({len(dataset.trajectories)} episodes, {steps} steps, config {config.hash})")
    return 0


def cmd_train(config: RunConfig, out: Path) -> int:
    dataset = load_dataset(_require(out / DATASET_FILE, "run `wayfarer collect` first"))
    models = train_models(dataset, config)
    mdir = out / MODELS_DIR
    mdir.mkdir(parents=True, exist_ok=True)
    for name, model in models.items():
        save_model(model, mdir / f"{name}.wfm")
        curve = getattr(model, "loss_curve_", None)
        if curve:
            save_loss_curve(curve, mdir / f"loss_{name}.csv")
        print(f"wrote {mdir / f'{name}.wfm'}")
    return 0


def cmd_build_map(config: RunConfig, out: Path) -> int:
    dataset = load_dataset(_require(out / DATASET_FILE, "run `wayfarer collect` first"))
    models = _load_models(out, ["distance"])
    mmap = build_map(dataset, models, config)
    save_map(mmap, out / MAP_FILE)
    (out / "map_edges.txt").write_text(mmap.edge_list_text())
    (out / "map_landmarks.txt").write_text(mmap.landmark_table_text())
    edges = sum(len(v) for v in mmap.edges.values())
    print(f"wrote {out / MAP_FILE} ({len(mmap)} landmarks, {edges} edges, config {config.hash})")
    return 0


def _nav_like(config: RunConfig, out: Path, runners: tuple, stem: str) -> int:
    world = load_world(_require(out / WORLD_FILE, "run `wayfarer gen-world` first"))
    names = ["policy", "distance"]
    if config.nav_config().veto_threshold is not None:
        names.append("events")
    models = _load_models(out, names)
    mmap = load_map(_require(out / MAP_FILE, "run `wayfarer build-map` first"))
    report = run_navigation_eval(world, models, mmap, config, runners=runners)
    report.to_json(out / f"{stem}.json")
    report.to_csv(out / f"{stem}.csv")
    for runner, s in report.summary.items():
        print(
            f"{runner}: success {s['success_rate']:.2f}, median ratio "
            f"{s['median_path_ratio']}, traps {s['trap_rate']:.2f} ({s['runs']} pairs, config {config.hash})"
        )
    print(f"wrote {out / f'{stem}.json'} and .csv")
    return 0


def cmd_navigate(config: RunConfig, out: Path) -> int:
    return _nav_like(config, out, ("learned",), "nav_metrics")


def cmd_eval(config: RunConfig, out: Path) -> int:
    return _nav_like(config, out, ("learned", "geometric"), "eval_metrics")


def cmd_explore(config: RunConfig, out: Path) -> int:
    names = ["policy", "distance", "encoder"]
    models = _load_models(out, names)
    heuristic = None
    if config.section("exploration")["use_heuristic"]:
        heuristic = fit_exploration_heuristic(config)
    report, artifacts = run_exploration(config, models, heuristic)
    report.to_json(out / "explore_metrics.json")
    report.to_csv(out / "explore_metrics.csv")
    for r, res in enumerate(artifacts):
        write_trace(out / f"explore_trace_{r}.jsonl", res.trace)
        save_map(res.mmap, out / f"explore_map_{r}.wfg")
    for runner, s in report.summary.items():
        print(
            f"{runner}: success {s['success_rate']:.2f}, median steps {s['median_steps']}, "
            f"reuse {s['median_reuse_ratio']} ({s['runs']} runs, config {config.hash})"
        )
    print(f"wrote {out / 'explore_metrics.json'} and .csv")
    return 0


COMMANDS = {
    "gen-world": cmd_gen_world,
    "collect": cmd_collect,
    "train": cmd_train,
    "build-map": cmd_build_map,
    "navigate": cmd_navigate,
    "explore": cmd_explore,
    "eval": cmd_eval,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wayfarer", description="grid-world navigation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="TOML run config (defaults apply if omitted)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=Path, default=Path("wayfarer_out"), help="artifact directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config is not None else default_config()
        if args.seed is not None:
            config = config.with_seed(args.seed)
        out = args.out
        _emit_resolved(config, out)
        return COMMANDS[args.command](config, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, DataFormatError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # runtime failures map to a stable exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
