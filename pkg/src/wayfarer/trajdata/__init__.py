from .dataset import Dataset, Trajectory, make_provenance, replay_positions
from .io import export_jsonl, load_dataset, save_dataset
from .relabel import (
    RelabelStrategy,
    RelabeledArrays,
    RelabeledSample,
    eligible_anchors,
    fixed_offset,
    negative_mix,
    replay_reaches_goal,
    sample_event_windows,
    sample_relabeled,
    sample_relabeled_arrays,
    sample_transitions,
    trajectory_final,
    uniform_future,
)

__all__ = [
    "Dataset",
    "Trajectory",
    "RelabelStrategy",
    "RelabeledSample",
    "sample_relabeled",
    "save_dataset",
    "load_dataset",
    "export_jsonl",
]
