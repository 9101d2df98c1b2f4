from .graph import (
    Landmark,
    MAP_MAGIC,
    MentalMap,
    NavConfig,
    PlanResult,
    STATUS_FOUND,
    STATUS_NO_PATH,
    dijkstra,
    load_map,
    save_map,
)
from .navigate import (
    NavResult,
    OUTCOME_BUDGET,
    OUTCOME_NO_PATH,
    OUTCOME_REACHED,
    OUTCOME_TRAPPED,
    build_map_from_dataset,
    distance_fn,
    navigate,
    pick_action,
)

__all__ = [
    "Landmark",
    "MAP_MAGIC",
    "MentalMap",
    "NavConfig",
    "NavResult",
    "OUTCOME_BUDGET",
    "OUTCOME_NO_PATH",
    "OUTCOME_REACHED",
    "OUTCOME_TRAPPED",
    "PlanResult",
    "STATUS_FOUND",
    "STATUS_NO_PATH",
    "build_map_from_dataset",
    "dijkstra",
    "distance_fn",
    "load_map",
    "navigate",
    "pick_action",
    "save_map",
]
