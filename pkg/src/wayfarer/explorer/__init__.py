from .frontier import (
    ExploreConfig,
    ExploreResult,
    ModelBundle,
    explore_to_goal,
    navigate_with_hints,
    physical_frontier_score,
    write_trace,
)
from .heuristic import (
    OverheadHeuristic,
    TraversalRecord,
    auc_score,
    build_features,
    feature_length,
    loss_infonce,
    train_heuristic,
)
from .overhead import (
    DEFAULT_DOWNSAMPLE,
    DEFAULT_GPS_SIGMA,
    DEFAULT_P_CORRUPT,
    GpsReading,
    OverheadMap,
    build_overhead,
    gps_read,
    texture_grid,
)

__all__ = [
    "DEFAULT_DOWNSAMPLE",
    "DEFAULT_GPS_SIGMA",
    "DEFAULT_P_CORRUPT",
    "ExploreConfig",
    "ExploreResult",
    "GpsReading",
    "ModelBundle",
    "OverheadHeuristic",
    "OverheadMap",
    "TraversalRecord",
    "auc_score",
    "build_features",
    "build_overhead",
    "explore_to_goal",
    "feature_length",
    "gps_read",
    "loss_infonce",
    "navigate_with_hints",
    "physical_frontier_score",
    "texture_grid",
    "train_heuristic",
    "write_trace",
]
