"""Grid-world navigation from experience: simulators, hindsight-labeled
datasets, learned policies and distances, topological maps, and
goal-directed exploration."""

from . import explorer, mentalmap, skills, trajdata, worldsim
from .config import RunConfig, default_config, load_config, resolve
from .errors import ConfigError, DataFormatError, TrainingDiverged, UsageError, WayfarerError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataFormatError",
    "RunConfig",
    "TrainingDiverged",
    "UsageError",
    "WayfarerError",
    "default_config",
    "explorer",
    "load_config",
    "mentalmap",
    "resolve",
    "skills",
    "trajdata",
    "worldsim",
    "__version__",
]
