"""Exception types shared across the toolkit."""


class WayfarerError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(WayfarerError):
    """Invalid configuration value, unknown key, or inconsistent options."""


class DataFormatError(WayfarerError):
    """A file failed magic/version/structure checks while being read."""


class UsageError(WayfarerError):
    """An API was called in a state where the call is meaningless."""


class TrainingDiverged(WayfarerError):
    """Optimization produced a non-finite loss or parameter."""

    def __init__(self, step: int, value: float):
        super().__init__(f"non-finite loss at optimization step {step}: {value!r}")
        self.step = step
        self.value = value
