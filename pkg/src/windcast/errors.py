"""Exception hierarchy shared across the package."""


class WindcastError(Exception):
    """Base class for all package errors."""


class SchemaError(WindcastError):
    """Input file lacks a required column."""


class EmptyDataError(WindcastError):
    """No usable rows were found."""


class DegenerateFeatureError(WindcastError):
    """A feature has z_max == z_min and cannot be min-max normalized."""


class InsufficientDataError(WindcastError):
    """Series too short for the requested windowing."""


class InfeasibleKError(WindcastError):
    """Fewer distinct points than requested clusters."""


class DimensionError(WindcastError, ValueError):
    """Array shape does not match what the model expects."""


class NumericError(WindcastError, FloatingPointError):
    """Non-finite value produced or supplied."""


class DivergedTrainingError(WindcastError):
    def __init__(self, epoch: int, message: str = "training loss became non-finite"):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class UnsupportedVersionError(WindcastError):
    """Checkpoint written by an incompatible format version."""


class IntegrityError(WindcastError):
    """Checkpoint checksum mismatch or malformed payload."""


class InitializationError(WindcastError):
    """Optimizer could not obtain a single finite fitness in the initial population."""


class ConfigError(WindcastError):
    """Invalid run or model configuration."""


class NoDataError(WindcastError):
    """Run directory holds nothing to report on."""
