"""Exception hierarchy shared across the pipeline.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericError -> 4. Anything else is an internal bug.
"""


class StenographError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(StenographError):
    """Invalid configuration, arguments, or unknown option keys."""


class DataError(StenographError):
    """Malformed or inconsistent input data (datasets, label files, checkpoints)."""


class NumericError(StenographError):
    """Numerical failure: shape mismatch in tensor ops, non-finite values."""


class ShapeError(NumericError):
    """Tensor operands do not conform."""


class CheckpointVersionError(DataError):
    """Checkpoint file has an unrecognized format version."""


class CheckpointShapeError(DataError):
    """Checkpoint tensor shapes disagree with its config or the target data."""


class CheckpointCorruptError(DataError):
    """Checkpoint file is truncated or not parseable."""


class UndefinedMetricError(StenographError):
    """A statistic is undefined for the given inputs (e.g. single-class AUC)."""
