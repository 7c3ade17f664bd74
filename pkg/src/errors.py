"""Exception hierarchy for lmdl."""

from typing import Optional


class LMDLError(Exception):
    """Base class for all lmdl errors."""


class DataError(LMDLError, ValueError):
    """Malformed, ragged or otherwise unusable input data."""


class ConfigError(LMDLError, ValueError):
    """Invalid training or kernel configuration."""


class CoverageError(LMDLError, LookupError):
    """A class owns no prototype where one is required."""


class ModelFormatError(LMDLError, ValueError):
    """Model file is unreadable or has an unsupported format version."""


class TrainingAborted(LMDLError, RuntimeError):
    """Training hit a non-finite gradient or parameter."""

    def __init__(self, message: str, epoch: Optional[int] = None, sample: Optional[int] = None):
        self.epoch = epoch
        self.sample = sample
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if sample is not None:
            where.append(f"sample {sample}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
