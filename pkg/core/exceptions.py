"""Exception hierarchy for nevo_gspt.

Every exception carries the process exit code the CLI maps it to.
"""

from typing import Optional, Sequence


class NevoError(Exception):
    """Base class for all nevo_gspt errors."""

    exit_code: int = 1


class ConfigurationError(NevoError):
    """Invalid or inconsistent configuration (ranges, fractions, manifests)."""

    exit_code = 2


class IngestionError(NevoError):
    """A dataset file could not be read into a valid Dataset."""

    exit_code = 3

    def __init__(self, message: str, row: Optional[int] = None, path: Optional[str] = None):
        self.row = row
        self.path = path
        location = ""
        if path:
            location += f"{path}"
        if row is not None:
            location += f"{':' if location else ''}row {row}"
        super().__init__(f"{location}: {message}" if location else message)


class ShapeError(NevoError, ValueError):
    """Dimension or length mismatch between a model and its data."""


class DivergenceError(NevoError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, loss_curve: Sequence[float] = ()):
        self.epoch = epoch
        self.loss_curve = list(loss_curve)
        super().__init__(f"Non-finite training loss at epoch {epoch}")


class CacheCoherenceError(NevoError, ValueError):
    """Cached semantics of an individual are inconsistent."""


class DeflateUnavailableError(NevoError):
    """Deflate requested on an individual with no perturbation blocks."""


class BlockIndexError(NevoError, IndexError):
    """Deflate index outside the individual's block list."""
