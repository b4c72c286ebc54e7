"""Exception hierarchy shared across the package.

Every error raised by public API functions derives from AndorlensError so
callers can catch one base type. Subclasses carry the context a caller needs
to act (offending mask, missing cache keys, iteration index, ...).
"""


class AndorlensError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(AndorlensError, ValueError):
    """A parameter is outside its supported range (e.g. variable count cap)."""


class DataError(AndorlensError, ValueError):
    """Input data violates a contract: non-finite entries, bad probabilities."""


class ShapeError(AndorlensError, ValueError):
    """Array lengths or variable counts do not match."""


class AlignmentError(ShapeError):
    """Objects that must share the same variable set / indexing do not."""


class OptimizationError(AndorlensError, RuntimeError):
    """The sparsifier diverged; carries the iteration index."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class PartialTableError(AndorlensError, RuntimeError):
    """A value table could not be completed; carries the missing masks."""

    def __init__(self, message: str, missing_masks: list[int]):
        super().__init__(message)
        self.missing_masks = list(missing_masks)


class CacheIntegrityError(AndorlensError, RuntimeError):
    """The score cache holds an entry that cannot be used; carries the key."""

    def __init__(self, message: str, key: str):
        super().__init__(message)
        self.key = key


class DatasetValidationError(AndorlensError, ValueError):
    """A sample violates the dataset schema; carries per-sample reports."""

    def __init__(self, message: str, reports=None):
        super().__init__(message)
        self.reports = reports or []


class UndefinedRatioError(AndorlensError, ZeroDivisionError):
    """Effect ratios are requested but the total strength is zero."""


class DependencyError(AndorlensError, RuntimeError):
    """A pipeline stage needs artifacts that have not been produced yet."""
