"""Exception hierarchy shared by the library and the CLI."""


class NescError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(NescError, ValueError):
    """Operand shapes do not conform."""


class UsageError(NescError, ValueError):
    """An API was called with arguments outside its contract."""


class DataError(NescError, ValueError):
    """Input data (corpus, embeddings, tags) is malformed."""


class BundleError(DataError):
    """A model bundle is corrupt, truncated or of an unknown version."""


class TrainingError(NescError, RuntimeError):
    """Training diverged (non-finite loss or gradient)."""
