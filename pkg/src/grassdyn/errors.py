"""Exception types shared across the package."""


class GrassdynError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(GrassdynError):
    """Operands live in spaces of incompatible dimension."""


class RankDeficiencyError(GrassdynError):
    """A tuple of vectors is numerically dependent (not in X_n)."""


class DimensionDropError(GrassdynError):
    """An operator collapsed a subspace to lower dimension."""


class KernelHitError(GrassdynError):
    """A projective orbit reached the zero vector."""


class MassLossError(GrassdynError):
    """Truncation leaked more mass than the configured guard allows."""


class SpectrumUnsupportedError(GrassdynError):
    """No closed-form spectrum is available for the operator."""


class SchemeInconsistencyError(GrassdynError):
    """No admissible control value exists at some index."""


class TruncationError(GrassdynError):
    """A computation needs coordinates beyond the configured cap."""


class ConfigError(GrassdynError):
    """A config file failed validation; message carries the field path."""
