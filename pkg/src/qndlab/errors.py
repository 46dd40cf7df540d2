"""Exception hierarchy shared across the package."""


class QndError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(QndError):
    """Invalid or inconsistent configuration values."""


class NonConvergence(QndError):
    """An iterative solver failed to settle within its budget."""


class DivergentSusceptibility(QndError):
    """The effective mechanical response is at or past an instability."""


class DomainError(QndError):
    """A closed-form expression was evaluated outside its domain."""


class DegenerateDenominator(QndError):
    """A coherence denominator is non-positive."""


class FormatError(QndError):
    """A dataset file failed structural validation."""


class TooFewSegments(QndError):
    """Not enough kept segments for a split-based estimator."""


class SingularCrossMatrix(QndError):
    """The two-channel cross-spectral system is rank deficient."""


class GridMismatch(QndError):
    """Two spectra do not share a frequency grid."""


class InsufficientBand(QndError):
    """A required calibration band falls outside the available grid."""


class DegenerateTarget(QndError):
    """A fit target carries no usable uncertainty information."""
