"""Exception types shared across the package."""


class LfMimoError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(LfMimoError, ValueError):
    """Antenna/stream counts are inconsistent or violate resolvability."""


class ZeroVector(LfMimoError, ValueError):
    """A direction vector with zero norm was passed where one is required."""


class InsufficientTraining(LfMimoError, ValueError):
    """Codebook training set too small for the requested codebook size."""


class FormatError(LfMimoError, ValueError):
    """Malformed codebook file or scenario document."""


class RankDeficient(LfMimoError, ValueError):
    """Channel matrix rank is too low for the requested number of streams."""


class ConvergenceError(LfMimoError, RuntimeError):
    """Iterative solver hit its iteration cap before meeting tolerance."""


class LengthError(LfMimoError, ValueError):
    """Bit sequence length incompatible with the selected constellation."""


class UnknownPreset(LfMimoError, KeyError):
    """Requested scenario preset does not exist."""
