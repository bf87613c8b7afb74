"""Exception types raised across the package."""


class RimsteerError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(RimsteerError):
    """Operands have incompatible shapes."""


class NonHermitianInput(RimsteerError):
    """A Hermitian matrix was required but the Hermiticity check failed."""


class NotPSD(RimsteerError):
    """A positive semidefinite matrix has an eigenvalue below the floor."""


class TooManySpins(RimsteerError):
    """Requested bath exceeds the configured spin-count cap."""


class ZeroDisplacement(RimsteerError):
    """Dipolar tensor requested for two spins at the same position."""


class ZeroOperator(RimsteerError):
    """An operator with zero norm where a nonzero one is required."""


class NotAChannel(RimsteerError):
    """A superoperator failed the CPTP validation thresholds."""


class NumericalDegeneracy(RimsteerError):
    """Fixed-point block identification is ambiguous at the working tolerance."""


class ZeroProbabilityBranch(RimsteerError):
    """A measurement outcome with numerically vanishing probability was selected."""


class InvalidState(RimsteerError):
    """A conditional state drifted outside the density-matrix tolerances."""


class TooLarge(RimsteerError):
    """Exhaustive enumeration requested beyond the sequence-length cap."""


class NotCommuting(RimsteerError):
    """A closed form valid only for commuting operators was requested."""


class SingularResolvent(RimsteerError):
    """A unit eigenvalue leaked into the decaying part of the channel."""


class NegativeRate(RimsteerError):
    """Dissipator rates must be non-negative."""


class DimensionCap(RimsteerError):
    """Composite system exceeds the dense-matrix size cap."""


class ConfigError(RimsteerError):
    """Experiment configuration is malformed; message carries key context."""
