"""Exception hierarchy shared by all modules."""


class BesselAreaError(Exception):
    """Base class for numerical failures raised by this package."""


class DomainError(BesselAreaError, ValueError):
    """Argument outside the mathematical domain of a function."""


class PoleError(DomainError):
    """Argument sits on a pole (gamma at non-positive integers, bad lower parameters)."""


class ModeError(BesselAreaError, ValueError):
    """Boundary mode incompatible with the drift strength, or formula outside its case."""


class CancellationError(BesselAreaError):
    """A series evaluation could not be certified to the requested accuracy."""


class ConvergenceError(BesselAreaError):
    """An iterative solver failed to converge or to bracket a root."""


class InsufficientSpectrumError(BesselAreaError):
    """Too few eigenvalues were supplied for the requested evaluation."""


class ContourError(BesselAreaError):
    """Numerical Laplace inversion did not settle while doubling the node count."""


class TailFitError(BesselAreaError):
    """Power-law tail fit of a slowly convergent series was not accurate enough."""


class CoverageError(BesselAreaError):
    """A tabulated distribution does not cover the range a computation needs."""


class AcceptanceStarvationError(BesselAreaError):
    """Monte Carlo rejection sampler accepts too few trial paths."""
