"""Exception types shared across the simulator."""


class UownError(Exception):
    """Base class for every error raised by this package."""


class DomainError(UownError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InfeasibleError(UownError):
    """No admissible parameter choice satisfies the requested constraints."""


class LinkInfeasibleError(InfeasibleError):
    """A directed link cannot be realized under the given pointing regime.

    Raised for geometry that would need a divergence angle beyond the
    transceiver limit, or for degenerate geometry (overlapping frames,
    coincident nodes).  Routing layers treat this as "no edge", never as a
    fatal condition.
    """


class NoRouteError(UownError):
    """The feasibility graph contains no path from the source to any sink."""


class SolverError(UownError):
    """An iterative solver exhausted its budget before reaching tolerance."""


class ConfigError(UownError, ValueError):
    """Invalid, ill-typed, or unknown configuration input."""
