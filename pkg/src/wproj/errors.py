"""Exception types shared across the package."""


class WprojError(Exception):
    """Base class for all package-specific errors."""


class DimMismatchError(WprojError):
    """Operands live in different ambient dimensions."""


class EmptySupportError(WprojError):
    """A measure was constructed with no positive-weight atom."""


class SizeLimitError(WprojError):
    """Problem size exceeds the exact solver's hard limit."""


class MarginalMismatchError(WprojError):
    """Plans being composed do not share the required marginal."""


class OverlapError(WprojError):
    """Atoms too close for the analytic ball-union projection."""


class GridTooCoarseError(WprojError):
    """Grid spacing too large to resolve a ball."""


class InfeasibleCapacityError(WprojError):
    """Total grid capacity below the unit mass to be placed."""


class AtomOutsideGridError(WprojError):
    """A source atom lies outside the grid hull."""


class InvalidSpecError(WprojError):
    """Projection or run specification violates its invariants."""


class InfeasibleInputError(WprojError):
    """Input measure violates the density cap it is claimed to satisfy."""


class NoSignChangeError(WprojError):
    """Threshold bisection preconditions failed at this resolution."""


class DimensionTooSmallError(WprojError):
    """Counterexample construction requires dimension at least 2."""


class SolverStallError(WprojError):
    """Network simplex exceeded its pivot budget."""
