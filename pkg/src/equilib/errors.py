"""Exception types shared across the solver."""


class EquilibError(Exception):
    """Base class for all solver errors."""


class SingularPoint(EquilibError):
    """Evaluation requested at (or within guard distance of) a charge location."""


class DegreeOverflow(EquilibError):
    """Derivative order too high for the coefficient representation."""


class InvalidTau(EquilibError):
    """Safe distance tau outside (0, 1]."""


class EmptySum(EquilibError):
    """sum combinator called with no members."""


class EmptyProduct(EquilibError):
    """product combinator called with no members."""


class TooFewCharges(EquilibError):
    """Exclusion radius needs at least two charges."""


class UnboundedDomain(EquilibError):
    """Domain polytope is unbounded along some axis."""


class EmptyPolytope(EquilibError):
    """Projection target has no feasible point."""


class BudgetExceeded(EquilibError):
    """Subdivision budget exhausted before a certificate was reached.

    Carries the cell that could not be resolved, when known.
    """

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class NotFound(EquilibError):
    """Both Hessian-determinant sign branches infeasible: no delta-strongly
    non-degenerate equilibrium in the domain."""


class Exhausted(EquilibError):
    """Auto delta-halving schedule hit its floor without a success."""

    def __init__(self, message, floor=None):
        super().__init__(message)
        self.floor = floor


class SingularHessian(EquilibError):
    """Hessian numerically singular where an inverse is required."""


class TooFine(EquilibError):
    """Brute-force scan grid would exceed the size cap."""


class ParseError(EquilibError):
    """Instance file malformed."""
