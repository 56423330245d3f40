"""Exception types raised by the toolkit."""


class RiemetricError(Exception):
    """Base class for all errors raised by riemetric."""


class SingularMetricError(RiemetricError):
    """A metric matrix failed the SPD check (broken metric family)."""


class RankDeficiencyError(RiemetricError):
    """A pullback Jacobian lost full column rank (map not locally injective)."""


class DomainError(RiemetricError, ValueError):
    """A chart point lies outside the domain of a metric field."""


class BlowUpError(RiemetricError):
    """An integrated state exceeded the magnitude bound."""


class NoConvergenceError(RiemetricError):
    """An iterative solver stopped before meeting its tolerance.

    The best iterate found so far is attached as ``best`` together with its
    residual, so callers may still use it.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class EfficiencyError(RiemetricError):
    """Rejection sampling acceptance rate fell below the usable floor."""


class ShapeError(RiemetricError, ValueError):
    """Parameter vector or array has an unexpected shape."""


class NonFiniteLossError(RiemetricError, ArithmeticError):
    """A loss evaluation returned NaN or infinity; ``coordinate`` names the probe."""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate
