"""Exception types raised across the package."""


class BarrierPlanError(Exception):
    """Base class for all errors raised by this package."""


class DegeneratePairError(BarrierPlanError):
    """A hull pair is in a configuration with no well-defined witness
    geometry, e.g. a midplane was requested at zero distance."""


class BoundaryViolationError(BarrierPlanError):
    """A barrier term was evaluated at or beyond its domain boundary
    (nonpositive margin, or unit-or-larger plane normal)."""


class NoSeparatingPlaneError(BarrierPlanError):
    """No strictly separating plane exists for a hull pair, i.e. the
    hulls touch or overlap (up to the contact threshold)."""


class InnerSolveError(BarrierPlanError):
    """The per-pair plane subproblem failed to converge."""


class InfeasibleStartError(BarrierPlanError):
    """An optimization was started from a configuration with touching
    or overlapping hulls."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class LineSearchError(BarrierPlanError):
    """Backtracking reduced the step below the minimum length without
    finding a decrease."""


class ScenarioError(BarrierPlanError):
    """A scenario file is malformed or references undefined entities."""
