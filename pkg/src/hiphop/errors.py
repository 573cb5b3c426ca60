"""Exception hierarchy shared by all modules."""


class HipHopError(Exception):
    """Base class for every error raised by the package."""


class NumericalFailure(HipHopError):
    """A numerical procedure could not produce a result."""


class CollisionError(NumericalFailure):
    """Two bodies came closer than the configured collision floor."""


class StepFailure(NumericalFailure):
    """The adaptive integrator's step size underflowed or the step budget ran out."""


class DegenerateChannel(HipHopError):
    """An event channel vanishes identically along the trajectory."""


class NoConvergence(NumericalFailure):
    """Newton iteration hit its iteration cap without meeting the tolerance."""


class SingularJacobian(NumericalFailure):
    """The augmented Newton matrix is numerically singular."""


class RankDeficient(HipHopError):
    """The two residual gradients are parallel: a bifurcation candidate.

    Attributes
    ----------
    sin_angle : float
        Sine of the angle between the two Jacobian rows.
    """

    def __init__(self, message, sin_angle):
        super().__init__(message)
        self.sin_angle = sin_angle


class SeedRejected(HipHopError):
    """The continuation seed could not be corrected onto the solution set."""


class NoNewBranch(HipHopError):
    """Every branch-switching solve landed back on the parent branch."""


class NoBracket(HipHopError):
    """The branch does not bracket the requested rotation angle."""


class NotAPeriodicPoint(HipHopError):
    """The point does not solve the required shooting system to tolerance."""
