"""Exception types shared across the package."""


class WidthlabError(Exception):
    pass


class OutsideTube(WidthlabError):
    """Point is outside the region where nearest-point projection is well posed."""


class TubeEscape(WidthlabError):
    """A smoothed/averaged value left the projection tube (smoothing radius too large)."""


class DomainMismatch(WidthlabError):
    pass


class DimensionMismatch(WidthlabError):
    pass


class TraceTooFar(WidthlabError):
    """Boundary traces differ too much for the collar construction."""


class NoCommonPoint(WidthlabError):
    """Boundary traces never agree, so the collar estimate does not apply."""


class BoundaryMismatch(WidthlabError):
    pass


class OverlapViolation(WidthlabError):
    """Balls in a family are required to have pairwise disjoint closures."""


class EnergyTooLarge(WidthlabError):
    """Region energy exceeds the small-energy threshold of the solver."""


class NoConvergence(WidthlabError):
    def __init__(self, sweeps, residual):
        super().__init__(f"no convergence after {sweeps} sweeps (residual {residual:.3e})")
        self.sweeps = sweeps
        self.residual = residual


class ScheduleEmpty(WidthlabError):
    """No improving ball family was found on the high-energy slices."""


class KindUnknown(WidthlabError):
    pass


class NotConcentrated(WidthlabError):
    """Not enough energy in the ball to renormalize at the requested level."""


class NonPositiveC(WidthlabError):
    pass


class NoZero(WidthlabError):
    """Trace does not vanish anywhere."""


class PreconditionFail(WidthlabError):
    pass


class MissingInput(WidthlabError):
    pass


class ConfigError(WidthlabError):
    pass
