"""Exception hierarchy shared by the dynamics, control and simulation modules."""


class KiteError(Exception):
    """Base class for all kitewind errors."""


class DegenerateVelocity(KiteError):
    """Wing speed too small for the velocity angle to be defined."""


class DegenerateEffWind(KiteError):
    """Tangent-plane projection of the effective wind vanishes; heading undefined."""


class RollOutOfRange(KiteError):
    """Steering input exceeds the wing span, so the roll angle is undefined."""


class EtaUndefined(KiteError):
    """|tan(delta_alpha) * tan(psi)| > 1."""


class ZenithSingularity(KiteError):
    """cos(theta) too close to zero for the azimuth equation of motion."""


class DegenerateTarget(KiteError):
    """The wing coincides with the active guidance target."""


class NotHurwitz(KiteError):
    """A vertex matrix of the polytope is not Hurwitz."""


class Infeasible(KiteError):
    """No common Lyapunov matrix could be certified."""

    def __init__(self, msg, margin):
        super().__init__(msg)
        self.margin = margin


class InsufficientData(KiteError):
    """Too few valid samples for an analysis."""


class ConfigError(KiteError):
    """Invalid or unreadable configuration."""
