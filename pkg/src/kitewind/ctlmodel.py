"""Control-oriented steering model: gamma_dot ~= K * delta + T.

``K`` is the steering gain (1/(s m)) and ``T`` the gravity/apparent-force bias
(rad/s).  The module also carries the exact velocity-angle rate of the full
model and the intermediate crosswind expression, which the tests use to tie
the simplified model back to the point-mass dynamics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateVelocity
from .wingdyn import V_EPS, EnvParams, KiteState, WingParams


@dataclass(frozen=True)
class SteeringModelInput:
    speed: float
    theta: float
    phi: float
    phi_dot: float
    gamma: float
    wind_speed: float = 0.0

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError("speed must be > 0")


def gain_slope(wing: WingParams, env: EnvParams) -> float:
    """rho CL A / (2 m ds), the gain per unit of (1 + 1/E^2)^2 |v|."""
    return env.air_density_rho * wing.lift_CL * wing.area_A / (2.0 * wing.mass_m * wing.span_ds)


def efficiency_factor(eeq: float) -> float:
    return (1.0 + 1.0 / eeq**2) ** 2


def gain_ktilde(wing: WingParams, env: EnvParams, speed: float) -> float:
    if speed < 0:
        raise ValueError("speed must be >= 0")
    return gain_slope(wing, env) * efficiency_factor(wing.eq_efficiency_Eeq) * speed


def gain_ktilde_wind(wing: WingParams, env: EnvParams, theta: float, phi: float, wind_speed: float) -> float:
    """Steering gain with the crosswind speed ``Eeq cos(theta) cos(phi) |W|``."""
    speed = wing.eq_efficiency_Eeq * math.cos(theta) * math.cos(phi) * wind_speed
    return gain_ktilde(wing, env, max(0.0, speed))


def bias_ttilde(inp: SteeringModelInput, env: EnvParams, v_eps: float = V_EPS) -> float:
    if inp.speed <= v_eps:
        raise DegenerateVelocity(f"speed {inp.speed:.3g} m/s")
    return env.gravity_g * math.cos(inp.theta) * math.sin(inp.gamma) / inp.speed \
        + math.sin(inp.theta) * inp.phi_dot


def gamma_dot_simplified(delta_total: float, inp: SteeringModelInput, wing: WingParams, env: EnvParams) -> float:
    return gain_ktilde(wing, env, inp.speed) * delta_total + bias_ttilde(inp, env)


def gamma_rate(state: KiteState, theta_ddot: float, phi_ddot: float) -> float:
    """Exact time derivative of the velocity angle from the angular accelerations."""
    ct, st = math.cos(state.theta), math.sin(state.theta)
    td, pd = state.theta_dot, state.phi_dot
    den = ct * ct * pd * pd + td * td
    if den == 0.0:
        raise DegenerateVelocity("zero angular speed")
    return (ct * td * phi_ddot - st * pd * td * td - ct * pd * theta_ddot) / den


def gamma_dot_crosswind(state: KiteState, delta_total: float, wing: WingParams, env: EnvParams,
                        eff_wind_speed: float, delta_alpha: float) -> float:
    """Velocity-angle rate with the crosswind force simplification.

    Uses small-roll linearisation (``psi = delta / ds``, ``eta = delta_alpha
    psi``), heading equal to the velocity angle and gravity as the only
    non-aerodynamic force.  ``eff_wind_speed`` and ``delta_alpha`` are taken as
    given so that callers can substitute either measured or crosswind values.
    """
    r, m = env.tether_r, wing.mass_m
    ct, st = math.cos(state.theta), math.sin(state.theta)
    td, pd = state.theta_dot, state.phi_dot
    den = ct * ct * pd * pd + td * td
    if den == 0.0:
        raise DegenerateVelocity("zero angular speed")
    gamma = math.atan2(ct * pd, td)
    psi = delta_total / wing.span_ds
    q = 0.5 * env.air_density_rho * wing.area_A * eff_wind_speed**2
    along = td * math.cos(gamma) + ct * pd * math.sin(gamma)
    across = td * math.sin(gamma) - ct * pd * math.cos(gamma)
    steer = q * wing.lift_CL / (r * m) * along / den * (delta_alpha**2 + 1.0) * psi
    balance = q * (wing.lift_CL * delta_alpha - wing.drag_CDeq) * across / (r * m * den)
    apparent = st * pd
    grav = env.gravity_g * ct * ct * pd / (r * den)
    return steer + balance + apparent + grav


def crosswind_substitutions(wing: WingParams, speed: float) -> tuple[float, float]:
    """``(|W_e|, delta_alpha)`` under the crosswind force balance.

    ``delta_alpha = 1/Eeq`` and the tangential effective wind equals the wing
    speed, so ``|W_e|^2 = (1 + delta_alpha^2) |v|^2``.
    """
    da = 1.0 / wing.eq_efficiency_Eeq
    return speed * math.sqrt(1.0 + da * da), da
