"""Point-mass dynamics of a tethered wing flying on the wind window.

Frames
------
``G = (X, Y, Z)`` is inertial and centred at the ground unit (GU): ``X`` points
downwind, ``Z`` up.  The wing sits at elevation ``theta`` and azimuth ``phi``
on a sphere of radius ``r``.  ``L = (N, E, D)`` is the local frame at the wing:
``N`` is tangent to the sphere and points to the zenith, ``D`` points to the GU
and ``E`` completes the right-handed triad.

All functions are pure.  :func:`dynamics_rhs` is the readable reference
implementation; :func:`fast_rhs` is a scalar re-implementation of the same
equations used in the simulator inner loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateEffWind,
    DegenerateVelocity,
    EtaUndefined,
    RollOutOfRange,
    ZenithSingularity,
)

V_EPS = 1e-6
COS_EPS = 1e-3
DELTA_ALPHA_FLAG = 0.3


@dataclass(frozen=True)
class WingParams:
    """Lumped wing constants.

    ``eq_efficiency_Eeq`` is lift over equivalent drag.  When line drag terms
    are given, the line contribution is added on top of ``CL / Eeq``.
    """

    area_A: float
    mass_m: float
    span_ds: float
    lift_CL: float
    eq_efficiency_Eeq: float
    line_drag_CDl: float = 0.0
    line_area_Al: float = 0.0

    def __post_init__(self):
        for name in ("area_A", "mass_m", "span_ds", "lift_CL"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.eq_efficiency_Eeq >= 1:
            raise ValueError(f"eq_efficiency_Eeq must be >= 1, got {self.eq_efficiency_Eeq}")
        if self.line_drag_CDl < 0 or self.line_area_Al < 0:
            raise ValueError("line drag terms must be >= 0")

    @property
    def drag_CDeq(self) -> float:
        return self.lift_CL / self.eq_efficiency_Eeq

    def drag_coefficient(self, delta_alpha: float = 0.0) -> float:
        """Equivalent drag coefficient including the optional line term."""
        line = self.line_drag_CDl * self.line_area_Al * math.cos(delta_alpha) / (4.0 * self.area_A)
        return self.drag_CDeq + line


@dataclass(frozen=True)
class EnvParams:
    tether_r: float = 30.0
    attach_distance_d: float = 0.5
    air_density_rho: float = 1.2
    gravity_g: float = 9.81

    def __post_init__(self):
        if not self.tether_r > 0:
            raise ValueError("tether_r must be > 0")
        if self.attach_distance_d < 0:
            raise ValueError("attach_distance_d must be >= 0")
        if not self.air_density_rho > 0 or not self.gravity_g > 0:
            raise ValueError("air_density_rho and gravity_g must be > 0")


@dataclass(frozen=True)
class KiteState:
    theta: float
    phi: float
    theta_dot: float
    phi_dot: float

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.phi, self.theta_dot, self.phi_dot])

    @classmethod
    def from_array(cls, x) -> "KiteState":
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]))

    def is_valid(self) -> bool:
        """True inside the nominal flight region 0 < theta < pi/2, |phi| < pi/2."""
        return 0.0 < self.theta < math.pi / 2 and abs(self.phi) < math.pi / 2


@dataclass(frozen=True)
class Kinematics:
    pos_G: np.ndarray
    vel_L: np.ndarray
    eff_wind_L: np.ndarray
    speed: float
    gamma: float
    xi: float
    delta_alpha: float

    @property
    def eff_wind_speed(self) -> float:
        return float(np.linalg.norm(self.eff_wind_L))

    @property
    def incidence_flagged(self) -> bool:
        return abs(self.delta_alpha) > DELTA_ALPHA_FLAG


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def rotation_L_to_G(theta: float, phi: float) -> np.ndarray:
    """Rotation taking L-frame components to G-frame components.

    Columns are the unit vectors ``e_N``, ``e_E``, ``e_D`` expressed in ``G``.
    """
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    return np.array(
        [
            [-cp * st, -sp, -cp * ct],
            [-sp * st, cp, -sp * ct],
            [ct, 0.0, -st],
        ]
    )


def position_G(theta: float, phi: float, r: float) -> np.ndarray:
    ct = math.cos(theta)
    return r * np.array([math.cos(phi) * ct, math.sin(phi) * ct, math.sin(theta)])


def velocity_L(state: KiteState, r: float) -> np.ndarray:
    return np.array([r * state.theta_dot, r * math.cos(state.theta) * state.phi_dot, 0.0])


def kinematics(state: KiteState, env: EnvParams, wind_G, v_eps: float = V_EPS) -> Kinematics:
    """Derived kinematic quantities at ``state`` under ground wind ``wind_G``.

    The heading ``xi`` is the direction the wing faces into the apparent wind,
    i.e. the tangent-plane direction of ``-W_e``; under small sideslip it
    coincides with the velocity angle ``gamma``.  ``delta_alpha`` is positive
    when the effective wind points away from the GU.

    Raises
    ------
    DegenerateVelocity
        if the speed is below ``v_eps``.
    DegenerateEffWind
        if the tangent projection of the effective wind is below ``v_eps``.
    """
    r = env.tether_r
    R = rotation_L_to_G(state.theta, state.phi)
    vel = velocity_L(state, r)
    speed = float(np.hypot(vel[0], vel[1]))
    if speed < v_eps:
        raise DegenerateVelocity(f"speed {speed:.3g} m/s below {v_eps:g} m/s")
    wind_L = R.T @ np.asarray(wind_G, dtype=float)
    we = wind_L - vel
    we_t = math.hypot(we[0], we[1])
    if we_t < v_eps:
        raise DegenerateEffWind("effective wind has no tangent-plane component")
    we_norm = float(np.linalg.norm(we))
    gamma = math.atan2(vel[1], vel[0])
    xi = math.atan2(-we[1], -we[0])
    delta_alpha = math.asin(max(-1.0, min(1.0, -we[2] / we_norm)))
    return Kinematics(
        pos_G=position_G(state.theta, state.phi, r),
        vel_L=vel,
        eff_wind_L=we,
        speed=speed,
        gamma=gamma,
        xi=xi,
        delta_alpha=delta_alpha,
    )


def geometric_input(state: KiteState, env: EnvParams) -> float:
    """Equivalent steering deviation induced by the attachment-point spacing."""
    return -env.attach_distance_d * math.sin(state.phi) * math.cos(state.theta)


def _heading_matrix(xi: float) -> np.ndarray:
    c, s = math.cos(xi), math.sin(xi)
    return np.array([[-c, -s, 0.0], [-s, c, 0.0], [0.0, 0.0, -1.0]])


def roll_angles(delta_total: float, delta_alpha: float, span: float) -> tuple[float, float]:
    """Roll angle ``psi`` and the auxiliary angle ``eta`` for a steering input."""
    if abs(delta_total) > span:
        raise RollOutOfRange(f"|delta| = {abs(delta_total):.4g} m exceeds span {span:g} m")
    psi = math.asin(delta_total / span)
    arg = math.tan(delta_alpha) * math.tan(psi)
    if abs(arg) > 1.0:
        raise EtaUndefined(f"tan(delta_alpha) tan(psi) = {arg:.4g}")
    return psi, math.asin(arg)


def wind_axes_L(xi: float, delta_alpha: float, psi: float, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Drag direction ``x_w`` and lift direction ``z_w`` in the L frame."""
    M = _heading_matrix(xi)
    sa, ca = math.sin(delta_alpha), math.cos(delta_alpha)
    cpsi, spsi = math.cos(psi), math.sin(psi)
    x_w = M @ np.array([ca, 0.0, sa])
    z_w = M @ np.array(
        [
            -cpsi * math.cos(eta) * sa,
            cpsi * math.sin(eta) * sa + spsi * ca,
            cpsi * math.cos(eta) * ca,
        ]
    )
    return x_w, z_w


def aero_force_L(kin: Kinematics, delta_total: float, wing: WingParams, env: EnvParams) -> np.ndarray:
    """Aerodynamic force (lift + equivalent drag) in the L frame, N."""
    psi, eta = roll_angles(delta_total, kin.delta_alpha, wing.span_ds)
    x_w, z_w = wind_axes_L(kin.xi, kin.delta_alpha, psi, eta)
    q = 0.5 * env.air_density_rho * wing.area_A * float(kin.eff_wind_L @ kin.eff_wind_L)
    return q * (wing.lift_CL * z_w + wing.drag_coefficient(kin.delta_alpha) * x_w)


def gravity_force_L(state: KiteState, wing: WingParams, env: EnvParams) -> np.ndarray:
    mg = wing.mass_m * env.gravity_g
    return np.array([-mg * math.cos(state.theta), 0.0, mg * math.sin(state.theta)])


def accelerations(state: KiteState, force_L, wing: WingParams, env: EnvParams,
                  cos_eps: float = COS_EPS) -> tuple[float, float]:
    """Angular accelerations ``(theta_ddot, phi_ddot)`` for a total L-frame force."""
    ct = math.cos(state.theta)
    if ct <= cos_eps:
        raise ZenithSingularity(f"cos(theta) = {ct:.3g} <= {cos_eps:g}")
    st = math.sin(state.theta)
    rm = env.tether_r * wing.mass_m
    theta_dd = force_L[0] / rm - st * ct * state.phi_dot**2
    phi_dd = force_L[1] / (rm * ct) + 2.0 * (st / ct) * state.theta_dot * state.phi_dot
    return theta_dd, phi_dd


def dynamics_rhs(state: KiteState, delta_u: float, env: EnvParams, wing: WingParams, wind_G,
                 cos_eps: float = COS_EPS) -> np.ndarray:
    """Time derivative ``(theta_dot, phi_dot, theta_ddot, phi_ddot)``.

    ``delta_u`` is the line-length difference commanded at the GU; the
    geometric input is added internally.
    """
    if math.cos(state.theta) <= cos_eps:
        raise ZenithSingularity(f"cos(theta) = {math.cos(state.theta):.3g} <= {cos_eps:g}")
    kin = kinematics(state, env, wind_G)
    delta = delta_u + geometric_input(state, env)
    force = aero_force_L(kin, delta, wing, env) + gravity_force_L(state, wing, env)
    theta_dd, phi_dd = accelerations(state, force, wing, env, cos_eps)
    return np.array([state.theta_dot, state.phi_dot, theta_dd, phi_dd])


def fast_rhs(theta, phi, theta_dot, phi_dot, delta_u, wx, wy, wz,
             r, d, rho, g, area, mass, span, cl, cdeq, line_cda=0.0):
    """Scalar version of :func:`dynamics_rhs` for the simulator hot loop.

    ``cdeq`` is ``CL / Eeq``; ``line_cda`` is ``CDl * Al / (4 A)``.  Returns
    ``(theta_ddot, phi_ddot)``.  Raises the same errors as the reference path.
    """
    st, ct = math.sin(theta), math.cos(theta)
    if ct <= COS_EPS:
        raise ZenithSingularity(f"cos(theta) = {ct:.3g} <= {COS_EPS:g}")
    sp, cp = math.sin(phi), math.cos(phi)
    vn = r * theta_dot
    ve = r * ct * phi_dot
    if vn * vn + ve * ve < V_EPS * V_EPS:
        raise DegenerateVelocity("speed below v_eps")
    # wind in L (R^T w) minus velocity
    wen = -cp * st * wx - sp * st * wy + ct * wz - vn
    wee = -sp * wx + cp * wy - ve
    wed = -cp * ct * wx - sp * ct * wy - st * wz
    we_t2 = wen * wen + wee * wee
    if we_t2 < V_EPS * V_EPS:
        raise DegenerateEffWind("effective wind has no tangent-plane component")
    we2 = we_t2 + wed * wed
    we_n = math.sqrt(we2)
    we_t = math.sqrt(we_t2)
    # heading xi from -W_e; sin/cos directly
    cxi = -wen / we_t
    sxi = -wee / we_t
    sa = -wed / we_n
    ca = we_t / we_n
    delta = delta_u - d * sp * ct
    if abs(delta) > span:
        raise RollOutOfRange(f"|delta| = {abs(delta):.4g} m exceeds span {span:g} m")
    spsi = delta / span
    cpsi = math.sqrt(1.0 - spsi * spsi)
    arg = (sa / ca) * (spsi / cpsi) if cpsi > 0 else math.inf
    if abs(arg) > 1.0:
        raise EtaUndefined(f"tan(delta_alpha) tan(psi) = {arg:.4g}")
    seta = arg
    ceta = math.sqrt(1.0 - seta * seta)
    # z_w inner vector
    a = -cpsi * ceta * sa
    b = cpsi * seta * sa + spsi * ca
    q = 0.5 * rho * area * we2
    cd = cdeq + line_cda * ca
    # M(xi) applied: rows [-c,-s,0], [-s,c,0]
    fn = q * (cl * (-cxi * a - sxi * b) + cd * (-cxi * ca))
    fe = q * (cl * (-sxi * a + cxi * b) + cd * (-sxi * ca))
    mg = mass * g
    fn -= mg * ct
    rm = r * mass
    theta_dd = fn / rm - st * ct * phi_dot * phi_dot
    phi_dd = fe / (rm * ct) + 2.0 * (st / ct) * theta_dot * phi_dot
    return theta_dd, phi_dd
