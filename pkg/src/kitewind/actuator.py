"""DC motor + lead-screw actuator that sets the steering-line length difference.

The position controller is a static state feedback on motor position and
velocity that places the closed-loop poles of the current-driven plant

    ddot(dm) = wm * (-dot(dm) + Km * i)

at the second-order target ``s^2 + 2 zeta w s + w^2``.  It has no integral
state, so current saturation cannot wind it up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ActuatorParams:
    gain_Km: float = 0.73
    pole_wm: float = 1.9
    current_limit: float = 10.0
    position_limit: float = 0.35
    gear_Kdelta: float = 4.0
    cl_damping_zeta: float = 0.7
    cl_natural_freq: float = 78.0
    load_gain: float = 0.0  # m/s^2 per N, line-force coupling

    def __post_init__(self):
        for name in ("gain_Km", "pole_wm", "current_limit", "position_limit",
                     "gear_Kdelta", "cl_natural_freq"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.cl_damping_zeta <= 1:
            raise ValueError("cl_damping_zeta must lie in (0, 1]")

    @property
    def feedback_gains(self) -> tuple[float, float]:
        """State-feedback gains (A/m, A/(m/s)) realising the closed-loop target."""
        kmwm = self.gain_Km * self.pole_wm
        w = self.cl_natural_freq
        return w * w / kmwm, (2.0 * self.cl_damping_zeta * w - self.pole_wm) / kmwm


@dataclass(frozen=True)
class ActuatorState:
    pos_dm: float = 0.0
    vel_dm: float = 0.0


def position_controller(ref_dm: float, state: ActuatorState, params: ActuatorParams) -> float:
    """Motor current command, clipped to the current limit."""
    kp, kd = params.feedback_gains
    i = kp * (ref_dm - state.pos_dm) - kd * state.vel_dm
    lim = params.current_limit
    return min(lim, max(-lim, i))


def actuator_rhs(state: ActuatorState, current: float, load_force: float,
                 params: ActuatorParams) -> tuple[float, float]:
    """``(dot(dm), ddot(dm))``.  Hard stops are applied by :func:`clamp`."""
    acc = params.pole_wm * (-state.vel_dm + params.gain_Km * current) + params.load_gain * load_force
    return state.vel_dm, acc


def clamp(state: ActuatorState, params: ActuatorParams) -> ActuatorState:
    """Hard stop at +-position_limit: clamp position and zero the velocity."""
    lim = params.position_limit
    if state.pos_dm > lim:
        return ActuatorState(lim, min(0.0, state.vel_dm))
    if state.pos_dm < -lim:
        return ActuatorState(-lim, max(0.0, state.vel_dm))
    return state


def line_difference(state: ActuatorState, params: ActuatorParams) -> float:
    return params.gear_Kdelta * state.pos_dm


def simulate_step(ref_dm: float, params: ActuatorParams, duration: float = 1.0,
                  dt: float = 1e-4, state: ActuatorState | None = None,
                  load_force: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-time closed-loop response to a constant reference (RK4).

    The controller is evaluated inside every RK4 stage, so in the unsaturated
    regime the result is the exact closed-loop target up to integration error.
    Returns ``(t, x)`` with ``x[:, 0]`` the position and ``x[:, 1]`` the velocity.
    """
    state = state or ActuatorState()
    n = int(round(duration / dt))
    x = np.empty((n + 1, 2))
    x[0] = state.pos_dm, state.vel_dm

    def f(p, v):
        s = ActuatorState(p, v)
        return actuator_rhs(s, position_controller(ref_dm, s, params), load_force, params)

    p, v = state.pos_dm, state.vel_dm
    for k in range(n):
        k1 = f(p, v)
        k2 = f(p + 0.5 * dt * k1[0], v + 0.5 * dt * k1[1])
        k3 = f(p + 0.5 * dt * k2[0], v + 0.5 * dt * k2[1])
        k4 = f(p + dt * k3[0], v + dt * k3[1])
        p += dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v += dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        s = clamp(ActuatorState(p, v), params)
        p, v = s.pos_dm, s.vel_dm
        x[k + 1] = p, v
    return np.linspace(0.0, n * dt, n + 1), x


def second_order_reference(ref_dm: float, zeta: float, w: float, duration: float = 1.0,
                           dt: float = 1e-4, x0=(0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form solution of ``x'' + 2 zeta w x' + w^2 x = w^2 ref`` (0 < zeta < 1)."""
    t = np.linspace(0.0, round(duration / dt) * dt, int(round(duration / dt)) + 1)
    wd = w * math.sqrt(1.0 - zeta * zeta)
    e0, v0 = x0[0] - ref_dm, x0[1]
    c1 = e0
    c2 = (v0 + zeta * w * e0) / wd
    env = np.exp(-zeta * w * t)
    pos = ref_dm + env * (c1 * np.cos(wd * t) + c2 * np.sin(wd * t))
    vel = env * ((-zeta * w * c1 + wd * c2) * np.cos(wd * t) + (-zeta * w * c2 - wd * c1) * np.sin(wd * t))
    return t, np.column_stack([pos, vel])
