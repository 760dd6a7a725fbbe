"""Closed-loop multirate simulation of the wing, actuator and autopilot.

Physics (wing + actuator) is integrated with fixed-step RK4 at ``physics_dt``.
The position controller runs at the inner rate with a zero-order hold on the
motor current; guidance and velocity-angle control run at the outer rate with
a zero-order hold on the actuator reference.  One log record is emitted per
outer sample.
"""
from __future__ import annotations

import csv
import functools
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from . import errors
from .actuator import ActuatorParams, ActuatorState, clamp, line_difference, position_controller
from .autopilot import GuidanceConfig, GuidanceState, guidance_step, velocity_angle_control
from .wingdyn import (
    COS_EPS,
    EnvParams,
    Kinematics,
    KiteState,
    WingParams,
    aero_force_L,
    fast_rhs,
    geometric_input,
    gravity_force_L,
    kinematics,
)

GROUND_THETA = 0.05
STALL_SPEED = 0.5


class SimulationAbort(errors.KiteError):
    """Validity guard tripped during a run."""


class GroundProximity(SimulationAbort):
    pass


class Stall(SimulationAbort):
    pass


class WindowExit(SimulationAbort):
    pass


# --------------------------------------------------------------------------- wind

@dataclass(frozen=True)
class WindModel:
    nominal_speed: float = 2.4
    misalignment: float = 0.0  # rad, about +Z
    gust_amplitude: float = 0.0
    gust_period: float = 10.0
    turbulence_intensity: float = 0.0
    seed: int = 0
    turbulence_timescale: float = 2.0  # s, first-order noise filter

    def __post_init__(self):
        if self.nominal_speed < 0:
            raise ValueError("nominal_speed must be >= 0")
        if self.gust_period <= 0 or self.turbulence_timescale <= 0:
            raise ValueError("gust_period and turbulence_timescale must be > 0")

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.misalignment), math.sin(self.misalignment), 0.0])

    @property
    def is_steady(self) -> bool:
        return self.gust_amplitude == 0.0 and self.turbulence_intensity == 0.0


_NOISE_DT = 0.05
_NOISE_BLOCK = 2048


class _NoisePath:
    """First-order filtered Gaussian noise on a fixed grid, grown on demand.

    Samples are generated sequentially from the seed, so the value at a given
    time never depends on the order of queries.
    """

    def __init__(self, model: WindModel):
        self.rng = np.random.default_rng(model.seed)
        self.a = math.exp(-_NOISE_DT / model.turbulence_timescale)
        self.sigma = model.turbulence_intensity * model.nominal_speed
        self.values = np.zeros((1, 3))

    def _grow(self, n: int):
        while len(self.values) < n:
            w = self.rng.standard_normal((_NOISE_BLOCK, 3)) * self.sigma * math.sqrt(1 - self.a**2)
            out = np.empty_like(w)
            prev = self.values[-1]
            for k in range(_NOISE_BLOCK):
                prev = self.a * prev + w[k]
                out[k] = prev
            self.values = np.vstack([self.values, out])

    def at(self, t: float) -> np.ndarray:
        x = t / _NOISE_DT
        k = int(x)
        self._grow(k + 2)
        frac = x - k
        return (1.0 - frac) * self.values[k] + frac * self.values[k + 1]


@functools.lru_cache(maxsize=32)
def _noise_path(model: WindModel) -> _NoisePath:
    return _NoisePath(model)


def wind_at(model: WindModel, t: float) -> np.ndarray:
    """Ground wind vector in G at time ``t``; deterministic in ``(model, t)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    speed = model.nominal_speed + model.gust_amplitude * math.sin(2.0 * math.pi * t / model.gust_period)
    w = speed * model.direction
    if model.turbulence_intensity > 0:
        w = w + _noise_path(model).at(t)
    return w


@dataclass(frozen=True)
class Excitation:
    """Zero-mean multisine added to the actuator position reference.

    Off by default.  Used for steering-gain identification in closed loop,
    where the feedback otherwise ties the steering input to the gravity bias.
    Schroeder phases keep the crest factor low; ``amplitude`` bounds the peak.
    """

    amplitude: float = 0.0  # m
    frequencies: tuple = (0.43, 0.97, 1.61, 2.33)  # Hz

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if not self.frequencies or min(self.frequencies) <= 0:
            raise ValueError("frequencies must be positive")

    def at(self, t: float) -> float:
        if self.amplitude == 0.0:
            return 0.0
        n = len(self.frequencies)
        return self.amplitude / n * sum(
            math.sin(2.0 * math.pi * f * t - math.pi * k * (k - 1) / n)
            for k, f in enumerate(self.frequencies, start=1))


# ------------------------------------------------------------------------- config

AUTO_CROSSWIND = "auto"


@dataclass(frozen=True)
class SimConfig:
    wing: WingParams
    env: EnvParams = field(default_factory=EnvParams)
    actuator: ActuatorParams = field(default_factory=ActuatorParams)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    wind: WindModel = field(default_factory=WindModel)
    init: Union[KiteState, str] = AUTO_CROSSWIND
    physics_dt: float = 1e-3
    duration: float = 60.0
    inner_rate: float = 100.0
    outer_rate: float = 50.0
    excitation: Excitation = field(default_factory=Excitation)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        if not 0 < self.physics_dt <= 0.5 / self.inner_rate:
            raise ValueError("physics_dt must be in (0, 1/(2 inner_rate)]")
        for a, b, what in ((self.inner_rate, self.outer_rate, "inner/outer"),
                           (1.0 / self.physics_dt, self.inner_rate, "physics/inner")):
            ratio = a / b
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ValueError(f"{what} rate ratio must be a positive integer, got {ratio}")
        if self.init != AUTO_CROSSWIND and not isinstance(self.init, KiteState):
            raise ValueError("init must be a KiteState or 'auto'")


def auto_crosswind_state(wing: WingParams, env: EnvParams, wind: WindModel,
                         theta0: float = 0.5, gamma0: float = math.pi / 2) -> KiteState:
    """Near-equilibrium crosswind start: speed ``Eeq cos(theta0) |W|`` at ``gamma0``."""
    speed = wing.eq_efficiency_Eeq * math.cos(theta0) * wind.nominal_speed
    r = env.tether_r
    return KiteState(theta0, 0.0, speed * math.cos(gamma0) / r, speed * math.sin(gamma0) / (r * math.cos(theta0)))


# ------------------------------------------------------------------------ tension

def tension_estimate(state: KiteState, kin: Kinematics, force_L, wing: WingParams,
                     env: EnvParams) -> tuple[float, bool]:
    """Line tension from the radial force balance; ``(T, slack)``.

    ``force_L`` is the total aerodynamic + gravity force.  The line provides the
    centripetal force ``m |v|^2 / r`` net of the outward applied force.
    """
    t = -float(force_L[2]) + wing.mass_m * kin.speed**2 / env.tether_r
    return t, t < 0.0


def theoretical_traction(wing: WingParams, env: EnvParams, theta: float, phi: float, wind_speed: float) -> float:
    return 0.5 * env.air_density_rho * wing.lift_CL * wing.area_A * traction_regressor(wing, theta, phi, wind_speed)


def traction_regressor(wing: WingParams, theta: float, phi: float, wind_speed: float) -> float:
    """``Eeq (1 + 1/Eeq^2)^(3/2) (cos(theta) cos(phi) |W|)^2``."""
    e = wing.eq_efficiency_Eeq
    return e * (1.0 + 1.0 / e**2) ** 1.5 * (math.cos(theta) * math.cos(phi) * wind_speed) ** 2


# ---------------------------------------------------------------------------- log

LOG_FIELDS = (
    "t", "theta", "phi", "theta_dot", "phi_dot", "gamma", "gamma_ref", "xi",
    "delta_m", "delta_m_ref", "delta_u", "delta_g", "delta", "i_m", "speed",
    "eff_wind_mag", "delta_alpha", "tension_est", "active_target", "wind_speed",
)


@dataclass
class SimLog:
    """Columnar record of a run.  ``columns`` maps each field to a numpy array
    (``active_target`` holds strings)."""

    columns: dict
    abort: str | None = None
    abort_message: str = ""
    abort_time: float | None = None
    switches: int = 0
    flags: dict = field(default_factory=dict)
    trace: dict | None = None
    final_state: KiteState | None = None

    def __getitem__(self, name):
        return self.columns[name]

    def __len__(self):
        return len(self.columns["t"])

    @property
    def completed(self) -> bool:
        return self.abort is None

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_FIELDS)
        cols = [self.columns[f] for f in LOG_FIELDS]
        for row in zip(*cols):
            w.writerow([v if isinstance(v, str) else f"{v:.9g}" for v in row])
        text = buf.getvalue()
        if path is not None:
            atomic_write(path, text)
        return text

    def to_jsonl(self, path=None) -> str:
        lines = []
        for k in range(len(self)):
            rec = {}
            for f in LOG_FIELDS:
                v = self.columns[f][k]
                rec[f] = v if isinstance(v, str) else float(f"{v:.9g}")
            lines.append(json.dumps(rec))
        text = "\n".join(lines) + ("\n" if lines else "")
        if path is not None:
            atomic_write(path, text)
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "SimLog":
        if isinstance(path_or_text, (str, os.PathLike)) and os.path.exists(path_or_text):
            with open(path_or_text, newline="") as fh:
                text = fh.read()
        else:
            text = str(path_or_text)
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise errors.ConfigError("empty log")
        header = rows[0]
        for k, name in enumerate(LOG_FIELDS):
            if k >= len(header) or header[k] != name:
                got = header[k] if k < len(header) else "<missing>"
                raise errors.ConfigError(f"log schema mismatch at column {k}: expected {name!r}, got {got!r}")
        if len(header) != len(LOG_FIELDS):
            raise errors.ConfigError(f"log schema mismatch: unexpected column {header[len(LOG_FIELDS)]!r}")
        data = rows[1:]
        cols = {}
        for k, name in enumerate(LOG_FIELDS):
            vals = [r[k] for r in data]
            cols[name] = np.array(vals, dtype=object if name == "active_target" else float)
        targets = cols["active_target"]
        switches = int(sum(targets[i] != targets[i - 1] for i in range(1, len(targets))))
        return cls(columns=cols, switches=switches)


def atomic_write(path, text: str):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------- run

def _check_validity(theta, phi, theta_dot, phi_dot, r):
    if theta <= GROUND_THETA:
        raise GroundProximity(f"theta = {theta:.4f} rad <= {GROUND_THETA}")
    if abs(phi) >= math.pi / 2:
        raise WindowExit(f"|phi| = {abs(phi):.4f} rad")
    ct = math.cos(theta)
    if ct <= COS_EPS:
        raise errors.ZenithSingularity(f"cos(theta) = {ct:.3g}")
    speed = r * math.hypot(theta_dot, ct * phi_dot)
    if speed < STALL_SPEED:
        raise Stall(f"speed {speed:.3f} m/s < {STALL_SPEED} m/s")


def run(config: SimConfig, record_trace: bool = False) -> SimLog:
    """Run one closed-loop simulation.

    Validity aborts (ground proximity, stall, window exit, zenith singularity
    and any model-domain error) stop the run; the returned log then carries
    the records up to the abort and the abort class name in ``log.abort``.
    With ``record_trace`` the held ``(t, i_m, delta_m_ref)`` at every physics
    step is kept in ``log.trace``.
    """
    wing, env, act, gcfg, wind = config.wing, config.env, config.actuator, config.guidance, config.wind
    if abs(gcfg.sample_rate - config.outer_rate) > 1e-9:
        gcfg = replace(gcfg, sample_rate=config.outer_rate)
    init = auto_crosswind_state(wing, env, wind) if config.init == AUTO_CROSSWIND else config.init
    dt = config.physics_dt
    n_outer = int(round(config.duration * config.outer_rate))
    inner_per_outer = int(round(config.inner_rate / config.outer_rate))
    phys_per_inner = int(round(1.0 / (config.inner_rate * dt)))
    steps_per_outer = inner_per_outer * phys_per_inner

    r, d, rho, g = env.tether_r, env.attach_distance_d, env.air_density_rho, env.gravity_g
    area, mass, span, cl = wing.area_A, wing.mass_m, wing.span_ds, wing.lift_CL
    cdeq = wing.drag_CDeq
    line_cda = wing.line_drag_CDl * wing.line_area_Al / (4.0 * area)
    kdelta, wm, km = act.gear_Kdelta, act.pole_wm, act.gain_Km
    plim = act.position_limit
    steady = wind.is_steady
    w_const = wind_at(wind, 0.0)
    exc = config.excitation

    th, ph, thd, phd = init.theta, init.phi, init.theta_dot, init.phi_dot
    pm, vm = 0.0, 0.0

    cols = {f: [] for f in LOG_FIELDS}
    trace = {"t": [], "i_m": [], "delta_m_ref": []} if record_trace else None
    log = SimLog(columns=cols, trace=trace)
    gstate = GuidanceState.initial(ph, gcfg)
    slack_count = 0
    incidence_flags = 0
    load = 0.0

    def deriv(th, ph, thd, phd, pm, vm, i_m, wx, wy, wz):
        thdd, phdd = fast_rhs(th, ph, thd, phd, kdelta * pm, wx, wy, wz,
                              r, d, rho, g, area, mass, span, cl, cdeq, line_cda)
        return thd, phd, thdd, phdd, vm, wm * (-vm + km * i_m) + act.load_gain * load

    try:
        for k in range(n_outer):
            t = k / config.outer_rate
            _check_validity(th, ph, thd, phd, r)
            w = w_const if steady else wind_at(wind, t)
            state = KiteState(th, ph, thd, phd)
            kin = kinematics(state, env, w)
            gamma_ref, gstate = guidance_step(th, ph, gstate, gcfg)
            dm_ref = velocity_angle_control(gamma_ref, kin.gamma, gcfg, plim)
            if exc.amplitude:
                dm_ref = min(plim, max(-plim, dm_ref + exc.at(t)))

            astate = ActuatorState(pm, vm)
            du = line_difference(astate, act)
            dg = geometric_input(state, env)
            force = aero_force_L(kin, du + dg, wing, env) + gravity_force_L(state, wing, env)
            tension, slack = tension_estimate(state, kin, force, wing, env)
            slack_count += slack
            incidence_flags += kin.incidence_flagged
            load = tension

            for j in range(inner_per_outer):
                i_m = position_controller(dm_ref, ActuatorState(pm, vm), act)
                if j == 0:
                    row = (t, th, ph, thd, phd, kin.gamma, gamma_ref, kin.xi, pm, dm_ref, du, dg, du + dg,
                           i_m, kin.speed, kin.eff_wind_speed, kin.delta_alpha, tension,
                           gstate.active_target.value, float(np.linalg.norm(w)))
                    for f, v in zip(LOG_FIELDS, row):
                        cols[f].append(v)
                for s in range(phys_per_inner):
                    ts = t + (j * phys_per_inner + s) * dt
                    if record_trace:
                        trace["t"].append(ts)
                        trace["i_m"].append(i_m)
                        trace["delta_m_ref"].append(dm_ref)
                    if steady:
                        w0 = wm_ = w1 = w_const
                    else:
                        w0, wm_, w1 = wind_at(wind, ts), wind_at(wind, ts + 0.5 * dt), wind_at(wind, ts + dt)
                    k1 = deriv(th, ph, thd, phd, pm, vm, i_m, *w0)
                    h = 0.5 * dt
                    k2 = deriv(th + h * k1[0], ph + h * k1[1], thd + h * k1[2], phd + h * k1[3],
                               pm + h * k1[4], vm + h * k1[5], i_m, *wm_)
                    k3 = deriv(th + h * k2[0], ph + h * k2[1], thd + h * k2[2], phd + h * k2[3],
                               pm + h * k2[4], vm + h * k2[5], i_m, *wm_)
                    k4 = deriv(th + dt * k3[0], ph + dt * k3[1], thd + dt * k3[2], phd + dt * k3[3],
                               pm + dt * k3[4], vm + dt * k3[5], i_m, *w1)
                    c = dt / 6.0
                    th += c * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
                    ph += c * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
                    thd += c * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
                    phd += c * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
                    pm += c * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])
                    vm += c * (k1[5] + 2 * k2[5] + 2 * k3[5] + k4[5])
                    if abs(pm) > plim:
                        a = clamp(ActuatorState(pm, vm), act)
                        pm, vm = a.pos_dm, a.vel_dm
                    _check_validity(th, ph, thd, phd, r)
        log.final_state = KiteState(th, ph, thd, phd)
    except errors.KiteError as exc:
        log.abort = type(exc).__name__
        log.abort_message = str(exc)
        log.abort_time = cols["t"][-1] if cols["t"] else 0.0
        log.final_state = KiteState(th, ph, thd, phd)

    for f in LOG_FIELDS:
        cols[f] = np.array(cols[f], dtype=object if f == "active_target" else float)
    if trace is not None:
        log.trace = {k: np.array(v) for k, v in trace.items()}
    log.switches = gstate.switches
    log.flags = {"slack_samples": int(slack_count), "incidence_flagged_samples": int(incidence_flags)}
    return log
