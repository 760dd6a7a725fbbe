"""Post-hoc analysis of flight logs.

Works on :class:`~kitewind.simkit.SimLog` objects, simulated or loaded from
CSV.  Everything here is a pure function of the log.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InsufficientData
from .presets import ENV
from .wingdyn import EnvParams, WingParams, position_G

CROSSWIND_PHI = math.radians(5.0)
MIN_SAMPLES = 10


@dataclass(frozen=True)
class RegressionReport:
    slope: float
    intercept: float
    r_squared: float
    n_samples: int
    theoretical_slope: float
    relative_error: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PathMetrics:
    n_eights: int
    switch_times: list
    theta_envelope: tuple[float, float]
    phi_envelope: tuple[float, float]
    gamma_tracking_rms: float
    mean_period: float
    path_area: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["theta_envelope"] = list(self.theta_envelope)
        d["phi_envelope"] = list(self.phi_envelope)
        return d


def wrapped_diff(a, b) -> np.ndarray:
    """Shortest signed difference ``a - b`` in [-pi, pi)."""
    return (np.asarray(a, float) - np.asarray(b, float) + np.pi) % (2 * np.pi) - np.pi


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares ``y = a x + b``; returns ``(a, b, r^2)``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if len(x) < 2 or np.ptp(x) == 0:
        raise InsufficientData("regressor has no spread")
    A = np.column_stack([x, np.ones_like(x)])
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - (a * x + b)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), min(1.0, max(0.0, r2))


def _report(x, y, theory) -> RegressionReport:
    if len(x) < MIN_SAMPLES:
        raise InsufficientData(f"{len(x)} samples, need at least {MIN_SAMPLES}")
    a, b, r2 = linear_fit(x, y)
    rel = abs(a - theory) / abs(theory) if theory else math.inf
    return RegressionReport(a, b, r2, int(len(x)), float(theory), float(rel))


def central_rate(t, angle) -> np.ndarray:
    """Central difference of an angle series over a 3-sample window.

    The end samples are NaN.  The series is unwrapped first so that seam
    crossings do not produce spikes.
    """
    t = np.asarray(t, float)
    u = np.unwrap(np.asarray(angle, float))
    rate = np.full_like(u, np.nan)
    if len(u) >= 3:
        rate[1:-1] = (u[2:] - u[:-2]) / (t[2:] - t[:-2])
    return rate


def bias_series(log, gravity: float = 9.81) -> np.ndarray:
    """Gravity/apparent-force bias ``g cos(theta) sin(gamma)/|v| + sin(theta) phi_dot``."""
    theta = np.asarray(log["theta"], float)
    speed = np.asarray(log["speed"], float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (gravity * np.cos(theta) * np.sin(np.asarray(log["gamma"], float)) / speed
                + np.sin(theta) * np.asarray(log["phi_dot"], float))


def steering_gain_samples(log, wing: WingParams, crosswind_only: bool = True,
                          compensate_bias: bool = False, gravity: float = 9.81):
    """``(delta, gamma_dot / ((1 + 1/E^2)^2 |v|))`` pairs used by the gain fit.

    With ``compensate_bias`` the modelled bias is subtracted from the rate
    first.  In closed loop the controller makes delta track the bias, so the
    plain fit is biased toward zero.
    """
    t, speed, phi = log["t"], log["speed"], log["phi"]
    gdot = central_rate(t, log["gamma"])
    if compensate_bias:
        gdot = gdot - bias_series(log, gravity)
    e = wing.eq_efficiency_Eeq
    y = gdot / ((1.0 + 1.0 / e**2) ** 2 * speed)
    x = np.asarray(log["delta"], float)
    keep = np.isfinite(y) & (speed > 0)
    if crosswind_only:
        keep &= np.abs(phi) <= CROSSWIND_PHI
    return x[keep], y[keep]


def steering_gain_regression(log, wing: WingParams, crosswind_only: bool = True,
                             env: EnvParams = ENV, compensate_bias: bool = False) -> RegressionReport:
    x, y = steering_gain_samples(log, wing, crosswind_only, compensate_bias, env.gravity_g)
    theory = env.air_density_rho * wing.lift_CL * wing.area_A / (2.0 * wing.mass_m * wing.span_ds)
    return _report(x, y, theory)


def force_regressor(wing: WingParams, theta, phi, wind_speed, efficiency_power: float = 1.0) -> np.ndarray:
    """``E^p (1 + 1/E^2)^(3/2) (cos(theta) cos(phi) |W|)^2``, ``p = 1`` by default."""
    e = wing.eq_efficiency_Eeq
    c = np.cos(np.asarray(theta, float)) * np.cos(np.asarray(phi, float)) * np.asarray(wind_speed, float)
    return e**efficiency_power * (1.0 + 1.0 / e**2) ** 1.5 * c * c


def force_regression(log, wing: WingParams, env: EnvParams = ENV,
                     efficiency_power: float = 1.0) -> RegressionReport:
    """Fit logged tension against the crosswind traction regressor.

    ``efficiency_power = 2`` gives the crosswind-power form, whose slope for a point
    mass in steady crosswind flight is close to ``rho CL A / 2``.
    """
    x = force_regressor(wing, log["theta"], log["phi"], log["wind_speed"], efficiency_power)
    y = np.asarray(log["tension_est"], float)
    keep = np.isfinite(x) & np.isfinite(y)
    theory = 0.5 * env.air_density_rho * wing.lift_CL * wing.area_A
    return _report(x[keep], y[keep], theory)


def gamma_xi_comparison(log) -> tuple[float, float]:
    d = wrapped_diff(log["gamma"], log["xi"])
    if d.size == 0:
        return 0.0, 0.0
    return float(np.sqrt(np.mean(d * d))), float(np.max(np.abs(d)))


def switch_indices(targets) -> np.ndarray:
    targets = np.asarray(targets, dtype=object)
    if len(targets) < 2:
        return np.array([], dtype=int)
    return np.nonzero(targets[1:] != targets[:-1])[0] + 1


def shoelace_area(x, y) -> float:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def path_metrics(log) -> PathMetrics:
    """Figure-eight statistics.

    One eight spans two switches.  ``path_area`` is the mean over complete
    eights of the summed absolute shoelace areas of its two lobes, each lobe
    being the path between consecutive switches.
    """
    t = np.asarray(log["t"], float)
    idx = switch_indices(log["active_target"])
    if len(idx) < 2:
        raise InsufficientData(f"{len(idx)} target switches, need at least 2")
    theta = np.asarray(log["theta"], float)
    phi = np.asarray(log["phi"], float)
    err = wrapped_diff(log["gamma_ref"], log["gamma"])
    lobes = [shoelace_area(phi[a:b + 1], theta[a:b + 1]) for a, b in zip(idx[:-1], idx[1:])]
    eights = [lobes[k] + lobes[k + 1] for k in range(0, len(lobes) - 1, 2)]
    starts = t[idx[::2]]
    period = float(np.mean(np.diff(starts))) if len(starts) > 1 else float("nan")
    return PathMetrics(
        n_eights=len(idx) // 2,
        switch_times=[float(v) for v in t[idx]],
        theta_envelope=(float(theta.min()), float(theta.max())),
        phi_envelope=(float(phi.min()), float(phi.max())),
        gamma_tracking_rms=float(np.sqrt(np.mean(err * err))),
        mean_period=period,
        path_area=float(np.mean(eights)) if eights else float(lobes[0]),
    )


def side_extrema(log) -> tuple[float, float]:
    """Mean of the per-lobe theta maxima on the phi < 0 and phi > 0 sides."""
    theta = np.asarray(log["theta"], float)
    phi = np.asarray(log["phi"], float)
    idx = switch_indices(log["active_target"])
    neg, pos = [], []
    for a, b in zip(idx[:-1], idx[1:]):
        seg_t, seg_p = theta[a:b], phi[a:b]
        k = int(np.argmax(seg_t))
        (neg if seg_p[k] < 0 else pos).append(seg_t[k])
    if not neg or not pos:
        raise InsufficientData("need lobes on both sides of the window")
    return float(np.mean(neg)), float(np.mean(pos))


def vertical_velocity(log, r: float) -> np.ndarray:
    """``dz/dt = r cos(theta) theta_dot`` for the spherical position."""
    return r * np.cos(np.asarray(log["theta"], float)) * np.asarray(log["theta_dot"], float)


def post_switch_climb(log, r: float, window: float = 1.0) -> list[float]:
    """Mean vertical velocity over ``window`` seconds after each switch."""
    t = np.asarray(log["t"], float)
    zdot = vertical_velocity(log, r)
    out = []
    for k in switch_indices(log["active_target"]):
        sel = (t >= t[k]) & (t < t[k] + window)
        out.append(float(np.mean(zdot[sel])))
    return out


# ----------------------------------------------------------------- plot series

def series_path(log) -> np.ndarray:
    return np.column_stack([np.asarray(log["phi"], float), np.asarray(log["theta"], float)])


def series_path3d(log, r: float) -> np.ndarray:
    pts = np.array([position_G(th, ph, r) for th, ph in zip(log["theta"], log["phi"])]).reshape(-1, 3)
    return np.column_stack([np.asarray(log["t"], float), pts])


def series_timeseries(log, column: str) -> np.ndarray:
    if column not in log.columns or column == "active_target":
        raise KeyError(f"no numeric column {column!r}")
    return np.column_stack([np.asarray(log["t"], float), np.asarray(log[column], float)])


def series_regression(x, y, report: RegressionReport) -> tuple[np.ndarray, np.ndarray]:
    """Scatter points and the two end points of the fitted line."""
    x = np.asarray(x, float)
    scatter = np.column_stack([x, np.asarray(y, float)])
    ends = np.array([x.min(), x.max()])
    return scatter, np.column_stack([ends, report.slope * ends + report.intercept])
