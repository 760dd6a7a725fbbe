import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kitewind import analysis as an
from kitewind.ctlmodel import efficiency_factor, gain_slope
from kitewind.errors import InsufficientData
from kitewind.presets import ENV, WINGS
from kitewind.simkit import SimLog, theoretical_traction

W9 = WINGS["airush9"]
DT = 0.02


def make_log(n=2000, bias=False, seed=0, wing=W9):
    """Synthetic crosswind log obeying gamma_dot = K delta (+ T).

    Without the bias the construction is exact under central differences.
    With it the rate is integrated with RK4 and a smooth multisine input.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n) * DT
    theta_f = lambda s: 0.4 + 0.05 * np.sin(0.3 * s)
    phid_f = lambda s: 0.0315 * np.cos(0.21 * s)
    speed_f = lambda s: 12.0 + 2.0 * np.sin(0.17 * s)
    freqs, phases = rng.uniform(0.1, 0.7, 6), rng.uniform(0, 2 * math.pi, 6)
    smooth = lambda s: 0.03 * np.sum(np.sin(2 * math.pi * freqs * np.asarray(s)[..., None] + phases), axis=-1)
    gain = gain_slope(wing, ENV) * efficiency_factor(wing.eq_efficiency_Eeq)
    theta, phi_dot, speed = theta_f(t), phid_f(t), speed_f(t)
    phi = 0.15 * np.sin(0.21 * t)
    gamma = np.zeros(n)
    if not bias:
        delta = rng.uniform(-0.1, 0.1, n)
        gamma[1] = 0.01
        for i in range(1, n - 1):
            gamma[i + 1] = gamma[i - 1] + 2 * DT * gain * speed[i] * delta[i]
    else:
        delta = smooth(t)

        def f(s, g):
            v = speed_f(s)
            return (gain * v * smooth(s) + ENV.gravity_g * math.cos(theta_f(s)) * math.sin(g) / v
                    + math.sin(theta_f(s)) * phid_f(s))

        h, g = DT / 10, 0.0
        for i in range(1, n):
            for j in range(10):
                s = t[i - 1] + j * h
                k1 = f(s, g)
                k2 = f(s + h / 2, g + h / 2 * k1)
                k3 = f(s + h / 2, g + h / 2 * k2)
                k4 = f(s + h, g + h * k3)
                g += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            gamma[i] = g
    gamma = np.angle(np.exp(1j * gamma))
    cols = dict(t=t, theta=theta, phi=phi, phi_dot=phi_dot, theta_dot=np.zeros(n), speed=speed,
                delta=delta, gamma=gamma, xi=gamma.copy(), gamma_ref=gamma.copy(),
                wind_speed=np.full(n, 3.0), active_target=np.array(["Plus"] * n, dtype=object))
    cols["tension_est"] = np.array([theoretical_traction(wing, ENV, a, b, 3.0) for a, b in zip(theta, phi)])
    return SimLog(columns=cols)


def test_gain_regression_exact_without_bias():
    rep = an.steering_gain_regression(make_log(), W9, crosswind_only=True)
    assert rep.slope == pytest.approx(0.65306, abs=1e-5)
    assert rep.slope == pytest.approx(rep.theoretical_slope, rel=1e-9)
    assert rep.r_squared == pytest.approx(1.0, abs=1e-12)
    assert rep.relative_error < 1e-9


@functools.lru_cache(maxsize=None)
def eight_log(d0, speed, n=20000, excitation=0.02, theta=0.4):
    """Simplified-model eights: delta = +-d0 (plus a small multisine), sign flipped
    after every full turn of gamma, gravity bias on."""
    rng = np.random.default_rng(0)
    fr, ph = rng.uniform(0.1, 0.7, 6), rng.uniform(0, 2 * math.pi, 6)
    exc = lambda s: excitation * np.sum(np.sin(2 * math.pi * fr * s + ph)) / 6
    k = gain_slope(W9, ENV) * efficiency_factor(W9.eq_efficiency_Eeq) * speed
    c = ENV.gravity_g * math.cos(theta) / speed
    f = lambda s, g, sign: k * (sign * d0 + exc(s)) + c * math.sin(g)
    t = np.arange(n) * DT
    gam, delta = np.zeros(n), np.zeros(n)
    g, sign, start, h = 0.0, 1.0, 0.0, DT / 10
    for i in range(n):
        gam[i], delta[i] = g, sign * d0 + exc(t[i])
        for j in range(10):
            s = t[i] + j * h
            k1 = f(s, g, sign)
            k2 = f(s + h / 2, g + h / 2 * k1, sign)
            k3 = f(s + h / 2, g + h / 2 * k2, sign)
            k4 = f(s + h, g + h * k3, sign)
            g += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if abs(g - start) >= 2 * math.pi:
            sign, start = -sign, g
    cols = dict(t=t, theta=np.full(n, theta), phi=np.zeros(n), phi_dot=np.zeros(n),
                speed=np.full(n, speed), delta=delta, gamma=np.angle(np.exp(1j * gam)))
    return SimLog(columns=cols)


def test_gain_regression_on_symmetric_eights():
    # steering term well above the gravity bias: the bias nearly averages out
    rep = an.steering_gain_regression(eight_log(0.3, 20.0), W9, crosswind_only=False)
    assert rep.relative_error <= 0.02


def test_gravity_dwell_biases_slope_low():
    # strong bias: the wing lingers where gravity opposes the turn, in both directions
    plain = an.steering_gain_regression(eight_log(0.1, 12.0), W9, crosswind_only=False)
    comp = an.steering_gain_regression(eight_log(0.1, 12.0), W9, crosswind_only=False, compensate_bias=True)
    assert plain.slope < 0.9 * plain.theoretical_slope
    assert comp.relative_error < 2e-3


def test_crosswind_filter():
    log = make_log()
    x_all, _ = an.steering_gain_samples(log, W9, crosswind_only=False)
    x_cw, _ = an.steering_gain_samples(log, W9, crosswind_only=True)
    assert 0 < len(x_cw) < len(x_all)


def test_time_shift_invariance():
    log = make_log()
    shifted = SimLog(columns={**log.columns, "t": log["t"] + 123.0})
    a = an.steering_gain_regression(log, W9)
    b = an.steering_gain_regression(shifted, W9)
    assert a.slope == pytest.approx(b.slope, rel=1e-12)


def test_force_regression_on_theory():
    rep = an.force_regression(make_log(), W9, ENV)
    assert rep.slope == pytest.approx(4.32, rel=1e-9)
    assert rep.intercept == pytest.approx(0.0, abs=1e-8)
    w6 = WINGS["airush6"]
    assert an.force_regression(make_log(wing=w6), w6, ENV).theoretical_slope == pytest.approx(2.16)
    w12 = WINGS["airush12"]
    assert an.force_regression(make_log(wing=w12), w12, ENV).theoretical_slope == pytest.approx(6.12)


def test_force_regressor_power():
    e = W9.eq_efficiency_Eeq
    assert an.force_regressor(W9, 0.0, 0.0, 1.0, 2.0) == pytest.approx(e * an.force_regressor(W9, 0.0, 0.0, 1.0))


def test_row_shuffle_invariance():
    log = make_log()
    perm = np.random.default_rng(3).permutation(len(log))
    shuffled = SimLog(columns={k: v[perm] for k, v in log.columns.items()})
    a, b = an.force_regression(log, W9), an.force_regression(shuffled, W9)
    assert a.slope == pytest.approx(b.slope, rel=1e-12)
    x, y = an.steering_gain_samples(log, W9)
    p = np.random.default_rng(4).permutation(len(x))
    assert an.linear_fit(x, y) == pytest.approx(an.linear_fit(x[p], y[p]), rel=1e-10)


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=3, max_size=40))
def test_r_squared_bounded(points):
    x, y = np.array(points).T
    if np.ptp(x) == 0:
        with pytest.raises(InsufficientData):
            an.linear_fit(x, y)
        return
    _, _, r2 = an.linear_fit(x, y)
    assert 0.0 <= r2 <= 1.0


def test_insufficient_data():
    log = make_log(n=8)
    with pytest.raises(InsufficientData):
        an.force_regression(log, W9)
    with pytest.raises(InsufficientData):
        an.linear_fit([1.0, 1.0], [2.0, 3.0])


def test_central_rate_handles_seam():
    t = np.arange(5) * 0.1
    a = np.array([3.0, 3.1, -3.1, -3.0, -2.9])
    r = an.central_rate(t, a)
    assert np.isnan(r[0]) and np.isnan(r[-1])
    assert np.all(np.abs(r[1:-1]) < 2.0)


def test_gamma_xi_comparison():
    g = np.linspace(-3, 3, 100)
    assert an.gamma_xi_comparison({"gamma": g, "xi": g}) == (0.0, 0.0)
    rms, mx = an.gamma_xi_comparison({"gamma": g, "xi": g - 0.1})
    assert rms == pytest.approx(0.1) and mx == pytest.approx(0.1)
    # differences across the seam are taken the short way
    rms, _ = an.gamma_xi_comparison({"gamma": np.array([3.1]), "xi": np.array([-3.1])})
    assert rms == pytest.approx(2 * math.pi - 6.2)


def switching_log(n_switches=10, per=50):
    n = per * (n_switches + 1)
    t = np.arange(n) * DT
    lobe = np.repeat(np.arange(n_switches + 1), per)
    s = np.arange(n) % per / per
    sign = np.where(lobe % 2 == 0, 1.0, -1.0)
    phi = sign * 0.2 * np.sin(math.pi * s)
    theta = 0.4 + 0.1 * np.sin(2 * math.pi * s)
    targets = np.where(lobe % 2 == 0, "Minus", "Plus").astype(object)
    cols = dict(t=t, theta=theta, phi=phi, theta_dot=np.zeros(n), gamma=np.zeros(n),
                gamma_ref=np.full(n, 0.2), active_target=targets)
    return SimLog(columns=cols, switches=n_switches)


def test_path_metrics_counts():
    m = an.path_metrics(switching_log(10))
    assert m.n_eights == 5
    assert len(m.switch_times) == 10
    assert m.gamma_tracking_rms == pytest.approx(0.2)
    assert m.mean_period == pytest.approx(2 * 50 * DT)
    assert m.phi_envelope[0] < 0 < m.phi_envelope[1]
    assert m.path_area > 0
    assert an.path_metrics(switching_log(11)).n_eights == 5


def test_path_metrics_needs_switches():
    with pytest.raises(InsufficientData):
        an.path_metrics(switching_log(1))


def test_path_metrics_on_flight(nominal_log):
    m = an.path_metrics(nominal_log)
    assert 2 * m.n_eights in (nominal_log.switches, nominal_log.switches - 1)
    assert 0.05 < m.theta_envelope[0] < m.theta_envelope[1] < 1.2
    d = m.to_dict()
    assert d["n_eights"] == m.n_eights and isinstance(d["theta_envelope"], list)


def test_shoelace():
    assert an.shoelace_area([0, 1, 1, 0], [0, 0, 1, 1]) == pytest.approx(1.0)
    assert an.shoelace_area([0, 0, 1, 1], [0, 1, 1, 0]) == pytest.approx(1.0)


def test_side_extrema_and_climb():
    log = switching_log(6)
    neg, pos = an.side_extrema(log)
    assert neg == pytest.approx(pos)
    climbs = an.post_switch_climb(log, 30.0, window=0.1)
    assert len(climbs) == 6 and all(c == 0.0 for c in climbs)


def test_plot_series():
    log = make_log(n=50)
    assert an.series_path(log).shape == (50, 2)
    p3 = an.series_path3d(log, 30.0)
    assert p3.shape == (50, 4)
    assert np.allclose(np.linalg.norm(p3[:, 1:], axis=1), 30.0)
    assert an.series_timeseries(log, "speed").shape == (50, 2)
    with pytest.raises(KeyError):
        an.series_timeseries(log, "active_target")
    x, y = an.steering_gain_samples(log, W9)
    rep = an.steering_gain_regression(log, W9)
    scatter, line = an.series_regression(x, y, rep)
    assert scatter.shape == (len(x), 2) and line.shape == (2, 2)
