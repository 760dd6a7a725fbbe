import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

from kitewind import robustness as rb
from kitewind.ctlmodel import gain_ktilde
from kitewind.errors import Infeasible, NotHurwitz
from kitewind.presets import ENV, WINGS

TABLE = dict(Kc=0.046, Kdelta=4.0, zeta_cl=0.7, w_cl=78.0)


@pytest.fixture(scope="module")
def nominal_box_cert():
    return rb.certify_box(rb.ParamBox())


def test_box_validation():
    with pytest.raises(ValueError):
        rb.ParamBox(speed=(10.0, 2.0))
    with pytest.raises(ValueError):
        rb.ParamBox(mass=(0.0, 1.0))


def test_collapsed_box_matches_gain():
    w = WINGS["airush9"]
    box = rb.ParamBox.point(20.0, w.eq_efficiency_Eeq, w.lift_CL, w.area_A, w.span_ds, w.mass_m)
    k1, k2 = rb.ktilde_bounds(box)
    assert k1 == k2 == pytest.approx(gain_ktilde(w, ENV, 20.0), rel=1e-12)
    assert k1 == pytest.approx(13.9075, abs=1e-4)


def test_nominal_box_bounds():
    k1, k2 = rb.ktilde_bounds(rb.ParamBox())
    # corner arithmetic as the oracle; the quoted values are rounded
    lo = 1.2 * 0.4 * 6 * (1 + 1 / 64) ** 2 * 2 / (2 * 3.0 * 3.1)
    hi = 1.2 * 1.0 * 12 * (1 + 1 / 4) ** 2 * 80 / (2 * 1.7 * 1.8)
    assert k1 == pytest.approx(lo, abs=1e-3) and k2 == pytest.approx(hi, abs=1e-3)
    assert round(k1, 4) == 0.3194 and round(k2, 2) == 294.12


def _sample(box, rng):
    pick = lambda lo_hi: rng.uniform(*lo_hi)
    return rb._ktilde(pick(box.speed), pick(box.Eeq), pick(box.CL), pick(box.area), pick(box.span),
                      pick(box.mass), box.rho)


def test_bounds_tight_under_sampling():
    box = rb.ParamBox()
    k1, k2 = rb.ktilde_bounds(box)
    rng = np.random.default_rng(0)
    ks = np.array([_sample(box, rng) for _ in range(10_000)])
    assert ks.min() >= k1 and ks.max() <= k2
    lo = rb._ktilde(2, 8, 0.4, 6, 3.1, 3, 1.2)
    hi = rb._ktilde(80, 2, 1.0, 12, 1.8, 1.7, 1.2)
    assert (lo, hi) == pytest.approx((k1, k2), rel=1e-15)


@settings(max_examples=1000, deadline=None)
@given(st.sampled_from(["speed", "Eeq", "CL", "area", "span", "mass"]), st.floats(0.5, 0.99), st.floats(1.01, 2.0))
def test_widening_never_shrinks(axis, lo_f, hi_f):
    box = rb.ParamBox()
    lo, hi = getattr(box, axis)
    wide = rb.ParamBox(**{**box.__dict__, axis: (lo * lo_f, hi * hi_f)})
    (a, b), (c, d) = rb.ktilde_bounds(box), rb.ktilde_bounds(wide)
    assert c <= a and d >= b


def test_zero_gain_is_marginal():
    A = rb.acl_matrix(0.0, **TABLE)
    assert np.allclose(A[0], 0.0)
    assert np.min(np.abs(np.linalg.eigvals(A))) < 1e-12


@settings(max_examples=1000, deadline=None)
@given(st.floats(0, 500), st.floats(0.01, 1), st.floats(1, 8), st.floats(0.1, 1), st.floats(10, 200))
def test_characteristic_polynomial(k, kc, kd, z, w):
    A = rb.acl_matrix(k, kc, kd, z, w)
    expected = np.array([1.0, 2 * z * w, w * w, kc * kd * k * w * w])
    assert np.allclose(np.poly(A), expected, rtol=1e-9, atol=1e-9 * np.abs(expected).max())


def test_hurwitz_limit():
    lim = rb.hurwitz_limit(**TABLE)
    assert lim == pytest.approx(593.48, abs=0.01)
    assert rb.hurwitz_limit(0.092, 4.0, 0.7, 78.0) == pytest.approx(lim / 2)
    assert rb.hurwitz_limit(1.0, 4.0, 0.7, 78.0) == pytest.approx(27.3)
    assert rb.is_hurwitz(rb.acl_matrix(0.99 * lim, **TABLE))
    assert not rb.is_hurwitz(rb.acl_matrix(1.01 * lim, **TABLE))
    assert rb.is_hurwitz(rb.acl_matrix(13.906, **TABLE))
    with pytest.raises(ValueError):
        rb.hurwitz_limit(0.0, 4.0, 0.7, 78.0)


def test_hurwitz_limit_by_bisection():
    lo, hi = 1.0, 2000.0
    while (hi - lo) / hi > 1e-7:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if rb.is_hurwitz(rb.acl_matrix(mid, **TABLE)) else (lo, mid)
    assert lo == pytest.approx(rb.hurwitz_limit(**TABLE), rel=1e-6)


def test_single_matrix_certificate():
    A = rb.acl_matrix(13.906, **TABLE)
    cert = rb.quadratic_stability(A, A)
    assert cert.feasible and cert.margin > 1e-6
    # the Lyapunov solution is itself a valid certificate
    P = linalg.solve_continuous_lyapunov(A.T, -np.eye(3))
    margin, pmin, _ = rb.verify(P, [A])
    assert margin > 0 and pmin > 0


def test_unstable_vertex_rejected():
    A = rb.acl_matrix(13.906, **TABLE)
    with pytest.raises(NotHurwitz):
        rb.quadratic_stability(A, rb.acl_matrix(700.0, **TABLE))


def test_oversized_gain_infeasible():
    with pytest.raises((Infeasible, NotHurwitz)):
        rb.certify_box(rb.ParamBox(), Kc=1.0)


def test_nominal_box_certificate(nominal_box_cert):
    (k1, k2), cert = nominal_box_cert
    A1, A2 = rb.acl_matrix(k1, **TABLE), rb.acl_matrix(k2, **TABLE)
    margin, pmin, tops = rb.verify(cert.P, [A1, A2])
    assert cert.feasible
    assert max(tops) < -1e-6 and pmin > 0
    assert np.trace(cert.P) == pytest.approx(3.0)
    assert np.allclose(cert.P, cert.P.T)
    assert margin == pytest.approx(cert.margin)


def test_certificate_holds_on_hull(nominal_box_cert):
    (k1, k2), cert = nominal_box_cert
    A1, A2 = rb.acl_matrix(k1, **TABLE), rb.acl_matrix(k2, **TABLE)
    for a in np.random.default_rng(1).uniform(0, 1, 10):
        assert rb.lyapunov_eigs(a * A1 + (1 - a) * A2, cert.P)[-1] < 0


def test_deterministic():
    A1, A2 = rb.acl_matrix(1.0, **TABLE), rb.acl_matrix(200.0, **TABLE)
    assert np.array_equal(rb.quadratic_stability(A1, A2).P, rb.quadratic_stability(A1, A2).P)
