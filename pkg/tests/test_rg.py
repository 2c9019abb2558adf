import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ymlab.errors import LandauPoleError, ParameterError
from ymlab.lie import build_algebra
from ymlab.renorm import beta_theoretical
from ymlab.rg import RGState, flow_ode, run_coupling, transmutation_scale


def test_scheme_point_is_identity():
    assert run_coupling(0.7, 2.0, 2.0, 0.05) == 0.7


def test_asymptotic_freedom_limit():
    b, g2 = 0.05, 0.5
    for eps in (1e-50, 1e-100, 1e-200):
        u = run_coupling(g2, 1.0, eps, b)
        assert u < 0.5
    # u * (-beta ln eps) -> 1 with a deficit below 1/(beta g2 |ln eps|)
    prev = 1.0
    for eps in (1e-10, 1e-100, 1e-300):
        gap = 1 - run_coupling(g2, 1.0, eps, b) * (-b * math.log(eps))
        assert 0 < gap < 1 / (b * g2 * abs(math.log(eps))) and gap < prev
        prev = gap


def test_pole_reported():
    b, g2, mu = 0.05, 0.5, 1.0
    pole = mu * math.exp(1 / (b * g2))
    with pytest.raises(LandauPoleError) as exc:
        run_coupling(g2, mu, pole * 1.0001, b)
    assert exc.value.pole_scale == pytest.approx(pole)


def test_su3_flow_matches_closed_form():
    b = beta_theoretical(build_algebra("su", 3))
    s = RGState(0.5, 1.0, b)
    out = flow_ode(s, -3.0)
    assert abs(out.u / run_coupling(0.5, 1.0, math.exp(-3.0), b) - 1) < 1e-10


def test_zero_length_and_round_trip():
    s = RGState(0.5, 1.0, 0.07)
    assert flow_ode(s, 0.0) == s
    back = flow_ode(flow_ode(s, -7.0), 0.0)
    assert abs(back.u / s.u - 1) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.1, 10.0), st.floats(-12.0, 3.0), st.floats(0.005, 0.2))
def test_flow_equals_closed_form(g2, mu, dlog, beta):
    assume(dlog < 0.9 / (beta * g2))
    s = RGState(g2, mu, beta)
    target = math.log(mu) + dlog
    ode = flow_ode(s, target).u
    closed = run_coupling(g2, mu, math.exp(target), beta)
    assert abs(ode / closed - 1) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.1, 10.0), st.floats(0.005, 0.2))
def test_transmutation_invariance(g2, mu, beta):
    lam = transmutation_scale(g2, mu, beta)
    assume(math.isfinite(lam) and lam < 1e300)
    for frac in (1e-6, 1e-3, 0.1, 0.5, 0.9):
        eps = mu * (lam / mu) ** frac if frac else mu
        u = run_coupling(g2, mu, eps, beta)
        assert abs(transmutation_scale(u, eps, beta) / lam - 1) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.005, 0.2), st.floats(-10, -0.01))
def test_monotone_in_eps(g2, beta, dlog):
    a = run_coupling(g2, 1.0, math.exp(dlog), beta)
    b = run_coupling(g2, 1.0, math.exp(dlog / 2), beta)
    assert a < b


def test_transmutation_limits():
    assert transmutation_scale(0.5, 2.0, 1e12) == pytest.approx(2.0)
    assert transmutation_scale(1e-6, 2.0, 0.05) == math.inf
    with pytest.raises(ParameterError):
        transmutation_scale(-1.0, 1.0, 0.05)


def test_pole_crossing_in_flow():
    with pytest.raises(LandauPoleError):
        flow_ode(RGState(0.5, 1.0, 0.05), 100.0)


def test_vectorized_run():
    eps = np.array([1e-3, 1e-2, 1e-1])
    u = run_coupling(0.5, 1.0, eps, 0.05)
    assert np.all(np.diff(u) > 0)
