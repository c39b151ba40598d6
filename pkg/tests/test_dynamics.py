import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from backflow_lab import numerics
from backflow_lab.backflow import backflow_threshold_alpha
from backflow_lab.dynamics import (CurrentTrace, FluxInterval, current_j, current_trace, default_window,
                                   flux_by_quadrature, flux_F, phi_t, probability_P, psi_t)
from backflow_lab.numerics import Bracket
from backflow_lab.states import CatState, RescaledParams, phi0, psi0

from conftest import TRACE_STATE


def _fourier_oracle(state, x, t):
    lo = state.p0 - 10 / state.sigma
    hi = state.p0 + state.delta + 10 / state.sigma
    g = lambda p: phi0(state, p) * np.exp(1j * p * x - 0.5j * p * p * t)
    kw = dict(limit=4000, epsabs=1e-13, epsrel=1e-13, points=[state.p0, state.p0 + state.delta])
    re = quad(lambda p: g(p).real, lo, hi, **kw)[0]
    im = quad(lambda p: g(p).imag, lo, hi, **kw)[0]
    return (re + 1j * im) / math.sqrt(2 * math.pi)


def five_point(P, ts, h):
    return (-P(ts + 2 * h) + 8 * P(ts + h) - 8 * P(ts - h) + P(ts - 2 * h)) / (12 * h)


def test_phi_t(trace_state):
    s = trace_state
    ps = np.linspace(0, 2, 9)
    assert np.allclose(phi_t(s, ps, 0.0), phi0(s, ps))
    assert np.allclose(np.abs(phi_t(s, ps, 37.0)), np.abs(phi0(s, ps)), atol=1e-15)
    t = 0.5 * s.sigma ** 2
    ratio = phi_t(s, s.p0, t) / phi0(s, s.p0)
    assert abs(np.angle(ratio) - math.remainder(-s.p0_t ** 2 * 0.5 / 2, 2 * math.pi)) < 1e-12


def test_psi_t_against_fourier_inversion(trace_state):
    s = trace_state
    assert np.allclose(psi_t(s, np.linspace(-5, 5, 7), 0.0), psi0(s, np.linspace(-5, 5, 7)))
    for tt in (-0.2, 0.0, 0.2):
        t = tt * s.sigma ** 2
        assert abs(psi_t(s, 0.0, t) - _fourier_oracle(s, 0.0, t)) < 1e-8


def test_psi_t_unitary(trace_state):
    s = trace_state
    for tt in (0.0, 0.3, -1.5):
        t = tt * s.sigma ** 2
        width = abs(s.sigma ** 2 + 0.5j * t) / s.sigma
        c = [0.0, s.p0 * t, (s.p0 + s.delta) * t]
        lo, hi = min(c) - 14 * width, max(c) + 14 * width
        val = numerics.integrate_1d(lambda x: np.abs(psi_t(s, x, t)) ** 2, lo, hi, 1e-11).value
        assert abs(val - 1.0) < 1e-9


def test_probability_limits():
    s = CatState.from_params(TRACE_STATE, sigma=10.0)
    assert probability_P(s, 50.0) > 0.999
    single = CatState.from_rescaled(1.0, 3.0, 0.0, 0.0, 0.0)
    assert probability_P(single, 0.0) == pytest.approx(0.5, abs=1e-14)
    ts = np.linspace(-3, 3, 301)
    P = probability_P(s, ts)
    assert np.all((P >= 0) & (P <= 1))


def test_probability_closed_form_vs_quadrature(trace_state):
    ts = np.array([-1.0, -0.2, 0.0, 0.013, 0.5, 2.0])
    closed = probability_P(trace_state, ts)
    quadr = probability_P(trace_state, ts, method="quadrature")
    assert np.allclose(closed, quadr, atol=1e-10, rtol=0)


def test_probability_dips_follow_current(trace_state):
    ts = np.linspace(-1, 1, 8001)
    P = probability_P(trace_state, ts)
    j = current_j(trace_state, ts)
    dP = np.diff(P)
    jm = 0.5 * (j[1:] + j[:-1])
    strong = np.abs(jm) > 1e-3
    assert np.all(np.sign(dP[strong]) == np.sign(jm[strong]))
    assert np.any(dP < 0)


def test_current_examples():
    single = CatState.from_rescaled(1.0, 3.0, 11.0, 0.0, 0.0)
    assert current_j(single, 0.0) > 0
    for d, p0 in ((11.0, 3.0), (5.0, 2.0)):
        a = backflow_threshold_alpha(d, p0)
        s = CatState.from_rescaled(1.0, p0, d, a, math.pi)
        assert abs(current_j(s, 0.0)) < 1e-6


def test_current_routes_agree(trace_state):
    for t in (-0.4, 0.0, 0.0123, 0.3):
        w = current_j(trace_state, t)
        assert abs(w - current_j(trace_state, t, route="wigner")) < 1e-8
        assert abs(w - current_j(trace_state, t, route="analytic")) < 1e-12


@given(st.floats(0.1, 4), st.floats(0, 15), st.floats(1.5, 5), st.floats(0, 2 * math.pi), st.floats(-2, 2))
def test_route_equivalence_property(alpha, delta_t, p0_t, theta, t):
    s = CatState.from_rescaled(1.0, p0_t, delta_t, alpha, theta)
    if s.rescaled.denominator < 1e-6:
        return
    assert abs(current_j(s, t) - current_j(s, t, route="wigner")) < 1e-8


def test_unknown_route_and_method(trace_state):
    with pytest.raises(ValueError):
        current_j(trace_state, 0.0, route="nope")
    with pytest.raises(ValueError):
        probability_P(trace_state, 0.0, method="nope")


def test_continuity_equation(trace_state):
    # 5-point stencil; relative error with a floor of 1e-3 of the peak current
    w = default_window(trace_state)
    ts = np.random.default_rng(7).uniform(w[0], w[1], 200)
    fd = five_point(lambda t: probability_P(trace_state, t), ts, 1e-4)
    j = current_j(trace_state, ts)
    peak = np.abs(current_j(trace_state, np.linspace(*w, 20001))).max()
    assert np.max(np.abs(fd - j) / np.maximum(np.abs(j), 1e-3 * peak)) < 1e-6


@given(st.floats(1.0, 20.0))
def test_sigma_invariance_of_rescaled_current(sigma):
    a = CatState.from_params(TRACE_STATE, 1.0)
    b = CatState.from_params(TRACE_STATE, sigma)
    ts = np.linspace(-1, 1, 41)
    assert np.allclose(current_j(a, ts), current_j(b, ts), atol=1e-10, rtol=0)
    assert np.allclose(probability_P(a, ts), probability_P(b, ts), atol=1e-12, rtol=0)


def test_flux(trace_state):
    with pytest.raises(ValueError):
        flux_F(trace_state, 0.1, 0.1)
    f = flux_F(trace_state, -0.1, 0.05)
    assert isinstance(f, FluxInterval)
    assert abs(flux_F(trace_state, 0.1, 0.1 + 1e-12).flux) < 1e-10
    a = flux_F(trace_state, -0.3, 0.1).flux + flux_F(trace_state, 0.1, 0.4).flux
    assert abs(a - flux_F(trace_state, -0.3, 0.4).flux) < 1e-14
    assert '"flux"' in f.to_json()


def test_flux_on_negative_lobe_matches_quadrature(trace_state):
    j = lambda t: current_j(trace_state, t)
    trace = current_trace(trace_state, (-0.3, 0.3), 6001)
    lobe = None
    for a, b in zip(trace.zero_brackets, trace.zero_brackets[1:]):
        if j(0.5 * (a.hi + b.lo)) < 0:
            lobe = (numerics.refine_root(j, a), numerics.refine_root(j, b))
            break
    assert lobe is not None
    fl = flux_F(trace_state, *lobe).flux
    assert fl < 0
    assert abs(fl - flux_by_quadrature(j, *lobe)) < 1e-8


def test_current_trace(tmp_path):
    single = CatState.from_rescaled(1.0, 3.0, 11.0, 0.0, 0.0)
    tr = current_trace(single, (-3, 3), 501)
    assert tr.zero_brackets == []
    with pytest.raises(ValueError):
        current_trace(single, (-1, 1), 8)
    with pytest.raises(ValueError):
        CurrentTrace(np.zeros(3), np.zeros(2), [])
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t_tilde,j_tilde" and len(lines) == 502


def test_theta_shifts_negative_peaks_and_central_minimum():
    base = dict(sigma=1.0, p0_t=3.0, delta_t=11.0, alpha=2.0)
    ts = np.linspace(-0.3, 0.3, 12001)
    j_pi = current_j(CatState.from_rescaled(theta=math.pi, **base), ts)
    j_q = current_j(CatState.from_rescaled(theta=math.pi / 4, **base), ts)
    assert abs(ts[np.argmin(j_pi)]) < 1e-3
    mins = lambda j: ts[1:-1][(j[1:-1] < j[:-2]) & (j[1:-1] < j[2:]) & (j[1:-1] < 0)]
    a, b = mins(j_pi), mins(j_q)
    near = [np.min(np.abs(b - x)) for x in a]
    assert max(near) > 1e-3


def test_default_window_decays(trace_state):
    lo, hi = default_window(trace_state)
    ts = np.linspace(lo, hi, 4001)
    j = np.abs(current_j(trace_state, ts))
    assert max(j[:100].max(), j[-100:].max()) < 1e-6 * j.max()
    assert Bracket(lo, hi).mid == 0.0
