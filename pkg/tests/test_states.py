import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from backflow_lab.errors import DegenerateState, Unattainable
from backflow_lab.states import (CatState, RescaledParams, mean_energy, negative_momentum_mass,
                                 normalization_constant, phi0, psi0, sigma_for_energy)

from conftest import TRACE_STATE


def _norm_p(state):
    lo = state.p0 - 12 / state.sigma
    hi = state.p0 + state.delta + 12 / state.sigma
    f = lambda p: abs(phi0(state, p)) ** 2
    return quad(f, lo, hi, points=[state.p0, state.p0 + state.delta], limit=400, epsabs=1e-13, epsrel=1e-13)[0]


def _fourier_oracle(state, x, t=0.0):
    # psi(x, t) = (2 pi)^{-1/2} int dp phi0(p) exp(ipx - i p^2 t / 2), by scipy quad
    lo = state.p0 - 10 / state.sigma
    hi = state.p0 + state.delta + 10 / state.sigma
    g = lambda p: phi0(state, p) * np.exp(1j * p * x - 0.5j * p * p * t)
    kw = dict(limit=2000, epsabs=1e-13, epsrel=1e-13, points=[state.p0, state.p0 + state.delta])
    re = quad(lambda p: g(p).real, lo, hi, **kw)[0]
    im = quad(lambda p: g(p).imag, lo, hi, **kw)[0]
    return (re + 1j * im) / math.sqrt(2 * math.pi)


def test_single_gaussian_normalization():
    st_ = CatState(2.0, 1.5, 0.3, 0.0, 0.0)
    assert normalization_constant(st_) == pytest.approx((2 * 4 / math.pi) ** 0.25, rel=1e-15)


def test_degenerate_superposition():
    with pytest.raises(DegenerateState):
        normalization_constant(CatState(1.0, 1.0, 0.0, 1.0, math.pi))


def test_trace_state_normalized(trace_state):
    assert abs(_norm_p(trace_state) - 1.0) < 1e-10


@given(st.floats(0, 5), st.floats(0, 25), st.floats(1, 6), st.floats(0, 2 * math.pi - 1e-9))
def test_normalization_random(alpha, delta_t, p0_t, theta):
    s = CatState.from_rescaled(1.0, p0_t, delta_t, alpha, theta)
    if s.rescaled.denominator < 1e-6:
        return
    assert abs(_norm_p(s) - 1.0) < 1e-10


def test_invalid_parameters():
    for bad in [dict(sigma=0.0), dict(p0=-1.0), dict(delta=-0.1), dict(alpha=-1.0)]:
        kw = dict(sigma=1.0, p0=1.0, delta=1.0, alpha=1.0, theta=0.0) | bad
        with pytest.raises(ValueError):
            CatState(**kw)


def test_phi0_values(trace_state):
    s = CatState(1.0, 2.0, 1.0, 0.0, 0.3)
    assert phi0(s, 3.0) == pytest.approx(normalization_constant(s))
    real = CatState(1.0, 2.0, 1.0, 1.5, 0.0)
    assert np.all(np.imag(phi0(real, np.linspace(0, 5, 11))) == 0)
    # double-entry: write the formula out again
    st_ = trace_state
    p = st_.p0 + st_.delta / 2
    d = 1 + st_.alpha ** 2 + 2 * st_.alpha * math.exp(-st_.delta_t ** 2 / 2) * math.cos(st_.theta)
    n = (2 * st_.sigma ** 2 / math.pi) ** 0.25 / math.sqrt(d)
    ref = n * (math.exp(-(p - st_.p0 - st_.delta) ** 2 * st_.sigma ** 2)
               + st_.alpha * complex(math.cos(st_.theta), math.sin(st_.theta))
               * math.exp(-(p - st_.p0) ** 2 * st_.sigma ** 2))
    assert abs(phi0(st_, p) - ref) < 1e-14


def test_psi0_single_gaussian_density():
    s = CatState(2.0, 1.0, 0.0, 0.0, 0.0)
    xs = np.linspace(-6, 6, 7)
    # |psi0|^2 = exp(-x^2 / (2 sigma^2)) / (sigma sqrt(2 pi))
    ref = np.exp(-xs ** 2 / 8) / (2 * math.sqrt(2 * math.pi))
    assert np.allclose(np.abs(psi0(s, xs)) ** 2, ref, atol=1e-15)


def test_psi0_parseval(trace_state):
    s = trace_state
    val = quad(lambda x: abs(psi0(s, x)) ** 2, -12 * s.sigma, 12 * s.sigma, limit=500, epsabs=1e-13)[0]
    assert abs(val - 1.0) < 1e-9


def test_psi0_fourier_oracle(trace_state):
    x = 0.3 * trace_state.sigma
    assert abs(psi0(trace_state, x) - _fourier_oracle(trace_state, x)) < 1e-8


def test_negative_momentum_mass():
    s = CatState.from_params(TRACE_STATE)
    m = negative_momentum_mass(s)
    assert 1e-12 <= m <= 1e-8
    single = CatState.from_rescaled(1.0, 3.0, 11.0, 0.0, 0.0)
    ref = quad(lambda p: abs(phi0(single, p)) ** 2, -20, 0, epsabs=1e-16, epsrel=1e-12)[0]
    assert abs(negative_momentum_mass(single) - ref) < 1e-12
    cat_ref = quad(lambda p: abs(phi0(s, p)) ** 2, -20, 0, epsabs=1e-18, epsrel=1e-12)[0]
    assert abs(m - cat_ref) < 1e-13
    seq = [negative_momentum_mass(CatState.from_rescaled(1.0, p, 11.0, 2.0, 1.0)) for p in (1, 2, 3, 4, 5)]
    assert all(a > b for a, b in zip(seq, seq[1:]))


def test_mean_energy():
    s = CatState(2.0, 1.5, 0.0, 0.0, 0.0)
    assert mean_energy(s) == pytest.approx((1.5 ** 2 + 1 / 16) / 2, rel=1e-14)
    t = CatState.from_params(TRACE_STATE, sigma=10.0)
    t2 = CatState(t.sigma, t.p0, t.delta, t.alpha, t.theta + 2 * math.pi)
    assert mean_energy(t) == pytest.approx(mean_energy(t2), rel=1e-13)
    lo, hi = t.p0 - 12 / t.sigma, t.p0 + t.delta + 12 / t.sigma
    ref = quad(lambda p: 0.5 * p * p * abs(phi0(t, p)) ** 2, lo, hi, points=[t.p0, t.p0 + t.delta],
               limit=400, epsabs=1e-14, epsrel=1e-13)[0]
    assert abs(mean_energy(t) - ref) < 1e-9


def test_sigma_for_energy():
    r0 = RescaledParams(3.0, 0.0, 0.0, 0.0)
    assert sigma_for_energy(r0, 2.0) == pytest.approx(math.sqrt((9 + 0.25) / 4), rel=1e-14)
    s1, s2 = sigma_for_energy(TRACE_STATE, 1.0), sigma_for_energy(TRACE_STATE, 2.0)
    assert s2 ** 2 == pytest.approx(s1 ** 2 / 2, rel=1e-14)
    back = mean_energy(CatState.from_params(TRACE_STATE, sigma=s1))
    assert abs(back - 1.0) < 1e-9
    with pytest.raises(Unattainable):
        sigma_for_energy(TRACE_STATE, 0.0)


def test_rescaled_accessors():
    s = CatState.from_rescaled(4.0, 3.0, 11.0, 2.0, 0.5)
    assert s.p0_t == 3.0 and s.delta_t == 11.0
    assert s.rescaled == RescaledParams(3.0, 11.0, 2.0, 0.5)


@given(st.floats(0.2, 30))
def test_sigma_covariance_of_momentum_density(sigma):
    r = TRACE_STATE
    a = CatState.from_params(r, 1.0)
    b = CatState.from_params(r, sigma)
    pt = np.linspace(-2, 18, 41)
    dens_a = np.abs(phi0(a, pt)) ** 2
    dens_b = np.abs(phi0(b, pt / sigma)) ** 2 / sigma
    assert np.allclose(dens_a, dens_b, atol=1e-12, rtol=1e-12)
