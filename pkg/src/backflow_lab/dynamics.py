"""Free evolution of the cat state and the probability current through the origin.

``phi_t`` and ``psi_t`` take physical arguments.  The half-line observables
take the rescaled time t_t = t / sigma^2 and return rescaled values
(j_t = sigma^2 j), so that they depend only on the rescaled parameters.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcx

from . import numerics
from .numerics import Bracket
from .phase_space import CatWigner
from .states import CatState, phi0, psi_and_derivative

EDGE_FRACTION = 1e-6


def phi_t(state: CatState, p, t: float):
    p = np.asarray(p, dtype=float)
    return phi0(state, p) * np.exp(-0.5j * p ** 2 * t / state.mass)


def psi_t(state: CatState, x, t: float):
    return psi_and_derivative(state, x, t)[0]


def _half_line_integral(A2, B, C):
    # int_0^inf exp(-A2 x^2 + B x + C) dx, A2 > 0 real, B and C complex
    sq = np.sqrt(A2)
    z = -B / (2.0 * sq)
    pref = 0.5 * np.sqrt(np.pi / A2)
    left = np.real(z) >= 0
    out = np.where(left, np.exp(C) * erfcx(np.where(left, z, 0.0)),
                   2.0 * np.exp(C + z * z) - np.exp(C) * erfcx(np.where(left, 0.0, -z)))
    return pref * out


def _probability_closed(state: CatState, t):
    """P(t) for physical t via complex error functions (vectorized)."""
    t = np.asarray(t, dtype=float)
    a = state.sigma ** 2 + 0.5j * t
    u = 1.0 / (4.0 * a)
    A2 = 2.0 * u.real
    total = np.zeros(t.shape, dtype=complex)
    comps = state.components
    for ck, k in comps:
        for cl, l in comps:
            B = 2.0 * u * k * t + 2.0 * np.conj(u) * l * t + 1j * (k - l)
            C = -u * k * k * t * t - np.conj(u) * l * l * t * t - 0.5j * (k * k - l * l) * t
            total = total + ck * np.conj(cl) * (0.5 / np.abs(a)) * _half_line_integral(A2, B, C)
    return total.real


def _probability_quadrature(state: CatState, t: float, abs_tol: float = 1e-12) -> float:
    width = abs(state.sigma ** 2 + 0.5j * t) / state.sigma
    right = max(0.0, max(k * t for _, k in state.components)) + 12.0 * width
    res = numerics.integrate_1d(lambda x: np.abs(psi_t(state, x, t)) ** 2, 0.0, right, abs_tol)
    return float(res.value)


def probability_P(state: CatState, t_tilde, method: str = "closed"):
    """Probability of x >= 0 at rescaled time ``t_tilde``.

    ``method="closed"`` (vectorized, erfcx based) or ``"quadrature"``.
    """
    t = state.sigma ** 2 * np.asarray(t_tilde, dtype=float)
    if method == "closed":
        out = _probability_closed(state, t)
        return float(out) if out.ndim == 0 else out
    if method == "quadrature":
        if t.ndim == 0:
            return _probability_quadrature(state, float(t))
        return np.array([_probability_quadrature(state, float(tt)) for tt in t.ravel()]).reshape(t.shape)
    raise ValueError(f"unknown method {method!r}")


def current_j(state: CatState, t_tilde, route: str = "wavefunction"):
    """Rescaled probability current at x = 0.

    ``wavefunction``: Im(psi* dpsi/dx) from the closed-form psi_t;
    ``wigner``: adaptive quadrature of int dp p W(0, p; t) over the sheared
    closed-form Wigner function;
    ``analytic``: the Gaussian moment closed form of the same p-integral.
    """
    tt = np.asarray(t_tilde, dtype=float)
    if route == "wavefunction":
        psi, dpsi = psi_and_derivative(state, 0.0, state.sigma ** 2 * tt)
        out = state.sigma ** 2 * np.imag(np.conj(psi) * dpsi) / state.mass
    elif route == "analytic":
        out = CatWigner(state.rescaled).current(tt)
    elif route == "wigner":
        wig = CatWigner(state.rescaled)
        lo, hi = wig.p_range()

        def one(t):
            f = lambda p: p * wig.at_time(0.0, p, t)
            # at large |t| the sheared integrand collapses onto p ~ 1/|t|
            breaks = [0.0] + ([s / abs(t) for s in (-4.0, -1.0, 1.0, 4.0, 16.0)] if t else [])
            return numerics.integrate_1d(f, lo, hi, 1e-11, breakpoints=breaks).value

        out = np.vectorize(one, otypes=[float])(tt)
    else:
        raise ValueError(f"unknown route {route!r}")
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class FluxInterval:
    t1: float
    t2: float
    flux: float

    def to_json(self) -> str:
        return json.dumps({"t1": self.t1, "t2": self.t2, "flux": self.flux})


def flux_F(state: CatState, t1: float, t2: float) -> FluxInterval:
    """P(t2) - P(t1) over a rescaled time interval."""
    if not t1 < t2:
        raise ValueError(f"flux_F needs t1 < t2, got ({t1}, {t2})")
    return FluxInterval(t1, t2, float(probability_P(state, t2) - probability_P(state, t1)))


def flux_by_quadrature(jfun, t1: float, t2: float, abs_tol: float = 1e-12) -> float:
    return float(numerics.integrate_1d(jfun, t1, t2, abs_tol).value)


@dataclass(frozen=True)
class CurrentTrace:
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    zero_brackets: list[Bracket]

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values differ in length")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_tilde", "j_tilde"])
            for t, j in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(j))])


def oscillation_frequency(delta_t: float, p0_t: float) -> float:
    """Angular frequency in t_t of the interference term at the origin."""
    return delta_t * (p0_t + 0.5 * delta_t)


def sample_step(delta_t: float, p0_t: float, per_period: int = 64) -> float:
    freq = max(oscillation_frequency(delta_t, p0_t), 2.0 * (p0_t + delta_t), 1.0)
    return 2.0 * math.pi / (freq * per_period)


def settle_window(jfun, delta_t: float, p0_t: float, t_max: float = 1e4) -> tuple[float, float]:
    """Symmetric window [-T, T] grown until |j| near both edges is below 1e-6 max|j|.

    Starts from T = max(1, 20 / (delta_t p0_t + 1)); each step doubles T.
    """
    T = max(1.0, 20.0 / (delta_t * p0_t + 1.0))
    while True:
        ts = np.linspace(-T, T, 4001)
        j = np.abs(jfun(ts))
        peak = j.max()
        edge = max(j[:100].max(), j[-100:].max())
        if peak == 0.0 or edge < EDGE_FRACTION * peak or T >= t_max:
            return -T, T
        T *= 2.0


def default_window(state: CatState) -> tuple[float, float]:
    r = state.rescaled
    return settle_window(lambda t: current_j(state, t), r.delta_t, r.p0_t)


def current_trace(state: CatState, window: tuple[float, float] | None = None,
                  n_samples: int = 2001, tail_tol: float = 1e-8) -> CurrentTrace:
    """Dense samples of the rescaled current with sign-change brackets.

    Samples with |j| below ``tail_tol`` are treated as zero when bracketing,
    so negative-momentum tails do not produce spurious crossings.
    """
    if n_samples < 16:
        raise ValueError("n_samples must be >= 16")
    if window is None:
        window = default_window(state)
    ts = np.linspace(window[0], window[1], n_samples)
    js = np.asarray(current_j(state, ts))
    masked = np.where(np.abs(js) < tail_tol, 0.0, js)
    return CurrentTrace(ts, js, numerics.brackets_from_samples(ts, masked))
