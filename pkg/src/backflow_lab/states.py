"""Superpositions of two Gaussian momentum wave packets (Gaussian cat states).

Natural units (hbar = m = 1).  The momentum wave function is

    phi0(p) = N [exp(-(p - p0 - delta)^2 sigma^2) + alpha e^{i theta} exp(-(p - p0)^2 sigma^2)]

and the dimensionless ("rescaled") parameters are p0_t = sigma*p0,
delta_t = sigma*delta; times, positions and momenta rescale as
t_t = t/sigma^2, x_t = x/sigma, p_t = sigma*p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import DegenerateState, Unattainable

DEGENERACY_EPS = 1e-12


@dataclass(frozen=True)
class RescaledParams:
    p0_t: float
    delta_t: float
    alpha: float
    theta: float

    def __post_init__(self):
        if not self.p0_t > 0:
            raise ValueError(f"p0_t must be positive, got {self.p0_t}")
        if self.delta_t < 0 or self.alpha < 0:
            raise ValueError("delta_t and alpha must be non-negative")

    @property
    def denominator(self) -> float:
        """1 + alpha^2 + 2 alpha e^{-delta_t^2/2} cos(theta), the squared-norm factor."""
        return denominator(self.alpha, self.delta_t, self.theta)

    def with_(self, **changes) -> "RescaledParams":
        fields = dict(p0_t=self.p0_t, delta_t=self.delta_t, alpha=self.alpha, theta=self.theta)
        fields.update(changes)
        return RescaledParams(**fields)


def denominator(alpha: float, delta_t: float, theta: float) -> float:
    return 1.0 + alpha ** 2 + 2.0 * alpha * math.exp(-0.5 * delta_t ** 2) * math.cos(theta)


def check_denominator(alpha: float, delta_t: float, theta: float) -> float:
    d = denominator(alpha, delta_t, theta)
    if d <= DEGENERACY_EPS:
        raise DegenerateState(
            f"superposition vanishes: 1 + a^2 + 2a e^(-d^2/2) cos(theta) = {d:.3e}")
    return d


@dataclass(frozen=True)
class CatState:
    sigma: float
    p0: float
    delta: float
    alpha: float
    theta: float
    mass: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.p0 > 0:
            raise ValueError(f"p0 must be positive, got {self.p0}")
        if self.delta < 0 or self.alpha < 0:
            raise ValueError("delta and alpha must be non-negative")
        if self.mass != 1.0:
            raise ValueError("only m = 1 (natural units) is supported")

    @classmethod
    def from_rescaled(cls, sigma: float, p0_t: float, delta_t: float,
                      alpha: float, theta: float) -> "CatState":
        return cls(sigma=sigma, p0=p0_t / sigma, delta=delta_t / sigma, alpha=alpha, theta=theta)

    @classmethod
    def from_params(cls, params: RescaledParams, sigma: float = 1.0) -> "CatState":
        return cls.from_rescaled(sigma, params.p0_t, params.delta_t, params.alpha, params.theta)

    @property
    def p0_t(self) -> float:
        return self.sigma * self.p0

    @property
    def delta_t(self) -> float:
        return self.sigma * self.delta

    @property
    def rescaled(self) -> RescaledParams:
        return RescaledParams(self.p0_t, self.delta_t, self.alpha, self.theta)

    @property
    def components(self) -> tuple[tuple[complex, float], tuple[complex, float]]:
        """(amplitude, centre momentum) of both Gaussians, normalization included."""
        n = normalization_constant(self)
        return ((n, self.p0 + self.delta),
                (n * self.alpha * complex(math.cos(self.theta), math.sin(self.theta)), self.p0))


def normalization_constant(state: CatState) -> float:
    d = check_denominator(state.alpha, state.delta_t, state.theta)
    return (2.0 * state.sigma ** 2 / math.pi) ** 0.25 / math.sqrt(d)


def phi0(state: CatState, p):
    p = np.asarray(p, dtype=float)
    s2 = state.sigma ** 2
    out = sum(c * np.exp(-(p - k) ** 2 * s2) for c, k in state.components)
    return out


def gaussian_packet(k: float, sigma: float, x, t):
    """Free evolution of exp(-(p-k)^2 sigma^2) in position space, with its x-derivative.

    psi_k(x, t) = (2 pi)^{-1/2} int dp exp(ipx - ip^2 t/2) exp(-(p-k)^2 sigma^2).
    """
    x = np.asarray(x, dtype=float)
    a = sigma ** 2 + 0.5j * t
    xi = x - k * t
    psi = np.sqrt(0.5 / a) * np.exp(-xi ** 2 / (4.0 * a) + 1j * k * x - 0.5j * k ** 2 * t)
    dpsi = psi * (-xi / (2.0 * a) + 1j * k)
    return psi, dpsi


def psi_and_derivative(state: CatState, x, t):
    """Closed-form psi(x, t) and d psi/dx (physical units)."""
    psi = 0.0
    dpsi = 0.0
    for c, k in state.components:
        g, dg = gaussian_packet(k, state.sigma, x, t)
        psi = psi + c * g
        dpsi = dpsi + c * dg
    return psi, dpsi


def psi0(state: CatState, x):
    """Position wave function at t = 0 (symmetric (2 pi)^{-1/2} Fourier convention)."""
    return psi_and_derivative(state, x, 0.0)[0]


def negative_momentum_mass(state: CatState) -> float:
    """Probability carried by p < 0, from the erfc closed form."""
    r = state.rescaled
    d = check_denominator(r.alpha, r.delta_t, r.theta)
    s2 = math.sqrt(2.0)
    mid = r.p0_t + 0.5 * r.delta_t
    total = (erfc(s2 * (r.p0_t + r.delta_t)) + r.alpha ** 2 * erfc(s2 * r.p0_t)
             + 2.0 * r.alpha * math.cos(r.theta) * math.exp(-0.5 * r.delta_t ** 2) * erfc(s2 * mid))
    return float(total / (2.0 * d))


def _rescaled_energy(r: RescaledParams) -> float:
    # sigma^2 <p^2> in terms of the rescaled parameters
    d = check_denominator(r.alpha, r.delta_t, r.theta)
    upper = r.p0_t + r.delta_t
    mid = r.p0_t + 0.5 * r.delta_t
    cross = 2.0 * r.alpha * math.cos(r.theta) * math.exp(-0.5 * r.delta_t ** 2)
    return 0.25 + (upper ** 2 + r.alpha ** 2 * r.p0_t ** 2 + cross * mid ** 2) / d


def mean_energy(state: CatState) -> float:
    """<p^2>/2m from the analytic second moment of |phi0|^2."""
    return _rescaled_energy(state.rescaled) / (2.0 * state.mass * state.sigma ** 2)


def sigma_for_energy(rescaled: RescaledParams, energy: float) -> float:
    """Width sigma giving mean energy ``energy`` at fixed rescaled parameters.

    The energy scales exactly as sigma^-2, so the root is explicit.
    """
    if not energy > 0 or not math.isfinite(energy):
        raise Unattainable(f"energy must be positive and finite, got {energy}")
    return math.sqrt(_rescaled_energy(rescaled) / (2.0 * energy))
