"""s-ordered (Gaussian-smoothed) Wigner functions, s-dependent current and backflow.

The smoothing kernel G(x, p, kappa) = exp(-(x^2 + p^2)/kappa) / (pi kappa) with
kappa = -s maps the Wigner function (s = 0) towards the Husimi Q function
(s = -1).  A thermal channel with damping gamma, occupation nbar and duration t
corresponds to s = -2 (2 nbar + 1)(exp(2 gamma t) - 1).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .backflow import TAIL_THRESHOLD, BackflowResult, beta_from_current
from .dynamics import sample_step, settle_window
from .errors import NoBackflowAtZero
from .phase_space import CatWigner
from .states import RescaledParams

DEPTH_THRESHOLD = 1e-12
ORDERINGS = ("convolve_then_evolve", "evolve_then_convolve")


@dataclass(frozen=True)
class SmoothingSpec:
    s: float

    def __post_init__(self):
        if not -1.0 <= self.s <= 0.0:
            raise ValueError(f"s must lie in [-1, 0], got {self.s}")

    @property
    def kappa(self) -> float:
        return -self.s


@dataclass(frozen=True)
class ThermalChannel:
    gamma: float
    nbar: float
    t: float

    def __post_init__(self):
        if not self.gamma > 0 or self.nbar < 0 or self.t < 0:
            raise ValueError("need gamma > 0, nbar >= 0, t >= 0")

    @property
    def tau(self) -> float:
        return self.gamma * self.t


def thermal_to_s(channel: ThermalChannel) -> float:
    """Raw ordering parameter reached by the channel (may fall below -1)."""
    return -2.0 * (2.0 * channel.nbar + 1.0) * math.expm1(2.0 * channel.tau)


def clamp_s(s: float) -> tuple[float, bool]:
    """Clamp to the studied range [-1, 0]; the flag reports whether clamping happened."""
    c = min(max(s, -1.0), 0.0)
    return c, c != s


def gaussian_kernel(x, p, kappa: float):
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    return np.exp(-(x ** 2 + p ** 2) / kappa) / (math.pi * kappa)


def smooth_wigner(rescaled: RescaledParams, x, p, spec: SmoothingSpec):
    """Closed-form W0 * G(-s): per-term Gaussian convolution of the cat Wigner function."""
    return CatWigner(rescaled, spec.kappa)(x, p)


def _wigner_terms(rescaled: RescaledParams):
    """Unsmoothed cat Wigner function as Re sum w exp(-z.M.z/2 + L.z + c0), z = (x, p)."""
    wig = CatWigner(rescaled)
    lo, hi, mid = wig.centres
    M = np.diag([1.0, 4.0])
    pref = wig.prefactor
    return [
        (pref * rescaled.alpha ** 2, M, np.array([0.0, 4.0 * lo]), -2.0 * lo ** 2),
        (pref, M, np.array([0.0, 4.0 * hi]), -2.0 * hi ** 2),
        (pref * 2.0 * rescaled.alpha, M, np.array([1j * rescaled.delta_t, 4.0 * mid]),
         -2.0 * mid ** 2 - 1j * rescaled.theta),
    ]


def _evolve_then_convolve_current(rescaled: RescaledParams, kappa: float, t: float) -> float:
    # shear each Gaussian term, convolve with N(0, kappa/2 I), then take int dp p f(0, p)
    S = np.array([[1.0, -t], [0.0, 1.0]])
    total = 0.0
    for w, M0, L0, c0 in _wigner_terms(rescaled):
        M = S.T @ M0 @ S
        L = S.T @ L0
        C = np.linalg.inv(M)
        mu = C @ L
        Ck = C + 0.5 * kappa * np.eye(2)
        Q = np.linalg.inv(Ck)
        log_amp = c0 + 0.5 * L @ C @ L + 0.5 * math.log(np.linalg.det(C) / np.linalg.det(Ck))
        a = 0.5 * Q[1, 1]
        b = Q[0, 1] * mu[0]
        c = -0.5 * Q[0, 0] * mu[0] ** 2
        val = math.sqrt(math.pi / a) * np.exp(log_amp + c + b * b / (4.0 * a)) * (b / (2.0 * a) + mu[1])
        total += w * val.real
    return float(total)


def s_current(rescaled: RescaledParams, t_tilde, spec: SmoothingSpec,
              ordering: str = "convolve_then_evolve"):
    """j(t, s) = int dp p W_t(0, p, s), vectorized over rescaled time.

    ``convolve_then_evolve`` smooths the initial Wigner function and lets it
    shear freely; ``evolve_then_convolve`` smooths the evolved one.
    """
    if ordering == "convolve_then_evolve":
        out = CatWigner(rescaled, spec.kappa).current(t_tilde)
    elif ordering == "evolve_then_convolve":
        out = np.vectorize(lambda t: _evolve_then_convolve_current(rescaled, spec.kappa, t),
                           otypes=[float])(np.asarray(t_tilde, dtype=float))
    else:
        raise ValueError(f"unknown ordering {ordering!r}")
    return float(out) if np.ndim(out) == 0 else out


def s_backflow(rescaled: RescaledParams, spec: SmoothingSpec,
               window: tuple[float, float] | None = None,
               ordering: str = "convolve_then_evolve") -> BackflowResult:
    jfun = lambda t: s_current(rescaled, t, spec, ordering)
    if window is None:
        window = settle_window(jfun, rescaled.delta_t, rescaled.p0_t)
    return beta_from_current(jfun, window, sample_step(rescaled.delta_t, rescaled.p0_t))


def s_beta(rescaled: RescaledParams, spec: SmoothingSpec,
           window: tuple[float, float] | None = None,
           ordering: str = "convolve_then_evolve") -> float:
    return s_backflow(rescaled, spec, window, ordering).beta


@dataclass
class DepthResult:
    s_m: float
    flag: str = ""
    trace: list[tuple[float, float]] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"s_m": self.s_m, "flag": self.flag})


def negative_current_depth(rescaled: RescaledParams, tol_s: float = 1e-4,
                           ordering: str = "convolve_then_evolve",
                           strict: bool = False) -> DepthResult:
    """Smallest smoothing -s that removes the backflow, by bisection on [0, 1].

    The predicate is s_beta > 1e-12.  A state without backflow at s = 0 gets
    s_m = 0 and the NoBackflowAtZero flag (raised instead when ``strict``).
    """
    if not tol_s > 0:
        raise ValueError("tol_s must be positive")
    has_bf = lambda kappa: s_beta(rescaled, SmoothingSpec(-kappa), ordering=ordering) > DEPTH_THRESHOLD
    if not has_bf(0.0):
        if strict:
            raise NoBackflowAtZero("no backflow at s = 0")
        return DepthResult(0.0, "NoBackflowAtZero")
    lo, hi = 0.0, 1.0
    if has_bf(1.0):
        return DepthResult(1.0, "BackflowAtQ", [(lo, hi)])
    trace = [(lo, hi)]
    while hi - lo > tol_s:
        mid = 0.5 * (lo + hi)
        if has_bf(mid):
            lo = mid
        else:
            hi = mid
        trace.append((lo, hi))
    return DepthResult(hi, "", trace)


def s_scan(rescaled: RescaledParams, s_values, ordering: str = "convolve_then_evolve") -> np.ndarray:
    return np.array([s_beta(rescaled, SmoothingSpec(float(s)), ordering=ordering) for s in s_values])


__all__ = [
    "SmoothingSpec", "ThermalChannel", "thermal_to_s", "clamp_s", "gaussian_kernel",
    "smooth_wigner", "s_current", "s_beta", "s_backflow", "negative_current_depth",
    "DepthResult", "s_scan", "TAIL_THRESHOLD",
]
