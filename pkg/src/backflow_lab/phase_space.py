"""Wigner function of Gaussian cat states under free shear evolution, with its negative volume.

Everything here works in rescaled phase-space variables (x_t, p_t) except
``wigner_numeric``, which transforms a physical wave function.

The cat Wigner function, optionally smoothed by the isotropic Gaussian kernel
of width ``kappa`` (kappa = -s), keeps the separable form

    W(x, p) = exp(-x^2 / 2V) [A(p) + B(p) cos(omega x - theta)]

with V = 1 + kappa/2 and Gaussian profiles A, B in p of variance
U = 1/4 + kappa/2.  ``CatWigner`` stores that form; most routines below reduce
to 1D p-integrals of closed-form x-integrals.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erf, wofz

from . import numerics
from .errors import NonConvergence
from .states import CatState, RescaledParams, check_denominator, psi_and_derivative

WIGNER_BOUND = 2.0 / math.pi
GRID_MAGIC = b"WGRID001"
_X_CUTOFF = 8.0  # in units of sqrt(2V): exp(-64) envelope
_P_CUTOFF = 12.0  # in units of sqrt(U): exp(-72)


@dataclass(frozen=True)
class CatWigner:
    params: RescaledParams
    kappa: float = 0.0

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        check_denominator(self.params.alpha, self.params.delta_t, self.params.theta)

    @property
    def V(self) -> float:
        return 1.0 + 0.5 * self.kappa

    @property
    def U(self) -> float:
        return 0.25 + 0.5 * self.kappa

    @property
    def omega(self) -> float:
        return self.params.delta_t / self.V

    @property
    def prefactor(self) -> float:
        return 1.0 / (math.pi * self.params.denominator * math.sqrt(4.0 * self.V * self.U))

    @property
    def fringe_amplitude(self) -> float:
        # interference damping from the convolution, exp(-delta^2 (1 - 1/V) / 2)
        d = self.params.delta_t
        return 2.0 * self.params.alpha * math.exp(-0.5 * d * d * (1.0 - 1.0 / self.V))

    @property
    def centres(self) -> tuple[float, float, float]:
        """(lower, upper, midpoint) momentum centres."""
        r = self.params
        return r.p0_t, r.p0_t + r.delta_t, r.p0_t + 0.5 * r.delta_t

    def p_range(self) -> tuple[float, float]:
        lo, hi, _ = self.centres
        w = _P_CUTOFF * math.sqrt(self.U)
        return lo - w, hi + w

    def x_cutoff(self) -> float:
        return _X_CUTOFF * math.sqrt(2.0 * self.V)

    def _g(self, p, c):
        return np.exp(-(p - c) ** 2 / (2.0 * self.U))

    def A(self, p):
        lo, hi, _ = self.centres
        return self.prefactor * (self.params.alpha ** 2 * self._g(p, lo) + self._g(p, hi))

    def B(self, p):
        return self.prefactor * self.fringe_amplitude * self._g(p, self.centres[2])

    def __call__(self, x, p):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        env = np.exp(-x ** 2 / (2.0 * self.V))
        return env * (self.A(p) + self.B(p) * np.cos(self.omega * x - self.params.theta))

    def at_time(self, x, p, t):
        """Free evolution by shear: W_t(x, p) = W(x - p t, p)."""
        x, p = shear((x, p), -t)
        return self(x, p)

    def current(self, t):
        """Closed form of int dp p W(-p t, p), vectorized over t."""
        t = np.asarray(t, dtype=float)
        U, V = self.U, self.V
        a = t ** 2 / (2.0 * V) + 1.0 / (2.0 * U)
        lo, hi, mid = self.centres

        def moment(b, c0):
            return np.sqrt(np.pi / a) * (b / (2.0 * a)) * np.exp(b * b / (4.0 * a) + c0)

        diag = (self.params.alpha ** 2 * moment(lo / U, -lo ** 2 / (2.0 * U))
                + moment(hi / U, -hi ** 2 / (2.0 * U)))
        b = mid / U - 1j * self.omega * t
        cross = moment(b, -mid ** 2 / (2.0 * U) - 1j * self.params.theta)
        return self.prefactor * (diag + self.fringe_amplitude * cross.real)

    def slice_parts(self, p: float, x1: float = -math.inf, x2: float = math.inf):
        """(positive part, negative part) of int_{x1}^{x2} W(x, p) dx, both >= 0."""
        A = float(self.A(p))
        B = float(self.B(p))
        total = A * _gauss_integral(x1, x2, self.V) + B * _fringe_integral(
            x1, x2, self.V, self.omega, self.params.theta)
        neg = 0.0
        if B > A and self.omega > 0:
            a = math.acos(-A / B)
            lo_n, hi_n = _negative_intervals(a, self.params.theta, self.omega,
                                             max(x1, -self.x_cutoff()), min(x2, self.x_cutoff()))
            if lo_n.size:
                neg = -(A * _gauss_integral(lo_n, hi_n, self.V).sum()
                        + B * _fringe_integral(lo_n, hi_n, self.V, self.omega,
                                               self.params.theta).sum())
                neg = max(neg, 0.0)
        elif B > 0 and self.omega == 0 and A + B * math.cos(self.params.theta) < 0:
            neg = -total
        return total + neg, neg

    def negative_support(self) -> list[float]:
        """Momenta where B(p) = A(p), the edges of the region that can go negative."""
        lo, hi = self.p_range()
        brackets = numerics.find_sign_changes(lambda p: self.B(p) - self.A(p), (lo, hi), 4001)
        return [numerics.refine_root(lambda p: float(self.B(p) - self.A(p)), b, 1e-13)
                for b in brackets]


def _gauss_integral(x1, x2, V):
    s = math.sqrt(2.0 * V)
    return math.sqrt(0.5 * math.pi * V) * (erf(np.asarray(x2) / s) - erf(np.asarray(x1) / s))


def _fringe_h(y, b):
    # antiderivative helper: int_{y1}^{y2} exp(-y^2 + 2iby) dy = sqrt(pi)/2 (h(y1) - h(y2))
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape, dtype=complex)
    pos = y >= 0
    fin = np.isfinite(y)
    yp = y[pos & fin]
    out[pos & fin] = np.exp(-yp ** 2 + 2j * b * yp) * wofz(b + 1j * yp)
    yn = y[~pos & fin]
    out[~pos & fin] = 2.0 * math.exp(-b * b) - np.exp(-yn ** 2 + 2j * b * yn) * wofz(-b - 1j * yn)
    out[np.isposinf(y)] = 0.0
    out[np.isneginf(y)] = 2.0 * math.exp(-b * b)
    return out


def _fringe_integral(x1, x2, V, omega, theta):
    """int_{x1}^{x2} exp(-x^2/2V) cos(omega x - theta) dx via the Faddeeva function."""
    s = math.sqrt(2.0 * V)
    b = 0.5 * omega * s
    y1 = np.asarray(x1, dtype=float) / s
    y2 = np.asarray(x2, dtype=float) / s
    val = s * 0.5 * math.sqrt(math.pi) * (_fringe_h(y1, b) - _fringe_h(y2, b))
    return (np.exp(-1j * theta) * val).real


def _negative_intervals(a, theta, omega, x1, x2):
    # cos(omega x - theta) < cos(a) on (theta + a + 2 pi n, theta + 2 pi - a + 2 pi n) / omega
    if not x1 < x2:
        return np.empty(0), np.empty(0)
    two_pi = 2.0 * math.pi
    n_lo = math.floor((omega * x1 - theta - two_pi) / two_pi)
    n_hi = math.ceil((omega * x2 - theta) / two_pi)
    n = np.arange(n_lo, n_hi + 1)
    lo = np.maximum((theta + a + two_pi * n) / omega, x1)
    hi = np.minimum((theta + two_pi - a + two_pi * n) / omega, x2)
    keep = hi > lo
    return lo[keep], hi[keep]


def wigner_cat(rescaled: RescaledParams, x, p):
    """Closed-form Wigner function of the cat state in rescaled variables."""
    return CatWigner(rescaled)(x, p)


def shear(point, t):
    """Free-flight phase-space map (x, p) -> (x + p t / m, p) with m = 1."""
    x, p = point
    return x + p * t, p


def wigner_t(rescaled: RescaledParams, x, p, t):
    return CatWigner(rescaled).at_time(x, p, t)


def wigner_numeric(state: CatState, x, p, t: float = 0.0, abs_tol: float = 1e-11,
                   return_imag: bool = False):
    """Wigner transform of the (physical) wave function psi_t by adaptive quadrature.

    W = (1/2pi) int dy psi*(x + y/2) psi(x - y/2) e^{ipy}, evaluated for all
    broadcast (x, p) pairs at once.  With ``return_imag`` the imaginary residue
    of the transform is returned as well.
    """
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    shape = x.shape
    xf, pf = x.ravel(), p.ravel()
    a_abs = abs(state.sigma ** 2 + 0.5j * t)
    width = a_abs / state.sigma
    centres = [k * t for _, k in state.components]
    reach = max(abs(c) for c in centres) + 10.0 * width
    ymax = 2.0 * (np.max(np.abs(xf)) + reach)

    def integrand(y):
        yy = y[:, None]
        left = psi_and_derivative(state, xf[None, :] + 0.5 * yy, t)[0]
        right = psi_and_derivative(state, xf[None, :] - 0.5 * yy, t)[0]
        return np.conj(left) * right * np.exp(1j * pf[None, :] * yy) / (2.0 * math.pi)

    res = numerics.integrate_1d(integrand, -ymax, ymax, abs_tol, max_panels=20000)
    val = np.asarray(res.value)
    re = val.real.reshape(shape)
    if return_imag:
        return re, val.imag.reshape(shape)
    return re


@dataclass(frozen=True)
class Sector:
    """Phase-space wedge swept across x = 0 during (t1, t2) (rescaled times)."""
    t1: float
    t2: float

    def __post_init__(self):
        if not self.t1 < self.t2:
            raise ValueError(f"sector needs t1 < t2, got ({self.t1}, {self.t2})")

    @property
    def angles(self) -> tuple[float, float]:
        return math.pi / 2 + math.atan(self.t1), math.pi / 2 + math.atan(self.t2)

    def x_bounds(self, p: float) -> tuple[float, float]:
        return -p * self.t2, -p * self.t1


def _sector_integrand(wig: CatWigner, sector: Sector, which: int):
    def f(ps):
        out = np.empty(len(ps))
        for i, p in enumerate(ps):
            x1, x2 = sector.x_bounds(p)
            pos, neg = wig.slice_parts(p, x1, x2)
            out[i] = (pos, neg, pos - neg)[which]
        return out
    return f


def _sector_breaks(wig: CatWigner) -> list[float]:
    return [p for p in wig.negative_support() if p > 0]


def sector_split_volumes(rescaled: RescaledParams, sector: Sector, kappa: float = 0.0,
                         abs_tol: float = 1e-11) -> tuple[float, float]:
    """(V_plus, V_minus): positive and negative Wigner volume inside the wedge (p >= 0)."""
    wig = CatWigner(rescaled, kappa)
    hi = wig.p_range()[1]
    breaks = _sector_breaks(wig)
    vp = numerics.integrate_1d(_sector_integrand(wig, sector, 0), 0.0, hi, abs_tol,
                               breakpoints=breaks).value
    vm = numerics.integrate_1d(_sector_integrand(wig, sector, 1), 0.0, hi, abs_tol,
                               breakpoints=breaks).value
    return float(vp), float(vm)


def sector_flux(rescaled: RescaledParams, sector: Sector, kappa: float = 0.0,
                abs_tol: float = 1e-11) -> float:
    """Wigner volume of the wedge, equal to P(t2) - P(t1) up to the p < 0 tail."""
    wig = CatWigner(rescaled, kappa)
    hi = wig.p_range()[1]
    res = numerics.integrate_1d(_sector_integrand(wig, sector, 2), 0.0, hi, abs_tol,
                                breakpoints=_sector_breaks(wig))
    return float(res.value)


def negativity_delta(rescaled: RescaledParams, kappa: float = 0.0,
                     abs_tol: float = 1e-11) -> float:
    """Volume of the negative part of the (smoothed) Wigner function.

    Each momentum slice is integrated exactly in x over the intervals where
    the fringes dip below zero; the remaining p-integral is adaptive, with
    breakpoints at the edges of the negative region.
    """
    wig = CatWigner(rescaled, kappa)
    if rescaled.alpha == 0.0 or rescaled.delta_t == 0.0:
        return 0.0
    support = wig.negative_support()
    if not support:
        return 0.0
    lo, hi = support[0], support[-1]
    if not lo < hi:
        return 0.0

    def f(ps):
        return np.array([wig.slice_parts(p)[1] for p in ps])

    res = numerics.integrate_1d(f, lo, hi, abs_tol, breakpoints=support[1:-1])
    return max(float(res.value), 0.0)


@dataclass(frozen=True)
class GridSpec:
    nx: int = 256
    np: int = 256
    x_range: tuple[float, float] | None = None
    p_range: tuple[float, float] | None = None


def default_ranges(rescaled: RescaledParams) -> tuple[tuple[float, float], tuple[float, float]]:
    d = rescaled.delta_t
    L = 8.0 + (4.0 * math.pi / d if d > 0 else 0.0)
    return (-L, L), (rescaled.p0_t - 6.0, rescaled.p0_t + d + 6.0)


@dataclass(frozen=True)
class PhaseSpaceGrid:
    x_range: tuple[float, float]
    p_range: tuple[float, float]
    values: np.ndarray = field(repr=False)
    s: float = 0.0

    def __post_init__(self):
        nx, np_ = self.values.shape
        if nx < 8 or np_ < 8:
            raise ValueError("grid needs at least 8 points per axis")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def np(self) -> int:
        return self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        return np.linspace(*self.x_range, self.nx)

    @property
    def p(self) -> np.ndarray:
        return np.linspace(*self.p_range, self.np)

    def to_csv(self, path) -> None:
        X, P = np.meshgrid(self.x, self.p, indexing="ij")
        with open(path, "w") as fh:
            fh.write("x_tilde,p_tilde,w\n")
            for xv, pv, wv in zip(X.ravel().tolist(), P.ravel().tolist(), self.values.ravel().tolist()):
                fh.write(f"{xv!r},{pv!r},{wv!r}\n")

    def to_binary(self, path) -> None:
        """Header block (magic, nx, np as uint32 LE, 16 reserved bytes), 4 float64 bounds, data."""
        header = GRID_MAGIC + struct.pack("<II", self.nx, self.np) + bytes(16)
        bounds = struct.pack("<4d", *self.x_range, *self.p_range)
        Path(path).write_bytes(header + bounds + self.values.astype("<f8").tobytes(order="C"))

    @classmethod
    def from_binary(cls, path, s: float = 0.0) -> "PhaseSpaceGrid":
        raw = Path(path).read_bytes()
        if raw[:8] != GRID_MAGIC:
            raise ValueError("not a WGRID001 file")
        nx, np_ = struct.unpack("<II", raw[8:16])
        x0, x1, p0, p1 = struct.unpack("<4d", raw[32:64])
        vals = np.frombuffer(raw[64:], dtype="<f8").reshape(nx, np_).astype(float)
        return cls((x0, x1), (p0, p1), vals, s)


def sample_grid(rescaled: RescaledParams, spec: GridSpec = GridSpec(), kappa: float = 0.0,
                t: float = 0.0) -> PhaseSpaceGrid:
    xr, pr = default_ranges(rescaled)
    xr = spec.x_range or xr
    pr = spec.p_range or pr
    X, P = np.meshgrid(np.linspace(*xr, spec.nx), np.linspace(*pr, spec.np), indexing="ij")
    vals = CatWigner(rescaled, kappa).at_time(X, P, t)
    return PhaseSpaceGrid(tuple(xr), tuple(pr), vals, -kappa)


def negativity_delta_grid(rescaled: RescaledParams, kappa: float = 0.0, start: int = 256,
                          tol: float = 1e-6, max_n: int = 4096) -> float:
    """Brute-force midpoint-rule negativity, doubled until two refinements agree to ``tol``."""
    wig = CatWigner(rescaled, kappa)
    (xl, xh), _ = default_ranges(rescaled)
    xl = min(xl, -wig.x_cutoff())
    xh = max(xh, wig.x_cutoff())
    pl, ph = wig.p_range()
    prev = None
    n = start
    while n <= max_n:
        hx = (xh - xl) / n
        hp = (ph - pl) / n
        xs = xl + hx * (np.arange(n) + 0.5)
        ps = pl + hp * (np.arange(n) + 0.5)
        total = 0.0
        for chunk in np.array_split(np.arange(n), max(1, n // 256)):
            w = wig(xs[chunk][:, None], ps[None, :])
            total += np.sum(np.maximum(-w, 0.0))
        cur = total * hx * hp
        if prev is not None and abs(cur - prev) < tol:
            return cur
        prev = cur
        n *= 2
    raise NonConvergence(f"grid negativity did not settle to {tol} by n = {max_n}")
