"""Resolution-limited current eta: the current J(x, t) smeared by a band-pass kernel.

    delta_{p1,p2}(x) = (sin(p1 x) - sin(p2 x)) / (pi x),   eta(t) = int dx delta(x) J(x, t)

All quantities are in rescaled units (x_t, t_t, p_t); J_t = sigma^2 J.
The kernel's Fourier transform is the indicator of p1 < |k| < p2 (up to sign),
so eta is evaluated from the Fourier transform of J, which is closed form for
cat states.  The direct x-quadrature is kept as a cross-check.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from . import numerics
from .dynamics import settle_window
from .errors import BackflowLabError, NonConvergence
from .phase_space import negativity_delta
from .states import CatState, RescaledParams, check_denominator, psi_and_derivative

ETA_TOL = 1e-12


@dataclass(frozen=True)
class EtaParams:
    p1: float
    p2: float
    # flip=True uses sin(p2 x) - sin(p1 x), the order suggested by the band restriction
    flip: bool = False

    def __post_init__(self):
        if not (self.p1 > 0 and self.p2 > 0):
            raise ValueError("p1 and p2 must be positive")

    @property
    def sign(self) -> float:
        return -1.0 if self.flip else 1.0


def delta_kernel(x, params: EtaParams):
    """(sin(p1 x) - sin(p2 x)) / (pi x), with its x -> 0 limit (p1 - p2)/pi."""
    x = np.asarray(x, dtype=float)
    # np.sinc(u) = sin(pi u)/(pi u)
    out = (params.p1 * np.sinc(params.p1 * x / math.pi)
           - params.p2 * np.sinc(params.p2 * x / math.pi)) / math.pi
    out = params.sign * out
    return float(out) if out.ndim == 0 else out


def current_density_J(state: CatState, x_tilde, t_tilde):
    """Rescaled current sigma^2 Im(psi* dpsi/dx) at x = sigma x_t, t = sigma^2 t_t."""
    s = state.sigma
    psi, dpsi = psi_and_derivative(state, s * np.asarray(x_tilde, dtype=float),
                                   s * s * np.asarray(t_tilde, dtype=float))
    out = s * s * np.imag(np.conj(psi) * dpsi) / state.mass
    return float(out) if np.ndim(out) == 0 else out


def current_fourier(rescaled: RescaledParams, k, t):
    """int dx e^{-ikx} J(x, t) in rescaled units; k and t broadcast."""
    r = rescaled
    d = check_denominator(r.alpha, r.delta_t, r.theta)
    k = np.asarray(k, dtype=float)
    t = np.asarray(t, dtype=float)
    lo, hi, mid = r.p0_t, r.p0_t + r.delta_t, r.p0_t + 0.5 * r.delta_t
    kt = k * t

    def moment(c):
        # int dp p e^{-ikpt} e^{-2(p-c)^2}, without the common sqrt(pi/2) e^{-k^2 t^2/8}
        return (c - 0.25j * kt) * np.exp(-1j * kt * c)

    peaks = np.exp(-0.5 * k ** 2) * (r.alpha ** 2 * moment(lo) + moment(hi))
    fringe = r.alpha * (np.exp(-1j * r.theta - 0.5 * (k - r.delta_t) ** 2)
                        + np.exp(1j * r.theta - 0.5 * (k + r.delta_t) ** 2)) * moment(mid)
    return (peaks + fringe) * np.exp(-0.125 * kt ** 2) / d


def _band(params: EtaParams):
    lo, hi = sorted((params.p1, params.p2))
    # eta = -(1/pi) int_{p1}^{p2} Re Jhat dk; the orientation sign handles p1 > p2
    orient = 1.0 if params.p1 <= params.p2 else -1.0
    return lo, hi, orient * params.sign


def eta(state: CatState | RescaledParams, t_tilde, params: EtaParams,
        route: str = "fourier", abs_tol: float = ETA_TOL, return_imag: bool = False):
    """eta_{p1,p2} at rescaled times (vectorized for the Fourier route).

    ``fourier``: -(1/pi) int_{p1}^{p2} Re Jhat(k, t) dk with Jhat closed form;
    ``quadrature``: direct int dx delta(x) J(x, t), truncated where the Gaussian
    envelope of J is below 1e-12 of its peak plus one kernel period.
    With ``return_imag`` the Fourier route also returns the imaginary residue
    of the full two-sided k-integral, which vanishes for real J.
    """
    if isinstance(state, CatState):
        rescaled, phys = state.rescaled, state
    else:
        rescaled, phys = state, CatState.from_params(state)
    tt = np.asarray(t_tilde, dtype=float)
    if params.p1 == params.p2:
        zero = np.zeros(tt.shape)
        out = float(zero) if tt.ndim == 0 else zero
        return (out, out) if return_imag else out
    lo, hi, sgn = _band(params)
    if route == "fourier":
        flat = np.atleast_1d(tt).ravel()
        res = numerics.integrate_1d(
            lambda k: current_fourier(rescaled, k[:, None], flat[None, :]), lo, hi, abs_tol)
        val = np.asarray(res.value)
        out = -sgn * val.real / math.pi
        if return_imag:
            # Jhat(k) + Jhat(-k) is 2 Re Jhat for a real current
            resm = numerics.integrate_1d(
                lambda k: current_fourier(rescaled, -k[:, None], flat[None, :]), lo, hi, abs_tol)
            imag = (val + np.asarray(resm.value)).imag / (2.0 * math.pi)
            imag = imag.reshape(tt.shape)
        out = out.reshape(tt.shape)
        out = float(out) if tt.ndim == 0 else out
        if return_imag:
            return out, (float(imag) if tt.ndim == 0 else imag)
        return out
    if route == "quadrature":
        out = np.vectorize(lambda t: _eta_quadrature(phys, rescaled, t, params, abs_tol),
                           otypes=[float])(tt)
        out = float(out) if tt.ndim == 0 else out
        return (out, 0.0 * out) if return_imag else out
    raise ValueError(f"unknown route {route!r}")


def _eta_quadrature(state: CatState, r: RescaledParams, t: float, params: EtaParams,
                    abs_tol: float) -> float:
    # packet centres move as p t; width grows as sqrt(1 + t^2/4)
    width = math.sqrt(1.0 + 0.25 * t * t)
    centres = [r.p0_t * t, (r.p0_t + r.delta_t) * t]
    reach = width * math.sqrt(2.0 * math.log(1e12)) + 2.0 * math.pi / min(params.p1, params.p2)
    a, b = min(centres) - reach, max(centres) + reach
    a, b = min(a, -reach), max(b, reach)
    f = lambda x: delta_kernel(x, params) * current_density_J(state, x, t)
    n = int(math.ceil((b - a) * max(params.p1, params.p2) / math.pi)) + 1
    res = numerics.integrate_1d(f, a, b, abs_tol, max_panels=20000,
                                breakpoints=np.linspace(a, b, n + 1)[1:-1])
    return float(res.value)


@dataclass
class EtaFlux:
    negative_flux: float
    window: tuple[float, float]
    intervals: list[tuple[float, float]] = field(default_factory=list)


def eta_step(rescaled: RescaledParams, params: EtaParams, per_period: int = 32) -> float:
    freq = max(params.p1, params.p2) * (rescaled.p0_t + rescaled.delta_t) + 1.0
    return 2.0 * math.pi / (freq * per_period)


def eta_window(rescaled: RescaledParams, params: EtaParams) -> tuple[float, float]:
    return settle_window(lambda t: eta(rescaled, t, params), rescaled.delta_t, rescaled.p0_t)


def eta_negative_flux(state: CatState | RescaledParams, params: EtaParams,
                      window: tuple[float, float] | None = None) -> EtaFlux:
    """int over the window of max(-eta, 0) dt, split exactly at the zeros of eta."""
    rescaled = state.rescaled if isinstance(state, CatState) else state
    if window is None:
        window = eta_window(rescaled, params)
    a, b = window
    if not a < b:
        raise ValueError("window must have a < b")
    f = lambda t: eta(rescaled, t, params)
    n = int(math.ceil((b - a) / eta_step(rescaled, params))) + 1
    ts = np.linspace(a, b, n)
    vals = np.asarray(f(ts))
    if not np.all(np.isfinite(vals)):
        raise NonConvergence("eta produced non-finite samples")
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    masked = np.where(np.abs(vals) < 1e-14 * scale, 0.0, vals)
    roots = []
    for br in numerics.brackets_from_samples(ts, masked):
        try:
            roots.append(numerics.refine_root(lambda t: float(f(t)), br, 1e-13))
        except BackflowLabError:
            roots.append(br.mid)
    edges = [a] + roots + [b]
    total = 0.0
    intervals = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if not hi > lo:
            continue
        if float(f(0.5 * (lo + hi))) < 0.0:
            total += -numerics.integrate_1d(f, lo, hi, 1e-13).value
            intervals.append((lo, hi))
    return EtaFlux(max(float(total), 0.0), (a, b), intervals)


@dataclass
class EtaRow:
    delta_t: float
    alpha: float
    delta_neg: float = math.nan
    eta_neg_flux: float = math.nan
    flags: str = ""


@dataclass
class EtaScan:
    params: EtaParams
    rows: list[EtaRow] = field(default_factory=list)

    HEADER = ("delta_t", "alpha", "delta_neg", "eta_neg_flux")

    def curve(self, delta_t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        sel = [r for r in self.rows if r.delta_t == delta_t]
        return (np.array([r.alpha for r in sel]), np.array([r.delta_neg for r in sel]),
                np.array([r.eta_neg_flux for r in sel]))

    def spearman(self, delta_t: float) -> float:
        _, dn, fl = self.curve(delta_t)
        ok = np.isfinite(dn) & np.isfinite(fl)
        return float(spearmanr(dn[ok], fl[ok]).statistic)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            for r in self.rows:
                nums = (r.delta_t, r.alpha, r.delta_neg, r.eta_neg_flux)
                w.writerow([repr(float(v)) for v in nums])


def _eta_row(args) -> EtaRow:
    d, a, params, p0_t, theta = args
    row = EtaRow(d, a)
    try:
        r = RescaledParams(p0_t, d, a, theta)
        row.delta_neg = negativity_delta(r)
        row.eta_neg_flux = eta_negative_flux(r, params).negative_flux
    except (BackflowLabError, ValueError) as exc:
        row.flags = type(exc).__name__
    return row


def eta_vs_delta_scan(delta_t_values=(9.5, 10.0, 10.5), alphas=None,
                      params: EtaParams = EtaParams(7.0, 9.0), p0_t: float = 3.0,
                      theta: float = math.pi, threads: int = 1) -> EtaScan:
    """Negative eta flux and Wigner negativity along alpha, one curve per delta_t.

    Rows are ordered by delta_t then alpha whatever the thread count.
    """
    if alphas is None:
        alphas = np.linspace(0.01, 5.0, 25)
    jobs = [(float(d), float(a), params, p0_t, theta) for d in delta_t_values for a in alphas]
    scan = EtaScan(params)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            scan.rows = list(pool.map(_eta_row, jobs))
    else:
        scan.rows = [_eta_row(j) for j in jobs]
    return scan


__all__ = [
    "EtaParams", "delta_kernel", "current_density_J", "current_fourier", "eta",
    "eta_negative_flux", "eta_vs_delta_scan", "EtaFlux", "EtaRow", "EtaScan",
]
