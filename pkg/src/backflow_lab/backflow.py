"""Backflow functional beta, its achieving interval, and (alpha, delta_t) parameter scans."""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import numerics
from .dynamics import current_j, flux_by_quadrature, probability_P, sample_step, settle_window
from .errors import BackflowLabError, WindowTooSmall
from .numerics import Bracket
from .phase_space import negativity_delta
from .states import CatState, RescaledParams

TAIL_THRESHOLD = 1e-6
C_BM = 0.04
SCAN_AXES = ("alpha", "delta_t", "p0_t", "theta")


@dataclass(frozen=True)
class BackflowResult:
    beta: float
    t1: float
    t2: float
    peak_index: int
    tail_limited: bool

    def as_dict(self) -> dict:
        return asdict(self)


def _refine_extremum(jfun, ts, i, rising_first: bool) -> float:
    """Locate the zero of j next to sample ``i`` (a sampled extremum of P)."""
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
    jl, jh = float(jfun(lo)), float(jfun(hi))
    ok = (jl >= 0 >= jh) if rising_first else (jl <= 0 <= jh)
    if not ok or lo == hi:
        return float(ts[i])
    try:
        return numerics.refine_root(lambda t: float(jfun(t)), Bracket(lo, hi), 1e-13)
    except BackflowLabError:
        return float(ts[i])


def _largest_drop(P: np.ndarray) -> tuple[int, int, float]:
    runmax = np.maximum.accumulate(P)
    drop = P - runmax
    i2 = int(np.argmin(drop))
    i1 = int(np.argmax(P[: i2 + 1]))
    return i1, i2, float(-drop[i2])


def _lobe_index(jfun, ts, t2: float) -> int:
    # number of completed negative lobes before the one ending at t2
    js = np.asarray(jfun(ts))
    masked = np.where(np.abs(js) < TAIL_THRESHOLD * 1e-2, 0.0, js)
    brackets = numerics.brackets_from_samples(ts, masked)
    downs = [b for b in brackets if float(jfun(b.lo)) > 0 and b.hi <= t2 + 1e-12]
    return max(len(downs) - 1, 0)


def beta_from_current(jfun: Callable, window: tuple[float, float], step: float,
                      Pfun: Callable | None = None, expand: bool = True) -> BackflowResult:
    """inf_{t1<t2} [P(t2) - P(t1)] on a window, refined at zeros of j.

    P is sampled on a grid of spacing ``step`` (from ``Pfun`` or by running
    Gauss-Legendre integration of ``jfun``), the largest drop below the running
    maximum is located, and both endpoints are moved to the adjacent zeros of
    j.  If the optimum touches the window edge the window is doubled once.
    """
    lo, hi = window
    n = int(math.ceil((hi - lo) / step)) + 1
    ts = np.linspace(lo, hi, n)
    P = np.asarray(Pfun(ts)) if Pfun is not None else numerics.cumulative_integral(jfun, ts)
    i1, i2, drop = _largest_drop(P)
    if drop <= 0.0:
        return BackflowResult(0.0, float(ts[i2]), float(ts[i2]), 0, True)
    if i1 == 0 or i2 == n - 1:
        if drop > TAIL_THRESHOLD and expand:
            width = hi - lo
            return beta_from_current(jfun, (lo - width / 2, hi + width / 2), step, Pfun, False)
        if drop > TAIL_THRESHOLD:
            raise WindowTooSmall(f"optimal interval touches window {window}")
    t1 = _refine_extremum(jfun, ts, i1, rising_first=True)
    t2 = _refine_extremum(jfun, ts, i2, rising_first=False)
    if Pfun is not None:
        flux = float(Pfun(t2) - Pfun(t1))
    else:
        flux = flux_by_quadrature(jfun, t1, t2)
    beta = max(-flux, 0.0)
    return BackflowResult(beta, t1, t2, _lobe_index(jfun, ts, t2), beta <= TAIL_THRESHOLD)


def compute_beta(state: CatState | RescaledParams,
                 window: tuple[float, float] | None = None) -> BackflowResult:
    """Backflow of a cat state; times in the result are rescaled."""
    if isinstance(state, RescaledParams):
        state = CatState.from_params(state)
    r = state.rescaled
    jfun = lambda t: current_j(state, t)
    Pfun = lambda t: probability_P(state, t)
    if window is None:
        window = settle_window(jfun, r.delta_t, r.p0_t)
    return beta_from_current(jfun, window, sample_step(r.delta_t, r.p0_t), Pfun)


def backflow_threshold_alpha(delta_t: float, p0_t: float) -> float:
    """Largest alpha with j(0) <= 0 at theta = pi: alpha = 1 + delta_t / p0_t."""
    if not p0_t > 0:
        raise ValueError("p0_t must be positive")
    return 1.0 + delta_t / p0_t


@dataclass
class ScanRow:
    alpha: float
    delta_t: float
    p0_t: float
    theta: float
    beta: float = math.nan
    delta_neg: float = math.nan
    tail_limited: bool = False
    flags: str = ""
    t1: float = math.nan
    t2: float = math.nan


@dataclass
class ScanTable:
    axes: dict[str, list[float]]
    rows: list[ScanRow] = field(default_factory=list)

    HEADER = ("alpha", "delta_t", "p0_t", "theta", "beta", "delta_neg", "tail_limited", "flags")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            for r in self.rows:
                nums = (r.alpha, r.delta_t, r.p0_t, r.theta, r.beta, r.delta_neg)
                w.writerow([repr(float(v)) for v in nums] + [str(r.tail_limited).lower(), r.flags])

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for r in self.rows:
                fh.write(json.dumps({k: getattr(r, k) for k in self.HEADER}) + "\n")


def _axis_values(axes: dict) -> list[list[float]]:
    out = []
    for name in SCAN_AXES:
        if name not in axes:
            raise ValueError(f"missing scan axis {name!r}")
        v = axes[name]
        out.append([float(x) for x in (v if isinstance(v, (list, tuple, np.ndarray)) else [v])])
    return out


def _scan_row(args) -> ScanRow:
    (alpha, delta_t, p0_t, theta), with_delta = args
    row = ScanRow(alpha, delta_t, p0_t, theta)
    flags = []
    try:
        r = RescaledParams(p0_t, delta_t, alpha, theta)
        res = compute_beta(r)
        row.beta, row.tail_limited, row.t1, row.t2 = res.beta, res.tail_limited, res.t1, res.t2
        if with_delta:
            row.delta_neg = negativity_delta(r)
    except (BackflowLabError, ValueError) as exc:
        flags.append(type(exc).__name__)
    row.flags = ";".join(flags)
    return row


def scan_beta_delta(axes: dict, with_delta: bool = True, threads: int = 1) -> ScanTable:
    """beta (and negativity) over the row-major product of the axes.

    ``axes`` maps each of alpha, delta_t, p0_t, theta to a value or a list of
    values.  Failing rows are flagged rather than aborting the scan.
    """
    values = _axis_values(axes)
    table = ScanTable({n: v for n, v in zip(SCAN_AXES, values)})
    jobs = [(combo, with_delta) for combo in itertools.product(*values)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            table.rows = list(pool.map(_scan_row, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        table.rows = [_scan_row(j) for j in jobs]
    return table


def maximize_beta(p0_t: float = 3.0, theta: float = math.pi, start=(1.9, 11.0),
                  steps=(0.2, 1.0), min_step: float = 1e-3) -> tuple[float, float, float]:
    """Local pattern search for the (alpha, delta_t) maximizing beta.

    Returns (alpha, delta_t, beta).  The stencil is 3x3 around the incumbent;
    both steps halve whenever the centre wins.
    """
    cache: dict[tuple[float, float], float] = {}

    def beta_at(a, d):
        key = (round(a, 12), round(d, 12))
        if key not in cache:
            cache[key] = compute_beta(RescaledParams(p0_t, d, a, theta)).beta
        return cache[key]

    a, d = start
    sa, sd = steps
    best = beta_at(a, d)
    while sa > min_step:
        cand = max(((beta_at(a + i * sa, d + j * sd), a + i * sa, d + j * sd)
                    for i in (-1, 0, 1) for j in (-1, 0, 1)), key=lambda c: c[0])
        if cand[0] > best:
            best, a, d = cand
        else:
            sa *= 0.5
            sd *= 0.5
    return a, d, best
