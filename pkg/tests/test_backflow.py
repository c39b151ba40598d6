import json
import math

import numpy as np
import pytest

from backflow_lab.backflow import (C_BM, BackflowResult, ScanTable, backflow_threshold_alpha,
                                   beta_from_current, compute_beta, maximize_beta, scan_beta_delta)
from backflow_lab.dynamics import current_j, flux_F
from backflow_lab.errors import WindowTooSmall
from backflow_lab.phase_space import negativity_delta
from backflow_lab.states import CatState, RescaledParams

from conftest import MAX_BACKFLOW

BETA_PAPER = 0.0063


def test_max_backflow_state():
    res = compute_beta(MAX_BACKFLOW)
    assert isinstance(res, BackflowResult)
    assert abs(res.beta - BETA_PAPER) <= 0.05 * BETA_PAPER
    assert not res.tail_limited
    assert res.t1 < 0 < res.t2


def test_single_gaussian_has_no_backflow():
    res = compute_beta(RescaledParams(3.0, 11.0, 0.0, 0.0))
    assert res.beta <= 1e-6 and res.tail_limited


def test_beyond_threshold():
    a = backflow_threshold_alpha(11.0, 3.0) + 0.2
    assert compute_beta(RescaledParams(3.0, 11.0, a, math.pi)).beta <= 1e-6


def test_threshold_formula():
    assert backflow_threshold_alpha(11.0, 3.0) == pytest.approx(14 / 3)
    assert backflow_threshold_alpha(0.0, 3.0) == 1.0
    with pytest.raises(ValueError):
        backflow_threshold_alpha(1.0, 0.0)
    a = backflow_threshold_alpha(11.0, 3.0)
    below = current_j(CatState.from_rescaled(1.0, 3.0, 11.0, a - 0.05, math.pi), 0.0)
    above = current_j(CatState.from_rescaled(1.0, 3.0, 11.0, a + 0.05, math.pi), 0.0)
    assert below < 0 < above


def test_achieving_interval_consistency():
    for r in (MAX_BACKFLOW, RescaledParams(3.0, 11.0, 2.0, math.pi / 4), RescaledParams(2.0, 8.0, 2.5, 2.0)):
        state = CatState.from_params(r)
        res = compute_beta(state)
        assert not res.tail_limited
        assert abs(flux_F(state, res.t1, res.t2).flux + res.beta) < 1e-8
        assert abs(current_j(state, res.t1)) < 1e-6 and abs(current_j(state, res.t2)) < 1e-6


def test_sigma_invariance():
    a = compute_beta(CatState.from_params(MAX_BACKFLOW, 1.0))
    b = compute_beta(CatState.from_params(MAX_BACKFLOW, 20.0))
    assert abs(a.beta - b.beta) <= 1e-8
    assert abs(a.t1 - b.t1) < 1e-9


def test_sudden_death_with_negativity():
    for d in (5.0, 11.0, 20.0):
        r = RescaledParams(3.0, d, backflow_threshold_alpha(d, 3.0) + 0.1, math.pi)
        assert compute_beta(r).beta <= 1e-6
        assert negativity_delta(r) >= 0.01


def test_global_inf_beats_central_lobe_near_alpha_one():
    # away from the optimum the deepest dip need not be the central one
    r = RescaledParams(3.0, 11.0, 1.05, math.pi)
    res = compute_beta(r)
    state = CatState.from_params(r)
    # brute force on a fine grid of P
    from backflow_lab.dynamics import probability_P
    ts = np.linspace(-4, 4, 400001)
    P = probability_P(state, ts)
    brute = float(np.max(np.maximum.accumulate(P) - P))
    assert res.beta >= brute - 1e-10
    assert res.beta - brute < 1e-6


def test_window_too_small_raises():
    # a linear ramp down always touches the window edge
    with pytest.raises(WindowTooSmall):
        beta_from_current(lambda t: -np.ones_like(np.asarray(t, dtype=float)), (0.0, 1.0), 0.01)


def test_scan_table(tmp_path):
    axes = {"alpha": [1.8, 2.0], "delta_t": [10.0, 11.0, 12.0], "p0_t": 3.0, "theta": math.pi}
    t = scan_beta_delta(axes)
    assert len(t.rows) == 6
    assert [(r.alpha, r.delta_t) for r in t.rows] == [(a, d) for a in (1.8, 2.0) for d in (10.0, 11.0, 12.0)]
    assert all(0 <= r.beta <= r.delta_neg for r in t.rows)
    t.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == ",".join(ScanTable.HEADER) and len(lines) == 7
    t.to_jsonl(tmp_path / "s.jsonl")
    assert json.loads((tmp_path / "s.jsonl").read_text().splitlines()[0])["alpha"] == 1.8


def test_scan_parallel_is_identical():
    axes = {"alpha": [1.5, 2.2, 3.0], "delta_t": [6.0, 14.0], "p0_t": 3.0, "theta": math.pi}
    a = scan_beta_delta(axes, with_delta=False)
    b = scan_beta_delta(axes, with_delta=False, threads=3)
    assert [r.beta for r in a.rows] == [r.beta for r in b.rows]


def test_scan_flags_bad_rows():
    t = scan_beta_delta({"alpha": [1.0], "delta_t": [0.0], "p0_t": 3.0, "theta": math.pi})
    assert t.rows[0].flags == "DegenerateState"
    with pytest.raises(ValueError):
        scan_beta_delta({"alpha": [1.0]})


def test_beta_decreases_with_p0():
    for a, d in ((2, 11), (3, 15), (1.8, 5), (2.5, 8)):
        t = scan_beta_delta({"alpha": a, "delta_t": d, "p0_t": list(np.linspace(1, 6, 11)), "theta": math.pi},
                            with_delta=False)
        b = t.column("beta")
        assert np.all(np.diff(b) < 0)


def test_parametric_curve_not_monotonic():
    t = scan_beta_delta({"alpha": list(np.linspace(1.5, 10, 35)), "delta_t": 11.0, "p0_t": 3.0,
                         "theta": math.pi})
    b, d = t.column("beta"), t.column("delta_neg")
    slope = np.sign(np.diff(b)) * np.sign(np.diff(d))
    assert np.any(slope > 0) and np.any(slope < 0)
    assert np.any((d > 0.01) & (b <= 1e-6))
    assert np.all(b < C_BM + 1e-3)


def test_maximize_beta():
    a, d, b = maximize_beta()
    assert 0.0060 <= b <= 0.0066
    assert abs(a - 1.9) < 0.3 and abs(d - 11) < 2
