"""Command-line front end: ``backflow-lab <command> --config FILE``.

Each command reads a JSON config and writes its CSV/JSON/SVG files into the
output directory.  Exit codes: 0 success, 2 bad config, 3 numerical failure;
errors go to stderr as one JSON line.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import svg
from .backflow import ScanTable, compute_beta, scan_beta_delta
from .dynamics import current_j, default_window, flux_F, probability_P
from .errors import BackflowLabError, ConfigError
from .eta import EtaParams, eta_vs_delta_scan
from .phase_space import GridSpec, negativity_delta, sample_grid
from .smoothing import SmoothingSpec, negative_current_depth, s_backflow
from .states import CatState, RescaledParams

COMMANDS = ("trace", "backflow", "scan", "smooth", "eta", "wigner")
FORMATS = ("csv", "json", "svg")

COMMON_KEYS = {"command", "description", "out", "formats", "threads"}
ALLOWED_KEYS = {
    "trace": {"state", "states", "window", "n_samples"},
    "backflow": {"state", "window", "with_delta"},
    "scan": {"series", "axes", "p0_t", "theta", "with_delta", "plot"},
    "smooth": {"states", "state", "s", "depth", "tol_s", "ordering", "depth_scan"},
    "eta": {"p1", "p2", "flip", "delta_t_values", "alpha", "p0_t", "theta"},
    "wigner": {"state", "grid", "s", "t", "wedge"},
}
STATE_KEYS = {"sigma", "p0_t", "delta_t", "alpha", "theta", "label"}
_PI_RE = re.compile(r"^\s*([0-9.]*)\s*\*?\s*pi\s*(?:/\s*([0-9.]+))?\s*$")


@dataclass
class RunConfig:
    command: str
    options: dict
    out: Path = Path("out")
    formats: tuple[str, ...] = FORMATS
    threads: int = 1
    written: list[str] = field(default_factory=list)

    def wants(self, fmt: str) -> bool:
        return fmt in self.formats

    def path(self, name: str) -> Path:
        p = self.out / name
        self.written.append(str(p))
        return p


# ---------------------------------------------------------------- config parsing

def parse_angle(v) -> float:
    """Number, or a string like "pi", "pi/4", "3pi/4"."""
    if isinstance(v, bool):
        raise ConfigError(f"bad angle {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        m = _PI_RE.match(v)
        if m:
            num = float(m.group(1)) if m.group(1) else 1.0
            den = float(m.group(2)) if m.group(2) else 1.0
            return num * math.pi / den
    raise ConfigError(f"bad angle {v!r}")


def _number(v, name: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name} must be a finite number, got {v!r}")
    return float(v)


def parse_state(d) -> tuple[CatState, str]:
    if not isinstance(d, dict):
        raise ConfigError("state must be an object")
    unknown = set(d) - STATE_KEYS
    if unknown:
        raise ConfigError(f"unknown state keys: {sorted(unknown)}")
    missing = {"p0_t", "delta_t", "alpha", "theta"} - set(d)
    if missing:
        raise ConfigError(f"missing state keys: {sorted(missing)}")
    try:
        st = CatState.from_rescaled(_number(d.get("sigma", 1.0), "sigma"), _number(d["p0_t"], "p0_t"),
                                    _number(d["delta_t"], "delta_t"), _number(d["alpha"], "alpha"),
                                    parse_angle(d["theta"]))
        st.rescaled.denominator  # validates the superposition
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    label = d.get("label") or f"alpha={d['alpha']}, delta={d['delta_t']}"
    return st, str(label)


def parse_axis(v, name: str) -> list[float]:
    """Scalar, explicit list, or {"range": [lo, hi, n]} (inclusive linspace)."""
    if isinstance(v, dict):
        if set(v) != {"range"} or not isinstance(v["range"], list) or len(v["range"]) != 3:
            raise ConfigError(f"axis {name}: expected {{'range': [lo, hi, n]}}")
        lo, hi, n = v["range"]
        if not isinstance(n, int) or n < 1:
            raise ConfigError(f"axis {name}: sample count must be a positive integer")
        return [float(x) for x in np.linspace(_number(lo, name), _number(hi, name), n)]
    if isinstance(v, list):
        if not v:
            raise ConfigError(f"axis {name} is empty")
        return [parse_angle(x) if name == "theta" else _number(x, name) for x in v]
    return [parse_angle(v) if name == "theta" else _number(v, name)]


def _window(v):
    if v is None:
        return None
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError("window must be [t_lo, t_hi]")
    lo, hi = _number(v[0], "window"), _number(v[1], "window")
    if not lo < hi:
        raise ConfigError("window needs t_lo < t_hi")
    return lo, hi


def load_config(path, command: str, out=None, formats=None, threads=None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if raw.get("command", command) != command:
        raise ConfigError(f"config is for {raw['command']!r}, not {command!r}")
    unknown = set(raw) - COMMON_KEYS - ALLOWED_KEYS[command]
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    fmts = formats if formats is not None else raw.get("formats", list(FORMATS))
    if isinstance(fmts, str):
        fmts = [f.strip() for f in fmts.split(",") if f.strip()]
    if not fmts or any(f not in FORMATS for f in fmts):
        raise ConfigError(f"formats must be a subset of {FORMATS}")
    n = threads if threads is not None else raw.get("threads", 1)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError("threads must be a positive integer")
    opts = {k: v for k, v in raw.items() if k not in COMMON_KEYS}
    return RunConfig(command, opts, Path(out or raw.get("out", "out")), tuple(fmts), n)


# ---------------------------------------------------------------- output helpers

def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_rows(path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")


def _warn(message: str, **extra) -> None:
    print(json.dumps({"warning": message, **extra}), file=sys.stderr)


# ---------------------------------------------------------------- commands

def cmd_trace(cfg: RunConfig) -> dict:
    """P and j on a time grid; with ``states`` one CSV per state and a joint current plot."""
    o = cfg.options
    n = o.get("n_samples", 2001)
    if isinstance(n, bool) or not isinstance(n, int) or n < 16:
        raise ConfigError("n_samples must be an integer >= 16")
    if ("state" in o) == ("states" in o):
        raise ConfigError("trace needs exactly one of 'state' and 'states'")
    many = "states" in o
    raw = o["states"] if many else [o["state"]]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("states must be a non-empty list")
    states = [parse_state(d) for d in raw]
    window = _window(o.get("window")) or default_window(states[0][0])
    ts = np.linspace(window[0], window[1], n)
    traces = []
    for k, (st, label) in enumerate(states):
        P, j = probability_P(st, ts), current_j(st, ts)
        traces.append((label, P, j))
        if cfg.wants("csv"):
            name = f"trace_{k}.csv" if many else "trace.csv"
            _write_rows(cfg.path(name), ("t_tilde", "P", "j_tilde"), zip(ts, P, j))
    if cfg.wants("svg"):
        if many:
            js = np.concatenate([j for _, _, j in traces])
            fig = svg.Plot(window, svg.padded(float(js.min()), float(js.max())),
                           xlabel="t (rescaled)", ylabel="j")
            fig.hline(float(js.min()))
            for k, (label, _, j) in enumerate(traces):
                fig.line(ts, j, svg.PALETTE[k % 6], label=label)
        else:
            label, P, j = traces[0]
            lo = min(float(P.min()), float((10 * j).min()))
            hi = max(float(P.max()), float((10 * j).max()))
            fig = svg.Plot(window, svg.padded(lo, hi), title=label, xlabel="t (rescaled)", ylabel="P, 10 j")
            fig.hline(0.0)
            fig.line(ts, P, svg.PALETTE[0], label="P(t)")
            fig.line(ts, 10 * j, svg.PALETTE[3], dash="6,3", label="10 j(t)")
        fig.save(cfg.path("trace.svg"))
    return {"n_samples": n, "window": list(window), "states": len(states)}


def cmd_backflow(cfg: RunConfig) -> dict:
    st, _ = parse_state(cfg.options.get("state"))
    res = compute_beta(st, _window(cfg.options.get("window")))
    flux = flux_F(st, res.t1, res.t2).flux if res.t2 > res.t1 else 0.0
    out = {"beta": res.beta, "t1": res.t1, "t2": res.t2, "tail_limited": res.tail_limited,
           "peak_index": res.peak_index, "flux": flux}
    if cfg.options.get("with_delta", True):
        d = negativity_delta(st.rescaled)
        out["delta"] = d
        out["beta_le_delta"] = bool(res.beta <= d + 1e-12)
    if cfg.wants("json"):
        _write_json(cfg.path("backflow.json"), out)
    return out


def _scan_series(cfg: RunConfig) -> list[tuple[str, dict]]:
    o = cfg.options
    series = o.get("series")
    if series is None:
        if "axes" not in o:
            raise ConfigError("scan needs 'axes' or 'series'")
        series = [o["axes"]]
    if not isinstance(series, list) or not series:
        raise ConfigError("series must be a non-empty list")
    out = []
    for k, s in enumerate(series):
        if not isinstance(s, dict):
            raise ConfigError("each series must be an object")
        bad = set(s) - {"alpha", "delta_t", "p0_t", "theta", "label"}
        if bad:
            raise ConfigError(f"unknown series keys: {sorted(bad)}")
        axes = {"p0_t": o.get("p0_t", 3.0), "theta": o.get("theta", "pi")}
        axes.update({k2: v for k2, v in s.items() if k2 != "label"})
        for name in ("alpha", "delta_t"):
            if name not in axes:
                raise ConfigError(f"series {k} lacks axis {name!r}")
        parsed = {name: parse_axis(axes[name], name) for name in ("alpha", "delta_t", "p0_t", "theta")}
        if any(p <= 0 for p in parsed["p0_t"]):
            raise ConfigError("p0_t must be positive")
        if any(v < 0 for v in parsed["alpha"] + parsed["delta_t"]):
            raise ConfigError("alpha and delta_t must be non-negative")
        out.append((str(s.get("label", f"series {k}")), parsed))
    return out


def cmd_scan(cfg: RunConfig) -> dict:
    o = cfg.options
    plot = o.get("plot", {"kind": "lines", "x": "alpha", "y": "beta"})
    if not isinstance(plot, dict) or plot.get("kind") not in ("heatmap", "lines", "parametric"):
        raise ConfigError("plot.kind must be heatmap, lines or parametric")
    series = _scan_series(cfg)
    with_delta = bool(o.get("with_delta", True))
    tables = [(label, scan_beta_delta(axes, with_delta, cfg.threads)) for label, axes in series]
    merged = ScanTable(series[0][1], [r for _, t in tables for r in t.rows])
    flagged = [r for r in merged.rows if r.flags]
    for r in flagged:
        _warn("flagged scan row", alpha=r.alpha, delta_t=r.delta_t, flags=r.flags)
    if cfg.wants("csv"):
        merged.to_csv(cfg.path("scan.csv"))
    if cfg.wants("json"):
        merged.to_jsonl(cfg.path("scan.jsonl"))
    if cfg.wants("svg"):
        _scan_svg(plot, tables).save(cfg.path("scan.svg"))
    best = max(merged.rows, key=lambda r: r.beta if math.isfinite(r.beta) else -1.0)
    return {"rows": len(merged.rows), "flagged": len(flagged),
            "max_beta": {"alpha": best.alpha, "delta_t": best.delta_t, "beta": best.beta}}


def _scan_svg(plot: dict, tables) -> svg.Plot:
    kind = plot["kind"]
    if kind == "heatmap":
        table = tables[0][1]
        a, d = table.axes["alpha"], table.axes["delta_t"]
        z = table.column("beta").reshape(len(a), len(d), -1)[:, :, 0]
        fig = svg.Plot(svg.padded(a[0], a[-1], 0.0) if len(a) > 1 else (a[0] - 0.5, a[0] + 0.5),
                       (d[0], d[-1]) if len(d) > 1 else (d[0] - 0.5, d[0] + 0.5),
                       title="backflow", xlabel="alpha", ylabel="delta (rescaled)")
        fig.density(np.nan_to_num(z), fig.xlim, fig.ylim, cmap="sequential")
        return fig
    xname = plot.get("x", "delta_neg" if kind == "parametric" else "alpha")
    yname = plot.get("y", "beta")
    curves = []
    for label, table in tables:
        curves.append((label, table.column(xname), table.column(yname)))
    xs = np.concatenate([c[1] for c in curves])
    ys = np.concatenate([c[2] for c in curves])
    fig = svg.Plot(svg.padded(np.nanmin(xs), np.nanmax(xs)), svg.padded(np.nanmin(ys), np.nanmax(ys)),
                   xlabel=xname, ylabel=yname)
    for k, (label, x, y) in enumerate(curves):
        fig.line(x, y, svg.PALETTE[k % len(svg.PALETTE)], label=label)
    return fig


def _s_values(v) -> list[float]:
    vals = parse_axis(v if v is not None else {"range": [0.0, -1.0, 51]}, "s")
    if any(not -1.0 <= s <= 0.0 for s in vals):
        raise ConfigError("s values must lie in [-1, 0]")
    return vals


def cmd_smooth(cfg: RunConfig) -> dict:
    o = cfg.options
    ordering = o.get("ordering", "convolve_then_evolve")
    if ordering not in ("convolve_then_evolve", "evolve_then_convolve"):
        raise ConfigError(f"unknown ordering {ordering!r}")
    tol_s = _number(o.get("tol_s", 1e-4), "tol_s")
    if not tol_s > 0:
        raise ConfigError("tol_s must be positive")
    summary: dict = {}
    if "depth_scan" in o:
        summary["depth_scan"] = _depth_scan(cfg, o["depth_scan"], tol_s, ordering)
    raw_states = o.get("states", [o["state"]] if "state" in o else [])
    if not raw_states and "depth_scan" not in o:
        raise ConfigError("smooth needs 'state', 'states' or 'depth_scan'")
    states = [parse_state(s) for s in raw_states]
    s_vals = _s_values(o.get("s"))
    curves, depths = [], []
    for k, (st, label) in enumerate(states):
        betas = [s_backflow(st.rescaled, SmoothingSpec(s), ordering=ordering).beta for s in s_vals]
        curves.append((label, betas))
        name = "smooth.csv" if len(states) == 1 else f"smooth_{k}.csv"
        if cfg.wants("csv"):
            _write_rows(cfg.path(name), ("s", "beta_s"), zip(s_vals, betas))
        if o.get("depth", True):
            dr = negative_current_depth(st.rescaled, tol_s, ordering)
            depths.append({"label": label, "s_m": dr.s_m, "flag": dr.flag,
                           "bisection": [list(b) for b in dr.trace]})
    if depths and cfg.wants("json"):
        payload = depths[0] if len(depths) == 1 else depths
        _write_json(cfg.path("depth.json"), payload)
    if curves and cfg.wants("svg"):
        top = max(max(b) for _, b in curves) or 1e-3
        fig = svg.Plot((-1.0, 0.0), (0.0, 1.05 * top), title="s-dependent backflow",
                       xlabel="s", ylabel="beta(s)")
        dashes = ["", "6,3", "2,2 6,2"]
        for k, (label, betas) in enumerate(curves):
            fig.line(s_vals, betas, svg.PALETTE[k % 6], dash=dashes[k % 3], label=label)
        fig.save(cfg.path("smooth.svg"))
    summary["curves"] = [{"label": lab, "beta_at_first_s": b[0]} for lab, b in curves]
    summary["depths"] = [{"label": d["label"], "s_m": d["s_m"], "flag": d["flag"]} for d in depths]
    return summary


def _depth_scan(cfg: RunConfig, spec, tol_s: float, ordering: str) -> dict:
    if not isinstance(spec, dict) or set(spec) - {"base", "vary", "values"}:
        raise ConfigError("depth_scan takes the keys base, vary, values")
    vary = spec.get("vary")
    if vary not in ("alpha", "delta_t"):
        raise ConfigError("depth_scan.vary must be alpha or delta_t")
    base, _ = parse_state(spec.get("base"))
    values = parse_axis(spec.get("values"), vary)
    rows = []
    for v in values:
        r = base.rescaled.with_(**{vary: v})
        beta = compute_beta(r).beta
        rows.append((v, beta, negative_current_depth(r, tol_s, ordering).s_m))
    if cfg.wants("csv"):
        _write_rows(cfg.path("depth_scan.csv"), (vary, "beta", "s_m"), rows)
    if cfg.wants("svg"):
        xs = [r[0] for r in rows]
        fig = svg.Plot(svg.padded(min(xs), max(xs)), (0.0, 1.05 * max(max(r[2] for r in rows), 1e-3)),
                       title="negative current depth and 10 x backflow", xlabel=vary, ylabel="s_m, 10 beta")
        fig.line(xs, [r[2] for r in rows], svg.PALETTE[0], label="s_m")
        fig.line(xs, [10 * r[1] for r in rows], svg.PALETTE[1], dash="6,3", label="10 beta")
        fig.save(cfg.path("depth_scan.svg"))
    return {"rows": len(rows)}


def cmd_eta(cfg: RunConfig) -> dict:
    o = cfg.options
    try:
        params = EtaParams(_number(o.get("p1", 7.0), "p1"), _number(o.get("p2", 9.0), "p2"),
                           bool(o.get("flip", False)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    deltas = parse_axis(o.get("delta_t_values", [9.5, 10.0, 10.5]), "delta_t")
    alphas = parse_axis(o.get("alpha", {"range": [0.01, 5.0, 25]}), "alpha")
    p0_t = _number(o.get("p0_t", 3.0), "p0_t")
    if p0_t <= 0 or any(a < 0 for a in alphas) or any(d < 0 for d in deltas):
        raise ConfigError("need p0_t > 0 and non-negative alpha, delta_t")
    scan = eta_vs_delta_scan(deltas, alphas, params, p0_t, parse_angle(o.get("theta", "pi")),
                             threads=cfg.threads)
    for r in scan.rows:
        if r.flags:
            _warn("flagged eta row", alpha=r.alpha, delta_t=r.delta_t, flags=r.flags)
    if cfg.wants("csv"):
        scan.to_csv(cfg.path("eta.csv"))
    if cfg.wants("svg"):
        dn = np.array([r.delta_neg for r in scan.rows])
        fl = np.array([r.eta_neg_flux for r in scan.rows])
        fig = svg.Plot(svg.padded(np.nanmin(dn), np.nanmax(dn)), svg.padded(np.nanmin(fl), np.nanmax(fl)),
                       title="negative flux of eta vs negativity", xlabel="Delta", ylabel="negative eta flux")
        for k, d in enumerate(deltas):
            _, x, y = scan.curve(d)
            fig.line(x, y, svg.PALETTE[k % 6], label=f"delta={d:g}")
        fig.save(cfg.path("eta.svg"))
    out = {"rows": len(scan.rows)}
    if len(alphas) > 2:
        out["spearman"] = {f"{d:g}": scan.spearman(d) for d in deltas}
    return out


def cmd_wigner(cfg: RunConfig) -> dict:
    o = cfg.options
    st, label = parse_state(o.get("state"))
    r = st.rescaled
    g = o.get("grid", {})
    if not isinstance(g, dict) or set(g) - {"nx", "np", "x_range", "p_range"}:
        raise ConfigError("grid accepts nx, np, x_range, p_range")
    nx, np_ = g.get("nx", 256), g.get("np", 256)
    if any(isinstance(v, bool) or not isinstance(v, int) or v < 8 for v in (nx, np_)):
        raise ConfigError("grid sizes must be integers >= 8")
    ranges = []
    for key in ("x_range", "p_range"):
        v = g.get(key)
        if v is not None:
            if not isinstance(v, list) or len(v) != 2 or not _number(v[0], key) < _number(v[1], key):
                raise ConfigError(f"{key} must be [lo, hi] with lo < hi")
            v = (float(v[0]), float(v[1]))
        ranges.append(v)
    s = _number(o.get("s", 0.0), "s")
    if not -1.0 <= s <= 0.0:
        raise ConfigError("s must lie in [-1, 0]")
    t = _number(o.get("t", 0.0), "t")
    grid = sample_grid(r, GridSpec(nx, np_, ranges[0], ranges[1]), kappa=-s, t=t)
    wedge = o.get("wedge", True)
    info: dict = {"min_w": float(grid.values.min()), "max_w": float(grid.values.max())}
    if wedge is True:
        res = compute_beta(r)
        wedge = [res.t1, res.t2] if res.t2 > res.t1 else None
        info["beta"] = res.beta
    elif wedge is False or wedge is None:
        wedge = None
    else:
        wedge = list(_window(wedge))
    info["wedge"] = wedge
    if cfg.wants("csv"):
        grid.to_csv(cfg.path("wigner.csv"))
        grid.to_binary(cfg.path("wigner.bin"))
    if cfg.wants("json"):
        _write_json(cfg.path("wigner.json"), info)
    if cfg.wants("svg"):
        sx = -(-grid.nx // 96)
        sp = -(-grid.np // 96)
        fig = svg.Plot(grid.x_range, grid.p_range, width=560, height=520, title=label,
                       xlabel="x (rescaled)", ylabel="p (rescaled)")
        fig.density(grid.values[::sx, ::sp], grid.x_range, grid.p_range)
        if wedge:
            # lines p = -x / t through the origin, one per interval endpoint
            ps = np.array(grid.p_range)
            for tw in wedge:
                fig.line(-ps * tw, ps, "black", width=1.2, dash="5,4")
        fig.save(cfg.path("wigner.svg"))
    return info


HANDLERS = {"trace": cmd_trace, "backflow": cmd_backflow, "scan": cmd_scan,
            "smooth": cmd_smooth, "eta": cmd_eta, "wigner": cmd_wigner}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="backflow-lab",
                                 description="Quantum backflow and Wigner negativity of Gaussian cat states.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=None, help="output directory (default from config, else ./out)")
    ap.add_argument("--threads", type=int, default=None, help="worker processes for scans")
    ap.add_argument("--format", default=None, help="comma list of csv,json,svg")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command, args.out, args.format, args.threads)
        cfg.out.mkdir(parents=True, exist_ok=True)
        summary = HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}), file=sys.stderr)
        return 2
    except (BackflowLabError, FloatingPointError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 3
    print(json.dumps({"command": args.command, "files": cfg.written, "summary": summary},
                     default=float, sort_keys=True))
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
