"""Parameter sweeps and their CSV / JSON / SVG renderings.

Each ``run_*`` function returns a :class:`SweepResult`: one row per grid point
(values rounded to the 9 significant digits written to CSV, so CSV files
round-trip exactly), a ``detail`` list with full-precision per-point records
for JSON, and a list of validation ``failures``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .chained import DEFAULT_CHAINED_CONFIG, optimize_chained
from .optimize import OptConfig
from .qubit import (
    DEFAULT_GRID_SIZE,
    ModelId,
    ThetaParam,
    max_weight_for_local_model,
    verify_decomposition,
)
from .qutrit import DEFAULT_QUTRIT_CONFIG, qutrit_lower_bound

__all__ = [
    "SweepConfig",
    "SweepMode",
    "SweepResult",
    "emit_svg",
    "float_grid",
    "read_csv",
    "run_chained",
    "run_qubit_bounds",
    "run_qutrit",
    "run_verify",
    "write_csv",
    "write_json",
]

SIG_DIGITS = 9
ORDER_SLACK = 1e-6
QUTRIT_THRESHOLD_LEVEL = 1e-3
RESIDUAL_LIMIT = 1e-12
# qutrit sweep grid: coarse on [0, 5], fine around the onset of local content
QUTRIT_DEFAULT_GRID = (0.0, 5.0, 0.1)
QUTRIT_FINE_GRID = (1.6, 2.6, 0.02)


class SweepMode(str, enum.Enum):
    QUBIT_BOUNDS = "qubit-bounds"
    CHAINED = "chained"
    QUTRIT = "qutrit"
    VERIFY = "verify"


@dataclass(frozen=True)
class SweepConfig:
    mode: SweepMode
    start: float
    stop: float
    step: float
    n_settings: tuple[int, ...] = (40,)
    out_csv: Path | None = None
    out_json: Path | None = None
    out_svg: Path | None = None
    out_angles_csv: Path | None = None
    grid_size: int = DEFAULT_GRID_SIZE
    restarts: int | None = None
    seed: int = 0
    tolerance: float = 1e-6
    workers: int = 1
    # extra grid merged into the main one (qutrit refinement band)
    fine_grid: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"grid step must be positive, got {self.step}")
        if self.stop < self.start:
            raise ValueError(f"empty grid: stop {self.stop} < start {self.start}")
        if not self.n_settings or min(self.n_settings) < 2:
            raise ValueError("n_settings must list values >= 2")

    def grid(self) -> list[float]:
        pts = float_grid(self.start, self.stop, self.step)
        if self.fine_grid is not None:
            pts = sorted(set(pts) | set(float_grid(*self.fine_grid)))
        if self.mode is not SweepMode.QUTRIT:
            # grid points are rounded, so snap the endpoint to pi/4 itself
            pts = [math.pi / 4 if abs(p - math.pi / 4) < 1e-9 else p for p in pts]
        return pts


@dataclass
class SweepResult:
    mode: SweepMode
    columns: list[str]
    rows: list[dict]
    detail: list[dict] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    angle_rows: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def float_grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic grid, each point rounded to 12 decimals."""
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(n)]


def _round(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    if math.isnan(v):
        return v
    return float(f"{v:.{SIG_DIGITS}g}")


def _row(**values) -> dict:
    return {k: (v if isinstance(v, str) else _round(v)) for k, v in values.items()}


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- qubit lower/upper bounds --


def _qubit_point(args):
    theta, N, grid_size, tolerance, opt = args
    th = ThetaParam(theta)
    if th.s == 0.0:
        # product state: fully local, and no chained violation
        lower_improved = 1.0
    else:
        lower_improved = max_weight_for_local_model(th, ModelId.IMPROVED_F, tolerance, grid_size)
    lower_epr2 = max_weight_for_local_model(th, ModelId.EPR2_SIGN, tolerance, grid_size)
    ch = optimize_chained(N, th, symmetry=True, config=opt)
    return lower_epr2, lower_improved, ch


def _chained_opt(config: SweepConfig, index: int) -> OptConfig:
    base = DEFAULT_CHAINED_CONFIG
    return OptConfig(
        max_evals=base.max_evals,
        simplex_tolerance=base.simplex_tolerance,
        restarts=config.restarts or base.restarts,
        seed=config.seed ^ index,
        initial_step=base.initial_step,
    )


def run_qubit_bounds(config: SweepConfig) -> SweepResult:
    """EPR2 lower bound, improved lower bound and chained upper bound per theta."""
    N = max(config.n_settings)
    thetas = config.grid()
    jobs = [
        (t, N, config.grid_size, config.tolerance, _chained_opt(config, (N << 16) ^ i))
        for i, t in enumerate(thetas)
    ]
    out = _map(_qubit_point, jobs, config.workers)
    res = SweepResult(
        SweepMode.QUBIT_BOUNDS,
        ["theta", "lower_epr2", "lower_improved", "upper_chained", "N", "converged"],
        [],
    )
    for t, (lo_e, lo_i, ch) in zip(thetas, out):
        res.rows.append(_row(theta=t, lower_epr2=lo_e, lower_improved=lo_i,
                             upper_chained=ch.upper_bound, N=N, converged=ch.converged))
        res.detail.append({"theta": t, "lower_epr2": lo_e, "lower_improved": lo_i,
                           "chained": ch.to_dict()})
        if not lo_e <= lo_i <= ch.upper_bound + ORDER_SLACK:
            res.failures.append(f"ordering violated at theta={t!r}: {lo_e}, {lo_i}, {ch.upper_bound}")
        if not ch.converged:
            res.failures.append(f"chained optimizer did not converge at theta={t!r}")
    return res


# -- chained inequality --


def _chained_point(args):
    theta, N, opt = args
    return optimize_chained(N, theta, symmetry=True, config=opt)


def run_chained(config: SweepConfig) -> SweepResult:
    """Optimized chained value, bound and delta for each (theta, N)."""
    thetas = config.grid()
    jobs = []
    for i, t in enumerate(thetas):
        for N in config.n_settings:
            jobs.append((t, N, _chained_opt(config, (N << 16) ^ i)))
    out = _map(_chained_point, jobs, config.workers)
    res = SweepResult(
        SweepMode.CHAINED,
        ["theta", "N", "I_value", "upper_bound", "delta", "converged"],
        [],
    )
    for (t, N, _), r in zip(jobs, out):
        res.rows.append(_row(theta=t, N=N, I_value=r.value, upper_bound=r.upper_bound,
                             delta=r.delta, converged=r.converged))
        res.detail.append(r.to_dict())
        for k, a in enumerate(r.alphas, start=1):
            res.angle_rows.append(_row(theta=t, N=N, k=k, alpha=a))
        if not r.converged:
            res.failures.append(f"chained optimizer did not converge at theta={t!r}, N={N}")
        if r.value > 2 * N + 1e-9:
            res.failures.append(f"chained value {r.value} above 2N at theta={t!r}, N={N}")
    return res


# -- qutrit --


def _qutrit_point(args):
    gamma, opt = args
    return qutrit_lower_bound(gamma, opt)


def run_qutrit(config: SweepConfig) -> SweepResult:
    """Lower bound per gamma and the first grid gamma where it exceeds 1e-3."""
    gammas = config.grid()
    base = DEFAULT_QUTRIT_CONFIG
    jobs = [
        (g, OptConfig(max_evals=base.max_evals, simplex_tolerance=base.simplex_tolerance,
                      restarts=config.restarts or base.restarts, seed=config.seed,
                      initial_step=base.initial_step))
        for g in gammas
    ]
    out = _map(_qutrit_point, jobs, config.workers)
    res = SweepResult(
        SweepMode.QUTRIT, ["gamma", "lower_bound", "converged_flag", "starts_used"], []
    )
    threshold = None
    for g, b in zip(gammas, out):
        res.rows.append(_row(gamma=g, lower_bound=b.value, converged_flag=b.converged,
                             starts_used=b.starts_used))
        res.detail.append(b.to_dict())
        if threshold is None and b.value > QUTRIT_THRESHOLD_LEVEL:
            threshold = g
        if not b.converged:
            res.failures.append(f"qutrit optimizer did not converge at gamma={g!r}")
        envelope = g * g / (2 + g * g)
        if b.value > envelope + 1e-9:
            res.failures.append(f"bound {b.value} above the Schmidt-basis value at gamma={g!r}")
    res.summary["threshold_gamma"] = threshold
    res.summary["threshold_level"] = QUTRIT_THRESHOLD_LEVEL
    return res


# -- nonnegativity certification --


def _verify_point(args):
    theta, grid_size = args
    th = ThetaParam(theta)
    models = (ModelId.EPR2_SIGN,) if th.s == 0.0 else tuple(ModelId)
    return [verify_decomposition(th, m, grid_size, refine=True) for m in models]


def run_verify(config: SweepConfig) -> SweepResult:
    """Certify both local models at their nominal weights over a theta grid."""
    thetas = config.grid()
    out = _map(_verify_point, [(t, config.grid_size) for t in thetas], config.workers)
    cols = ["theta", "model_id", "certified_weight", "max_identity_residual",
            "min_pnl_value", "max_nosignaling_residual", "settings_examined", "valid"]
    res = SweepResult(SweepMode.VERIFY, cols, [])
    for t, reports in zip(thetas, out):
        for r in reports:
            d = r.to_dict()
            d["theta"] = t
            res.rows.append(_row(**d, valid=r.valid))
            res.detail.append(r.to_dict())
            tag = f"theta={t!r}, model={r.model_id.value}"
            if not r.valid:
                res.failures.append(f"negative nonlocal part ({r.min_pnl_value}) at {tag}")
            if r.max_identity_residual > RESIDUAL_LIMIT:
                res.failures.append(f"identity residual {r.max_identity_residual} at {tag}")
            if r.max_nosignaling_residual > RESIDUAL_LIMIT:
                res.failures.append(f"signaling residual {r.max_nosignaling_residual} at {tag}")
    return res


RUNNERS = {
    SweepMode.QUBIT_BOUNDS: run_qubit_bounds,
    SweepMode.CHAINED: run_chained,
    SweepMode.QUTRIT: run_qutrit,
    SweepMode.VERIFY: run_verify,
}


# -- files --


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    return f"{v:.{SIG_DIGITS}g}"


def _csv_text(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def write_csv(result: SweepResult, path, angles: bool = False) -> None:
    rows = result.angle_rows if angles else result.rows
    cols = ["theta", "N", "k", "alpha"] if angles else result.columns
    Path(path).write_text(_csv_text(cols, rows))


def _parse(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        cols = next(reader)
        rows = [{c: _parse(v) for c, v in zip(cols, line)} for line in reader]
    return cols, rows


def _jsonable(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_json(result: SweepResult, path) -> None:
    doc = {
        "mode": result.mode.value,
        "columns": result.columns,
        "rows": result.rows,
        "detail": result.detail,
        "summary": result.summary,
        "failures": result.failures,
    }
    Path(path).write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


# -- SVG --

_W, _H = 720, 440
_L, _R, _T, _B = 70, 230, 40, 60
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22")


@dataclass
class _Series:
    label: str
    x: list[float]
    y: list[float]
    width: float = 1.5
    dash: str | None = None
    color: str = "#000000"
    markers: bool = False


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step - 1e-9) * step
    out = []
    v = first
    while v <= hi + 1e-9 * step:
        out.append(round(v, 10))
        v += step
    return out


def _render(title: str, xlabel: str, ylabel: str, series: list[_Series],
            xlim: tuple[float, float], ylim: tuple[float, float]) -> str:
    x0, x1 = xlim
    y0, y1 = ylim
    pw, ph = _W - _L - _R, _H - _T - _B

    def px(x):
        return _L + (x - x0) / (x1 - x0) * pw

    def py(y):
        return _T + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="#ffffff"/>',
        f'<text x="{_L + pw / 2:.2f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{_L}" y="{_T}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>',
    ]
    for t in _ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{_T + ph}" x2="{X:.2f}" y2="{_T + ph + 5}" stroke="#000000"/>')
        out.append(f'<text x="{X:.2f}" y="{_T + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{_L - 5}" y1="{Y:.2f}" x2="{_L}" y2="{Y:.2f}" stroke="#000000"/>')
        out.append(f'<text x="{_L - 8}" y="{Y + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{_L + pw / 2:.2f}" y="{_H - 18}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="18" y="{_T + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {_T + ph / 2:.2f})">{ylabel}</text>')
    for i, s in enumerate(series):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s.x, s.y) if not math.isnan(b))
        dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
        if s.markers:
            for a, b in zip(s.x, s.y):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3.5" fill="{s.color}"/>')
        else:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{s.color}" '
                       f'stroke-width="{s.width}"{dash}/>')
        ly = _T + 14 + 18 * i
        lx = _W - _R + 12
        if s.markers:
            out.append(f'<circle cx="{lx + 12}" cy="{ly - 4}" r="3.5" fill="{s.color}"/>')
        else:
            out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" '
                       f'stroke="{s.color}" stroke-width="{s.width}"{dash}/>')
        out.append(f'<text x="{lx + 30}" y="{ly}">{s.label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _figure(result: SweepResult, figure_id: str) -> str:
    rows = result.rows
    if figure_id == "fig1":
        th = [r["theta"] for r in rows]
        series = [
            _Series("EPR2 lower", th, [r["lower_epr2"] for r in rows], width=1.0),
            _Series("improved lower", th, [r["lower_improved"] for r in rows], width=3.0),
            _Series(f"chained upper (N={rows[0]['N']})", th,
                    [r["upper_chained"] for r in rows], width=1.5, dash="6,4"),
        ]
        return _render("Bounds on the local content, two qubits", "theta",
                       "local content", series, (0.0, math.pi / 4), (0.0, 1.0))
    if figure_id == "fig2":
        g = [r["gamma"] for r in rows]
        series = [
            _Series("lower bound", g, [r["lower_bound"] for r in rows], width=2.0),
            _Series("maximally entangled (0)", [0.0, 1.0], [0.0, 0.0],
                    markers=True),
        ]
        ymax = max(0.05, max(r["lower_bound"] for r in rows) * 1.1)
        return _render("Local content lower bound, two qutrits", "gamma",
                       "local content", series, (min(g[0], 0.0), max(g[-1], 1.0)), (0.0, ymax))
    if figure_id == "fig3":
        if not result.angle_rows:
            raise ValueError("no angle table to plot")
        N = result.angle_rows[0]["N"]
        by_theta: dict[float, list[tuple[int, float]]] = {}
        for r in result.angle_rows:
            if r["N"] == N:
                # wrap so clusters near 0 and pi do not straddle the cut
                a = (r["alpha"] + math.pi / 2) % (2 * math.pi) - math.pi / 2
                by_theta.setdefault(r["theta"], []).append((r["k"], a))
        series = []
        for i, (t, pts) in enumerate(sorted(by_theta.items())):
            pts.sort()
            series.append(_Series(f"theta={t:.4g}", [p[0] for p in pts],
                                  [p[1] for p in pts], color=_PALETTE[i % len(_PALETTE)]))
        return _render(f"Optimal chained settings, N={N}", "k", "alpha_k (rad)",
                       series, (1.0, float(N)), (-math.pi / 2, 3 * math.pi / 2))
    raise ValueError(f"unknown figure id {figure_id!r}")


FIGURE_FOR_MODE = {
    SweepMode.QUBIT_BOUNDS: "fig1",
    SweepMode.QUTRIT: "fig2",
    SweepMode.CHAINED: "fig3",
}


def emit_svg(result: SweepResult, figure_id: str, path) -> None:
    """Render one figure to a standalone SVG; nothing is written on error."""
    if not result.rows:
        raise ValueError("cannot plot an empty sweep")
    text = _figure(result, figure_id)
    Path(path).write_text(text)
