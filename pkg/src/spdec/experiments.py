"""Experiment harness: end-to-end solving and CSV data for complexity traces and scans.

Every command takes a :class:`RunSpec`. Grid points (alpha, seed) are run
in a process pool capped by ``SPDEC_THREADS``; rows are assembled in grid
order, so output does not depend on the pool size.
"""
from __future__ import annotations

import csv
import enum
import io
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decimation import DecimationConfig, DecimationOutcome, DecimationStatus, Selection, StepRecord, run
from .instance import Instance, generate_random, parse_dimacs, verify_assignment
from .sp import SPConfig, SPStatus
from .walksat import WalkSatConfig, WalkSatResult, solve_easy

log = logging.getLogger(__name__)

EXIT_SAT = 10
EXIT_GAVE_UP = 20
EXIT_ERROR = 1
WINDOW = 10


class Mode(str, enum.Enum):
    SOLVE = "solve"
    TRACE = "trace"
    ALPHA_SCAN = "alpha-scan"
    DELTA_CORR = "delta-corr"
    CRITICAL = "critical"


@dataclass
class RunSpec:
    mode: Mode = Mode.SOLVE
    n: int = 10_000
    alpha: float = 4.2
    alpha_grid: tuple = ()
    k: int = 3
    seeds: tuple = (1,)
    selection: Selection = Selection.CERTITUDE
    batch_fraction: float = 1e-3
    tol: float = 1e-3
    max_sweeps: int = 1000
    damping: float = 0.0
    out: str | None = None
    dimacs: str | None = None
    deterministic: bool = True
    initial_only: bool = False

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.selection = Selection(self.selection)
        self.alpha_grid = tuple(float(a) for a in self.alpha_grid)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.dimacs is None and self.n < self.k:
            raise ValueError(f"need n >= k, got n={self.n}, k={self.k}")
        if self.mode is Mode.ALPHA_SCAN and len(self.grid()) < 3:
            raise ValueError("alpha-scan needs a grid of at least 3 points")

    def grid(self) -> tuple:
        return self.alpha_grid or (float(self.alpha),)

    def decimation_config(self, batch_fraction: float | None = None) -> DecimationConfig:
        sp = SPConfig(tol=self.tol, max_sweeps=self.max_sweeps, damping=self.damping)
        return DecimationConfig(self.selection, self.batch_fraction if batch_fraction is None else batch_fraction, sp)

    def instance(self, alpha: float, seed: int) -> Instance:
        if self.dimacs is not None:
            return parse_dimacs(Path(self.dimacs).read_text(encoding="utf-8"))
        return generate_random(self.n, alpha, self.k, seed)


# --- pipeline ---------------------------------------------------------

@dataclass
class PipelineResult:
    status: str  # "SAT", a DecimationStatus value, or "WALKSAT_FAILURE"
    outcome: DecimationOutcome
    walksat: WalkSatResult | None = None
    assignment: np.ndarray | None = None  # bool, verified

    @property
    def solved(self) -> bool:
        return self.status == "SAT"


def solve_pipeline(inst: Instance, cfg: DecimationConfig | None = None, seed: int = 0,
                   ws_cfg: WalkSatConfig | None = None, callback=None) -> PipelineResult:
    """Decimate, hand an easy residual to WalkSAT and verify the combined assignment."""
    out = run(inst, cfg, seed=seed, callback=callback)
    if out.status is not DecimationStatus.EASY_RESIDUAL:
        return PipelineResult(out.status.value, out)
    ws = solve_easy(out.residual, ws_cfg or WalkSatConfig(seed=seed))
    if not ws.success:
        return PipelineResult("WALKSAT_FAILURE", out, ws)
    x = out.assignment.copy()
    if out.residual.n_vars:
        x[np.asarray(out.residual.var_ids)] = ws.assignment
    if (x < 0).any():
        raise AssertionError("pipeline left variables unassigned")
    full = x.astype(bool)
    if not verify_assignment(inst, full):
        raise AssertionError("combined assignment does not satisfy the instance")
    return PipelineResult("SAT", out, ws, full)


# --- worker pool ------------------------------------------------------

def worker_count() -> int:
    raw = os.environ.get("SPDEC_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer SPDEC_THREADS=%r", raw)
    return os.cpu_count() or 1


def map_grid(fn, tasks: list) -> list:
    """``[fn(t) for t in tasks]``, possibly in worker processes, results in task order."""
    workers = min(worker_count(), len(tasks))
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# --- CSV --------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    if isinstance(v, enum.Enum):
        return v.value
    return str(v)


def write_csv(rows: list, fields: list, out) -> None:
    """Comma-separated, header row, UTF-8, LF line endings. ``out`` is a path, a stream or None (stdout)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r.get(f)) for f in fields])
    text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    elif hasattr(out, "write"):
        out.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _keys(spec: RunSpec, alpha, seed, inst: Instance | None = None) -> dict:
    """Row identity. For a DIMACS input n and alpha describe the file, not the flags."""
    if inst is not None and spec.dimacs is not None:
        return {"n": inst.n_vars, "alpha": inst.alpha, "seed": seed, "selection_rule": spec.selection.value}
    return {"n": spec.n, "alpha": alpha, "seed": seed, "selection_rule": spec.selection.value}


# --- solve ------------------------------------------------------------

def cmd_solve(spec: RunSpec, stream=None) -> int:
    """Run the full pipeline on one instance; writes a DIMACS-style result. Returns the exit code."""
    seed = spec.seeds[0]
    inst = spec.instance(spec.alpha, seed)
    res = solve_pipeline(inst, spec.decimation_config(), seed=seed)
    lines = [f"c n={inst.n_vars} m={inst.n_clauses} seed={seed} selection={spec.selection.value}",
             f"c status {res.status}"]
    if res.solved:
        lits = [str(i + 1 if v else -(i + 1)) for i, v in enumerate(res.assignment.tolist())]
        lines.append("s SATISFIABLE")
        for start in range(0, len(lits), 20):
            lines.append("v " + " ".join(lits[start:start + 20]))
        lines.append("v 0")
    else:
        lines.append("s UNKNOWN")
    text = "\n".join(lines) + "\n"
    if spec.out:
        Path(spec.out).write_text(text, encoding="utf-8")
    else:
        (stream or sys.stdout).write(text)
    return EXIT_SAT if res.solved else EXIT_GAVE_UP


# --- trace ------------------------------------------------------------

TRACE_FIELDS = ["n", "alpha", "seed", "selection_rule", "step", "f", "sigma_density", "chosen_certitude",
                "chosen_polarization", "delta_pred", "delta_measured", "status"]


def trace_rows(outcome: DecimationOutcome, keys: dict) -> list:
    """One row per step. ``status`` is the SP status of the step, and the run's
    terminal status on the last row."""
    rows = []
    for j, rec in enumerate(outcome.trace):
        last = j == len(outcome.trace) - 1
        rows.append({**keys, "step": rec.step, "f": rec.f, "sigma_density": rec.sigma_density,
                     "chosen_certitude": rec.chosen_certitude, "chosen_polarization": rec.chosen_polarization,
                     "delta_pred": rec.delta_pred, "delta_measured": rec.delta_measured,
                     "status": outcome.status.value if last else rec.sp_status.value})
    return rows


def _trace_task(args):
    spec, alpha, seed = args
    inst = spec.instance(alpha, seed)
    out = run(inst, spec.decimation_config(), seed=seed)
    return trace_rows(out, _keys(spec, alpha, seed, inst))


def _per_run_path(out: str, prefix: str, alpha: float, seed: int) -> Path:
    return Path(out) / f"{prefix}_alpha{alpha:g}_seed{seed}.csv"


def cmd_trace(spec: RunSpec) -> int:
    """Complexity trace per (alpha, seed). With ``--out DIR`` one file per run, else one CSV on stdout."""
    tasks = [(spec, a, s) for a in spec.grid() for s in spec.seeds]
    results = map_grid(_trace_task, tasks)
    if spec.out and not spec.out.endswith(".csv"):
        for (_, a, s), rows in zip(tasks, results):
            write_csv(rows, TRACE_FIELDS, _per_run_path(spec.out, "trace", a, s))
    else:
        write_csv([r for rows in results for r in rows], TRACE_FIELDS, spec.out)
    return 0


# --- alpha scan -------------------------------------------------------

SCAN_FIELDS = ["row_type", "n", "alpha", "seed", "selection_rule", "initial_status", "initial_sigma_density",
               "final_sigma_density", "outcome", "f_final", "curve", "slope", "intercept", "zero_crossing",
               "fit_alpha_min", "fit_alpha_max", "fit_points"]


class _Stop(Exception):
    pass


@dataclass
class ScanPoint:
    alpha: float
    seed: int
    initial_status: str
    initial_density: float | None
    final_density: float | None
    outcome: str
    f_final: float


def _scan_task(args) -> ScanPoint:
    spec, alpha, seed = args
    inst = spec.instance(alpha, seed)
    cfg = spec.decimation_config()
    if spec.initial_only:
        # stop right after the initial solve
        records: list[StepRecord] = []

        def stop(rec):
            records.append(rec)
            raise _Stop

        try:
            run(inst, cfg, seed=seed, callback=stop)
        except _Stop:
            pass
        rec = records[0] if records else None
        status = rec.sp_status.value if rec else SPStatus.CONTRADICTION.value
        density = rec.sigma_density if rec else None
        trivial = rec is not None and rec.sp_status is SPStatus.CONVERGED_TRIVIAL
        return ScanPoint(alpha, seed, "TRIVIAL" if trivial else status, density, None, "", 0.0)
    res = solve_pipeline(inst, cfg, seed=seed)
    out = res.outcome
    first = out.trace[0] if out.trace else None
    trivial = first is not None and first.sp_status is SPStatus.CONVERGED_TRIVIAL
    status = "TRIVIAL" if trivial else (first.sp_status.value if first else SPStatus.CONTRADICTION.value)
    return ScanPoint(alpha, seed, status, out.initial_density, out.final_density, res.status, out.f_final)


@dataclass
class LinearFit:
    curve: str
    slope: float
    intercept: float
    alpha_min: float
    alpha_max: float
    points: int

    @property
    def zero_crossing(self) -> float:
        return -self.intercept / self.slope if self.slope != 0 else math.nan


def fit_curve(curve: str, alphas, values) -> LinearFit | None:
    """Least-squares line through ``(alpha, value)``; None with a warning if under 2 distinct alphas."""
    pts = [(a, v) for a, v in zip(alphas, values) if v is not None and math.isfinite(v)]
    if len({a for a, _ in pts}) < 2:
        log.warning("%s fit omitted: fewer than 2 convergent grid points", curve)
        return None
    x = np.array([a for a, _ in pts])
    y = np.array([v for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    return LinearFit(curve, float(slope), float(intercept), float(x.min()), float(x.max()), len(pts))


def scan_points(spec: RunSpec) -> list:
    return map_grid(_scan_task, [(spec, a, s) for a in spec.grid() for s in spec.seeds])


def scan_fits(points: list) -> list:
    """Fits of the initial and the final complexity density over nontrivial points."""
    nontrivial = [p for p in points if p.initial_status == SPStatus.CONVERGED_NONTRIVIAL.value]
    fits = [fit_curve("initial", [p.alpha for p in nontrivial], [p.initial_density for p in nontrivial]),
            fit_curve("final", [p.alpha for p in nontrivial], [p.final_density for p in nontrivial])]
    return [f for f in fits if f is not None]


def cmd_alpha_scan(spec: RunSpec) -> int:
    points = scan_points(spec)
    rows = []
    for p in points:
        rows.append({"row_type": "point", **_keys(spec, p.alpha, p.seed), "initial_status": p.initial_status,
                     "initial_sigma_density": p.initial_density, "final_sigma_density": p.final_density,
                     "outcome": p.outcome, "f_final": p.f_final})
    grid = ";".join(f"{a:g}" for a in spec.grid())
    seeds = ";".join(str(s) for s in spec.seeds)
    for fit in scan_fits(points):
        rows.append({"row_type": "fit", "n": spec.n, "alpha": grid, "seed": seeds,
                     "selection_rule": spec.selection.value, "curve": fit.curve, "slope": fit.slope,
                     "intercept": fit.intercept, "zero_crossing": fit.zero_crossing,
                     "fit_alpha_min": fit.alpha_min, "fit_alpha_max": fit.alpha_max, "fit_points": fit.points})
    write_csv(rows, SCAN_FIELDS, spec.out)
    return 0


# --- delta correlation ------------------------------------------------

DELTA_FIELDS = ["row_type", "n", "alpha", "seed", "selection_rule", "step", "window", "delta_pred",
                "delta_measured", "certitude", "s_T", "s_I", "s_F"]


def windowed_means(values, width: int = WINDOW) -> np.ndarray:
    """Means over consecutive non-overlapping windows; a trailing partial window is dropped."""
    v = np.asarray(values, dtype=float)
    w = v.size // width
    return v[:w * width].reshape(w, width).mean(axis=1)


def windows_agree(pred, meas, rel: float = 0.25, atol: float = 1e-9) -> np.ndarray:
    """Per window: ``|meas - pred| <= rel * |pred| + atol``.

    The absolute slack only matters for windows whose predicted mean is
    zero (every chosen survey fully polarized), where a relative error is
    undefined and the measured value is pure round-off.
    """
    pred = np.asarray(pred, dtype=float)
    meas = np.asarray(meas, dtype=float)
    return np.abs(meas - pred) <= rel * np.abs(pred) + atol


def delta_steps(outcome: DecimationOutcome) -> list:
    """Steps that fixed variables and re-converged to a nontrivial state, in order.

    The final collapse to the trivial state is left out: its measured drop
    is the whole remaining complexity, not the effect of one fixing.
    """
    return [r for r in outcome.trace[1:]
            if r.chosen and r.sp_status is SPStatus.CONVERGED_NONTRIVIAL and not math.isnan(r.delta_measured)]


def _delta_task(args):
    spec, alpha, seed = args
    inst = spec.instance(alpha, seed)
    cfg = spec.decimation_config(batch_fraction=1.0 / inst.n_vars)
    return run(inst, cfg, seed=seed), _keys(spec, alpha, seed, inst)


def delta_rows(outcome: DecimationOutcome, keys: dict) -> list:
    rows = []
    steps = delta_steps(outcome)
    for r in steps:
        c = r.chosen[0]
        rows.append({"row_type": "step", **keys, "step": r.step, "delta_pred": r.delta_pred,
                     "delta_measured": r.delta_measured, "certitude": c.certitude,
                     "s_T": c.survey[0], "s_I": c.survey[1], "s_F": c.survey[2]})
    pred = windowed_means([r.delta_pred for r in steps])
    meas = windowed_means([r.delta_measured for r in steps])
    for w, (p, m) in enumerate(zip(pred, meas)):
        rows.append({"row_type": "window", **keys, "step": steps[w * WINDOW].step, "window": w,
                     "delta_pred": p, "delta_measured": m})
    return rows


def cmd_delta_corr(spec: RunSpec) -> int:
    tasks = [(spec, a, s) for a in spec.grid() for s in spec.seeds]
    rows = [r for o, keys in map_grid(_delta_task, tasks) for r in delta_rows(o, keys)]
    write_csv(rows, DELTA_FIELDS, spec.out)
    return 0


# --- critical region --------------------------------------------------

CRITICAL_FIELDS = ["n", "alpha", "seed", "selection_rule", "f_jump", "residual_clauses", "last_sigma_density",
                   "outcome", "steps"]


def _critical_task(args):
    spec, alpha, seed = args
    inst = spec.instance(alpha, seed)
    out = run(inst, spec.decimation_config(), seed=seed)
    last = out.trace[-1] if out.trace else None
    return {**_keys(spec, alpha, seed, inst), "f_jump": out.f_final,
            "residual_clauses": last.n_clauses if last else 0,
            "last_sigma_density": out.final_density, "outcome": out.status.value,
            "steps": len(out.trace) - 1 if out.trace else 0}


def cmd_critical(spec: RunSpec) -> int:
    """Where each run stops: f at termination and the clauses left over."""
    rows = map_grid(_critical_task, [(spec, a, s) for a in spec.grid() for s in spec.seeds])
    write_csv(rows, CRITICAL_FIELDS, spec.out)
    return 0


COMMANDS = {
    Mode.SOLVE: cmd_solve,
    Mode.TRACE: cmd_trace,
    Mode.ALPHA_SCAN: cmd_alpha_scan,
    Mode.DELTA_CORR: cmd_delta_corr,
    Mode.CRITICAL: cmd_critical,
}
