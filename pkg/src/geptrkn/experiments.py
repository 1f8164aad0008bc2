"""Experiment harness: NCD convergence tables, work-precision sweeps, stability exports."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .collocation import (coefficient_residuals, dumps_17, embedded_scheme,
                          orthogonality_residuals, resolve_method)
from .exceptions import GeptrknError, MissingExactSolution
from .integrator import ControllerConfig, integrate_adaptive, integrate_fixed
from .oracle import evaluate_exact, rk_reference
from .problems import make_problem
from .stability import scan_region

THREADS_ENV = "GEPTRKN_THREADS"
DEFAULT_H_LIST = tuple(2.0 ** -k for k in range(2, 11))
DEFAULT_TOL_LIST = tuple(10.0 ** -k for k in range(4, 11))
# NCD at or below this is double-precision noise and printed as "--"
NCD_FLOOR = -15.0
REFERENCE_TOL = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully deterministic description of one experiment."""

    methods: tuple = ("geptrkn5",)
    problem: str = "line"
    params: dict = field(default_factory=dict)
    mode: str = "fixed"
    h_list: tuple = DEFAULT_H_LIST
    tol_list: tuple = DEFAULT_TOL_LIST
    lte_mode: str = "position"
    n_z: int = 400
    n_nu: int = 400
    z_min: float = -10.0
    nu_min: float = -10.0
    threads: int | None = None

    def __post_init__(self):
        if isinstance(self.methods, str):
            object.__setattr__(self, "methods", (self.methods,))
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"mode must be 'fixed' or 'adaptive', got {self.mode!r}")

    def make_problem(self):
        return make_problem(self.problem, self.params)


def max_workers(requested: int | None = None) -> int:
    """Worker count: the explicit request, else ``GEPTRKN_THREADS``, else the CPU count."""
    n = requested
    if n is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            n = os.cpu_count() or 1
    return max(1, int(n))


def _map(fn, items, threads):
    items = list(items)
    workers = min(max_workers(threads), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map keeps input order, so output does not depend on scheduling
        return list(pool.map(fn, items))


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write(text, out):
    if out is None:
        return
    if hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


# --------------------------------------------------------------------------
# Convergence tables
# --------------------------------------------------------------------------

@dataclass
class ConvergenceTable:
    """``ncd[i][j]`` is log10 of the max grid error for ``h_list[i]`` and ``methods[j]``."""

    h_list: list
    methods: list
    ncd: list
    omitted: list          # True where the cell is printed as "--"
    errors: list           # messages for failed cells, None otherwise

    def cell(self, i, j) -> str:
        if self.errors[i][j] is not None:
            return "fail"
        if self.omitted[i][j]:
            return "--"
        return f"{self.ncd[i][j]:.1f}"

    @property
    def failed(self) -> bool:
        return any(e is not None for row in self.errors for e in row)

    def to_text(self) -> str:
        head = ["h"] + list(self.methods)
        rows = [[_h_label(h)] + [self.cell(i, j) for j in range(len(self.methods))]
                for i, h in enumerate(self.h_list)]
        widths = [max(len(r[k]) for r in [head] + rows) for k in range(len(head))]
        lines = ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in [head] + rows]
        return "\n".join(lines) + "\n"

    def to_csv(self, out=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "method", "ncd", "shown", "status"])
        for i, h in enumerate(self.h_list):
            for j, m in enumerate(self.methods):
                err = self.errors[i][j]
                w.writerow([_fmt(h), m, "" if err else _fmt(self.ncd[i][j]), self.cell(i, j),
                            "ok" if err is None else f"failed: {err}"])
        text = buf.getvalue()
        _write(text, out)
        return text


def _h_label(h) -> str:
    k = -math.log2(h)
    if abs(k - round(k)) < 1e-12 and round(k) > 0:
        return f"1/2^{int(round(k))}"
    return format(h, "g")


def omit_mask(ncd, order, floor: float = NCD_FLOOR) -> list:
    """Cells to print as "--" down one column of decreasing ``h`` (halving).

    A cell is omitted once its NCD, or the previous row's NCD lowered by the
    expected gain ``order * log10(2)``, reaches the precision floor; every
    later row is omitted too.
    """
    out, gone = [], False
    drop = order * math.log10(2.0)
    for i, v in enumerate(ncd):
        if not gone:
            prev = ncd[i - 1] if i else None
            gone = (v is not None and v <= floor) or (
                prev is not None and i > 0 and prev - drop <= floor)
        out.append(gone)
    return out


def ncd_value(problem, h, scheme) -> float:
    traj = integrate_fixed(problem, problem.t0, problem.t_end, h, scheme)
    err = traj.max_error(problem)
    return math.log10(err) if err > 0 else -math.inf


def run_convergence_table(config: ExperimentConfig) -> ConvergenceTable:
    """Fixed-step NCD table over ``config.h_list`` for every method."""
    problem = config.make_problem()
    if problem.exact is None:
        raise MissingExactSolution(f"problem {problem.name!r} has no closed-form solution")
    schemes = [resolve_method(m) for m in config.methods]
    h_list = [float(h) for h in config.h_list]
    jobs = [(i, j) for i in range(len(h_list)) for j in range(len(schemes))]

    def run(job):
        i, j = job
        try:
            return ncd_value(problem, h_list[i], schemes[j]), None
        except GeptrknError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    results = dict(zip(jobs, _map(run, jobs, config.threads)))
    ncd = [[results[i, j][0] for j in range(len(schemes))] for i in range(len(h_list))]
    errors = [[results[i, j][1] for j in range(len(schemes))] for i in range(len(h_list))]
    omitted = [[False] * len(schemes) for _ in h_list]
    for j, sc in enumerate(schemes):
        col = omit_mask([ncd[i][j] for i in range(len(h_list))], sc.step_order)
        for i in range(len(h_list)):
            omitted[i][j] = col[i]
    return ConvergenceTable(h_list, [sc.name or "custom" for sc in schemes], ncd, omitted, errors)


# --------------------------------------------------------------------------
# Work-precision sweeps
# --------------------------------------------------------------------------

@dataclass
class WorkPrecisionRow:
    method: str
    tol: float
    error_at_tend: float = math.nan
    nfe: int = 0
    accepts: int = 0
    rejects: int = 0
    start_nfe: int = 0
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


WP_HEADER = ["method", "tol", "error_at_tend", "nfe", "accepts", "rejects", "start_nfe", "status"]


def work_precision_csv(rows, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(WP_HEADER)
    for r in rows:
        w.writerow([r.method, _fmt(r.tol), _fmt(r.error_at_tend), r.nfe, r.accepts, r.rejects,
                    r.start_nfe, r.status])
    text = buf.getvalue()
    _write(text, out)
    return text


def _label(method) -> str:
    return method.strip() if isinstance(method, str) else "custom"


def reference_end_value(problem) -> np.ndarray:
    """``y(t_end)`` from the closed form, else from the reference integrator."""
    ex = evaluate_exact(problem, problem.t_end)
    if ex is not None:
        return ex[0]
    res = rk_reference(problem, problem.t0, problem.y0, problem.yp0, [problem.t_end],
                       tol=REFERENCE_TOL)
    return res.values[0][1]


def run_work_precision(config: ExperimentConfig, reference=None) -> list:
    """Adaptive runs for every (method, tol); failed runs come back with a failed status."""
    problem = config.make_problem()
    if reference is None:
        reference = reference_end_value(problem)
    reference = np.atleast_1d(np.asarray(reference, dtype=float))
    schemes = [(_label(m), resolve_method(m)) for m in config.methods]
    jobs = [(label, sc, float(tol)) for label, sc in schemes for tol in config.tol_list]

    def run(job):
        label, sc, tol = job
        row = WorkPrecisionRow(label, tol)
        try:
            cfg = ControllerConfig(tol=tol, lte_mode=config.lte_mode)
            traj = integrate_adaptive(problem, problem.t0, problem.t_end, cfg, sc,
                                      embedded_scheme(sc))
        except GeptrknError as exc:
            row.status = f"failed: {type(exc).__name__}: {exc}"
            return row
        row.error_at_tend = float(np.linalg.norm(traj.y_end - reference))
        st = traj.stats
        row.nfe, row.accepts, row.rejects, row.start_nfe = st.nfe, st.accepts, st.rejects, st.start_nfe
        return row

    return _map(run, jobs, config.threads)


# --------------------------------------------------------------------------
# Stability and inspection
# --------------------------------------------------------------------------

def run_stability_export(config: ExperimentConfig, csv_out=None, json_out=None):
    """Scan the first configured method; returns the grid after writing CSV and JSON."""
    scheme = resolve_method(config.methods[0])
    grid = scan_region(scheme, config.z_min, config.nu_min, config.n_z, config.n_nu)
    if csv_out is not None:
        grid.to_csv(csv_out)
    _write(grid.summary_json() + "\n", json_out)
    return grid


def inspect_scheme(method) -> str:
    """Plain-text coefficient report with 17 significant digits."""
    sc = resolve_method(method)
    rep = orthogonality_residuals(sc.c)
    res = coefficient_residuals(sc)

    def vec(v):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"

    lines = [f"method: {sc.name or 'custom'}",
             f"s: {sc.s}",
             f"step_order: {sc.step_order}",
             f"stage_order: {sc.stage_order}",
             f"c: {vec(sc.c)}",
             f"b: {vec(sc.b)}",
             f"d: {vec(sc.d)}",
             "A:"] + [f"  {vec(r)}" for r in sc.A] + ["B:"] + [f"  {vec(r)}" for r in sc.B]
    lines.append("coefficient residuals: " +
                 ", ".join(f"{k}={v:.3e}" for k, v in res.items()))
    lines.append(f"orthogonality: r0={rep.r0:.3e} r1={rep.r1:.3e} rD={rep.rD:.3e} "
                 f"max={rep.max_residual:.3e} satisfied_order={rep.satisfied_order}")
    return "\n".join(lines) + "\n"


def scheme_json(method) -> str:
    return resolve_method(method).to_json()


__all__ = [
    "ExperimentConfig", "ConvergenceTable", "WorkPrecisionRow", "run_convergence_table",
    "run_work_precision", "run_stability_export", "inspect_scheme", "scheme_json",
    "work_precision_csv", "omit_mask", "max_workers",
]
