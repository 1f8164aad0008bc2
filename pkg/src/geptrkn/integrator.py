"""GEPTRKN time stepping: fixed and variable step, embedded error control, dense output.

A step from ``t_n`` uses only the stage derivatives ``F_n`` evaluated at the
previous step's predicted stage values, so the ``s`` evaluations of a step
are mutually independent:

    y_{n+1}  = y_n + h y'_n + h^2 b.F_n
    y'_{n+1} = y'_n + h d.F_n
    Y_{n+1}  = y_{n+1} + h c y'_{n+1} + h^2 A F_n
    Y'_{n+1} = y'_{n+1} + h B F_n

After a step-size change ``A, B`` are replaced by ``A(q), B(q)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .collocation import (CollocationScheme, dense_output_weights, derive_variable_coefficients,
                          dumps_17, embedded_scheme)
from .exceptions import (DimensionMismatch, GridMismatch, MaxRejections, NonFiniteState,
                         OracleFailure, RatioOutOfRange, ToleranceUnreachable)
from .oracle import evaluate_exact, rk_reference
from .validation import check_positive, check_vector, check_xi

POSITION = "position"
POSITION_AND_DERIVATIVE = "position_and_derivative"
_LTE_ALIASES = {
    "position": POSITION, "positiononly": POSITION, "y": POSITION,
    "position_and_derivative": POSITION_AND_DERIVATIVE,
    "positionandderivative": POSITION_AND_DERIVATIVE, "both": POSITION_AND_DERIVATIVE,
}


@dataclass(frozen=True)
class StepState:
    """Values at ``t`` plus the stage data for the step of size ``h`` starting there.

    ``Y``, ``Yp`` and ``F`` have shape ``(s, k)``; ``F`` is ``None`` on a
    terminal state whose stages were never evaluated.
    """

    t: float
    h: float
    y: np.ndarray
    yp: np.ndarray
    Y: np.ndarray
    Yp: np.ndarray
    F: Optional[np.ndarray] = None


@dataclass
class RunStats:
    nfe: int = 0
    accepts: int = 0
    rejects: int = 0
    start_nfe: int = 0

    def to_dict(self, s: int | None = None) -> dict:
        out = {"nfe": self.nfe, "accepts": self.accepts, "rejects": self.rejects,
               "start_nfe": self.start_nfe}
        if s:
            # every stage of a step can run concurrently
            out["parallel_nfe"] = self.nfe // s
        return out


@dataclass
class Trajectory:
    """Accepted step history of one integration run."""

    scheme: CollocationScheme
    states: list
    stats: RunStats
    embedded: Optional[CollocationScheme] = None
    rejected: list = field(default_factory=list)   # (t, h_attempted) per rejection
    factors: list = field(default_factory=list)    # controller ratio h_next/h after each accept
    problem_name: str = ""

    @property
    def t(self) -> np.ndarray:
        return np.array([st.t for st in self.states])

    @property
    def y(self) -> np.ndarray:
        return np.array([st.y for st in self.states])

    @property
    def yp(self) -> np.ndarray:
        return np.array([st.yp for st in self.states])

    @property
    def h(self) -> np.ndarray:
        """Step sizes actually taken (one per accepted step)."""
        return np.array([st.h for st in self.states[:-1]])

    @property
    def y_end(self) -> np.ndarray:
        return self.states[-1].y

    @property
    def yp_end(self) -> np.ndarray:
        return self.states[-1].yp

    def errors(self, problem) -> np.ndarray:
        """Componentwise ``|y_n - y(t_n)|`` maxima on the grid (needs a closed form)."""
        out = np.empty(len(self.states))
        for i, st in enumerate(self.states):
            ex = evaluate_exact(problem, st.t)
            if ex is None:
                raise ValueError(f"problem {problem.name!r} has no exact solution")
            out[i] = np.max(np.abs(st.y - ex[0]))
        return out

    def max_error(self, problem) -> float:
        return float(np.max(self.errors(problem)))

    def dense(self, t):
        """Continuous-extension values ``(y, y')`` at time ``t`` inside the run."""
        times = self.t
        if not times[0] <= t <= times[-1]:
            raise ValueError(f"t={t} is outside the integrated interval [{times[0]}, {times[-1]}]")
        i = int(np.searchsorted(times, t, side="right")) - 1
        if i >= len(self.states) - 1:
            return self.states[-1].y.copy(), self.states[-1].yp.copy()
        st = self.states[i]
        xi = min(max((t - st.t) / st.h, 0.0), 1.0)
        return dense_eval(st, self.scheme, xi)

    def to_csv(self, path_or_buf=None) -> str:
        k = self.states[0].y.size
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"y_{i + 1}" for i in range(k)] + [f"yp_{i + 1}" for i in range(k)]
                   + ["h", "accepted"])
        rows = [(st.t, st.y, st.yp, st.h if i < len(self.states) - 1 else 0.0, 1)
                for i, st in enumerate(self.states)]
        by_t = {}
        for t, h in self.rejected:
            by_t.setdefault(t, []).append(h)
        for t, y, yp, h, acc in rows:
            for hr in by_t.pop(t, []):
                w.writerow(_row(t, y, yp, hr, 0))
            w.writerow(_row(t, y, yp, h, acc))
        text = buf.getvalue()
        if path_or_buf is not None:
            if hasattr(path_or_buf, "write"):
                path_or_buf.write(text)
            else:
                with open(path_or_buf, "w", newline="") as fh:
                    fh.write(text)
        return text

    def stats_json(self) -> str:
        return dumps_17(self.stats.to_dict())


def _row(t, y, yp, h, acc):
    return [format(t, ".17g")] + [format(v, ".17g") for v in y] + \
        [format(v, ".17g") for v in yp] + [format(h, ".17g"), acc]


# --------------------------------------------------------------------------
# Building blocks
# --------------------------------------------------------------------------

def _evaluate(problem, t, h, c, Y, Yp):
    F = np.empty_like(Y)
    for i in range(c.size):
        F[i] = problem.f(t + c[i] * h, Y[i], Yp[i])
    return F


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteState("integration produced a non-finite value")


def _advance(state, b, d, F=None):
    """End-of-step ``(y, y')`` from the cached stage derivatives."""
    F = state.F if F is None else F
    h = state.h
    y = state.y + h * state.yp + (h * h) * (b @ F)
    yp = state.yp + h * (d @ F)
    return y, yp


def _predict_stages(c, y, yp, h, A, B, F):
    Y = y[None, :] + h * np.outer(c, yp) + (h * h) * (A @ F)
    Yp = yp[None, :] + h * (B @ F)
    return Y, Yp


def _start_tolerance(scheme, h0, y0, yp0):
    scale = max(1.0, float(np.max(np.abs(y0))), float(np.max(np.abs(yp0))))
    return max(1e-14 * scale, 0.01 * h0 ** (scheme.s + 2))


def _start(problem, t0, y0, yp0, h0, scheme, evaluate=True):
    counter = [0]

    def f(t, y, yp):
        counter[0] += 1
        return problem.f(t, y, yp)

    counted = replace(problem, rhs=f)
    tol = _start_tolerance(scheme, h0, y0, yp0)
    targets = [t0 + ci * h0 for ci in scheme.c]
    try:
        res = rk_reference(counted, t0, y0, yp0, targets, tol=tol)
    except ToleranceUnreachable as exc:
        raise OracleFailure(f"starting values not obtainable to {tol:.3g}: {exc}") from exc
    Y = np.array([v[1] for v in res.values])
    Yp = np.array([v[2] for v in res.values])
    # nodes at 0 reproduce the initial data exactly
    Y[scheme.c == 0.0] = y0
    Yp[scheme.c == 0.0] = yp0
    F = _evaluate(problem, t0, h0, scheme.c, Y, Yp) if evaluate else None
    _check_finite(Y, Yp)
    state = StepState(float(t0), float(h0), y0.copy(), yp0.copy(), Y, Yp, F)
    return state, counter[0]


def start(problem, t0, y0, yp0, h0, scheme: CollocationScheme) -> StepState:
    """Initial state: stage values at ``t0 + c h0`` from the reference integrator.

    The returned state carries ``F_0`` (``s`` evaluations of ``f``).
    """
    y0 = check_vector(y0, dim=problem.dim, name="y0")
    yp0 = check_vector(yp0, dim=problem.dim, name="yp0")
    h0 = check_positive(h0, "h0")
    state, _ = _start(problem, float(t0), y0, yp0, h0, scheme)
    return state


def step_fixed(problem, state: StepState, scheme: CollocationScheme, h=None,
               evaluate: bool = True) -> StepState:
    """One step with the step size the stages of ``state`` were predicted for."""
    if h is not None and abs(h - state.h) > 1e-12 * max(abs(h), abs(state.h)):
        raise ValueError(f"fixed step h={h} differs from the state's step size {state.h}; "
                         "use step_variable to change the step size")
    return _step(problem, state, scheme, state.h, scheme.A, scheme.B, evaluate)


def step_variable(problem, state: StepState, scheme: CollocationScheme, h_next,
                  evaluate: bool = True, clamp=(0.5, 2.0)) -> StepState:
    """Advance over ``state.h`` and predict stages for a next step of size ``h_next``."""
    h_next = check_positive(h_next, "h_next")
    q = h_next / state.h
    lo, hi = clamp
    if not lo * (1 - 1e-12) <= q <= hi * (1 + 1e-12):
        raise RatioOutOfRange(f"step ratio {q:.6g} outside [{lo}, {hi}]")
    if q == 1.0:
        A, B = scheme.A, scheme.B
    else:
        A, B = derive_variable_coefficients(scheme, q)
    return _step(problem, state, scheme, h_next, A, B, evaluate)


def _step(problem, state, scheme, h_next, A, B, evaluate):
    if state.F is None:
        raise ValueError("state has no stage evaluations")
    y, yp = _advance(state, scheme.b, scheme.d)
    Y, Yp = _predict_stages(scheme.c, y, yp, h_next, A, B, state.F)
    _check_finite(y, yp, Y, Yp)
    t = state.t + state.h
    F = _evaluate(problem, t, h_next, scheme.c, Y, Yp) if evaluate else None
    if F is not None:
        _check_finite(F)
    return StepState(t, float(h_next), y, yp, Y, Yp, F)


def _restage(problem, prev: StepState, y, yp, scheme, h_new):
    """Stages at ``t + c h_new`` from the collocation polynomial of ``prev``'s step."""
    A, B = derive_variable_coefficients(scheme, h_new / prev.h)
    Y, Yp = _predict_stages(scheme.c, y, yp, h_new, A, B, prev.F)
    _check_finite(Y, Yp)
    t = prev.t + prev.h
    F = _evaluate(problem, t, h_new, scheme.c, Y, Yp)
    _check_finite(F)
    return StepState(t, float(h_new), y, yp, Y, Yp, F)


def embedded_advance(state: StepState, embedded: CollocationScheme):
    """``(y~, y~')`` of the embedded method from the parent's cached evaluations."""
    return _advance(state, embedded.b, embedded.d, state.F[list(embedded.parent_index)])


def estimate_lte(main, emb, mode: str = POSITION) -> float:
    """2-norm of ``y - y~`` (or of ``(y - y~, y' - y~')`` in the combined mode)."""
    try:
        mode = _LTE_ALIASES[str(mode).lower()]
    except KeyError:
        raise ValueError(f"unknown LTE mode {mode!r}") from None
    y, yp = (np.atleast_1d(np.asarray(v, dtype=float)) for v in main)
    ye, ype = (np.atleast_1d(np.asarray(v, dtype=float)) for v in emb)
    if y.shape != ye.shape or yp.shape != ype.shape or y.shape != yp.shape:
        raise DimensionMismatch("main and embedded solutions have different shapes")
    e = float(np.linalg.norm(y - ye))
    if mode == POSITION:
        return e
    return math.hypot(e, float(np.linalg.norm(yp - ype)))


def dense_eval(state: StepState, scheme: CollocationScheme, xi):
    """Continuous extension over the step starting at ``state``."""
    xi = check_xi(xi)
    if state.F is None:
        raise ValueError("state has no stage evaluations")
    bx, dx = dense_output_weights(scheme, xi)
    xh = xi * state.h
    y = state.y + xh * state.yp + (xh * xh) * (bx @ state.F)
    yp = state.yp + xh * (dx @ state.F)
    return y, yp


# --------------------------------------------------------------------------
# Drivers
# --------------------------------------------------------------------------

def integrate_fixed(problem, t0, tend, h, scheme: CollocationScheme) -> Trajectory:
    """Constant step integration on an exact grid ``t0 + n h``."""
    h = check_positive(h, "h")
    ratio = (tend - t0) / h
    n = int(round(ratio))
    if n < 1 or abs(n - ratio) > 1e-8:
        raise GridMismatch(f"(tend - t0)/h = {ratio} is not a positive integer")
    s = scheme.s
    state, start_nfe = _start(problem, float(t0), problem.y0.copy(), problem.yp0.copy(), h, scheme)
    stats = RunStats(nfe=s, start_nfe=start_nfe)
    states = [state]
    for i in range(n):
        last = i == n - 1
        state = _step(problem, state, scheme, h, scheme.A, scheme.B, evaluate=not last)
        if not last:
            stats.nfe += s
        stats.accepts += 1
        states.append(state)
    states[-1] = replace(states[-1], t=float(tend))
    return Trajectory(scheme, states, stats, problem_name=problem.name)


@dataclass(frozen=True)
class ControllerConfig:
    """Step-size controller settings.

    After an accepted step ``h_next = h * min(clamp_hi, max(clamp_lo,
    safety * (tol / LTE) ** (1 / (p_tilde + 1))))``; a rejected step is
    retried with half the step size.
    """

    tol: float
    safety: float = 0.8
    clamp_lo: float = 0.5
    clamp_hi: float = 2.0
    lte_mode: str = POSITION
    p_tilde: Optional[int] = None
    max_rejections: int = 40
    h0: Optional[float] = None

    def __post_init__(self):
        check_positive(self.tol, "tol")
        if not 0.0 < self.safety < 1.0:
            raise ValueError(f"safety must lie in (0, 1), got {self.safety}")
        if not 0.0 < self.clamp_lo <= 1.0 <= self.clamp_hi:
            raise ValueError("controller clamp must satisfy 0 < clamp_lo <= 1 <= clamp_hi")
        if str(self.lte_mode).lower() not in _LTE_ALIASES:
            raise ValueError(f"unknown LTE mode {self.lte_mode!r}")
        if self.h0 is not None:
            check_positive(self.h0, "h0")

    def factor(self, lte: float, p_tilde: int) -> float:
        if lte <= 0.0:
            return self.clamp_hi
        raw = self.safety * (self.tol / lte) ** (1.0 / (p_tilde + 1))
        return min(self.clamp_hi, max(self.clamp_lo, raw))


def initial_step(t0, tend, tol, p_tilde) -> float:
    span = tend - t0
    return min(max(span * tol ** (1.0 / (p_tilde + 1)), 1e-6), span / 10.0)


def _next_step(remaining, proposal):
    """Step toward ``tend`` that never leaves a sliver behind."""
    if remaining <= proposal * (1 + 1e-12):
        return remaining, True
    if remaining < 2.0 * proposal:
        return remaining / 2.0, False
    return proposal, False


def integrate_adaptive(problem, t0, tend, config: ControllerConfig, scheme: CollocationScheme,
                       embedded: CollocationScheme | None = None) -> Trajectory:
    """Variable step integration controlled by the embedded pair's LTE estimate."""
    if embedded is None:
        embedded = embedded_scheme(scheme)
    if embedded.parent_index is None:
        raise ValueError("embedded scheme must come from embedded_scheme(parent, indices)")
    t0, tend = float(t0), float(tend)
    if not tend > t0:
        raise ValueError("tend must exceed t0")
    p_tilde = config.p_tilde if config.p_tilde is not None else embedded.step_order
    s = scheme.s
    h = config.h0 if config.h0 is not None else initial_step(t0, tend, config.tol, p_tilde)
    h, lands = _next_step(tend - t0, h)

    state, start_nfe = _start(problem, t0, problem.y0.copy(), problem.yp0.copy(), h, scheme)
    stats = RunStats(nfe=s, start_nfe=start_nfe)
    traj = Trajectory(scheme, [], stats, embedded=embedded, problem_name=problem.name)
    prev = None          # accepted state preceding ``state``
    streak = 0

    while True:
        main = _advance(state, scheme.b, scheme.d)
        emb = embedded_advance(state, embedded)
        lte = estimate_lte(main, emb, config.lte_mode)
        if not np.isfinite(lte):
            raise NonFiniteState("non-finite local error estimate")

        if lte > config.tol:
            stats.rejects += 1
            streak += 1
            if streak > config.max_rejections:
                raise MaxRejections(f"{streak} consecutive rejections at t={state.t:.6g}")
            traj.rejected.append((state.t, state.h))
            h = state.h / 2.0
            lands = False
            if prev is None:
                state, n0 = _start(problem, t0, problem.y0.copy(), problem.yp0.copy(), h, scheme)
                stats.start_nfe += n0
            else:
                state = _restage(problem, prev, state.y, state.yp, scheme, h)
            stats.nfe += s
            continue

        streak = 0
        stats.accepts += 1
        traj.states.append(state)
        y_new, yp_new = main
        _check_finite(y_new, yp_new)
        if lands:
            traj.states.append(StepState(tend, state.h, y_new, yp_new, state.Y, state.Yp, None))
            break
        fac = config.factor(lte, p_tilde)
        traj.factors.append(fac)
        t_new = state.t + state.h
        h_next, lands = _next_step(tend - t_new, state.h * fac)
        A, B = derive_variable_coefficients(scheme, h_next / state.h)
        Y, Yp = _predict_stages(scheme.c, y_new, yp_new, h_next, A, B, state.F)
        _check_finite(Y, Yp)
        F = _evaluate(problem, t_new, h_next, scheme.c, Y, Yp)
        _check_finite(F)
        stats.nfe += s
        prev = state
        state = StepState(t_new, h_next, y_new, yp_new, Y, Yp, F)

    return traj
