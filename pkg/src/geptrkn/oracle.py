"""Reference solutions from a classical explicit Runge-Kutta method.

The second-order problem is rewritten as the first-order system
``(y, y')' = (y', f(t, y, y'))`` and integrated with Butcher's six-stage
fifth-order method on uniform substeps.  Accuracy is certified by Richardson
comparison of two substep sizes; the substep size is halved until the
estimate meets the requested tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ToleranceUnreachable
from .validation import check_vector

_C = np.array([0.0, 0.25, 0.25, 0.5, 0.75, 1.0])
_A = (
    (),
    (1 / 4,),
    (1 / 8, 1 / 8),
    (0.0, -1 / 2, 1.0),
    (3 / 16, 0.0, 0.0, 9 / 16),
    (-3 / 7, 2 / 7, 12 / 7, -12 / 7, 8 / 7),
)
_B = np.array([7.0, 0.0, 32.0, 12.0, 32.0, 7.0]) / 90.0
ORDER = 5
MAX_HALVINGS = 30


@dataclass(frozen=True)
class OracleResult:
    values: list          # [(t, y, yp), ...] in the order the targets were given
    est_error: float
    substeps_used: int


def _rk5_step(f, t, y, yp, h):
    ky, kp = [], []
    for i in range(6):
        yi, ypi = y, yp
        for j, a in enumerate(_A[i]):
            if a:
                yi = yi + (h * a) * ky[j]
                ypi = ypi + (h * a) * kp[j]
        ky.append(ypi)
        kp.append(f(t + _C[i] * h, yi, ypi))
    dy = sum(bi * k for bi, k in zip(_B, ky) if bi)
    dp = sum(bi * k for bi, k in zip(_B, kp) if bi)
    return y + h * dy, yp + h * dp


def _sweep(f, t_from, y, yp, targets, hmax):
    """Integrate through ``targets`` (one direction) with substeps <= ``hmax``."""
    out, n_total = [], 0
    t, cy, cp = t_from, y, yp
    for tt in targets:
        span = tt - t
        if span != 0.0:
            n = max(1, math.ceil(abs(span) / hmax - 1e-9))
            h = span / n
            for i in range(n):
                # land exactly on the target at the last substep
                t_next = tt if i == n - 1 else t + h
                cy, cp = _rk5_step(f, t, cy, cp, t_next - t)
                t = t_next
            n_total += n
        out.append((tt, cy.copy(), cp.copy()))
    return out, n_total


def _run(f, t_from, y, yp, fwd, bwd, hmax):
    fo, nf = _sweep(f, t_from, y, yp, fwd, hmax)
    bo, nb = _sweep(f, t_from, y, yp, bwd, hmax)
    return {t: (v, p) for t, v, p in fo + bo}, nf + nb


def rk_reference(problem, t_from, y, yp, targets, tol: float = 1e-12,
                 initial_substeps: int = 8) -> OracleResult:
    """Values of ``(y, y')`` at each target time, accurate to about ``tol``.

    Targets before ``t_from`` are reached by integrating backward.
    """
    f = problem.f
    y = check_vector(y, dim=problem.dim, name="y")
    yp = check_vector(yp, dim=problem.dim, name="yp")
    targets = [float(t) for t in targets]
    t_from = float(t_from)
    fwd = sorted(t for t in set(targets) if t >= t_from)
    bwd = sorted((t for t in set(targets) if t < t_from), reverse=True)
    span = max([abs(t - t_from) for t in targets] + [0.0])
    if span == 0.0:
        return OracleResult([(t, y.copy(), yp.copy()) for t in targets], 0.0, 0)

    hmax = span / initial_substeps
    # coarse substeps may overflow on nonlinear problems; halving continues through that
    with np.errstate(over="ignore", invalid="ignore"):
        coarse, _ = _run(f, t_from, y, yp, fwd, bwd, hmax)
        est = math.inf
        for _ in range(MAX_HALVINGS):
            hmax /= 2.0
            fine, nsub = _run(f, t_from, y, yp, fwd, bwd, hmax)
            diff = max(max(np.max(np.abs(fine[t][0] - coarse[t][0])),
                           np.max(np.abs(fine[t][1] - coarse[t][1]))) for t in fine)
            est = diff / (2 ** ORDER - 1)
            if est <= tol:
                return OracleResult([(t, *fine[t]) for t in targets], float(est), nsub)
            coarse = fine
    raise ToleranceUnreachable(
        f"reference integration did not reach tol={tol:g} (last estimate {est:.3g})")


def evaluate_exact(problem, t):
    """Closed-form ``(y, y')`` at ``t`` when the problem carries one, else ``None``."""
    if problem.exact is None:
        return None
    y, yp = problem.exact(t)
    return np.atleast_1d(np.asarray(y, dtype=float)), np.atleast_1d(np.asarray(yp, dtype=float))
