"""Shared helpers for the test suite."""

import numpy as np

from geptrkn.integrator import StepState


def exact_state(problem, scheme, h, t0=0.0, exact=None):
    """Step state at ``t0`` whose stage values come from a closed-form solution."""
    exact = exact or problem.exact
    y, yp = (np.atleast_1d(np.asarray(v, dtype=float)) for v in exact(t0))
    Y = np.array([np.atleast_1d(exact(t0 + ci * h)[0]) for ci in scheme.c], dtype=float)
    Yp = np.array([np.atleast_1d(exact(t0 + ci * h)[1]) for ci in scheme.c], dtype=float)
    F = np.array([problem.f(t0 + ci * h, Y[i], Yp[i]) for i, ci in enumerate(scheme.c)])
    return StepState(float(t0), float(h), y, yp, Y, Yp, F)


def slope(x, y):
    """Least-squares slope of log10(y) against log10(x)."""
    return float(np.polyfit(np.log10(x), np.log10(y), 1)[0])


def polynomial_problem(coeffs, t_end=1.0):
    """``y'' = p(t)`` with ``p`` given by ascending ``coeffs``, plus its exact solution.

    ``y(0) = 1``, ``y'(0) = -0.5``.
    """
    from geptrkn.problems import OdeProblem

    p = np.polynomial.Polynomial(coeffs)
    yp_poly = p.integ(k=-0.5)
    y_poly = yp_poly.integ(k=1.0)

    def rhs(t, y, yp):
        return np.atleast_1d(p(t))

    def exact(t):
        return np.atleast_1d(y_poly(t)), np.atleast_1d(yp_poly(t))

    return OdeProblem("poly", rhs, 0.0, t_end, [1.0], [-0.5], exact)
