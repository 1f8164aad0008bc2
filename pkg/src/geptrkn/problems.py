"""Benchmark second-order problems: LINE, TELE (telegraph equation) and VAND."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import UnknownProblem
from .validation import check_positive, check_vector


@dataclass(frozen=True)
class OdeProblem:
    """``y'' = rhs(t, y, y')`` on ``[t0, t_end]`` with ``y(t0) = y0``, ``y'(t0) = yp0``.

    ``exact``, when given, maps ``t`` to the pair ``(y(t), y'(t))``.
    """

    name: str
    rhs: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    t0: float
    t_end: float
    y0: np.ndarray
    yp0: np.ndarray
    exact: Optional[Callable[[float], tuple]] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        y0 = check_vector(self.y0, name="y0").copy()
        yp0 = check_vector(self.yp0, dim=y0.size, name="yp0").copy()
        y0.setflags(write=False)
        yp0.setflags(write=False)
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "yp0", yp0)

    @property
    def dim(self) -> int:
        return self.y0.size

    def f(self, t, y, yp) -> np.ndarray:
        return np.asarray(self.rhs(t, y, yp), dtype=float).reshape(self.dim)


def line_problem(c_damp: float = 2.0, lam: float = 2.0, t_end: float = 10.0) -> OdeProblem:
    """Forced damped oscillator ``y'' = -c y' - lam y - 2 cos 2t - 4 sin 2t``.

    The closed form ``exp(-t) cos t + cos 2t`` is attached only for
    ``c_damp == lam == 2``.
    """
    c_damp, lam = float(c_damp), float(lam)

    def rhs(t, y, yp):
        return -c_damp * yp - lam * y - 2.0 * np.cos(2.0 * t) - 4.0 * np.sin(2.0 * t)

    exact = None
    if c_damp == 2.0 and lam == 2.0:
        def exact(t):
            et = np.exp(-t)
            y = et * np.cos(t) + np.cos(2.0 * t)
            yp = -et * (np.cos(t) + np.sin(t)) - 2.0 * np.sin(2.0 * t)
            return np.atleast_1d(y), np.atleast_1d(yp)

    return OdeProblem("line", rhs, 0.0, float(t_end), [2.0], [-1.0], exact,
                      {"c_damp": c_damp, "lam": lam, "t_end": float(t_end)})


def chebyshev_points(n: int) -> np.ndarray:
    """The ``n + 1`` Chebyshev-Gauss-Lobatto points mapped to ``[0, 1]``, ascending."""
    j = np.arange(n + 1)
    # sin form keeps the points exactly symmetric about 1/2
    x = np.sin(np.pi * (n - 2 * j) / (2 * n))
    return (1.0 - x) / 2.0


def chebyshev_d1(n: int):
    """First-derivative matrix on the Chebyshev points of ``[-1, 1]`` (descending)."""
    j = np.arange(n + 1)
    x = np.sin(np.pi * (n - 2 * j) / (2 * n))
    w = np.where((j == 0) | (j == n), 2.0, 1.0) * (-1.0) ** j
    dX = x[:, None] - x[None, :]
    D = np.outer(w, 1.0 / w) / (dX + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def chebyshev_d2(n: int):
    """Second-derivative matrix for homogeneous Dirichlet data on ``[0, 1]``.

    Returns the ``n + 1`` ascending grid points and the ``(n-1) x (n-1)``
    interior block of the spectral second-derivative matrix.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    _, D = chebyshev_d1(n)
    # (x, descending on [-1,1]) -> (1 - x)/2 ascending on [0,1]; d2/dxi2 = 4 d2/dx2
    D2 = 4.0 * (D @ D)
    return chebyshev_points(n), D2[1:-1, 1:-1].copy()


def tele_problem(a: float = 0.01, gamma: float = 1.0, kappa: float = 0.0, n: int = 11,
                 t_end: float = 10.0, ut0=None) -> OdeProblem:
    """Telegraph equation ``u_tt = -gamma u_t - kappa u + a^2 u_xx`` by Chebyshev collocation.

    ``u(x, 0) = sin(pi x)`` with zero boundary values; ``ut0`` gives the initial
    velocity (callable of ``x`` or array over interior points, default zero).
    """
    check_positive(a, "a")
    x, D2 = chebyshev_d2(n)
    xi = x[1:-1]
    L = (a * a) * D2
    gamma, kappa = float(gamma), float(kappa)

    def rhs(t, u, up):
        return -gamma * up - kappa * u + L @ u

    u0 = np.sin(np.pi * xi)
    if ut0 is None:
        v0 = np.zeros_like(xi)
    elif callable(ut0):
        v0 = np.asarray(ut0(xi), dtype=float)
    else:
        v0 = check_vector(ut0, dim=xi.size, name="ut0")
    return OdeProblem("tele", rhs, 0.0, float(t_end), u0, v0, None,
                      {"a": float(a), "gamma": gamma, "kappa": kappa, "n": int(n),
                       "t_end": float(t_end), "x": xi})


def vand_problem(mu: float = 1.0, t_end: float = 10.0) -> OdeProblem:
    """Van der Pol oscillator ``y'' = mu (1 - y^2) y' - y``, ``y(0) = 2``, ``y'(0) = 0``."""
    mu = check_positive(mu, "mu")

    def rhs(t, y, yp):
        return mu * (1.0 - y * y) * yp - y

    return OdeProblem("vand", rhs, 0.0, float(t_end), [2.0], [0.0], None,
                      {"mu": mu, "t_end": float(t_end)})


PROBLEMS = {
    "line": line_problem,
    "tele": tele_problem,
    "vand": vand_problem,
}


def make_problem(name: str, params=None, **overrides) -> OdeProblem:
    """Build a registered problem; ``params`` may be a dict or a JSON object string."""
    try:
        factory = PROBLEMS[name.lower()]
    except KeyError:
        raise UnknownProblem(f"unknown problem {name!r}; known: {sorted(PROBLEMS)}") from None
    if isinstance(params, str):
        params = json.loads(params)
    kwargs = dict(params or {})
    kwargs.update(overrides)
    return factory(**kwargs)
