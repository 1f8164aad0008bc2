"""Coefficient derivation for collocation GEPTRKN methods.

Every coefficient object of an ``s``-stage method follows from the node
vector ``c`` through small Vandermonde-type linear systems:

* ``b, d``  -- weights advancing ``y`` and ``y'`` over one step,
* ``A, B``  -- stage predictors for the next step (fixed step size),
* ``A(q), B(q)`` -- the same predictors after a step-size change ``q = h_new / h_old``,
* ``b(xi), d(xi)`` -- continuous extension weights on ``[0, 1]``.

Superconvergence of a node set is decided from three integrals of the
node polynomial ``prod_i (x - c_i)`` which are evaluated exactly in rational
arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .exceptions import IllConditioned, UnknownMethod
from .validation import check_nodes, check_ratio, check_xi

TOL_ORTH = 1e-10
MAX_SOLVE_RESIDUAL = 1e-8

# Node sets of the four superconvergent methods and the 5-stage geptrkn54.
NODE_SETS = {
    "geptrkn5": (0.182647322580547, 0.742402187612118, 1.474950489807336),
    "geptrkn6": (0.138502716885383, 0.605842632479162, 1.0, 1.588987983968791),
    "geptrkn7": (0.0, 0.253662773062501, 0.693421021629012, 1.0, 1.624344776737066),
    "geptrkn8": (0.0, 0.160867438838146, 0.475690327561694, 0.809991289295481, 1.0,
                 1.664562055415935),
    "geptrkn54": (0.14717733121747, 0.66145426898123, 1.28305172479853,
                  1.81537781109684, 2.25988885044222),
}

# Adaptive pairs: name -> fixed-step parent (embedded on the first s - 1 nodes).
PAIRS = {
    "geptrkn52": "geptrkn5",
    "geptrkn63": "geptrkn6",
    "geptrkn74": "geptrkn7",
    "geptrkn85": "geptrkn8",
    "geptrkn54": "geptrkn54",
}


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _powers(x, n):
    """Columns ``x**0 .. x**(n-1)`` with ``0**0 == 1``."""
    return np.power.outer(np.asarray(x, dtype=float), np.arange(n))


def _check_solution(M, X, rhs):
    res = np.max(np.abs(M @ X - rhs)) if X.size else 0.0
    if not np.isfinite(res) or res > MAX_SOLVE_RESIDUAL:
        raise IllConditioned(f"coefficient solve residual {res:.3g} exceeds {MAX_SOLVE_RESIDUAL:g}")
    return X


def _solve(M, rhs):
    """LU solve of ``M @ X = rhs`` with a residual guard."""
    try:
        X = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned(str(exc)) from exc
    return _check_solution(M, X, rhs)


def _solve_exact(M, rhs):
    """Gauss-Jordan elimination over ``Fraction`` entries, rounded once to float.

    ``M`` is ``n x n`` and ``rhs`` is ``n x m`` (nested lists).  The float
    nodes are exact binary fractions, so the result is the correctly rounded
    solution of the floating point system.
    """
    n = len(M)
    rows = [list(M[i]) + list(rhs[i]) for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if piv is None:
            raise IllConditioned("singular coefficient system")
        rows[col], rows[piv] = rows[piv], rows[col]
        p = rows[col][col]
        rows[col] = [x / p for x in rows[col]]
        for r in range(n):
            f = rows[r][col]
            if r != col and f != 0:
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[col])]
    return np.array([[float(x) for x in row[n:]] for row in rows], dtype=float).reshape(n, -1)


# --------------------------------------------------------------------------
# Node polynomial and orthogonality integrals
# --------------------------------------------------------------------------

def _node_polynomial_exact(c):
    p = [Fraction(1)]
    for ci in c:
        ci = Fraction(float(ci))
        q = [Fraction(0)] * (len(p) + 1)
        for j, a in enumerate(p):
            q[j + 1] += a
            q[j] -= ci * a
        p = q
    return p


def expand_node_polynomial(c) -> np.ndarray:
    """Monomial coefficients (constant first) of ``prod_i (x - c_i)``.

    >>> expand_node_polynomial([1.0, 2.0])
    array([ 2., -3.,  1.])
    """
    c = check_nodes(c)
    return np.array([float(a) for a in _node_polynomial_exact(c)])


@dataclass(frozen=True)
class OrthogonalityReport:
    """Orthogonality integrals of the node polynomial ``P``.

    ``r0 = int_0^1 P``, ``r1 = int_0^1 x P`` and
    ``rD = int_0^1 int_0^{1+t} P(x) dx dt``.
    """

    s: int
    r0: float
    r1: float
    rD: float
    satisfied_order: int
    tol: float = TOL_ORTH

    @property
    def max_residual(self) -> float:
        return max(abs(self.r0), abs(self.r1), abs(self.rD))


def orthogonality_residuals(c, tol: float = TOL_ORTH) -> OrthogonalityReport:
    c = check_nodes(c)
    s = c.size
    p = _node_polynomial_exact(c)
    r0 = sum(a / (j + 1) for j, a in enumerate(p))
    r1 = sum(a / (j + 2) for j, a in enumerate(p))
    # int_0^1 (1+t)^(j+1)/(j+1) dt = (2^(j+2) - 1) / ((j+1)(j+2))
    rD = sum(a * (2 ** (j + 2) - 1) / ((j + 1) * (j + 2)) for j, a in enumerate(p))
    r0, r1, rD = float(r0), float(r1), float(rD)
    if max(abs(r0), abs(r1), abs(rD)) <= tol:
        order = s + 2
    elif abs(r0) <= tol:
        order = s + 1
    else:
        order = s
    return OrthogonalityReport(s=s, r0=r0, r1=r1, rD=rD, satisfied_order=order, tol=tol)


# --------------------------------------------------------------------------
# Schemes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CollocationScheme:
    """Coefficients ``(c, A, B, b, d)`` of one collocation GEPTRKN method.

    ``parent_index`` is set on embedded schemes: ``c[i] == parent.c[parent_index[i]]``,
    so the embedded solution reuses the parent's stage evaluations.
    """

    c: np.ndarray
    A: np.ndarray
    B: np.ndarray
    b: np.ndarray
    d: np.ndarray
    step_order: int
    name: str | None = None
    parent_index: tuple | None = None
    # W Diag(q^m) Gamma V^-1 factors of A(q), B(q); see variable_coefficients
    _WA: np.ndarray = field(default=None, repr=False, compare=False)
    _GA: np.ndarray = field(default=None, repr=False, compare=False)
    _WB: np.ndarray = field(default=None, repr=False, compare=False)
    _GB: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def s(self) -> int:
        return self.c.size

    @property
    def stage_order(self) -> int:
        return self.s

    def residuals(self) -> dict:
        """Largest absolute defect of each defining identity family."""
        return coefficient_residuals(self)

    def variable_coefficients(self, q):
        return derive_variable_coefficients(self, q)

    def dense_weights(self, xi):
        return dense_output_weights(self, xi)

    def embedded(self, indices=None):
        return embedded_scheme(self, indices)

    def to_dict(self) -> dict:
        out = {
            "s": self.s,
            "c": self.c.tolist(),
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "b": self.b.tolist(),
            "d": self.d.tolist(),
            "step_order": self.step_order,
        }
        if self.name is not None:
            out["name"] = self.name
        return out

    def to_json(self) -> str:
        return dumps_17(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "CollocationScheme":
        """Rebuild a scheme from serialized coefficients (no re-derivation)."""
        c = check_nodes(data["c"])
        A, B = np.asarray(data["A"], float), np.asarray(data["B"], float)
        b, d = np.asarray(data["b"], float), np.asarray(data["d"], float)
        s = c.size
        if A.shape != (s, s) or B.shape != (s, s) or b.shape != (s,) or d.shape != (s,):
            raise ValueError("serialized scheme has inconsistent shapes")
        return _build(c, A, B, b, d, int(data["step_order"]), data.get("name"))

    @classmethod
    def from_json(cls, text: str) -> "CollocationScheme":
        return cls.from_dict(json.loads(text))


def _fmt(x):
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not np.isfinite(x):
            return "null"
        return format(x, ".17g")
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps_17(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _fmt(obj)


def _gamma(s):
    """Fixed coefficient matrices of the B(q) and A(q) right-hand sides.

    Column ``i`` (1-based) of the right-hand side of the B(q) system is
    ``sum_{k=1}^{i} C(i,k)/i * c^k q^(k-1)`` and of the A(q) system
    ``sum_{k=2}^{i+1} C(i+1,k)/((i+1) i) * c^k q^(k-2)``; both are a fixed
    matrix times ``Diag(1, q, ..., q^(s-1))`` times these coefficients.
    """
    gB = [[Fraction(0)] * s for _ in range(s)]
    gA = [[Fraction(0)] * s for _ in range(s)]
    for i in range(1, s + 1):
        for m in range(i):
            gB[m][i - 1] = Fraction(comb(i, m + 1), i)
            gA[m][i - 1] = Fraction(comb(i + 1, m + 2), (i + 1) * i)
    return gA, gB


@lru_cache(maxsize=256)
def _exact_coefficients(c: tuple):
    """``b, d, A, B`` and the factors ``Gamma V^-1`` from exact rational solves."""
    s = len(c)
    cf = [Fraction(x) for x in c]
    k = range(s)
    # b, d and X = Gamma V^-1 share the matrix V^T (X V = Gamma <=> V^T X^T = Gamma^T)
    VT = [[ci ** i for ci in cf] for i in k]
    gA, gB = _gamma(s)
    rhs = [[Fraction(1, (i + 2) * (i + 1)), Fraction(1, i + 1)]
           + [row[i] for row in gA] + [row[i] for row in gB] for i in k]
    X = _solve_exact(VT, rhs)
    b, d, GA, GB = X[:, 0], X[:, 1], X[:, 2:2 + s].T, X[:, 2 + s:].T
    # A W = RA  <=>  W^T A^T = RA^T, with W the powers of c - 1
    WT = [[(ci - 1) ** i for ci in cf] for i in k]
    rhs = [[ci ** (i + 2) / ((i + 2) * (i + 1)) for ci in cf]
           + [ci ** (i + 1) / (i + 1) for ci in cf] for i in k]
    Y = _solve_exact(WT, rhs)
    A, B = Y[:, :s].T, Y[:, s:].T
    return b, d, A, B, GA, GB


def _variable_factors(c):
    """Precompute ``W`` and ``Gamma V^-1`` for both A(q) and B(q)."""
    s = c.size
    WB = np.power.outer(c, np.arange(1, s + 1))
    WA = np.power.outer(c, np.arange(2, s + 2))
    *_, GA, GB = _exact_coefficients(tuple(float(x) for x in c))
    return WA, GA, WB, GB


def _build(c, A, B, b, d, step_order, name=None, parent_index=None):
    WA, GA, WB, GB = _variable_factors(c)
    return CollocationScheme(
        c=_readonly(c), A=_readonly(A), B=_readonly(B), b=_readonly(b), d=_readonly(d),
        step_order=step_order, name=name, parent_index=parent_index,
        _WA=_readonly(WA), _GA=_readonly(GA), _WB=_readonly(WB), _GB=_readonly(GB),
    )


def derive_coefficients(c, name: str | None = None) -> CollocationScheme:
    """Solve the collocation conditions for ``(A, B, b, d)`` given nodes ``c``.

    ``b, d`` come from the Vandermonde system in powers of ``c`` and ``A, B``
    from the one in powers of ``c - 1``.  Both are solved in rational
    arithmetic and rounded once, since the systems are badly conditioned for
    six or more nodes.  The step order is read off the orthogonality
    integrals of the nodes.
    """
    c = check_nodes(c)
    s = c.size
    k = np.arange(s)
    V = _powers(c, s)
    W = _powers(c - 1.0, s)
    b, d, A, B, _, _ = _exact_coefficients(tuple(float(x) for x in c))
    _check_solution(V.T, np.stack([b, d], axis=1),
                    np.stack([1.0 / ((k + 2) * (k + 1)), 1.0 / (k + 1)], axis=1))
    _check_solution(W.T, np.hstack([A.T, B.T]),
                    np.hstack([np.power.outer(c, k + 2).T / ((k + 2) * (k + 1))[:, None],
                               np.power.outer(c, k + 1).T / (k + 1)[:, None]]))

    order = orthogonality_residuals(c).satisfied_order
    return _build(c, A, B, b, d, order, name)


def coefficient_residuals(scheme: CollocationScheme) -> dict:
    c, s = scheme.c, scheme.s
    k = np.arange(s)
    V = _powers(c, s)
    W = _powers(c - 1.0, s)
    return {
        "b": float(np.max(np.abs((k + 2) * (k + 1) * (scheme.b @ V) - 1.0))),
        "d": float(np.max(np.abs((k + 1) * (scheme.d @ V) - 1.0))),
        "A": float(np.max(np.abs((k + 2) * (k + 1) * (scheme.A @ W) - np.power.outer(c, k + 2)))),
        "B": float(np.max(np.abs((k + 1) * (scheme.B @ W) - np.power.outer(c, k + 1)))),
    }


def derive_variable_coefficients(scheme: CollocationScheme, q):
    """Stage predictor matrices ``(A(q), B(q))`` for a step-size ratio ``q``.

    Uses the diagonal-scaling factorization, which is a polynomial in ``q``
    and stays accurate for small ratios (the direct right-hand sides suffer
    cancellation there).
    """
    q = check_ratio(q)
    scale = q ** np.arange(scheme.s)
    Aq = (scheme._WA * scale) @ scheme._GA
    Bq = (scheme._WB * scale) @ scheme._GB
    return Aq, Bq


def variable_coefficients_direct(scheme: CollocationScheme, q):
    """Direct solve of the variable-step conditions; cross-check for the factorization.

    The right-hand sides ``((1 + c q)^k - 1 - k c q) / (q^2 k (k - 1))`` cancel
    badly for small ``q`` in floating point, so they are formed exactly.
    """
    q = Fraction(float(check_ratio(q)))
    c, s = scheme.c, scheme.s
    cf = [Fraction(float(x)) for x in c]
    VT = [[ci ** i for ci in cf] for i in range(s)]
    rhs = []
    for j in range(s):
        kk = j + 2
        rhs.append([((1 + ci * q) ** kk - 1 - kk * ci * q) / (q * q * kk * (kk - 1)) for ci in cf]
                   + [((1 + ci * q) ** (j + 1) - 1) / (q * (j + 1)) for ci in cf])
    X = _solve_exact(VT, rhs)
    return X[:, :s].T.copy(), X[:, s:].T.copy()


def dense_output_weights(scheme: CollocationScheme, xi):
    """Continuous-extension weights ``(b(xi), d(xi))`` for ``xi`` in ``[0, 1]``."""
    xi = check_xi(xi)
    s = scheme.s
    m = np.arange(s)
    V = _powers(scheme.c, s)
    xim = xi ** m  # 0**0 == 1
    rhs = np.stack([xim / ((m + 1) * (m + 2)), xim / (m + 1)], axis=1)
    w = _solve(V.T, rhs)
    return w[:, 0], w[:, 1]


def embedded_scheme(scheme: CollocationScheme, indices=None) -> CollocationScheme:
    """Scheme on a strict subset of the parent's nodes (default: first ``s - 1``)."""
    s = scheme.s
    if indices is None:
        indices = range(s - 1)
    indices = tuple(int(i) for i in indices)
    if not 1 <= len(indices) < s:
        raise ValueError(f"embedded scheme needs between 1 and {s - 1} stages, got {len(indices)}")
    if len(set(indices)) != len(indices) or min(indices) < 0 or max(indices) >= s:
        raise ValueError(f"invalid embedded stage indices {indices} for s={s}")
    sub = derive_coefficients(scheme.c[list(indices)])
    name = f"{scheme.name}~{len(indices)}" if scheme.name else None
    return _build(sub.c, sub.A, sub.B, sub.b, sub.d, sub.step_order, name, indices)


def get_scheme(name: str) -> CollocationScheme:
    """Fixed-step scheme by method name (adaptive pair names resolve to their parent)."""
    key = PAIRS.get(name, name)
    if key not in NODE_SETS:
        raise UnknownMethod(f"unknown method {name!r}; known: {sorted(set(NODE_SETS) | set(PAIRS))}")
    return _cached_scheme(key)


_CACHE: dict = {}


def _cached_scheme(key):
    if key not in _CACHE:
        _CACHE[key] = derive_coefficients(NODE_SETS[key], name=key)
    return _CACHE[key]


def resolve_method(method) -> CollocationScheme:
    """Accept a method name, a comma separated node list or a node sequence."""
    if isinstance(method, CollocationScheme):
        return method
    if isinstance(method, str):
        text = method.strip()
        if text.startswith("custom"):
            text = text[len("custom"):].strip("():[] ")
        if text and (text[0].isdigit() or text[0] in "-+.["):
            nodes = [float(v) for v in text.strip("[]").replace(";", ",").split(",") if v.strip()]
            return derive_coefficients(nodes, name="custom")
        return get_scheme(text)
    return derive_coefficients(method, name="custom")
