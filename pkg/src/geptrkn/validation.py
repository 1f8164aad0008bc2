"""Input validation helpers shared by the public entry points."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import DimensionMismatch, NonDistinctNodes, NonPositiveRatio

MIN_NODE_GAP = 1e-12


def check_nodes(c) -> np.ndarray:
    """Return ``c`` as a read-only float vector of pairwise distinct nodes.

    Raises
    ------
    NonDistinctNodes
        If two nodes are closer than ``MIN_NODE_GAP``.
    ValueError
        If ``c`` is empty, not one-dimensional or not finite.
    """
    c = np.array(c, dtype=float)
    if c.ndim == 0:
        c = c.reshape(1)
    if c.ndim != 1:
        raise ValueError(f"nodes must be a 1-d sequence, got shape {c.shape}")
    if c.size == 0:
        raise ValueError("at least one collocation node is required")
    if not np.all(np.isfinite(c)):
        raise ValueError("collocation nodes must be finite")
    if c.size > 1:
        gap = np.min(np.diff(np.sort(c)))
        if gap <= MIN_NODE_GAP:
            raise NonDistinctNodes(f"collocation nodes are not distinct (min gap {gap:.3g})")
    c.setflags(write=False)
    return c


def check_vector(x, dim: int | None = None, name: str = "x") -> np.ndarray:
    """Coerce ``x`` to a 1-d float array, optionally of length ``dim``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-d, got shape {x.shape}")
    if dim is not None and x.size != dim:
        raise DimensionMismatch(f"{name} has length {x.size}, expected {dim}")
    return x


def check_positive(value, name: str, exc=ValueError) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise exc(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_ratio(q) -> float:
    return check_positive(q, "step ratio q", NonPositiveRatio)


def check_xi(xi) -> float:
    from .exceptions import OutOfRangeXi

    if not isinstance(xi, numbers.Real) or not (0.0 <= xi <= 1.0):
        raise OutOfRangeXi(f"dense output parameter must lie in [0, 1], got {xi!r}")
    return float(xi)
