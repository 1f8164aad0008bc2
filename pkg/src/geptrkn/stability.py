"""Linear stability of GEPTRKN methods on ``y'' = mu y' + lambda y``.

With ``z = lambda h^2`` and ``nu = mu h`` one step maps
``(Y_n, h Y'_n, y_n, h y'_n)`` linearly through the amplification matrix
``M(z, nu)``; the stability region is where its spectral radius is <= 1.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .collocation import CollocationScheme, dumps_17
from .exceptions import NoConvergence

MAX_DIM = 64
# roundoff allowance when classifying rho <= 1 (the z-axis is marginal: |root| == 1)
RHO_SLACK = 1e-10


def stability_matrix(scheme: CollocationScheme, z: float, nu: float) -> np.ndarray:
    """The ``(2s+2) x (2s+2)`` amplification matrix ``M(z, nu)``."""
    s = scheme.s
    e = np.ones(s)
    c, b, d = scheme.c, scheme.b, scheme.d
    P = np.outer(e, b) + np.outer(c, d) + scheme.A
    Q = np.outer(e, d) + scheme.B
    M = np.zeros((2 * s + 2, 2 * s + 2))
    M[:s, :s] = z * P
    M[:s, s:2 * s] = nu * P
    M[:s, 2 * s] = e
    M[:s, 2 * s + 1] = e + c
    M[s:2 * s, :s] = z * Q
    M[s:2 * s, s:2 * s] = nu * Q
    M[s:2 * s, 2 * s + 1] = e
    M[2 * s, :s] = z * b
    M[2 * s, s:2 * s] = nu * b
    M[2 * s, 2 * s] = 1.0
    M[2 * s, 2 * s + 1] = 1.0
    M[2 * s + 1, :s] = z * d
    M[2 * s + 1, s:2 * s] = nu * d
    M[2 * s + 1, 2 * s + 1] = 1.0
    return M


def _check_square(M):
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {M.shape}")
    if M.shape[-1] > MAX_DIM:
        raise ValueError(f"matrix dimension {M.shape[-1]} exceeds {MAX_DIM}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def spectral_radius(M) -> float | np.ndarray:
    """Largest eigenvalue modulus; also accepts a stack of matrices ``(..., n, n)``."""
    M = _check_square(M)
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigenvalue iteration failed: {exc}") from exc
    rho = np.max(np.abs(ev), axis=-1)
    return float(rho) if np.ndim(rho) == 0 else rho


def charpoly(M) -> np.ndarray:
    """Characteristic polynomial coefficients (highest degree first), Faddeev-LeVerrier."""
    M = _check_square(M)
    n = M.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    Mk = np.zeros_like(M)
    I = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ (Mk + coeffs[k - 1] * I)
        coeffs[k] = -np.trace(Mk) / k
    return coeffs


def spectral_radius_charpoly(M) -> float:
    """Spectral radius from the companion matrix of the characteristic polynomial.

    An independent route for small matrices; it loses accuracy quickly with
    size and is only meant for cross-checking ``spectral_radius``.
    """
    p = charpoly(M)
    n = p.size - 1
    C = np.zeros((n, n))
    C[0, :] = -p[1:]
    C[1:, :-1] = np.eye(n - 1)
    return float(np.max(np.abs(np.linalg.eigvals(C)))) if n else 0.0


@dataclass(frozen=True)
class StabilityGrid:
    """Spectral radius sampled on ``z_axis x nu_axis``; ``rho[i, j]`` is at ``(z_i, nu_j)``."""

    z_axis: np.ndarray
    nu_axis: np.ndarray
    rho: np.ndarray
    scheme_id: str = ""

    @property
    def origin_mask(self) -> np.ndarray:
        return (self.z_axis[:, None] == 0.0) & (self.nu_axis[None, :] == 0.0)

    @property
    def stable(self) -> np.ndarray:
        """Membership in the stability region (the origin is excluded by definition)."""
        with np.errstate(invalid="ignore"):
            return (self.rho <= 1.0 + RHO_SLACK) & ~self.origin_mask

    @property
    def failed(self) -> int:
        return int(np.count_nonzero(np.isnan(self.rho)))

    @property
    def fraction_stable(self) -> float:
        cells = self.rho.size - int(np.count_nonzero(self.origin_mask))
        return float(np.count_nonzero(self.stable)) / cells if cells else 0.0

    @property
    def max_rho(self) -> float:
        return float(np.nanmax(self.rho))

    def summary(self) -> dict:
        return {
            "scheme_id": self.scheme_id,
            "fraction_stable": self.fraction_stable,
            "max_rho": self.max_rho,
            "grid_spec": {
                "z_min": float(self.z_axis.min()), "z_max": float(self.z_axis.max()),
                "nu_min": float(self.nu_axis.min()), "nu_max": float(self.nu_axis.max()),
                "n_z": int(self.z_axis.size), "n_nu": int(self.nu_axis.size),
            },
            "failed_cells": self.failed,
        }

    def summary_json(self) -> str:
        return dumps_17(self.summary())

    def to_csv(self, path_or_buf=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["z", "nu", "rho"])
        for i, z in enumerate(self.z_axis):
            for j, nu in enumerate(self.nu_axis):
                w.writerow([format(z, ".17g"), format(nu, ".17g"), format(self.rho[i, j], ".17g")])
        text = buf.getvalue()
        if path_or_buf is not None:
            if hasattr(path_or_buf, "write"):
                path_or_buf.write(text)
            else:
                with open(path_or_buf, "w", newline="") as fh:
                    fh.write(text)
        return text


def scan_region(scheme: CollocationScheme, z_min: float = -10.0, nu_min: float = -10.0,
                n_z: int = 400, n_nu: int = 400) -> StabilityGrid:
    """Spectral radius of ``M(z, nu)`` on a uniform lattice over ``[z_min, 0] x [nu_min, 0]``.

    Cells whose eigenvalue computation fails are stored as NaN.
    """
    if n_z < 2 or n_nu < 2:
        raise ValueError("grid needs at least 2 points per axis")
    if z_min > 0 or nu_min > 0:
        raise ValueError("z_min and nu_min must be <= 0")
    z_axis = np.linspace(z_min, 0.0, n_z)
    nu_axis = np.linspace(nu_min, 0.0, n_nu)
    # M is affine in (z, nu): M = M0 + z Mz + nu Mnu
    M0 = stability_matrix(scheme, 0.0, 0.0)
    Mz = stability_matrix(scheme, 1.0, 0.0) - M0
    Mnu = stability_matrix(scheme, 0.0, 1.0) - M0
    rho = np.empty((n_z, n_nu))
    for i, z in enumerate(z_axis):
        row = (M0 + z * Mz)[None, :, :] + nu_axis[:, None, None] * Mnu[None, :, :]
        try:
            rho[i] = spectral_radius(row)
        except (NoConvergence, ValueError):
            for j in range(n_nu):
                try:
                    rho[i, j] = spectral_radius(row[j])
                except (NoConvergence, ValueError):
                    rho[i, j] = np.nan
    return StabilityGrid(z_axis, nu_axis, rho, scheme.name or "custom")
