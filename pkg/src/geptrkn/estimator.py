"""scikit-learn style front end for the GEPTRKN integrators."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .collocation import embedded_scheme, resolve_method
from .integrator import ControllerConfig, integrate_adaptive, integrate_fixed
from .problems import OdeProblem


class GEPTRKNIntegrator(BaseEstimator):
    """Integrate an :class:`OdeProblem` with a GEPTRKN method.

    ``fit`` runs the integration over ``[problem.t0, problem.t_end]``;
    ``predict`` evaluates the continuous extension at arbitrary times.

    Parameters
    ----------
    method : str or sequence of float
        Named method (``"geptrkn5"`` ... ``"geptrkn8"``, ``"geptrkn54"``, pair
        names such as ``"geptrkn52"``) or explicit collocation nodes.
    mode : {"fixed", "adaptive"}
    h : float
        Step size for ``mode="fixed"``.
    tol : float
        Local error tolerance for ``mode="adaptive"``.
    embedded_indices : sequence of int, optional
        Parent stages used by the embedded method (default: first ``s - 1``).
    lte_mode : {"position", "position_and_derivative"}
    safety, h0 :
        Controller safety factor and optional initial step.

    Attributes
    ----------
    scheme_, embedded_ : CollocationScheme
    trajectory_ : Trajectory
    stats_ : RunStats
    n_features_in_ : int
        Dimension of the integrated system.
    """

    def __init__(self, method="geptrkn5", mode="fixed", h=None, tol=1e-6, embedded_indices=None,
                 lte_mode="position", safety=0.8, h0=None):
        self.method = method
        self.mode = mode
        self.h = h
        self.tol = tol
        self.embedded_indices = embedded_indices
        self.lte_mode = lte_mode
        self.safety = safety
        self.h0 = h0

    def fit(self, problem, y=None):
        if not isinstance(problem, OdeProblem):
            raise TypeError(f"fit expects an OdeProblem, got {type(problem).__name__}")
        scheme = resolve_method(self.method)
        if self.mode == "fixed":
            if self.h is None:
                raise ValueError("mode='fixed' requires a step size h")
            traj = integrate_fixed(problem, problem.t0, problem.t_end, self.h, scheme)
            self.embedded_ = None
        elif self.mode == "adaptive":
            emb = embedded_scheme(scheme, self.embedded_indices)
            config = ControllerConfig(tol=self.tol, safety=self.safety, lte_mode=self.lte_mode,
                                      h0=self.h0)
            traj = integrate_adaptive(problem, problem.t0, problem.t_end, config, scheme, emb)
            self.embedded_ = emb
        else:
            raise ValueError(f"mode must be 'fixed' or 'adaptive', got {self.mode!r}")
        self.scheme_ = scheme
        self.trajectory_ = traj
        self.stats_ = traj.stats
        self.n_features_in_ = problem.dim
        return self

    def _dense(self, t, which):
        check_is_fitted(self, "trajectory_")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if t.ndim != 1:
            raise ValueError("t must be a scalar or a 1-d array of times")
        return np.array([self.trajectory_.dense(ti)[which] for ti in t])

    def predict(self, t):
        """Solution values, shape ``(len(t), n_features_in_)``."""
        return self._dense(t, 0)

    def predict_derivative(self, t):
        return self._dense(t, 1)

    def score(self, problem, y=None):
        """Negative max grid error against the problem's closed form (higher is better)."""
        check_is_fitted(self, "trajectory_")
        return -self.trajectory_.max_error(problem)
