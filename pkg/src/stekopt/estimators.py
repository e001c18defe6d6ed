"""scikit-learn style wrappers around the smoothing and solver APIs.

``SteklovSmoother`` is a transformer: ``fit`` binds an objective, and
``transform`` maps points to smoothed values. ``SteklovNewton`` fits a
minimizer. Both follow the estimator conventions (constructor stores
parameters verbatim, learned state ends in ``_``), so ``get_params``,
``set_params`` and ``clone`` work as usual.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_choice, check_points
from .corpus import ObjectiveSpec, get_problem
from .smoothing import (
    AveragingDomain,
    EstimatorConfig,
    double_average_gradient,
    double_average_hessian,
    double_average_value,
    single_average_gradient,
    single_average_value,
)
from .solver import SolverConfig, check_eps_stationarity, solve


def _objective(obj, dim=None):
    if isinstance(obj, ObjectiveSpec):
        return obj
    if isinstance(obj, str):
        return get_problem(obj, dim)
    raise TypeError(f"expected an ObjectiveSpec or corpus name, got {type(obj).__name__}")


class SteklovSmoother(TransformerMixin, BaseEstimator):
    """Window-average smoothing of a corpus objective.

    Parameters
    ----------
    shape : {"cube", "ball"}
    radius : float
    depth : {"single", "double"}
    method : {"auto", "closed_form", "quadrature", "monte_carlo"}
    n_outer, n_inner : int
        Monte Carlo budgets.
    n_points : int
        Quadrature points per axis.
    random_state : int
    """

    def __init__(self, shape="cube", radius=1.0, depth="double", method="auto",
                 n_outer=4096, n_inner=4096, n_points=64, random_state=0):
        self.shape = shape
        self.radius = radius
        self.depth = depth
        self.method = method
        self.n_outer = n_outer
        self.n_inner = n_inner
        self.n_points = n_points
        self.random_state = random_state

    def fit(self, X, y=None):
        """Bind the objective ``X`` (an ObjectiveSpec or corpus name)."""
        check_choice(self.depth, ("single", "double"), "depth")
        self.objective_ = _objective(X)
        self.domain_ = AveragingDomain(self.shape, self.radius, self.objective_.dim)
        self.config_ = EstimatorConfig(
            method=self.method, outer_samples=self.n_outer, inner_samples=self.n_inner,
            quadrature_points_per_axis=self.n_points, seed=self.random_state,
        )
        self.n_features_in_ = self.objective_.dim
        return self

    def _apply(self, X, fn):
        check_is_fitted(self, "objective_")
        X = check_points(X, self.n_features_in_)
        return [fn(self.objective_, self.domain_, x, self.config_).payload for x in X]

    def transform(self, X):
        """Smoothed values at the rows of ``X``, shape ``(k,)``."""
        fn = single_average_value if self.depth == "single" else double_average_value
        return np.asarray(self._apply(X, fn), dtype=np.float64)

    def gradient(self, X):
        fn = single_average_gradient if self.depth == "single" else double_average_gradient
        return np.vstack(self._apply(X, fn))

    def hessian(self, X):
        if self.depth != "double":
            raise ValueError("the single average is only once differentiable")
        return np.stack(self._apply(X, double_average_hessian))


class SteklovNewton(BaseEstimator):
    """Regularized Newton minimization of a double-averaged objective.

    After ``fit(objective, x0)``: ``x_`` is the final iterate, ``result_``
    the full ``SolverResult``, ``n_iter_`` the number of iterations and
    ``stop_reason_`` why it stopped.
    """

    def __init__(self, algorithm="superlinear", r0=1.0, radius_shrink=0.5, eps0=1.0,
                 eps_decay=0.9, reg0=None, reg_decay=0.7, tol=1e-6, max_iter=500,
                 max_halvings=30, shape="cube", shrink_rule="keep", method="auto", n_outer=4096,
                 n_inner=4096, n_points=64, random_state=0):
        self.algorithm = algorithm
        self.r0 = r0
        self.radius_shrink = radius_shrink
        self.eps0 = eps0
        self.eps_decay = eps_decay
        self.reg0 = reg0
        self.reg_decay = reg_decay
        self.tol = tol
        self.max_iter = max_iter
        self.max_halvings = max_halvings
        self.shape = shape
        self.shrink_rule = shrink_rule
        self.method = method
        self.n_outer = n_outer
        self.n_inner = n_inner
        self.n_points = n_points
        self.random_state = random_state

    def fit(self, X, x0=None):
        """Minimize the objective ``X`` starting at ``x0`` (default: x* + 1)."""
        spec = _objective(X)
        if x0 is None:
            x0 = np.asarray(spec.minimizer) + 1.0
        cfg = SolverConfig(
            algorithm=self.algorithm, x0=tuple(np.atleast_1d(x0)), r0=self.r0,
            radius_shrink=self.radius_shrink, eps0=self.eps0, eps_decay=self.eps_decay,
            reg0=self.reg0, reg_decay=self.reg_decay, step_tol=self.tol,
            max_iters=self.max_iter, max_halvings=self.max_halvings, shape=self.shape,
            shrink_rule=self.shrink_rule,
            estimator=EstimatorConfig(
                method=self.method, outer_samples=self.n_outer, inner_samples=self.n_inner,
                quadrature_points_per_axis=self.n_points, seed=self.random_state,
            ),
        )
        self.objective_ = spec
        self.result_ = solve(spec, cfg)
        self.x_ = self.result_.x_final
        self.n_iter_ = len(self.result_.records)
        self.stop_reason_ = self.result_.stop_reason
        self.final_domain_ = AveragingDomain(self.shape, self.result_.final_radius, spec.dim)
        return self

    def predict(self, X=None):
        """The fitted minimizer (``X`` is ignored)."""
        check_is_fitted(self, "x_")
        return self.x_.copy()

    def score(self, X=None, y=None):
        """Negative distance to the known minimizer."""
        check_is_fitted(self, "x_")
        return -float(np.linalg.norm(self.x_ - self.objective_.minimizer))

    def is_eps_stationary(self, factor=2):
        check_is_fitted(self, "x_")
        return check_eps_stationarity(self.x_, self.final_domain_, self.objective_, factor)
