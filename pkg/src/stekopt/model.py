"""Regularized surrogate ``Phi(y) + lam * ||y - anchor||**2`` around an anchor point."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._validation import check_point, check_positive
from .exceptions import EstimatorFailure, IndefiniteHessianError
from .smoothing import (
    double_average_gradient,
    double_average_hessian,
    double_average_value,
)

# relative tolerance on the spectral bounds
SANDWICH_RTOL = 1e-3
JITTER = 1e-10


@dataclass(frozen=True, eq=False)
class RegularizedSurrogate:
    """Double-averaged objective plus a quadratic penalty around ``anchor``.

    Immutable: re-anchoring (or changing the domain) makes a new object.
    """

    objective: object
    domain: object
    estimator: object
    anchor: np.ndarray
    reg_weight: float

    def __post_init__(self):
        anchor = check_point(self.anchor, self.objective.dim, "anchor").copy()
        anchor.setflags(write=False)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(
            self, "reg_weight", check_positive(self.reg_weight, "reg_weight", allow_zero=True)
        )


def surrogate_value(s, y):
    y = check_point(y, s.objective.dim, "y")
    phi = double_average_value(s.objective, s.domain, y, s.estimator).payload
    d = y - s.anchor
    return phi + s.reg_weight * float(d @ d)


def surrogate_gradient(s, y):
    y = check_point(y, s.objective.dim, "y")
    g = double_average_gradient(s.objective, s.domain, y, s.estimator).payload
    return g + 2.0 * s.reg_weight * (y - s.anchor)


def surrogate_hessian(s, y):
    y = check_point(y, s.objective.dim, "y")
    H = double_average_hessian(s.objective, s.domain, y, s.estimator).payload
    H = H + 2.0 * s.reg_weight * np.eye(s.objective.dim)
    return 0.5 * (H + H.T)


@dataclass(frozen=True)
class SandwichCheck:
    lower_ok: bool
    upper_ok: bool
    eig_min: float
    eig_max: float
    # eig_min against 2 L_s, reported but not asserted
    floor_ok: bool


def check_hessian_sandwich(s, y, L_s, upper_bound=None):
    """Check ``L_s <= eig(H) <= 3 L_s`` with relative slack ``SANDWICH_RTOL``.

    ``upper_bound`` overrides the nominal Hessian bound ``L_s`` used in the
    upper limit ``upper_bound + 2 L_s`` (see ``certified_hessian_bound``).
    """
    H = surrogate_hessian(s, y)
    if not np.all(np.isfinite(H)):
        raise EstimatorFailure("non-finite surrogate Hessian")
    eig = np.linalg.eigvalsh(H)
    lo, hi = float(eig[0]), float(eig[-1])
    top = 3.0 * L_s if upper_bound is None else upper_bound + 2.0 * L_s
    return SandwichCheck(
        lower_ok=lo >= L_s * (1.0 - SANDWICH_RTOL),
        upper_ok=hi <= top * (1.0 + SANDWICH_RTOL),
        eig_min=lo,
        eig_max=hi,
        floor_ok=lo >= 2.0 * L_s * (1.0 - SANDWICH_RTOL),
    )


def solve_spd(H, b):
    """Solve ``H x = b`` by Cholesky, retrying once with ``JITTER * ||H||`` on the diagonal."""
    H = np.asarray(H, dtype=np.float64)
    try:
        return cho_solve(cho_factor(H), b)
    except np.linalg.LinAlgError:
        pass
    shift = JITTER * max(np.linalg.norm(H, 2), np.finfo(float).tiny)
    try:
        return cho_solve(cho_factor(H + shift * np.eye(H.shape[0])), b)
    except np.linalg.LinAlgError as exc:
        raise IndefiniteHessianError("surrogate Hessian is not positive definite") from exc
