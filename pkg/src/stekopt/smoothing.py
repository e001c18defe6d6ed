"""Window averages of a Lipschitz function and their derivatives.

For a domain ``D`` centred at the origin the single average is

    phi(x) = (1 / mu(D)) * integral_D f(x + y) dy

and the double average ``Phi`` is the single average of ``phi``. ``phi`` is
once and ``Phi`` twice continuously differentiable; both are convex when
``f`` is, and keep its Lipschitz constant.

Three estimators are available (``EstimatorConfig.method``):

* ``closed_form``: exact piecewise-polynomial integrals for separable corpus
  entries (and the quadratic).
* ``quadrature``: deterministic lattice rules, ``n <= 4``.
* ``monte_carlo``: counter-keyed uniform samples with standard errors.

``auto`` picks the first of these that supports the (objective, domain) pair.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from . import _montecarlo as mc
from . import _quadrature as quad
from ._validation import (
    check_choice,
    check_open_unit,
    check_point,
    check_positive,
    check_positive_int,
)
from .corpus import reference_smoothed
from .exceptions import CapabilityError, DegenerateDomainError, EstimatorFailure

SHAPES = ("ball", "cube")
METHODS = ("auto", "closed_form", "quadrature", "monte_carlo")
HESSIAN_RULES = ("flux", "fd")
MAX_QUADRATURE_DIM = 4
MIN_RADIUS = 1e-8


@dataclass(frozen=True)
class AveragingDomain:
    """Ball of radius ``radius`` or cube of half-width ``radius`` around 0."""

    shape: str
    radius: float
    dim: int

    def __post_init__(self):
        check_choice(self.shape, SHAPES, "shape")
        object.__setattr__(self, "radius", check_positive(self.radius, "radius"))
        object.__setattr__(self, "dim", check_positive_int(self.dim, "dim"))

    @property
    def measure(self):
        return measure(self)

    @property
    def diameter(self):
        return diameter(self)

    def with_radius(self, radius):
        return replace(self, radius=radius)


def measure(domain):
    """Lebesgue measure of the domain."""
    n, r = domain.dim, domain.radius
    if domain.shape == "cube":
        return (2.0 * r) ** n
    return math.exp(0.5 * n * math.log(math.pi) + n * math.log(r) - gammaln(0.5 * n + 1.0))


def diameter(domain):
    if domain.shape == "cube":
        return 2.0 * domain.radius * math.sqrt(domain.dim)
    return 2.0 * domain.radius


def hessian_lipschitz_constant(domain, L):
    """``2 L / d(D)**2``."""
    L = check_positive(L, "L")
    return 2.0 * L / diameter(domain) ** 2


def gradient_norm_bound_constant(domain, L):
    """``L / d(D)``, the nominal bound on the norm of the double-average Hessian."""
    L = check_positive(L, "L")
    return L / diameter(domain)


def certified_hessian_bound(domain, L):
    """A bound on the double-average Hessian norm that holds for every L-Lipschitz ``f``.

    The gradient of a single average is a boundary flux, so its Lipschitz
    constant is ``L * kappa / r`` with ``kappa = sqrt(n)`` for the cube and
    ``kappa = n Gamma(n/2) / (sqrt(pi) Gamma((n+1)/2))`` (the mean absolute
    normal component over the sphere, inverted) for the ball. For ``|x|`` on
    an interval the bound is attained: ``Phi''(0) = 1/r = 2L/d``.
    """
    L = check_positive(L, "L")
    n, r = domain.dim, domain.radius
    if domain.shape == "cube":
        kappa = math.sqrt(n)
    else:
        kappa = n * math.exp(gammaln(0.5 * n) - gammaln(0.5 * (n + 1))) / math.sqrt(math.pi)
    return L * kappa / r


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator settings.

    ``outer_samples`` (N) and ``inner_samples`` (M) drive Monte Carlo:
    single averages use M samples, double averages N outer points with
    ``max(1, M // N)`` inner points each. ``quadrature_points_per_axis`` is
    the lattice resolution. ``hessian_rule`` selects boundary fluxes
    (``flux``) or central differences of the gradient with step
    ``fd_step_factor * r`` (``fd``).
    """

    method: str = "auto"
    outer_samples: int = 4096
    inner_samples: int = 4096
    quadrature_points_per_axis: int = 64
    fd_step_factor: float = 0.1
    seed: int = 0
    hessian_rule: str = "flux"

    def __post_init__(self):
        check_choice(self.method, METHODS, "method")
        check_choice(self.hessian_rule, HESSIAN_RULES, "hessian_rule")
        check_positive_int(self.outer_samples, "outer_samples")
        check_positive_int(self.inner_samples, "inner_samples")
        check_positive_int(self.quadrature_points_per_axis, "quadrature_points_per_axis")
        check_open_unit(self.fd_step_factor, "fd_step_factor")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")

    def scaled(self, factor):
        """Copy with both sample counts multiplied by ``factor``."""
        return replace(
            self,
            outer_samples=int(self.outer_samples * factor),
            inner_samples=int(self.inner_samples * factor),
        )


@dataclass(frozen=True)
class SmoothingEstimate:
    """An estimate of phi, phi', Phi, Phi' or Phi''.

    ``stderr`` has the shape of ``payload`` (zeros for deterministic
    methods); ``stderr_estimate`` is its largest entry.
    """

    order: str
    payload: object
    samples_used: int
    stderr_estimate: float = 0.0
    stderr: object = field(default=None, repr=False)

    def __post_init__(self):
        payload = self.payload
        if self.order == "value":
            payload = float(payload)
        else:
            payload = np.array(payload, dtype=np.float64)
            if self.order == "hessian":
                payload = 0.5 * (payload + payload.T)
        if not np.all(np.isfinite(payload)):
            raise EstimatorFailure(f"non-finite {self.order} estimate")
        err = np.zeros_like(np.asarray(payload)) if self.stderr is None else self.stderr
        err = np.asarray(err, dtype=np.float64)
        if self.order == "hessian":
            err = 0.5 * (err + err.T)
        object.__setattr__(self, "payload", payload)
        object.__setattr__(self, "stderr", err)
        object.__setattr__(self, "stderr_estimate", float(np.max(err, initial=0.0)))


def resolve_method(spec, domain, cfg):
    """Concrete estimator for ``auto``; explicit choices are returned unchanged."""
    if cfg.method != "auto":
        return cfg.method
    if spec.has_closed_form_smoothing:
        try:
            reference_smoothed(spec, domain, np.zeros(spec.dim), "value", "single")
            return "closed_form"
        except CapabilityError:
            pass
    if domain.dim <= MAX_QUADRATURE_DIM:
        return "quadrature"
    return "monte_carlo"


def _prepare(spec, domain, x):
    if domain.dim != spec.dim:
        raise CapabilityError(f"domain dim {domain.dim} != objective dim {spec.dim}")
    return check_point(x, spec.dim)


def _quadrature(spec, domain, x, cfg, depth, order):
    n, r, P = domain.dim, domain.radius, cfg.quadrature_points_per_axis
    if n > MAX_QUADRATURE_DIM:
        raise CapabilityError(
            f"quadrature supports dim <= {MAX_QUADRATURE_DIM}, got {n}; use monte_carlo"
        )
    # in one dimension the ball is the interval
    if domain.shape == "cube" or n == 1:
        if order == "hessian" and cfg.hessian_rule == "fd":
            return _fd_hessian(
                lambda z: quad.cube_average(spec.value, z, r, P, depth, "gradient"), x, r, cfg
            )
        return quad.cube_average(spec.value, x, r, P, depth, order)
    if order == "hessian":
        return _fd_hessian(
            lambda z: quad.ball_average(spec.value, z, r, P, depth, "gradient", spec.subgradient),
            x, r, cfg,
        )
    return quad.ball_average(spec.value, x, r, P, depth, order, spec.subgradient)


def _fd_hessian(gradient, x, r, cfg):
    h = cfg.fd_step_factor * r
    n = x.shape[0]
    H = np.empty((n, n))
    evals = 0
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        gp, cp = gradient(x + e)
        gm, cm = gradient(x - e)
        H[:, j] = (gp - gm) / (2.0 * h)
        evals += cp + cm
    return H, evals


def _estimate(spec, domain, x, cfg, depth, order):
    x = _prepare(spec, domain, x)
    if order == "hessian" and domain.radius < MIN_RADIUS:
        raise DegenerateDomainError(f"radius {domain.radius} is below {MIN_RADIUS}")
    method = resolve_method(spec, domain, cfg)
    if method == "closed_form":
        payload = reference_smoothed(spec, domain, x, order, depth)
        return SmoothingEstimate(order, payload, 0)
    if method == "quadrature":
        payload, evals = _quadrature(spec, domain, x, cfg, depth, order)
        return SmoothingEstimate(order, payload, evals)
    if order == "hessian":
        if cfg.hessian_rule == "flux":
            payload, err, evals = mc.hessian_flux(spec.subgradient, x, domain, cfg)
        else:
            step = cfg.fd_step_factor * domain.radius
            payload, err, evals = mc.hessian_fd(spec.subgradient, x, domain, cfg, step)
    else:
        payload, err, evals = mc.average(spec.value, spec.subgradient, x, domain, cfg, depth, order)
    return SmoothingEstimate(order, payload, evals, stderr=err)


def single_average_value(f, domain, x, cfg):
    """Estimate ``phi(x)``."""
    return _estimate(f, domain, x, cfg, "single", "value")


def single_average_gradient(f, domain, x, cfg):
    """Estimate ``phi'(x)``, the window average of the subgradient."""
    return _estimate(f, domain, x, cfg, "single", "gradient")


def double_average_value(f, domain, x, cfg):
    """Estimate ``Phi(x)``."""
    return _estimate(f, domain, x, cfg, "double", "value")


def double_average_gradient(f, domain, x, cfg):
    """Estimate ``Phi'(x)``, the window average of ``phi'``."""
    return _estimate(f, domain, x, cfg, "double", "gradient")


def double_average_hessian(f, domain, x, cfg):
    """Estimate ``Phi''(x)``; the result is symmetric."""
    return _estimate(f, domain, x, cfg, "double", "hessian")
