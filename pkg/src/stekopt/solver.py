"""Regularized Newton methods on double-averaged objectives.

Both methods build, at iterate ``x_k``, the surrogate
``Phi_s(y) + lam * ||y - x_k||**2`` over the averaging domain ``D_s`` of
radius ``r0 * gamma**s``, take the Newton step ``Delta_k`` of the surrogate
and damp it by halving until the decrease test

    surrogate(x_k + 2**-l Delta_k) <= surrogate(x_k) - 4**-l * (w / 2) * ||Delta_k||**2

holds. They differ in the weight and in how ``s`` grows:

* ``stationary``: ``lam = w = L_s = L / d(D_s)``. After each step the domain
  shrinks by one factor ``gamma`` when the smaller domain still satisfies
  ``3 ||Delta_k|| / d(D_{s+1}) < eps_k`` (see ``coherence_update_alg1`` for
  the alternative ``repair`` rule).
* ``superlinear``: ``lam = w = reg0 * tau**m`` (``m`` counts decays, paused
  after three consecutive rises of the step ratio). When
  ``L_s ||Delta_{k+1}|| <= eps_{k+1}`` the index ``s`` grows by one.

``eps_k = eps0 * rho**k``. Iteration stops when ``||Delta_k|| < step_tol``.
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from ._validation import (
    check_choice,
    check_open_unit,
    check_point,
    check_positive,
    check_positive_int,
)
from .exceptions import ConfigError, LineSearchExhausted
from .model import RegularizedSurrogate, solve_spd, surrogate_gradient, surrogate_hessian, surrogate_value
from .smoothing import (
    MIN_RADIUS,
    SHAPES,
    AveragingDomain,
    EstimatorConfig,
    diameter,
    gradient_norm_bound_constant,
)

ALGORITHMS = ("stationary", "superlinear")
SHRINK_RULES = ("keep", "repair")
STOP_REASONS = ("step_tol", "max_iters", "line_search_exhausted")
# consecutive ratio rises that pause the regularization decay
PAUSE_AFTER = 3
# sample budget multiplier per radius shrink
BUDGET_GROWTH = 2


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings. ``reg0=None`` means ``L / d(D_0)``."""

    algorithm: str = "superlinear"
    x0: tuple = (1.0,)
    r0: float = 1.0
    radius_shrink: float = 0.5
    eps0: float = 1.0
    eps_decay: float = 0.9
    reg0: Optional[float] = None
    reg_decay: float = 0.7
    step_tol: float = 1e-6
    max_iters: int = 500
    max_halvings: int = 30
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    shape: str = "cube"
    shrink_rule: str = "keep"

    def __post_init__(self):
        check_choice(self.algorithm, ALGORITHMS, "algorithm")
        check_choice(self.shrink_rule, SHRINK_RULES, "shrink_rule")
        check_choice(self.shape, SHAPES, "shape")
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=np.float64))
        if x0.ndim != 1 or not np.all(np.isfinite(x0)):
            raise ValueError("x0 must be a finite vector")
        object.__setattr__(self, "x0", tuple(float(v) for v in x0))
        check_positive(self.r0, "r0")
        check_open_unit(self.radius_shrink, "radius_shrink")
        check_positive(self.eps0, "eps0")
        check_open_unit(self.eps_decay, "eps_decay")
        if self.reg0 is not None:
            check_positive(self.reg0, "reg0")
        check_open_unit(self.reg_decay, "reg_decay")
        check_positive(self.step_tol, "step_tol")
        check_positive_int(self.max_iters, "max_iters")
        check_positive_int(self.max_halvings, "max_halvings")
        if not isinstance(self.estimator, EstimatorConfig):
            raise ValueError("estimator must be an EstimatorConfig")

    def eps(self, k):
        return self.eps0 * self.eps_decay**k


@dataclass(frozen=True)
class RadiusSchedule:
    """``r_s = r0 * gamma**s``; ``s`` stops growing before ``r_s`` drops below ``MIN_RADIUS``."""

    r0: float
    gamma: float
    shape: str
    dim: int

    def radius(self, s):
        return self.r0 * self.gamma**s

    def domain(self, s):
        return AveragingDomain(self.shape, self.radius(s), self.dim)

    def can_shrink(self, s):
        return self.radius(s + 1) >= MIN_RADIUS


@dataclass(frozen=True)
class IterationRecord:
    """One iteration. ``x`` is the point where the step was computed.

    ``surrogate_value`` is the surrogate at its anchor, i.e. ``Phi_s(x)``;
    ``l = -1`` marks a step the line search could not accept.
    """

    k: int
    s: int
    x: np.ndarray
    surrogate_value: float
    grad_norm: float
    step: np.ndarray
    step_norm: float
    l: int
    radius: float
    L_s: float
    reg_weight: float
    ratio: float


@dataclass(frozen=True)
class SolverResult:
    x_final: np.ndarray
    records: List[IterationRecord]
    stop_reason: str
    eps2d_radius: float
    algorithm: str = "superlinear"
    final_radius: float = 0.0
    shape: str = "cube"


def newton_step(s, x):
    """``-H^{-1} g`` for the surrogate Hessian and gradient at ``x``."""
    return _newton(s, x)[0]


def _newton(s, x):
    g = surrogate_gradient(s, x)
    H = surrogate_hessian(s, x)
    return -solve_spd(H, g), g


def line_search(s, x, step, decrease_weight, max_halvings, f0=None):
    """Smallest ``l <= max_halvings`` passing the decrease test; returns ``(l, x_next)``.

    Comparisons are made up to a few ulps of the surrogate values, below
    which the test carries no information.
    """
    x = np.asarray(x, dtype=np.float64)
    step = np.asarray(step, dtype=np.float64)
    sq = float(step @ step)
    if sq == 0.0:
        raise ValueError("line search needs a nonzero step")
    f0 = surrogate_value(s, x) if f0 is None else f0
    for l in range(max_halvings + 1):
        t = 2.0**-l
        x_new = x + t * step
        f1 = surrogate_value(s, x_new)
        slack = 8.0 * np.finfo(float).eps * max(abs(f0), abs(f1))
        if f1 <= f0 - t * t * 0.5 * decrease_weight * sq + slack:
            return l, x_new
    raise LineSearchExhausted(f"no acceptable step within {max_halvings} halvings")


def coherence_update_alg1(s, step_norm, eps_k, schedule, rule="keep"):
    """Domain index after an iteration, moving by at most one per call.

    ``keep`` shrinks when the smaller domain still satisfies
    ``3 ||Delta|| / d(D_{s+1}) < eps_k``, so the radius follows the step
    norms down. ``repair`` shrinks whenever the current domain violates
    ``3 ||Delta|| / d(D_s) < eps_k`` and otherwise leaves ``s`` alone.
    """
    check_choice(rule, SHRINK_RULES, "rule")
    if not schedule.can_shrink(s):
        return s
    if rule == "repair":
        return s if 3.0 * step_norm / diameter(schedule.domain(s)) < eps_k else s + 1
    if 3.0 * step_norm / diameter(schedule.domain(s + 1)) < eps_k:
        return s + 1
    return s


def coherence_update_alg2(s, L_s, step_norm_next, eps_next, schedule=None):
    """Grow ``s`` by one when ``L_s ||Delta_{k+1}|| <= eps_{k+1}``."""
    if schedule is not None and not schedule.can_shrink(s):
        return s
    if L_s * step_norm_next <= eps_next:
        return s + 1
    return s


def check_eps_stationarity(x, domain, spec, factor=2):
    """True iff the known minimizer lies in ``x + factor * D``."""
    if factor not in (1, 2):
        raise ValueError(f"factor must be 1 or 2, got {factor!r}")
    if spec.minimizer is None:
        raise ConfigError(f"{spec.name} has no known minimizer")
    x = check_point(x, spec.dim)
    d = np.asarray(spec.minimizer, dtype=np.float64) - x
    bound = factor * domain.radius
    if domain.shape == "cube":
        return bool(np.max(np.abs(d)) <= bound)
    return bool(np.linalg.norm(d) <= bound)


def _run(spec, cfg):
    if len(cfg.x0) != spec.dim:
        raise ConfigError(f"x0 has {len(cfg.x0)} entries, problem dim is {spec.dim}")
    schedule = RadiusSchedule(cfg.r0, cfg.radius_shrink, cfg.shape, spec.dim)
    L = spec.lipschitz_const
    stationary = cfg.algorithm == "stationary"
    reg0 = cfg.reg0 if cfg.reg0 is not None else L / diameter(schedule.domain(0))

    x = np.array(cfg.x0, dtype=np.float64)
    s = 0
    decays = 0
    rises = 0
    prev_norm = None
    prev_ratio = None
    records = []
    stop = "max_iters"

    def surrogate(s, x, lam):
        est = cfg.estimator.scaled(BUDGET_GROWTH**s) if s else cfg.estimator
        return RegularizedSurrogate(spec, schedule.domain(s), est, x, lam)

    for k in range(1, cfg.max_iters + 1):
        L_s = gradient_norm_bound_constant(schedule.domain(s), L)
        lam = L_s if stationary else reg0 * cfg.reg_decay**decays
        sur = surrogate(s, x, lam)
        step, g = _newton(sur, x)
        norm = float(np.linalg.norm(step))
        if not stationary and k > 1:
            s_new = coherence_update_alg2(s, L_s, norm, cfg.eps(k), schedule)
            if s_new != s:
                s = s_new
                L_s = gradient_norm_bound_constant(schedule.domain(s), L)
                sur = surrogate(s, x, lam)
                step, g = _newton(sur, x)
                norm = float(np.linalg.norm(step))
        ratio = 0.0 if prev_norm is None else (norm / prev_norm if prev_norm > 0 else np.inf)
        f0 = surrogate_value(sur, x)
        l = 0
        x_next = x
        if norm >= cfg.step_tol:
            try:
                l, x_next = line_search(sur, x, step, lam, cfg.max_halvings, f0)
            except LineSearchExhausted:
                l, stop = -1, "line_search_exhausted"
        else:
            stop = "step_tol"
        records.append(IterationRecord(
            k=k, s=s, x=x.copy(), surrogate_value=float(f0),
            grad_norm=float(np.linalg.norm(g)), step=step, step_norm=norm, l=l,
            radius=schedule.radius(s), L_s=L_s, reg_weight=lam, ratio=float(ratio),
        ))
        if stop != "max_iters":
            break
        if k == cfg.max_iters:
            break
        x = x_next
        if stationary:
            s = coherence_update_alg1(s, norm, cfg.eps(k), schedule, cfg.shrink_rule)
        else:
            if prev_ratio is not None and k > 1 and ratio > prev_ratio:
                rises += 1
            else:
                rises = 0
            if rises < PAUSE_AFTER:
                decays += 1
        if k > 1:
            prev_ratio = ratio
        prev_norm = norm

    final = schedule.domain(records[-1].s)
    return SolverResult(
        x_final=records[-1].x.copy(), records=records, stop_reason=stop,
        eps2d_radius=2.0 * diameter(final), algorithm=cfg.algorithm,
        final_radius=final.radius, shape=cfg.shape,
    )


def run_stationary_search(spec, cfg):
    """Search for a stationary point with ``lam = L_s``."""
    if cfg.algorithm != "stationary":
        cfg = replace(cfg, algorithm="stationary")
    return _run(spec, cfg)


def run_superlinear(spec, cfg):
    """Regularized Newton with decaying regularization; needs a convex objective."""
    if not spec.is_convex:
        raise ConfigError(f"{spec.name} is not convex; the superlinear method requires convexity")
    if cfg.algorithm != "superlinear":
        cfg = replace(cfg, algorithm="superlinear")
    return _run(spec, cfg)


def solve(spec, cfg):
    """Dispatch on ``cfg.algorithm``."""
    if cfg.algorithm == "stationary":
        return run_stationary_search(spec, cfg)
    return run_superlinear(spec, cfg)
