"""Lipschitz convex test problems with value/subgradient oracles.

Every oracle is vectorized: it accepts a single point of shape ``(n,)`` or a
batch of shape ``(k, n)``. Subgradient selections at kinks are fixed so that
traces are reproducible: ``|.|`` kinks return 0 (the minimal-norm element) and
max-type functions return the gradient of the lowest-index active piece.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog

from . import _closed_form as cf
from ._validation import check_choice, check_point, check_positive_int
from .exceptions import CapabilityError, ConfigError

# half-width of the box around x* used when sampling invariants
CORPUS_BOX = 10.0


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """A Lipschitz convex test problem.

    Attributes
    ----------
    name : str
        Registry name (``abs1d``, ``l1``, ...).
    dim : int
    lipschitz_const : float
        Lipschitz constant of ``value``. For the unbounded-gradient quadratic
        it is the bound over the corpus box around the minimizer.
    value, subgradient : callable
        Vectorized oracles.
    minimizer : ndarray or None
    min_value : float or None
    is_convex : bool
    has_closed_form_smoothing : bool
    """

    name: str
    dim: int
    lipschitz_const: float
    value: Callable
    subgradient: Callable
    minimizer: Optional[np.ndarray]
    min_value: Optional[float]
    is_convex: bool = True
    has_closed_form_smoothing: bool = False
    params: dict = field(default_factory=dict)
    # closed-form data: ("separable", terms) or ("quadratic", A)
    _closed_form: Optional[tuple] = field(default=None, repr=False)

    def with_lipschitz(self, L):
        """Copy with a different Lipschitz constant (used for fault injection)."""
        return ObjectiveSpec(
            self.name, self.dim, float(L), self.value, self.subgradient,
            self.minimizer, self.min_value, self.is_convex,
            self.has_closed_form_smoothing, dict(self.params), self._closed_form,
        )


def evaluate(spec, x):
    """Return ``f(x)``."""
    return float(spec.value(check_point(x, spec.dim)))


def subgradient(spec, x):
    """Return the selected element of the subdifferential at ``x``."""
    return np.asarray(spec.subgradient(check_point(x, spec.dim)), dtype=np.float64)


def _sign0(v):
    return np.sign(v)


# -- factories ---------------------------------------------------------------


def make_abs1d():
    """``f(x) = |x|`` in one dimension."""
    terms = [cf.abs_terms()]
    return ObjectiveSpec(
        name="abs1d", dim=1, lipschitz_const=1.0,
        value=lambda x: np.abs(np.asarray(x, dtype=np.float64)).sum(axis=-1),
        subgradient=lambda x: _sign0(np.asarray(x, dtype=np.float64)),
        minimizer=np.zeros(1), min_value=0.0,
        has_closed_form_smoothing=True, params={"dim": 1},
        _closed_form=("separable", terms),
    )


def make_l1(dim=2):
    """``f(x) = sum_i |x_i|``."""
    dim = check_positive_int(dim, "dim")
    terms = [cf.abs_terms() for _ in range(dim)]
    return ObjectiveSpec(
        name="l1", dim=dim, lipschitz_const=float(np.sqrt(dim)),
        value=lambda x: np.abs(np.asarray(x, dtype=np.float64)).sum(axis=-1),
        subgradient=lambda x: _sign0(np.asarray(x, dtype=np.float64)),
        minimizer=np.zeros(dim), min_value=0.0,
        has_closed_form_smoothing=True, params={"dim": dim},
        _closed_form=("separable", terms),
    )


def make_linf(dim=2):
    """``f(x) = max_i |x_i|``; not separable, so no closed form."""
    dim = check_positive_int(dim, "dim")

    def value(x):
        return np.abs(np.asarray(x, dtype=np.float64)).max(axis=-1)

    def grad(x):
        x = np.asarray(x, dtype=np.float64)
        i = np.argmax(np.abs(x), axis=-1)  # first maximal index
        g = np.zeros_like(x)
        picked = np.take_along_axis(x, np.expand_dims(i, -1), axis=-1)
        np.put_along_axis(g, np.expand_dims(i, -1), np.sign(picked), axis=-1)
        return g

    return ObjectiveSpec(
        name="linf", dim=dim, lipschitz_const=1.0, value=value, subgradient=grad,
        minimizer=np.zeros(dim), min_value=0.0, params={"dim": dim},
    )


def _default_pieces(dim):
    if dim == 1:
        return np.array([[1.0], [-2.0]]), np.zeros(2)
    eye = np.eye(dim)
    return np.vstack([eye, -2.0 * eye]), np.zeros(2 * dim)


def make_maxlin(dim=1, slopes=None, intercepts=None, minimizer=None):
    """``f(x) = max_j (a_j . x + b_j)``; defaults to ``max(x, -2x)`` in 1D.

    If no minimizer is given it is found by the epigraph LP
    ``min t  s.t.  a_j . x + b_j <= t``.
    """
    dim = check_positive_int(dim, "dim")
    if slopes is None:
        A, b = _default_pieces(dim)
    else:
        A = np.atleast_2d(np.asarray(slopes, dtype=np.float64))
        b = np.asarray(intercepts, dtype=np.float64)
        if A.shape[1] != dim or b.shape != (A.shape[0],):
            raise ConfigError("maxlin pieces do not match dim")

    def value(x):
        return (np.asarray(x, dtype=np.float64) @ A.T + b).max(axis=-1)

    def grad(x):
        vals = np.asarray(x, dtype=np.float64) @ A.T + b
        return A[np.argmax(vals, axis=-1)]

    if minimizer is None:
        m = A.shape[0]
        res = linprog(
            c=np.r_[np.zeros(dim), 1.0],
            A_ub=np.c_[A, -np.ones(m)], b_ub=-b,
            bounds=[(None, None)] * (dim + 1), method="highs",
        )
        if res.status != 0:
            raise ConfigError("maxlin pieces do not define a bounded-below function")
        minimizer = res.x[:dim]
    minimizer = np.asarray(minimizer, dtype=np.float64)
    closed = ("separable", [cf.pwl_terms(A[:, 0], b)]) if dim == 1 else None
    return ObjectiveSpec(
        name="maxlin", dim=dim,
        lipschitz_const=float(np.linalg.norm(A, axis=1).max()),
        value=value, subgradient=grad,
        minimizer=minimizer, min_value=float(value(minimizer)),
        has_closed_form_smoothing=closed is not None,
        params={"dim": dim}, _closed_form=closed,
    )


def make_quad(dim=2, A=None):
    """``f(x) = x'Ax/2`` with ``A = diag(1..n)`` by default.

    Smooth control case. The gradient is unbounded, so ``lipschitz_const`` is
    the largest gradient norm over the corpus box around the minimizer.
    """
    dim = check_positive_int(dim, "dim")
    if A is None:
        A = np.diag(np.arange(1.0, dim + 1.0))
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (dim, dim) or not np.allclose(A, A.T):
        raise ConfigError("quad matrix must be symmetric with shape (dim, dim)")
    eig = np.linalg.eigvalsh(A)
    if eig[0] < 0:
        raise ConfigError("quad matrix must be positive semidefinite")
    L = float(eig[-1] * CORPUS_BOX * np.sqrt(dim))

    def value(x):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * np.einsum("...i,ij,...j->...", x, A, x)

    def grad(x):
        return np.asarray(x, dtype=np.float64) @ A

    return ObjectiveSpec(
        name="quad", dim=dim, lipschitz_const=L, value=value, subgradient=grad,
        minimizer=np.zeros(dim), min_value=0.0, has_closed_form_smoothing=True,
        params={"dim": dim}, _closed_form=("quadratic", A),
    )


def make_huberized_l1(dim=2, delta=1.0):
    """Huber terms on even coordinates, ``|x_i|`` on odd ones."""
    dim = check_positive_int(dim, "dim")
    terms = [cf.huber_terms(delta) if i % 2 == 0 else cf.abs_terms() for i in range(dim)]
    huber = np.arange(dim) % 2 == 0

    def value(x):
        x = np.asarray(x, dtype=np.float64)
        ax = np.abs(x)
        h = np.where(ax <= delta, x * x / (2 * delta), ax - delta / 2)
        return np.where(huber, h, ax).sum(axis=-1)

    def grad(x):
        x = np.asarray(x, dtype=np.float64)
        return np.where(huber, np.clip(x / delta, -1.0, 1.0), np.sign(x))

    return ObjectiveSpec(
        name="huberized-l1", dim=dim, lipschitz_const=float(np.sqrt(dim)),
        value=value, subgradient=grad, minimizer=np.zeros(dim), min_value=0.0,
        has_closed_form_smoothing=True, params={"dim": dim, "delta": delta},
        _closed_form=("separable", terms),
    )


def make_affine(a, b=0.0):
    """``f(x) = a.x + b``. Test helper, not a corpus entry (no minimizer)."""
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    dim = a.shape[0]
    terms = [[("poly", float(b) if i == 0 else 0.0, float(a[i]), 0.0)] for i in range(dim)]
    return ObjectiveSpec(
        name="affine", dim=dim, lipschitz_const=float(np.linalg.norm(a)),
        value=lambda x: np.asarray(x, dtype=np.float64) @ a + b,
        subgradient=lambda x: np.broadcast_to(a, np.shape(x)).copy(),
        minimizer=None, min_value=None, has_closed_form_smoothing=True,
        params={"dim": dim}, _closed_form=("separable", terms),
    )


_REGISTRY = {
    "abs1d": (make_abs1d, 1, (1, 1)),
    "l1": (make_l1, 2, (1, 10)),
    "maxlin": (make_maxlin, 1, (1, 10)),
    "linf": (make_linf, 2, (1, 10)),
    "quad": (make_quad, 2, (1, 10)),
    "huberized-l1": (make_huberized_l1, 2, (1, 10)),
}


def get_problem(name, dim=None):
    """Look up a corpus entry by name and dimension."""
    if name not in _REGISTRY:
        raise ConfigError(f"unknown problem {name!r}; known: {sorted(_REGISTRY)}")
    factory, default_dim, (lo, hi) = _REGISTRY[name]
    dim = default_dim if dim is None else dim
    if not lo <= dim <= hi:
        raise ConfigError(f"{name} supports dims {lo}..{hi}, got {dim}")
    if name == "abs1d":
        return factory()
    return factory(dim)


def list_corpus():
    """Default instance of every shipped problem."""
    return [get_problem(name) for name in _REGISTRY]


def corpus_names():
    return list(_REGISTRY)


def reference_smoothed(spec, domain, x, order="value", depth="single"):
    """Closed-form ``phi``/``Phi`` and derivatives for separable problems.

    Supported: cube domains on separable specs, any 1D domain (a ball in 1D
    is an interval), and the quadratic under ball or cube.
    """
    check_choice(order, cf.ORDERS, "order")
    check_choice(depth, cf.DEPTHS, "depth")
    x = check_point(x, spec.dim)
    if domain.dim != spec.dim:
        raise ConfigError(f"domain dim {domain.dim} != problem dim {spec.dim}")
    if not spec.has_closed_form_smoothing or spec._closed_form is None:
        raise CapabilityError(f"no closed form for {spec.name!r}")
    kind, data = spec._closed_form
    if kind == "quadratic":
        if domain.shape == "cube":
            moment = domain.radius**2 / 3.0
        else:
            moment = domain.radius**2 / (domain.dim + 2.0)
        return cf.quadratic_smoothed(data, x, moment, depth, order)
    if domain.shape != "cube" and domain.dim > 1:
        raise CapabilityError(
            f"closed form for {spec.name!r} needs a cube domain when dim > 1"
        )
    return cf.separable_smoothed(data, x, domain.radius, depth, order)
