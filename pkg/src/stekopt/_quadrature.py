"""Deterministic lattice rules for window averages.

Cube domains use tensor products of 1D rules on a common lattice of spacing
``h/2`` with ``h = 2r/P``:

* ``V``: midpoint rule on ``[-r, r]`` (P nodes, weight ``1/P``).
* ``F``: boundary-flux rule, nodes ``-r`` and ``+r`` with weights ``-+1/(2r)``.

By Gauss-Green, the derivative of a window average along axis ``i`` is the
flux of ``f`` through the two faces orthogonal to ``e_i``. So averaging twice
and differentiating is the same as replacing ``V`` by ``F`` on the
differentiated axes; the nested (double) rule is the discrete convolution of
the per-stage rules, evaluated once on the merged lattice. Only the value
oracle is needed and the rules are exact on polynomials of degree 1.

Ball domains use the midpoint lattice restricted to the ball; the nested rule
is the self-convolution of that mask (integer pair counts).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

# points evaluated per oracle call
_BLOCK = 1 << 20


@dataclass(frozen=True)
class Rule1D:
    offset: int  # lattice index (units of h/2) of w[0]
    w: np.ndarray

    def __mul__(self, other):
        return Rule1D(self.offset + other.offset, np.convolve(self.w, other.w))

    def nodes(self, half_step):
        idx = np.nonzero(self.w)[0]
        return (self.offset + idx) * half_step, self.w[idx]


def _midpoint(P):
    w = np.zeros(2 * P - 1)
    w[::2] = 1.0 / P
    return Rule1D(-(P - 1), w)


def _flux(P, r):
    w = np.zeros(2 * P + 1)
    w[0], w[-1] = -1.0 / (2.0 * r), 1.0 / (2.0 * r)
    return Rule1D(-P, w)


def _tensor_sum(fun, x, axes, total_weight, f_ref):
    """``sum_k prod_j w_j f(x + nodes)`` over the tensor grid given per axis.

    The sum is centred on ``f_ref`` and ``total_weight`` is the exact weight
    sum (1 for averages, 0 for derivatives), so constants come out exact.
    """
    nodes = [a[0] for a in axes]
    weights = [a[1] for a in axes]
    n = len(axes)
    rest = int(np.prod([len(v) for v in nodes[1:]])) if n > 1 else 1
    step = max(1, _BLOCK // rest)
    w_rest = np.ones(1)
    for w in weights[1:]:
        w_rest = np.multiply.outer(w_rest, w).ravel()
    total = 0.0
    count = 0
    for start in range(0, len(nodes[0]), step):
        sl = slice(start, start + step)
        grids = np.meshgrid(nodes[0][sl], *nodes[1:], indexing="ij")
        pts = x + np.stack([g.ravel() for g in grids], axis=-1)
        vals = np.asarray(fun(pts), dtype=np.float64) - f_ref
        W = np.multiply.outer(weights[0][sl], w_rest).ravel()
        total += float(vals @ W)
        count += len(vals)
    return total_weight * f_ref + total, count


def cube_average(f, x, r, P, depth, order):
    """Value, gradient or Hessian of the window average over ``[-r, r]^n``."""
    n = x.shape[0]
    V = _midpoint(P)
    F = _flux(P, r)
    base = V if depth == "single" else V * V
    f_ref = float(f(x))
    half = r / P
    evals = 1

    def run(rules, total_weight):
        nonlocal evals
        axes = [rule.nodes(half) for rule in rules]
        s, c = _tensor_sum(f, x, axes, total_weight, f_ref)
        evals += c
        return s

    if order == "value":
        return run([base] * n, 1.0), evals
    d1 = F if depth == "single" else F * V
    if order == "gradient":
        g = np.empty(n)
        for i in range(n):
            rules = [base] * n
            rules[i] = d1
            g[i] = run(rules, 0.0)
        return g, evals
    if depth == "single":
        raise ValueError("single averages are only once differentiable")
    d2 = F * F
    H = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            rules = [base] * n
            if i == j:
                rules[i] = d2
            else:
                rules[i] = d1
                rules[j] = d1
            H[i, j] = H[j, i] = run(rules, 0.0)
    return H, evals


@lru_cache(maxsize=32)
def _ball_lattice(P, n, depth):
    """Unit-ball lattice nodes and weights (weights sum to 1)."""
    c = -1.0 + (np.arange(P) + 0.5) * (2.0 / P)
    grids = np.meshgrid(*([c] * n), indexing="ij")
    mask = (sum(g * g for g in grids) <= 1.0).astype(np.float64)
    if depth == "single":
        pts = np.stack([g[mask > 0] for g in grids], axis=-1)
        w = np.full(len(pts), 1.0 / len(pts))
        return pts, w
    counts = np.rint(fftconvolve(mask, mask)).astype(np.int64)
    c2 = -2.0 + (np.arange(2 * P - 1) + 1.0) * (2.0 / P)
    grids2 = np.meshgrid(*([c2] * n), indexing="ij")
    keep = counts > 0
    pts = np.stack([g[keep] for g in grids2], axis=-1)
    w = counts[keep].astype(np.float64)
    return pts, w / w.sum()


def ball_average(f, x, r, P, depth, order, grad=None):
    """Value (from ``f``) or gradient (lattice average of ``grad``) over a ball."""
    pts, w = _ball_lattice(P, x.shape[0], depth)
    pts = x + r * pts
    if order == "value":
        f_ref = float(f(x))
        vals = np.asarray(f(pts), dtype=np.float64) - f_ref
        return f_ref + float(vals @ w), len(pts) + 1
    G = np.asarray(grad(pts), dtype=np.float64)
    return w @ G, len(pts)


def ball_lattice_size(P, n, depth):
    return len(_ball_lattice(P, n, depth)[1])
