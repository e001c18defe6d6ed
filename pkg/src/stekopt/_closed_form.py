"""Exact window averages of separable piecewise-polynomial functions.

A separable objective is stored per coordinate as a list of terms:

* ``("pos", k, c, t0)``: ``c * max(t - t0, 0)**k / k!`` for ``k`` in {1, 2}
* ``("poly", c0, c1, c2)``: ``c0 + c1*t + c2*t**2/2``

``|t|`` is ``2*pos1(t) - t`` and a Huber term is a difference of two ``pos2``
terms plus an affine part. Averaging a term over ``[-r, r]`` (once or twice)
only needs antiderivatives of ``max(v, 0)**k / k!``, which are the same family
with a higher power. When the averaging window does not contain the kink the
term is a polynomial there and moments are used instead, which keeps the
differences well conditioned for small ``r``.
"""

from math import factorial

import numpy as np

ORDERS = ("value", "gradient", "hessian")
DEPTHS = ("single", "double")

_DERIV = {"value": 0, "gradient": 1, "hessian": 2}


def _pos(v, k):
    if k < 0:
        return np.zeros_like(v)
    if k == 0:
        return (v > 0).astype(np.float64)
    return np.maximum(v, 0.0) ** k / factorial(k)


def _window_pos(u, r, k, depth, order):
    """Average of ``pos_k`` (differentiated ``order`` times) around ``u``."""
    u = np.asarray(u, dtype=np.float64)
    d = _DERIV[order]
    if depth == "single":
        width = r
        inside = (_pos(u + r, k + 1 - d) - _pos(u - r, k + 1 - d)) / (2.0 * r)
        var = r * r / 3.0
    else:
        width = 2.0 * r
        p = k + 2 - d
        inside = (_pos(u + 2 * r, p) - 2.0 * _pos(u, p) + _pos(u - 2 * r, p)) / (4.0 * r * r)
        var = 2.0 * r * r / 3.0
    # Right of the window the term is the polynomial u**(k-d)/(k-d)!; the
    # symmetric window only adds the second moment to the quadratic case.
    m = k - d
    if m < 0:
        right = np.zeros_like(u)
    elif m == 0:
        right = np.ones_like(u)
    elif m == 1:
        right = u.copy()
    else:
        right = (u * u + var) / 2.0
    out = np.where(u >= width, right, inside)
    return np.where(u <= -width, 0.0, out)


def _window_poly(t, r, c0, c1, c2, depth, order):
    var = r * r / 3.0 if depth == "single" else 2.0 * r * r / 3.0
    if order == "value":
        return c0 + c1 * t + c2 * (t * t + var) / 2.0
    if order == "gradient":
        return c1 + c2 * t
    return np.full_like(t, c2)


def window_term(term, t, r, depth, order):
    if term[0] == "pos":
        _, k, c, t0 = term
        return c * _window_pos(t - t0, r, k, depth, order)
    _, c0, c1, c2 = term
    return _window_poly(np.asarray(t, dtype=np.float64), r, c0, c1, c2, depth, order)


def eval_term(term, t):
    if term[0] == "pos":
        _, k, c, t0 = term
        return c * _pos(t - t0, k)
    _, c0, c1, c2 = term
    return c0 + c1 * t + 0.5 * c2 * t * t


def separable_smoothed(terms, x, r, depth, order):
    """Smoothed value/gradient/Hessian of ``sum_i g_i(x_i)`` over a cube."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    per_coord = np.array(
        [sum(window_term(term, x[i], r, depth, order) for term in terms[i]) for i in range(n)],
        dtype=np.float64,
    )
    if order == "value":
        return float(np.sum(per_coord))
    if order == "gradient":
        return per_coord
    return np.diag(per_coord)


def quadratic_smoothed(A, x, second_moment, depth, order):
    """Smoothed ``x'Ax/2`` for a domain whose coordinates have variance ``second_moment``."""
    var = second_moment if depth == "single" else 2.0 * second_moment
    if order == "value":
        return float(0.5 * x @ A @ x + 0.5 * np.trace(A) * var)
    if order == "gradient":
        return A @ x
    return np.array(A, dtype=np.float64, copy=True)


def abs_terms(center=0.0, scale=1.0):
    """Terms for ``scale * |t - center|``."""
    return [("pos", 1, 2.0 * scale, center), ("poly", scale * center, -scale, 0.0)]


def huber_terms(delta):
    """Terms for the Huber function with threshold ``delta``."""
    return [
        ("pos", 2, 1.0 / delta, -delta),
        ("pos", 2, -1.0 / delta, delta),
        ("poly", -delta / 2.0, -1.0, 0.0),
    ]


def pwl_terms(slopes, intercepts):
    """Terms for the 1D convex function ``max_j(slopes[j]*t + intercepts[j])``.

    The upper envelope is written as its leftmost affine piece plus one ramp
    per breakpoint, weighted by the slope jump there.
    """
    slopes = np.asarray(slopes, dtype=np.float64)
    intercepts = np.asarray(intercepts, dtype=np.float64)
    order = np.lexsort((intercepts, slopes))
    a, b = slopes[order], intercepts[order]
    # keep, for each slope, only the largest intercept
    keep = np.append(a[1:] != a[:-1], True)
    a, b = a[keep], b[keep]
    hull = []
    for j in range(len(a)):
        while hull:
            i = hull[-1]
            if len(hull) == 1:
                break
            h = hull[-2]
            # piece i is redundant if j overtakes h no later than i does
            x_hi = (b[h] - b[i]) / (a[i] - a[h])
            x_hj = (b[h] - b[j]) / (a[j] - a[h])
            if x_hj <= x_hi:
                hull.pop()
            else:
                break
        hull.append(j)
    terms = [("poly", b[hull[0]], a[hull[0]], 0.0)]
    for h, i in zip(hull[:-1], hull[1:]):
        t_break = (b[h] - b[i]) / (a[i] - a[h])
        terms.append(("pos", 1, a[i] - a[h], t_break))
    return terms
