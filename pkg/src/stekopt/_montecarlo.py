"""Monte Carlo window averages with counter-keyed sample blocks.

Samples are drawn in blocks of ``_CHUNK`` estimation units. Block ``b`` of
stream ``s`` comes from ``Philox(SeedSequence(seed, spawn_key=(s, b)))``, so
an estimate depends only on the configuration, never on call order or on how
blocks are split across workers, and every query point sees the same samples
(common random numbers). Samples are drawn for the unit domain and scaled by
the radius.

A double average uses ``N`` outer units. Unit ``a`` draws one outer point
``z_a`` and its own ``m = max(1, M // N)`` inner points ``y_ab``, so the inner
budget ``M`` is split across outer units and the units are independent; the
reported standard error is the spread of unit means over ``sqrt(N)``.
"""

import numpy as np

_CHUNK = 2048
STREAM_INNER, STREAM_OUTER, STREAM_FACE = 1, 2, 3


def _generator(seed, stream, block):
    ss = np.random.SeedSequence(int(seed), spawn_key=(stream, block))
    return np.random.Generator(np.random.Philox(ss))


def _volume(rng, shape, size, n):
    if shape == "cube":
        return rng.uniform(-1.0, 1.0, size + (n,))
    g = rng.standard_normal(size + (n,))
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    return g * rng.uniform(size=size + (1,)) ** (1.0 / n)


def _surface(rng, shape, size, n):
    """Cube: uniform in the cube (one coordinate is later pinned to +-1).
    Ball: uniform on the unit sphere."""
    if shape == "cube":
        return rng.uniform(-1.0, 1.0, size + (n,))
    g = rng.standard_normal(size + (n,))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


class _Moments:
    """Streaming mean and squared deviations, merged block by block."""

    def __init__(self):
        self.count = 0
        self.mean = None
        self.m2 = None

    def add(self, block):
        b = block.shape[0]
        mu = block.mean(axis=0)
        m2 = ((block - mu) ** 2).sum(axis=0)
        if self.count == 0:
            self.count, self.mean, self.m2 = b, mu, m2
            return
        total = self.count + b
        delta = mu - self.mean
        self.mean = self.mean + delta * (b / total)
        self.m2 = self.m2 + m2 + delta * delta * (self.count * b / total)
        self.count = total

    def stderr(self):
        if self.count < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / (self.count - 1) / self.count)


def _layout(cfg, depth):
    if depth == "single":
        return cfg.inner_samples, 1
    return cfg.outer_samples, max(1, cfg.inner_samples // cfg.outer_samples)


def _blocks(cfg, domain, depth, units, m, face=False):
    """Yield ``(z, y)`` offsets of shape ``(b, 1, n)`` and ``(b, m, n)``."""
    n = domain.dim
    for block, start in enumerate(range(0, units, _CHUNK)):
        b = min(_CHUNK, units - start)
        if depth == "double":
            z = _volume(_generator(cfg.seed, STREAM_OUTER, block), domain.shape, (b, 1), n)
        else:
            z = np.zeros((b, 1, n))
        if face:
            y = _surface(_generator(cfg.seed, STREAM_FACE, block), domain.shape, (b, m), n)
        else:
            y = _volume(_generator(cfg.seed, STREAM_INNER, block), domain.shape, (b, m), n)
        yield z * domain.radius, y


def average(f, grad, x, domain, cfg, depth, order):
    """Return ``(payload, stderr, evaluations)``."""
    units, m = _layout(cfg, depth)
    r = domain.radius
    acc = _Moments()
    evals = 0
    if order == "value":
        f_ref = float(f(x))
        evals += 1
        for z, y in _blocks(cfg, domain, depth, units, m):
            vals = np.asarray(f(x + z + r * y), dtype=np.float64) - f_ref
            acc.add(vals.mean(axis=1))
            evals += vals.size
        return f_ref + float(acc.mean), float(acc.stderr()), evals
    if order == "gradient":
        for z, y in _blocks(cfg, domain, depth, units, m):
            G = np.asarray(grad(x + z + r * y), dtype=np.float64)
            acc.add(G.mean(axis=1))
            evals += G.shape[0] * G.shape[1]
        return acc.mean, acc.stderr(), evals
    raise ValueError(f"unsupported order {order!r}")


def hessian_flux(grad, x, domain, cfg):
    """Double-average Hessian from boundary fluxes of the inner average.

    For the cube, column ``j`` of the inner Hessian at ``w`` is the difference
    of mean subgradients on the faces ``y_j = +r`` and ``y_j = -r`` divided by
    ``2r``; both faces share the other coordinates. For the ball it is
    ``(n / 2r) E[(g(w + ru) - g(w - ru)) u^T]`` with ``u`` on the sphere.
    """
    units, m = _layout(cfg, "double")
    n, r = domain.dim, domain.radius
    acc = _Moments()
    evals = 0
    for z, u in _blocks(cfg, domain, "double", units, m, face=True):
        w = x + z
        if domain.shape == "cube":
            cols = []
            for j in range(n):
                up, dn = u.copy(), u.copy()
                up[..., j], dn[..., j] = 1.0, -1.0
                D = np.asarray(grad(w + r * up), dtype=np.float64) - grad(w + r * dn)
                cols.append(D.mean(axis=1) / (2.0 * r))
                evals += 2 * D.shape[0] * D.shape[1]
            U = np.stack(cols, axis=-1)
        else:
            D = np.asarray(grad(w + r * u), dtype=np.float64) - grad(w - r * u)
            U = np.einsum("bki,bkj->bij", D, u) * (n / (2.0 * r * m))
            evals += 2 * D.shape[0] * D.shape[1]
        acc.add(0.5 * (U + np.swapaxes(U, -1, -2)))
    return acc.mean, acc.stderr(), evals


def hessian_fd(grad, x, domain, cfg, step):
    """Central differences of the double-average gradient, same samples at ``x +- step e_j``."""
    units, m = _layout(cfg, "double")
    n, r = domain.dim, domain.radius
    acc = _Moments()
    evals = 0
    for z, y in _blocks(cfg, domain, "double", units, m):
        base = x + z + r * y
        cols = []
        for j in range(n):
            e = np.zeros(n)
            e[j] = step
            D = np.asarray(grad(base + e), dtype=np.float64) - grad(base - e)
            cols.append(D.mean(axis=1) / (2.0 * step))
            evals += 2 * D.shape[0] * D.shape[1]
        U = np.stack(cols, axis=-1)
        acc.add(0.5 * (U + np.swapaxes(U, -1, -2)))
    return acc.mean, acc.stderr(), evals
