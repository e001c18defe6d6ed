"""Invariant checks for every module, runnable as one suite.

Each check returns a ``CheckResult``; ``run_property_suite`` collects them.
The corpus can be replaced (e.g. by specs with a corrupted Lipschitz
constant) to confirm that the checks actually detect faults.
"""

import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import _quadrature as quad
from .corpus import CORPUS_BOX, list_corpus, make_affine, reference_smoothed
from .harness import RunSpec, read_trace, recompute_summary_from_trace, run_from_spec
from .model import (
    RegularizedSurrogate,
    check_hessian_sandwich,
    surrogate_gradient,
    surrogate_hessian,
    surrogate_value,
)
from .smoothing import (
    AveragingDomain,
    EstimatorConfig,
    certified_hessian_bound,
    double_average_gradient,
    double_average_hessian,
    double_average_value,
    gradient_norm_bound_constant,
    single_average_gradient,
    single_average_value,
)
from .solver import RadiusSchedule, SolverConfig, check_eps_stationarity, solve

MODULES = ("corpus", "smoothing", "model", "solver", "harness")
SANDWICH_BOUNDS = ("nominal", "certified")


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.module}.{self.name}: {self.detail}"


@dataclass
class SuiteReport:
    results: list

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    @property
    def failures(self):
        return [r for r in self.results if not r.passed]

    def format(self):
        lines = [r.line() for r in self.results]
        lines.append(f"{sum(r.passed for r in self.results)}/{len(self.results)} checks passed")
        return "\n".join(lines)


def _box(rng, spec, k, half=CORPUS_BOX):
    return spec.minimizer + rng.uniform(-half, half, size=(k, spec.dim))


def _result(module, name, failures, total, worst):
    return CheckResult(module, name, failures == 0, f"{total - failures}/{total} ok, worst {worst:.3g}")


# -- corpus --------------------------------------------------------------------


def _corpus_checks(specs, rng):
    out = []
    for spec in specs:
        L = spec.lipschitz_const
        X1, X2 = _box(rng, spec, 1000), _box(rng, spec, 1000)
        f1, f2 = spec.value(X1), spec.value(X2)
        dist = np.linalg.norm(X1 - X2, axis=1)
        slack = np.abs(f1 - f2) - L * dist * (1 + 1e-12)
        out.append(_result("corpus", f"lipschitz_bound[{spec.name}]",
                           int(np.sum(slack > 0)), len(dist), float(slack.max())))

        fmin = float(spec.value(spec.minimizer))
        below = np.minimum(f1, f2) - spec.min_value
        bad = int(np.sum(below < -1e-12)) + int(abs(fmin - spec.min_value) > 1e-12)
        out.append(_result("corpus", f"known_minimum[{spec.name}]", bad, len(f1) + 1, float(below.min())))

        G = spec.subgradient(X1)
        gn = np.linalg.norm(G, axis=1) - L * (1 + 1e-12)
        out.append(_result("corpus", f"subgradient_norm[{spec.name}]",
                           int(np.sum(gn > 0)), len(gn), float(gn.max())))

        mid = spec.value(0.5 * (X1 + X2)) - 0.5 * (f1 + f2)
        out.append(_result("corpus", f"convexity[{spec.name}]",
                           int(np.sum(mid > 1e-10)), len(mid), float(mid.max())))

        gap = f2 - f1 - np.einsum("ij,ij->i", G, X2 - X1)
        out.append(_result("corpus", f"subgradient_inequality[{spec.name}]",
                           int(np.sum(gap < -1e-10)), len(gap), float(gap.min())))

        if spec.has_closed_form_smoothing and spec.dim <= 2:
            dom = AveragingDomain("cube", 1.0, spec.dim)
            P = 2000 if spec.dim == 1 else 1000
            worst, bad = 0.0, 0
            for x in spec.minimizer + np.array([[0.0] * spec.dim, [0.3] * spec.dim, [-1.7] * spec.dim]):
                ref = reference_smoothed(spec, dom, x, "value", "single")
                val, _ = quad.cube_average(spec.value, x, 1.0, P, "single", "value")
                rel = abs(val - ref) / max(abs(ref), L * dom.radius)
                worst = max(worst, rel)
                bad += rel > 1e-6
            out.append(_result("corpus", f"closed_form_consistency[{spec.name}]", bad, 3, worst))
    return out


# -- smoothing -----------------------------------------------------------------


def _smoothing_checks(specs, rng, seed):
    out = []
    cfg = EstimatorConfig(seed=seed)
    for spec in specs:
        dom = AveragingDomain("cube", 1.0, spec.dim)
        worst, bad = -np.inf, 0
        for _ in range(100):
            x1, x2 = _box(rng, spec, 2)
            e1, e2 = single_average_value(spec, dom, x1, cfg), single_average_value(spec, dom, x2, cfg)
            excess = (abs(e1.payload - e2.payload) - spec.lipschitz_const * np.linalg.norm(x1 - x2)
                      - 6.0 * (e1.stderr_estimate + e2.stderr_estimate))
            worst = max(worst, excess)
            bad += excess > 1e-12 * max(abs(e1.payload), 1.0)
        out.append(_result("smoothing", f"lipschitz_preservation[{spec.name}]", bad, 100, worst))

    for shape in ("cube", "ball"):
        aff = make_affine([0.7, -1.3], 0.25)
        dom = AveragingDomain(shape, 0.8, 2)
        worst, bad = 0.0, 0
        for x in rng.uniform(-3, 3, size=(5, 2)):
            exact = float(aff.value(x))
            for method in ("quadrature", "monte_carlo"):
                c = EstimatorConfig(method, 2048, 2048, quadrature_points_per_axis=32, seed=seed)
                for fn in (single_average_value, double_average_value):
                    e = fn(aff, dom, x, c)
                    err = abs(e.payload - exact)
                    tol = 1e-10 if method == "quadrature" else 3 * e.stderr_estimate + 1e-12
                    worst = max(worst, err)
                    bad += err > tol
        out.append(_result("smoothing", f"affine_reproduction[{shape}]", bad, 20, worst))

    out.append(_gradient_consistency(specs, rng))

    worst, bad, total = np.inf, 0, 0
    for spec in specs:
        if not spec.is_convex:
            continue
        dom = AveragingDomain("cube", 1.0, spec.dim)
        Ls = gradient_norm_bound_constant(dom, spec.lipschitz_const)
        for x in spec.minimizer + rng.uniform(-3.0, 3.0, size=(20, spec.dim)):
            eig = np.linalg.eigvalsh(double_average_hessian(spec, dom, x, cfg).payload)[0]
            worst = min(worst, eig / Ls)
            bad += eig < -1e-6 * Ls
            total += 1
    out.append(_result("smoothing", "convexity_preservation", bad, total, worst))

    spec = specs[0]
    dom = AveragingDomain("cube", 0.5, spec.dim)
    mc = EstimatorConfig("monte_carlo", 1024, 4096, seed=seed)
    x = spec.minimizer + 0.1
    same = all(
        np.array_equal(fn(spec, dom, x, mc).payload, fn(spec, dom, x, mc).payload)
        for fn in (single_average_value, double_average_gradient, double_average_hessian)
    )
    out.append(CheckResult("smoothing", "determinism", same, "repeated MC estimates bit-identical"))

    out.append(_oracle_equivalence(specs, seed))
    return out


def _rel(err, ref, floor):
    return float(np.max(np.abs(err)) / max(float(np.max(np.abs(ref))), floor))


def _gradient_consistency(specs, rng):
    worst, bad, total = 0.0, 0, 0
    for spec in specs:
        if spec.dim > 2 or (spec.dim > 1 and spec.name != "quad"):
            continue
        P = 2000 if spec.dim == 1 else 100
        cfg = EstimatorConfig("quadrature", quadrature_points_per_axis=P)
        dom = AveragingDomain("cube", 1.0, spec.dim)
        h = 1e-4 * dom.radius
        for x in spec.minimizer + rng.uniform(-2.5, 2.5, size=(4, spec.dim)):
            g = double_average_gradient(spec, dom, x, cfg).payload
            fd = np.empty(spec.dim)
            for i in range(spec.dim):
                e = np.zeros(spec.dim)
                e[i] = h
                fd[i] = (double_average_value(spec, dom, x + e, cfg).payload
                         - double_average_value(spec, dom, x - e, cfg).payload) / (2 * h)
            rel = _rel(g - fd, fd, spec.lipschitz_const)
            worst = max(worst, rel)
            bad += rel > 1e-3
            total += 1
    return _result("smoothing", "gradient_consistency", bad, total, worst)


def _oracle_equivalence(specs, seed):
    worst, bad, total = 0.0, 0, 0
    names = {"abs1d", "l1"}
    for spec in specs:
        if spec.name not in names:
            continue
        dom = AveragingDomain("cube", 1.0, spec.dim)
        P = {1: 200, 2: 100}.get(spec.dim, 72)
        q = EstimatorConfig("quadrature", quadrature_points_per_axis=P)
        m = EstimatorConfig("monte_carlo", 2**14, 2**14, seed=seed)
        for x in spec.minimizer + np.array([[0.0] * spec.dim, [0.4] * spec.dim]):
            for fn, depth, order, floor in (
                (single_average_value, "single", "value", spec.lipschitz_const),
                (single_average_gradient, "single", "gradient", spec.lipschitz_const),
                (double_average_value, "double", "value", spec.lipschitz_const),
                (double_average_gradient, "double", "gradient", spec.lipschitz_const),
                (double_average_hessian, "double", "hessian", spec.lipschitz_const),
            ):
                ref = reference_smoothed(spec, dom, x, order, depth)
                eq = fn(spec, dom, x, q)
                rel = _rel(np.asarray(eq.payload) - ref, ref, floor)
                em = fn(spec, dom, x, m)
                z = np.abs(np.asarray(em.payload) - ref) - 3 * np.asarray(em.stderr) - 1e-12
                worst = max(worst, rel)
                bad += (rel > 1e-4) + bool(np.any(z > 0))
                total += 2
    return _result("smoothing", "oracle_equivalence", bad, total, worst)


# -- model ---------------------------------------------------------------------


def _model_checks(specs, rng, seed, sandwich_bound):
    out = []
    cfg = EstimatorConfig(seed=seed)
    anchor_bad = floor_bad = sand_bad = total = 0
    worst_floor, worst_top = np.inf, 0.0
    for spec in specs:
        dom = AveragingDomain("cube", 1.0, spec.dim)
        Ls = gradient_norm_bound_constant(dom, spec.lipschitz_const)
        upper = certified_hessian_bound(dom, spec.lipschitz_const) if sandwich_bound == "certified" else None
        for x in spec.minimizer + rng.uniform(-2.0, 2.0, size=(20, spec.dim)):
            s = RegularizedSurrogate(spec, dom, cfg, x, Ls)
            anchor_bad += surrogate_value(s, x) != double_average_value(spec, dom, x, cfg).payload
            anchor_bad += not np.array_equal(
                surrogate_gradient(s, x), double_average_gradient(spec, dom, x, cfg).payload
            )
            chk = check_hessian_sandwich(s, x, Ls, upper_bound=upper)
            floor_bad += not chk.floor_ok
            sand_bad += not (chk.lower_ok and chk.upper_ok)
            worst_floor = min(worst_floor, chk.eig_min / (2 * Ls))
            worst_top = max(worst_top, chk.eig_max / Ls)
            total += 1
    out.append(_result("model", "anchor_identities", anchor_bad, 2 * total, 0.0))
    out.append(_result("model", "spectral_floor", floor_bad, total, worst_floor))
    label = "hessian_sandwich" if sandwich_bound == "nominal" else "hessian_sandwich_certified"
    out.append(CheckResult(
        "model", label, sand_bad == 0,
        f"{total - sand_bad}/{total} ok, largest eig_max/L_s {worst_top:.3g}",
    ))
    out.append(_model_fd(specs, rng, seed))
    return out


def _model_fd(specs, rng, seed):
    worst, bad, total = 0.0, 0, 0
    for spec in specs:
        if spec.dim > 1 and spec.name != "quad":
            continue
        P = 2000 if spec.dim == 1 else 100
        cfg = EstimatorConfig("quadrature", quadrature_points_per_axis=P, seed=seed)
        dom = AveragingDomain("cube", 1.0, spec.dim)
        n = spec.dim
        for x in spec.minimizer + rng.uniform(-2.5, 2.5, size=(3, n)):
            s = RegularizedSurrogate(spec, dom, cfg, x + 0.1, 0.5)
            h = 1e-4
            g = surrogate_gradient(s, x)
            H = surrogate_hessian(s, x)
            fd_g, fd_H = np.empty(n), np.empty((n, n))
            for i in range(n):
                e = np.zeros(n)
                e[i] = h
                fd_g[i] = (surrogate_value(s, x + e) - surrogate_value(s, x - e)) / (2 * h)
                hh = 1e-2
                e[i] = hh
                fd_H[:, i] = (surrogate_gradient(s, x + e) - surrogate_gradient(s, x - e)) / (2 * hh)
            rel = max(_rel(g - fd_g, fd_g, spec.lipschitz_const),
                      _rel(H - fd_H, fd_H, 1.0))
            worst = max(worst, rel)
            bad += rel > 1e-3
            total += 1
    return _result("model", "finite_difference_agreement", bad, total, worst)


# -- solver --------------------------------------------------------------------


def _solver_runs(specs, seed):
    for spec in specs:
        for alg in ("stationary", "superlinear"):
            x0 = tuple(np.asarray(spec.minimizer) + np.linspace(1.5, 0.5, spec.dim))
            cfg = SolverConfig(
                algorithm=alg, x0=x0, max_iters=2000,
                eps0=0.1 if alg == "stationary" else 1.0,
                estimator=EstimatorConfig(seed=seed),
            )
            yield spec, cfg, solve(spec, cfg)


def _solver_checks(specs, seed):
    descent_bad = couple_bad = stat_bad = converged = checked = 0
    worst_couple = 0.0
    runs = list(_solver_runs(specs, seed))
    for spec, cfg, res in runs:
        recs = res.records
        for a, b in zip(recs[:-1], recs[1:]):
            if a.s != b.s or a.l < 0:
                continue
            t = 2.0 ** -a.l
            w = a.L_s if cfg.algorithm == "stationary" else a.reg_weight
            lhs = b.surrogate_value + a.reg_weight * (t * a.step_norm) ** 2
            rhs = a.surrogate_value - t * t * 0.5 * w * a.step_norm**2
            descent_bad += lhs > rhs + 1e-12 * max(abs(a.surrogate_value), 1.0)
            checked += 1
        for r in recs:
            ratio = r.step_norm * 2 * r.reg_weight * (1 - 1e-3) / max(r.grad_norm, 1e-300)
            worst_couple = max(worst_couple, ratio)
            couple_bad += ratio > 1 and r.grad_norm > 0
        if res.stop_reason == "step_tol":
            converged += 1
            dom = RadiusSchedule(cfg.r0, cfg.radius_shrink, cfg.shape, spec.dim).domain(recs[-1].s)
            stat_bad += not check_eps_stationarity(res.x_final, dom, spec, 2)
    out = [
        _result("solver", "monotone_descent", descent_bad, checked, 0.0),
        _result("solver", "step_gradient_coupling", couple_bad,
                sum(len(r.records) for *_, r in runs), worst_couple),
        CheckResult("solver", "stationarity_correspondence", stat_bad == 0 and converged > 0,
                    f"{converged - stat_bad}/{converged} converged runs contain x* in x + 2D"),
    ]
    tail_bad = 0
    super_ok = True
    quads = [s for s in specs if s.name == "quad"]
    for spec, cfg, res in runs:
        if spec.name != "quad":
            continue
        tail_bad += any(r.l != 0 for r in res.records[3:])
        if cfg.algorithm == "superlinear":
            q = [r.ratio for r in res.records[1:]][-5:]
            super_ok &= len(q) == 5 and all(b < a for a, b in zip(q[:-1], q[1:])) and q[-1] < 0.5
    out.append(CheckResult("solver", "full_step_tail", bool(quads) and tail_bad == 0,
                           f"{tail_bad} quad runs with l > 0 after iteration 3"))
    out.append(CheckResult("solver", "superlinear_diagnostic", bool(quads) and super_ok,
                           "last 5 quad ratios strictly decreasing, final < 0.5"))
    spec, cfg, res = runs[-1]
    again = solve(spec, cfg)
    same = all(
        np.array_equal(a.x, b.x) and a.step_norm == b.step_norm and a.l == b.l
        for a, b in zip(res.records, again.records)
    ) and len(res.records) == len(again.records)
    out.append(CheckResult("solver", "determinism", same, "repeated run bit-identical"))
    return out


# -- harness -------------------------------------------------------------------


def _harness_checks(specs, seed):
    out = []
    bad_trip = bad_eps = 0
    with tempfile.TemporaryDirectory() as tmp:
        # runs go through the registry by name, as the CLI does
        for i, spec in enumerate(specs):
            run = RunSpec(problem=spec.name, dim=spec.dim, seed=seed,
                          trace=os.path.join(tmp, f"t{i}.csv"),
                          summary=os.path.join(tmp, f"s{i}.json"))
            summary, _ = run_from_spec(run)
            again = recompute_summary_from_trace(run.trace, run)
            bad_trip += summary.to_dict() != again.to_dict()
            rows = read_trace(run.trace)
            dom = AveragingDomain(run.shape, rows[-1]["radius"], spec.dim)
            dist = float(np.linalg.norm(np.asarray(summary.x_final) - spec.minimizer))
            bad_eps += summary.eps2d_satisfied != (dist <= 2 * dom.diameter)
    out.append(_result("harness", "trace_summary_roundtrip", bad_trip, len(specs), 0.0))
    out.append(_result("harness", "eps2d_consistency", bad_eps, len(specs), 0.0))
    return out


def run_property_suite(filter=None, corpus=None, seed=0, sandwich_bound="nominal"):
    """Run the invariant checks of every module (or only ``filter``)."""
    if filter is not None and filter not in MODULES:
        raise ValueError(f"filter must be one of {MODULES}, got {filter!r}")
    if sandwich_bound not in SANDWICH_BOUNDS:
        raise ValueError(f"sandwich_bound must be one of {SANDWICH_BOUNDS}")
    specs = list_corpus() if corpus is None else list(corpus)
    rng = np.random.default_rng(seed)
    results = []
    if filter in (None, "corpus"):
        results += _corpus_checks(specs, rng)
    if filter in (None, "smoothing"):
        results += _smoothing_checks(specs, rng, seed)
    if filter in (None, "model"):
        results += _model_checks(specs, rng, seed, sandwich_bound)
    if filter in (None, "solver"):
        results += _solver_checks(specs, seed)
    if filter in (None, "harness"):
        results += _harness_checks(specs, seed)
    return SuiteReport(results)
