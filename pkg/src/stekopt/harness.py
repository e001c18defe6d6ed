"""Run configuration, trace/summary files, rate diagnostics and a subgradient baseline."""

import csv
import io
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

import numpy as np

from .corpus import get_problem
from .exceptions import ConfigError, InsufficientDataError, StekoptError
from .smoothing import AveragingDomain, EstimatorConfig, diameter
from .solver import SolverConfig, solve

FLOAT_FMT = "%.17g"
STEP_RULES = ("harmonic", "constant")


@dataclass
class RunSpec:
    """Everything needed to reproduce one run; round-trips through JSON.

    ``x0=None`` starts one unit away from the known minimizer in every
    coordinate.
    """

    problem: str = "abs1d"
    dim: Optional[int] = None
    algorithm: str = "superlinear"
    x0: Optional[List[float]] = None
    r0: float = 1.0
    shrink: float = 0.5
    eps0: float = 1.0
    eps_decay: float = 0.9
    reg0: Optional[float] = None
    reg_decay: float = 0.7
    tol: float = 1e-6
    max_iters: int = 500
    max_halvings: int = 30
    shape: str = "cube"
    shrink_rule: str = "keep"
    estimator: str = "auto"
    samples_outer: int = 4096
    samples_inner: int = 4096
    quadrature_points: int = 64
    fd_step_factor: float = 0.1
    hessian_rule: str = "flux"
    seed: int = 0
    baseline: bool = False
    baseline_a0: float = 1.0
    baseline_max_iters: int = 100000
    trace: Optional[str] = None
    summary: Optional[str] = None
    timing: bool = False

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown RunSpec fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def objective(self):
        return get_problem(self.problem, self.dim)

    def estimator_config(self):
        try:
            return EstimatorConfig(
                method=self.estimator, outer_samples=self.samples_outer,
                inner_samples=self.samples_inner,
                quadrature_points_per_axis=self.quadrature_points,
                fd_step_factor=self.fd_step_factor, seed=self.seed,
                hessian_rule=self.hessian_rule,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def start_point(self, spec):
        if self.x0 is not None:
            return tuple(float(v) for v in self.x0)
        return tuple(float(v) for v in np.asarray(spec.minimizer) + 1.0)

    def solver_config(self, spec):
        try:
            return SolverConfig(
                algorithm=self.algorithm, x0=self.start_point(spec), r0=self.r0,
                radius_shrink=self.shrink, eps0=self.eps0, eps_decay=self.eps_decay,
                reg0=self.reg0, reg_decay=self.reg_decay, step_tol=self.tol,
                max_iters=self.max_iters, max_halvings=self.max_halvings,
                estimator=self.estimator_config(), shape=self.shape,
                shrink_rule=self.shrink_rule,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class ReportSummary:
    problem: str
    dim: int
    algorithm: str
    iterations: int
    stop_reason: str
    x_final: List[float]
    distance_to_known_minimizer: float
    eps2d_radius: float
    eps2d_satisfied: bool
    final_radius: float
    final_ratio: Optional[float]
    ratio_series: List[float]
    superlinear_flag: Optional[bool] = None
    wall_time: Optional[float] = None
    baseline_iterations: Optional[int] = None
    baseline_reached: Optional[bool] = None
    error: Optional[str] = None

    def to_dict(self):
        out = asdict(self)
        if out["wall_time"] is None:
            del out["wall_time"]
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"


def estimate_rate(records):
    """Step ratios ``||Delta_{k+1}|| / ||Delta_k||`` and a superlinear flag.

    ``records`` are iteration records or plain step norms. The flag is set
    when the last ``min(5, len - 1)`` ratios strictly decrease and the final
    one is below 0.5.
    """
    norms = [float(getattr(r, "step_norm", r)) for r in records]
    if len(norms) < 3:
        raise InsufficientDataError(f"need at least 3 records, got {len(norms)}")
    ratios = [b / a if a > 0 else math.inf for a, b in zip(norms[:-1], norms[1:])]
    tail = ratios[-min(5, len(ratios)):]
    flag = all(b < a for a, b in zip(tail[:-1], tail[1:])) and tail[-1] < 0.5
    return {"ratios": ratios, "superlinear_flag": bool(flag)}


def _distance(x, spec):
    return float(np.linalg.norm(np.asarray(x) - np.asarray(spec.minimizer)))


@dataclass
class BaselineResult:
    iterations: Optional[int]
    reached: bool
    x_final: np.ndarray
    distances: List[float] = field(repr=False, default_factory=list)
    values: List[float] = field(repr=False, default_factory=list)


def run_baseline_subgradient(spec, x0, step_rule="harmonic", a0=1.0, max_iters=100000,
                             target_distance=None):
    """Subgradient descent ``x <- x - a_k g(x)`` with ``a_k = a0 / k`` or ``a0``.

    Returns the first iteration count at which the distance to the known
    minimizer is at most ``target_distance`` (0 if ``x0`` already is).
    Without a target the full ``max_iters`` run is recorded.
    """
    if step_rule not in STEP_RULES:
        raise ConfigError(f"step_rule must be one of {STEP_RULES}, got {step_rule!r}")
    x = np.array(x0, dtype=np.float64).reshape(spec.dim)
    dists = [_distance(x, spec)]
    vals = [float(spec.value(x))]
    if target_distance is not None and dists[0] <= target_distance:
        return BaselineResult(0, True, x, dists, vals)
    for k in range(1, max_iters + 1):
        a = a0 / k if step_rule == "harmonic" else a0
        x = x - a * np.asarray(spec.subgradient(x), dtype=np.float64)
        dists.append(_distance(x, spec))
        vals.append(float(spec.value(x)))
        if target_distance is not None and dists[-1] <= target_distance:
            return BaselineResult(k, True, x, dists, vals)
    return BaselineResult(None if target_distance is not None else max_iters,
                          target_distance is None, x, dists, vals)


def iterations_to_distance(records, spec, target):
    """1-based index of the first record within ``target`` of the minimizer, or None."""
    for r in records:
        if _distance(r.x, spec) <= target:
            return r.k
    return None


# -- trace files ---------------------------------------------------------------


def trace_header(dim):
    return (["k", "s"] + [f"x{i}" for i in range(dim)]
            + ["surrogate_value", "grad_norm", "step_norm", "l", "radius", "L_s",
               "reg_weight", "ratio"])


def _fmt(v):
    return FLOAT_FMT % v


def format_trace(records, dim):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header(dim))
    for r in records:
        w.writerow(
            [r.k, r.s] + [_fmt(v) for v in r.x]
            + [_fmt(r.surrogate_value), _fmt(r.grad_norm), _fmt(r.step_norm), r.l,
               _fmt(r.radius), _fmt(r.L_s), _fmt(r.reg_weight), _fmt(r.ratio)]
        )
    return buf.getvalue()


def read_trace(path):
    """Rows of a trace file as dicts with ``x`` collected into a vector."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        xs = sorted((k for k in row if k.startswith("x") and k[1:].isdigit()), key=lambda k: int(k[1:]))
        out.append({
            "k": int(row["k"]), "s": int(row["s"]), "l": int(row["l"]),
            "x": np.array([float(row[k]) for k in xs]),
            **{k: float(row[k]) for k in ("surrogate_value", "grad_norm", "step_norm",
                                          "radius", "L_s", "reg_weight", "ratio")},
        })
    return out


def atomic_write(path, text):
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- summaries -----------------------------------------------------------------


def _summarize(run, spec, xs, ratios, stop_reason, final_radius, iterations):
    dim = spec.dim
    domain = AveragingDomain(run.shape, final_radius, dim)
    x_final = [float(v) for v in xs[-1]]
    dist = _distance(x_final, spec)
    eps2d = 2.0 * diameter(domain)
    series = [float(q) for q in ratios[1:]]
    flag = None
    if len(series) >= 2:
        tail = series[-min(5, len(series)):]
        flag = bool(all(b < a for a, b in zip(tail[:-1], tail[1:])) and tail[-1] < 0.5)
    return ReportSummary(
        problem=spec.name, dim=dim, algorithm=run.algorithm, iterations=iterations,
        stop_reason=stop_reason, x_final=x_final, distance_to_known_minimizer=dist,
        eps2d_radius=eps2d, eps2d_satisfied=bool(dist <= eps2d), final_radius=final_radius,
        final_ratio=series[-1] if series else None, ratio_series=series,
        superlinear_flag=flag,
    )


def _attach_baseline(summary, run, spec):
    if not run.baseline:
        return summary
    target = max(summary.distance_to_known_minimizer, np.finfo(float).tiny)
    base = run_baseline_subgradient(
        spec, run.start_point(spec), "harmonic", run.baseline_a0,
        run.baseline_max_iters, target_distance=target,
    )
    summary.baseline_iterations = base.iterations
    summary.baseline_reached = base.reached
    return summary


def _stop_from_trace(run, rows):
    last = rows[-1]
    if last["l"] < 0:
        return "line_search_exhausted"
    if last["step_norm"] < run.tol:
        return "step_tol"
    return "max_iters"


def recompute_summary_from_trace(trace_path, run):
    """Rebuild the summary of ``run`` from its trace file alone (plus the baseline rerun)."""
    spec = run.objective()
    rows = read_trace(trace_path)
    if not rows:
        raise InsufficientDataError("empty trace")
    summary = _summarize(
        run, spec, [r["x"] for r in rows], [r["ratio"] for r in rows],
        _stop_from_trace(run, rows), rows[-1]["radius"], len(rows),
    )
    return _attach_baseline(summary, run, spec)


def run_from_spec(run):
    """Execute ``run``; write trace and summary if paths are set.

    Returns ``(summary, result)``. Solver errors raised mid-run are caught
    and reported in ``summary.error`` with ``stop_reason="error"`` (``result``
    is then None).
    """
    spec = run.objective()
    cfg = run.solver_config(spec)
    t0 = time.perf_counter()
    try:
        result = solve(spec, cfg)
    except StekoptError as exc:
        if isinstance(exc, ConfigError):
            raise
        summary = ReportSummary(
            problem=spec.name, dim=spec.dim, algorithm=run.algorithm, iterations=0,
            stop_reason="error", x_final=list(cfg.x0), distance_to_known_minimizer=math.nan,
            eps2d_radius=math.nan, eps2d_satisfied=False, final_radius=math.nan,
            final_ratio=None, ratio_series=[], error=f"{type(exc).__name__}: {exc}",
        )
        if run.summary:
            atomic_write(run.summary, summary.to_json())
        return summary, None
    elapsed = time.perf_counter() - t0
    recs = result.records
    summary = _summarize(
        run, spec, [r.x for r in recs], [r.ratio for r in recs], result.stop_reason,
        result.final_radius, len(recs),
    )
    summary = _attach_baseline(summary, run, spec)
    if run.timing:
        summary.wall_time = elapsed
    if run.trace:
        atomic_write(run.trace, format_trace(recs, spec.dim))
    if run.summary:
        atomic_write(run.summary, summary.to_json())
    return summary, result
