"""Command line entry point.

Exit codes: 0 success, 1 solver failure, 2 configuration error,
3 property-suite failure.
"""

import argparse
import json
import sys
from dataclasses import asdict

from .corpus import _REGISTRY, get_problem
from .exceptions import ConfigError, StekoptError
from .harness import RunSpec, run_from_spec
from .properties import MODULES, SANDWICH_BOUNDS, run_property_suite

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG, EXIT_SUITE = 0, 1, 2, 3

# flag -> RunSpec field
_RUN_FLAGS = {
    "problem": ("--problem", str), "dim": ("--dim", int), "algorithm": ("--algorithm", str),
    "x0": ("--x0", None), "r0": ("--r0", float), "shrink": ("--shrink", float),
    "eps0": ("--eps0", float), "eps_decay": ("--eps-decay", float),
    "reg0": ("--reg0", float), "reg_decay": ("--reg-decay", float),
    "samples_outer": ("--samples-outer", int), "samples_inner": ("--samples-inner", int),
    "estimator": ("--estimator", str), "quadrature_points": ("--quadrature-points", int),
    "fd_step_factor": ("--fd-step-factor", float), "hessian_rule": ("--hessian-rule", str),
    "seed": ("--seed", int), "tol": ("--tol", float), "max_iters": ("--max-iters", int),
    "max_halvings": ("--max-halvings", int), "shape": ("--shape", str),
    "shrink_rule": ("--shrink-rule", str),
    "baseline_a0": ("--baseline-a0", float), "trace": ("--trace", str),
    "summary": ("--summary", str),
}


def _csv_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser():
    p = argparse.ArgumentParser(prog="stekopt", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one solver configuration")
    run.add_argument("--config", help="JSON file mirroring RunSpec; flags override it")
    for name, (flag, typ) in _RUN_FLAGS.items():
        run.add_argument(flag, dest=name, type=_csv_floats if name == "x0" else typ, default=None)
    run.add_argument("--baseline", dest="baseline", action="store_true", default=None,
                     help="also run subgradient descent with step a0/k")
    run.add_argument("--timing", dest="timing", action="store_true", default=None,
                     help="record wall time in the summary (makes it non-reproducible)")
    run.add_argument("--dump-config", action="store_true",
                     help="print the resolved RunSpec as JSON and exit")

    suite = sub.add_parser("suite", help="run the invariant checks")
    suite.add_argument("--filter", choices=MODULES, default=None)
    suite.add_argument("--seed", type=int, default=0)
    suite.add_argument("--sandwich-bound", choices=SANDWICH_BOUNDS, default="nominal")

    corpus = sub.add_parser("corpus", help="corpus utilities")
    corpus.add_argument("action", choices=["list"])
    return p


def resolve_run_spec(args):
    """RunSpec from ``--config`` (if any) with explicitly given flags on top."""
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = asdict(RunSpec.from_json(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
    for name in list(_RUN_FLAGS) + ["baseline", "timing"]:
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    return RunSpec.from_dict(data)


def _cmd_run(args, out):
    run = resolve_run_spec(args)
    if args.dump_config:
        print(run.to_json(), file=out)
        return EXIT_OK
    summary, _ = run_from_spec(run)
    if not run.summary:
        out.write(summary.to_json())
    else:
        print(f"{summary.problem} {summary.algorithm}: {summary.iterations} iterations, "
              f"stop={summary.stop_reason}, distance={summary.distance_to_known_minimizer:.3g}, "
              f"eps2d_satisfied={summary.eps2d_satisfied}", file=out)
    return EXIT_OK if summary.stop_reason == "step_tol" else EXIT_SOLVER


def _cmd_suite(args, out):
    report = run_property_suite(args.filter, seed=args.seed, sandwich_bound=args.sandwich_bound)
    print(report.format(), file=out)
    return EXIT_OK if report.passed else EXIT_SUITE


def _cmd_corpus(args, out):
    rows = []
    for name, (_, dim, (lo, hi)) in _REGISTRY.items():
        spec = get_problem(name, dim)
        rows.append({
            "name": name, "default_dim": dim, "dims": [lo, hi],
            "lipschitz_const": spec.lipschitz_const, "is_convex": spec.is_convex,
            "has_closed_form_smoothing": spec.has_closed_form_smoothing,
            "minimizer": [float(v) for v in spec.minimizer],
        })
    print(json.dumps(rows, indent=2), file=out)
    return EXIT_OK


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    handlers = {"run": _cmd_run, "suite": _cmd_suite, "corpus": _cmd_corpus}
    try:
        return handlers[args.command](args, out)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StekoptError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
