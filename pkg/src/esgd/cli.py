"""Command line interface: ``esgd solve | stability | rates | bench | verify``.

Exit statuses: 0 success, 2 usage error, 3 divergence, 4 failed check.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, bench
from .cheb import make_profile
from .errors import DivergenceError, ESGDError, InvalidInputError, UnsupportedProblemError
from .io import load_sparse_dataset, read_pgm
from .problems import (CompositeProblem, QuadraticProblem, make_elastic_net, make_logistic,
                       make_pde, make_tv, make_wishart_quadratic, synthetic_classification,
                       synthetic_image, synthetic_regression)
from .solvers import SOLVERS, StopRule, run_agd

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_CHECK = 0, 2, 3, 4

VERIFY_S = (1, 2, 5, 10, 50, 150)
VERIFY_ETA = (0.05, 1.17, 2.0, 10.0)
FAULT_PERTURBATION = 1e-3

log = logging.getLogger("esgd")


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------------
# problem specs


def parse_problem_spec(spec: str) -> tuple[str, dict]:
    """Split ``name:k=v,k=v`` into the name and a parameter dict.

    Values are parsed as int, then float, and otherwise kept as strings.
    """
    name, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"bad problem parameter {item!r}, expected key=value")
        for conv in (int, float):
            try:
                params[key.strip()] = conv(val)
                break
            except ValueError:
                continue
        else:
            params[key.strip()] = val.strip()
    return name.strip(), params


def build_problem(name: str, params: dict, seed: int):
    p = dict(params)
    try:
        if name == "wishart":
            prob = make_wishart_quadratic(p.pop("n", 480), p.pop("m", 500), seed)
        elif name == "logistic":
            tau = p.pop("tau", 1e-3)
            if "data" in p:
                design, labels = load_sparse_dataset(p.pop("data"))
            else:
                design, labels = synthetic_classification(p.pop("m", 400), p.pop("d", 100),
                                                          seed=seed, tau=tau)
            prob = make_logistic(design, labels, tau)
        elif name == "elastic_net":
            a, b = synthetic_regression(p.pop("m", 90), p.pop("d", 300), seed=seed)
            prob = make_elastic_net(a, b, p.pop("lam", 0.2), p.pop("tau", 1e-3), p.pop("ell", 1e-2))
        elif name == "pde":
            prob = make_pde(p.pop("d", 100))
        elif name == "tv":
            if "image" in p:
                noisy = read_pgm(p.pop("image"))
            else:
                _, noisy = synthetic_image(p.pop("size", 64), seed=seed)
            prob = make_tv(noisy, p.pop("lam", 6e-2), p.pop("eps", 1e-4))
        else:
            raise UsageError(f"unknown problem {name!r}")
    except TypeError as exc:
        raise UsageError(f"bad parameters for {name}: {exc}") from None
    if p:
        raise UsageError(f"unknown parameters for {name}: {', '.join(sorted(p))}")
    return prob


def check_compatible(solver: str, problem) -> None:
    if solver not in SOLVERS:
        raise UsageError(f"unknown solver {solver!r}")
    if solver == "cg" and not isinstance(problem, QuadraticProblem):
        raise UsageError("cg requires a quadratic problem")
    if solver == "pesgd" and not isinstance(problem, CompositeProblem):
        raise UsageError("pesgd requires a composite problem (quadratic part plus g)")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _write_meta(fh, meta: dict) -> None:
    for k, v in meta.items():
        fh.write(f"# {k}={v}\n")


# ----------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    name, params = parse_problem_spec(args.problem)
    problem = build_problem(name, params, args.seed)
    check_compatible(args.solver, problem)
    if args.reference and problem.has_objective and problem.f_star is None:
        x_ref, _ = run_agd(problem, StopRule(max_grad_evals=500_000, grad_tol=bench.REFERENCE_GRAD_TOL))
        problem.f_star = problem.value(x_ref)
    gap_tol = args.gap_tol
    if args.rel_gap_tol is not None:
        gap_tol = args.rel_gap_tol * problem.gap(problem.initial_point())
    stop = StopRule(max_grad_evals=args.max_grad_evals, grad_tol=args.grad_tol, gap_tol=gap_tol)
    fn = SOLVERS[args.solver]
    try:
        if args.solver in ("esgd", "pesgd"):
            x, trace = fn(problem, args.eta, stop)
        else:
            x, trace = fn(problem, stop)
    except DivergenceError as exc:
        print(f"diverged: {exc} (outer step {exc.iteration}, internal stage {exc.stage})",
              file=sys.stderr)
        return EXIT_DIVERGED
    gap_kind = "f-f*" if problem.has_objective and problem.f_star is not None else "grad_norm"
    meta = {"seed": args.seed, "problem": args.problem, "solver": args.solver,
            "eta": args.eta, "gap": gap_kind}
    if args.out:
        trace.to_csv(args.out, meta=meta)
    print(f"solver={trace.method} final_gap={trace.final_gap:.6e} grad_evals={trace.grad_evals} "
          f"outer_iters={trace.rows[-1].outer_iter} g_evals={trace.g_evals} "
          f"converged={trace.converged}")
    return EXIT_OK


def cmd_stability(args) -> int:
    nx, ny = args.resolution
    if not (1 <= nx <= analysis.MAX_RESOLUTION and 1 <= ny <= analysis.MAX_RESOLUTION):
        raise UsageError(f"resolution must be within 1..{analysis.MAX_RESOLUTION} per axis")
    if args.window is not None and len(args.window) != 4:
        raise UsageError("window needs re_min,re_max,im_min,im_max")
    grid = analysis.stability_domain(args.s, args.eta, args.window, (nx, ny))
    p = make_profile(args.s, args.eta)
    meta = {"seed": args.seed, "s": p.s, "eta": repr(p.eta), "omega0": repr(p.omega0),
            "omega1": repr(p.omega1), "alpha": repr(p.alpha), "L": repr(p.l_damped),
            "delta": repr(p.delta)}
    re, im = grid.re, grid.im
    with open(args.out, "w", newline="") as fh:
        _write_meta(fh, meta)
        w = csv.writer(fh)
        w.writerow(["re", "im", "abs_r"])
        for j in range(ny):
            for i in range(nx):
                w.writerow([f"{re[i]:.17g}", f"{im[j]:.17g}", f"{grid.values[j, i]:.17g}"])
    return EXIT_OK


def cmd_rates(args) -> int:
    if args.kappa is not None:
        kappas = args.kappa
    else:
        if args.points < 8:
            raise UsageError("the kappa grid needs at least 8 points")
        kappas = list(np.geomspace(args.kappa_min, args.kappa_max, args.points))
    if any(k < 1 for k in kappas):
        raise UsageError("condition numbers must be >= 1")
    rows = analysis.rate_gap_table(kappas, args.eta)
    with open(args.out, "w", newline="") as fh:
        _write_meta(fh, {"seed": args.seed, "kappa_points": len(kappas),
                         "eta_list": ",".join(f"{e:g}" for e in args.eta)})
        w = csv.writer(fh)
        w.writerow(["kappa", "eta", "c_esgd", "c_opt", "c_agd", "gap"])
        for r in rows:
            w.writerow([f"{v:.17g}" for v in (r.kappa, r.eta, r.c_esgd, r.c_opt, r.c_agd, r.gap)])
        for eta in args.eta:
            try:
                slope, intercept = analysis.fit_slope(rows, eta)
                fh.write(f"# slope[eta={eta:g}]={slope:.17g} intercept={intercept:.17g}\n")
            except InvalidInputError:
                fh.write(f"# slope[eta={eta:g}]=nan\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    experiments = args.only or bench.EXPERIMENTS
    unknown = set(experiments) - set(bench.EXPERIMENTS)
    if unknown:
        raise UsageError(f"unknown experiments: {', '.join(sorted(unknown))}")
    results = bench.run_suite(args.out_dir, args.seed, experiments, args.params or {})
    failed = 0
    for exp in results:
        for c in exp.checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.label}  [{c.detail}]")
            failed += not c.passed
    print(f"{failed} failed check(s); outputs in {args.out_dir}")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_verify(args) -> int:
    pert = FAULT_PERTURBATION if args.inject_fault else 0.0
    report = analysis.verify_identities(args.s_list, args.eta_list, omega1_perturbation=pert,
                                        seed=args.seed)
    for r in report.results:
        print(f"{'pass' if r.passed else 'FAIL'}  {r.name:20s} s={r.s:<4d} eta={r.eta:<6g} "
              f"worst={r.worst_error:.3e} tol={r.tol:.0e}")
    if not report.passed:
        print(f"{len(report.failures)} identity check(s) failed", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with default option values")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="esgd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="run one solver on one problem")
    p.add_argument("--problem", required=True, help="name:k=v,... e.g. wishart:n=480,m=500")
    p.add_argument("--solver", required=True, choices=sorted(SOLVERS))
    p.add_argument("--eta", type=float, default=1.17)
    p.add_argument("--max-grad-evals", type=int, default=100_000)
    p.add_argument("--grad-tol", type=float, default=0.0)
    p.add_argument("--gap-tol", type=float, default=None)
    p.add_argument("--rel-gap-tol", type=float, default=None,
                   help="stop once the gap falls below this fraction of the initial gap")
    p.add_argument("--reference", action="store_true",
                   help="compute f* first so the trace reports f - f* instead of |grad f|")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("stability", parents=[common], help="sample |R_s(z)| on a complex grid")
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--window", type=_floats, default=None, help="re_min,re_max,im_min,im_max")
    p.add_argument("--resolution", type=_ints, default=[460, 200], help="nx,ny")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("rates", parents=[common], help="tabulate per-evaluation rates against kappa")
    p.add_argument("--kappa", type=_floats, default=None, help="explicit kappa values")
    p.add_argument("--kappa-min", type=float, default=1e2)
    p.add_argument("--kappa-max", type=float, default=1e6)
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--eta", type=_floats, default=[1.17, 2.0, 10.0])
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("bench", parents=[common], help="run the desk-scale benchmark suite")
    p.add_argument("--out-dir", type=Path, default=Path("bench_out"))
    p.add_argument("--only", type=lambda s: s.split(","), default=None,
                   help="comma-separated subset of " + ",".join(bench.EXPERIMENTS))
    p.set_defaults(func=cmd_bench, params=None)

    p = sub.add_parser("verify", parents=[common], help="run the identity suite")
    p.add_argument("--s-list", type=_ints, default=list(VERIFY_S))
    p.add_argument("--eta-list", type=_floats, default=list(VERIFY_ETA))
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    """Parse ``argv``; values from ``--config`` fill in options not given as flags."""
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        cfg = json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    # flags take precedence: re-parse with config values as defaults
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub_action.choices[args.command].set_defaults(**cfg)
    args = parser.parse_args(argv)
    for key in ("out", "out_dir"):
        if isinstance(getattr(args, key, None), str):
            setattr(args, key, Path(getattr(args, key)))
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, UnsupportedProblemError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidInputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ESGDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
