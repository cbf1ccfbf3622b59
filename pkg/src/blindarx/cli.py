"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 solver failure,
3 infeasible problem.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .arx import ArxModel, ModelOrders, NoiseSpec, simulate
from .experiments import (
    BasisSpec,
    Scenario,
    export_plot_data,
    export_trials,
    monte_carlo,
    paper_example,
)
from .io import SeriesFormatError, dump_json, read_series, write_series
from .lifting import build_lifted_problem, check_recoverability
from .solver import (
    InfeasibleError,
    SolverConfig,
    SolverError,
    lambda_min,
    lambda_search,
    solve_bounded,
    solve_noise_free,
    solve_penalized,
)
from .subspace import basis_from_spec, load_basis, save_basis

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_INFEASIBLE = 0, 1, 2, 3

CONVENTIONS = """\
Conventions:
  Time indices are 1-based everywhere (CSV column t, printed output):
  sample y(t) is row t of the series file.
  Input and b coefficients are identifiable only up to a common scalar.
  Estimates are normalized so that ||b|| = 1 and the first nonzero entry
  of b is positive; x and u carry the remaining scale.
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    return [float(v) for v in text.split(",")]


def _add_orders(p, required=True):
    p.add_argument("--na", type=int, required=required, help="number of AR coefficients")
    p.add_argument("--nb", type=int, required=required, help="number of input coefficients")
    p.add_argument("--nk", type=int, default=0, help="input delay in samples (default 0)")


def _add_basis_source(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--basis-file", help="header-less CSV, N rows x m columns")
    g.add_argument(
        "--basis-spec",
        help="inline basis: zoh:hold=6 | dft:m=5 | gaussian:m=10,seed=3",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="blindarx",
        description="Blind ARX identification from output-only data by rank-1 lifting.",
        epilog=CONVENTIONS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fmt = argparse.RawDescriptionHelpFormatter
    p = sub.add_parser("simulate", help="simulate an ARX model driven by u = D x", epilog=CONVENTIONS, formatter_class=fmt)
    _add_orders(p, required=False)
    p.add_argument("--a", type=_floats, default=None, help="comma-separated AR coefficients")
    p.add_argument("--b", type=_floats, required=True, help="comma-separated input coefficients")
    p.add_argument("--basis", choices=["zoh", "dft", "gaussian", "file"], default="zoh")
    p.add_argument("--hold", type=int, help="ZOH hold length")
    p.add_argument("--m", type=int, help="subspace dimension (dft, gaussian)")
    p.add_argument("--basis-seed", type=int, default=0, help="seed of the gaussian basis")
    p.add_argument("--basis-file", help="basis CSV for --basis file")
    p.add_argument("--N", type=int, required=True, help="number of samples")
    p.add_argument("--noise", choices=["none", "uniform", "gaussian"], default="none")
    p.add_argument("--eps", type=float, default=0.0, help="uniform width, or gaussian std")
    p.add_argument("--seed", type=int, default=0, help="seed for x and the noise")
    p.add_argument("--out", required=True, help="series CSV; ground truth goes to <out>.truth.json")
    p.add_argument("--out-basis", help="also write the basis matrix CSV here")

    p = sub.add_parser("paper-example", help="simulate the ZOH example (a=-0.3, b=3,2,1, hold 6, N=60)", epilog=CONVENTIONS, formatter_class=fmt)
    p.add_argument("--eps", type=float, default=0.0, help="uniform noise width")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--out-basis")

    p = sub.add_parser("identify", help="blind identification from an output series", epilog=CONVENTIONS, formatter_class=fmt)
    p.add_argument("--in", dest="inp", required=True, help="series CSV with columns t,y")
    _add_basis_source(p)
    _add_orders(p)
    p.add_argument("--mode", choices=["exact", "bounded", "penalized", "search"], default="exact")
    p.add_argument("--eps-box", type=float, help="noise bound for --mode bounded")
    p.add_argument("--lambda", dest="lam", type=float, help="penalty weight for --mode penalized")
    p.add_argument("--config", help="solver config JSON")
    p.add_argument("--out", help="estimate JSON (default: stdout)")
    p.add_argument("--trace", help="write the iteration trace CSV here")

    for name, helptext in (
        ("lambda-min", "largest penalty weight giving the zero lifted matrix"),
        ("check-recovery", "full-column-rank test of the lifted constraint matrix"),
    ):
        p = sub.add_parser(name, help=helptext, epilog=CONVENTIONS, formatter_class=fmt)
        p.add_argument("--in", dest="inp", required=True)
        _add_basis_source(p)
        _add_orders(p)
        if name == "lambda-min":
            p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("montecarlo", help="noise-level sweep", epilog=CONVENTIONS, formatter_class=fmt)
    p.add_argument("--scenario", help="scenario JSON (default: the built-in ZOH example)")
    p.add_argument("--levels", type=_floats, default=[0.0, 1.0, 2.5, 5.0])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-summary", required=True)
    p.add_argument("--out-trials")
    p.add_argument("--parallel", type=int, default=1)
    return parser


def _truth_path(out) -> Path:
    return Path(out).with_suffix(".truth.json")


def _simulate_and_write(model: ArxModel, basis, basis_spec: str, noise: NoiseSpec, seed: int, out, out_basis):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(basis.m)
    noise_seed = int(rng.integers(2**63))
    u = basis.D @ x
    y = simulate(model, u, noise, seed=noise_seed)
    write_series(out, y.y, u)
    if out_basis:
        save_basis(basis, out_basis)
    o = model.orders
    truth = {
        "orders": {"n_a": o.n_a, "n_b": o.n_b, "n_k": o.n_k},
        "a": model.a.tolist(),
        "b": model.b.tolist(),
        "x": x.tolist(),
        "u": u.tolist(),
        "basis_spec": basis_spec,
        "N": int(y.N),
        "noise": {"kind": noise.kind, "parameter": noise.parameter},
        "seed": seed,
    }
    dump_json(truth, _truth_path(out))


def cmd_simulate(args) -> int:
    a = args.a or []
    if args.na is not None and args.na != len(a):
        raise UsageError(f"--na={args.na} but --a has {len(a)} values")
    if args.nb is not None and args.nb != len(args.b):
        raise UsageError(f"--nb={args.nb} but --b has {len(args.b)} values")
    if args.basis == "zoh":
        if args.hold is None:
            raise UsageError("--basis zoh needs --hold")
        spec = f"zoh:hold={args.hold}"
    elif args.basis in ("dft", "gaussian"):
        if args.m is None:
            raise UsageError(f"--basis {args.basis} needs --m")
        spec = f"dft:m={args.m}" if args.basis == "dft" else f"gaussian:m={args.m},seed={args.basis_seed}"
    else:
        if not args.basis_file:
            raise UsageError("--basis file needs --basis-file")
        spec = f"file:path={args.basis_file}"
    if args.noise != "none" and args.eps <= 0:
        raise UsageError(f"--noise {args.noise} needs --eps > 0")
    model = ArxModel.from_coefficients(a, args.b, n_k=args.nk)
    basis = basis_from_spec(spec, args.N)
    noise = NoiseSpec(args.noise, args.eps if args.noise != "none" else 0.0)
    _simulate_and_write(model, basis, spec, noise, args.seed, args.out, args.out_basis)
    return EXIT_OK


def cmd_paper_example(args) -> int:
    sc = paper_example(args.eps)
    basis = sc.basis.build(sc.N)
    _simulate_and_write(sc.true_model, basis, "zoh:hold=6", sc.noise, args.seed, args.out, args.out_basis)
    return EXIT_OK


def _load_problem(args):
    y, _ = read_series(args.inp)
    if args.basis_file:
        basis = load_basis(args.basis_file)
        if basis.N != y.size:
            raise UsageError(f"basis has N={basis.N} rows, series has N={y.size}")
    else:
        basis = basis_from_spec(args.basis_spec, y.size)
    orders = ModelOrders(args.na, args.nb, args.nk)
    return build_lifted_problem(y, basis, orders)


def cmd_identify(args) -> int:
    if args.mode == "bounded" and args.eps_box is None:
        raise UsageError("--mode bounded needs --eps-box")
    if args.mode == "penalized" and args.lam is None:
        raise UsageError("--mode penalized needs --lambda")
    config = SolverConfig.from_json(args.config) if args.config else SolverConfig()
    problem = _load_problem(args)
    if args.mode == "exact":
        est = solve_noise_free(problem, config)
    elif args.mode == "bounded":
        est = solve_bounded(problem, args.eps_box, config)
    elif args.mode == "penalized":
        est = solve_penalized(problem, args.lam, config)
    else:
        _, est = lambda_search(problem, config)
    out = est.to_dict()
    o = problem.orders
    out = {"mode": args.mode, "orders": {"n_a": o.n_a, "n_b": o.n_b, "n_k": o.n_k}, **out}
    if args.mode == "penalized":
        out["lambda_min"] = lambda_min(problem)
    text = dump_json(out, args.out)
    if not args.out:
        sys.stdout.write(text)
    if args.trace and est.report is not None:
        est.report.write_trace(args.trace)
    return EXIT_OK


def cmd_lambda_min(args) -> int:
    v = lambda_min(_load_problem(args))
    if args.json:
        sys.stdout.write(dump_json({"lambda_min": v}))
    else:
        print("inf" if np.isinf(v) else f"{v:.12g}")
    return EXIT_OK


def cmd_check_recovery(args) -> int:
    rep = check_recoverability(_load_problem(args))
    sys.stdout.write(dump_json(rep.to_dict()))
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.parallel < 1:
        raise UsageError("--parallel must be >= 1")
    if not args.levels:
        raise UsageError("--levels must list at least one noise level")
    sc = Scenario.load(args.scenario) if args.scenario else paper_example(0.0)
    summary = monte_carlo(sc, args.levels, args.trials, args.seed, parallel=args.parallel)
    export_plot_data(summary, args.out_summary)
    if args.out_trials:
        export_trials(summary, args.out_trials)
    if np.any(summary.count == 0):
        bad = summary.noise_levels[summary.count == 0]
        print(f"every trial failed at noise level(s) {bad.tolist()}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "paper-example": cmd_paper_example,
    "identify": cmd_identify,
    "lambda-min": cmd_lambda_min,
    "check-recovery": cmd_check_recovery,
    "montecarlo": cmd_montecarlo,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore")
            return COMMANDS[args.command](args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, SeriesFormatError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
