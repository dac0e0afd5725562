"""Command-line entry point: ``nystromkit <subcommand> ...``.

Exit codes: 0 success, 1 a validation failed, 2 usage, parse or input error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace

import numpy as np

from .approx import LowRankFactorization, approx_error, nystrom_plain, nystrom_stabilized
from .bounds import REPORT_FIELDS, bounds_report
from .errors import ConfigError, InvalidTrials, NystromError, ParseError
from .experiment import build_covariance, build_operator, load_config, run_experiment, _fmt
from .gaussmoments import MIN_TRIALS_MOMENT, run_lemma_suite
from .gpsample import sample_gp, wasserstein_trace_check
from .kernels import Rule
from .linalg import NUC, FRO, OP, read_matrix, write_matrix
from .sketch import CovarianceSpec, draw_sketch, make_rng

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _grid_args(p: argparse.ArgumentParser, n_default: int):
    p.add_argument("--rule", choices=("gauss", "trapezoid"), default="gauss")
    p.add_argument("--n", type=int, default=n_default, help="quadrature nodes per dimension")
    p.add_argument("--d", type=int, choices=(1, 2), default=1, help="domain dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nystromkit", description="Randomized Nystrom approximation with correlated sketches.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("approximate", help="approximate one matrix or kernel operator")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", help="matrix text file ('rows cols' header)")
    src.add_argument("--kernel", help="kernel id, e.g. pretty or sqexp:ell=0.1")
    _grid_args(p, 400)
    p.add_argument("--cov", default="identity", help="'identity', kernel id or matrix file")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algo", choices=("plain", "stabilized"), default="stabilized")
    p.add_argument("--out", help="prefix for <out>_U.txt and <out>_sigma.txt")

    p = sub.add_parser("experiment", help="run a rank sweep from a config file")
    p.add_argument("config")
    p.add_argument("--output", help="override the config's output path")

    p = sub.add_parser("validate-lemmas", help="Monte Carlo check of the Gaussian moment formulas")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--configs", type=int, default=5, help="random shape configurations")
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("validate-bounds", help="Monte Carlo check of the expectation and tail bounds")
    p.add_argument("--matrix", help="matrix file (default: diag(2^-i), i=0..n-1)")
    p.add_argument("--size", type=int, default=20, help="dimension of the default test matrix")
    p.add_argument("--cov", default="identity",
                   help="'identity', 'aligned', 'random' or a matrix file")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tu", nargs="+", default=["2,3", "3,2"], help="(t,u) pairs as t,u")
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("sample-gp", help="sample a Gaussian process from a rank-r Nystrom kernel")
    p.add_argument("--kernel", default="sqexp:ell=0.4")
    _grid_args(p, 32)
    p.add_argument("--cov", default="legproj:deg=25", help="sketch covariance")
    p.add_argument("--r", type=int, default=30, help="sketch width (rank of the approximation)")
    p.add_argument("--batch", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="samples.txt", help="matrix text file of samples (nodes x batch)")
    p.add_argument("--csv", help="optional CSV of grid values, one row per node")
    return parser


def _write_rows(path, fields, rows):
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_cell(row[f]) for f in fields])
    finally:
        if path:
            fh.close()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "pass" if v else "fail"
    if isinstance(v, str):
        return v
    return _fmt(v)


def cmd_approximate(args) -> int:
    if args.p < 1:
        raise ParseError("--p must be >= 1")
    rule = Rule(args.rule, args.n)
    target = build_operator(args.matrix if args.matrix else args.kernel, rule, args.d)
    if args.matrix and args.cov not in ("identity", "I", "i"):
        cov = CovarianceSpec(read_matrix(args.cov))
    else:
        cov = build_covariance(args.cov, target, rule, args.d)
    if args.k < 1 or args.k + args.p > target.n:
        raise ParseError(f"need 1 <= k and k + p <= {target.n}")
    algo = nystrom_plain if args.algo == "plain" else nystrom_stabilized
    F = algo(target.A.entries, draw_sketch(cov, args.k + args.p, args.seed))
    A = target.A
    rel = {n.name: approx_error(A.entries, F, n) / A.norm(n) for n in (NUC, FRO, OP)}
    if args.out:
        write_matrix(f"{args.out}_U.txt", F.U_hat)
        write_matrix(f"{args.out}_sigma.txt", F.sigma_hat.reshape(1, -1))
    print(f"rank={F.r}, err_Tr_rel={rel['Tr']:.6e}, err_F_rel={rel['F']:.6e}, "
          f"err_op_rel={rel['op']:.6e}, nu={F.shift_nu:.6e}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = load_config(args.config)
    if args.output:
        config = replace(config, output=args.output)
    status = EXIT_OK
    for res in run_experiment(config):
        spot = res.spot
        print(f"{res.covariance}: {len(res.rows)} rows -> {res.path}; structural spot check "
              f"{spot.checked} checked, {spot.skipped} skipped, {spot.failures} failed")
        if spot.failures:
            status = EXIT_FAIL
    return status


def cmd_validate_lemmas(args) -> int:
    if args.trials < MIN_TRIALS_MOMENT:
        raise InvalidTrials(f"--trials must be at least {MIN_TRIALS_MOMENT}")
    reports = run_lemma_suite(args.seed, args.configs, args.trials)
    fields = ("formula", "closed_form", "mc_estimate", "stderr", "trials", "pass")
    rows = [{"formula": r.formula, "closed_form": r.closed_form, "mc_estimate": r.mc_estimate,
             "stderr": r.mc_stderr, "trials": r.trials, "pass": r.passed} for r in reports]
    _write_rows(args.out, fields, rows)
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} formulas passed", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def default_bounds_matrix(size: int) -> np.ndarray:
    return np.diag(2.0 ** -np.arange(size))


def bounds_covariance(name: str, n: int, seed: int) -> np.ndarray:
    """Named sketch covariances for the bound audit on ``diag(2^-i)``."""
    if name in ("identity", "I", "i"):
        return np.eye(n)
    if name == "aligned":
        return np.diag(1.0 + np.linspace(1.0, 0.0, n))
    if name == "random":
        G = make_rng(seed, 1 << 41).standard_normal((n, n))
        return G @ G.T / n + 0.1 * np.eye(n)
    return read_matrix(name)


def cmd_validate_bounds(args) -> int:
    A = read_matrix(args.matrix) if args.matrix else default_bounds_matrix(args.size)
    K = bounds_covariance(args.cov, A.shape[0], args.seed)
    tu = []
    for item in args.tu:
        try:
            t, u = (float(v) for v in item.split(","))
        except ValueError:
            raise ParseError(f"--tu expects t,u pairs, got {item!r}") from None
        tu.append((t, u))
    rows = bounds_report(A, K, args.k, args.p, tu=tu, trials=args.trials, seed=args.seed)
    _write_rows(args.out, REPORT_FIELDS, rows)
    failed = sum(not r["pass"] for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} bound checks passed", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_sample_gp(args) -> int:
    if args.r < 0 or args.batch < 1:
        raise ParseError("--r must be >= 0 and --batch >= 1")
    rule = Rule(args.rule, args.n)
    target = build_operator(args.kernel, rule, args.d)
    if args.r > target.n:
        raise ParseError(f"--r must not exceed the grid size {target.n}")
    if args.r == 0:
        F = LowRankFactorization.zero(target.n)
    else:
        cov = build_covariance(args.cov, target, rule, args.d)
        F = nystrom_stabilized(target.A.entries, draw_sketch(cov, args.r, args.seed))
    batch = sample_gp(F, args.batch, args.seed)
    write_matrix(args.out, batch.samples)
    if args.csv:
        values = target.to_grid(batch.samples)
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            coords = [f"x{i + 1}" for i in range(target.nodes.shape[1])]
            writer.writerow(coords + [f"sample_{j}" for j in range(batch.batch)])
            for x, vals in zip(target.nodes, values):
                writer.writerow([_fmt(v) for v in x] + [_fmt(v) for v in vals])
    gap = wasserstein_trace_check(target, F)
    print(f"rank={batch.rank_used}, batch={batch.batch}, trace_gap={gap:.6e}, "
          f"trace_gap_rel={gap / max(np.trace(target.A.entries), 1e-300):.6e}")
    return EXIT_OK


COMMANDS = {
    "approximate": cmd_approximate,
    "experiment": cmd_experiment,
    "validate-lemmas": cmd_validate_lemmas,
    "validate-bounds": cmd_validate_bounds,
    "sample-gp": cmd_sample_gp,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, InvalidTrials, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NystromError as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
