"""Command-line entry point: `regvarlab <subcommand> [--config ...]`."""
import argparse
import csv
import json
import os
import sys

from .. import __version__
from ..errors import NotConverged
from .config import ConfigError, SweepConfig, load_config
from .report import emit
from .sweeps import (run_barrier_verify, run_harnack_sweep, run_holder_sweep, run_lemma_suite,
                     run_op_eval, run_regvar_check, solve_from_config)

RUNNERS = {
    "regvar-check": run_regvar_check,
    "op-eval": run_op_eval,
    "barrier-verify": run_barrier_verify,
    "harnack-sweep": run_harnack_sweep,
    "holder-sweep": run_holder_sweep,
    "lemma-suite": run_lemma_suite,
}


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="INI file with [sweep], [quadrature], [solver] and per-command sections")
    p.add_argument("--out", help="output CSV (default results/<command>.csv)")
    p.add_argument("--seed", type=int, help="seed for randomized instances")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--tol", type=float, help="verification tolerance")
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="regvarlab", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    for name in list(RUNNERS) + ["solve"]:
        sub.add_parser(name, parents=[common])
    return parser


def write_solution(result, problem, path, config):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    dim = result.nodes.shape[1]
    cols = ["x", "y"][:dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols + ["u"])
        for x, v in zip(result.nodes, result.values):
            w.writerow([repr(float(c)) for c in x] + [repr(float(v))])
    meta = {"tool": "regvarlab", "version": __version__, "experiment": "solve",
            "operator": problem.operator, "sigma": problem.kclass.profile.sigma, "R": problem.R, "h": problem.h,
            "exterior": problem.exterior.name, "residual": result.residual,
            "iterations": result.iterations, "converged": result.converged, "method": result.method,
            "config": config.echo()}
    with open(path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else SweepConfig()
        cfg = cfg.with_overrides(seed=args.seed, tol=args.tol)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = args.out or os.path.join("results", f"{args.command}.csv")
    if args.command == "solve":
        problem, res = solve_from_config(cfg)
        if isinstance(res, NotConverged):
            print(f"solve: {res}", file=sys.stderr)
            res = res.solution
        write_solution(res, problem, out, cfg)
        print(f"solve: residual {res.residual:.3e} after {res.iterations} iterations -> {out}")
        return 0 if res.converged else 1
    report = RUNNERS[args.command](cfg, workers=args.jobs)
    emit(report, out, cfg)
    bad = len(report.failures())
    print(f"{args.command}: {len(report.rows)} rows, {bad} failed -> {out}")
    for key, val in sorted(report.summary.items()):
        print(f"  {key} = {val}")
    return 0 if bad == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
