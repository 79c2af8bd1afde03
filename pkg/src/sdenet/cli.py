"""Command-line entry point: ``sdenet <subcommand> [options]``.

Exit status: 0 on success, 1 on usage or input errors, 2 when a
verification fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import SdenetError

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2

class UsageError(Exception):
    pass

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)

def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)

def _load_model(args):
    from .dynamics import explicit_model, make_laplacian_model, make_random_binary_model
    from .fileio import read_matrix

    if args.model:
        return explicit_model(read_matrix(args.model))
    if args.p is None:
        raise UsageError("give --model FILE or --p (with --k) for a random model")
    if args.ensemble == "laplacian":
        from .dynamics import random_bounded_degree_graph
        from .rng import MODEL_STREAM, stream

        adj = random_bounded_degree_graph(args.p, int(args.k), stream(args.seed, MODEL_STREAM))
        return make_laplacian_model(adj, args.m)
    return make_random_binary_model(args.p, args.k, args.seed, args.ensemble)

def cmd_simulate(args) -> int:
    from .dynamics import simulate_continuous, simulate_discrete
    from .fileio import format_trajectory, write_matrix

    model = _load_model(args)
    if args.mode == "discrete":
        if args.n is None:
            raise UsageError("discrete simulation needs --n")
        traj = simulate_discrete(model, args.eta, args.n, args.seed, noise=not args.noiseless)
    else:
        if args.T is None:
            raise UsageError("continuous simulation needs --T")
        traj = simulate_continuous(model, args.T, args.delta, args.eta, args.seed, keep_inner=False)
    if args.model_out:
        write_matrix(args.model_out, model.A0)
    _emit(format_trajectory(traj), args.out)
    return EXIT_OK

def cmd_estimate(args) -> int:
    from .dynamics import explicit_model
    from .estimator import Fixed, OracleGrid, recover_network
    from .fileio import format_estimate_report, read_matrix, read_trajectory

    traj = read_trajectory(args.trajectory)
    model = explicit_model(read_matrix(args.model)) if args.model else None
    if args.oracle:
        if model is None:
            raise UsageError("--oracle needs --model with the true drift matrix")
        strategy = OracleGrid()
    else:
        if args.lam is None:
            raise UsageError("give --lambda or --oracle")
        strategy = Fixed(args.lam)
    rows = None if args.rows is None else [int(r) for r in args.rows.split(",")]
    net = recover_network(traj, strategy, model=model, rows=rows, tol=args.tol)
    _emit(format_estimate_report(net.estimates, args.format), args.out)
    return EXIT_OK

def cmd_conditions(args) -> int:
    from .conditions import compute_condition_report
    from .dynamics import explicit_model
    from .fileio import format_condition_report_json, format_condition_report_kv, read_matrix

    model = explicit_model(read_matrix(args.model_file))
    rows = range(model.p) if args.row is None else [args.row]
    reports = [compute_condition_report(model, r, eta=args.eta, delta=args.delta_conf) for r in rows]
    if args.out:
        base = Path(args.out)
        base.mkdir(parents=True, exist_ok=True)
        for rep in reports:
            (base / f"row{rep.row}.txt").write_text(format_condition_report_kv(rep))
            (base / f"row{rep.row}.json").write_text(format_condition_report_json(rep))
    elif args.format == "json":
        sys.stdout.write(json.dumps([json.loads(format_condition_report_json(r)) for r in reports], indent=2) + "\n")
    else:
        sys.stdout.write("\n".join(format_condition_report_kv(r) for r in reports))
    return EXIT_OK

def _sweep_summary(result, fmt) -> str:
    from .fileio import to_json

    rows = [c.row() for c in result.cells]
    if fmt == "json":
        return to_json(rows)
    keys = list(rows[0])
    lines = [",".join(keys)] + [",".join("%.6g" % v if isinstance(v, float) else str(v) for v in r.values()) for r in rows]
    return "\n".join(lines) + "\n"

def _plots(result, out):
    from .harness import emit_plots

    cfg = result.config
    written = []
    if len(cfg.T) > 1:
        written += emit_plots(result, "rate-vs-T", out)
    if len(cfg.eta) > 1:
        written += emit_plots(result, "rate-vs-eta", out)
    if len(cfg.p) > 1 and len(cfg.T) > 1:
        written += emit_plots(result, "complexity-vs-p", out)
    return written

def cmd_sweep(args) -> int:
    import dataclasses

    from .harness import ExperimentConfig, run_sweep

    if not args.config:
        raise UsageError("sweep needs --config FILE")
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, base_seed=args.seed)
    out = args.out or cfg.output_dir
    result = run_sweep(cfg, threads=args.threads, out_dir=out, resume=not args.fresh)
    _plots(result, Path(out) / "plots")
    sys.stdout.write(_sweep_summary(result, args.format))
    return EXIT_OK

def cmd_verify(args) -> int:
    from .appendix import run_appendix_suite

    checks = run_appendix_suite(args.seed or 0)
    for c in checks:
        print(c.line())
    if args.out:
        Path(args.out).write_text(json.dumps([c.__dict__ for c in checks], indent=2) + "\n")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY

def reproduce(name: str, seed: int = 0, out=None, threads=None, trials: int = 256) -> dict:
    """Run a canned reproduction and write its plots and summary.json."""
    from .harness import canned_config, complexity_fit, run_sweep

    cfg = canned_config(name, base_seed=seed, output_dir=out, trials=trials)
    out = Path(cfg.output_dir)
    result = run_sweep(cfg, threads=threads, out_dir=out)
    _plots(result, out / "plots")
    summary = {"name": name, "cells": len(result.cells), "trials": cfg.trials, "failed": result.total_failed}
    if name in ("fig1-left", "fig1-right"):
        sc = {}
        for key, (est, lo, hi) in result.sample_complexity().items():
            sc[str(dict(key)["p"])] = {"T": est, "wilson_lo": lo, "wilson_hi": hi}
        summary["sample_complexity"] = sc
        if name == "fig1-right":
            try:
                slope, icpt, r2, _ = complexity_fit(result)
                summary["fit"] = {"slope": slope, "intercept": icpt, "r2": r2}
            except SdenetError as exc:
                summary["fit"] = {"error": str(exc)}
    else:
        diffs = {}
        for key, cells in result.curves("eta").items():
            T = dict(key)["T"]
            diffs["%g" % T] = {
                "rates": {"%g" % c.cell.eta: c.rate for c in cells},
                "largest_minus_smallest_eta": cells[-1].rate - cells[0].rate,
            }
        summary["eta_rate_difference"] = diffs
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary

def cmd_reproduce(args) -> int:
    summary = reproduce(args.figure, seed=args.seed or 0, out=args.out, threads=args.threads, trials=args.trials)
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    return EXIT_OK

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--config", default=None, help="JSON experiment config")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default $SDENET_THREADS or 1)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="sdenet", description="Sparse drift-matrix recovery for linear stochastic systems.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", parents=[common], help="simulate a trajectory file")
    sim.add_argument("--model", help="matrix file with the drift matrix")
    sim.add_argument("--p", type=int)
    sim.add_argument("--k", type=float, default=4.0)
    sim.add_argument("--m", type=float, default=1.0)
    sim.add_argument("--ensemble", choices=("stabilized", "binary-literal", "laplacian"), default="stabilized")
    sim.add_argument("--mode", choices=("discrete", "continuous"), default="discrete")
    sim.add_argument("--eta", type=float, default=0.1)
    sim.add_argument("--n", type=int)
    sim.add_argument("--T", type=float)
    sim.add_argument("--delta", type=float)
    sim.add_argument("--noiseless", action="store_true")
    sim.add_argument("--model-out", help="also write the drift matrix here")
    sim.set_defaults(func=cmd_simulate)

    est = sub.add_parser("estimate", parents=[common], help="estimate the drift matrix from a trajectory")
    est.add_argument("trajectory")
    est.add_argument("--model", help="true drift matrix (for --oracle)")
    est.add_argument("--lambda", dest="lam", type=float)
    est.add_argument("--oracle", action="store_true")
    est.add_argument("--rows", help="comma-separated rows (default all)")
    est.add_argument("--tol", type=float, default=1e-8, help="KKT residual tolerance")
    est.set_defaults(func=cmd_estimate)

    con = sub.add_parser("conditions", parents=[common], help="condition report for a drift matrix")
    con.add_argument("model_file")
    con.add_argument("--row", type=int)
    con.add_argument("--eta", type=float)
    con.add_argument("--delta-conf", type=float, default=0.1, help="failure probability in the bounds")
    con.set_defaults(func=cmd_conditions)

    sw = sub.add_parser("sweep", parents=[common], help="run a configured sweep")
    sw.add_argument("--fresh", action="store_true", help="ignore existing trials.csv")
    sw.set_defaults(func=cmd_sweep)

    ver = sub.add_parser("verify-appendix", parents=[common], help="run the lemma audits")
    ver.set_defaults(func=cmd_verify)

    rep = sub.add_parser("reproduce", parents=[common], help="canned desk-scale reproductions")
    rep.add_argument("figure", choices=("fig1-left", "fig1-right", "fig2"))
    rep.add_argument("--trials", type=int, default=256)
    rep.set_defaults(func=cmd_reproduce)
    return parser

def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"sdenet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is None and args.command in ("simulate",):
        args.seed = 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sdenet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SdenetError as exc:
        print(f"sdenet: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"sdenet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

if __name__ == "__main__":
    sys.exit(main())
