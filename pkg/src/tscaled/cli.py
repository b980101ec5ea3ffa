"""Command-line interface.

Subcommands: gen (write TSR3 tensors), rpca, complete, factorize,
sweep (step-size sweep), plot, validate.  Exit codes: 0 success,
1 configuration error, 2 solver divergence in all cells, 3 validation
failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from .config import ExperimentConfig, load_config
from .errors import ConfigError, EmptyTraceSet, TscaledError
from .harness import PLOT_KINDS, emit_plot, run_experiment, validate_suite
from .solvers import RunStatus
from .synth import gen_bernoulli_mask, gen_ground_truth, gen_sparse_corruption
from .talg import write_tsr3
from .transform import make_transform


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment configuration file (INI)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="base seed (overrides config)")
    p.add_argument("--transform", choices=("dft", "dct"), help="transform kind")
    p.add_argument("--eta", type=float, help="step size (overrides config)")
    p.add_argument("--iters", type=int, help="maximum iterations (overrides config)")
    p.add_argument("--no-timing", action="store_true", help="zero wall-clock columns")


def _build_cfg(args, problem: str) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg.problem = problem
    if args.out:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.transform:
        cfg.transform = args.transform
    if args.eta is not None:
        cfg.etas = [args.eta]
    if args.iters is not None:
        cfg.max_iters = args.iters
    if args.no_timing:
        cfg.no_timing = True
    cfg.validate()
    return cfg


def _run(args, problem: str) -> int:
    cfg = _build_cfg(args, problem)
    traces, summary, statuses = run_experiment(cfg)
    print(f"wrote {len(traces)} trace files and {summary}")
    if statuses and all(s is RunStatus.DIVERGED for s in statuses):
        return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tscaled", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="synthesize tensors and write TSR3 files")
    _add_common(p_gen)
    p_gen.add_argument("--n1", type=int, default=50)
    p_gen.add_argument("--n2", type=int, default=50)
    p_gen.add_argument("--n3", type=int, default=50)
    p_gen.add_argument("--rank", type=int, default=5)
    p_gen.add_argument("--kappa", type=float, default=10.0)
    p_gen.add_argument("--alpha", type=float, default=0.0, help="sparse corruption fraction")
    p_gen.add_argument("--p", type=float, default=1.0, help="Bernoulli observation rate")

    for name, help_text in (
        ("rpca", "robust PCA benchmark"),
        ("complete", "tensor completion benchmark"),
        ("factorize", "factorization benchmark"),
        ("sweep", "step-size sweep (eta list from config)"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)

    p_plot = sub.add_parser("plot", help="render trace CSVs to an SVG")
    p_plot.add_argument("traces", nargs="+", help="trace CSV files")
    p_plot.add_argument("--kind", choices=PLOT_KINDS, default="err_vs_iter")
    p_plot.add_argument("--out", required=True, help="output SVG path")

    p_val = sub.add_parser("validate", help="run the cross-module invariant suite")
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--trials", type=int, default=20)

    args = parser.parse_args(argv)

    try:
        if args.command == "gen":
            seed = args.seed if args.seed is not None else 0
            kind = args.transform or "dft"
            out = args.out or "."
            os.makedirs(out, exist_ok=True)
            spec = make_transform(kind, args.n3)
            gt = gen_ground_truth(args.n1, args.n2, args.n3, args.rank, args.kappa, spec, seed)
            xstar = gt.xstar()
            write_tsr3(os.path.join(out, "xstar.tsr3"), xstar)
            written = ["xstar.tsr3"]
            if args.alpha > 0:
                sstar = gen_sparse_corruption(xstar, args.alpha, seed + 1)
                write_tsr3(os.path.join(out, "sstar.tsr3"), sstar)
                write_tsr3(os.path.join(out, "y.tsr3"), xstar + sstar)
                written += ["sstar.tsr3", "y.tsr3"]
            if args.p < 1.0:
                obs = gen_bernoulli_mask(args.n1, args.n2, args.n3, args.p, seed + 2)
                write_tsr3(os.path.join(out, "mask.tsr3"), obs.mask.astype(float))
                write_tsr3(os.path.join(out, "yobs.tsr3"), xstar * obs.mask)
                written += ["mask.tsr3", "yobs.tsr3"]
            print(f"wrote {', '.join(written)} to {out}")
            return 0
        if args.command == "rpca":
            return _run(args, "rpca")
        if args.command == "complete":
            return _run(args, "completion")
        if args.command == "factorize":
            return _run(args, "factorization")
        if args.command == "sweep":
            cfg = _build_cfg(args, "completion") if not args.config else load_config(args.config)
            if args.config:
                if args.out:
                    cfg.out_dir = args.out
                if args.iters is not None:
                    cfg.max_iters = args.iters
                if args.no_timing:
                    cfg.no_timing = True
            if len(cfg.etas) < 2:
                raise ConfigError("experiment.eta: a sweep needs several step sizes")
            traces, summary, statuses = run_experiment(cfg)
            print(f"wrote {len(traces)} trace files and {summary}")
            if statuses and all(s is RunStatus.DIVERGED for s in statuses):
                return 2
            return 0
        if args.command == "plot":
            emit_plot(args.traces, args.kind, args.out)
            print(f"wrote {args.out}")
            return 0
        if args.command == "validate":
            results = validate_suite(seed=args.seed, trials=args.trials)
            for res in results:
                print(res.line())
            return 0 if all(r.passed for r in results) else 3
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except EmptyTraceSet as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return 1
    except TscaledError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
