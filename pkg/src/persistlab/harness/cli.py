"""Command line interface: ``persistlab <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

from .. import special
from ..kernels import parse_kernel, parse_weights
from ..simulate import circulant_embed, sample_stationary, weighted_partial_sums
from .config import ConfigError, ExperimentConfig, load_config
from .runner import default_out_dir, run_experiment, write_rows
from .suites import SUITES, reproduce
from .sweep import SWEEP_PARAMETERS, sweep


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _add_globals(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=_u64, default=d(0), help="base seed (u64)")
    p.add_argument("--reps", type=int, default=d(None), help="replications R")
    p.add_argument("--out", default=d(None),
                   help="output path (default: $PERSISTLAB_OUT or ./persistlab-out)")
    p.add_argument("--threads", type=int, default=d(1),
                   help="worker threads; never changes results")


def build_parser():
    ap = argparse.ArgumentParser(prog="persistlab", description=__doc__)
    _add_globals(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="sample paths and dump them in binary form")
    sp.add_argument("--kernel", required=True)
    sp.add_argument("--weights", default="const")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--kind", choices=("xi", "S"), default="S")

    sp = sub.add_parser("special", help="evaluate special functions as CSV rows")
    sp.add_argument("function", choices=("psi", "selberg", "fph", "cph", "bounds", "dalpha"))
    sp.add_argument("--p", type=float, default=0.0)
    sp.add_argument("--H", type=float, default=0.75)
    sp.add_argument("--a", type=float, default=1.0)
    sp.add_argument("--b", type=_floats, default=[1.0], help="comma separated")
    sp.add_argument("--tau", type=_floats, default=[1.0], help="comma separated")
    sp.add_argument("--N", type=float, default=2.0)
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--x", type=float, default=math.e)
    sp.add_argument("--kernel", default="delta")

    sp = sub.add_parser("estimate", help="run an experiment config")
    sp.add_argument("--config", help="JSON config file")
    sp.add_argument("--id", default="estimate")
    sp.add_argument("--kernel")
    sp.add_argument("--weights", default="const")
    sp.add_argument("--correlation")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--ladder", type=_floats)
    sp.add_argument("--r", type=float, default=0.0)
    sp.add_argument("--method", choices=("mc", "orthant-qmc", "both"), default="mc")
    sp.add_argument("--budget", type=int, default=1 << 16)
    sp.add_argument("--timing", action="store_true", help="record wall times in the CSV")

    sp = sub.add_parser("sweep", help="fitted exponent over a parameter range")
    sp.add_argument("--parameter", choices=SWEEP_PARAMETERS, required=True)
    sp.add_argument("--values", type=_floats, required=True)
    sp.add_argument("--p", type=float, default=0.0)
    sp.add_argument("--H", type=float, default=0.75)
    sp.add_argument("--method", choices=("mc", "grid"), default="mc")
    sp.add_argument("--ladder", type=_floats)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--budget", type=int, default=1 << 14)

    sp = sub.add_parser("reproduce", help="run acceptance criteria A1..A10")
    sp.add_argument("targets", nargs="*", default=["all"],
                    help=f"criteria ids ({', '.join(SUITES)}) or 'all'")
    sp.add_argument("--budget", type=int)

    for p in sub.choices.values():
        _add_globals(p, suppress=True)
    return ap


def _out_path(args, default_name):
    if args.out:
        return Path(args.out)
    return default_out_dir() / default_name


def _cmd_simulate(args):
    kernel = parse_kernel(args.kernel)
    weights = parse_weights(args.weights)
    R = args.reps or 1000
    batch = sample_stationary(circulant_embed(kernel, args.n), R, args.n, args.seed,
                              num_threads=args.threads)
    if args.kind == "S":
        batch = weighted_partial_sums(batch, weights)
    path = _out_path(args, "paths.bin")
    path.parent.mkdir(parents=True, exist_ok=True)
    batch.dump(path)
    print(f"wrote {batch.R} x {batch.n} {batch.kind} paths ({batch.stream_scheme}) to {path}")
    return 0


def _special_rows(args):
    pr = None
    if args.function in ("selberg", "fph", "cph", "bounds"):
        pr = special.PHParams(args.p, args.H)
    tag = f"p={args.p:g};H={args.H:g}"
    if args.function == "psi":
        yield "psi", f"alpha={args.alpha:g};x={args.x:g}", special.psi(args.alpha, args.x), 0.0
    elif args.function == "selberg":
        yield "selberg_f11", tag, special.selberg_f11(pr), 0.0
    elif args.function == "fph":
        for b in args.b:
            res = special.f_ph(pr, args.a, b)
            yield "f_ph", f"{tag};a={args.a:g};b={b:g}", res.value, res.abs_error_estimate
    elif args.function == "cph":
        for t in args.tau:
            yield "c_ph", f"{tag};tau={t:g}", special.c_ph(pr, t), 0.0
    elif args.function == "bounds":
        for t in args.tau:
            lo, hi = special.c_ph_bounds(pr, t, args.N)
            yield "c_ph_lower", f"{tag};tau={t:g};N={args.N:g}", lo, 0.0
            yield "c_ph_upper", f"{tag};tau={t:g};N={args.N:g}", hi, 0.0
    else:
        for t in args.tau:
            v, tail = special.d_alpha_rho(args.alpha, args.kernel, int(t), return_tail=True)
            yield "d_alpha_rho", f"alpha={args.alpha:g};kernel={args.kernel};tau={int(t)}", v, tail


def _cmd_special(args):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["function", "params", "value", "error_estimate"])
    for fn, params, value, err in _special_rows(args):
        w.writerow([fn, params, repr(float(value)), repr(float(err))])
    return 0


def _cmd_estimate(args):
    if args.config:
        cfg = load_config(args.config)
        if args.reps:
            cfg.R = args.reps
        if args.seed:
            cfg.seed = args.seed
    else:
        if not args.ladder:
            raise ConfigError("--ladder is required without --config")
        ladder = [int(v) if args.kernel else v for v in args.ladder]
        cfg = ExperimentConfig(args.id, ladder, kernel=args.kernel,
                               weights=args.weights if args.kernel else None,
                               correlation=args.correlation, delta=args.delta, r=args.r,
                               R=args.reps or 100_000, seed=args.seed, method=args.method,
                               budget=args.budget)
    out = Path(args.out) if args.out else Path(cfg.output) if cfg.output else \
        default_out_dir() / f"{cfg.experiment_id}.csv"
    rows = run_experiment(cfg, out=out, threads=args.threads, record_timing=args.timing)
    sys.stdout.write(write_rows(rows))
    return 0


def _cmd_sweep(args):
    out = _out_path(args, f"sweep-{args.parameter}.csv")
    rows = sweep(args.parameter, args.values, p=args.p, H=args.H, method=args.method,
                 ladder=args.ladder, R=args.reps or 100_000, delta=args.delta,
                 budget=args.budget, seed=args.seed, threads=args.threads, out=out)
    sys.stdout.write(write_rows(rows))
    return 0


def _cmd_reproduce(args):
    targets = None if args.targets == ["all"] else args.targets
    unknown = [t for t in targets or () if t.upper() not in SUITES]
    if unknown:
        print(f"unknown criteria: {', '.join(unknown)}", file=sys.stderr)
        return 2
    kw = {"threads": args.threads, "R": args.reps, "budget": args.budget}
    if args.seed:
        kw["seed"] = args.seed
    results = reproduce(targets, **kw)
    failed = [r.suite for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""))
    return 0 if not failed else 1


_COMMANDS = {"simulate": _cmd_simulate, "special": _cmd_special, "estimate": _cmd_estimate,
             "sweep": _cmd_sweep, "reproduce": _cmd_reproduce}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
