"""Command line entry point: ``smdrate run|verify|sweep|prox``.

Exit status is 0 when every requested check passes, 1 when a check fails and
2 on usage or configuration errors.
"""
import argparse
import json
import sys

import numpy as np

from ..benchmarks import BENCHMARKS, make_benchmark
from ..errors import ConfigError, SMDError
from ..stationarity import bregman_prox
from .config import ExperimentConfig, build_config, load_config
from .experiment import run_experiment
from .verify import SUITES, verify


def _int_list(text):
    try:
        return tuple(int(float(v)) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def _add_run_flags(p):
    p.add_argument("--out", help="directory for rates.csv, trials.csv and report.json")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--n-grid", type=_int_list)
    p.add_argument("--schedule", choices=["constant", "sqrt-decay"])
    p.add_argument("--c", help="stepsize constant or 'auto'")
    p.add_argument("--backend", choices=["auto", "kernel", "python"])
    p.add_argument("--no-slope-check", action="store_true")


def _run_overrides(args):
    ov = {k: getattr(args, k) for k in ("trials", "seed", "workers", "n_grid", "schedule", "c", "backend")}
    if args.no_slope_check:
        ov["check_slope"] = False
    return {k: v for k, v in ov.items() if v is not None}


def _print_report(rep, stream):
    stream.write("N,trials,mean_delta,stderr,theorem_rhs,bound_ok\n")
    for r in rep.rows:
        stream.write(f"{r.N},{r.trials},{r.mean_delta:.6g},{r.stderr:.3g},{r.theorem_rhs:.6g},{r.bound_ok}\n")
    f = rep.slope
    if f.refused:
        stream.write(f"slope: not fitted ({f.refused})\n")
    else:
        stream.write(f"slope: {f.slope:.4f}  95% CI [{f.ci_low:.3f}, {f.ci_high:.3f}]  R^2 {f.r2:.4f}\n")
    m = rep.meta
    stream.write(f"rho={m['rho']:.6g} L={m['L']:.6g} c={m['c']:.6g} T_min={m['T_min']:.6g} ({m['T_min_source']})\n")
    for name, chk in rep.checks.items():
        tag = "PASS" if chk["ok"] else "FAIL"
        if not chk.get("required", True):
            tag += " (advisory)"
        stream.write(f"check {name}: {tag}\n")
    stream.write(f"overall: {'PASS' if rep.ok else 'FAIL'}\n")


def cmd_run(args):
    overrides = _run_overrides(args)
    cfg = load_config(args.config, overrides)
    out = args.out or cfg.out_dir or None
    rep = run_experiment(cfg, out_dir=out)
    _print_report(rep, sys.stdout)
    return 0 if rep.ok else 1


def cmd_sweep(args):
    values = {"bench": args.bench, "n": args.n, "m": args.m, "instance_seed": args.instance_seed}
    if args.geometry:
        values["geometry"] = args.geometry
    if args.oracle_mode:
        values["oracle_mode"] = args.oracle_mode
    values.update(_run_overrides(args))
    cfg = build_config(values, "<cli>")
    rep = run_experiment(cfg, out_dir=args.out)
    _print_report(rep, sys.stdout)
    return 0 if rep.ok else 1


def cmd_verify(args):
    rep = verify(args.suites or None, seed=args.seed, rho_scale=args.rho_scale)
    if args.json:
        json.dump(rep, sys.stdout, indent=1, default=float)
        sys.stdout.write("\n")
    else:
        for name, res in rep.items():
            if name != "ok":
                sys.stdout.write(f"{name}: {'PASS' if res['ok'] else 'FAIL'}\n")
        sys.stdout.write(f"overall: {'PASS' if rep['ok'] else 'FAIL'}\n")
    return 0 if rep["ok"] else 1


def cmd_prox(args):
    b = make_benchmark(args.bench, n=args.n, m=args.m, seed=args.instance_seed,
                       geometry=args.geometry or None)
    pts = np.atleast_2d(np.loadtxt(args.point_file, delimiter=",", ndmin=2))
    if pts.shape[1] != b.geometry.dim:
        raise ConfigError(f"points have {pts.shape[1]} columns, instance has dimension {b.geometry.dim}",
                          source=args.point_file)
    lam = args.lam if args.lam is not None else 1.0 / (2.0 * b.rho)
    for z in pts:
        res = bregman_prox(b.objective, b.geometry, lam, z)
        sys.stdout.write(json.dumps(res.as_dict()) + "\n")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="smdrate", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a config file")
    r.add_argument("config")
    _add_run_flags(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run an experiment described by flags")
    s.add_argument("--bench", choices=BENCHMARKS, default=ExperimentConfig.bench)
    s.add_argument("--geometry", choices=["euclidean", "entropy"])
    s.add_argument("--oracle-mode", choices=["bounded-moment", "SRC"])
    s.add_argument("--n", type=int, default=10)
    s.add_argument("--m", type=int, default=30)
    s.add_argument("--instance-seed", type=int, default=0)
    _add_run_flags(s)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run property suites")
    v.add_argument("suites", nargs="*", metavar="suite",
                   help=f"any of: {', '.join(SUITES)} (default: all)")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--rho-scale", type=float, default=1.0,
                   help="multiply every recorded rho before certifying (mutation testing)")
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_verify)

    x = sub.add_parser("prox", help="prox point and stationarity at points from a CSV file")
    x.add_argument("--bench", choices=BENCHMARKS, required=True)
    x.add_argument("--point-file", required=True)
    x.add_argument("--lambda", dest="lam", type=float)
    x.add_argument("--geometry", choices=["euclidean", "entropy"])
    x.add_argument("--n", type=int, default=10)
    x.add_argument("--m", type=int, default=30)
    x.add_argument("--instance-seed", type=int, default=0)
    x.set_defaults(func=cmd_prox)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except (SMDError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
