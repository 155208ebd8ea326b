"""Command line entry point: ``python -m levy_galerkin <subcommand> ...``.

Exit codes: 0 PASS or completed, 1 FAIL verdict, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import sys
import warnings

from . import experiments as ex
from .config import ConfigError, default_config, load_config
from .fem import FemMesh
from .levy import sample_paths, write_paths_csv


def fmt(x):
    """Shortest round-trip decimal for floats."""
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _build_parser():
    p = argparse.ArgumentParser(prog="levy-galerkin",
                                description="Galerkin approximation experiments for SPDEs with Levy noise")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "weak-rate", "strong-rate", "smoothing-check", "malliavin-check"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON experiment config (default: built-in default)")
        s.add_argument("--out", required=True, help="output CSV path")
        s.add_argument("--seed", type=_u64, help="override the config seed")
        s.add_argument("--mode", choices=("analytic", "mc"), help="override the config mode")
        s.add_argument("--samples", type=_positive_int, help="override mc_samples")
        s.add_argument("--threads", type=_positive_int, default=1,
                       help="worker threads (affects speed only)")
    return p


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _load(args):
    cfg = load_config(args.config) if args.config else default_config()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.mode is not None:
        changes["mode"] = args.mode
    if args.samples is not None:
        if args.samples < 2:
            raise ConfigError("--samples: need at least 2 samples")
        changes["mc_samples"] = args.samples
    return cfg.replace(**changes) if changes else cfg


def _report_notes(reports, err):
    for rep in reports:
        if rep.note:
            print(f"{rep.name}: {rep.verdict}: {rep.note}", file=err)


def _exit_code(verdicts):
    return 1 if "FAIL" in verdicts else 0


def cmd_weak_rate(cfg, args, fh, err):
    reports = ex.weak_error(cfg, args.threads)
    mc = cfg.mode == "mc"
    w = _writer(fh)
    header = ["functional", "h", "error", "log_corrected_error", "slope", "r2"]
    w.writerow(header + (["std_error"] if mc else []))
    for label, rep in reports.items():
        fit = rep.corrected
        slope = fit.slope if fit else float("nan")
        r2 = fit.r_squared if fit else float("nan")
        for lv in rep.levels:
            row = [label, lv.h, lv.error, lv.log_corrected_error, slope, r2]
            w.writerow([fmt(x) for x in row + ([lv.std_error] if mc else [])])
        print(f"weak-rate {label}: {rep.verdict} (log-corrected slope {slope:.4f}, R^2 {r2:.4f})",
              file=err)
    _report_notes(reports.values(), err)
    return _exit_code([r.verdict for r in reports.values()])


def cmd_strong_rate(cfg, args, fh, err):
    rep = ex.strong_error(cfg, args.threads)
    mc = cfg.mode == "mc"
    w = _writer(fh)
    w.writerow(["h", "error", "slope", "r2"] + (["std_error"] if mc else []))
    slope = rep.raw.slope if rep.raw else float("nan")
    r2 = rep.raw.r_squared if rep.raw else float("nan")
    for lv in rep.levels:
        w.writerow([fmt(x) for x in [lv.h, lv.error, slope, r2] + ([lv.std_error] if mc else [])])
    print(f"strong-rate: {rep.verdict} (slope {slope:.4f}, R^2 {r2:.4f})", file=err)
    _report_notes([rep], err)
    return _exit_code([rep.verdict])


def cmd_smoothing(cfg, args, fh, err):
    levels = [d for d in cfg.discretizations if isinstance(d, FemMesh)] or list(ex.DEFAULT_FEM_LEVELS)
    rep = ex.smoothing_check(ex.DEFAULT_T_GRID, levels)
    w = _writer(fh)
    w.writerow(["h", "t", "norm", "ratio"])
    for row in rep.rows:
        w.writerow([fmt(float(x)) for x in row])
    print(f"smoothing-check: {rep.verdict} (C = {rep.calibrated_C:.6g}, "
          f"spread of max ratios {rep.spread:.4f})", file=err)
    return _exit_code([rep.verdict])


def cmd_malliavin(cfg, args, fh, err):
    rows = ex.run_malliavin_checks(cfg, threads=args.threads)
    w = _writer(fh)
    w.writerow(["check_name", "residual", "bound", "pass"])
    for r in rows:
        w.writerow([r.check_name, fmt(r.residual), fmt(r.bound), "true" if r.passed else "false"])
    failed = [r.check_name for r in rows if not r.passed]
    print(f"malliavin-check: {'FAIL ' + ', '.join(failed) if failed else 'PASS'}", file=err)
    return 1 if failed else 0


def cmd_simulate(cfg, args, fh, err):
    spec = cfg.model_spec()
    paths = sample_paths(spec.levy, spec.T, cfg.seed, range(cfg.mc_samples), threads=args.threads)
    write_paths_csv(fh, paths)
    print(f"simulate: wrote {sum(len(p) for p in paths)} jumps for {len(paths)} paths", file=err)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "weak-rate": cmd_weak_rate,
    "strong-rate": cmd_strong_rate,
    "smoothing-check": cmd_smoothing,
    "malliavin-check": cmd_malliavin,
}


def run_cli(argv=None, err=None):
    err = sys.stderr if err is None else err
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=err)
        return 2
    if args.command in ("weak-rate", "strong-rate") and len(cfg.discretizations) < 3:
        print("config error: discretizations: a rate fit needs at least 3 levels", file=err)
        return 2
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            code = COMMANDS[args.command](cfg, args, fh, err)
    for wmsg in caught:
        print(f"warning: {wmsg.message}", file=err)
    return code


def main():
    sys.exit(run_cli())
