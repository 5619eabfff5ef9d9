"""Command line entry point: ``dsdsc sweep|single|kappa``."""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from .channel import PRESETS, Environment
from .coverage import ServiceRequirements
from .geometry import CellSpec
from .optimizer import Budget, optimize
from .sweep import (
    ENV_KEYS,
    DEFAULT_D_MAX,
    ConfigError,
    SweepConfig,
    kappa_cdf_csv,
    kappa_cdf_rows,
    load_config,
    results_csv,
    run_sweep,
    with_overrides,
    write_text,
)

log = logging.getLogger("dsdsc")


def _setup_logging():
    level = os.environ.get("DSDSC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _common(p: argparse.ArgumentParser, seed_required=False):
    p.add_argument("--seed", type=int, required=seed_required, help="master seed")
    p.add_argument("--trials-geometry", type=int, help="kappa_SBC samples for the BB constraint")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsdsc", description="Dynamic drone small cell deployment optimizer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a JSON-configured experiment grid")
    p.add_argument("config", type=Path)
    _common(p)
    p.add_argument("--trials-rate", type=int, help="snapshots per ARI evaluation")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("single", help="optimise one scenario")
    p.add_argument("--env", required=True, help=f"preset ({', '.join(PRESETS)}) or 8 comma-separated constants "
                                                f"{','.join(ENV_KEYS)}")
    p.add_argument("--dmax", type=float, required=True, help="cell radius [m]")
    p.add_argument("--eps-bb", type=float, required=True)
    p.add_argument("--er", type=float, required=True, help="antenna efficiency")
    p.add_argument("--lambda", dest="density", type=float, default=2.0, help="BB users per km^2")
    p.add_argument("--rate-bb", type=float, default=1.0)
    p.add_argument("--rate-mtc", type=float, default=0.3)
    p.add_argument("--eps-mtc", type=float, default=0.1)
    p.add_argument("--omega", type=float, help="fix the BB slicing ratio instead of searching it")
    p.add_argument("--weighting", choices=("user", "snapshot"), default="user")
    _common(p)
    p.add_argument("--trials-rate", type=int, help="snapshots per ARI evaluation")
    p.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; a single cell runs serially")

    p = sub.add_parser("kappa", help="empirical kappa_SBC CDFs only")
    p.add_argument("--dmax", type=float, nargs="+", default=DEFAULT_D_MAX)
    p.add_argument("--lambda", dest="density", type=float, default=2.0)
    _common(p)
    p.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; runs serially")
    return parser


def _parse_env(value: str, parser) -> Environment:
    if value in PRESETS:
        return PRESETS[value]
    parts = value.split(",")
    if len(parts) != len(ENV_KEYS):
        parser.error(f"--env: expected a preset or {len(ENV_KEYS)} constants, got {value!r}")
    try:
        return Environment(*map(float, parts), label="custom")
    except ValueError as exc:
        parser.error(f"--env: {exc}")


def cmd_sweep(args, parser) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 2
    cfg = with_overrides(cfg, master_seed=args.seed, geometry_trials=args.trials_geometry,
                         rate_trials=args.trials_rate, output_dir=args.out)
    rows, code = run_sweep(cfg, jobs=args.jobs)
    n_feasible = sum(bool(r.get("feasible")) for r in rows)
    print(f"{len(rows)} cells ({n_feasible} feasible) -> {cfg.output_dir / 'results.csv'}")
    return code


def cmd_single(args, parser) -> int:
    env = _parse_env(args.env, parser)
    try:
        reqs = ServiceRequirements(args.rate_bb, args.eps_bb, args.rate_mtc, args.eps_mtc)
        cell = CellSpec(args.dmax, args.density)
        if not 0 < args.er < 1:
            raise ValueError("--er must lie in (0, 1)")
    except ValueError as exc:
        parser.error(str(exc))
    seed = args.seed if args.seed is not None else 0
    budget = Budget(geometry_trials=args.trials_geometry or Budget.geometry_trials,
                    rate_trials=args.trials_rate or Budget.rate_trials)
    res = optimize(env, args.er, reqs, cell, budget, seed=seed, omega_b=args.omega, weighting=args.weighting)

    b = res.baseline
    print(f"environment      {env.label}  D_max={args.dmax:g} m  lambda={args.density:g}/km^2  eps_B={args.eps_bb:g}"
          f"  E_r={args.er:g}")
    print(f"static LAP       theta={math.degrees(b.theta_lap):.4f} deg  L_e={b.le_lap:.4f} dB")
    print(f"slicing bound    omega_max={res.omega_max:.6f}")
    if res.best is None:
        print(f"infeasible       {res.message}")
    else:
        print(f"optimum          theta={math.degrees(res.best.theta):.4f} deg  omega_B={res.best.omega_b:.6f}")
        print(f"ARI              {res.ari:.6f} +- {res.ari_se:.2g}")
        print(f"reliability      BB {res.bb_reliability:.8f}  MTC {res.mtc_reliability:.6f}"
              f"  ({'feasible' if res.feasible else 'infeasible'})")
    row = {
        "env": env.label, "d_max_m": args.dmax, "eps_bb": args.eps_bb, "e_r": args.er, "lambda": args.density,
        "theta_lap_deg": math.degrees(b.theta_lap), "le_lap_db": b.le_lap, "omega_max": res.omega_max,
        "theta_opt_deg": math.degrees(res.best.theta) if res.best else math.nan,
        "omega_opt": res.best.omega_b if res.best else math.nan,
        "ari": res.ari, "bb_rel": res.bb_reliability, "mtc_rel": res.mtc_reliability,
        "trials": res.trials, "seed": seed, "feasible": res.feasible,
    }
    text = results_csv([row])
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        write_text(args.out / "results.csv", text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_kappa(args, parser) -> int:
    try:
        for d in args.dmax:
            CellSpec(d, args.density)
    except ValueError as exc:
        parser.error(str(exc))
    seed = args.seed if args.seed is not None else 0
    trials = args.trials_geometry or SweepConfig(0).geometry_trials
    text = kappa_cdf_csv(kappa_cdf_rows(args.dmax, args.density, trials, seed))
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        write_text(args.out / "kappa_cdf.csv", text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"sweep": cmd_sweep, "single": cmd_single, "kappa": cmd_kappa}[args.command]
    return handler(args, parser)


if __name__ == "__main__":
    sys.exit(main())
