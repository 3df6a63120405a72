"""Batch command-line front end.

Verbs: solve one drop, run a Monte Carlo sweep from a JSON spec, export or
check surrogate datasets, and benchmark the search methods' evaluation
counters.  Powers accept watts or a dBm suffix (e.g. --pmax 50dBm).  Exit
codes: 0 success, 1 infeasible result, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import experiments
from .scenario import NetworkConfig, generate_scenario
from .search import GridConfig, PsoConfig
from .solve import solve_scenario
from .units import parse_power

SCHEMA_VERSION = 1

HELP_SPEC = {
    "program": "ambsee",
    "schema_version": SCHEMA_VERSION,
    "units": {"power_flags": "watts, or dBm with suffix 'dBm'",
              "rates": "bit/s/Hz", "zeta": "bit/s/Hz per watt"},
    "commands": {
        "solve": {
            "flags": ["--k", "--m", "--method", "--objective", "--alpha",
                      "--seed", "--trial", "--pmax", "--pc", "--noise",
                      "--rmin", "--user-radius", "--bd-radius", "--gamma",
                      "--eav-x", "--eav-y", "--pso-seed", "--trace",
                      "--dump-scenario", "--out"],
            "output": "result JSON on stdout (schema_version, params, result)",
        },
        "sweep": {
            "flags": ["--spec", "--out", "--trials", "--seed", "--jobs",
                      "--k", "--pmax", "--pc", "--noise", "--rmin"],
            "output": "CSV: scheme,sweep_value,mean_zeta,stderr,rel_gain,"
                      "n_feasible,n_resampled",
        },
        "dataset": {
            "flags": ["--k", "--m", "--n", "--solver", "--seed", "--out",
                      "--check", "--eval", "--predictions", "--no-project",
                      "--pmax", "--pc", "--noise", "--rmin"],
            "output": "dataset CSV + .meta.json sidecar, or evaluation CSV",
        },
        "bench": {
            "flags": ["--m", "--method", "--k", "--seed"],
            "output": "JSON: eval counters and wall times per method",
        },
    },
}


def _add_config_flags(p: argparse.ArgumentParser, k_default: int = 2,
                      m_default: int = 1) -> None:
    p.add_argument("--k", type=int, default=k_default, help="number of users")
    p.add_argument("--m", type=int, default=m_default, help="number of backscatter devices")
    p.add_argument("--pmax", type=parse_power, default=None,
                   help="power budget (watts or dBm), default 50dBm")
    p.add_argument("--pc", type=parse_power, default=None,
                   help="circuit power (watts or dBm), default 30dBm")
    p.add_argument("--noise", type=parse_power, default=None,
                   help="noise power (watts or dBm), default -30dBm")
    p.add_argument("--rmin", type=float, default=None,
                   help="per-user QoS rate floor, bit/s/Hz")
    p.add_argument("--user-radius", type=float, default=None)
    p.add_argument("--bd-radius", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None,
                   help="path-loss exponent")
    p.add_argument("--seed", type=int, default=0)


def _config_from(args) -> NetworkConfig:
    cfg = NetworkConfig(k=args.k, m=args.m, seed=args.seed)
    overrides = {}
    if args.pmax is not None:
        overrides["p_max_w"] = args.pmax
    if args.pc is not None:
        overrides["p_circuit_w"] = args.pc
    if args.noise is not None:
        overrides["noise_user_w"] = args.noise
        overrides["noise_eav_w"] = args.noise
    if args.rmin is not None:
        overrides["r_min"] = args.rmin
    if args.user_radius is not None:
        overrides["user_radius"] = args.user_radius
    if args.bd_radius is not None:
        overrides["bd_radius"] = args.bd_radius
    if args.gamma is not None:
        overrides["pathloss_exponent"] = args.gamma
    if getattr(args, "eav_x", None) is not None:
        overrides["eav_pos"] = (args.eav_x, args.eav_y)
    return cfg.with_overrides(**overrides) if overrides else cfg


def _emit(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=1)
    if path:
        with open(path, "w") as f:
            f.write(text + "\n")
    print(text)


def _cmd_solve(args) -> int:
    cfg = _config_from(args)
    s = generate_scenario(cfg, args.trial)
    if args.dump_scenario:
        s.dump_csv(args.dump_scenario)
    trace_fn = None
    trace_file = None
    if args.trace:
        trace_file = open(args.trace, "w")

        def trace_fn(rec):
            trace_file.write(json.dumps(rec, sort_keys=True) + "\n")

    rng = np.random.default_rng(args.pso_seed)
    try:
        res = solve_scenario(s, cfg, method=args.method,
                             objective=args.objective, alpha=args.alpha,
                             pso_cfg=PsoConfig(seed=args.pso_seed),
                             rng=rng, trace=trace_fn)
    finally:
        if trace_file:
            trace_file.close()
    _emit({
        "schema_version": SCHEMA_VERSION,
        "params": {"k": cfg.k, "m": cfg.m, "seed": cfg.seed,
                   "trial": args.trial, "method": args.method,
                   "objective": args.objective, "alpha": args.alpha,
                   "p_max_w": cfg.p_max_w, "p_circuit_w": cfg.p_circuit_w,
                   "noise_user_w": cfg.noise_user_w},
        "units": {"p": "W", "ssr": "bit/s/Hz", "zeta": "bit/s/Hz/W"},
        "result": res.to_dict(),
    }, args.out)
    return 0 if res.feasible else 1


def _cmd_sweep(args) -> int:
    spec = experiments.SweepSpec.from_json(args.spec)
    if args.trials is not None:
        spec = experiments.SweepSpec(
            variable=spec.variable, values=spec.values, schemes=spec.schemes,
            trials=args.trials, seed=spec.seed if args.seed is None else args.seed,
            method_override=spec.method_override, pso=spec.pso, grid=spec.grid)
    elif args.seed is not None:
        spec = experiments.SweepSpec(
            variable=spec.variable, values=spec.values, schemes=spec.schemes,
            trials=spec.trials, seed=args.seed,
            method_override=spec.method_override, pso=spec.pso, grid=spec.grid)
    cfg = _config_from(args)
    t0 = time.perf_counter()
    res = experiments.run_sweep(spec, cfg, jobs=args.jobs)
    res.write_csv(args.out)
    _emit({"schema_version": SCHEMA_VERSION, "out": args.out,
           "variable": spec.variable, "trials": spec.trials,
           "n_resampled": res.n_resampled,
           "wall_s": time.perf_counter() - t0}, None)
    return 0


def _cmd_dataset(args) -> int:
    if args.check:
        worst = experiments.verify_dataset(args.check)
        _emit({"schema_version": SCHEMA_VERSION, "checked": args.check,
               "max_abs_zeta_deviation": worst, "ok": bool(worst <= 1e-9)}, None)
        return 0 if worst <= 1e-9 else 1
    if args.eval:
        if not args.predictions:
            print("--eval requires --predictions", file=sys.stderr)
            return 2
        summary = experiments.eval_predictions(args.eval, args.predictions,
                                               args.out,
                                               project=not args.no_project)
        _emit({"schema_version": SCHEMA_VERSION, "out": args.out, **summary},
              None)
        return 0
    cfg = _config_from(args)
    meta = experiments.export_dataset(cfg, args.n, solver=args.solver,
                                      path=args.out)
    _emit({"schema_version": SCHEMA_VERSION, **meta}, None)
    return 0


def _cmd_bench(args) -> int:
    cfg = _config_from(args)
    report = {"schema_version": SCHEMA_VERSION, "k": cfg.k, "methods": {}}
    s = generate_scenario(cfg, 0)
    # warm the jitted kernels so wall times reflect steady state
    solve_scenario(s.reorder_users(np.arange(cfg.k)), cfg, method="grid",
                   grid=GridConfig(coarse_step=0.5, fine_step=0.25,
                                   fine_halfwidth=0.25))
    methods = ["grid", "pso"] if args.method == "both" else [args.method]
    for method in methods:
        t0 = time.perf_counter()
        res = solve_scenario(s, cfg, method=method,
                             pso_cfg=PsoConfig(seed=cfg.seed),
                             rng=np.random.default_rng(cfg.seed))
        wall = time.perf_counter() - t0
        entry = {"eval_count": res.eval_count, "wall_s": wall,
                 "feasible": bool(res.feasible)}
        if res.detail:
            entry.update(res.detail)
        report["methods"][method] = entry
    _emit(report, None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ambsee",
        description="Secrecy energy-efficiency optimization for "
                    "backscatter-assisted downlink NOMA")
    ap.add_argument("--help-json", action="store_true",
                    help="print a machine-readable command description")
    sub = ap.add_subparsers(dest="verb")

    p = sub.add_parser("solve", help="solve one random drop")
    _add_config_flags(p)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--method", choices=("closed", "grid", "pso"),
                   default="closed")
    p.add_argument("--objective", choices=("ratio", "tradeoff"),
                   default="ratio")
    p.add_argument("--alpha", type=float, default=0.1,
                   help="trade-off weight (tradeoff objective)")
    p.add_argument("--eav-x", type=float, default=None)
    p.add_argument("--eav-y", type=float, default=0.0)
    p.add_argument("--pso-seed", type=int, default=0)
    p.add_argument("--trace", default=None,
                   help="write per-iteration JSON lines here")
    p.add_argument("--dump-scenario", default=None,
                   help="write node table CSV here")
    p.add_argument("--out", default=None, help="also write result JSON here")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("sweep", help="run a Monte Carlo sweep from a JSON spec")
    _add_config_flags(p)
    p.add_argument("--spec", required=True, help="SweepSpec JSON path")
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=_cmd_sweep, seed=None)

    p = sub.add_parser("dataset", help="export, check or score datasets")
    _add_config_flags(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--solver", choices=("closed", "grid", "pso"),
                   default="closed")
    p.add_argument("--out", default="dataset.csv")
    p.add_argument("--check", default=None,
                   help="round-trip check an exported dataset CSV")
    p.add_argument("--eval", default=None,
                   help="dataset CSV to score predictions against")
    p.add_argument("--predictions", default=None,
                   help="predictions CSV (p_*, rho_* columns)")
    p.add_argument("--no-project", action="store_true",
                   help="skip the feasibility projection before scoring")
    p.set_defaults(fn=_cmd_dataset)

    p = sub.add_parser("bench", help="evaluation counters and wall times")
    _add_config_flags(p, m_default=2)
    p.add_argument("--method", choices=("grid", "pso", "both"),
                   default="both")
    p.set_defaults(fn=_cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.help_json:
        print(json.dumps(HELP_SPEC, sort_keys=True, indent=1))
        return 0
    if args.verb is None:
        ap.print_usage(sys.stderr)
        return 2
    try:
        return args.fn(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except RuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
