"""Command-line interface.

Subcommands: ``calibrate`` (build and store equalizer coefficients),
``simulate`` (run a scenario with stored coefficients), ``model``
(analytic predictions only), ``sweep`` (parameter sweeps, paired
seeds) and ``collisions`` (pulse-collision coefficient study).

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 I/O failure.
"""

import argparse
import sys

import numpy as np

from . import config as config_mod
from . import collisions, reporting, scenario as scenario_mod
from .errors import CalibrationMissing, ConfigError, NumericalError, ReportError


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlinlab",
        description="Nonlinear interference noise workbench for flexible WDM networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--profile", default="desk", choices=sorted(config_mod.PROFILES))
        p.add_argument("--scenario", default="A", choices=list(scenario_mod.CASES))
        p.add_argument("--seed", type=int, help="override run.base_seed")
        p.add_argument("--realizations", type=int, help="override run.realizations")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--format", default="csv", choices=["csv", "records"])
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("calibrate", help="store linear-link equalizer coefficients")
    common(p)

    p = sub.add_parser("simulate", help="run the split-step scenario simulation")
    common(p)
    p.add_argument("--models", action="store_true", help="attach analytic predictions")

    p = sub.add_parser("model", help="analytic model predictions only")
    common(p)

    p = sub.add_parser("sweep", help="sweep one parameter with paired seeds")
    common(p)
    p.add_argument("--parameter", required=True,
                   choices=["span_length", "channel_spacing", "modulation_format"])
    p.add_argument("--values", required=True,
                   help="comma-separated values (km, Hz, or format names)")
    p.add_argument("--models", action="store_true")

    p = sub.add_parser("collisions", help="pulse-collision coefficient study")
    common(p)
    p.add_argument("--max-index", type=int, default=6,
                   help="limit |h|,|k|,|m| in the reported table")

    return parser


def _load(args) -> dict:
    cfg = config_mod.load_config(args.config, args.profile)
    if args.seed is not None:
        cfg["run"]["base_seed"] = args.seed
    if args.realizations is not None:
        cfg["run"]["realizations"] = args.realizations
    return cfg


def _cmd_calibrate(args) -> int:
    cfg = _load(args)
    scn = scenario_mod.build_scenario(cfg, args.scenario)
    store = scenario_mod.calibration_store(scn, f"{args.out}/calibration")
    n = scenario_mod.calibrate_scenario(scn, store)
    print(f"stored {n} coefficient sets in {store.root}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    scn = scenario_mod.build_scenario(cfg, args.scenario)
    store = scenario_mod.calibration_store(scn, f"{args.out}/calibration")
    rows, acf = scenario_mod.run_scenario(scn, store, with_models=args.models)
    written = reporting.emit_report(rows, args.out, args.format, acf,
                                    figures=not args.no_figures)
    for path in written:
        print(path)
    return 0


def _cmd_model(args) -> int:
    cfg = _load(args)
    scn = scenario_mod.build_scenario(cfg, args.scenario)
    rows = scenario_mod.run_models(scn)
    written = reporting.emit_report(rows, args.out, args.format,
                                    figures=not args.no_figures)
    for path in written:
        print(path)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    scn = scenario_mod.build_scenario(cfg, args.scenario)
    values = []
    for raw in args.values.split(","):
        raw = raw.strip()
        if args.parameter == "modulation_format":
            values.append(raw)
        else:
            values.append(float(raw))
    results = scenario_mod.sweep(scn, args.parameter, values,
                                 f"{args.out}/calibration", with_models=args.models)
    rows = [row for rows_acf in results.values() for row in rows_acf[0]]
    acf = [rec for rows_acf in results.values() for rec in rows_acf[1]]
    written = reporting.emit_report(rows, args.out, args.format, acf,
                                    figures=not args.no_figures)
    for path in written:
        print(path)
    return 0


def _cmd_collisions(args) -> int:
    link, pulse, omega = collisions.demo_configuration()
    indices = [
        i for i in collisions.predict_indices(link, pulse, omega)
        if max(abs(i.h), abs(i.k), abs(i.m)) <= args.max_index
    ]
    table = collisions.coefficient_table(link, pulse, omega, indices)
    examples = {}
    ranked = sorted(table.items(), key=lambda kv: -abs(kv[1]))
    seen = set()
    for (h, k, m), _ in ranked:
        kind = collisions.classify(collisions.CollisionIndex(h, k, m, omega))
        if kind not in seen:
            seen.add(kind)
            z, acc = collisions.accumulation_curve(
                collisions.CollisionIndex(h, k, m, omega), link, pulse=pulse
            )
            examples[(h, k, m)] = (z, acc)
        if len(seen) == len(collisions.CollisionType):
            break
    written = reporting.emit_collision_report(table, examples, args.out,
                                              figures=not args.no_figures)
    for path in written:
        print(path)
    return 0


_COMMANDS = {
    "calibrate": _cmd_calibrate,
    "simulate": _cmd_simulate,
    "model": _cmd_model,
    "sweep": _cmd_sweep,
    "collisions": _cmd_collisions,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, CalibrationMissing) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ReportError, OSError) as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
