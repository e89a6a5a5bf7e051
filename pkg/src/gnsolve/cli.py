"""Command line entry point: ``gnsolve run|convergence|soliton-error|transparent-check``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .config import load_config
from .driver import convergence_study, l2_error, run_simulation, transparent_exit_check


def _apply_flags(cfg, args):
    changes = {}
    if args.out:
        changes["out_dir"] = args.out
    if args.ledger:
        changes["ledger"] = True
    if args.dump_matrix:
        changes["dump_matrix"] = True
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _cmd_run(cfg, args):
    res = run_simulation(cfg)
    print(f"reached t = {res.t!r} after {res.steps} steps")
    if cfg.errors and cfg.soliton is not None:
        print(json.dumps(l2_error(res.state, res.pressures, res.t, cfg.soliton, res.grid)))
    if args.ledger and not cfg.out_dir:
        rows = res.ledger.rows
        if rows:
            print(f"energy {rows[0].E_n!r} -> {rows[-1].E_next!r}")


def _cmd_convergence(cfg, args):
    meshes = [int(m) for m in args.meshes.split(",") if m]
    report = convergence_study(cfg, meshes)
    for name, errs in report.errors.items():
        rate = report.rates[name]
        flag = " (degenerate)" if report.degenerate[name] else ""
        print(f"{name:6s} rate {rate:.3f}{flag}  errors " + " ".join(f"{e:.4e}" for e in errs))


def _cmd_soliton_error(cfg, args):
    if cfg.soliton is None:
        raise ValueError("soliton-error needs a soliton initial profile")
    res = run_simulation(dataclasses.replace(cfg, t_end=args.at))
    print(json.dumps(l2_error(res.state, res.pressures, res.t, cfg.soliton, res.grid)))


def _cmd_transparent(cfg, args):
    rep = transparent_exit_check(cfg)
    print(json.dumps({
        "exit_time": rep.exit_time, "error_at_exit": rep.error_at_exit, "max_after_exit": rep.max_after_exit,
        "max_final_window": rep.max_final_window, "min_depth": rep.min_depth, "finite": rep.finite,
    }))


COMMANDS = {
    "run": _cmd_run,
    "convergence": _cmd_convergence,
    "soliton-error": _cmd_soliton_error,
    "transparent-check": _cmd_transparent,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gnsolve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="INI run configuration")
        p.add_argument("--out", help="output directory for snapshots, ledger and matrix dumps")
        p.add_argument("--ledger", action="store_true", help="write the per-step energy ledger")
        p.add_argument("--dump-matrix", action="store_true", help="dump the first projection system as triplets")
        if name == "convergence":
            p.add_argument("--meshes", required=True, help="comma separated cell counts")
        if name == "soliton-error":
            p.add_argument("--at", type=float, required=True, help="comparison time")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_flags(load_config(args.config), args)
        COMMANDS[args.command](cfg, args)
    except Exception as exc:  # noqa: BLE001 - report any failure as one line
        print(f"gnsolve: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
