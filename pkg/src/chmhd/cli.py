"""Command-line entry point.

Subcommands: mms, spinodal, boussinesq (drivers) and check (source-term
residual oracle).  Exit codes: 0 success, 1 solver failure, 2 bad
configuration or usage.
"""

import argparse
import sys

import numpy as np

from . import harness, mms
from .diagnostics import format_rate_table
from .harness import ConfigError, RunConfig
from .linalg import SolverError

_RUN_COMMANDS = ("mms", "spinodal", "boussinesq")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="chmhd",
        description="Two-phase magnetohydrodynamic flow solver benchmarks")
    sub = p.add_subparsers(dest="command", required=True)
    for name in _RUN_COMMANDS:
        q = sub.add_parser(name, help=f"run the {name} experiment")
        q.add_argument("--config", help="key = value config file")
        q.add_argument("--scheme", help="I, II, or III")
        q.add_argument("--dt", type=float, help="time step override")
        q.add_argument("--grid", help="NX or NXxNY cells override")
        q.add_argument("--seed", type=int, help="noise seed (spinodal only)")
        q.add_argument("--out", help="output directory")
    sub.add_parser("check", help="verify manufactured-solution sources")
    return p


def _mapping_from_args(args) -> dict:
    mapping = {}
    if args.config:
        mapping.update(harness.load_config(args.config))
    # flags beat file values
    if args.scheme is not None:
        mapping["scheme"] = args.scheme
    if args.dt is not None:
        mapping["dt"] = repr(args.dt)
    if args.grid is not None:
        parts = args.grid.lower().split("x")
        if len(parts) not in (1, 2) or not all(s.isdigit() for s in parts):
            raise ConfigError(f"bad --grid {args.grid!r} (want NX or NXxNY)")
        mapping["grid.nx"] = parts[0]
        mapping["grid.ny"] = parts[-1]
        if args.command == "mms":
            mapping.setdefault("mms.levels", parts[0])
    if args.seed is not None:
        mapping["seed"] = str(args.seed)
    if args.out is not None:
        mapping["out"] = args.out
    return mapping


def _cmd_mms(cfg: RunConfig) -> int:
    result = harness.run_mms(cfg)
    if result["table"] is not None:
        print(format_rate_table(result["table"]))
    elif result["rows"]:
        h, norms = result["rows"][0]
        print(f"h = {h:.5f}  " + "  ".join(
            f"{k}={getattr(norms, k):.3e}"
            for k in ("l2_phi", "l2_v", "l2_b", "l2_p")))
    for path in result["csv_paths"]:
        print(f"wrote {path}")
    if result["failure"]:
        print(f"aborted: {result['failure']}", file=sys.stderr)
        return 1
    return 0


def _cmd_spinodal(cfg: RunConfig) -> int:
    results = harness.run_spinodal(cfg)
    for dt, res in results.items():
        rec = res["record"]
        e = rec.column("E_total")
        drift = abs(rec.column("mass") - res["mass0"]).max() if len(rec) else 0.0
        monotone = bool(np.all(np.diff(np.concatenate([[res['e0']], e])) <= 1e-8)) \
            if len(rec) else True
        print(f"dt={dt:g}: {len(rec)} steps, E {res['e0']:.6f} -> "
              f"{e[-1]:.6f}, energy nonincreasing: {monotone}, "
              f"max |mass drift| {drift:.2e}")
        print(f"wrote {res['csv_path']}")
    return 0


def _cmd_boussinesq(cfg: RunConfig) -> int:
    results = harness.run_boussinesq(cfg)
    for label in ("no_lorentz", "lorentz"):
        res = results[label]
        cx, cy = res["final_centroid"]
        print(f"{label}: centroid ({cx:.6f}, {cy:.6f}) at "
              f"t={res['record'].rows[-1][1]:g}")
        print(f"wrote {res['csv_path']}")
    gap = (results["no_lorentz"]["final_centroid"][1]
           - results["lorentz"]["final_centroid"][1])
    print(f"rise suppressed by {gap:.6f}")
    return 0


def _cmd_check() -> int:
    report = mms.fd_residual_report(n=128)
    worst = max(report.values())
    for name, value in sorted(report.items()):
        print(f"{name:12s} {value:.3e}")
    ok = worst <= 1e-6
    print(f"max residual {worst:.3e} -> {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return _cmd_check()
        cfg = RunConfig.from_mapping(args.command, _mapping_from_args(args))
        if args.command == "mms":
            return _cmd_mms(cfg)
        if args.command == "spinodal":
            return _cmd_spinodal(cfg)
        return _cmd_boussinesq(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
