"""Command line: ``riscover {run,min-ris,validate,selftest}``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import harness
from .errors import ConfigError, NonConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_NONCONVERGENCE = 0, 2, 3, 4


def _error(kind, exc, code):
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(record), file=sys.stderr)
    return code


def _overrides(exp, args):
    data = exp.resolved
    changed = False
    if getattr(args, "mode", None):
        data = {**data, "mode": args.mode}
        changed = True
    if getattr(args, "seed", None) is not None:
        data = {**data, "scene": {**data["scene"], "seed": args.seed}}
        changed = True
    if getattr(args, "trials", None) is not None:
        data = {**data, "montecarlo": {**data["montecarlo"], "trials": args.trials}}
        changed = True
    if not changed:
        return exp
    new = harness.parse_config(data)
    return dataclasses.replace(new, notes=exp.notes)


def build_parser():
    p = argparse.ArgumentParser(prog="riscover", description="RIS-aided coverage under blockage")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="evaluate a sweep and write CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.add_argument("--mode", choices=harness.MODES)
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    mr = sub.add_parser("min-ris", help="minimum RIS count versus blockage density")
    mr.add_argument("--config", required=True)
    mr.add_argument("--target", type=float)
    mr.add_argument("--out")
    val = sub.add_parser("validate", help="check a config and print it resolved")
    val.add_argument("--config", required=True)
    sub.add_parser("selftest", help="run the invariant battery")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            results = harness.selftest()
            for name, ok, detail in results:
                print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
            return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_COMPUTE
        exp = harness.load_config(args.config)
        if args.command == "validate":
            print(json.dumps(exp.resolved, indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "run":
            exp = _overrides(exp, args)
            if not (args.out or exp.output):
                raise ConfigError("output: give --out or an output field")
            rows = harness.run_experiment(exp, args.out)
            print(f"wrote {len(rows)} row(s) to {args.out or exp.output}")
            return EXIT_OK
        if args.command == "min-ris":
            if not (args.out or exp.output):
                raise ConfigError("output: give --out or an output field")
            if args.target is not None and not 0 < args.target < 1:
                raise ConfigError("--target: must lie in (0, 1)")
            rows = harness.min_ris_cli(exp, target=args.target, out_path=args.out)
            for r in rows:
                n = "unattainable" if r.n_R is None else r.n_R
                print(f"lambda_B={r.lambda_B:g}  nB={r.nB}  n_R={n}")
            return EXIT_OK
    except ConfigError as exc:
        return _error("config", exc, EXIT_CONFIG)
    except NonConvergenceError as exc:
        return _error("nonconvergence", exc, EXIT_NONCONVERGENCE)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        return _error("computation", exc, EXIT_COMPUTE)
    return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
