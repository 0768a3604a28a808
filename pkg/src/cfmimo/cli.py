"""Command-line entry point.

Exit codes: 0 success, 1 partial failure (some drops failed, or a solver
error), 2 invalid input.  Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bounds import Allocation, evaluate
from .config import ConfigError, SolverSettings, SystemConfig
from .pipeline import METHODS, TOPOLOGIES, Campaign, run_campaign, solve_method
from .topology import FADING_STREAM, NetworkDrop, gen_drop

EXIT_OK, EXIT_PARTIAL, EXIT_INVALID = 0, 1, 2


class InputError(Exception):
    pass


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or ():
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise InputError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = _parse_value(val)
    return out


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2) + "\n"
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _settings(args) -> SolverSettings:
    s = SolverSettings()
    if args.seed is not None:
        s = s.replace(seed=args.seed)
    return s


def cmd_run(args) -> int:
    data = _load_json(args.campaign)
    if not isinstance(data, dict):
        raise InputError("campaign file must hold a JSON object")
    cfg_over = _overrides(args.set)
    if cfg_over:
        data["config"] = {**data.get("config", {}), **cfg_over}
    for key, val in (("seed", args.seed), ("threads", args.threads), ("out_dir", args.out_dir),
                     ("drops", args.drops)):
        if val is not None:
            data[key] = val
    camp = Campaign.from_dict(data)
    res = run_campaign(camp)
    _emit({"out_dir": str(camp.out_dir), "files": [str(f) for f in res.files],
           "failures": len(res.failures), "seconds": round(res.seconds, 3)})
    return EXIT_PARTIAL if res.failures else EXIT_OK


def _config(args) -> SystemConfig:
    base = SystemConfig.from_dict(_load_json(args.config)) if args.config else SystemConfig()
    over = _overrides(args.set)
    return base.replace(**over) if over else base


def cmd_drop(args) -> int:
    cfg = _config(args)
    drop = gen_drop(cfg, args.seed if args.seed is not None else 0, args.topology)
    _emit(drop.to_dict(), args.output)
    return EXIT_OK


def _read_drop(path) -> NetworkDrop:
    try:
        return NetworkDrop.from_dict(_load_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path} is not a valid drop: {exc}") from exc


def cmd_bounds(args) -> int:
    drop = _read_drop(args.drop)
    try:
        alloc = Allocation.from_dict(_load_json(args.alloc))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.alloc} is not a valid allocation: {exc}") from exc
    if alloc.c.shape != drop.beta.shape or alloc.eta.shape != (drop.K,):
        raise InputError(f"allocation shapes c{alloc.c.shape}, eta{alloc.eta.shape} do not match "
                         f"drop (M={drop.M}, K={drop.K})")
    problems = alloc.check()
    if problems:
        raise InputError("allocation violates constraints: " + "; ".join(problems))
    seed = args.seed if args.seed is not None else 0
    rep = evaluate(drop, alloc, args.samples, np.random.default_rng([seed, FADING_STREAM]))
    _emit({"users": rep.rows()}, args.output)
    return EXIT_OK


def cmd_solve(args) -> int:
    drop = _read_drop(args.drop)
    alloc, trace = solve_method(drop, args.method, args.xi, _settings(args))
    out = {"method": args.method, "allocation": alloc.to_dict(),
           "trace": trace.to_dict() if trace is not None else None}
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        _emit(out, d / "solve.json")
        if trace is not None:
            with open(d / "trace.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["round", "objective", "power_objective", "mm_iterations", "seconds"])
                for s in trace.steps:
                    w.writerow([s.round, repr(s.objective), repr(s.power_objective),
                                s.mm_iterations, f"{s.seconds:.6f}"])
    _emit(out, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master / drop seed")
    common.add_argument("--threads", type=int, default=None, help="worker threads (run)")
    common.add_argument("--out-dir", default=None, help="output directory")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a system config field (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cfmimo", description="Cell-free uplink resource allocation")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run a campaign from JSON")
    r.add_argument("campaign")
    r.add_argument("--drops", type=int, default=None)
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("drop", parents=[common], help="generate one network drop")
    d.add_argument("--topology", choices=TOPOLOGIES, default="random")
    d.add_argument("--config", default=None, help="system config JSON")
    d.add_argument("-o", "--output", default=None)
    d.set_defaults(func=cmd_drop)

    b = sub.add_parser("bounds", parents=[common], help="rate report for a drop and allocation")
    b.add_argument("drop")
    b.add_argument("alloc")
    b.add_argument("--samples", type=int, default=2000)
    b.add_argument("-o", "--output", default=None)
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("solve", parents=[common], help="allocate one drop")
    s.add_argument("drop")
    s.add_argument("--method", choices=METHODS, default="proposed-joint")
    s.add_argument("--xi", type=float, required=True)
    s.add_argument("-o", "--output", default=None)
    s.set_defaults(func=cmd_solve)
    return p


def _error(kind: str, exc: BaseException) -> None:
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        if exc.code in (0, None):
            return EXIT_OK
        sys.stderr.write(json.dumps({"error": "invalid_input", "type": "UsageError",
                                     "message": "bad command line"}) + "\n")
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, ConfigError) as exc:
        _error("invalid_input", exc)
        return EXIT_INVALID
    except ValueError as exc:
        _error("invalid_input", exc)
        return EXIT_INVALID
    except Exception as exc:
        _error("failure", exc)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
