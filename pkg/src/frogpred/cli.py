"""Command line entry point: ``frogpred <group> <op> [flags]``.

Settings are resolved as built-in defaults < ``--config`` file < flags.  The
only environment variable read is ``FROGPRED_SEED``, the default for
``--seed``.

Exit codes: 0 success, 2 configuration/input error, 3 capacity error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import CapacityError, FrogPredError
from .harness import ExperimentConfig, run_experiment

EXIT_CONFIG = 2
EXIT_CAPACITY = 3

# (group, op) -> (experiment kind, op, {flag dest: param name})
COMMANDS = {
    ("frog", "finite"): ("frog-finite", None, {"K": "K", "delta": "delta", "offset": "offset"}),
    ("frog", "composed"): ("frog-composed", None, {"eps": "eps", "gamma": "gamma", "K": "K", "C": "C",
                                                   "rmax": "rmax"}),
    ("bitpred", "run"): ("bitpred", "run", {"automaton": "automaton", "eps": "eps", "K": "K", "C": "C",
                                            "rmax": "rmax", "horizon": "horizon"}),
    ("bitpred", "check"): ("bitpred", "check", {"automaton": "automaton"}),
    ("forecast", "run"): ("forecast", "run", {"delta": "delta", "eps": "eps", "n": "n"}),
    ("forecast", "exact"): ("forecast", "exact", {"n": "n", "eps": "eps"}),
    ("forecast", "martingale"): ("forecast", "martingale", {"n": "n"}),
    ("streams", "gen"): ("streams", "gen", {"t": "t"}),
    ("streams", "density"): ("streams", "density", {"t": "t", "tail_from": "tail_from"}),
}


def _common(p: argparse.ArgumentParser, stream=True, sampling=False):
    p.add_argument("--config", type=Path, help="JSON experiment config; flags override its fields")
    p.add_argument("--out", help="directory for report.json and summary.csv")
    p.add_argument("--seed", type=int, help="master seed (default: $FROGPRED_SEED or 0)")
    if stream:
        p.add_argument("--stream", help="stream spec, e.g. 'bernoulli:1/10:seed=7'")
    if sampling:
        p.add_argument("--mode", choices=["exact", "sample"])
    p.add_argument("--trials", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frogpred", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True)

    frog = groups.add_parser("frog", help="frog-crossing strategies").add_subparsers(dest="op", required=True)
    p = frog.add_parser("finite", help="chip-stack strategy on one K-bit window")
    _common(p, sampling=True)
    p.add_argument("--K", type=int)
    p.add_argument("--delta", help="threshold as p/d")
    p.add_argument("--offset", type=int)
    p = frog.add_parser("composed", help="interval-composed strategy")
    _common(p, sampling=True)
    p.add_argument("--eps")
    p.add_argument("--gamma")
    p.add_argument("--K", type=int, help="base interval length (default from --C)")
    p.add_argument("--C", help="constant for the default K (64)")
    p.add_argument("--rmax", type=int)

    bp = groups.add_parser("bitpred", help="bit prediction").add_subparsers(dest="op", required=True)
    p = bp.add_parser("run", help="Monte Carlo evaluation of a bit predictor")
    _common(p)
    p.add_argument("--automaton", help="automaton JSON file; omit for the plain two-sided predictor")
    p.add_argument("--eps", help="target error; the two-sided predictor uses it as delta")
    p.add_argument("--K", type=int)
    p.add_argument("--C")
    p.add_argument("--rmax", type=int)
    p.add_argument("--horizon", type=int)
    p = bp.add_parser("check", help="strong accessibility of the bad states")
    _common(p, stream=False)
    p.add_argument("--automaton")

    fc = groups.add_parser("forecast", help="density forecasting").add_subparsers(dest="op", required=True)
    p = fc.add_parser("run")
    _common(p)
    p.add_argument("--delta")
    p.add_argument("--eps")
    p.add_argument("--n", type=int, help="override n (flagged in the report)")
    p = fc.add_parser("exact")
    _common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--eps")
    p = fc.add_parser("martingale")
    _common(p)
    p.add_argument("--n", type=int)

    st = groups.add_parser("streams", help="stream utilities").add_subparsers(dest="op", required=True)
    p = st.add_parser("gen")
    _common(p)
    p.add_argument("--t", type=int, help="number of bits")
    p = st.add_parser("density")
    _common(p)
    p.add_argument("--t", type=int)
    p.add_argument("--tail-from", dest="tail_from", type=int)
    return parser


def config_from_args(args) -> ExperimentConfig:
    kind, op, param_flags = COMMANDS[(args.group, args.op)]
    if args.config is not None:
        cfg = ExperimentConfig.from_json(args.config.read_text())
        if cfg.kind != kind:
            from .harness import ConfigError
            raise ConfigError(f"config kind {cfg.kind!r} does not match command {args.group} {args.op}")
    else:
        cfg = ExperimentConfig(kind=kind, seed=int(os.environ.get("FROGPRED_SEED", "0")))
    cfg.op = op or cfg.op
    for dest in ("stream", "mode", "trials", "seed", "out"):
        value = getattr(args, dest, None)
        if value is not None:
            setattr(cfg, dest, value)
    for dest, name in param_flags.items():
        value = getattr(args, dest, None)
        if value is not None:
            cfg.params[name] = value
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        report = run_experiment(cfg)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (FrogPredError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(report.canonical["summary"], sort_keys=True, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
