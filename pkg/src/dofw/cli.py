"""Command-line experiment runner.

    dofw run --config exp.json [--preset fig1|fig2|fig3] [--out DIR] [--seed N] [--check-only]

Exit status: 0 on success, 1 for configuration errors, 2 when an invariant
check fails. The worker thread count is read from DOFW_THREADS.
"""

import argparse
import json
import sys

from . import config
from .errors import ConfigError
from .experiment import run_experiment


def build_parser():
    parser = argparse.ArgumentParser(prog="dofw", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="validate and run an experiment")
    p.add_argument("--config", help="JSON experiment config (merged over the preset when both are given)")
    p.add_argument("--preset", choices=config.PRESETS, help="start from a shipped preset")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="base seed (overrides the config)")
    p.add_argument("--check-only", action="store_true", help="validate and certify the network, then stop")
    return parser


def _load(args):
    if args.config is None and args.preset is None:
        raise ConfigError("give --config, --preset or both", "--config")
    raw = config.load_preset(args.preset) if args.preset else {}
    if args.config is not None:
        user = config.load_json(args.config)
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object", args.config)
        raw = config.merge(raw, user)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("must be non-negative", "--seed")
        raw["seed"] = args.seed
    if args.out is not None:
        raw["output"] = args.out
    return raw


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    conf, report = config.validate(raw)
    if not report.ok:
        for err in report.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 1
    if args.check_only:
        for rep, a1 in report.assumption1.items():
            print(f"replicate {rep}: network certified, zeta_observed={a1.zeta_observed:g}")
        print("config ok")
        return 0
    summary, results = run_experiment(conf)
    failed = 0
    for r in results:
        bad = [k for k, c in r.checks.items() if not c.ok]
        failed += bool(bad)
        status = "ok" if not bad else "FAILED " + ",".join(bad)
        regret = r.stats.get("final_avg_regret_over_T")
        extra = f" regret/T={regret:.6g}" if regret is not None else ""
        print(f"{r.label} d={r.d} T={r.T} rep={r.replicate} alpha={r.alpha:.6g}{extra} "
              f"mean_round={r.timing.mean_round_s * 1e6:.1f}us {status}")
    print(json.dumps({"output": str(conf.output), "cells": len(results), "failed": failed}))
    return 0 if summary["ok"] else 2


if __name__ == "__main__":
    sys.exit(main())
