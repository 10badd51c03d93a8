"""Command line entry point: ``evoset <task> --config <path> [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, EvosetError
from .harness import TASKS, ExperimentConfig, load_config, run


def build_parser():
    ap = argparse.ArgumentParser(prog="evoset", description="Evolving-set and random-walk experiments.")
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config", help="JSON or YAML experiment config")
    ap.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    ap.add_argument("--out", default=None, help="output directory for report.json and CSVs")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.config:
            cfg = load_config(args.config, task=args.task, seed=args.seed, out=args.out)
        else:
            cfg = ExperimentConfig.from_dict({}, task=args.task, seed=args.seed, out=args.out)
        report = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EvosetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for r in report.records:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  [{r.anchor}]  value={r.value!r}  tol={r.tolerance!r}")
    print(f"{len(report.records) - len(report.failures)}/{len(report.records)} records passed")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
