"""Command line: ``lielab densecheck | simulate | zradius | report``.

Settings resolve as flags > config file > defaults; ``LAB_SEED`` in the
environment replaces the master seed.  Exit codes: 0 passed, 1 usage error,
2 acceptance threshold missed.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys

from . import __version__
from .experiments import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    aggregate,
    load_report,
    run_experiment,
)

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

# flag name -> parser type; names match ExperimentConfig fields
OPTIONS = {
    "model": str,
    "trials": int,
    "seed": int,
    "out": str,
    "word_length": int,
    "chart_radius": float,
    "eps_id": float,
    "max_iter": int,
    "delta": float,
    "n": int,
    "gens": int,
    "budget": int,
    "jobs": int,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser, skip=()):
    for name, typ in OPTIONS.items():
        if name in skip:
            continue
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--config", help="INI file with one [section] per experiment")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lielab", description="Dense-subgroup laboratory for Lie groups.")
    parser.add_argument("--version", action="version", version=f"lielab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("densecheck", help="decide density of a subgroup of R^n read from a file")
    p.add_argument("file")
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="run a seeded batch of trials")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--input", help="generator file for densecheck")
    _add_common(p)

    p = sub.add_parser("zradius", help="measure a Z-neighbourhood radius by bisection")
    p.add_argument("model")
    _add_common(p, skip=("model",))

    p = sub.add_parser("report", help="summarize and re-check a finished run")
    p.add_argument("path")
    return parser


def _read_config_file(path, section: str) -> dict:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise UsageError(f"cannot read config file {path}")
    values = dict(cp.defaults())
    if cp.has_section(section):
        values.update(cp.items(section))
    out = {}
    for key, raw in values.items():
        key = key.replace("-", "_")
        if key in OPTIONS:
            out[key] = OPTIONS[key](raw)
        elif key == "input":
            out[key] = raw
        else:
            raise UsageError(f"unknown config key {key!r} in {path}")
    return out


def resolve_config(experiment: str, args: argparse.Namespace, env=None) -> ExperimentConfig:
    env = os.environ if env is None else env
    settings = {}
    if getattr(args, "config", None):
        settings.update(_read_config_file(args.config, experiment))
    for name in OPTIONS:
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    if getattr(args, "input", None):
        settings["input"] = args.input
    if env.get("LAB_SEED"):
        try:
            settings["seed"] = int(env["LAB_SEED"])
        except ValueError:
            raise UsageError(f"LAB_SEED must be an integer, got {env['LAB_SEED']!r}") from None
    return ExperimentConfig(experiment, **settings)


def _print_aggregate(agg: dict):
    print(json.dumps(agg, indent=2, sort_keys=True))


def _cmd_densecheck(args) -> int:
    cfg = ExperimentConfig("densecheck", trials=1, input=args.file, out=args.out)
    report = run_experiment(cfg)
    rec = report.records[0]
    if "error" in rec:
        print(rec["error"], file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(rec["certificate"], indent=2))
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_simulate(args) -> int:
    cfg = resolve_config(args.experiment, args)
    report = run_experiment(cfg)
    _print_aggregate(report.aggregate)
    if report.paths:
        print("wrote " + ", ".join(report.paths.values()))
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_zradius(args) -> int:
    args.trials = args.trials or 1
    cfg = resolve_config("zradius", args)
    report = run_experiment(cfg)
    for rec in report.records:
        if "error" in rec:
            print(rec["error"], file=sys.stderr)
        else:
            print(f"{rec['model']} r* = {rec['radius']:.12g} (golden {rec['golden']})")
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_report(args) -> int:
    try:
        report = load_report(args.path)
    except (OSError, KeyError, ValueError) as exc:
        print(f"cannot load report: {exc}", file=sys.stderr)
        return EXIT_USAGE
    cfg = ExperimentConfig.from_json(report.config)
    fresh = aggregate(cfg, report.records)
    consistent = json.dumps(fresh, sort_keys=True) == json.dumps(report.aggregate, sort_keys=True)
    _print_aggregate(report.aggregate)
    print(f"records: {len(report.records)}; aggregate {'matches' if consistent else 'DIFFERS FROM'} records")
    if not consistent:
        return EXIT_FAIL
    return EXIT_OK if report.passed else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    commands = {
        "densecheck": _cmd_densecheck,
        "simulate": _cmd_simulate,
        "zradius": _cmd_zradius,
        "report": _cmd_report,
    }
    try:
        return commands[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"lielab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
