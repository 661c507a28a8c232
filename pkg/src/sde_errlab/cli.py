"""Command-line experiment runner.

Exit status: 0 success, 2 configuration error, 3 state-domain error,
4 failed check (only with --check), 5 measurement at the noise floor.
"""

from __future__ import annotations

import argparse
import json
import sys

from .erroranalysis import NoiseFloorError
from .experiments import SUBCOMMANDS, ConfigError, ExperimentConfig, dump_path, dump_trajectory, run
from .model import builtin_models
from .scheme import DomainError

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_CHECK, EXIT_NOISE = 0, 2, 3, 4, 5

# subcommands whose natural output is a table
_CSV_DEFAULT = ("strong-rate", "weak-error")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _param(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), float(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sde-errlab", description="Monte Carlo error experiments for 1-D SDE schemes.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        # defaults are None so a --config file can fill what the flags leave out
        p.add_argument("--config", help="JSON file with config keys; flags override it")
        p.add_argument("--model")
        p.add_argument("--param", action="append", type=_param, default=None, metavar="K=V")
        p.add_argument("--x0", type=float)
        p.add_argument("--T", "--t", dest="T", type=float)
        p.add_argument("--n-list", dest="n_list", type=_int_list)
        p.add_argument("--n", type=int)
        p.add_argument("--paths", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--refinement", type=int)
        p.add_argument("--scheme", dest="schemes", action="append")
        p.add_argument("--workers", type=int)
        p.add_argument("--output")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--check", action="store_true", help="exit 4 when a report check fails")
        p.add_argument("--dump-path", help="write the Brownian path of path 0 as CSV")
        p.add_argument("--dump-traj", help="write the scheme trajectory of path 0 as CSV")
        if name == "moments":
            p.add_argument("--source", choices=("limit", "error"))
        if name == "weak-error":
            p.add_argument("--functional", choices=("clamp", "min"))
            p.add_argument("--tail-x", dest="tail_x", type=_float_list)
    sub.add_parser("list-models")
    return parser


_KEYS = ("model", "x0", "T", "n_list", "n", "paths", "seed", "refinement", "schemes", "workers", "output",
         "format", "source", "functional", "tail_x")


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        data.pop("subcommand", None)
    for key in _KEYS:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if args.param:
        params = dict(data.get("params", {}))
        params.update(dict(args.param))
        data["params"] = params
    data["subcommand"] = args.subcommand
    return ExperimentConfig.from_dict(data)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.subcommand == "list-models":
        for model in builtin_models().values():
            sys.stdout.write(json.dumps(model.describe(), sort_keys=True) + "\n")
        return EXIT_OK
    try:
        cfg = config_from_args(args)
        report = run(cfg)
        if args.dump_path:
            with open(args.dump_path, "w") as fh:
                dump_path(cfg, fh)
        if args.dump_traj:
            with open(args.dump_traj, "w") as fh:
                dump_trajectory(cfg, fh)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NoiseFloorError as exc:
        print(f"noise floor: {exc}", file=sys.stderr)
        return EXIT_NOISE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fmt = cfg.format or ("csv" if cfg.subcommand in _CSV_DEFAULT else "json")
    _emit(report.render(fmt), cfg.output)
    if args.check and not report.passed:
        for c in report.checks:
            if not c.passed:
                print(f"check failed: {c.name} {c.detail}", file=sys.stderr)
        return EXIT_CHECK
    if report.noise_floor:
        print("noise floor: estimates are within 3 standard errors of zero", file=sys.stderr)
        return EXIT_NOISE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
