"""Command-line front end: ``minabs <subcommand> --seed S [options]``.

Exit status: 0 success, 1 usage error, 2 an audit failed, 3 resource limit.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from minabs.errors import ResourceError
from minabs.experiments import UsageError, build_config, emit_report, load_config_text, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_AUDIT, EXIT_RESOURCE = 0, 1, 2, 3

SUBCOMMANDS = {
    "count": "transmission counting on a single pixel",
    "interf": "interferometric phase estimation on a single pixel",
    "bound-audit": "random scripted protocols checked against the overlap bound",
    "hadamard": "Hadamard-row identification, collective vs pixel-by-pixel",
    "grover": "Grover search through a weakly absorbing oracle",
    "afm": "repeat an absorption-free protocol until it succeeds",
    "sweep": "grid over parameters given as sweep.NAME=v1,v2 in --config",
}

_INSTANCE_FLAGS = ("alpha1", "alpha2", "alpha", "eps", "m", "k", "beta2", "phase", "p", "x0", "source", "scripts")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (mandatory here or in --config)")
    common.add_argument("--trials", type=int, help="Monte Carlo trials per grid point; 0 for analytic only")
    common.add_argument("--pe", type=float, help="target error probability")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), help="report format (default csv)")
    common.add_argument("--config", help="key=value file; command-line flags override it")
    common.add_argument("--workers", type=int, help="worker processes for trials")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="extra parameter")
    for name in _INSTANCE_FLAGS:
        common.add_argument(f"--{name}")

    parser = _Parser(prog="minabs", description="Minimum-absorption discrimination experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in SUBCOMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def _raw_config(args: argparse.Namespace) -> dict:
    raw = {}
    if args.config:
        try:
            raw.update(load_config_text(Path(args.config).read_text()))
        except OSError as exc:
            raise UsageError(f"config: {exc}") from None
    if args.command != "sweep":
        raw["kind"] = args.command
    elif "kind" not in raw:
        raise UsageError("sweep: the config file must name a kind")
    for key in ("seed", "trials", "pe", "out", "format", "workers", *_INSTANCE_FLAGS):
        value = getattr(args, key)
        if value is not None:
            raw[key] = str(value)
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set: expected KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        raw[key.strip().lower().replace("-", "_")] = value
    return raw


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = build_config(_raw_config(args))
        report = run_experiment(config)
        text = emit_report(report, config.fmt, config.out)
    except UsageError as exc:
        print(f"minabs: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceError, MemoryError) as exc:
        print(f"minabs: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    if config.out is None:
        sys.stdout.write(text)
    for note in report.notes:
        print(f"note: {note}", file=sys.stderr)
    failed = [a for a in report.audits if not a["passed"]]
    for a in failed:
        print(f"audit failed: {a['name']} (row {a['row']}, margin {a['margin']!r})", file=sys.stderr)
    return EXIT_AUDIT if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
