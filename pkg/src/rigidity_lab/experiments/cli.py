"""Command line entry point: ``rigidity-lab run|suite|verify|list-groups|version``.

Exit codes: 0 when every certificate passes, 1 when a certificate (or the
computation itself) fails, 2 for invalid input.
"""
from __future__ import annotations

import argparse
import csv
import sys

from .. import SCHEMA_VERSION, __version__
from ..errors import ConfigError
from ..groups import FAMILY_HELP
from .config import KINDS, config_values_from_toml, load_toml, make_config
from .records import load_record, verify_record
from .runner import run, run_suite, suite_json, write_record, write_trace_csv

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

# flag name -> config field
RUN_FLAGS = {
    "group": str, "space": str, "grid": int, "band": int, "k": int, "p": float, "amplitude": float,
    "mode": int, "density": str, "m": str, "C0": float, "tol": float, "max_iters": int, "seed": int,
    "trials": int, "schedule": str, "subset_size": int, "out": str, "csv": str,
}


class _Parser(argparse.ArgumentParser):
    """argparse already exits with status 2 on usage errors; keep that contract explicit."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rigidity-lab", description="Averaging and rigidity experiments for finite group actions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("kind", choices=KINDS)
    p_run.add_argument("--config", help="TOML file with config values (flags override it)")
    for name, typ in RUN_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        p_run.add_argument(flag, dest=name, type=typ, default=None)
    p_run.add_argument("--timing", action="store_true", default=None,
                       help="record wall-clock times (makes the JSON non-reproducible)")
    p_run.add_argument("--quiet", action="store_true", help="do not echo the JSON report")

    p_suite = sub.add_parser("suite", help="run a matrix of experiments from a TOML file")
    p_suite.add_argument("matrix")
    p_suite.add_argument("--out", help="aggregated JSON report path")
    p_suite.add_argument("--csv", help="summary CSV path")

    p_ver = sub.add_parser("verify", help="re-check the certificates of a stored record")
    p_ver.add_argument("record")

    sub.add_parser("list-groups", help="list the supported group families")
    sub.add_parser("version", help="print version information")
    return parser


def _cmd_run(args) -> int:
    values = {}
    if args.config:
        values.update(config_values_from_toml(load_toml(args.config)))
        if values.get("kind", args.kind) != args.kind:
            raise ConfigError(f"kind: config file says {values['kind']!r} but the command says {args.kind!r}")
    values["kind"] = args.kind
    for name in (*RUN_FLAGS, "timing"):
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    cfg = make_config(values)
    record = run(cfg)
    if cfg.out:
        write_record(record, cfg.out)
    if cfg.csv and record.trace:
        write_trace_csv(cfg.csv, record.trace)
    if not args.quiet and not cfg.out:
        sys.stdout.write(record.to_json())
    failure = record.first_failure()
    for c in record.certificates:
        mark = "PASS" if c.passed else "FAIL"
        print(f"[{mark}] {c.name}: lhs={c.lhs:.6g} rhs={c.rhs:.6g}", file=sys.stderr)
    if failure is not None:
        print(f"failed: {failure}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _cmd_suite(args) -> int:
    report, rows = run_suite(args.matrix)
    text = suite_json(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    s = report["summary"]
    print(f"{s['passed']}/{s['total']} cells passed", file=sys.stderr)
    for row in rows[1:]:
        if not row[-4]:
            print(f"cell {row[0]} failed: {row[-3]}", file=sys.stderr)
    return EXIT_OK if s["failed"] == 0 else EXIT_FAIL


def _cmd_verify(args) -> int:
    data = load_record(args.record)
    outcome = verify_record(data)
    if outcome.passed:
        print("pass")
        return EXIT_OK
    print(f"fail: {outcome.first}")
    for extra in outcome.failures[1:]:
        print(f"  also: {extra}")
    return EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "suite":
            return _cmd_suite(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "list-groups":
            for spec, text in FAMILY_HELP.items():
                print(f"{spec:16s} {text}")
            return EXIT_OK
        print(f"rigidity-lab {__version__} (record schema {SCHEMA_VERSION})")
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
