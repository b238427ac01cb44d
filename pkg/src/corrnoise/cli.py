"""Command line entry point: ``corrnoise run | compare | validate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import CorrNoiseError, NumericalError, SchemaError
from .scenario import OUTPUT_ENV, compare, load_scenario, run

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corrnoise", description="Correlated-noise open-system scenarios.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="execute a scenario and write its outputs")
    r.add_argument("scenario", type=Path)
    r.add_argument("--out", type=Path, default=None, help=f"output root (default: ${OUTPUT_ENV} or ./corrnoise-runs)")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--threads", type=int, default=1, help="parallel sweep points")

    c = sub.add_parser("compare", help="tabulate results of one or more runs as CSV")
    c.add_argument("manifests", nargs="+", type=Path, help="manifest.json files or run directories")
    c.add_argument("-o", "--output", type=Path, default=None, help="write the CSV here instead of stdout")

    v = sub.add_parser("validate", help="check a scenario file against the schema")
    v.add_argument("scenario", type=Path)
    return ap


def _cmd_run(args) -> int:
    manifest = run(load_scenario(args.scenario), args.out, threads=max(1, args.threads), seed=args.seed)
    print(Path(manifest.directory) / "manifest.json")
    return EXIT_OK


def _cmd_compare(args) -> int:
    text = compare(args.manifests).to_csv()
    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text, encoding="utf-8")
    return EXIT_OK


def _cmd_validate(args) -> int:
    s = load_scenario(args.scenario)
    print(f"ok {s.digest[:16]} ({len(s.points())} sweep points)")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "compare": _cmd_compare, "validate": _cmd_validate}[args.verb]
    try:
        return handler(args)
    except SchemaError as exc:
        print(exc, file=sys.stderr)
        return EXIT_SCHEMA
    except NumericalError as exc:
        print(exc, file=sys.stderr)
        return EXIT_NUMERICAL
    except (CorrNoiseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
