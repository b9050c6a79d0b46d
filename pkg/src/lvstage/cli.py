"""``lvstage`` command line.

Exit status: 0 on success, 2 for invalid input or configuration,
3 when a numerical method fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

from .config import load_config
from .errors import LvstageError, NumericalError, ValidationError
from .experiments import COMMANDS, write_summary

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lvstage",
        description="Delayed diffusive competition with stage structure: steady states, "
        "principal eigenvalues, region labels and simulations.",
    )
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "steady": "positive steady profiles of each species alone",
        "eigen": "principal eigenvalue of d*Laplacian + w (and its delayed variant)",
        "classify": "region label and predicted outcome",
        "simulate": "integrate the delayed system and write the trajectory",
        "example-a": "identical species differing only in delay",
        "example-b": "one delayed species: survival-factor thresholds",
        "harmless": "delays confined to interaction terms",
        "sweep": "randomized agreement check between labels and simulations",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", required=True, metavar="FILE", help="key = value run configuration")
        sp.add_argument("--out", default="out", metavar="DIR", help="output directory (default: out)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    logging.captureWarnings(True)
    try:
        cfg = load_config(args.config)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            summary = COMMANDS[args.command](cfg, args.out)
        path = write_summary(summary, args.out)
    except ValidationError as exc:
        print(f"lvstage: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"lvstage: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except LvstageError as exc:
        print(f"lvstage: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(summary["result"], indent=2, default=str))
    print(f"summary written to {path}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
