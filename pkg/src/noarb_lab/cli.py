"""Command line entry point: ``noarb-lab <experiment> --config FILE [--out DIR] [--seed N]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import yaml

from .errors import InternalConsistencyError, InvalidInput, NonDeterministicStrategy
from .harness import EXPERIMENTS, ExperimentConfig, run

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2


def _parse_set(items):
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise InvalidInput(f"--set expects key=value, got {item!r}", "set")
        out[key.strip()] = yaml.safe_load(value)
    return out


def _fail(code, kind, exc):
    record = {"error": kind, "message": str(exc)}
    field = getattr(exc, "field", None)
    if field is not None:
        record["field"] = field
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="noarb-lab", description=__doc__)
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="YAML experiment config")
    parser.add_argument("--out", help="report directory (default: reports)")
    parser.add_argument("--seed", type=int, help="base seed, overrides the config")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one experiment parameter (YAML value)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.load(args.experiment, args.config, out=args.out, seed=args.seed,
                                    overrides=_parse_set(args.set))
        written = run(cfg)
    except InvalidInput as exc:
        return _fail(EXIT_INVALID, "invalid_input", exc)
    except (InternalConsistencyError, NonDeterministicStrategy) as exc:
        return _fail(EXIT_INTERNAL, "internal_consistency", exc)
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
