# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import argparse
import json
import logging
import sys

import pandas as pd

from q2_pruned_render._config import ConfigError
from q2_pruned_render.harness import (
    AcceptanceError,
    RunConfig,
    check_acceptance,
    emit_table,
    run_sweep,
    run_volume_sweep,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ACCEPTANCE = 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pruned-render",
        description="Render synthetic clothed-body sequences with empty ray "
        "and empty interval omission and compare them to dense sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one configuration or an ablation sweep.")
    run.add_argument("--config", required=True, help="Path to a key = value file.")
    run.add_argument("--out", help="Output directory (overrides run.out).")
    run.add_argument(
        "--sweep", help="Comma separated labels such as F,G,H,I,J."
    )
    run.add_argument("--seed", type=int, help="Sampling seed (overrides run.seed).")
    run.add_argument(
        "--modes",
        help="Comma separated candidate modes (average, binary) to run each "
        "ray omission label with (overrides run.modes).",
    )
    run.add_argument(
        "--check",
        action="store_true",
        help="Exit with status 3 when a check.* threshold is violated.",
    )
    run.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")

    vol = sub.add_parser(
        "volumes", help="Tabulate sampling volume per interval strategy."
    )
    vol.add_argument("--config", required=True, help="Path to a key = value file.")
    vol.add_argument("--out", help="Output directory (overrides run.out).")
    vol.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")

    cmp = sub.add_parser("compare", help="Compare the aggregates of two reports.")
    cmp.add_argument("--a", required=True, help="First report.json.")
    cmp.add_argument("--b", required=True, help="Second report.json.")
    return parser


def _run(args):
    overrides = {
        "run.out": args.out,
        "run.sweep": args.sweep,
        "run.modes": args.modes,
    }
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    cfg = RunConfig.from_file(args.config, overrides)
    reports = run_sweep(cfg)
    text, _ = emit_table(reports)
    print(text)
    if args.check:
        failures = check_acceptance(reports, cfg.check)
        if failures:
            raise AcceptanceError("; ".join(failures))


def _volumes(args):
    cfg = RunConfig.from_file(args.config, {"run.out": args.out})
    print(run_volume_sweep(cfg).to_string(index=False))


def _load_report(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read report {path}: {e}") from e


def _compare(args):
    a, b = _load_report(args.a), _load_report(args.b)
    rows = []
    for name, report in (("a", a), ("b", b)):
        for run in report.get("runs", []):
            row = {
                "report": name,
                "label": run["label"],
                "mode": run.get("mode") or "-",
            }
            row.update(run["aggregate"])
            rows.append(row)
    print(pd.DataFrame(rows).to_string(index=False))
    identical = a.get("runs") == b.get("runs")
    print(f"deterministic blocks identical: {'yes' if identical else 'no'}")


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            _run(args)
        elif args.command == "volumes":
            _volumes(args)
        else:
            _compare(args)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except AcceptanceError as e:
        logger.error("Acceptance check failed: %s", e)
        return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
