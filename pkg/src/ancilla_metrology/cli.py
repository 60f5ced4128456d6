"""Command line entry point: ``metrology <experiment> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .experiments import KINDS, ConfigError, ExperimentSpec, load_config_file, parse_assignments, run

log = logging.getLogger("ancilla_metrology")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="metrology",
        description="Ancilla-assisted spin metrology experiments; writes CSV tables.",
    )
    p.add_argument("experiment", choices=KINDS)
    p.add_argument("--config", metavar="FILE", help="flat key = value file; --set wins over it")
    p.add_argument(
        "--set",
        dest="assignments",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config field, e.g. N=50, betas=2,1 or grid.g=0,0.5,11",
    )
    p.add_argument("--out", metavar="PATH", help="CSV path (default: stdout)")
    p.add_argument("--workers", type=int, default=1, metavar="K")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def make_spec(args) -> ExperimentSpec:
    overrides, grids = {}, {}
    if args.config:
        overrides, grids = load_config_file(args.config)
    o, g = parse_assignments(args.assignments)
    overrides.update(o)
    grids.update(g)
    return ExperimentSpec(args.experiment, overrides, grids, args.out, args.workers)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        spec = make_spec(args)
        start = time.perf_counter()
        table = run(spec)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"metrology: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s finished in %.2f s", spec.kind, time.perf_counter() - start)

    if spec.output_path:
        for path in table.write(Path(spec.output_path)):
            log.info("wrote %s", path)
    else:
        sys.stdout.write(table.to_csv())
        for suffix, extra in table.extra.items():
            sys.stdout.write(f"# --- table: {suffix}\n")
            sys.stdout.write(extra.to_csv())

    if spec.kind == "validate":
        if table.metadata.get("overall") != "pass":
            for row in table.rows:
                if not row[5] and not row[6]:
                    print(f"FAIL [{row[0]}] {row[1]}: measured {row[2]:.6g}, target {row[3]:.6g} tol {row[4]:.3g}", file=sys.stderr)
            return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
