"""Command-line runner.

    lrfd complete --matrix X.csv --mask M.csv [--algorithm cono|lrfd]
                  [--dictionary A.csv] [--lambda 100] --out L.csv [--report R.csv]
    lrfd coherence-sweep | fig3-sweep | phase-diagram | lemma-check
                  [--config grid.cfg] [--seed N] [--out results.csv] [--workers N]

Exit status is 0 whenever the run completes, including runs where cells
fail to recover; 2 for usage, configuration and I/O errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import experiments as ex
from .io import FormatError, read_mask, read_matrix, write_matrix
from .linalg import EmptyDictionaryError, normalize_columns

log = logging.getLogger("lrfd")

USAGE_ERROR = 2


def _u64(s):
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _positive_float(s):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lrfd", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value grid file")
        sp.add_argument("--seed", type=_u64, help="base seed (overrides the config)")
        sp.add_argument("--out", help="output path (default: stdout for CSV)")
        sp.add_argument("--workers", type=_positive_int, default=1)

    c = sub.add_parser("complete", help="complete one matrix from a mask")
    common(c)
    c.add_argument("--matrix", required=True)
    c.add_argument("--mask", required=True)
    c.add_argument("--algorithm", choices=("cono", "lrfd"), default="cono")
    c.add_argument("--dictionary", help="dictionary matrix for lrfd; learned if absent")
    c.add_argument("--lambda", dest="lam", type=_positive_float)
    c.add_argument("--report", help="CSV report path (default: stdout)")

    for kind in ex.RUNNERS:
        common(sub.add_parser(kind.value, help=f"run the {kind.value} experiment"))
    return p


def _read_config(path):
    if path is None:
        return None
    with open(path) as fh:
        return fh.read()


def _emit(columns, rows, out):
    if out is None:
        ex.write_csv(sys.stdout, columns, rows)
    else:
        ex.write_csv(out, columns, rows)
        log.info("wrote %d rows to %s", len(rows), out)


def _complete(args):
    grid = ex.load_grid(ex.Experiment.SINGLE_COMPLETE, _read_config(args.config), args.seed)
    cfg = grid.solver_config()
    if args.lam is not None:
        cfg = grid.solver_config(lam=args.lam)
    for path in (args.matrix, args.mask, args.dictionary):
        if path is not None and not os.path.exists(path):
            raise FileNotFoundError(path)
    x = read_matrix(args.matrix)
    omega = read_mask(args.mask)
    if omega.shape != x.shape:
        raise FormatError(f"mask is {omega.shape}, matrix is {x.shape}")
    a = None
    if args.dictionary is not None:
        if args.algorithm != "lrfd":
            raise FormatError("--dictionary only applies to --algorithm lrfd")
        a = normalize_columns(read_matrix(args.dictionary))
    completed, row = ex.run_single_complete(x, omega, args.algorithm, cfg, a)
    write_matrix(args.out, completed)
    _emit(ex.COMPLETE_COLUMNS, [row], args.report)
    if not row["converged"]:
        log.warning("solver stopped at max_iters without meeting its tolerance")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "complete":
            if args.out is None:
                parser.error("complete requires --out for the completed matrix")
            _complete(args)
            return 0
        kind = ex.Experiment(args.command)
        grid = ex.load_grid(kind, _read_config(args.config), args.seed, args.out)
        rows = ex.RUNNERS[kind](grid, workers=args.workers)
        _emit(ex.COLUMNS[kind], rows, args.out)
    except (OSError, ex.ConfigError, FormatError, EmptyDictionaryError, ValueError) as exc:
        print(f"lrfd: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
