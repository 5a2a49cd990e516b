"""Command-line entry point: ``certainsync-bench <subcommand> ...``.

Exit status is 0 on success, 2 for a bad configuration and 3 for an
unreadable or malformed dataset.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import CertainSyncError, MalformedDataset
from .experiment import (
    CSV_HEADER,
    CURVE_HEADER,
    DEFAULT_TXPOOL_SCHEMES,
    TXPOOL_HEADER,
    CsvTable,
    ExperimentConfig,
    Scheme,
    Scenario,
    experiment_rows,
    run_trials,
    run_txpool,
    success_curve,
)
from .txpool import generate_txpool_dataset, load_txpool_dataset, write_txpool_dataset

EXIT_CONFIG = 2
EXIT_DATASET = 3


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(x)) if "e" in x.lower() else int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser, many_n: bool = False) -> None:
    p.add_argument("--scheme", default=Scheme.CS_EGH.value, help="one of: " + ", ".join(s.value for s in Scheme))
    if many_n:
        p.add_argument("--n", type=_int_list, required=True, help="comma-separated universe sizes")
    else:
        p.add_argument("--n", type=_int_list, required=True, help="universe size")
    p.add_argument("--diff", type=_int_list, required=True, help="comma-separated diff sizes")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--delta", type=int, default=1, help="collision budget for universe reduction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenario", default=Scenario.SUPERSET.value, help="Superset or General")
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    p.add_argument("--timing", action="store_true", help="record wall-clock ms (breaks byte-identical output)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="certainsync-bench", description="Set reconciliation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("sweep-diff", help="cost versus diff size at a fixed universe"))
    _common(sub.add_parser("sweep-universe", help="cost versus universe size"), many_n=True)
    _common(sub.add_parser("success-curve", help="fraction decoded versus cells sent"))
    tx = sub.add_parser("txpool", help="reconcile two nodes' transaction pools minute by minute")
    tx.add_argument("--dataset", help="snapshot file; a seeded synthetic dataset is used when omitted")
    tx.add_argument("--scheme", default=",".join(s.value for s in DEFAULT_TXPOOL_SCHEMES),
                    help="comma-separated schemes")
    tx.add_argument("--delta", type=int, default=1)
    tx.add_argument("--seed", type=int, default=0)
    tx.add_argument("--minutes", type=int, default=30, help="length of the synthetic dataset")
    tx.add_argument("--save-dataset", help="also write the synthetic dataset to this path")
    tx.add_argument("--out", default="-")
    return parser


def _configs(args, ns) -> list[ExperimentConfig]:
    return [ExperimentConfig(args.scheme, n, tuple(args.diff), args.trials, args.scenario, args.delta,
                             args.seed, args.timing) for n in ns]


def _emit(table: CsvTable, out: str) -> None:
    if out == "-":
        sys.stdout.write(table.to_text())
    else:
        table.write(out)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "txpool":
            if args.dataset:
                snapshots = load_txpool_dataset(args.dataset)
            else:
                snapshots = generate_txpool_dataset(args.minutes, args.seed)
                if args.save_dataset:
                    write_txpool_dataset(args.save_dataset, snapshots)
            schemes = [s.strip() for s in args.scheme.split(",") if s.strip()]
            records = run_txpool(snapshots, schemes, args.delta, args.seed)
            _emit(CsvTable(TXPOOL_HEADER, [r.row() for r in records]), args.out)
            return 0
        if args.command != "sweep-universe" and len(args.n) != 1:
            raise ValueError(f"{args.command} takes a single --n")
        if args.jobs < 1:
            raise ValueError("--jobs must be >= 1")
        configs = _configs(args, args.n)
        records = [r for c in configs for r in run_trials(c, args.jobs)]
        if args.command == "success-curve":
            table = CsvTable(CURVE_HEADER, success_curve(records, configs[0].scheme.cell_bits))
        else:
            table = CsvTable(CSV_HEADER, experiment_rows(records))
        _emit(table, args.out)
        return 0
    except MalformedDataset as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except (CertainSyncError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
