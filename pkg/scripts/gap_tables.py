#!/usr/bin/env python3
"""Print both benchmark gap tables from the shipped reference data."""

import sys

from coupledlns.cli import DATA
from coupledlns.gaps import gap_table_from_files


def main() -> int:
    tables = DATA / "tables"
    for title, ours, base in (("IRP (objective)", "irp_evolved.csv", "irp_baselines.csv"),
                              ("MR-MUPMP (makespan)", "mrmupmp_evolved.csv", "mrmupmp_baselines.csv")):
        print(f"== {title}")
        print(gap_table_from_files(tables / ours, tables / base).to_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
