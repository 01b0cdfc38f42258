"""Rerun the simulation tables through the CLI.

Usage: python3 scripts/reproduce_tables.py [--profile desk|full] [--out DIR] [--seed N]

Writes one output directory per table (results.csv, results_summary.csv,
tableN.csv, meta.json) and prints the table-shaped CSV.
"""
import argparse
import sys
from pathlib import Path

from hdben.cli import main


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--profile", default="desk", choices=("desk", "full"))
    ap.add_argument("--out", default="out/tables")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tables", default="table2,table3")
    args = ap.parse_args()
    worst = 0
    for table in args.tables.split(","):
        out = Path(args.out) / f"{table}_{args.profile}"
        code = main(["-v", "reproduce", "--table", table, "--profile", args.profile,
                     "--seed", str(args.seed), "--out", str(out)])
        worst = max(worst, code)
        if code == 0:
            print(f"== {table} ({args.profile}) ==")
            print((out / f"{table}.csv").read_text(encoding="utf-8"))
    return worst


if __name__ == "__main__":
    sys.exit(run())
