#!/usr/bin/env python3
"""Merge the UCI Adult train/test files into a single headered CSV.

Usage: prepare_adult.py ADULT_DATA ADULT_TEST OUT_CSV

The raw files ship inside several Python packages (e.g. the `responsibly`
wheel under responsibly/dataset/adult/). Test-set labels carry a trailing
period, which is stripped so both halves share one label vocabulary.
Missing cells keep the original "?" token.
"""
import csv
import sys

COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]


def rows(path):
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            cells = [c.strip() for c in line.split(",")]
            if len(cells) != len(COLUMNS):
                continue
            cells[-1] = cells[-1].rstrip(".")
            yield cells


def main():
    if len(sys.argv) != 4:
        sys.exit(__doc__)
    with open(sys.argv[3], "w", newline="") as out:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(COLUMNS)
        n = 0
        for src in sys.argv[1:3]:
            for r in rows(src):
                w.writerow(r)
                n += 1
    print(f"wrote {n} rows to {sys.argv[3]}")


if __name__ == "__main__":
    main()
