"""Converts the UCI yacht hydrodynamics table to a headered CSV.

The source file (yacht_hydrodynamics.data) is whitespace separated, has no
header, and may contain blank lines. Download it from the UCI repository and
pass its path as the first argument.
"""
import argparse
import csv

COLUMNS = [
    "buoyancy_position",
    "prismatic_coefficient",
    "length_displacement",
    "beam_draught",
    "length_beam",
    "froude_number",
    "residuary_resistance",
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("source")
    parser.add_argument("out", nargs="?", default="data/yacht.csv")
    args = parser.parse_args()
    rows = []
    with open(args.source) as fh:
        for lineno, line in enumerate(fh, 1):
            cells = line.split()
            if not cells:
                continue
            if len(cells) != len(COLUMNS):
                raise SystemExit(f"line {lineno}: expected {len(COLUMNS)} values, found {len(cells)}")
            rows.append([float(c) for c in cells])
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
