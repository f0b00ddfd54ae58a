"""Writes the scikit-learn diabetes table (raw, unscaled features) as CSV."""
import argparse
import csv

from sklearn.datasets import load_diabetes


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", nargs="?", default="data/diabetes.csv")
    args = parser.parse_args()
    data = load_diabetes(scaled=False)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.feature_names) + ["target"])
        for row, target in zip(data.data, data.target):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(target))])


if __name__ == "__main__":
    main()
