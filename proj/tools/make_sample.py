"""Regenerates data/sample/papers.csv (deterministic, seed 7)."""
import csv
import sys

import numpy as np

N = 500
CONFERENCES = ["VIS", "EuroVis", "PacificVis", "CHI"]


def main(path):
    rng = np.random.default_rng(7)
    conf = np.repeat(CONFERENCES, N // len(CONFERENCES))
    rng.shuffle(conf)
    year = rng.integers(2010, 2025, N)
    # Heavy-tailed counts with a block of exact zeros; citations track downloads.
    downloads = np.floor(rng.lognormal(6.0, 1.6, N)).astype(int)
    downloads[rng.random(N) < 0.08] = 0
    citations = np.floor(downloads * rng.lognormal(-3.0, 0.9, N) * (2025 - year) / 8).astype(int)
    citations[rng.random(N) < 0.12] = 0
    award = rng.choice(["C", "HM", "BP"], N, p=[0.90, 0.07, 0.03])
    stamp = np.array(["No"] * N, dtype=object)
    stamp[rng.choice(N, N // 100, replace=False)] = "Yes"
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["Year", "Conference", "Downloads", "Citations", "Award", "ReplicabilityStamp"])
        for row in zip(year, conf, downloads, citations, award, stamp):
            w.writerow([int(row[0]), row[1], int(row[2]), int(row[3]), row[4], row[5]])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/sample/papers.csv")
