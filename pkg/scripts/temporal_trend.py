"""Frequency trend over a seeded series of corrupted datasets, one trend per method.

Each dataset is identified, its consistent poles clustered, and the cluster
centres written as one trend row. The spread of each trend column shows how
stable each method is across datasets.

Usage: python scripts/temporal_trend.py [OUT_DIR] [NUM_DATASETS]
"""

import sys
from pathlib import Path

import numpy as np

from _common import cfg, cli
from probssi import benchmark_3dof, ground_truth_modal, io

OUTLIER_SEED_OFFSET = 1000


def column_spread(rows, truth):
    """Across-dataset std of the centre nearest each true frequency.

    No frequency gate is applied, so a dataset that lost a mode contributes
    whichever centre landed closest, and the spread shows it.
    """
    out = []
    for f in truth:
        picks = [min(fr, key=lambda v: abs(v - f)) for _, fr in rows if fr]
        out.append((np.std(picks, ddof=1) if len(picks) > 1 else np.nan, len(picks)))
    return out


def main(out: Path, n: int) -> None:
    truth = ground_truth_modal(benchmark_3dof()).frequencies
    modal = {"cov": [], "robust": []}
    for k in range(n):
        stem = f"day{k:02d}"
        cli("simulate", "--seed", k, "--name", stem, "--out-dir", out)
        cli("corrupt", "--config", cfg("corrupt_random"), "--seed", OUTLIER_SEED_OFFSET + k,
            "--input", out / f"{stem}.csv", "--out-dir", out)
        for method in modal:
            cli("identify", "--config", cfg(f"corrupted_{method}"), "--input", out / f"{stem}_corrupted.csv",
                "--name", f"{stem}_{method}", "--out-dir", out)
            modal[method].append(out / f"{stem}_{method}_modal.json")
    for method, paths in modal.items():
        stamps = ",".join(f"day{k:02d}" for k in range(n))
        cli("cluster", "--config", cfg("trend"), "--input", ",".join(map(str, paths)), "--timestamps", stamps,
            "--name", f"trend_{method}", "--out-dir", out)
        rows = io.read_trend_csv(out / f"trend_{method}.csv")
        spread = ", ".join(f"{f:.2f} Hz: std {s:.5f} ({c} rows)" for f, (s, c) in zip(truth, column_spread(rows, truth)))
        print(f"{method}: {spread}")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "out/trend"),
         int(sys.argv[2]) if len(sys.argv) > 2 else 10)
