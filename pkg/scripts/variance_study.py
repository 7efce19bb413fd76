"""Clean and corrupted 100-trial variance studies at fixed order 6.

Usage: python scripts/variance_study.py [OUT_DIR] [JOBS] [TRIALS]
"""

import csv
import sys
from pathlib import Path
from typing import Optional

from _common import cfg, cli


def main(out: Path, jobs: int, trials: Optional[int]) -> None:
    for study in ("bench_clean", "bench_corrupted"):
        extra = ["--trials", trials] if trials else []
        cli("bench", "--config", cfg(study), "--jobs", jobs, "--out-dir", out, *extra)
        print(study)
        with open(out / f"{study}_summary.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                print(f"  {row['method']:7s} pole {row['pole']}: mean {float(row['mean_hz']):.4f} Hz, "
                      f"std {float(row['std_hz']):.5f} Hz ({row['valid']} valid)")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "out/variance"),
         int(sys.argv[2]) if len(sys.argv) > 2 else 1,
         int(sys.argv[3]) if len(sys.argv) > 3 else None)
