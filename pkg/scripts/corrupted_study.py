"""Seeded corrupted-data study: how often each method keeps all three mode columns.

Usage: python scripts/corrupted_study.py [OUT_DIR] [NUM_SEEDS]
"""

import sys
from pathlib import Path

from _common import cfg, cli
from probssi import benchmark_3dof, ground_truth_modal, io
from probssi.consistency import build_diagram, consistent_run

OUTLIER_SEED_OFFSET = 1000
MIN_RUN = 5


def main(out: Path, nseeds: int) -> None:
    truth = ground_truth_modal(benchmark_3dof()).frequencies
    success = {"cov": 0, "robust": 0}
    mode1 = {"cov": 0, "robust": 0}
    for seed in range(nseeds):
        stem = f"seed{seed:02d}"
        cli("simulate", "--seed", seed, "--name", stem, "--out-dir", out)
        cli("corrupt", "--config", cfg("corrupt_random"), "--seed", OUTLIER_SEED_OFFSET + seed,
            "--input", out / f"{stem}.csv", "--out-dir", out)
        line = [stem]
        for method in ("cov", "robust"):
            cli("identify", "--config", cfg(f"corrupted_{method}"), "--input", out / f"{stem}_corrupted.csv",
                "--out-dir", out)
            diagram = build_diagram(io.read_modal_sets(out / f"{stem}_corrupted_{method}_modal.json"))
            runs = [consistent_run(diagram, f) for f in truth]
            success[method] += all(r >= MIN_RUN for r in runs)
            mode1[method] += runs[0] >= MIN_RUN
            line.append(f"{method}={runs}")
        print(" ".join(line), flush=True)
    for method in ("cov", "robust"):
        print(f"{method}: all three columns in {success[method]}/{nseeds}, mode 1 in {mode1[method]}/{nseeds}")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "out/corrupted"),
         int(sys.argv[2]) if len(sys.argv) > 2 else 20)
