"""Clean benchmark: simulate, identify with both methods, print the order-6 poles.

Usage: python scripts/reproduce_benchmark.py [OUT_DIR]
"""

import sys
from pathlib import Path

from _common import cfg, cli
from probssi import io
from probssi.consistency import build_diagram, consistent_run

ORDER = 6


def main(out: Path) -> None:
    cli("simulate", "--config", cfg("simulate_benchmark"), "--out-dir", out)
    truth = io.read_modal_sets(out / "benchmark_truth.json")[0]
    rows = [("truth", truth.frequencies, truth.damping_ratios, None)]
    for method in ("cov", "robust"):
        cli("identify", "--config", cfg(f"clean_{method}"), "--input", out / "benchmark.csv", "--out-dir", out)
        sets = io.read_modal_sets(out / f"benchmark_{method}_modal.json")
        ms = next(s for s in sets if s.order == ORDER)
        keep = ~ms.spurious
        diagram = build_diagram(sets)
        runs = [consistent_run(diagram, f) for f in truth.frequencies]
        rows.append((method, ms.frequencies[keep], ms.damping_ratios[keep], runs))
    print(f"{'':8s} {'f1':>7s} {'f2':>7s} {'f3':>7s}   {'z1':>7s} {'z2':>7s} {'z3':>7s}   consistent orders")
    for name, f, z, runs in rows:
        fs = " ".join(f"{v:7.3f}" for v in f)
        zs = " ".join(f"{v:7.4f}" for v in z)
        print(f"{name:8s} {fs}   {zs}   {'' if runs is None else runs}")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "out/benchmark"))
