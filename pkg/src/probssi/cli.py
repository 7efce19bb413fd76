"""Command-line entry point: simulate, corrupt, identify, cluster and bench.

Settings come from three layers, later ones winning: built-in defaults, a flat
``key = value`` file given with ``--config``, then explicit flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, io
from .bench import BenchConfig, run_bench, summarise
from .clustering import ClusteringConfig, TrendRow, temporal_trend
from .consistency import ConsistencyCriteria, build_diagram, welch_spectrum
from .errors import IdentificationError
from .mdof import (
    OUTLIER_PRESETS,
    SimulationConfig,
    benchmark_3dof,
    ground_truth_modal,
    inject_outliers,
    outlier_preset,
    simulate_response,
)
from .robust import EmConfig
from .ssi import METHODS, run_ssi

log = logging.getLogger("probssi")

OUT_DIR_ENV = "PROBSSI_OUT_DIR"
EXIT_OK, EXIT_ALGO, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or configuration values."""


def _orders(text: str) -> list:
    """``2:26:2`` (inclusive range), ``2,4,6`` or a single integer."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            lo, hi, step = parts
            if step < 1:
                raise ValueError
            return list(range(lo, hi + 1, step))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid order list {text!r}") from None


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _str_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return list(text)
    return [p.strip() for p in str(text).split(",") if p.strip()]


# (flag, type, default, help); defaults are applied after the config file
GLOBAL_OPTS = [
    ("--seed", int, 0, "base random seed"),
    ("--jobs", int, 1, "worker processes (bench trials, cluster datasets)"),
    ("--out-dir", str, None, f"output directory (default: ${OUT_DIR_ENV} or .)"),
    ("--format", str, "csv", "tabular output format: csv or json"),
    ("--error-json", _bool, False, "print failures as a JSON object on stderr"),
]

EM_OPTS = [
    ("--max-iters", int, 500, "EM iteration cap"),
    ("--rel-tol", float, 1e-8, "relative Q change for EM convergence"),
    ("--nu-init", float, 5.0, "initial degrees of freedom"),
    ("--nu-lo", float, 1e-3, "lower bound on degrees of freedom"),
    ("--nu-hi", float, 1e3, "upper bound on degrees of freedom"),
    ("--perturbation-std", float, 1e-2, "std of the perturbation added to the PCCA start"),
]

VERB_OPTS = {
    "simulate": [
        ("--preset", str, "benchmark-3dof", "system preset"),
        ("--num-samples", int, 8192, "samples per channel"),
        ("--sample-rate", float, 1000.0, "sampling rate in Hz"),
        ("--forcing-std", float, 1.0, "forcing standard deviation"),
        ("--output", str, "displacement", "displacement or acceleration"),
        ("--name", str, "record", "output file stem"),
    ],
    "corrupt": [
        ("--input", str, None, "clean record CSV"),
        ("--preset", str, "random-0.1pct", f"one of {', '.join(OUTLIER_PRESETS)}"),
        ("--rate", float, None, "override outlier rate"),
        ("--pinned-rel", float, None, "override pinned value as a fraction of channel peak"),
        ("--name", str, None, "output file stem (default: input stem)"),
    ],
    "identify": [
        ("--input", str, None, "record CSV"),
        ("--method", str, "cov", f"one of {', '.join(METHODS)}"),
        ("--j", int, 10, "block rows per Hankel half"),
        ("--orders", _orders, "2:26:2", "model orders, e.g. 2:26:2 or 4,6,8"),
        ("--freq-rel-tol", float, 0.02, "consistency: relative frequency change"),
        ("--damp-abs-tol", float, 0.05, "consistency: absolute damping change"),
        ("--mac-min", float, 0.98, "consistency: minimum MAC"),
        ("--trace", _bool, False, "write per-order EM traces (robust only)"),
        ("--name", str, None, "output file stem (default: input stem + method)"),
    ] + EM_OPTS,
    "cluster": [
        ("--input", _str_list, None, "comma-separated modal JSON files from identify"),
        ("--timestamps", _str_list, None, "labels for each input (default: file stems)"),
        ("--eps", float, 5e-5, "DBSCAN reachability distance"),
        ("--min-pts", int, 25, "DBSCAN minimum neighbourhood size"),
        ("--max-clusters", int, None, "keep only the largest clusters"),
        ("--consistent-only", _bool, False, "cluster fully consistent poles only"),
        ("--freq-rel-tol", float, 0.02, "consistency: relative frequency change"),
        ("--damp-abs-tol", float, 0.05, "consistency: absolute damping change"),
        ("--mac-min", float, 0.98, "consistency: minimum MAC"),
        ("--name", str, "trend", "output file stem"),
    ],
    "bench": [
        ("--trials", int, 100, "number of seeded datasets"),
        ("--order", int, 6, "fixed model order"),
        ("--j", int, 10, "block rows per Hankel half"),
        ("--methods", _str_list, "cov,robust", "methods to compare"),
        ("--preset", str, "none", "outlier preset, or none for clean data"),
        ("--num-samples", int, 8192, "samples per channel"),
        ("--name", str, None, "output file stem (default: bench_<preset>)"),
    ] + EM_OPTS,
}


def _dest(flag: str) -> str:
    return flag.lstrip("-").replace("-", "_")


def _kind(typ) -> dict:
    # boolean options are bare switches on the command line; config files may say true/false
    if typ is _bool:
        return {"action": "store_const", "const": True}
    return {"type": typ}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="flat key = value settings file")
    for flag, typ, _, help_ in GLOBAL_OPTS:
        common.add_argument(flag, default=None, help=help_, **_kind(typ))
    common.add_argument("-v", "--verbose", action="store_true", default=None, help="log progress")

    parser = argparse.ArgumentParser(
        prog="probssi",
        description="Subspace identification of modal parameters, with a Student-t robust variant.",
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", metavar="VERB")
    sub.required = True
    for verb, opts in VERB_OPTS.items():
        # global flags may appear before or after the verb; SUPPRESS keeps the outer value
        p = sub.add_parser(verb, help=f"{verb} (see --help)", argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="flat key = value settings file")
        for flag, typ, _, help_ in GLOBAL_OPTS:
            p.add_argument(flag, help=help_, **_kind(typ))
        p.add_argument("-v", "--verbose", action="store_true")
        for flag, typ, _, help_ in opts:
            p.add_argument(flag, help=help_, **_kind(typ))
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags into one settings dict."""
    verb = args.verb
    table = {_dest(f): (t, d) for f, t, d, _ in GLOBAL_OPTS + VERB_OPTS[verb]}
    table["verbose"] = (_bool, False)
    given = {k: v for k, v in vars(args).items() if v is not None and k not in ("verb", "config")}
    settings = {k: d for k, (_, d) in table.items()}
    if args.config:
        try:
            cfg = io.read_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror or exc}") from None
        except ValueError as exc:
            raise UsageError(f"{args.config}: {exc}") from None
        for key, raw in cfg.items():
            if key not in table:
                raise UsageError(f"{args.config}: unknown key {key!r} for '{verb}'")
            typ = table[key][0]
            try:
                settings[key] = typ(raw) if raw != "" else None
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{args.config}: bad value for {key}: {exc}") from None
    settings.update(given)
    for key, (typ, default) in table.items():
        if isinstance(settings.get(key), str) and typ not in (str,):
            settings[key] = typ(settings[key])
    if settings["format"] not in ("csv", "json"):
        raise UsageError(f"--format must be csv or json, got {settings['format']!r}")
    if settings["jobs"] < 1:
        raise UsageError("--jobs must be at least 1")
    out = settings.get("out_dir") or os.environ.get(OUT_DIR_ENV) or "."
    settings["out_dir"] = Path(out)
    return settings


def _em(s: dict) -> EmConfig:
    try:
        return EmConfig(
            max_iters=s["max_iters"], rel_tol=s["rel_tol"], nu_bounds=(s["nu_lo"], s["nu_hi"]),
            nu_init=s["nu_init"], perturbation_std=s["perturbation_std"], seed=s["seed"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _criteria(s: dict) -> ConsistencyCriteria:
    try:
        return ConsistencyCriteria(s["freq_rel_tol"], s["damp_abs_tol"], s["mac_min"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _require_input(path) -> Path:
    if not path:
        raise UsageError("--input is required")
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"input file not found: {p}")
    return p


def _fmt_float(v) -> str:
    return "" if v is None or not np.isfinite(v) else repr(float(v))


def cmd_simulate(s: dict) -> list:
    if s["preset"] != "benchmark-3dof":
        raise UsageError(f"unknown system preset {s['preset']!r}; available: benchmark-3dof")
    system = benchmark_3dof()
    try:
        cfg = SimulationConfig(sample_rate=s["sample_rate"], num_samples=s["num_samples"],
                               forcing_std=s["forcing_std"], seed=s["seed"], output=s["output"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rec = simulate_response(system, cfg)
    out = s["out_dir"]
    truth = ground_truth_modal(system)
    return [
        io.write_record(out / f"{s['name']}.csv", rec),
        io.write_modal_sets(out / f"{s['name']}_truth.json", [truth]),
    ]


def cmd_corrupt(s: dict) -> list:
    src = _require_input(s["input"])
    rec = io.read_record(src)
    overrides = {"seed": s["seed"]}
    if s["rate"] is not None:
        overrides["rate"] = s["rate"]
    if s["pinned_rel"] is not None:
        overrides["pinned_rel"] = s["pinned_rel"]
    try:
        spec = outlier_preset(s["preset"], **overrides)
        bad, mask = inject_outliers(rec, spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    stem = s["name"] or src.stem
    out = s["out_dir"]
    return [
        io.write_record(out / f"{stem}_corrupted.csv", bad),
        io.write_mask(out / f"{stem}_mask.csv", mask),
    ]


def cmd_identify(s: dict) -> list:
    src = _require_input(s["input"])
    if s["method"] not in METHODS:
        raise UsageError(f"--method must be one of {METHODS}")
    rec = io.read_record(src)
    orders = s["orders"]
    if not orders:
        raise UsageError("no model orders selected")
    crit = _criteria(s)
    em = _em(s)
    models = {} if s["trace"] else None
    try:
        sets = run_ssi(rec, s["j"], orders, s["method"], em=em, models=models)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    diagram = build_diagram(sets, crit, spectrum=welch_spectrum(rec.data, rec.dt))
    stem = s["name"] or f"{src.stem}_{s['method']}"
    out = s["out_dir"]
    meta = {"method": s["method"], "j": s["j"], "dt": rec.dt, "source": src.name}
    written = [io.write_modal_sets(out / f"{stem}_modal.json", sets, meta)]
    if s["format"] == "json":
        written.append(io.atomic_write(out / f"{stem}_diagram.json", io.diagram_json(diagram)))
    else:
        written.append(io.atomic_write(out / f"{stem}_diagram.tsv", io.diagram_tsv(diagram)))
    written.append(io.atomic_write(out / f"{stem}_plot.csv", io.plot_ready_csv(diagram)))
    for order, model in sorted((models or {}).items()):
        written.append(io.atomic_write(out / f"{stem}_trace_{order}.csv", io.trace_csv(model.trace)))
    return written


def cmd_cluster(s: dict) -> list:
    inputs = s["input"] or []
    if not inputs:
        raise UsageError("--input needs at least one modal JSON file")
    paths = [_require_input(p) for p in inputs]
    stamps = s["timestamps"] or [p.stem for p in paths]
    if len(stamps) != len(paths):
        raise UsageError("--timestamps must match the number of inputs")
    try:
        cfg = ClusteringConfig(eps=s["eps"], min_pts=s["min_pts"], max_clusters=s["max_clusters"],
                               consistent_only=s["consistent_only"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    crit = _criteria(s)
    datasets = []
    for ts, p in zip(stamps, paths):
        try:
            datasets.append((ts, io.read_modal_sets(p)))
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise UsageError(f"{p}: not a modal-set file ({exc})") from None
    for ts, sweep in datasets:
        if not sweep:
            log.warning("%s: empty sweep", ts)
    nonempty = [(ts, sweep) for ts, sweep in datasets if sweep]
    trend = iter(temporal_trend(nonempty, cfg, crit, jobs=s["jobs"]))
    rows = [next(trend) if sweep else TrendRow(str(ts), [], []) for ts, sweep in datasets]
    out = s["out_dir"]
    name = s["name"]
    written = [io.atomic_write(out / f"{name}_clusters.json", io.clusters_json(rows))]
    if s["format"] == "json":
        written.append(io.atomic_write(out / f"{name}.json", io.trend_json(rows)))
    else:
        written.append(io.atomic_write(out / f"{name}.csv", io.trend_csv(rows)))
    return written


def _bench_tables(results, summary, fmt: str):
    npoles = max(r.frequencies.size for r in results)
    if fmt == "json":
        trials = json.dumps([
            {"trial": r.trial, "seed": r.seed, "method": r.method,
             "frequencies": [None if not np.isfinite(f) else float(f) for f in r.frequencies],
             "error": r.error}
            for r in results
        ], indent=2)
        summ = json.dumps({
            m: {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in d.items()}
            for m, d in summary.items()
        }, indent=2, default=lambda v: None)
        return trials, summ
    head = ["trial", "seed", "method"] + [f"f{i + 1}" for i in range(npoles)] + ["error"]
    lines = [",".join(head)]
    for r in results:
        err = r.error.replace(",", ";").replace("\n", " ")
        lines.append(",".join([str(r.trial), str(r.seed), r.method]
                              + [_fmt_float(f) for f in r.frequencies] + [err]))
    trials = "\n".join(lines) + "\n"
    lines = ["method,pole,mean_hz,std_hz,valid,failures"]
    for m, d in summary.items():
        for k in range(d["mean"].size):
            lines.append(f"{m},{k + 1},{_fmt_float(d['mean'][k])},{_fmt_float(d['std'][k])},"
                         f"{int(d['valid'][k])},{d['failures']}")
    return trials, "\n".join(lines) + "\n"


def cmd_bench(s: dict) -> list:
    preset = None if s["preset"] in (None, "", "none", "clean") else s["preset"]
    if preset is not None and preset not in OUTLIER_PRESETS:
        raise UsageError(f"unknown outlier preset {preset!r}")
    methods = tuple(s["methods"])
    if not methods or any(m not in METHODS for m in methods):
        raise UsageError(f"--methods must be drawn from {METHODS}")
    try:
        cfg = BenchConfig(trials=s["trials"], order=s["order"], j=s["j"], methods=methods,
                          preset=preset, seed=s["seed"], jobs=s["jobs"],
                          num_samples=s["num_samples"], em=_em(s))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    results = run_bench(cfg)
    summary = summarise(results)
    stem = s["name"] or f"bench_{preset or 'clean'}"
    trials, summ = _bench_tables(results, summary, s["format"])
    ext = "json" if s["format"] == "json" else "csv"
    out = s["out_dir"]
    return [
        io.atomic_write(out / f"{stem}_trials.{ext}", trials),
        io.atomic_write(out / f"{stem}_summary.{ext}", summ),
    ]


COMMANDS = {
    "simulate": cmd_simulate,
    "corrupt": cmd_corrupt,
    "identify": cmd_identify,
    "cluster": cmd_cluster,
    "bench": cmd_bench,
}


def _fail(code: int, exc: Exception, as_json: bool) -> int:
    if as_json:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}),
              file=sys.stderr)
    else:
        print(f"probssi: error: {exc}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    as_json = bool(getattr(args, "error_json", False))
    try:
        settings = resolve(args)
        as_json = settings["error_json"]
        logging.basicConfig(level=logging.INFO if settings["verbose"] else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if not settings["verbose"]:
            warnings.simplefilter("ignore")
        written = COMMANDS[args.verb](settings)
    except (UsageError, argparse.ArgumentTypeError) as exc:
        return _fail(EXIT_USAGE, exc, as_json)
    except OSError as exc:
        return _fail(EXIT_USAGE, exc, as_json)
    except (IdentificationError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_ALGO, exc, as_json)
    except ValueError as exc:
        # malformed input files surface as ValueError from the readers
        return _fail(EXIT_USAGE, exc, as_json)
    for path in written:
        print(path)
    return EXIT_OK
