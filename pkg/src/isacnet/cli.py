"""Command-line entry point: run a study, write sample/CDF/summary tables, audit them."""

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_dict, parse_config
from .errors import InvalidConfigError, IsacError
from .experiments import STUDIES, build_cdf, exceed_fraction, percentile

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_SIMULATION = 4
EXIT_IO = 5
EXIT_CHECK = 6

EPILOG = """exit codes:
  0  success
  2  bad command line
  3  configuration error (missing file, unknown key, bad value)
  4  simulation error (degenerate geometry or detector inside a trial)
  5  output directory or file I/O failure
  6  self-check found summary.csv inconsistent with samples.csv
"""

SAMPLE_COLUMNS = ("trial", "arch", "sweep_id", "gamma_linear", "gamma_db")
SUMMARY_COLUMNS = ("kind", "sweep_id", "arch", "other_arch", "n",
                   "p5_db", "p50_db", "p95_db", "exceed_fraction")


def _fmt(v, digits=6):
    return f"{v:.{digits}f}" if np.isfinite(v) else ("-inf" if v < 0 else "nan")


def render_samples(samples):
    buf = io.StringIO()
    buf.write(",".join(SAMPLE_COLUMNS) + "\n")
    for s in samples:
        buf.write(f"{s.trial},{s.arch},{s.sweep_id},{s.gamma_linear!r},{s.gamma_db!r}\n")
    return buf.getvalue()


def render_cdf(cdf):
    lines = [f"# {cdf.arch} {cdf.sweep_id}: snr_db,cumulative_probability"]
    for v, p in zip(cdf.values, cdf.probabilities):
        lines.append(f"{_fmt(v)},{p:.6f}")
    return "\n".join(lines) + "\n"


def cdf_filename(cdf):
    return f"cdf_{cdf.arch}_{cdf.sweep_id}.csv"


def emit_plot_data(cdfs, out_dir):
    """Write one two-column CDF file per curve; returns the file names."""
    if not cdfs:
        raise ValueError("no CDFs to emit")
    out_dir = Path(out_dir)
    names = []
    for cdf in cdfs:
        name = cdf_filename(cdf)
        (out_dir / name).write_text(render_cdf(cdf), encoding="utf-8")
        names.append(name)
    return names


def render_summary(gammas_db, curves, pairs):
    """``gammas_db`` maps (arch, sweep_id) to trial-ordered dB values."""
    buf = io.StringIO()
    buf.write(",".join(SUMMARY_COLUMNS) + "\n")
    for arch, sid in curves:
        cdf = build_cdf(gammas_db[(arch, sid)])
        p5, p50, p95 = (percentile(cdf, q) for q in (5, 50, 95))
        buf.write(f"curve,{sid},{arch},,{cdf.count},{_fmt(p5)},{_fmt(p50)},{_fmt(p95)},\n")
    for sid, a, b in pairs:
        frac = exceed_fraction(gammas_db[(a, sid)], gammas_db[(b, sid)])
        buf.write(f"paired,{sid},{a},{b},{len(gammas_db[(a, sid)])},,,,{frac:.6f}\n")
    return buf.getvalue()


def read_samples(path):
    """Samples table -> {(arch, sweep_id): dB values ordered by trial}."""
    groups = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            groups.setdefault((row["arch"], row["sweep_id"]), []).append(
                (int(row["trial"]), float(row["gamma_db"])))
    return {k: np.array([v for _, v in sorted(rows)]) for k, rows in groups.items()}


def write_outputs(result, cfg, out_dir, workers, started):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.json"
    if manifest.exists():
        manifest.unlink()
    (out_dir / "samples.csv").write_text(render_samples(result.samples), encoding="utf-8")
    cdf_files = emit_plot_data(result.cdfs(), out_dir)
    gammas = {key: result.gammas(*key) for key in result.curve_keys}
    (out_dir / "summary.csv").write_text(render_summary(gammas, result.curve_keys, result.pairs),
                                         encoding="utf-8")
    doc = {
        "code_version": __version__,
        "experiment": result.experiment,
        "master_seed": cfg.seed,
        "trials": cfg.trials,
        "workers": workers,
        "config": config_dict(cfg),
        "modelling": {
            "power_budget": "per resource element",
            "steering_norm": cfg.steering_norm,
            "csi_mode": cfg.csi_mode,
            "layout": cfg.layout,
        },
        "files": {"samples": "samples.csv", "summary": "summary.csv", "cdfs": cdf_files},
        "curves": [list(k) for k in result.curve_keys],
        "pairs": [list(p) for p in result.pairs],
        "duration_s": round(time.monotonic() - started, 3),
    }
    manifest.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return manifest


def self_check(out_dir):
    """True when summary.csv can be regenerated byte-for-byte from samples.csv."""
    out_dir = Path(out_dir)
    doc = json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))
    gammas = read_samples(out_dir / doc["files"]["samples"])
    curves = [tuple(c) for c in doc["curves"]]
    pairs = [tuple(p) for p in doc["pairs"]]
    expected = render_summary(gammas, curves, pairs)
    return expected == (out_dir / doc["files"]["summary"]).read_text(encoding="utf-8")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="isacnet", description=__doc__, epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a case study", epilog=EPILOG,
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    run.add_argument("--config", type=Path, help="key = value config file (defaults if omitted)")
    run.add_argument("--experiment", choices=("A", "B", "C", "custom"))
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out-dir", type=Path, default=Path("results"))
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--fixed-layout", action="store_true", help="keep one AP layout for all trials")
    run.add_argument("--literal-steering", action="store_true",
                     help="use un-normalized steering vectors as sensing precoders")
    check = sub.add_parser("check", help="recompute summary.csv from samples.csv")
    check.add_argument("out_dir", type=Path)
    return parser


def resolve_config(args):
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.experiment:
        changes["experiment"] = args.experiment
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.fixed_layout:
        changes["layout"] = "fixed"
    if args.literal_steering:
        changes["steering_norm"] = "literal"
    return cfg.replace(**changes) if changes else cfg


def _cmd_run(args):
    started = time.monotonic()
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
    except (InvalidConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = STUDIES[cfg.experiment](cfg, cfg.trials, args.workers)
    except InvalidConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IsacError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    try:
        manifest = write_outputs(result, cfg, args.out_dir, args.workers, started)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {manifest}")
    return EXIT_OK


def _cmd_check(args):
    try:
        ok = self_check(args.out_dir)
    except (OSError, KeyError, ValueError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print("summary.csv consistent with samples.csv" if ok else "summary.csv MISMATCH")
    return EXIT_OK if ok else EXIT_CHECK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    return _cmd_run(args) if args.command == "run" else _cmd_check(args)


if __name__ == "__main__":
    sys.exit(main())
