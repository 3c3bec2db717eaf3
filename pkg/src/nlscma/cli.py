"""Command-line front end for the toolkit.

One binary with six subcommands covering the pipeline: lattice construction,
codebook design, KPI analysis, BER simulation, multi-codebook comparison, and
data export for external plotting.  Logs go to stderr, data to stdout, and
file outputs are written to a temporary name then renamed so readers never
observe a half-written file.  Usage errors exit with status 2 (argparse),
domain errors with status 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import CODEBOOK_SCHEMA_VERSION, RESULTS_SCHEMA_VERSION, __version__
from .channel import ChannelModel
from .codebook import (
    canonical_json_bytes,
    codebook_to_dict,
    default_graph,
    load_codebook,
    superimposed_table,
)
from .design import DesignConfig, algorithm1, algorithm2
from .lattice import make_overlapped_constellation, med, shape_gain
from .metrics import kpi_report
from .simulator import (
    CSV_COLUMNS,
    SimConfig,
    compare as compare_runs,
    result_to_csv,
    result_to_dict,
    result_to_rows,
    run_ber,
)

log = logging.getLogger("nlscma")


def _atomic_write(path: str, data: bytes) -> None:
    dest = Path(path)
    fd, tmp = tempfile.mkstemp(dir=str(dest.parent), prefix=dest.name)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, dest)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        _atomic_write(out, text.encode())
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _load_codebook_checked(path: str):
    if not os.path.exists(path):
        raise ValueError(f"file not found: {path}")
    return load_codebook(path)


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--channel", choices=("awgn", "rayleigh", "rician"), default="awgn")
    p.add_argument("--kappa", type=float, default=0.0, help="Rician K-factor")
    p.add_argument("--detector", choices=("mpa", "map"), default="mpa")
    p.add_argument("--mpa-iters", type=int, default=7)
    p.add_argument("--snr-start", type=float, required=True)
    p.add_argument("--snr-stop", type=float, default=None)
    p.add_argument("--snr-step", type=float, default=1.0)
    p.add_argument("--convention", choices=("ebn0", "esn0"), default="ebn0")
    p.add_argument("--max-frames", type=int, default=100_000)
    p.add_argument("--min-errors", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--out", help="results file (.csv or .json); stdout when absent")


def _sim_config(args) -> SimConfig:
    stop = args.snr_stop if args.snr_stop is not None else args.snr_start
    if args.snr_step <= 0:
        raise ValueError("snr step must be positive")
    if stop < args.snr_start:
        raise ValueError("snr stop must not precede snr start")
    n = int(round((stop - args.snr_start) / args.snr_step)) + 1
    grid = tuple(
        args.snr_start + i * args.snr_step
        for i in range(n)
        if args.snr_start + i * args.snr_step <= stop + 1e-9
    )
    return SimConfig(
        snr_grid_db=grid,
        snr_convention=args.convention,
        max_frames=args.max_frames,
        min_bit_errors=args.min_errors,
        seed=args.seed,
        channel=ChannelModel(args.channel, args.kappa),
        detector=args.detector,
        mpa_iterations=args.mpa_iters,
        workers=args.workers,
        noiseless=args.noiseless,
    )


def _results_text(results, labels, out: str | None) -> str:
    """Render one or more curves as CSV, or JSON when `out` ends in .json."""
    as_json = bool(out) and out.lower().endswith(".json")
    if as_json:
        payload = [
            dict(result_to_dict(r), label=lbl) for r, lbl in zip(results, labels)
        ]
        doc = payload[0] if len(payload) == 1 else payload
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if len(results) == 1:
        return result_to_csv(results[0])
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, fieldnames=("codebook",) + CSV_COLUMNS, lineterminator="\n"
    )
    writer.writeheader()
    for r, lbl in zip(results, labels):
        for row in result_to_rows(r):
            row = {k: repr(v) if isinstance(v, float) else v for k, v in row.items()}
            writer.writerow(dict(row, codebook=lbl))
    return buf.getvalue()


def _cmd_lattice(args) -> int:
    code = make_overlapped_constellation(
        lattice=args.lattice,
        window=args.window,
        size=args.size,
        target_energy=args.energy,
    )
    doc = {
        "type": "lattice",
        "lattice": args.lattice,
        "window": {
            "kind": code.window.kind,
            "radius": code.window.radius,
            "half_width": code.window.half_width,
            "half_height": code.window.half_height,
        },
        "basis": [[b.real, b.imag] for b in code.basis],
        "points": [[p.real, p.imag] for p in code.points.tolist()],
        "mean_energy": code.mean_energy(),
        "med": med(code),
        "shape_gain": shape_gain(code),
    }
    log.info("%d points, MED %.4f", code.size, doc["med"])
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def _cmd_design(args) -> int:
    S = make_overlapped_constellation(
        lattice=args.lattice, window=args.window, target_energy=args.energy
    )
    graph = default_graph()
    cfg = DesignConfig(
        iterations=args.iters,
        gamma_th=args.gamma_th,
        seed=args.seed,
        layer_rule=args.layer_rule,
    )
    algo = algorithm1 if args.algorithm == 1 else algorithm2
    result = algo(S, graph, cfg)
    for flag in result.flags:
        log.warning("design flag: %s", flag)
    log.info("achieved MED(phi) %.4f", result.achieved_med)
    _emit(
        canonical_json_bytes(codebook_to_dict(result.codebook)).decode() + "\n",
        args.out,
    )
    return 0


def _format_kpi_table(d: dict) -> str:
    rows = []
    for key, val in d.items():
        if isinstance(val, list):
            text = " ".join(f"{v:.4f}" for v in val)
        elif isinstance(val, bool) or val is None:
            text = str(val)
        elif isinstance(val, float):
            text = f"{val:.4f}"
        else:
            text = str(val)
        rows.append((key, text))
    width = max(len(k) for k, _ in rows)
    lines = [f"{'metric':<{width}}  value", f"{'-' * width}  -----"]
    lines += [f"{k:<{width}}  {v}" for k, v in rows]
    return "\n".join(lines) + "\n"


def _cmd_analyze(args) -> int:
    cb = _load_codebook_checked(args.codebook)
    report = kpi_report(cb).to_dict()
    text = json.dumps(report, indent=2, sort_keys=True) + "\n\n"
    text += _format_kpi_table(report)
    _emit(text, args.out)
    return 0


def _cmd_simulate(args) -> int:
    cb = _load_codebook_checked(args.codebook)
    cfg = _sim_config(args)
    log.info(
        "simulating %d SNR points, detector %s, channel %s",
        len(cfg.snr_grid_db),
        cfg.detector,
        cfg.channel.kind,
    )
    result = run_ber(cfg, cb)
    _emit(_results_text([result], [Path(args.codebook).stem], args.out), args.out)
    return 0


def _cmd_compare(args) -> int:
    cbs = [_load_codebook_checked(p) for p in args.codebook]
    labels = [Path(p).stem for p in args.codebook]
    cfg = _sim_config(args)
    results = compare_runs(cfg, cbs)
    _emit(_results_text(results, labels, args.out), args.out)
    return 0


def _cmd_export(args) -> int:
    cb = _load_codebook_checked(args.codebook)
    if args.what == "constellation":
        S = getattr(cb, "S", None)
        if S is None:
            raise ValueError("codebook has no shared constellation to export")
        rows = [
            {"index": i, "re": p.real, "im": p.imag} for i, p in enumerate(S.tolist())
        ]
        fieldnames = ("index", "re", "im")
    else:  # table
        phi, digits = superimposed_table(cb)
        rows = []
        for c in range(phi.shape[1]):
            row = {"column": c}
            row.update(
                {f"symbol_u{j}": int(digits[c, j]) for j in range(digits.shape[1])}
            )
            for k in range(phi.shape[0]):
                row[f"re_k{k}"] = phi[k, c].real
                row[f"im_k{k}"] = phi[k, c].imag
            rows.append(row)
        fieldnames = tuple(rows[0])
    if args.format == "json":
        text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {k: repr(v) if isinstance(v, float) else v for k, v in row.items()}
            )
        text = buf.getvalue()
    _emit(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlscma",
        description="Design, analyze, and simulate overlapped-constellation "
        "multiple-access codebooks.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=(
            f"nlscma {__version__} "
            f"(codebook schema {CODEBOOK_SCHEMA_VERSION}, "
            f"results schema {RESULTS_SCHEMA_VERSION})"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lattice", help="build a windowed lattice constellation")
    p.add_argument("--lattice", choices=("eisenstein", "gaussian"), default="eisenstein")
    p.add_argument("--window", choices=("circular", "rectangular"), default="circular")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--energy", type=float, default=1.5)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_lattice)

    p = sub.add_parser("design", help="search for a codebook labeling")
    p.add_argument("--lattice", choices=("eisenstein", "gaussian"), default="eisenstein")
    p.add_argument("--window", choices=("circular", "rectangular"), default="circular")
    p.add_argument("--algorithm", type=int, choices=(1, 2), default=2)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--gamma-th", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layer-rule", default=None, help="e.g. mapping-29 or mapping-37")
    p.add_argument("--energy", type=float, default=1.5)
    p.add_argument("--out", help="codebook JSON path; stdout when absent")
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("analyze", help="print the KPI report for a codebook")
    p.add_argument("--codebook", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("simulate", help="run a BER/SER sweep for one codebook")
    p.add_argument("--codebook", required=True)
    _add_sim_flags(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare", help="sweep several codebooks on shared noise")
    p.add_argument(
        "--codebook", action="append", required=True, help="repeat per codebook"
    )
    _add_sim_flags(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("export", help="dump codebook data for external plotting")
    p.add_argument("--codebook", required=True)
    p.add_argument("--what", choices=("constellation", "table"), default="constellation")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(message)s",
        force=True,  # rebind to the current stderr on every invocation
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
