"""Seeded Monte-Carlo error-rate sweeps over an SNR grid.

Frames are simulated in fixed-size batches, each batch owning a
counter-based generator keyed by (seed, SNR index, batch index).  Workers
only decide how many batches run concurrently; counters merge in batch
order and early stopping is evaluated on that same order, so the result is
byte-identical for any worker count.  Comparison runs reuse one batch's
symbol, fading, and noise draws across all codebooks (common random
numbers), which needs the noise to be generated independently of the
transmitted codeword.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import beta

from .channel import ChannelModel, ebn0_to_n0, esn0_to_n0
from .codebook import codebook_hash, encode_symbols, superimposed_table
from .detector import map_symbols, mpa_symbols
from .metrics import med_superimposed

RESULT_SCHEMA_VERSION = 1
BATCH_FRAMES = 1000
CSV_COLUMNS = (
    "snr_db",
    "convention",
    "frames",
    "bit_errors",
    "symbol_errors",
    "ber",
    "ser",
)
CONVENTIONS = ("ebn0", "esn0")
DETECTORS = ("mpa", "map")


@dataclass(frozen=True)
class SimConfig:
    snr_grid_db: tuple[float, ...]
    snr_convention: str = "ebn0"
    max_frames: int = 100_000
    min_bit_errors: int = 200
    seed: int = 0
    channel: ChannelModel = ChannelModel("awgn")
    detector: str = "mpa"
    mpa_iterations: int = 7
    workers: int = 1
    noiseless: bool = False

    def __post_init__(self) -> None:
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid:
            raise ValueError("SNR grid must be nonempty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("SNR grid must be strictly increasing")
        object.__setattr__(self, "snr_grid_db", grid)
        if self.snr_convention not in CONVENTIONS:
            raise ValueError(f"unknown SNR convention: {self.snr_convention!r}")
        if self.detector not in DETECTORS:
            raise ValueError(f"unknown detector: {self.detector!r}")
        if self.max_frames < 1:
            raise ValueError("max_frames must be at least 1")
        if self.min_bit_errors < 0:
            raise ValueError("min_bit_errors must be nonnegative")
        if self.mpa_iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass(frozen=True)
class SnrPoint:
    snr_db: float
    frames: int
    bit_errors: int
    symbol_errors: int
    ber: float
    ser: float


@dataclass(frozen=True)
class BerResult:
    convention: str
    points: tuple[SnrPoint, ...]
    codebook: str  # content hash of the codebook that produced the curve
    config: dict


def clopper_pearson(errors: int, trials: int, confidence: float = 0.95):
    """Exact binomial confidence interval for an error count."""
    if trials < 1:
        raise ValueError("need at least one trial")
    alpha = 1.0 - confidence
    lo = 0.0 if errors == 0 else float(beta.ppf(alpha / 2, errors, trials - errors + 1))
    hi = (
        1.0
        if errors == trials
        else float(beta.ppf(1 - alpha / 2, errors + 1, trials - errors))
    )
    return lo, hi


def _batch_rng(seed: int, snr_idx: int, batch_idx: int) -> np.random.Generator:
    key = np.array(
        [np.uint64(seed), (np.uint64(snr_idx) << np.uint64(32)) | np.uint64(batch_idx)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


class _CodebookContext:
    """Precomputed per-codebook state shared by every batch (read-only)."""

    def __init__(self, cb):
        self.cb = cb
        self.graph = cb.graph
        self.phi, self.digits = superimposed_table(cb)
        try:
            med = med_superimposed(self.phi)
        except ValueError:
            med = 0.0
        if med == 0.0:
            raise ValueError("degenerate codebook")
        self.frame_energy = float(np.mean(np.abs(self.phi) ** 2) * self.graph.K)
        m = self.graph.M
        self.popcount = np.array([bin(x).count("1") for x in range(m)], dtype=np.int64)


def _noise_variance(cfg: SimConfig, ctx: _CodebookContext, snr_db: float) -> float:
    if cfg.noiseless:
        return 0.0
    g = ctx.graph
    if cfg.snr_convention == "ebn0":
        return ebn0_to_n0(snr_db, ctx.frame_energy, g.J, g.M)
    return esn0_to_n0(snr_db, ctx.frame_energy, g.K)


def _run_batch(ctxs, cfg, n0s, snr_idx, batch_idx, size):
    """Simulate one batch for every codebook off one draw sequence.

    Returns per-codebook (bit_errors, symbol_errors).  Symbols, fading, and
    noise are drawn once; accuracy of the shared-draw comparison relies on
    the noise being independent of the transmitted codeword.
    """
    rng = _batch_rng(cfg.seed, snr_idx, batch_idx)
    g = ctxs[0].graph
    sym = rng.integers(0, g.M, size=(size, g.J))
    if cfg.channel.kind == "awgn":
        h = np.ones((size, g.K), dtype=complex)
    else:
        kappa = cfg.channel.kappa if cfg.channel.kind == "rician" else 0.0
        los = math.sqrt(kappa / (1.0 + kappa))
        scatter = math.sqrt(1.0 / (1.0 + kappa))
        gh = rng.standard_normal((size, g.K, 2))
        h = los + scatter * (gh[..., 0] + 1j * gh[..., 1]) / math.sqrt(2.0)
    gn = rng.standard_normal((size, g.K, 2))
    noise_unit = gn[..., 0] + 1j * gn[..., 1]

    out = []
    for ctx, n0 in zip(ctxs, n0s):
        w = encode_symbols(ctx.cb, sym)
        y = h * w + math.sqrt(n0 / 2.0) * noise_unit if n0 > 0 else h * w
        if cfg.detector == "map":
            dec = map_symbols(y, h, ctx.cb, n0, phi=ctx.phi, digits=ctx.digits)
        else:
            dec = mpa_symbols(y, h, ctx.cb, n0, iterations=cfg.mpa_iterations)
        diff = np.bitwise_xor(dec.astype(np.int64), sym)
        out.append((int(ctx.popcount[diff].sum()), int(np.count_nonzero(diff))))
    return out


def _sweep(ctxs, cfg: SimConfig):
    """Per-codebook lists of SnrPoints, batches merged in index order."""
    n_cb = len(ctxs)
    points = [[] for _ in range(n_cb)]
    for snr_idx, snr_db in enumerate(cfg.snr_grid_db):
        n0s = [_noise_variance(cfg, ctx, snr_db) for ctx in ctxs]
        frames = 0
        bit_err = [0] * n_cb
        sym_err = [0] * n_cb
        batch_idx = 0
        stopped = False
        while not stopped:
            wave = []
            remaining = cfg.max_frames - frames
            for _ in range(cfg.workers):
                if remaining <= 0:
                    break
                size = min(BATCH_FRAMES, remaining)
                wave.append((batch_idx, size))
                batch_idx += 1
                remaining -= size
            if not wave:
                break
            if cfg.workers > 1 and len(wave) > 1:
                with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                    results = list(
                        pool.map(
                            lambda bs: _run_batch(ctxs, cfg, n0s, snr_idx, *bs), wave
                        )
                    )
            else:
                results = [
                    _run_batch(ctxs, cfg, n0s, snr_idx, b, s) for b, s in wave
                ]
            for (b, size), per_cb in zip(wave, results):
                frames += size
                for i, (be, se) in enumerate(per_cb):
                    bit_err[i] += be
                    sym_err[i] += se
                done_errors = all(be >= cfg.min_bit_errors for be in bit_err)
                if done_errors or frames >= cfg.max_frames:
                    stopped = True
                    break
        g = ctxs[0].graph
        denom_bits = frames * g.J * g.bits_per_symbol
        denom_syms = frames * g.J
        for i in range(n_cb):
            points[i].append(
                SnrPoint(
                    snr_db=float(snr_db),
                    frames=frames,
                    bit_errors=bit_err[i],
                    symbol_errors=sym_err[i],
                    ber=bit_err[i] / denom_bits,
                    ser=sym_err[i] / denom_syms,
                )
            )
    return points


def _config_echo(cfg: SimConfig) -> dict:
    return {
        "schema_version": RESULT_SCHEMA_VERSION,
        "snr_grid_db": list(cfg.snr_grid_db),
        "snr_convention": cfg.snr_convention,
        "max_frames": cfg.max_frames,
        "min_bit_errors": cfg.min_bit_errors,
        "seed": cfg.seed,
        "channel": {"kind": cfg.channel.kind, "kappa": cfg.channel.kappa},
        "detector": cfg.detector,
        "mpa_iterations": cfg.mpa_iterations,
        # worker count is scheduling, not semantics; results must serialize
        # identically for any value, so it is deliberately not echoed
        "noiseless": cfg.noiseless,
    }


def run_ber(cfg: SimConfig, cb) -> BerResult:
    """Sweep the SNR grid for one codebook and return counted results."""
    ctx = _CodebookContext(cb)
    points = _sweep([ctx], cfg)[0]
    return BerResult(
        convention=cfg.snr_convention,
        points=tuple(points),
        codebook=codebook_hash(cb),
        config=_config_echo(cfg),
    )


def compare(cfg: SimConfig, cbs: Sequence) -> tuple[BerResult, ...]:
    """Shared-draw sweep across several codebooks on one grid and seed."""
    if not cbs:
        raise ValueError("need at least one codebook")
    ctxs = [_CodebookContext(cb) for cb in cbs]
    shapes = {(c.graph.K, c.graph.J, c.graph.M) for c in ctxs}
    if len(shapes) != 1:
        raise ValueError("codebooks must share K, J, and M")
    all_points = _sweep(ctxs, cfg)
    return tuple(
        BerResult(
            convention=cfg.snr_convention,
            points=tuple(pts),
            codebook=codebook_hash(ctx.cb),
            config=_config_echo(cfg),
        )
        for ctx, pts in zip(ctxs, all_points)
    )


def result_to_rows(result: BerResult) -> list[dict]:
    rows = []
    for p in result.points:
        rows.append(
            {
                "snr_db": p.snr_db,
                "convention": result.convention,
                "frames": p.frames,
                "bit_errors": p.bit_errors,
                "symbol_errors": p.symbol_errors,
                "ber": p.ber,
                "ser": p.ser,
            }
        )
    return rows


def result_to_csv(result: BerResult) -> str:
    """One curve as CSV text with the documented column set."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in result_to_rows(result):
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def result_to_dict(result: BerResult) -> dict:
    return {
        "schema_version": RESULT_SCHEMA_VERSION,
        "codebook": result.codebook,
        "config": result.config,
        "points": result_to_rows(result),
    }
