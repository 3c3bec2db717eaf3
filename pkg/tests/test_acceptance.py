"""Acceptance gate: one test per release criterion, each printing a
[PASS]/[FAIL] line through the terminal-summary hook in conftest.

The structured-search codebooks are built once per session with the default
budgets and the documented seed below, then shared across criteria.
"""

import math

import numpy as np
import pytest

from nlscma.channel import ChannelModel, apply, ebn0_to_n0
from nlscma.codebook import (
    build_linear,
    default_graph,
    encode_linear,
    encode_symbols,
    linear_as_nonlinear,
    save_codebook,
    superimposed_table,
)
from nlscma.design import DesignConfig, algorithm1, algorithm2
from nlscma.detector import map_symbols, mpa_symbols
from nlscma.lattice import make_overlapped_constellation, med, shape_gain
from nlscma.metrics import (
    closed_form_suep_mpd,
    kpi_report,
    layer_meds,
    med_superimposed,
    suep_muep_decomposition,
)
from nlscma.simulator import SimConfig, clopper_pearson, run_ber

from conftest import ACCEPTANCE_RESULTS, make_nonlinear

# The documented seed for the reference builds.  Both structured-search
# codebooks in this file are produced with the default budgets and this seed.
DESIGN_SEED = 0

GRAPH = default_graph()


def record(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((name, ok, detail))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def gauss_rect():
    return make_overlapped_constellation("gaussian", "rectangular")


@pytest.fixture(scope="module")
def eis_circ():
    return make_overlapped_constellation("eisenstein", "circular")


@pytest.fixture(scope="module")
def nlcb4(gauss_rect):
    return algorithm2(gauss_rect, GRAPH, DesignConfig(seed=DESIGN_SEED))


@pytest.fixture(scope="module")
def nlcb1(eis_circ):
    return algorithm2(eis_circ, GRAPH, DesignConfig(seed=DESIGN_SEED))


def test_criterion_1_per_rn_med(gauss_rect, eis_circ):
    expected = {
        ("eisenstein", "circular"): 0.413,
        ("eisenstein", "rectangular"): 0.410,
        ("gaussian", "circular"): 0.383,
        ("gaussian", "rectangular"): 0.378,
    }
    measured = {}
    codes = {}
    for (lat, win), want in expected.items():
        if (lat, win) == ("gaussian", "rectangular"):
            code = gauss_rect
        elif (lat, win) == ("eisenstein", "circular"):
            code = eis_circ
        else:
            code = make_overlapped_constellation(lat, win)
        codes[(lat, win)] = code
        measured[(lat, win)] = med(code)
    ok = all(abs(measured[k] - v) <= 0.005 for k, v in expected.items())
    analytic = math.sqrt(1.5 / 10.5)  # exact grid value at mean energy 1.5
    ok &= abs(measured[("gaussian", "rectangular")] - analytic) < 1e-9
    # shape-gain ordering: the round window beats the square one per family
    ok &= shape_gain(codes[("eisenstein", "circular")]) > shape_gain(
        codes[("eisenstein", "rectangular")]
    )
    ok &= shape_gain(codes[("gaussian", "circular")]) > shape_gain(
        codes[("gaussian", "rectangular")]
    )
    detail = ", ".join(f"{k[0][:3]}/{k[1][:4]}={v:.4f}" for k, v in measured.items())
    record("1 per-resource MED values", ok, detail)


def test_criterion_2_structured_kpis(nlcb4, nlcb1):
    r4 = kpi_report(nlcb4.codebook)
    r1 = kpi_report(nlcb1.codebook)
    ok = (
        abs(r4.med_phi - 1.07) <= 0.03
        and abs(r4.mpd - 0.58) <= 0.03
        and abs(r1.med_phi - 0.94) <= 0.03
        and abs(r1.mpd - 0.61) <= 0.03
    )
    detail = (
        f"square grid: MED={r4.med_phi:.4f} MPD={r4.mpd:.4f}; "
        f"hex: MED={r1.med_phi:.4f} MPD={r1.mpd:.4f} (seed {DESIGN_SEED})"
    )
    record("2 structured-search KPIs", ok, detail)


def test_criterion_3_decomposition_identity(nlcb4, nlcb1, gauss_rect):
    cases = {
        "structured square": nlcb4.codebook,
        "structured hex": nlcb1.codebook,
        "generalized": algorithm1(
            gauss_rect, GRAPH, DesignConfig(iterations=200, seed=1)
        ).codebook,
        "random-a": make_nonlinear(seed=3),
        "random-b": make_nonlinear(seed=4, identity_p=True),
        "linear": linear_as_nonlinear(build_linear(GRAPH)),
    }
    worst = 0.0
    for name, cb in cases.items():
        phi, _ = superimposed_table(cb)
        suep, muep = suep_muep_decomposition(phi, cb.graph)
        gap = abs(min(suep, muep) - med_superimposed(phi))
        worst = max(worst, gap)
    ok = worst <= 1e-9
    record(
        "3 SUEP/MUEP partition identity",
        ok,
        f"max |min(suep,muep) - med| = {worst:.2e} over {len(cases)} codebooks",
    )


def test_criterion_4_muep_bound(gauss_rect):
    medS2 = med(gauss_rect) ** 2
    n_builds = 0
    margin = math.inf
    for seed in range(50):
        res = algorithm1(gauss_rect, GRAPH, DesignConfig(iterations=60, seed=seed))
        phi, _ = superimposed_table(res.codebook)
        muep = suep_muep_decomposition(phi, GRAPH)[1]
        margin = min(margin, muep**2 - 3 * medS2)
        n_builds += 1
    for seed in range(50):
        res = algorithm2(gauss_rect, GRAPH, DesignConfig(iterations=40, seed=seed))
        phi, _ = superimposed_table(res.codebook)
        muep = suep_muep_decomposition(phi, GRAPH)[1]
        margin = min(margin, muep**2 - 3 * medS2)
        n_builds += 1
    ok = n_builds >= 100 and margin >= -1e-9
    record(
        "4 multi-user distance bound",
        ok,
        f"min(muep^2 - 3 MED(S)^2) = {margin:.4f} over {n_builds} builds",
    )


def test_criterion_5_layer_chain(nlcb4, nlcb1):
    worst_gap = 0.0
    chain_ok = True
    for res, S in ((nlcb4, "square"), (nlcb1, "hex")):
        cb = res.codebook
        d_h, d_m, d_l = layer_meds(cb.S, cb.labeling)
        medS = med(cb.lattice)
        tol = 1e-9
        chain_ok &= d_h >= d_m - tol and d_m >= d_l - tol and d_l >= medS - tol
        phi, _ = superimposed_table(cb)
        suep = suep_muep_decomposition(phi, cb.graph)[0]
        closed = closed_form_suep_mpd(d_h, d_m, d_l)[0]
        worst_gap = max(worst_gap, abs(closed - suep))
    ok = chain_ok and worst_gap <= 1e-9
    record(
        "5 layer-distance chain",
        ok,
        f"chain {'holds' if chain_ok else 'BROKEN'}, "
        f"max |closed - brute| = {worst_gap:.2e}",
    )


def test_criterion_6_detector_oracle(nlcb4):
    cb = nlcb4.codebook
    phi, digits = superimposed_table(cb)
    energy = float(np.mean(np.abs(phi) ** 2) * GRAPH.K)
    n0 = ebn0_to_n0(10.0, energy, GRAPH.J, GRAPH.M)
    rng = np.random.default_rng(2024)
    agree = 0
    total = 10_000
    for start in range(0, total, 1000):
        sym = rng.integers(0, GRAPH.M, size=(1000, GRAPH.J))
        w = encode_symbols(cb, sym)
        h = np.ones_like(w)
        y = apply(h, w, n0, rng)
        hard_map = map_symbols(y, h, cb, n0, phi=phi, digits=digits)
        hard_mpa = mpa_symbols(y, h, cb, n0, iterations=7)
        agree += int((hard_map == hard_mpa).all(axis=1).sum())
    frac = agree / total
    sym = rng.integers(0, GRAPH.M, size=(500, GRAPH.J))
    w = encode_symbols(cb, sym)
    h = np.ones_like(w)
    clean_map = map_symbols(w, h, cb, n0, phi=phi, digits=digits)
    clean_mpa = mpa_symbols(w, h, cb, n0, iterations=7)
    noiseless_exact = (clean_map == sym).all() and (clean_mpa == sym).all()
    ok = frac >= 0.999 and noiseless_exact
    record(
        "6 message-passing vs exact MAP",
        ok,
        f"agreement {frac:.2%} on {total} noisy frames, "
        f"noiseless exact: {noiseless_exact}",
    )


def test_criterion_7_mpa_convergence(nlcb4):
    cb = nlcb4.codebook
    grid = (6.0, 8.0, 10.0)
    curves = {}
    for iters in (4, 7):
        cfg = SimConfig(
            snr_grid_db=grid,
            detector="mpa",
            mpa_iterations=iters,
            max_frames=100_000,
            min_bit_errors=200,
            seed=77,
        )
        curves[iters] = run_ber(cfg, cb).points
    ok = True
    details = []
    for p4, p7 in zip(curves[4], curves[7]):
        bits4 = p4.frames * GRAPH.J * GRAPH.bits_per_symbol
        bits7 = p7.frames * GRAPH.J * GRAPH.bits_per_symbol
        lo4, hi4 = clopper_pearson(p4.bit_errors, bits4)
        lo7, hi7 = clopper_pearson(p7.bit_errors, bits7)
        half = (hi4 - lo4) / 2 + (hi7 - lo7) / 2
        gap = abs(p4.ber - p7.ber)
        ok &= gap < half and p4.bit_errors >= 200 and p7.bit_errors >= 200
        details.append(f"{p4.snr_db:g}dB |d|={gap:.2e}<{half:.2e}")
    record("7 iteration-count convergence", ok, "; ".join(details))


def test_criterion_8_linear_subsumption():
    base = np.array([-3, -1, 1, 3]) / math.sqrt(5)
    lin = build_linear(
        base, [np.arange(4), np.array([1, 0, 3, 2])], (0.15, 0.7, 1.3), GRAPH
    )
    as_nl = linear_as_nonlinear(lin)
    digits = superimposed_table(as_nl)[1]
    w_table = encode_symbols(as_nl, digits.astype(np.int64))
    w_direct = np.empty_like(w_table)
    for c in range(digits.shape[0]):
        sym = digits[c].astype(np.int64)
        B = np.stack([(sym >> 1) & 1, sym & 1])
        w_direct[c] = encode_linear(lin, B)
    same = np.array_equal(w_table, w_direct)
    record(
        "8 linear encoding subsumption",
        same,
        f"table route equals superposition route on all {digits.shape[0]} "
        f"inputs exactly: {same}",
    )


def test_criterion_9_statistical_sanity(nlcb4, tmp_path):
    from nlscma.cli import main

    cb = nlcb4.codebook
    cfg = SimConfig(
        snr_grid_db=(-40.0,),
        detector="map",
        max_frames=2000,
        min_bit_errors=10**9,
        seed=9,
    )
    deep = run_ber(cfg, cb).points[0]
    coin = abs(deep.ber - 0.5) <= 0.02

    clean = run_ber(
        SimConfig(
            snr_grid_db=(0.0,),
            detector="map",
            noiseless=True,
            max_frames=2000,
            min_bit_errors=1,
            seed=9,
        ),
        cb,
    ).points[0]
    silent = clean.ber == 0.0

    cb_path = tmp_path / "cb.json"
    save_codebook(cb, cb_path)
    args = [
        "simulate",
        "--codebook",
        str(cb_path),
        "--detector",
        "map",
        "--snr-start",
        "6",
        "--max-frames",
        "2000",
        "--min-errors",
        "50",
        "--seed",
        "4",
    ]
    outs = [tmp_path / f"r{i}.json" for i in range(3)]
    assert main(args + ["--out", str(outs[0])]) == 0
    assert main(args + ["--out", str(outs[1])]) == 0
    assert main(args + ["--workers", "4", "--out", str(outs[2])]) == 0
    blobs = [o.read_bytes() for o in outs]
    identical = blobs[0] == blobs[1] == blobs[2]

    ok = coin and silent and identical
    record(
        "9 statistical sanity",
        ok,
        f"deep-noise BER {deep.ber:.4f}, noiseless BER {clean.ber}, "
        f"rerun/worker files identical: {identical}",
    )
