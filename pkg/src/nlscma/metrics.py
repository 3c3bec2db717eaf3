"""Distance figures of merit for constellations and superimposed tables.

All pair scans accumulate squared Euclidean distance internally and report
the square root, so the numbers here are directly comparable to constellation
coordinates.  Scans are exhaustive (with cheap masking, never sampling), and
the single-user/multi-user split is computed by an independent pass so the
partition identity min(suep, muep) = med can be checked rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import (
    LinearCodebook,
    NonlinearCodebook,
    TableEncoder,
    column_symbols,
    resource_tables,
    superimposed_table,
)
from .lattice import LatticeCode, med, shape_gain

_CHUNK = 256
_COLLISION_REL_TOL = 1e-9


def _columns(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=complex)
    if phi.ndim != 2:
        raise ValueError("superimposed table must be a K x n matrix")
    return np.ascontiguousarray(phi.T)


def _snap_zero(d2_min: float, scale: float) -> float:
    if d2_min <= (_COLLISION_REL_TOL * scale) ** 2:
        return 0.0
    return float(np.sqrt(d2_min))


def med_superimposed(phi: np.ndarray) -> float:
    """Minimum distance over all distinct column pairs of the table."""
    cols = _columns(phi)
    n, K = cols.shape
    if n < 2:
        raise ValueError("degenerate table")
    scale = float(np.abs(cols).max())
    if np.abs(cols - cols[0]).max() <= _COLLISION_REL_TOL * max(scale, 1e-30):
        raise ValueError("degenerate table")
    best = np.inf
    for i0 in range(0, n, _CHUNK):
        i1 = min(i0 + _CHUNK, n)
        d2 = np.zeros((i1 - i0, n - i0))
        for k in range(K):
            d2 += np.abs(cols[i0:i1, k, None] - cols[None, i0:, k]) ** 2
        ii = np.arange(i1 - i0)[:, None]
        jj = np.arange(n - i0)[None, :]
        d2[jj <= ii] = np.inf
        best = min(best, float(d2.min()))
    return _snap_zero(best, scale)


def med_per_rn(obj, k: int) -> float:
    """Minimum distance among the values one resource can transmit.

    Returns 0 when two different local hypotheses land on the same point
    (the diversity-loss signal), never raises for collisions.  Codebook
    objects expose their local hypothesis values with multiplicity, so
    collisions are visible; a raw table row is deduplicated first (the
    hypothesis structure is not recoverable from the row alone).
    """
    values = _resource_values(obj, k)
    d = np.abs(values[:, None] - values[None, :])
    np.fill_diagonal(d, np.inf)
    scale = max(float(np.abs(values).max()), 1e-30)
    dmin = float(d.min())
    if dmin <= _COLLISION_REL_TOL * scale:
        return 0.0
    return dmin


def _resource_values(obj, k: int) -> np.ndarray:
    if isinstance(obj, np.ndarray):
        return np.unique(obj[k])
    if isinstance(obj, NonlinearCodebook):
        return obj.S
    if isinstance(obj, (TableEncoder, LinearCodebook)):
        tables, _ = resource_tables(obj)
        return tables[k].ravel()
    raise TypeError(f"cannot read resource values from {type(obj).__name__}")


def per_rn_meds(cb) -> np.ndarray:
    K = cb.graph.K if not isinstance(cb, np.ndarray) else cb.shape[0]
    return np.array([med_per_rn(cb, k) for k in range(K)])


def suep_muep_decomposition(phi: np.ndarray, graph) -> tuple[float, float]:
    """Split the table MED by how many users the two inputs differ in.

    Pairs differing in exactly one user's symbol form the single-user class;
    pairs differing in two or more form the multi-user class.  The classes
    partition all pairs, so min(single, multi) must reproduce the plain MED.
    """
    cols = _columns(phi)
    n, K = cols.shape
    digits = column_symbols(graph)
    if digits.shape[0] != n:
        raise ValueError("table size does not match the graph")
    scale = max(float(np.abs(cols).max()), 1e-30)
    best_single = np.inf
    best_multi = np.inf
    for i0 in range(0, n, _CHUNK):
        i1 = min(i0 + _CHUNK, n)
        d2 = np.zeros((i1 - i0, n - i0))
        for k in range(K):
            d2 += np.abs(cols[i0:i1, k, None] - cols[None, i0:, k]) ** 2
        ndiff = (digits[i0:i1, None, :] != digits[None, i0:, :]).sum(axis=2)
        local = np.arange(i1 - i0)[:, None] + i0
        other = np.arange(i0, n)[None, :]
        valid = local < other
        single = valid & (ndiff == 1)
        multi = valid & (ndiff >= 2)
        if single.any():
            best_single = min(best_single, float(d2[single].min()))
        if multi.any():
            best_multi = min(best_multi, float(d2[multi].min()))
    suep = _snap_zero(best_single, scale) if np.isfinite(best_single) else np.inf
    muep = _snap_zero(best_multi, scale) if np.isfinite(best_multi) else np.inf
    return suep, muep


def layer_meds(S: np.ndarray | LatticeCode, labeling: np.ndarray) -> tuple[float, float, float]:
    """Per-significance-class label distances (highest, medium, least).

    The class X distance is the minimum distance between points whose labels
    differ only inside bit block X of the label word.
    """
    pts = S.points if isinstance(S, LatticeCode) else np.asarray(S)
    labeling = np.asarray(labeling)
    n = labeling.size
    L = int(np.log2(n))
    if 2**L != n or L % 3 != 0:
        raise ValueError("layered metrics require d_f = 3")
    width = L // 3
    labels = np.arange(n)
    mapped = pts[labeling]
    d2 = np.abs(mapped[:, None] - mapped[None, :]) ** 2
    xor = labels[:, None] ^ labels[None, :]
    out = []
    for layer in range(3):
        shift = L - (layer + 1) * width
        block_mask = ((1 << width) - 1) << shift
        inside = (xor & ~block_mask) == 0
        differs = (xor & block_mask) != 0
        sel = inside & differs
        out.append(float(np.sqrt(d2[sel].min())))
    return tuple(out)


def closed_form_suep_mpd(d_h: float, d_m: float, d_l: float) -> tuple[float, float]:
    """Single-user error distance and product distance from class distances.

    Valid for the fairness layer preset (users hold {highest, least} or
    {medium, medium}), where a single wrong user perturbs either one highest
    and one least block, or two medium blocks.  Both values are reported in
    root (distance) units: the product form returns sqrt of the minimum
    product of squared class distances.
    """
    suep2 = min(d_h**2 + d_l**2, 2.0 * d_m**2)
    mpd2 = min(d_h**2 * d_l**2, d_m**4)
    return float(np.sqrt(suep2)), float(np.sqrt(mpd2))


def muep_lower_bound(S, graph) -> float:
    """Floor on the multi-user error distance from the resource constellation.

    Two inputs differing in at least two users touch at least N + 1
    resources, and every touched resource contributes at least the
    constellation MED, so the multi-user distance is at least
    sqrt(N + 1) times MED(S).  Vacuous (zero) for colliding constellations.
    """
    base = med(S) if not isinstance(S, (int, float)) else float(S)
    return float(np.sqrt(graph.N + 1) * base)


def mpd_general(A: np.ndarray) -> float:
    """Minimum product of squared per-dimension differences (squared units).

    Dimensions where a pair coincides are excluded from its product; pairs
    identical in every dimension are skipped entirely (0 if all pairs are).
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim == 1:
        A = A[None, :]
    N, M = A.shape
    if M < 2:
        raise ValueError("need at least two codewords")
    d2 = np.abs(A[:, :, None] - A[:, None, :]) ** 2
    prod = np.where(d2 > 0, d2, 1.0).prod(axis=0)
    any_diff = (d2 > 0).any(axis=0)
    iu = np.triu_indices(M, k=1)
    valid = any_diff[iu]
    if not valid.any():
        return 0.0
    return float(prod[iu][valid].min())


def mpd_superimposed(phi: np.ndarray) -> float:
    """Exhaustive product-distance scan over all table column pairs."""
    cols = _columns(phi)
    n, K = cols.shape
    best = np.inf
    for i0 in range(0, n, _CHUNK):
        i1 = min(i0 + _CHUNK, n)
        prod = np.ones((i1 - i0, n - i0))
        any_diff = np.zeros((i1 - i0, n - i0), dtype=bool)
        for k in range(K):
            d2 = np.abs(cols[i0:i1, k, None] - cols[None, i0:, k]) ** 2
            nz = d2 > 0
            prod = np.where(nz, prod * d2, prod)
            any_diff |= nz
        local = np.arange(i1 - i0)[:, None] + i0
        other = np.arange(i0, n)[None, :]
        sel = (local < other) & any_diff
        if sel.any():
            best = min(best, float(prod[sel].min()))
    return best if np.isfinite(best) else 0.0


@dataclass(frozen=True)
class KpiReport:
    """Everything the analyzer prints for one codebook."""

    med_phi: float
    med_per_rn: tuple[float, ...]
    mpd: float
    med_suep: float
    med_muep: float
    layer_meds: tuple[float, float, float] | None
    full_diversity: bool
    shape_gain: float | None

    def to_dict(self) -> dict:
        return {
            "med_phi": self.med_phi,
            "med_per_rn": list(self.med_per_rn),
            "mpd": self.mpd,
            "med_suep": self.med_suep,
            "med_muep": self.med_muep,
            "layer_meds": list(self.layer_meds) if self.layer_meds else None,
            "full_diversity": self.full_diversity,
            "shape_gain": self.shape_gain,
        }


def kpi_report(cb) -> KpiReport:
    """Compute the full KPI set for any codebook object.

    The product distance is the per-user closed form when the codebook has
    an identity bit reordering and a layered labeling (the structured case);
    otherwise it falls back to the exhaustive product scan over the table.
    """
    phi, _ = superimposed_table(cb)
    per_rn = tuple(med_per_rn(cb, k) for k in range(phi.shape[0]))
    full_div = all(v > 0 for v in per_rn)
    try:
        phi_med = med_superimposed(phi)
    except ValueError:
        phi_med = 0.0
    suep, muep = suep_muep_decomposition(phi, cb.graph)

    layers = None
    mpd = None
    if isinstance(cb, NonlinearCodebook) and cb.graph.d_f == 3:
        layers = layer_meds(cb.S, cb.labeling)
        identity_p = bool((cb.P == np.arange(cb.P.size)).all())
        if identity_p:
            mpd = closed_form_suep_mpd(*layers)[1]
    if mpd is None:
        mpd = float(np.sqrt(mpd_superimposed(phi)))

    gain = None
    if isinstance(cb, NonlinearCodebook) and cb.lattice is not None:
        gain = shape_gain(cb.lattice)
    return KpiReport(
        med_phi=phi_med,
        med_per_rn=per_rn,
        mpd=mpd,
        med_suep=suep,
        med_muep=muep,
        layer_meds=layers,
        full_diversity=full_div,
        shape_gain=gain,
    )
