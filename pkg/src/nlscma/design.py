"""Labeling searches that maximize the superimposed minimum distance.

Two searches are provided.  The generalized one draws bit reorderings and
labelings uniformly at random and keeps the best table it sees.  The
structured one fixes the bit reordering to identity, groups the constellation
by quadrant (the group index becomes the highest-significance label block),
and then searches each group for an inner labeling whose medium- and
least-block distances are large, finishing with a value-permutation pass that
aligns the groups against each other for the highest block.

Pure random bijections almost never produce large medium-block distances (a
spread partition of 16 points into 4 balanced cells is an exponentially rare
event under uniform sampling), so the structured search mixes random draws
with greedy max-min partition proposals; the acceptance gates themselves are
unchanged.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .codebook import LAYER_PRESETS, FactorGraph, NonlinearCodebook, superimposed_table
from .lattice import LatticeCode, med
from .metrics import closed_form_suep_mpd, layer_meds, med_superimposed

log = logging.getLogger(__name__)

_DEFAULT_ITERS = {"algorithm1": 20_000, "algorithm2": 5_000}
_CANDIDATES_PER_GROUP = 64
_MAX_ASSEMBLIES = 200


@dataclass(frozen=True)
class DesignConfig:
    """Knobs shared by both searches.

    iterations: trial budget (total for the generalized search, per group for
    the structured one); None selects the per-algorithm default.
    gamma_th: squared-distance acceptance floor for the medium block; None
    selects (2 * MED(S))**2 with automatic fallback to MED(S)**2.
    layer_rule: which layer preset to stamp on the output; None selects
    "mapping-29" for the generalized search and "mapping-37" for the
    structured one.
    """

    iterations: int | None = None
    gamma_th: float | None = None
    seed: int = 0
    layer_rule: str | None = None
    group_strategy: str = "quadrant"

    def __post_init__(self):
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.layer_rule is not None and self.layer_rule not in LAYER_PRESETS:
            raise ValueError(f"unknown layer rule: {self.layer_rule!r}")
        if self.group_strategy != "quadrant":
            raise ValueError(f"unknown group strategy: {self.group_strategy!r}")


@dataclass(frozen=True)
class DesignResult:
    codebook: NonlinearCodebook
    achieved_med: float
    flags: tuple[str, ...] = ()


def _graph_supports_fast_suep(graph: FactorGraph) -> bool:
    """True when each user's resources share no second user (girth > 4).

    Under that condition the two context minimizations of a single-user
    error are independent, making the per-axis table bound exact.
    """
    for j in range(graph.J):
        for k1, k2 in itertools.combinations(graph.zeta[j], 2):
            if len(set(graph.xi[k1]) & set(graph.xi[k2])) > 1:
                return False
    return True


def _min_pair_resource_union(graph: FactorGraph) -> int:
    best = graph.K
    for a in range(graph.J):
        for b in range(a + 1, graph.J):
            best = min(best, len(set(graph.zeta[a]) | set(graph.zeta[b])))
    return best


def _axis_distance_tables(T: np.ndarray) -> list[np.ndarray]:
    """Per-axis context-minimized squared distances of a local table.

    Entry [m, m2] of table a is the smallest squared distance between two
    table values that differ only in axis a, with values m and m2 there.
    """
    d_f = T.ndim
    M = T.shape[0]
    out = []
    for axis in range(d_f):
        moved = np.moveaxis(T, axis, 0).reshape(M, -1)
        d2 = np.abs(moved[:, None, :] - moved[None, :, :]) ** 2
        out.append(d2.min(axis=2))
    return out


def _suep_squared_exact(T: np.ndarray, layers: np.ndarray, graph: FactorGraph) -> float:
    """Exact single-user squared minimum from per-axis tables (fast path)."""
    tables = _axis_distance_tables(T)
    M = graph.M
    off = ~np.eye(M, dtype=bool)
    best = math.inf
    seen = set()
    for j in range(graph.J):
        axes = tuple(sorted(int(layers[k, j]) - 1 for k in graph.zeta[j]))
        if axes in seen:
            continue
        seen.add(axes)
        combined = sum(tables[a] for a in axes)
        best = min(best, float(combined[off].min()))
    return best


# ---------------------------------------------------------------------------
# Generalized random search
# ---------------------------------------------------------------------------

_BITS64 = ((np.arange(64)[:, None] >> np.arange(5, -1, -1)) & 1).astype(np.int64)


def algorithm1(S: LatticeCode, graph: FactorGraph, cfg: DesignConfig) -> DesignResult:
    """Best-of-I_t search over random bit reorderings and labelings.

    Every candidate uses a bijective labeling, so its per-resource table is
    injective and the codebook cannot be degenerate; candidates are compared
    by their exact table MED.  A per-axis distance bound prunes candidates
    that cannot beat the running best, which leaves the selected codebook
    identical to a full rescoring of every trial.
    """
    if S.size != graph.M**graph.d_f:
        raise ValueError("constellation size must be M**d_f")
    iters = cfg.iterations or _DEFAULT_ITERS["algorithm1"]
    layer_rule = cfg.layer_rule or "mapping-29"
    layers = LAYER_PRESETS[layer_rule]
    rng = np.random.default_rng(cfg.seed)
    L = graph.label_bits
    medS2 = med(S) ** 2
    fast_ok = _graph_supports_fast_suep(graph)
    muep_floor = _min_pair_resource_union(graph) * medS2

    trials_P = np.empty((iters, L), dtype=np.int64)
    trials_lab = np.empty((iters, S.size), dtype=np.int64)
    for t in range(iters):
        trials_P[t] = rng.permutation(L)
        trials_lab[t] = rng.permutation(S.size)

    def build(t: int) -> NonlinearCodebook:
        return NonlinearCodebook(
            graph=graph,
            S=S.points,
            labeling=trials_lab[t],
            layers=layers,
            P=trials_P[t],
            lattice=S,
        )

    # Vectorized per-trial tables and their exact single-user minima.
    suep2 = np.empty(iters)
    chunk = 512
    pair_axes = sorted(
        {
            tuple(sorted(int(layers[k, j]) - 1 for k in graph.zeta[j]))
            for j in range(graph.J)
        }
    )
    off = ~np.eye(graph.M, dtype=bool)
    for t0 in range(0, iters, chunk):
        t1 = min(t0 + chunk, iters)
        weights = 1 << (L - 1 - trials_P[t0:t1])  # (B, L)
        idx = _BITS64 @ weights.T  # (64, B)
        T = S.points[np.take_along_axis(trials_lab[t0:t1].T, idx, axis=0)].T
        T = T.reshape(t1 - t0, 4, 4, 4)
        d2_axis = []
        for axis in range(3):
            moved = np.moveaxis(T, axis + 1, 1).reshape(t1 - t0, 4, 16)
            d2 = np.abs(moved[:, :, None, :] - moved[:, None, :, :]) ** 2
            d2_axis.append(d2.min(axis=3))
        best = np.full(t1 - t0, np.inf)
        for a, b in pair_axes:
            combined = d2_axis[a] + d2_axis[b]
            best = np.minimum(best, combined[:, off].min(axis=1))
        suep2[t0:t1] = best

    best_med2 = -1.0
    best_t = 0
    for t in range(iters):
        s2 = float(suep2[t])
        if not fast_ok:
            cb = build(t)
            phi, _ = superimposed_table(cb)
            med2 = med_superimposed(phi) ** 2
        elif s2 <= best_med2:
            continue  # med <= suep can never beat the running best
        elif s2 <= muep_floor * (1 + 1e-12):
            med2 = s2  # multi-user distance cannot bind below the floor
        else:
            cb = build(t)
            phi, _ = superimposed_table(cb)
            med2 = med_superimposed(phi) ** 2
        if med2 > best_med2:
            best_med2 = med2
            best_t = t

    winner = build(best_t)
    phi, _ = superimposed_table(winner)
    achieved = med_superimposed(phi)
    return DesignResult(codebook=winner, achieved_med=achieved, flags=())


# ---------------------------------------------------------------------------
# Quadrant grouping
# ---------------------------------------------------------------------------


def group_by_quadrant(S: LatticeCode | np.ndarray) -> list[np.ndarray]:
    """Split the constellation into four balanced angular groups.

    Points strictly inside a quadrant stay there; points on an axis join the
    counter-clockwise side.  If the raw split is unbalanced, surplus groups
    shed their largest-magnitude points to an adjacent group with the
    smaller count until every group holds a quarter of the points.
    """
    pts = S.points if isinstance(S, LatticeCode) else np.asarray(S)
    n = pts.size
    if n % 4 != 0:
        raise ValueError("quadrant grouping failed")
    target = n // 4
    angles = np.mod(np.angle(pts), 2 * math.pi)
    quadrant = np.minimum((angles // (math.pi / 2)).astype(int), 3)
    groups: list[list[int]] = [list(np.flatnonzero(quadrant == q)) for q in range(4)]

    for _ in range(4 * n):
        sizes = [len(g) for g in groups]
        if all(s == target for s in sizes):
            break
        g = int(np.argmax(sizes))
        left, right = (g + 1) % 4, (g - 1) % 4
        dest = left if sizes[left] <= sizes[right] else right
        # move the largest-magnitude point angularly closest to the dest side
        border = (g + 1) * math.pi / 2 if dest == left else g * math.pi / 2
        cand = max(
            groups[g],
            key=lambda i: (round(abs(pts[i]), 9), -abs(angles[i] - border)),
        )
        groups[g].remove(cand)
        groups[dest].append(cand)
    else:
        raise ValueError("quadrant grouping failed")
    return [np.array(sorted(g), dtype=np.int64) for g in groups]


# ---------------------------------------------------------------------------
# Structured per-group search
# ---------------------------------------------------------------------------


def _coset_classes(
    local: list[complex], basis: tuple[complex, complex] | None
) -> list[list[int]] | None:
    """Partition by parity of lattice coordinates relative to one anchor.

    Cosets of the doubled sublattice have intra-class distances of at least
    twice the lattice minimum, so a balanced coset split is a guaranteed
    spread partition.  Returns None when no basis is known, the points do
    not sit on translated lattice coordinates, or the split is unbalanced.
    """
    if basis is None:
        return None
    b1, b2 = basis
    mat = np.array([[b1.real, b2.real], [b1.imag, b2.imag]])
    if abs(np.linalg.det(mat)) < 1e-12:
        return None
    inv = np.linalg.inv(mat)
    anchor = local[0]
    buckets: dict[tuple[int, int], list[int]] = {}
    for i, p in enumerate(local):
        v = p - anchor
        a, c = inv @ np.array([v.real, v.imag])
        ra, rc = round(a), round(c)
        if abs(a - ra) > 1e-6 or abs(c - rc) > 1e-6:
            return None
        buckets.setdefault((ra % 2, rc % 2), []).append(i)
    if len(buckets) != 4 or any(len(cl) != 4 for cl in buckets.values()):
        return None
    return sorted((sorted(cl) for cl in buckets.values()))


def _spread_partition(d2: list[list[float]], order: list[int]) -> list[list[int]]:
    """Greedy max-min balanced partition into 4 classes of 4."""
    classes: list[list[int]] = [[], [], [], []]
    for p in order:
        best_c = -1
        best_score = -1.0
        for ci, members in enumerate(classes):
            if len(members) >= 4:
                continue
            score = min((d2[p][q] for q in members), default=math.inf)
            if score > best_score:
                best_score = score
                best_c = ci
        classes[best_c].append(p)
    return classes


def _transversal_cells(
    d2: list[list[float]], classes: list[list[int]], seed_order: list[int]
) -> list[list[int]]:
    """Greedy orthogonal partition: each cell takes one point per class."""
    cells = [[p] for p in seed_order]
    for cls in classes[1:]:
        best_perm = None
        best_score = -1.0
        for perm in itertools.permutations(cls):
            score = math.inf
            for i, p in enumerate(perm):
                for q in cells[i]:
                    v = d2[p][q]
                    if v < score:
                        score = v
                if score <= best_score:
                    break
            if score > best_score:
                best_score = score
                best_perm = perm
        for i, p in enumerate(best_perm):
            cells[i].append(p)
    return cells


def _grid_scores(
    grid: np.ndarray, d2: list[list[float]]
) -> tuple[float, float]:
    """(medium, least) squared block distances of one group grid.

    grid[m, l] holds the point index labeled (m, l); the medium distance
    pairs share l, the least distance pairs share m.
    """
    d_m = math.inf
    d_l = math.inf
    for l in range(4):
        col = grid[:, l]
        for a in range(4):
            for b in range(a + 1, 4):
                v = d2[col[a]][col[b]]
                if v < d_m:
                    d_m = v
    for m in range(4):
        row = grid[m, :]
        for a in range(4):
            for b in range(a + 1, 4):
                v = d2[row[a]][row[b]]
                if v < d_l:
                    d_l = v
    return d_m, d_l


def _group_candidates(
    pts: np.ndarray,
    group: np.ndarray,
    iters: int,
    rng: np.random.Generator,
    basis: tuple[complex, complex] | None = None,
) -> list[tuple[float, float, tuple[int, ...], np.ndarray]]:
    """Search one group; return deduplicated candidates sorted best-first.

    Candidates are (medium_d2, least_d2, tie_key, grid) with the grid in
    global point indices.  Half the trials draw uniform random bijections;
    the rest alternate between coset spread partitions (when the points sit
    on a known lattice) and greedy max-min partitions, each refined into
    orthogonal transversal cells.

    Group points are re-ordered by their centroid-relative coordinates and
    the tie key uses those local positions, so two groups that are
    translates of each other walk through congruent proposals and rank them
    identically.
    """
    centered = pts[group] - pts[group].mean()
    order_key = np.lexsort((np.round(centered.imag, 9), np.round(centered.real, 9)))
    group = group[order_key]
    local = [complex(pts[i]) for i in group]
    n = len(local)
    d2 = [[abs(a - b) ** 2 for b in local] for a in local]
    cosets = _coset_classes(local, basis)
    seen: set[tuple[int, ...]] = set()
    cands: list[tuple[float, float, tuple[int, ...], np.ndarray]] = []

    for t in range(iters):
        if t % 2 == 0:
            perm = rng.permutation(n)
            grid_local = np.asarray(perm, dtype=np.int64).reshape(4, 4)
        else:
            if cosets is not None and (t // 2) % 2 == 0:
                classes = cosets
            else:
                classes = _spread_partition(d2, list(rng.permutation(n)))
            seed_order = list(classes[0])
            rng.shuffle(seed_order)
            cells = _transversal_cells(d2, classes, seed_order)
            where = {}
            for ci, cls in enumerate(classes):
                for p in cls:
                    where[p] = ci
            grid_local = np.empty((4, 4), dtype=np.int64)
            for m, cell in enumerate(cells):
                for p in cell:
                    grid_local[m, where[p]] = p
        key = tuple(int(i) for i in grid_local.ravel())
        if key in seen:
            continue
        seen.add(key)
        d_m, d_l = _grid_scores(grid_local, d2)
        cands.append((d_m, d_l, key, group[grid_local]))

    cands.sort(key=lambda c: (-c[0], -c[1], c[2]))
    return cands


def _polish_values(
    grids: list[np.ndarray], pts: np.ndarray
) -> tuple[list[np.ndarray], float]:
    """Align group value permutations to maximize the highest-block distance.

    Group 0 keeps its grid; later groups try all 576 (row, column) value
    permutations and keep the one maximizing the minimum same-(m, l) distance
    to the groups already placed.  Returns the aligned grids and the overall
    highest-block squared distance.
    """
    perms = list(itertools.permutations(range(4)))
    placed = [grids[0]]
    for grid in grids[1:]:
        vals = pts[grid]
        prev = np.stack([pts[g] for g in placed])  # (n_prev, 4, 4)
        best = None
        best_score = -1.0
        for pm in perms:
            rows = vals[pm, :]
            for pl in perms:
                cand = rows[:, pl]
                score = float((np.abs(cand[None] - prev) ** 2).min())
                if score > best_score:
                    best_score = score
                    best = grid[np.asarray(pm)][:, np.asarray(pl)]
        placed.append(best)
    stack = np.stack([pts[g] for g in placed])
    d_h = math.inf
    for a in range(4):
        for b in range(a + 1, 4):
            d_h = min(d_h, float((np.abs(stack[a] - stack[b]) ** 2).min()))
    return placed, d_h


def _assemble(
    graph: FactorGraph,
    S: LatticeCode,
    grids: list[np.ndarray],
    layers: np.ndarray,
) -> NonlinearCodebook:
    labeling = np.empty(64, dtype=np.int64)
    for h, grid in enumerate(grids):
        for m in range(4):
            for l in range(4):
                labeling[(h << 4) | (m << 2) | l] = grid[m, l]
    return NonlinearCodebook(
        graph=graph,
        S=S.points,
        labeling=labeling,
        layers=layers,
        P=np.arange(graph.label_bits),
        lattice=S,
    )


def algorithm2(S: LatticeCode, graph: FactorGraph, cfg: DesignConfig) -> DesignResult:
    """Quadrant-grouped labeling search with identity bit reordering.

    Per group, trials propose (medium, least) block labelings; candidates
    must reach the medium-block floor gamma_th.  Groups are then aligned by
    value permutations, and a combination is accepted once the block
    distances form the chain highest >= medium >= least >= MED(S) and the
    closed-form single-user distance matches the exact one.  If no
    combination passes, the best-scoring one is returned with a flag.
    """
    if graph.M != 4 or graph.d_f != 3:
        raise ValueError("structured search needs M = 4 and d_f = 3")
    if S.size != graph.M**graph.d_f:
        raise ValueError("constellation size must be M**d_f")
    iters = cfg.iterations or _DEFAULT_ITERS["algorithm2"]
    layers = LAYER_PRESETS[cfg.layer_rule or "mapping-37"]
    pts = S.points
    medS2 = med(S) ** 2

    if cfg.gamma_th is not None and cfg.gamma_th < medS2 * (1 - 1e-12):
        raise ValueError("gamma_th must be at least MED(S) squared")
    gamma = cfg.gamma_th if cfg.gamma_th is not None else (2.0 * math.sqrt(medS2)) ** 2

    groups = group_by_quadrant(S)
    basis = (S.basis[0] * S.scale, S.basis[1] * S.scale)
    # Each group restarts the same stream: groups that are translates of one
    # another then produce congruent candidate lists, which lets the value
    # polish align them at the full inter-group spacing.
    all_cands = [
        _group_candidates(pts, group, iters, np.random.default_rng(cfg.seed), basis)
        for group in groups
    ]

    flags: list[str] = []
    gated = [[c for c in cands if c[0] >= gamma * (1 - 1e-12)] for cands in all_cands]
    if cfg.gamma_th is None and any(not g for g in gated):
        log.warning(
            "medium-block floor %.4g unmet in some group; falling back to MED(S)^2",
            gamma,
        )
        gamma = medS2
        gated = [[c for c in cands if c[0] >= gamma * (1 - 1e-12)] for cands in all_cands]
    if any(not g for g in gated):
        flags.append("threshold unmet")
        gated = [g if g else cands[:1] for g, cands in zip(gated, all_cands)]
    gated = [g[:_CANDIDATES_PER_GROUP] for g in gated]

    def combos():
        ranks = [len(g) for g in gated]
        total = sum(ranks) - 4
        count = 0
        for budget in range(0, total + 1):
            for r0 in range(min(ranks[0] - 1, budget) + 1):
                for r1 in range(min(ranks[1] - 1, budget - r0) + 1):
                    for r2 in range(min(ranks[2] - 1, budget - r0 - r1) + 1):
                        r3 = budget - r0 - r1 - r2
                        if r3 < ranks[3]:
                            count += 1
                            yield (r0, r1, r2, r3)
                            if count >= _MAX_ASSEMBLIES:
                                return

    fallback = None
    chosen = None
    for combo in combos():
        picks = [gated[g][r] for g, r in enumerate(combo)]
        grids = [p[3] for p in picks]
        aligned, d_h2 = _polish_values(grids, pts)
        d_m2 = min(p[0] for p in picks)
        d_l2 = min(p[1] for p in picks)
        if fallback is None:
            fallback = (aligned, d_h2, d_m2, d_l2)
        tol = 1e-12 * max(d_m2, 1.0)
        chain_ok = d_h2 >= d_m2 - tol and d_m2 >= d_l2 - tol and d_l2 >= medS2 - tol
        if not chain_ok:
            continue
        cb = _assemble(graph, S, aligned, layers)
        exact2 = _suep_squared_exact(
            pts[cb.labeling].reshape(4, 4, 4), layers, graph
        )
        closed = closed_form_suep_mpd(
            math.sqrt(d_h2), math.sqrt(d_m2), math.sqrt(d_l2)
        )[0]
        if abs(closed - math.sqrt(exact2)) > 1e-9:
            continue
        chosen = cb
        break

    if chosen is None:
        if "threshold unmet" not in flags:
            flags.append("threshold unmet")
        chosen = _assemble(graph, S, fallback[0], layers)

    phi, _ = superimposed_table(chosen)
    achieved = med_superimposed(phi)
    return DesignResult(codebook=chosen, achieved_med=achieved, flags=tuple(flags))
