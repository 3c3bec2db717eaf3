"""Factor graphs, codebooks, and the bit-to-codeword encoders.

Two codebook families live here.  A linear codebook gives every user a small
per-resource constellation and superimposes their codewords by addition.  A
nonlinear codebook drops the per-user factorization: each resource carries a
single overlapped constellation, and the bits of the users sharing a resource
jointly address one of its points through a bit reordering and a labeling.
Linear codebooks embed into the nonlinear picture exactly (every sum table is
a special case of a lookup table), and `linear_as_nonlinear` materializes that
embedding.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import LatticeCode, Window

# The 4-resource, 6-user indicator matrix used throughout: every user sits on
# 2 resources, every resource carries 3 users, and no two users share more
# than one resource.
DEFAULT_F = np.array(
    [
        [0, 1, 1, 0, 1, 0],
        [1, 0, 1, 0, 0, 1],
        [0, 1, 0, 1, 0, 1],
        [1, 0, 0, 1, 1, 0],
    ],
    dtype=np.int8,
)

# Named layer-assignment presets for the default graph.  Entry (k, j) gives
# the significance class of user j's bits at resource k: 0 none, 1 highest,
# 2 medium, 3 least.
#   mapping-29: every user gets two distinct classes out of {H, M, L}.
#   mapping-37: every user gets either {highest, least} or {medium, medium},
#     which balances the worst-case single-user error distance across users.
LAYER_PRESETS: dict[str, np.ndarray] = {
    "mapping-29": np.array(
        [
            [0, 3, 1, 0, 2, 0],
            [2, 0, 3, 0, 0, 1],
            [0, 2, 0, 1, 0, 3],
            [1, 0, 0, 2, 3, 0],
        ],
        dtype=np.int8,
    ),
    "mapping-37": np.array(
        [
            [0, 1, 2, 0, 3, 0],
            [1, 0, 2, 0, 0, 3],
            [0, 3, 0, 2, 0, 1],
            [3, 0, 0, 2, 1, 0],
        ],
        dtype=np.int8,
    ),
}

# Which of the d_f rotation angles each edge of the default graph uses when
# building the linear baseline (0 marks absent edges).
DEFAULT_PHASE_PATTERN = np.array(
    [
        [0, 3, 1, 0, 2, 0],
        [2, 0, 3, 0, 0, 1],
        [0, 2, 0, 1, 0, 3],
        [1, 0, 0, 2, 3, 0],
    ],
    dtype=np.int8,
)


@dataclass(frozen=True)
class FactorGraph:
    """Indicator matrix F plus everything derived from it."""

    F: np.ndarray
    K: int
    J: int
    N: int
    d_f: int
    M: int
    xi: tuple[tuple[int, ...], ...]  # users on each resource
    zeta: tuple[tuple[int, ...], ...]  # resources of each user
    V: tuple[np.ndarray, ...]  # per-user K x N placement matrices

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.M))

    @property
    def label_bits(self) -> int:
        return self.d_f * self.bits_per_symbol


def build_factor_graph(F: np.ndarray, M: int = 4) -> FactorGraph:
    """Derive neighborhoods and placement matrices from an indicator matrix.

    The matrix must be regular: constant column weight (each user occupies
    the same number of resources) and constant row weight (each resource
    carries the same number of users).
    """
    F = np.asarray(F, dtype=np.int8)
    if F.ndim != 2 or not np.isin(F, (0, 1)).all():
        raise ValueError("irregular factor graph")
    K, J = F.shape
    col_w = F.sum(axis=0)
    row_w = F.sum(axis=1)
    if len(set(col_w.tolist())) != 1 or len(set(row_w.tolist())) != 1:
        raise ValueError("irregular factor graph")
    N = int(col_w[0])
    d_f = int(row_w[0])
    if N < 1 or d_f < 1:
        raise ValueError("irregular factor graph")
    if M < 2 or (M & (M - 1)) != 0:
        raise ValueError("modulation order must be a power of two")
    xi = tuple(tuple(np.flatnonzero(F[k]).tolist()) for k in range(K))
    zeta = tuple(tuple(np.flatnonzero(F[:, j]).tolist()) for j in range(J))
    V = []
    for j in range(J):
        vj = np.zeros((K, N), dtype=np.int8)
        for n, k in enumerate(zeta[j]):
            vj[k, n] = 1
        V.append(vj)
    return FactorGraph(F=F, K=K, J=J, N=N, d_f=d_f, M=M, xi=xi, zeta=zeta, V=tuple(V))


def default_graph(M: int = 4) -> FactorGraph:
    return build_factor_graph(DEFAULT_F, M=M)


@dataclass(frozen=True)
class NonlinearCodebook:
    """Joint bit-to-point mapping on a shared overlapped constellation.

    Attributes
    ----------
    graph : FactorGraph
    S : complex ndarray
        The overlapped constellation, one point per label.
    labeling : int ndarray
        labeling[i] is the index into S of the point whose label is the
        i-th bit string (most significant bit first).
    layers : int ndarray, K x J
        Significance class of each edge (0 where the graph has no edge).
    P : int ndarray
        Bit reordering applied before the label lookup: input bit i of the
        concatenated per-resource bit vector lands at position P[i].
    lattice : LatticeCode or None
        Construction provenance when the constellation was built in-process
        (serialized files carry only the points).
    """

    graph: FactorGraph
    S: np.ndarray
    labeling: np.ndarray
    layers: np.ndarray
    P: np.ndarray
    lattice: LatticeCode | None = None

    def __post_init__(self):
        g = self.graph
        L = g.label_bits
        if self.S.shape != (g.M**g.d_f,):
            raise ValueError("constellation size must be M**d_f")
        if sorted(self.labeling.tolist()) != list(range(g.M**g.d_f)):
            raise ValueError("labeling must be a bijection onto the points")
        if sorted(self.P.tolist()) != list(range(L)):
            raise ValueError("bit reordering must be a permutation")
        if self.layers.shape != (g.K, g.J):
            raise ValueError("layer matrix shape must match the graph")
        if ((self.layers > 0) != (g.F > 0)).any():
            raise ValueError("layer matrix support must match the graph")
        for k in range(g.K):
            got = sorted(int(self.layers[k, j]) for j in g.xi[k])
            if got != list(range(1, g.d_f + 1)):
                raise ValueError("each resource needs one user per layer")


def users_by_layer(cb: NonlinearCodebook, k: int) -> list[int]:
    """Users of resource k ordered by their significance class there."""
    return sorted(cb.graph.xi[k], key=lambda j: cb.layers[k, j])


def local_table(cb: NonlinearCodebook) -> np.ndarray:
    """The per-resource lookup table, shape (M,) * d_f.

    Axis order is significance order (highest first).  The bit reordering
    and the labeling are global, so every resource shares this one table;
    resources differ only in which user feeds which axis.
    """
    g = cb.graph
    w = g.bits_per_symbol
    L = g.label_bits
    # Bit i of the concatenated vector contributes 2**(L-1-P[i]) to the
    # label integer.
    weights = 2 ** (L - 1 - np.asarray(cb.P))
    symbols = np.arange(g.M)
    bit_cols = [(symbols >> (w - 1 - b)) & 1 for b in range(w)]
    grids = np.meshgrid(*([symbols] * g.d_f), indexing="ij")
    label = np.zeros(grids[0].shape, dtype=np.int64)
    for pos in range(g.d_f):
        for b in range(w):
            bit = (grids[pos] >> (w - 1 - b)) & 1
            label += bit * weights[pos * w + b]
    return cb.S[cb.labeling[label]]


def _bits_to_symbols(B: np.ndarray, w: int) -> np.ndarray:
    sym = np.zeros(B.shape[1], dtype=np.int64)
    for b in range(w):
        sym = (sym << 1) | B[b]
    return sym


def encode_nl(cb: NonlinearCodebook, B: np.ndarray) -> np.ndarray:
    """Encode one bit matrix (bits_per_symbol rows, J columns) to a codeword."""
    g = cb.graph
    B = np.asarray(B)
    if B.shape != (g.bits_per_symbol, g.J):
        raise ValueError(
            f"expected bit matrix of shape {(g.bits_per_symbol, g.J)}, got {B.shape}"
        )
    if not np.isin(B, (0, 1)).all():
        raise ValueError("bit matrix entries must be 0 or 1")
    sym = _bits_to_symbols(B.astype(np.int64), g.bits_per_symbol)
    return encode_symbols(cb, sym[None, :])[0]


def encode_symbols(cb, sym: np.ndarray) -> np.ndarray:
    """Vectorized encoder: symbol matrix (n, J) to codewords (n, K)."""
    tables, orders = resource_tables(cb)
    sym = np.asarray(sym, dtype=np.int64)
    n = sym.shape[0]
    K = len(orders)
    w = np.empty((n, K), dtype=complex)
    for k, (table, order) in enumerate(zip(tables, orders)):
        idx = tuple(sym[:, j] for j in order)
        w[:, k] = table[idx]
    return w


def resource_tables(cb) -> tuple[list[np.ndarray], list[tuple[int, ...]]]:
    """Per-resource lookup tables and the user order feeding each axis."""
    if isinstance(cb, NonlinearCodebook):
        T = local_table(cb)
        orders = [tuple(users_by_layer(cb, k)) for k in range(cb.graph.K)]
        return [T] * cb.graph.K, orders
    if isinstance(cb, TableEncoder):
        return list(cb.tables), [tuple(o) for o in cb.orders]
    if isinstance(cb, LinearCodebook):
        return resource_tables(linear_as_nonlinear(cb))
    raise TypeError(f"not a codebook: {type(cb).__name__}")


def column_symbols(graph: FactorGraph) -> np.ndarray:
    """Mixed-radix digit matrix mapping table columns to user symbols.

    Column c of the superimposed table corresponds to user symbols
    digits[c], with user 0 the least significant digit (column index is
    sum of symbol_j * M**j).
    """
    J, M = graph.J, graph.M
    cols = np.arange(M**J, dtype=np.int64)
    return ((cols[:, None] // M ** np.arange(J)) % M).astype(np.uint8)


def superimposed_table(cb) -> tuple[np.ndarray, np.ndarray]:
    """All codewords as a K x M**J matrix plus the column-to-symbols map."""
    graph = cb.graph
    digits = column_symbols(graph)
    w = encode_symbols(cb, digits.astype(np.int64))
    return np.ascontiguousarray(w.T), digits


@dataclass(frozen=True)
class LinearCodebook:
    """Per-user sparse codebooks built from one rotated mother constellation."""

    graph: FactorGraph
    X: tuple[np.ndarray, ...]  # J matrices, each K x M
    mc: np.ndarray  # N x M mother constellation
    angles: tuple[float, ...]


def build_linear(
    mc_base: np.ndarray,
    permutations,
    angles,
    graph: FactorGraph,
    phase_pattern: np.ndarray | None = None,
) -> LinearCodebook:
    """Assemble a linear codebook top-down.

    The mother constellation stacks permuted copies of a base constellation,
    one row per user dimension; each user then rotates row n by the angle its
    n-th resource edge selects, and the placement matrix spreads the rows
    over that user's resources.
    """
    mc_base = np.asarray(mc_base, dtype=complex).ravel()
    g = graph
    if mc_base.size != g.M:
        raise ValueError(f"base constellation must have {g.M} points")
    if len(permutations) != g.N:
        raise ValueError(f"expected {g.N} permutations, got {len(permutations)}")
    if len(angles) != g.d_f:
        raise ValueError(f"expected {g.d_f} angles, got {len(angles)}")
    perms = []
    for p in permutations:
        p = np.asarray(p, dtype=np.int64)
        if sorted(p.tolist()) != list(range(g.M)):
            raise ValueError("permutations must be bijections on the symbol set")
        perms.append(p)
    mc = np.stack([mc_base[p] for p in perms])

    if phase_pattern is None:
        if g.F.shape == DEFAULT_F.shape and (g.F == DEFAULT_F).all():
            phase_pattern = DEFAULT_PHASE_PATTERN
        else:
            phase_pattern = np.zeros((g.K, g.J), dtype=np.int8)
            for j in range(g.J):
                for n, k in enumerate(g.zeta[j]):
                    phase_pattern[k, j] = (j + n) % g.d_f + 1
    phase_pattern = np.asarray(phase_pattern)
    if ((phase_pattern > 0) != (g.F > 0)).any():
        raise ValueError("phase pattern support must match the graph")

    angles = tuple(float(a) for a in angles)
    X = []
    for j in range(g.J):
        xj = np.zeros((g.K, g.M), dtype=complex)
        for n, k in enumerate(g.zeta[j]):
            rot = np.exp(1j * angles[phase_pattern[k, j] - 1])
            xj[k] = rot * mc[n]
        X.append(xj)
    return LinearCodebook(graph=g, X=tuple(X), mc=mc, angles=angles)


def encode_linear(lcb: LinearCodebook, B: np.ndarray) -> np.ndarray:
    """Superimpose per-user codewords selected by each user's bits."""
    g = lcb.graph
    B = np.asarray(B)
    if B.shape != (g.bits_per_symbol, g.J):
        raise ValueError(
            f"expected bit matrix of shape {(g.bits_per_symbol, g.J)}, got {B.shape}"
        )
    sym = _bits_to_symbols(B.astype(np.int64), g.bits_per_symbol)
    w = np.zeros(g.K, dtype=complex)
    for j in range(g.J):
        w += lcb.X[j][:, sym[j]]
    return w


@dataclass(frozen=True)
class TableEncoder:
    """Per-resource lookup encoder (the nonlinear view of any codebook)."""

    graph: FactorGraph
    tables: tuple[np.ndarray, ...]  # K tables of shape (M,) * d_f
    orders: tuple[tuple[int, ...], ...]  # users feeding each table's axes
    full_diversity: bool


def linear_as_nonlinear(lcb: LinearCodebook) -> TableEncoder:
    """Materialize a linear codebook as per-resource sum tables.

    The table at resource k is the Minkowski sum of the d_f user
    constellations active there; it is non-injective exactly when two
    different symbol combinations superimpose onto the same point, which is
    the diversity-loss situation the full_diversity flag reports.
    """
    g = lcb.graph
    tables = []
    orders = []
    diversity = True
    for k in range(g.K):
        users = g.xi[k]
        orders.append(tuple(users))
        table = np.zeros((g.M,) * g.d_f, dtype=complex)
        for axis, j in enumerate(users):
            shape = [1] * g.d_f
            shape[axis] = g.M
            table = table + lcb.X[j][k].reshape(shape)
        tables.append(table)
        vals = table.ravel()
        d = np.abs(vals[:, None] - vals[None, :])
        np.fill_diagonal(d, np.inf)
        scale = max(float(np.abs(vals).max()), 1e-30)
        if d.min() <= 1e-9 * scale:
            diversity = False
    return TableEncoder(
        graph=g, tables=tuple(tables), orders=tuple(orders), full_diversity=diversity
    )


# ---------------------------------------------------------------------------
# Serialization: a small bit-exact JSON contract shared across tools.
# ---------------------------------------------------------------------------

SCHEMA_VERSION = 1


def _complex_list(values: np.ndarray) -> list[list[float]]:
    return [[float(v.real), float(v.imag)] for v in np.asarray(values).ravel()]


def _from_complex_list(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs], dtype=complex)


def codebook_to_dict(cb) -> dict:
    g = cb.graph
    base = {
        "version": SCHEMA_VERSION,
        "K": g.K,
        "J": g.J,
        "M": g.M,
        "N": g.N,
        "F": g.F.astype(int).tolist(),
    }
    if isinstance(cb, NonlinearCodebook):
        base["type"] = "nonlinear"
        base["S"] = _complex_list(cb.S)
        base["labeling"] = [int(i) for i in cb.labeling]
        base["layers"] = cb.layers.astype(int).tolist()
        base["P"] = [int(i) for i in cb.P]
        return base
    if isinstance(cb, LinearCodebook):
        base["type"] = "linear"
        # each user's K x M matrix is stored row-major as K*M [re, im] pairs
        base["X"] = [_complex_list(xj) for xj in cb.X]
        return base
    raise TypeError(f"cannot serialize {type(cb).__name__}")


def codebook_from_dict(d: dict):
    if d.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported codebook version: {d.get('version')!r}")
    kind = d.get("type")
    graph = build_factor_graph(np.asarray(d["F"]), M=int(d["M"]))
    if graph.K != int(d["K"]) or graph.J != int(d["J"]) or graph.N != int(d["N"]):
        raise ValueError("codebook header does not match its indicator matrix")
    if kind == "nonlinear":
        return NonlinearCodebook(
            graph=graph,
            S=_from_complex_list(d["S"]),
            labeling=np.asarray(d["labeling"], dtype=np.int64),
            layers=np.asarray(d["layers"], dtype=np.int8),
            P=np.asarray(d["P"], dtype=np.int64),
        )
    if kind == "linear":
        X = []
        for flat in d["X"]:
            xj = _from_complex_list(flat).reshape(graph.K, graph.M)
            X.append(xj)
        mc = np.zeros((graph.N, graph.M), dtype=complex)  # not recoverable
        return LinearCodebook(graph=graph, X=tuple(X), mc=mc, angles=())
    raise ValueError(f"unsupported codebook type: {kind!r}")


def lattice_to_dict(code: LatticeCode) -> dict:
    w = code.window
    window = {"kind": w.kind}
    if w.kind == "circular":
        window["radius"] = w.radius
    else:
        window["half_width"] = w.half_width
        window["half_height"] = w.half_height
    return {
        "version": SCHEMA_VERSION,
        "type": "lattice",
        "points": _complex_list(code.points),
        "basis": _complex_list(np.array(code.basis)),
        "window": window,
        "scale": code.scale,
        "target_energy": code.target_energy,
    }


def lattice_from_dict(d: dict) -> LatticeCode:
    if d.get("type") != "lattice":
        raise ValueError(f"not a lattice file: type {d.get('type')!r}")
    wd = d["window"]
    window = Window(
        kind=wd["kind"],
        radius=float(wd.get("radius", 0.0)),
        half_width=float(wd.get("half_width", 0.0)),
        half_height=float(wd.get("half_height", 0.0)),
    )
    basis = _from_complex_list(d["basis"])
    return LatticeCode(
        points=_from_complex_list(d["points"]),
        basis=(complex(basis[0]), complex(basis[1])),
        window=window,
        scale=float(d["scale"]),
        target_energy=float(d["target_energy"]),
    )


def canonical_json_bytes(d: dict) -> bytes:
    return json.dumps(d, sort_keys=True, separators=(",", ":")).encode()


def codebook_hash(cb) -> str:
    return hashlib.sha256(canonical_json_bytes(codebook_to_dict(cb))).hexdigest()


def save_codebook(cb, path: str | Path) -> None:
    Path(path).write_bytes(canonical_json_bytes(codebook_to_dict(cb)))


def load_codebook(path: str | Path):
    d = json.loads(Path(path).read_text())
    return codebook_from_dict(d)
