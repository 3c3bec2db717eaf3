"""Finite lattice constellations cut by shaping windows.

A one-complex-dimensional lattice is enumerated from a generator basis, a
circular or square window grown from the origin selects a fixed number of
points (the overlapped constellation seen by one resource node), and the
selection is scaled to a target mean energy.  Boundary ties are resolved
deterministically, preferring selections whose total sum is zero so that the
constellation keeps a zero mean whenever the window boundary allows it.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

EISENSTEIN_UNIT = cmath.exp(2j * math.pi / 3)

# Enumerating every boundary keep-subset is exact but combinatorial; beyond
# this many subsets a greedy pair-first selection is used instead.
_SUBSET_ENUMERATION_CAP = 200_000

_REL_TOL = 1e-9


@dataclass(frozen=True)
class Window:
    """Origin-centered shaping window, circular or square."""

    kind: str  # "circular" or "rectangular"
    radius: float = 0.0
    half_width: float = 0.0
    half_height: float = 0.0

    def area(self) -> float:
        if self.kind == "circular":
            return math.pi * self.radius**2
        return 4.0 * self.half_width * self.half_height


@dataclass(frozen=True)
class LatticeCode:
    """A finite, deterministically ordered set of complex constellation points.

    Attributes
    ----------
    points : complex ndarray, shape (size,)
        The selected points, sorted by distance from the origin then angle.
    basis : pair of complex
        Generator basis the points were drawn from.
    window : Window
        The final window that produced the selection (scaled along with the
        points by :func:`normalize`).
    scale : float
        Cumulative scaling already applied to the raw lattice coordinates.
    target_energy : float
        Mean of |s|^2 over the points after the last normalization.
    """

    points: np.ndarray
    basis: tuple[complex, complex]
    window: Window
    scale: float
    target_energy: float

    @property
    def size(self) -> int:
        return int(self.points.size)

    def mean_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))


def generate_lattice(
    basis: tuple[complex, complex], max_coeff: int
) -> np.ndarray:
    """Enumerate lattice points g1*z1 + g2*z2 for |z1|, |z2| <= max_coeff.

    The basis must span the complex plane over the reals; a real-collinear
    pair generates a line, not a lattice, and is rejected.
    """
    if max_coeff < 1:
        raise ValueError("max_coeff must be at least 1")
    g1, g2 = complex(basis[0]), complex(basis[1])
    det = g1.real * g2.imag - g1.imag * g2.real
    if abs(det) <= _REL_TOL * max(abs(g1) * abs(g2), 1.0):
        raise ValueError("degenerate generator")
    coeffs = np.arange(-max_coeff, max_coeff + 1)
    z1, z2 = np.meshgrid(coeffs, coeffs, indexing="ij")
    pts = g1 * z1.ravel() + g2 * z2.ravel()
    # A non-degenerate basis maps distinct integer pairs to distinct points;
    # the unique() pass only canonicalizes ordering.
    return np.unique(pts)


def _window_metric(points: np.ndarray, kind: str) -> np.ndarray:
    if kind == "circular":
        return np.abs(points)
    if kind == "rectangular":
        return np.maximum(np.abs(points.real), np.abs(points.imag))
    raise ValueError(f"unknown window kind: {kind!r}")


def _point_key(p: complex) -> tuple[float, float, float]:
    # Smallest angular distance from the positive real axis wins; the
    # remaining components only make the ordering total.
    return (abs(cmath.phase(p)), -p.imag, p.real)


def _pair_up(points: list[complex], tol: float):
    """Split points into +/- mirror pairs and leftover singletons."""
    key = lambda p: (round(p.real / tol), round(p.imag / tol))
    index = {key(p): i for i, p in enumerate(points)}
    used = set()
    pairs: list[tuple[complex, complex]] = []
    singles: list[complex] = []
    for i, p in enumerate(points):
        if i in used:
            continue
        j = index.get(key(-p))
        if j is not None and j != i and j not in used:
            used.update((i, j))
            a, b = points[i], points[j]
            pairs.append((a, b) if _point_key(a) <= _point_key(b) else (b, a))
        else:
            used.add(i)
            singles.append(p)
    return pairs, singles


def _selection_key(subset: tuple[complex, ...], interior_sum: complex, tol: float):
    total = interior_sum + sum(subset)
    zero_sum = 0 if abs(total) <= tol else 1
    pairs, singles = _pair_up(list(subset), tol)
    pair_keys = sorted((_point_key(a), _point_key(b)) for a, b in pairs)
    single_keys = sorted(_point_key(p) for p in singles)
    return (zero_sum, -len(pairs), pair_keys, single_keys)


def _resolve_boundary(
    boundary: list[complex], need: int, interior_sum: complex, tol: float
) -> list[complex]:
    """Choose `need` of the boundary points.

    Preference order: a selection that zeroes the constellation sum (when one
    exists), then the most +/- mirror pairs, then pairs and singletons closest
    in angle to the positive real axis.
    """
    n = len(boundary)
    if math.comb(n, need) <= _SUBSET_ENUMERATION_CAP:
        best = min(
            itertools.combinations(boundary, need),
            key=lambda s: _selection_key(s, interior_sum, tol),
        )
        return list(best)
    # Greedy fallback for implausibly wide boundary shells: whole mirror
    # pairs first (closest to the real axis first), then single points.
    pairs, singles = _pair_up(boundary, tol)
    pairs.sort(key=lambda ab: _point_key(ab[0]))
    singles.sort(key=_point_key)
    chosen: list[complex] = []
    for a, b in pairs:
        if len(chosen) + 2 > need:
            break
        chosen.extend((a, b))
    for p in itertools.chain((s for s in singles), (m for ab in pairs for m in ab)):
        if len(chosen) >= need:
            break
        if not any(p == c for c in chosen):
            chosen.append(p)
    return chosen


def partition(
    points: np.ndarray | list[complex],
    kind: str,
    target_count: int,
    basis: tuple[complex, complex] = (1 + 0j, 1j),
) -> LatticeCode:
    """Select target_count points by growing a window out from the origin.

    The window stops at the smallest size that encloses at least the target
    number of points; excess points on the final boundary shell are dropped
    by the deterministic tie rules of :func:`_resolve_boundary`.
    """
    pts = np.asarray(points, dtype=complex).ravel()
    if target_count < 1:
        raise ValueError("target_count must be at least 1")
    if pts.size < target_count:
        raise ValueError("extent too small")

    metric = _window_metric(pts, kind)
    order = np.argsort(metric, kind="stable")
    pts = pts[order]
    metric = metric[order]

    # Cluster the sorted sizes into shells (floating-point Eisenstein
    # coordinates put nominally equal radii a few ulp apart).
    shell_tol = _REL_TOL * max(1.0, float(metric[-1]))
    shell_starts = [0]
    for i in range(1, pts.size):
        if metric[i] - metric[shell_starts[-1]] > shell_tol:
            shell_starts.append(i)
    shell_starts.append(pts.size)

    chosen: list[complex] = []
    final_size = 0.0
    for a, b in itertools.pairwise(shell_starts):
        shell = list(pts[a:b])
        final_size = float(np.max(metric[a:b]))
        if len(chosen) + len(shell) <= target_count:
            chosen.extend(shell)
            if len(chosen) == target_count:
                break
        else:
            need = target_count - len(chosen)
            interior_sum = complex(sum(chosen))
            sum_tol = _REL_TOL * max(1.0, final_size) * max(1, target_count)
            chosen.extend(_resolve_boundary(shell, need, interior_sum, sum_tol))
            break

    sel = np.array(chosen, dtype=complex)
    sel = sel[np.lexsort((np.angle(sel), np.round(_window_metric(sel, kind), 9)))]
    if kind == "circular":
        window = Window(kind="circular", radius=final_size)
    else:
        window = Window(
            kind="rectangular", half_width=final_size, half_height=final_size
        )
    return LatticeCode(
        points=sel, basis=basis, window=window, scale=1.0, target_energy=float("nan")
    )


def normalize(code: LatticeCode, target_energy: float) -> LatticeCode:
    """Scale a code (and its window) to the requested mean point energy."""
    if target_energy <= 0:
        raise ValueError("target_energy must be positive")
    current = code.mean_energy()
    if current <= 0.0:
        raise ValueError("zero energy")
    factor = math.sqrt(target_energy / current)
    window = replace(
        code.window,
        radius=code.window.radius * factor,
        half_width=code.window.half_width * factor,
        half_height=code.window.half_height * factor,
    )
    return LatticeCode(
        points=code.points * factor,
        basis=code.basis,
        window=window,
        scale=code.scale * factor,
        target_energy=float(target_energy),
    )


def med(code: LatticeCode | np.ndarray) -> float:
    """Minimum pairwise Euclidean distance of a point set (not squared)."""
    pts = code.points if isinstance(code, LatticeCode) else np.asarray(code).ravel()
    if pts.size < 2:
        raise ValueError("undefined MED")
    diff = pts[:, None] - pts[None, :]
    d2 = np.abs(diff) ** 2
    np.fill_diagonal(d2, np.inf)
    return float(math.sqrt(d2.min()))


def shape_gain(code: LatticeCode) -> float:
    """Window area divided by six times the mean point energy.

    Dimensionless and invariant under a uniform scaling of the code together
    with its window.  A continuous uniform distribution over a disc scores
    pi/3, which is the natural sanity anchor for circular windows.
    """
    energy = code.mean_energy()
    if energy <= 0.0:
        raise ValueError("zero energy")
    return code.window.area() / (6.0 * energy)


def make_overlapped_constellation(
    lattice: str = "eisenstein",
    window: str = "circular",
    size: int = 64,
    target_energy: float = 1.5,
) -> LatticeCode:
    """Build a normalized overlapped constellation in one call.

    For the square (Gaussian-integer) lattice with an even-per-axis point
    count the raw grid is offset by (0.5 + 0.5j) before windowing, which is
    what makes an origin-centered window select a symmetric grid.
    """
    if lattice == "gaussian":
        basis = (1 + 0j, 1j)
    elif lattice == "eisenstein":
        basis = (1 + 0j, EISENSTEIN_UNIT)
    else:
        raise ValueError(f"unknown lattice kind: {lattice!r}")
    if window not in ("circular", "rectangular"):
        raise ValueError(f"unknown window kind: {window!r}")

    max_coeff = math.ceil(2.0 * math.sqrt(size))
    pts = generate_lattice(basis, max_coeff)
    per_axis = math.isqrt(size)
    if lattice == "gaussian" and per_axis**2 == size and per_axis % 2 == 0:
        pts = pts + (0.5 + 0.5j)
    code = partition(pts, window, size, basis=basis)
    return normalize(code, target_energy)
