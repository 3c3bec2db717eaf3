"""Bit recovery from noisy superimposed observations.

Two detectors share the per-resource lookup tables: an exhaustive joint
search over all M**J hypotheses (the oracle, exact but exponential) and
loopy message passing on the factor graph (linear in the graph size, the
practical receiver).  Message passing runs entirely in the log domain with
per-message normalization, so it stays finite for noise variances from 1e-6
up to 1e3 and degrades to uniform beliefs when the observation carries no
information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .codebook import column_symbols, resource_tables, superimposed_table

LLR_CLAMP = 40.0
_MAP_CHUNK = 128


@dataclass(frozen=True)
class Beliefs:
    """Per-user posteriors: symbol probabilities and per-bit LLRs.

    probs has one row per user summing to 1; llrs follows the bit-matrix
    convention (bits_per_symbol rows, J columns, most significant bit
    first) with positive values favoring bit 0.
    """

    probs: np.ndarray
    llrs: np.ndarray


def symbols_to_bits(sym: np.ndarray, w: int) -> np.ndarray:
    """Symbol row vector to a (w, J) bit matrix, most significant bit first."""
    sym = np.asarray(sym, dtype=np.int64)
    return np.stack([(sym >> (w - 1 - b)) & 1 for b in range(w)]).astype(np.uint8)


def bit_llrs(probs: np.ndarray, w: int) -> np.ndarray:
    """Log(P[bit=0]/P[bit=1]) per bit position, clamped to +-LLR_CLAMP.

    Accepts any leading shape with symbol probabilities on the last axis
    and returns the same leading shape with a trailing axis of w bit
    positions, most significant first.
    """
    probs = np.asarray(probs, dtype=float)
    m = probs.shape[-1]
    symbols = np.arange(m)
    out = np.empty(probs.shape[:-1] + (w,))
    with np.errstate(divide="ignore"):
        for b in range(w):
            zero = (symbols >> (w - 1 - b)) & 1 == 0
            p0 = probs[..., zero].sum(axis=-1)
            p1 = probs[..., ~zero].sum(axis=-1)
            out[..., b] = np.log(p0) - np.log(p1)
    return np.clip(out, -LLR_CLAMP, LLR_CLAMP)


def _frame_arrays(y, h) -> tuple[np.ndarray, np.ndarray, bool]:
    y = np.asarray(y, dtype=complex)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    h = np.broadcast_to(np.asarray(h, dtype=complex), y.shape)
    return y, h, single


def map_exact(y, h, cb, n0: float):
    """Joint search over every hypothesis; returns (bit matrix, log-likelihoods).

    The winning hypothesis minimizes ||y - h*column||^2 over all M**J
    columns; ties break to the smallest mixed-radix column index.  The
    second return value is the full per-column log-likelihood vector
    -score/N0 (uniform priors, unnormalized).
    """
    y, h, _ = _frame_arrays(y, h)
    if y.shape[0] != 1:
        raise ValueError("map_exact takes one frame; use map_symbols for batches")
    g = cb.graph
    phi, digits = superimposed_table(cb)
    d2 = (np.abs(y[0][:, None] - h[0][:, None] * phi) ** 2).sum(axis=0)
    ll = -d2 / max(n0, 1e-12)
    best = int(np.argmin(d2))
    bits = symbols_to_bits(digits[best], g.bits_per_symbol)
    return bits, ll


def map_symbols(y, h, cb, n0: float, phi=None, digits=None) -> np.ndarray:
    """Batched joint search: (n, K) observations to (n, J) symbol decisions.

    phi/digits can be passed in to amortize the table build across calls;
    n0 only scales the scores, so the decisions do not depend on it.
    """
    y, h, single = _frame_arrays(y, h)
    if phi is None or digits is None:
        phi, digits = superimposed_table(cb)
    n = y.shape[0]
    K = phi.shape[0]
    out = np.empty((n, cb.graph.J), dtype=np.uint8)
    for i0 in range(0, n, _MAP_CHUNK):
        i1 = min(i0 + _MAP_CHUNK, n)
        d2 = np.zeros((i1 - i0, phi.shape[1]))
        for k in range(K):
            d2 += np.abs(y[i0:i1, k, None] - h[i0:i1, k, None] * phi[k][None, :]) ** 2
        out[i0:i1] = digits[np.argmin(d2, axis=1)]
    return out[0] if single else out


def mpa_beliefs(y, h, cb, n0: float, iterations: int) -> np.ndarray:
    """Loopy sum-product posteriors: (n, K) observations to (n, J, M) beliefs.

    Each resource function node enumerates its M**d_f local hypotheses
    under the Gaussian kernel, marginalizes over the other users while
    conditioning on one, and the per-user belief is the normalized product
    of incoming resource messages.  Messages are normalized every pass.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    y, h, _ = _frame_arrays(y, h)
    g = cb.graph
    tables, orders = resource_tables(cb)
    n, K = y.shape
    M, d_f, J = g.M, g.d_f, g.J
    inv_n0 = 1.0 / max(n0, 1e-12)

    kern = np.empty((n, K, M**d_f))
    for k in range(K):
        flat = tables[k].reshape(-1)
        kern[:, k, :] = -(np.abs(y[:, k, None] - h[:, k, None] * flat[None, :]) ** 2)
    kern *= inv_n0
    kern = kern.reshape((n, K) + (M,) * d_f)
    axes = tuple(range(2, 2 + d_f))
    kern = kern - kern.max(axis=axes, keepdims=True)

    # slots[j] lists (resource, axis) pairs where user j feeds a table
    slots = [[] for _ in range(J)]
    for k in range(K):
        for s, j in enumerate(orders[k]):
            slots[j].append((k, s))

    u2r = np.full((n, K, d_f, M), -np.log(M))
    r2u = np.zeros((n, K, d_f, M))
    for _ in range(iterations):
        for k in range(K):
            total = kern[:, k]
            for s in range(d_f):
                shape = (n,) + tuple(M if a == s else 1 for a in range(d_f))
                total = total + u2r[:, k, s].reshape(shape)
            for s in range(d_f):
                shape = (n,) + tuple(M if a == s else 1 for a in range(d_f))
                others = tuple(a + 1 for a in range(d_f) if a != s)
                msg = logsumexp(total - u2r[:, k, s].reshape(shape), axis=others)
                r2u[:, k, s] = msg - logsumexp(msg, axis=-1, keepdims=True)
        for j in range(J):
            for k, s in slots[j]:
                msg = np.zeros((n, M))
                for k2, s2 in slots[j]:
                    if (k2, s2) != (k, s):
                        msg = msg + r2u[:, k2, s2]
                u2r[:, k, s] = msg - logsumexp(msg, axis=-1, keepdims=True)

    beliefs = np.zeros((n, J, M))
    for j in range(J):
        for k, s in slots[j]:
            beliefs[:, j] += r2u[:, k, s]
    beliefs -= logsumexp(beliefs, axis=-1, keepdims=True)
    return np.exp(beliefs)


def mpa_symbols(y, h, cb, n0: float, iterations: int = 7) -> np.ndarray:
    """Hard decisions from message passing: (n, K) to (n, J) symbols."""
    y, h, single = _frame_arrays(y, h)
    probs = mpa_beliefs(y, h, cb, n0, iterations)
    sym = np.argmax(probs, axis=-1).astype(np.uint8)
    return sym[0] if single else sym


def mpa_detect(y, h, cb, n0: float, iterations: int = 7):
    """One frame through message passing: returns (Beliefs, bit matrix)."""
    y, h, _ = _frame_arrays(y, h)
    if y.shape[0] != 1:
        raise ValueError("mpa_detect takes one frame; use mpa_symbols for batches")
    w = cb.graph.bits_per_symbol
    probs = mpa_beliefs(y, h, cb, n0, iterations)[0]
    llrs = bit_llrs(probs, w).T
    sym = np.argmax(probs, axis=-1)
    return Beliefs(probs=probs, llrs=llrs), symbols_to_bits(sym, w)
