"""Complex-baseband fading and noise for the K-resource block.

The received vector is y = h * w + n, applied elementwise over the K
resources.  Fading is block fading: one draw of h covers one transmitted
codeword and is redrawn per codeword, independently across resources.  All
randomness flows through a caller-supplied generator so simulation streams
stay reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("awgn", "rayleigh", "rician")


@dataclass(frozen=True)
class ChannelModel:
    """Fading family plus the Rician power ratio.

    ``kappa`` is the ratio of line-of-sight to scattered power and is only
    meaningful for kind "rician"; rician with kappa = 0 is exactly rayleigh
    (same draws from the same generator state).
    """

    kind: str = "awgn"
    kappa: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind: {self.kind!r}")
        if not math.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError("kappa must be finite and nonnegative")


def draw_channel(model: ChannelModel, k: int, rng: np.random.Generator) -> np.ndarray:
    """One block-fading realization: length-k unit-power gains.

    AWGN returns all-ones without touching the generator.  Fading models
    draw h = sqrt(kappa/(1+kappa)) + sqrt(1/(1+kappa)) * CN(0, 1), which has
    E[|h|^2] = 1 for every kappa; rayleigh is the kappa = 0 case.
    """
    if k < 1:
        raise ValueError("need at least one resource")
    if model.kind == "awgn":
        return np.ones(k, dtype=complex)
    kappa = model.kappa if model.kind == "rician" else 0.0
    los = math.sqrt(kappa / (1.0 + kappa))
    scatter = math.sqrt(1.0 / (1.0 + kappa))
    g = rng.standard_normal((k, 2))
    return los + scatter * (g[:, 0] + 1j * g[:, 1]) / math.sqrt(2.0)


def apply(
    h: np.ndarray, w: np.ndarray, n0: float, rng: np.random.Generator
) -> np.ndarray:
    """Elementwise h*w plus complex Gaussian noise of total variance n0.

    n0 = 0 is the exact noiseless mode and consumes no randomness, so a
    noiseless run leaves the generator state untouched.
    """
    h = np.asarray(h, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if h.shape != w.shape:
        raise ValueError("gain and signal shapes must agree")
    if n0 < 0:
        raise ValueError("noise variance must be nonnegative")
    if n0 == 0:
        return h * w
    g = rng.standard_normal(h.shape + (2,))
    return h * w + math.sqrt(n0 / 2.0) * (g[..., 0] + 1j * g[..., 1])


def ebn0_to_n0(ebn0_db: float, frame_energy: float, n_users: int, m: int) -> float:
    """Noise variance for a per-bit SNR given the mean codeword energy.

    The frame carries n_users * log2(m) bits at total energy frame_energy,
    so Eb/N0 = frame_energy / (N0 * n_users * log2(m)).
    """
    if frame_energy <= 0:
        raise ValueError("zero energy")
    bits = n_users * math.log2(m)
    return frame_energy / (10.0 ** (ebn0_db / 10.0) * bits)


def esn0_to_n0(esn0_db: float, frame_energy: float, n_resources: int) -> float:
    """Noise variance for a per-resource symbol SNR."""
    if frame_energy <= 0:
        raise ValueError("zero energy")
    per_resource = frame_energy / n_resources
    return per_resource / (10.0 ** (esn0_db / 10.0))
