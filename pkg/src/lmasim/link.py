"""The classic transmit/receive chain: encode, precode, normalize to constant
sum power, pass through the channel with additive noise, combine, and detect
by exhaustive maximum likelihood over the codebook.

The receiver knows the channel, precoder, combiner and codebook but not the
instantaneous normalization factor, so the detection metric omits it.  That
mismatch is deliberate and is the price paid for constant-envelope operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codebook import encode_bits, index_to_bits
from .errors import ConfigError, DegenerateSignalError, DimensionError
from .numerics import rng_from
from .precoding import effective_channel

#: Squared norm of a stacked codeword vector below which normalization refuses.
DEGENERATE_NORM_SQ = 1e-24

#: snr_db -> sigma^2 rules.  "sum-power" references the total transmit power
#: (sigma^2 = p_t * 10^(-snr/10)); "unit" ignores it (sigma^2 = 10^(-snr/10)).
CONVENTIONS = ("sum-power", "unit")


@dataclass(frozen=True)
class NoiseConfig:
    """Receiver noise level: a nominal SNR plus the rule giving sigma^2.

    ``snr_db = math.inf`` is the noiseless sentinel.  The convention choice
    shifts every BER curve horizontally by the same amount and never changes
    algorithm orderings or gaps at equal nominal SNR.
    """

    snr_db: float
    convention: str = "sum-power"
    seed: int = 0

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"unknown noise convention {self.convention!r}")
        if math.isnan(self.snr_db):
            raise ConfigError("snr_db must not be NaN")

    def variance(self, p_t):
        """Per-antenna complex noise variance for a link of sum power p_t."""
        if math.isinf(self.snr_db) and self.snr_db > 0:
            return 0.0
        lin = 10.0 ** (-self.snr_db / 10.0)
        if self.convention == "sum-power":
            if not p_t > 0:
                raise ConfigError("sum-power convention needs p_t > 0")
            return p_t * lin
        return lin


@dataclass(frozen=True)
class TxFrame:
    """One transmitted vector with its source bits and normalization factor."""

    bits: tuple
    x: np.ndarray
    factor: float
    p_t: float

    def __post_init__(self):
        power = float(np.sum(np.abs(self.x) ** 2))
        if abs(power / self.p_t - 1.0) > 1e-12:
            raise DegenerateSignalError(
                f"frame power {power} deviates from target {self.p_t}")
        if not self.factor > 0:
            raise DegenerateSignalError("normalization factor must be > 0")


def stack_codewords(bits_per_user, codebooks):
    """Concatenate every user's codeword for its bit vector into one column."""
    if len(bits_per_user) != len(codebooks):
        raise DimensionError(
            f"{len(bits_per_user)} bit vectors for {len(codebooks)} codebooks")
    parts = [encode_bits(cb, bits) for bits, cb in zip(bits_per_user, codebooks)]
    return np.concatenate(parts).reshape(-1, 1)


def normalize_sum_power(v, p_t):
    """Scale a column (or batch of columns) onto the sum-power sphere.

    Returns the scaled array and the per-column factors sqrt(p_t)/||v||.
    A (near-)zero column cannot be placed on the sphere and raises.
    """
    if not p_t > 0:
        raise ConfigError(f"p_t must be > 0, got {p_t}")
    norms_sq = np.sum(np.abs(v) ** 2, axis=0)
    if np.any(norms_sq < DEGENERATE_NORM_SQ * p_t):
        raise DegenerateSignalError("cannot normalize a zero signal vector")
    factors = np.sqrt(p_t / norms_sq)
    return v * factors, factors


def modulate(bits_per_user, codebooks, pset, p_t):
    """Encode, precode and normalize one multiuser frame."""
    s = stack_codewords(bits_per_user, codebooks)
    x, factors = normalize_sum_power(pset.composite() @ s, p_t)
    return TxFrame(bits=tuple(np.asarray(b) for b in bits_per_user),
                   x=x, factor=float(factors[0]), p_t=float(p_t))


def modulate_batch(indices_per_user, codebooks, pset, p_t):
    """Vectorized modulation from codeword indices.

    ``indices_per_user[k]`` is a length-B integer array selecting user k's
    codeword per frame.  Returns the transmit matrix (n_tx x B) and the
    per-frame normalization factors.
    """
    s = np.concatenate(
        [cb.codewords[idx].T for idx, cb in zip(indices_per_user, codebooks)],
        axis=0)
    return normalize_sum_power(pset.composite() @ s, p_t)


def transmit(x, h, noise, p_t=None):
    """Propagate frames through one user's channel and add receiver noise.

    ``x`` may be a single column or a batch of columns; noise is i.i.d.
    complex Gaussian per receive antenna and frame.  The sum power used by
    the noise convention defaults to the first column's power.
    """
    if p_t is None:
        p_t = float(np.sum(np.abs(x[:, 0]) ** 2)) if x.ndim == 2 else None
    var = noise.variance(p_t)
    y = h @ x
    if var == 0.0:
        return y
    rng = rng_from(noise.seed)
    n = np.sqrt(var / 2.0) * (rng.standard_normal(y.shape)
                              + 1j * rng.standard_normal(y.shape))
    return y + n


def candidate_images(pset, matrices, k, codebook):
    """Combined receive-side image of every codeword of user k (M x n_k).

    Row j holds (combiner @ channel @ precoder) applied to codeword j; the
    detector compares the combined observation against these rows.
    """
    eff = effective_channel(pset, matrices, k)
    if eff.shape[1] != codebook.n_bits:
        raise DimensionError(
            f"codebook dimension {codebook.n_bits} does not match "
            f"{eff.shape[1]} streams")
    return codebook.codewords @ eff.T


def nearest_codeword(images, z):
    """Index of the image row closest to z, plus the number of candidates
    evaluated (always the full codebook: the search is exhaustive).

    Ties resolve to the lowest index.
    """
    d2 = np.sum(np.abs(images - z.reshape(1, -1)) ** 2, axis=1)
    return int(np.argmin(d2)), d2.shape[0]


def nearest_codewords(images, z_batch):
    """Batch version of :func:`nearest_codeword` over columns of z_batch."""
    d2 = (np.sum(np.abs(images) ** 2, axis=1, keepdims=True)
          - 2.0 * np.real(images.conj() @ z_batch))
    return np.argmin(d2, axis=0)


def ml_detect(y, pset, matrices, k, codebook):
    """Maximum-likelihood detection of user k's bits from its receive vector."""
    z = pset.combiners[k] @ y
    idx, _ = nearest_codeword(candidate_images(pset, matrices, k, codebook), z)
    return index_to_bits(idx, codebook.n_bits)


def paspr(frames):
    """Peak-to-average sum power over a set of transmit vectors.

    Accepts plain arrays or anything exposing the vector as ``.x``; equals 1
    exactly when all frames sit on the same power sphere.
    """
    if len(frames) == 0:
        raise ConfigError("paspr needs at least one frame")
    powers = np.array([float(np.sum(np.abs(getattr(f, "x", f)) ** 2))
                       for f in frames])
    return float(powers.max() / powers.mean())
