"""Constant-power codebooks: points on a complex hypersphere with bit labeling.

A codebook for n bits holds M = 2^n codewords in C^n, every one of squared
norm P, so each transmitted symbol carries the same instantaneous power.
Construction clusters uniform hypersphere samples (k-means in the 2n real
coordinates) and renormalizes the centroids back onto the sphere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConstructionError, DimensionError
from .numerics import rng_from

#: Relative tolerance on codeword power.
POWER_TOL = 1e-9

_RESEED_ROUNDS = 5


@dataclass(frozen=True)
class PmhBuildParams:
    """Clustering knobs: hypersphere sample count, iteration cap, seed."""

    sample_count: int | None = None
    max_iters: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")

    def resolved_sample_count(self, m):
        if self.sample_count is None:
            return max(1000, 64 * m)
        if self.sample_count < 16 * m:
            raise ConfigError(
                f"sample_count must be >= 16*M = {16 * m}, got {self.sample_count}")
        return self.sample_count


@dataclass(frozen=True)
class Codebook:
    """2^n_bits codewords in C^n_bits, each of squared norm ``power``.

    ``codewords[i]`` is the codeword for the bit pattern whose natural binary
    value is i (row vector of length n_bits).
    """

    n_bits: int
    power: float
    codewords: np.ndarray

    def __post_init__(self):
        m = 2 ** self.n_bits
        if self.codewords.shape != (m, self.n_bits):
            raise DimensionError(
                f"codewords must be {m}x{self.n_bits}, got {self.codewords.shape}")

    @property
    def size(self):
        return 2 ** self.n_bits

    def validate(self):
        """Check the constant-power and distinctness invariants; raise on breach."""
        norms_sq = np.sum(np.abs(self.codewords) ** 2, axis=1)
        if np.max(np.abs(norms_sq - self.power)) > POWER_TOL * self.power:
            raise ConstructionError("codeword power deviates from P beyond tolerance")
        if self.size >= 2 and min_distance(self) <= 0.0:
            raise ConstructionError("codebook contains duplicate codewords")
        return self


def sample_hypersphere(count, n_complex, rng):
    """Uniform points on the unit sphere in C^n (2n real dims), as real rows."""
    x = rng.standard_normal((count, 2 * n_complex))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    # resample the measure-zero chance of a zero draw
    bad = norms[:, 0] < 1e-12
    while np.any(bad):
        x[bad] = rng.standard_normal((int(bad.sum()), 2 * n_complex))
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        bad = norms[:, 0] < 1e-12
    return x / norms


def _kmeans_pp_init(x, k, rng):
    """k-means++ seeding over the rows of x."""
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = np.sum((x - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        probs = d2 / d2.sum() if d2.sum() > 0 else np.full(n, 1.0 / n)
        centroids[i] = x[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((x - centroids[i]) ** 2, axis=1))
    return centroids


def _lloyd(x, centroids, max_iters, movement_tol=1e-8):
    """Lloyd iterations with farthest-point reseeding of empty clusters."""
    k = centroids.shape[0]
    for _ in range(max_iters):
        d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        new = np.empty_like(centroids)
        for round_ in range(_RESEED_ROUNDS + 1):
            empty = []
            for j in range(k):
                members = x[assign == j]
                if len(members) == 0:
                    empty.append(j)
                else:
                    new[j] = members.mean(axis=0)
            if not empty:
                break
            if round_ == _RESEED_ROUNDS:
                raise ConstructionError(
                    f"{len(empty)} clusters stayed empty after reseeding")
            # reseed each empty cluster at the sample farthest from its centroid
            nearest = d2[np.arange(len(x)), assign]
            for j in empty:
                far = int(np.argmax(nearest))
                assign[far] = j
                nearest[far] = 0.0
        movement = np.max(np.linalg.norm(new - centroids, axis=1))
        centroids = new
        if movement < movement_tol:
            break
    return centroids


def _canonical_order(codewords):
    """Sort rows lexicographically on coordinates quantized to 12 decimals."""
    flat = np.round(
        np.column_stack([codewords.real, codewords.imag]), 12)
    order = np.lexsort(flat.T[::-1])
    return codewords[order]


def build_pmh(n_bits, power, params=None):
    """Cluster a uniform hypersphere sample into a 2^n_bits-point codebook.

    Centroids are renormalized to norm sqrt(power) and labeled with natural
    binary bit patterns in a canonical coordinate order.  Deterministic for
    fixed parameters.
    """
    if not 1 <= n_bits <= 16:
        raise ConfigError(f"n_bits must be in [1, 16], got {n_bits}")
    if not power > 0:
        raise ConfigError("power must be > 0")
    params = params or PmhBuildParams()
    m = 2 ** n_bits
    rng = rng_from(params.seed)
    x = sample_hypersphere(params.resolved_sample_count(m), n_bits, rng)
    centroids = _kmeans_pp_init(x, m, rng)
    centroids = _lloyd(x, centroids, params.max_iters)

    norms = np.linalg.norm(centroids, axis=1, keepdims=True)
    if np.any(norms[:, 0] < 1e-12):
        raise ConstructionError("a centroid collapsed to the origin")
    points = np.sqrt(power) * centroids / norms
    complex_points = points[:, :n_bits] + 1j * points[:, n_bits:]
    return Codebook(n_bits=n_bits, power=float(power),
                    codewords=_canonical_order(complex_points)).validate()


def min_distance(cb):
    """Smallest pairwise Euclidean distance between codewords."""
    if cb.size < 2:
        raise ConfigError("min_distance needs at least 2 codewords")
    diff = cb.codewords[:, None, :] - cb.codewords[None, :, :]
    d = np.sqrt(np.sum(np.abs(diff) ** 2, axis=2))
    d[np.diag_indices(cb.size)] = np.inf
    return float(d.min())


def bits_to_index(bits):
    """Natural binary value of a bit vector (MSB first)."""
    idx = 0
    for b in bits:
        if b not in (0, 1):
            raise DimensionError(f"bits must be 0/1, got {b!r}")
        idx = (idx << 1) | int(b)
    return idx


def index_to_bits(index, n_bits):
    """Inverse of :func:`bits_to_index`."""
    return np.array([(index >> (n_bits - 1 - i)) & 1 for i in range(n_bits)],
                    dtype=np.int8)


def encode_bits(cb, bits):
    """Map a bit vector of length n_bits to its codeword."""
    bits = np.asarray(bits)
    if bits.shape != (cb.n_bits,):
        raise DimensionError(
            f"expected {cb.n_bits} bits, got shape {bits.shape}")
    return cb.codewords[bits_to_index(bits)]


def decode_codeword(cb, s):
    """Bits of the codeword nearest to `s` (exact inverse of encode on codewords)."""
    s = np.asarray(s).reshape(-1)
    if s.shape != (cb.n_bits,):
        raise DimensionError(f"expected length {cb.n_bits}, got {s.shape}")
    idx = int(np.argmin(np.sum(np.abs(cb.codewords - s) ** 2, axis=1)))
    return index_to_bits(idx, cb.n_bits)


def to_json(cb):
    """Serialize the codebook (n, P, per-codeword [re, im] rows)."""
    return json.dumps({
        "n_bits": cb.n_bits,
        "power": cb.power,
        "codewords": [[[float(z.real), float(z.imag)] for z in row]
                      for row in cb.codewords],
    }, indent=1)


def from_json(text):
    """Load and validate a codebook serialized by :func:`to_json`."""
    doc = json.loads(text)
    rows = np.array([[complex(re, im) for re, im in row]
                     for row in doc["codewords"]], dtype=np.complex128)
    return Codebook(n_bits=doc["n_bits"], power=doc["power"],
                    codewords=rows).validate()
