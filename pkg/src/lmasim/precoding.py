"""Multiuser precoder construction: null-space block diagonalization and a
per-user-subarray baseline, plus the feasibility and rank analytics that
separate the two.

Modes
-----
``"bd"``
    Every user's precoder lives in the null space of all other users'
    channels, computed on the shared full transmit array; an SVD of the
    surviving equivalent channel supplies the per-user combiner.
``"subarray"``
    Each user owns a contiguous block of transmit antennas.  The precoder is
    the block-restricted null space of the other users' channels, randomly
    rotated to the stream count; no combiner is designed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConstructionError, InfeasibleDimensionError
from .numerics import null_space_basis, random_semi_unitary, rng_from, svd

MODE_BD = "bd"
MODE_SUBARRAY = "subarray"
MODES = (MODE_BD, MODE_SUBARRAY)

#: Orthonormality tolerance for precoder columns and combiner rows.
UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class Feasibility:
    """Outcome of a dimension check: every violated constraint, by name."""

    mode: str
    violated: tuple

    @property
    def ok(self):
        return len(self.violated) == 0


@dataclass(frozen=True)
class PrecoderSet:
    """Per-user precoder blocks, combiners and equivalent-channel gains.

    ``f_blocks[k]`` maps user k's streams onto the full transmit array
    (n_tx rows); ``combiners[k]`` collapses that user's receive antennas to
    its stream count; ``singular_values[k]`` are the gains of the combined
    effective channel, descending.
    """

    mode: str
    f_blocks: tuple
    combiners: tuple
    singular_values: tuple

    @property
    def n_users(self):
        return len(self.f_blocks)

    @property
    def stream_counts(self):
        return tuple(f.shape[1] for f in self.f_blocks)

    def composite(self):
        """All users' precoders side by side (n_tx x total streams)."""
        return np.concatenate(self.f_blocks, axis=1)

    def validate(self):
        """Check column/row orthonormality of every block; raise on breach."""
        if self.mode not in MODES:
            raise ConfigError(f"unknown precoder mode {self.mode!r}")
        for k, (f, w) in enumerate(zip(self.f_blocks, self.combiners)):
            n = f.shape[1]
            if np.linalg.norm(f.conj().T @ f - np.eye(n)) > UNITARY_TOL * n:
                raise ConstructionError(
                    f"user {k} precoder columns are not orthonormal")
            if np.linalg.norm(w @ w.conj().T - np.eye(w.shape[0])) > UNITARY_TOL * n:
                raise ConstructionError(
                    f"user {k} combiner rows are not orthonormal")
        return self


def validate_dims(config, stream_counts, mode):
    """Report which dimension constraints the mode violates (never raises).

    For ``"bd"`` the total receive count must not exceed the transmit array
    and no user may ask for more streams than receive antennas.  The
    ``"subarray"`` mode additionally needs an integer block size at least as
    large as the total receive count, and exactly one stream per receive
    antenna.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown precoder mode {mode!r}")
    stream_counts = tuple(int(n) for n in stream_counts)
    if len(stream_counts) != config.n_users:
        raise ConfigError(
            f"need one stream count per user, got {len(stream_counts)} "
            f"for {config.n_users} users")
    if any(n < 1 for n in stream_counts):
        raise ConfigError(f"stream counts must be >= 1, got {stream_counts}")

    violated = []
    if mode == MODE_BD:
        if config.n_rx_total > config.n_tx:
            violated.append("total_rx_exceeds_tx")
        for k, (n, n_rx) in enumerate(zip(stream_counts, config.users)):
            if n > n_rx:
                violated.append(f"user{k}_streams_exceed_rx")
    else:
        if config.n_tx % config.n_users != 0:
            violated.append("tx_not_divisible_by_users")
        else:
            block = config.n_tx // config.n_users
            if config.n_rx_total > block:
                violated.append("total_rx_exceeds_block")
        for k, (n, n_rx) in enumerate(zip(stream_counts, config.users)):
            if n != n_rx:
                violated.append(f"user{k}_streams_not_equal_rx")
    return Feasibility(mode=mode, violated=tuple(violated))


def _require_feasible(config, stream_counts, mode):
    feas = validate_dims(config, stream_counts, mode)
    if not feas.ok:
        raise InfeasibleDimensionError(
            f"{mode} dimensions infeasible: {', '.join(feas.violated)}",
            violated=feas.violated)


def interference_null_basis(matrices, k):
    """Orthonormal basis of the directions invisible to all users but k.

    Stacks every other user's channel matrix and returns the null-space
    basis; with a single user the whole space qualifies.
    """
    others = [h for i, h in enumerate(matrices) if i != k]
    if not others:
        return np.eye(matrices[k].shape[1], dtype=np.complex128)
    return null_space_basis(np.concatenate(others, axis=0))


def bd_precode(realization, stream_counts):
    """Block-diagonalizing precoder/combiner set on the shared full array.

    For each user the channel is projected onto the interference null space
    and the projected (equivalent) channel's top singular vectors supply the
    precoder columns and combiner rows, so every user sees a diagonal link
    with the stored singular values and zero inter-user leakage.
    """
    config = realization.config
    _require_feasible(config, stream_counts, MODE_BD)
    f_blocks, combiners, gains = [], [], []
    for k, n in enumerate(stream_counts):
        basis = interference_null_basis(realization.matrices, k)
        eq = svd(realization.matrices[k] @ basis)
        f_blocks.append(basis @ eq.v[:, :n])
        combiners.append(eq.u[:, :n].conj().T)
        gains.append(eq.singular_values[:n].copy())
    return PrecoderSet(mode=MODE_BD, f_blocks=tuple(f_blocks),
                       combiners=tuple(combiners),
                       singular_values=tuple(gains)).validate()


def subarray_precode(realization, seed=0):
    """Per-user-block precoder set: null-space projection times a random
    semi-unitary rotation inside each user's own antenna block.

    Stream counts equal receive-antenna counts in this mode, and the
    combiner is the identity (this baseline designs none), so detection
    operates on the raw receive vector.  The random rotation makes the
    effective channel gain a matter of luck; see the rank analytics for how
    much smaller the usable subspace is than in ``"bd"`` mode.
    """
    config = realization.config
    _require_feasible(config, config.users, MODE_SUBARRAY)
    block = config.n_tx // config.n_users
    rng = rng_from(seed)
    f_blocks, combiners, gains = [], [], []
    for k, n in enumerate(config.users):
        cols = slice(k * block, (k + 1) * block)
        others = [h[:, cols] for i, h in enumerate(realization.matrices) if i != k]
        if others:
            basis = null_space_basis(np.concatenate(others, axis=0))
        else:
            basis = np.eye(block, dtype=np.complex128)
        rotation = random_semi_unitary(basis.shape[1], n, rng)
        f = np.zeros((config.n_tx, n), dtype=np.complex128)
        f[cols] = basis @ rotation
        f_blocks.append(f)
        combiners.append(np.eye(n, dtype=np.complex128))
        gains.append(np.linalg.svd(realization.matrices[k] @ f, compute_uv=False))
    return PrecoderSet(mode=MODE_SUBARRAY, f_blocks=tuple(f_blocks),
                       combiners=tuple(combiners),
                       singular_values=tuple(gains)).validate()


def effective_channel(pset, matrices, k):
    """Combined effective link of user k: combiner @ channel @ precoder."""
    return pset.combiners[k] @ matrices[k] @ pset.f_blocks[k]


def mui_residual(pset, matrices):
    """Largest normalized cross-user leakage ||H_k F_i|| / (||H_k|| ||F_i||)."""
    worst = 0.0
    for k, h in enumerate(matrices):
        for i, f in enumerate(pset.f_blocks):
            if i == k:
                continue
            denom = np.linalg.norm(h) * np.linalg.norm(f)
            worst = max(worst, float(np.linalg.norm(h @ f) / denom))
    return worst


def null_dim(config, stream_counts, mode, k):
    """Closed-form dimension of user k's interference-free transmit subspace."""
    _require_feasible(config, stream_counts, mode)
    others = config.n_rx_total - config.users[k]
    if mode == MODE_BD:
        return config.n_tx - others
    return config.n_tx // config.n_users - others


def max_users(mode, n_tx, n_rx_user):
    """Largest feasible user count for identical n_rx_user-antenna users.

    The shared-array bound is linear in the antenna count; the subarray
    bound only grows with its square root, which is the dimensional argument
    against the per-user-block design.
    """
    if n_tx < 1 or n_rx_user < 1:
        raise ConfigError("antenna counts must be >= 1")
    if mode == MODE_BD:
        return n_tx // n_rx_user
    if mode == MODE_SUBARRAY:
        return math.isqrt(n_tx // n_rx_user)
    raise ConfigError(f"unknown precoder mode {mode!r}")


def _pairs(m):
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _unpairs(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows],
                    dtype=np.complex128)


def to_json(pset):
    """Serialize a precoder set (mode plus per-user [re, im] matrices)."""
    return json.dumps({
        "mode": pset.mode,
        "f_blocks": [_pairs(f) for f in pset.f_blocks],
        "combiners": [_pairs(w) for w in pset.combiners],
        "singular_values": [[float(s) for s in sv] for sv in pset.singular_values],
    }, indent=1)


def from_json(text):
    """Load and re-validate a precoder set serialized by :func:`to_json`."""
    doc = json.loads(text)
    return PrecoderSet(
        mode=doc["mode"],
        f_blocks=tuple(_unpairs(f) for f in doc["f_blocks"]),
        combiners=tuple(_unpairs(w) for w in doc["combiners"]),
        singular_values=tuple(np.array(sv) for sv in doc["singular_values"]),
    ).validate()
