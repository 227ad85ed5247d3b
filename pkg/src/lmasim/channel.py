"""Geometric narrowband mmWave multiuser channels and imperfect-CSI modeling.

Each user's channel is a sum of ``n_ray`` independent rays with complex
Gaussian gains and uniform-linear-array responses on both ends.  Realizations
carry the ray parameters that produced them, so the matrices can be rebuilt
and the generation audited.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .numerics import rng_from


@dataclass(frozen=True)
class ChannelConfig:
    """Dimensions and randomness of a multiuser channel draw.

    ``users`` lists the receive-antenna count of every user; ``n_ray`` is the
    number of scattering paths; ``spacing_over_lambda`` is the ULA antenna
    spacing in carrier wavelengths (half-wavelength by default).
    """

    n_tx: int
    users: tuple
    n_ray: int = 3
    spacing_over_lambda: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(int(u) for u in self.users))
        if self.n_tx < 1:
            raise ConfigError(f"n_tx must be >= 1, got {self.n_tx}")
        if self.n_ray < 1:
            raise ConfigError(f"n_ray must be >= 1, got {self.n_ray}")
        if len(self.users) < 1 or any(u < 1 for u in self.users):
            raise ConfigError(f"every user needs >= 1 receive antennas, got {self.users}")
        if not self.spacing_over_lambda > 0:
            raise ConfigError("spacing_over_lambda must be > 0")

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_rx_total(self):
        return sum(self.users)


@dataclass(frozen=True)
class IcsiConfig:
    """Additive channel-estimation error: CN(0, sigma_e_sq) per matrix entry."""

    sigma_e_sq: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma_e_sq < 0:
            raise ConfigError("sigma_e_sq must be >= 0")


@dataclass(frozen=True)
class ChannelRealization:
    """Per-user channel matrices plus (when generated, not perturbed) their rays.

    ``gains[k]``, ``theta[k]``, ``phi[k]`` hold the per-ray complex gains and
    the receive/transmit-side angles of user k.  Perturbed realizations carry
    matrices only (``gains is None``): their entries no longer come from rays.
    """

    config: ChannelConfig
    matrices: tuple
    gains: tuple | None = None
    theta: tuple | None = None
    phi: tuple | None = None

    def __post_init__(self):
        for k, h in enumerate(self.matrices):
            expected = (self.config.users[k], self.config.n_tx)
            if h.shape != expected:
                raise DimensionError(
                    f"user {k} matrix has shape {h.shape}, expected {expected}")


def array_response(angle, n, spacing_over_lambda=0.5):
    """Unit-norm ULA response vector: entry i is exp(j*2*pi*(d/lambda)*i*cos(angle))/sqrt(n)."""
    if n < 1:
        raise DimensionError(f"array size must be >= 1, got {n}")
    phase = 2.0 * np.pi * spacing_over_lambda * np.arange(n) * np.cos(angle)
    return (np.exp(1j * phase) / np.sqrt(n)).reshape(n, 1)


def ray_matrix(n_tx, n_rx, n_ray, gains, theta, phi, spacing_over_lambda):
    """Assemble one user's channel from its rays (the generation formula)."""
    h = np.zeros((n_rx, n_tx), dtype=np.complex128)
    for alpha, th, ph in zip(gains, theta, phi):
        a_r = array_response(th, n_rx, spacing_over_lambda)
        a_t = array_response(ph, n_tx, spacing_over_lambda)
        h += alpha * (a_r @ a_t.conj().T)
    return np.sqrt(n_tx * n_rx / n_ray) * h


def generate(config):
    """Draw a multiuser channel realization; deterministic for a fixed seed.

    Ray gains are CN(0,1); departure/arrival angles are i.i.d. uniform on
    [0, pi), which covers the full cos range without mirror double-counting.
    """
    rng = rng_from(config.seed)
    matrices, gains, thetas, phis = [], [], [], []
    for n_rx in config.users:
        alpha = (rng.standard_normal(config.n_ray)
                 + 1j * rng.standard_normal(config.n_ray)) / np.sqrt(2.0)
        theta = rng.uniform(0.0, np.pi, size=config.n_ray)
        phi = rng.uniform(0.0, np.pi, size=config.n_ray)
        h = ray_matrix(config.n_tx, n_rx, config.n_ray, alpha, theta, phi,
                       config.spacing_over_lambda)
        matrices.append(h)
        gains.append(alpha)
        thetas.append(theta)
        phis.append(phi)
    return ChannelRealization(config=config, matrices=tuple(matrices),
                              gains=tuple(gains), theta=tuple(thetas),
                              phi=tuple(phis))


def rebuild_matrix(realization, k):
    """Recompute user k's matrix from its stored rays (audit oracle)."""
    if realization.gains is None:
        raise ConfigError("realization carries no rays (perturbed or loaded without them)")
    cfg = realization.config
    return ray_matrix(cfg.n_tx, cfg.users[k], cfg.n_ray, realization.gains[k],
                      realization.theta[k], realization.phi[k],
                      cfg.spacing_over_lambda)


def perturb(realization, icsi):
    """Add CN(0, sigma_e_sq) estimation error to every channel entry.

    ``sigma_e_sq == 0`` returns an identical copy (same matrices, bit-exact).
    The result models the *estimate* used for precoding and training, while
    transmission keeps using the true realization.
    """
    if icsi.sigma_e_sq == 0.0:
        return ChannelRealization(config=realization.config,
                                  matrices=realization.matrices)
    rng = rng_from(icsi.seed)
    scale = np.sqrt(icsi.sigma_e_sq / 2.0)
    perturbed = []
    for h in realization.matrices:
        noise = scale * (rng.standard_normal(h.shape)
                         + 1j * rng.standard_normal(h.shape))
        perturbed.append(h + noise)
    return ChannelRealization(config=realization.config, matrices=tuple(perturbed))


def _matrix_to_pairs(h):
    return [[[float(z.real), float(z.imag)] for z in row] for row in h]


def _pairs_to_matrix(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows],
                    dtype=np.complex128)


def to_json(realization):
    """Serialize a realization to a JSON document (config + [re, im] matrices).

    Floats are emitted with Python's shortest round-trip repr, so loading the
    document reproduces the stored values bit-exactly.
    """
    cfg = realization.config
    doc = {
        "config": {
            "n_tx": cfg.n_tx,
            "users": list(cfg.users),
            "n_ray": cfg.n_ray,
            "spacing_over_lambda": cfg.spacing_over_lambda,
            "seed": cfg.seed,
        },
        "matrices": [_matrix_to_pairs(h) for h in realization.matrices],
    }
    if realization.gains is not None:
        doc["rays"] = [
            {
                "gains": [[float(a.real), float(a.imag)] for a in realization.gains[k]],
                "theta": [float(t) for t in realization.theta[k]],
                "phi": [float(p) for p in realization.phi[k]],
            }
            for k in range(cfg.n_users)
        ]
    return json.dumps(doc, indent=1)


def from_json(text):
    """Load a realization serialized by :func:`to_json`."""
    doc = json.loads(text)
    cfg = ChannelConfig(**doc["config"])
    matrices = tuple(_pairs_to_matrix(rows) for rows in doc["matrices"])
    if "rays" in doc:
        gains = tuple(np.array([complex(re, im) for re, im in r["gains"]])
                      for r in doc["rays"])
        theta = tuple(np.array(r["theta"]) for r in doc["rays"])
        phi = tuple(np.array(r["phi"]) for r in doc["rays"])
        return ChannelRealization(config=cfg, matrices=matrices, gains=gains,
                                  theta=theta, phi=phi)
    return ChannelRealization(config=cfg, matrices=matrices)
