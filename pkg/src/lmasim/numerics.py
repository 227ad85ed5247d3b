"""Complex dense matrix algebra: SVD, null spaces, random semi-unitary matrices.

All matrices are 2-D ``numpy.ndarray`` of ``complex128``.  Every routine is a
pure function of its inputs (plus an explicit seed where randomness is
involved), so results are reproducible and safe to share across tasks.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InfeasibleDimensionError, NumericalError

#: Default relative tolerance for unitarity / reconstruction checks.
DEFAULT_TOL = 1e-10


def rng_from(seed):
    """Return a ``numpy.random.Generator`` from a seed, passing generators through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derived_seed(*parts):
    """Collapse a tuple of ints/strings into a stable 63-bit seed.

    Hash-based (not an offset scheme), so nearby inputs give unrelated
    streams; used to hand out independent per-task seeds from one master
    seed without coordinating counters.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def as_cmatrix(a, name="matrix"):
    """Validate and return `a` as a finite, nonempty 2-D complex128 array."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be nonempty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise NumericalError(f"{name} contains non-finite entries", shape=arr.shape)
    return arr


@dataclass(frozen=True)
class SvdResult:
    """Full SVD ``a = u @ diag(s) @ v.conj().T`` with square unitary factors.

    ``u`` is m-by-m, ``v`` is n-by-n and ``singular_values`` holds min(m, n)
    nonnegative values in descending order.
    """

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        """Re-multiply the factors; used as the round-trip oracle."""
        m, n = self.u.shape[0], self.v.shape[0]
        sigma = np.zeros((m, n))
        k = len(self.singular_values)
        sigma[:k, :k] = np.diag(self.singular_values)
        return self.u @ sigma @ self.v.conj().T


def svd(a):
    """Full singular value decomposition of a complex matrix.

    Returns an :class:`SvdResult` whose trailing right-singular vectors span
    the null space of `a`.  Raises :class:`NumericalError` if the underlying
    iteration fails to converge.
    """
    arr = as_cmatrix(a)
    try:
        u, s, vh = np.linalg.svd(arr, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for shape {arr.shape}",
                             shape=arr.shape) from exc
    return SvdResult(u=u, singular_values=s, v=vh.conj().T)


def null_space_basis(a):
    """Orthonormal basis of the trailing null directions of a fat matrix.

    For an r-by-c input with c > r, returns the last c - r right-singular
    vectors as a c-by-(c - r) matrix B with ``a @ B ~ 0`` and ``B^H B = I``.
    The column count is fixed by the dimensions, not the numerical rank:
    extra null directions of rank-deficient inputs are not merged in.
    """
    arr = as_cmatrix(a)
    rows, cols = arr.shape
    if cols <= rows:
        raise InfeasibleDimensionError(
            f"null_space_basis needs cols > rows, got {rows}x{cols}")
    v = svd(arr).v
    return np.ascontiguousarray(v[:, rows:])


def random_semi_unitary(m, n, seed):
    """Random m-by-n matrix with orthonormal columns (``B^H B = I_n``).

    Built by QR-orthonormalization of a standard complex Gaussian matrix;
    deterministic for a fixed seed.
    """
    if m < n:
        raise InfeasibleDimensionError(
            f"semi-unitary matrix needs m >= n, got m={m}, n={n}")
    rng = rng_from(seed)
    g = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    q, _ = np.linalg.qr(g)
    return q[:, :n]


def unitarity_residual(b):
    """Frobenius norm of ``B^H B - I``, the semi-unitarity defect."""
    b = np.asarray(b)
    n = b.shape[1]
    return float(np.linalg.norm(b.conj().T @ b - np.eye(n)))
