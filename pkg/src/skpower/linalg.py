"""Dense matrix kernels: orthonormalization, thin SVD, pseudoinverse, norms.

Everything operates on 2-D float64 numpy arrays.  ``as_matrix`` is the single
entry point that enforces the operand contract (two-dimensional, non-empty,
all entries finite); public operations validate their inputs through it.
Decompositions are delegated to LAPACK via scipy, with rank handling per the
conventions documented on each function.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg as sla


class SvdResult(NamedTuple):
    """Thin SVD ``A = U @ diag(sigma) @ V.T``.

    ``U`` is m-by-p and ``V`` is n-by-p with orthonormal columns, ``sigma``
    is descending and nonnegative, p = min(m, n).
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a non-empty, finite, 2-D float64 array."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={out.ndim}")
    if out.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def matmul(a, b) -> np.ndarray:
    """Matrix product ``a @ b`` with an explicit dimension check."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def _default_rel_tol(shape) -> float:
    # max(rows, cols) * machine epsilon, applied relative to the largest
    # singular value / pivot; the standard numerical-rank convention.
    return max(shape) * np.finfo(np.float64).eps


def orthonormalize(y, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis for the range of ``y``.

    Uses QR with column pivoting and drops trailing columns whose pivot
    magnitude falls below ``tol`` times the largest pivot, so the returned
    basis has exactly the numerical rank of ``y`` at that tolerance (possibly
    fewer columns than ``y``).

    Parameters
    ----------
    y : array_like, shape (m, c)
        Non-empty matrix.  Raises ``ValueError`` if all entries are zero.
    tol : float, optional
        Relative pivot threshold.  Defaults to ``max(m, c) * eps``.
    """
    y = as_matrix(y, "y")
    if tol is None:
        tol = _default_rel_tol(y.shape)
    q, r, _ = sla.qr(y, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    dmax = diag.max() if diag.size else 0.0
    if dmax == 0.0:
        raise ValueError("cannot orthonormalize an all-zero matrix")
    rank = int(np.count_nonzero(diag >= tol * dmax))
    return np.ascontiguousarray(q[:, :rank])


def thin_svd(a) -> SvdResult:
    """Thin (economy) SVD of ``a`` with descending singular values."""
    a = as_matrix(a, "a")
    u, s, vh = sla.svd(a, full_matrices=False)
    return SvdResult(U=u, sigma=s, V=vh.T.copy())


def pinv(m, rel_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via the thin SVD.

    Singular values at or below ``rel_tol * sigma_max`` are treated as zero;
    ``rel_tol`` defaults to ``max(rows, cols) * eps``.
    """
    m = as_matrix(m, "m")
    if rel_tol is None:
        rel_tol = _default_rel_tol(m.shape)
    u, s, v = thin_svd(m)
    if s[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]))
    keep = s > rel_tol * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (v * inv) @ u.T


def spectral_norm(a) -> float:
    """Largest singular value of ``a`` (exact, via LAPACK singular values)."""
    a = as_matrix(a, "a")
    return float(sla.svdvals(a)[0])


def frobenius_norm(a) -> float:
    """Frobenius norm of ``a``."""
    return float(np.linalg.norm(as_matrix(a, "a")))


def norms(a) -> tuple[float, float]:
    """Return ``(spectral, frobenius)`` norms of ``a``."""
    a = as_matrix(a, "a")
    return spectral_norm(a), frobenius_norm(a)


def psd_sqrt(a, sym_tol: float = 1e-10, eig_tol: float = 1e-10) -> np.ndarray:
    """Symmetric psd square root ``B`` with ``B @ B == a``.

    ``a`` must be symmetric within ``sym_tol`` (relative to its largest
    entry) and have eigenvalues no smaller than ``-eig_tol * ||a||``;
    eigenvalues in that tolerance band are clamped to zero.
    """
    a = as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"psd_sqrt needs a square matrix, got {a.shape}")
    scale = np.abs(a).max()
    if scale == 0.0:
        return np.zeros_like(a)
    if np.abs(a - a.T).max() > sym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    w, v = sla.eigh((a + a.T) / 2.0)
    norm = np.abs(w).max()
    if w.min() < -eig_tol * norm:
        raise ValueError(
            f"matrix is not psd: min eigenvalue {w.min():.3e} < {-eig_tol * norm:.3e}"
        )
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.T
    return (root + root.T) / 2.0
