"""Spectral profiles, error metrics, and evaluable error bounds.

This module is the single source of truth for every error number the
package reports: projection residuals (exact and estimated), the
regularized-spectral-approximation certifier, and closed-form evaluators
for the error bounds that the sketched power method is expected to meet.
Bound evaluations are returned as :class:`BoundReport` rows so the
constants actually used are recorded next to the verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.special import logsumexp

from .linalg import as_matrix, frobenius_norm
from .power import choose_q
from .sketching import _rng

_CERTIFIER_MAX_ROWS = 2048  # whitening needs a dense m-by-m eigendecomposition


@dataclass(frozen=True)
class SpectralProfile:
    """Descending nonnegative spectrum of a matrix plus its shape.

    ``values`` holds singular values, or eigenvalues when built from a psd
    matrix; every bound evaluator consumes one of these.
    """

    values: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("profile values must be a non-empty 1-D sequence")
        if np.any(vals < 0.0) or np.any(np.diff(vals) > 0.0):
            raise ValueError("profile values must be sorted descending and nonnegative")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    @classmethod
    def from_matrix(cls, a) -> "SpectralProfile":
        """Singular-value profile of a dense matrix (full SVD)."""
        a = as_matrix(a, "a")
        return cls(values=sla.svdvals(a), shape=a.shape)

    @classmethod
    def from_psd(cls, a, tol: float = 1e-8) -> "SpectralProfile":
        """Eigenvalue profile of a symmetric psd matrix, clamped at zero."""
        a = as_matrix(a, "a")
        w = np.linalg.eigvalsh((a + a.T) / 2.0)
        norm = np.abs(w).max()
        if norm > 0.0 and w.min() < -tol * norm:
            raise ValueError(f"matrix is not psd: min eigenvalue {w.min():.3e}")
        return cls(values=np.clip(w[::-1], 0.0, None), shape=a.shape)


@dataclass
class BoundReport:
    """One evaluated bound: measured quantity vs right-hand side.

    ``holds`` is always ``measured <= rhs``.  ``params`` records every
    constant that entered the evaluation (k, l, eps, q, regularization
    levels, calibrated multipliers), so a report is a self-contained row.
    """

    name: str
    rhs: float
    measured: float
    params: dict[str, float] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.measured <= self.rhs

    def as_row(self) -> dict:
        """Flat dict form, one CSV/JSON row."""
        row = {
            "name": self.name,
            "measured": self.measured,
            "rhs": self.rhs,
            "holds": self.holds,
        }
        row.update({str(k): v for k, v in sorted(self.params.items())})
        return row


def regularization_level(profile: SpectralProfile, k: int) -> float:
    """Natural regularization level at rank ``k``: (1/k) * sum_{i>k} v_i^2.

    Zero when ``k`` reaches the profile length (empty tail).
    """
    if not 1 <= k <= len(profile):
        raise ValueError(f"k must be in [1, {len(profile)}], got {k}")
    tail = profile.values[k:]
    return float(np.dot(tail, tail) / k)


def certify_spectral_approx(a, a_sketched, lam: float, eps: float) -> BoundReport:
    """Certify that ``a_sketched`` is a lam-regularized eps-spectral approximation of ``a``.

    Measures the whitened sketching error

        || (a a.T + lam I)^(-1/2) (a_sketched a_sketched.T - a a.T) (a a.T + lam I)^(-1/2) ||

    which is at most ``eps`` exactly when the two-sided Loewner sandwich
    (1 +- eps)(a a.T + lam I) around a_sketched a_sketched.T + lam I holds.
    Desk-scale only: the whitening is a dense m-by-m eigendecomposition.
    """
    a = as_matrix(a, "a")
    a_sketched = as_matrix(a_sketched, "a_sketched")
    if a.shape[0] != a_sketched.shape[0]:
        raise ValueError(
            f"row mismatch: a has {a.shape[0]} rows, sketched has {a_sketched.shape[0]}"
        )
    if lam < 0.0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if eps < 0.0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    m = a.shape[0]
    if m > _CERTIFIER_MAX_ROWS:
        raise ValueError(
            f"certifier is desk-scale only (m <= {_CERTIFIER_MAX_ROWS}); "
            f"got m={m} -- truncate or subsample the input"
        )
    gram = a @ a.T
    w, v = sla.eigh(gram)
    w = np.clip(w, 0.0, None)
    if lam == 0.0 and w.min() <= w.max() * m * np.finfo(np.float64).eps:
        raise ValueError("lam=0 with singular a a.T: whitening is undefined")
    inv_sqrt = (v / np.sqrt(w + lam)) @ v.T
    err = a_sketched @ a_sketched.T - gram
    whitened = inv_sqrt @ err @ inv_sqrt
    whitened = (whitened + whitened.T) / 2.0
    measured = float(np.abs(np.linalg.eigvalsh(whitened)).max())
    return BoundReport(
        name="regularized-spectral-approximation",
        rhs=float(eps),
        measured=measured,
        params={"lambda": float(lam), "eps": float(eps), "m": float(m), "r": float(a_sketched.shape[1])},
    )


def _check_orthonormal(q_basis, tol: float = 1e-6) -> np.ndarray:
    q_basis = as_matrix(q_basis, "q_basis")
    dev = np.abs(q_basis.T @ q_basis - np.eye(q_basis.shape[1])).max()
    if dev > tol:
        raise ValueError(f"Q is not orthonormal (deviation {dev:.3e})")
    return q_basis


def projection_residuals(a, q_basis) -> tuple[float, float]:
    """Exact (spectral, Frobenius) norms of ``a - Q Q.T a``."""
    a = as_matrix(a, "a")
    q_basis = _check_orthonormal(q_basis)
    if q_basis.shape[0] != a.shape[0]:
        raise ValueError("Q and a must have the same number of rows")
    resid = a - q_basis @ (q_basis.T @ a)
    return float(sla.svdvals(resid)[0]), frobenius_norm(resid)


def estimate_spectral_norm(
    a, tol: float = 1e-6, block: int = 8, max_iter: int = 1000, seed: int = 0
) -> float:
    """Spectral norm of ``a`` by seeded block power iteration.

    Iterates a small orthonormal block under ``a.T a`` and stops when the
    leading Ritz value changes by less than ``tol`` relative.  Deterministic
    for a fixed seed.  Intended for benchmark loops where a full SVD per
    iterate would dominate the timings.
    """
    a = as_matrix(a, "a")
    block = min(block, min(a.shape))
    v = _rng(seed).standard_normal((a.shape[1], block))
    v, _ = np.linalg.qr(v)
    estimate = 0.0
    for _ in range(max_iter):
        u = a @ v
        s = float(sla.svdvals(u)[0])
        if s == 0.0:
            return 0.0
        v = a.T @ u
        v, _ = np.linalg.qr(v)
        if abs(s - estimate) <= tol * s:
            return s
        estimate = s
    return float(estimate)


def estimated_projection_residuals(
    a, q_basis, tol: float = 1e-6, seed: int = 0
) -> tuple[float, float]:
    """(spectral, Frobenius) residual norms with the spectral part estimated.

    Same contract as :func:`projection_residuals` but the spectral norm
    comes from :func:`estimate_spectral_norm` (power iteration at relative
    tolerance ``tol``) instead of a full SVD.
    """
    a = as_matrix(a, "a")
    q_basis = _check_orthonormal(q_basis)
    resid = a - q_basis @ (q_basis.T @ a)
    return estimate_spectral_norm(resid, tol=tol, seed=seed), frobenius_norm(resid)


def approximation_residuals(a, approx) -> tuple[float, float]:
    """Exact (spectral, Frobenius) norms of ``a - approx``."""
    a = as_matrix(a, "a")
    approx = as_matrix(approx, "approx")
    if a.shape != approx.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {approx.shape}")
    resid = a - approx
    return float(sla.svdvals(resid)[0]), frobenius_norm(resid)


def estimated_approximation_residuals(
    a, approx, tol: float = 1e-6, seed: int = 0
) -> tuple[float, float]:
    """Like :func:`approximation_residuals` with the spectral norm estimated."""
    a = as_matrix(a, "a")
    approx = as_matrix(approx, "approx")
    if a.shape != approx.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {approx.shape}")
    resid = a - approx
    return estimate_spectral_norm(resid, tol=tol, seed=seed), frobenius_norm(resid)


def approximation_error_bound(
    profile: SpectralProfile, k: int, l: int, eps: float, squared: bool = True
) -> float:
    """Predicted approximation error (1+eps) * v[k+1] + (eps/l) * tail(l).

    With ``squared=True`` (singular-value profiles) the profile entries are
    squared and the value bounds the squared residual norm; with
    ``squared=False`` (eigenvalue profiles of psd inputs) the entries are
    used as-is and the value bounds the unsquared residual.
    """
    if not 1 <= k <= l <= len(profile):
        raise ValueError(
            f"need 1 <= k <= l <= {len(profile)}, got k={k}, l={l}"
        )
    if eps < 0.0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    vals = profile.values**2 if squared else profile.values
    return float((1.0 + eps) * vals[k] + eps / l * vals[l:].sum())


def gaussian_rangefinder_bound(profile: SpectralProfile, k: int) -> tuple[float, float]:
    """Squared-error bounds for the unpowered Gaussian range finder at rank ``k``.

    Returns ``((2/k) * tail, 4 * tail)`` with ``tail = sum_{i>k} v_i^2``:
    the squared spectral and squared Frobenius residual bounds.
    """
    if not 1 <= k < len(profile):
        raise ValueError(f"k must be in [1, {len(profile) - 1}], got {k}")
    tail = float(np.square(profile.values[k:]).sum())
    return 2.0 / k * tail, 4.0 * tail


def powered_rangefinder_bound(
    lambda1: float,
    lambda2: float,
    eps: float,
    q: int,
    profile: SpectralProfile,
) -> tuple[float, float]:
    """Squared-error bounds for the powered, doubly sketched range finder.

    Given the regularization levels of the two sketching stages,

    * squared spectral:  (1 + 2 eps) * ((2 lambda2)^(1/(2q+1)) + eps lambda1)
    * squared Frobenius: min over r of
      8 r (lambda2^(1/(2q+1)) + lambda1) + sum_{i>r} v_i^2,
      minimized by exhaustive scan over r.
    """
    if lambda1 < 0.0 or lambda2 < 0.0:
        raise ValueError("regularization levels must be >= 0")
    if not 0.0 <= eps <= 0.5:
        raise ValueError(f"eps must be in [0, 1/2], got {eps}")
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    root = 1.0 / (2 * q + 1)
    spectral_sq = (1.0 + 2.0 * eps) * ((2.0 * lambda2) ** root + eps * lambda1)
    level = lambda2**root + lambda1
    sq = np.square(profile.values)
    # tails[r] = sum_{i > r} v_i^2 for r = 0..len
    tails = np.concatenate((np.cumsum(sq[::-1])[::-1], [0.0]))
    r_grid = np.arange(len(profile) + 1)
    frob_sq = float((8.0 * r_grid * level + tails).min())
    return float(spectral_sq), frob_sq


def powered_tail_level(sketched_profile: SpectralProfile, k: int, q: int) -> float:
    """Effective tail level of the powered sketch spectrum at rank ``k``.

    Computes ((2/k) * sum_{i>k} v_i^(2(2q+1)))^(1/(2q+1)) in the log
    domain, so the high powers that arise for q in the tens do not
    overflow.
    """
    if not 1 <= k <= len(sketched_profile):
        raise ValueError(f"k must be in [1, {len(sketched_profile)}], got {k}")
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    t = 2 * q + 1
    tail = sketched_profile.values[k:]
    tail = tail[tail > 0.0]
    if tail.size == 0:
        return 0.0
    log_sum = logsumexp(2.0 * t * np.log(tail)) + np.log(2.0 / k)
    return float(np.exp(log_sum / t))


def powered_tail_report(
    sketched_profile: SpectralProfile,
    k: int,
    q: int,
    sigma_kp1: float,
    lambda1: float,
    eps: float,
) -> BoundReport:
    """Check the powered-tail estimate against its predicted ceiling.

    The measured side is :func:`powered_tail_level` of the sketched
    spectrum; the right-hand side is (1 + 4 eps) sigma_{k+1}^2 + 2 lambda1
    eps in terms of the unsketched matrix.  The prediction is valid when
    the sketch is a certified lambda1-regularized eps-spectral
    approximation and q is at least ``choose_q(eps, rank)``; ``q`` below
    that threshold is rejected.
    """
    if sigma_kp1 < 0.0 or lambda1 < 0.0:
        raise ValueError("sigma_kp1 and lambda1 must be >= 0")
    if not 0.0 < eps <= 0.5:
        raise ValueError(f"eps must be in (0, 1/2], got {eps}")
    vals = sketched_profile.values
    cutoff = vals[0] * max(sketched_profile.shape) * np.finfo(np.float64).eps
    rank = int(np.count_nonzero(vals > cutoff))
    q_min = choose_q(eps, max(rank, 1))
    if q < q_min:
        raise ValueError(f"q={q} below choose_q(eps, rank)={q_min}")
    measured = powered_tail_level(sketched_profile, k, q)
    rhs = (1.0 + 4.0 * eps) * sigma_kp1**2 + 2.0 * lambda1 * eps
    return BoundReport(
        name="powered-tail-level",
        rhs=float(rhs),
        measured=measured,
        params={
            "k": float(k),
            "q": float(q),
            "eps": float(eps),
            "lambda1": float(lambda1),
            "sigma_kp1": float(sigma_kp1),
            "rank": float(rank),
        },
    )


def relative_error(residual_spectral: float, profile: SpectralProfile, k: int) -> float:
    """Relative spectral error ``residual / v[k+1] - 1`` of a rank-k approximation."""
    if not 1 <= k < len(profile):
        raise ValueError(f"k must be in [1, {len(profile) - 1}], got {k}")
    sigma = float(profile.values[k])
    if sigma <= 0.0:
        raise ValueError("reference singular value sigma_{k+1} is zero")
    return float(residual_spectral) / sigma - 1.0


__all__ = [
    "BoundReport",
    "SpectralProfile",
    "approximation_error_bound",
    "approximation_residuals",
    "certify_spectral_approx",
    "estimate_spectral_norm",
    "estimated_approximation_residuals",
    "estimated_projection_residuals",
    "gaussian_rangefinder_bound",
    "powered_rangefinder_bound",
    "powered_tail_level",
    "powered_tail_report",
    "projection_residuals",
    "regularization_level",
    "relative_error",
]
