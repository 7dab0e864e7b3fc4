"""Sketched and classical power-method algorithms.

Three constructions, all driven by one parameter record
(:class:`RangeFinderSpec`):

* :func:`range_finder_sketched` -- orthonormal Q spanning the dominant
  directions of A, obtained by power iteration on the sketch ``A @ S``
  started from a Gaussian block; :func:`range_finder_classical` is the
  same iteration on A itself.
* :func:`lowrank_factorize` -- generalized Nystrom factorization A ~= Y X,
  where Y is the powered sketch block and X solves the sketched regression
  ``min ||Y X - A||`` through a second, independent sketch.
* :func:`nystrom_psd` -- psd Nystrom approximation A ~= C W^+ C.T built
  from a large intermediate Nystrom pair, with the power iteration running
  on the small core matrix.

Seeds: the primary sketch uses substream 0 of ``spec.seed``, the Gaussian
start block substream 1, and the secondary regression sketch substream 2,
so runs are reproducible and the streams are mutually independent.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, orthonormalize, pinv, thin_svd, SvdResult
from .sketching import make_sketch, substream


def choose_q(eps: float, m_hat: int) -> int:
    """Power-iteration count ceil(ln(2*m_hat) / (2*eps)).

    ``m_hat`` is an upper bound on the rank of the sketched matrix (use
    min(m, r1) when the rank is unknown).  Enough iterations for the
    powered tail to flatten to within a (1+O(eps)) factor of its largest
    term.
    """
    if not 0.0 < eps <= 0.5:
        raise ValueError(f"eps must be in (0, 1/2], got {eps}")
    if m_hat < 1:
        raise ValueError(f"m_hat must be >= 1, got {m_hat}")
    return math.ceil(math.log(2.0 * m_hat) / (2.0 * eps))


@dataclass(frozen=True)
class RangeFinderSpec:
    """Full parameterization of the sketched power-method algorithms.

    ``k``: target rank; ``l``: intermediate rank (k <= l) controlling the
    additive error tail; ``r1``: primary sketch size; ``r2``: block size of
    the Gaussian start (>= k, commonly 2k); ``q``: power-iteration count;
    ``eps``: nominal accuracy in (0, 1/2]; ``stabilized``: re-orthonormalize
    between iterations (recommended for q more than a few).

    ``s2_kind``/``s2_r`` configure the secondary regression sketch used by
    :func:`lowrank_factorize` (default: same family and size as the primary
    sketch).  ``omega_kind`` is an ablation escape hatch: the start block is
    Gaussian by default and the theory only covers that choice.
    """

    k: int
    l: int
    r1: int
    r2: int
    q: int
    eps: float
    sketch_kind: str = "countsketch"
    seed: int = 0
    stabilized: bool = True
    s: int = 1
    s2_kind: str | None = None
    s2_r: int | None = None
    omega_kind: str = "gaussian"

    def validate(self, m: int, n: int) -> None:
        if not 1 <= self.k <= self.l <= min(m, n):
            raise ValueError(
                f"need 1 <= k <= l <= min(m, n); got k={self.k}, l={self.l}, "
                f"min(m, n)={min(m, n)}"
            )
        if self.r2 < self.k:
            raise ValueError(f"r2 must be >= k, got r2={self.r2}, k={self.k}")
        if self.q < 0:
            raise ValueError(f"q must be >= 0, got {self.q}")
        if not 0.0 < self.eps <= 0.5:
            raise ValueError(f"eps must be in (0, 1/2], got {self.eps}")
        if self.r1 < 1:
            raise ValueError(f"r1 must be >= 1, got {self.r1}")


@dataclass
class FactorizationResult:
    """Low-rank factors ``Y`` (m x r2) and ``X`` (r2 x n), plus stage times."""

    Y: np.ndarray
    X: np.ndarray
    elapsed: dict[str, float] = field(default_factory=dict)


@dataclass
class NystromResult:
    """Nystrom factors ``C`` (n x r2) and psd core ``W`` (r2 x r2), plus stage times."""

    C: np.ndarray
    W: np.ndarray
    elapsed: dict[str, float] = field(default_factory=dict)


def power_iterate(atil, omega, q: int, stabilized: bool = True) -> np.ndarray:
    """Compute a block with the column span of ``(atil @ atil.T)^q @ atil @ omega``.

    With ``stabilized=False`` the product is returned literally, built by
    alternating right/left multiplications (the Gram matrix is never
    formed).  With ``stabilized=True`` the block is re-orthonormalized
    after each application pair, which keeps the same span in exact
    arithmetic while avoiding the catastrophic column collapse of high
    powers.
    """
    atil = as_matrix(atil, "atil")
    omega = as_matrix(omega, "omega")
    if atil.shape[1] != omega.shape[0]:
        raise ValueError(f"dimension mismatch: {atil.shape} vs omega {omega.shape}")
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    y = atil @ omega
    for _ in range(q):
        if stabilized:
            y = orthonormalize(y)
        y = atil @ (atil.T @ y)
    return y


def _draw_omega(kind: str, rows: int, cols: int, seed: int) -> np.ndarray:
    return make_sketch(kind, rows, cols, seed).densify()


def range_finder_sketched(a, spec: RangeFinderSpec) -> np.ndarray:
    """Orthonormal range finder from power iteration on the sketch ``a @ S``.

    Returns Q with at most ``spec.r2`` orthonormal columns such that
    Q Q.T a captures the dominant part of ``a``'s spectrum.
    """
    a = as_matrix(a, "a")
    m, n = a.shape
    spec.validate(m, n)
    sketch = make_sketch(spec.sketch_kind, n, spec.r1, substream(spec.seed, 0), s=spec.s)
    omega = _draw_omega(spec.omega_kind, spec.r1, spec.r2, substream(spec.seed, 1))
    atil = sketch.apply_right(a)
    y = power_iterate(atil, omega, spec.q, stabilized=spec.stabilized)
    return orthonormalize(y)


def range_finder_classical(
    a, k: int, r2: int, q: int, seed: int, stabilized: bool = True
) -> np.ndarray:
    """Classical range finder: power iteration on ``a`` itself.

    Equivalent to :func:`range_finder_sketched` with an identity sketch and
    the same start-block seed.
    """
    a = as_matrix(a, "a")
    m, n = a.shape
    spec = RangeFinderSpec(
        k=k,
        l=min(m, n),
        r1=n,
        r2=r2,
        q=q,
        eps=0.5,
        sketch_kind="identity",
        seed=seed,
        stabilized=stabilized,
    )
    return range_finder_sketched(a, spec)


def randsvd(a, q_basis) -> SvdResult:
    """Randomized SVD assembly: project onto Q, decompose, rotate back.

    Given an orthonormal basis Q, computes B = Q.T a, its thin SVD
    (U~, sigma, V), and returns (Q U~, sigma, V), so that
    U diag(sigma) V.T == Q Q.T a up to rounding.
    """
    a = as_matrix(a, "a")
    q_basis = as_matrix(q_basis, "q_basis")
    if q_basis.shape[0] != a.shape[0]:
        raise ValueError(
            f"dimension mismatch: Q has {q_basis.shape[0]} rows, a has {a.shape[0]}"
        )
    ortho_err = np.abs(q_basis.T @ q_basis - np.eye(q_basis.shape[1])).max()
    if ortho_err > 1e-6:
        raise ValueError(f"Q is not orthonormal (deviation {ortho_err:.3e})")
    b = q_basis.T @ a
    u_small, sigma, v = thin_svd(b)
    return SvdResult(U=q_basis @ u_small, sigma=sigma, V=v)


def lowrank_factorize(a, spec: RangeFinderSpec) -> FactorizationResult:
    """Generalized Nystrom factorization ``a ~= Y @ X``.

    Y is the powered block from the primary sketch; X solves the sketched
    regression ``(S2.T Y)^+ (S2.T a)`` with an independent second sketch on
    the row space, avoiding the dense Q.T a product of randomized SVD.
    """
    a = as_matrix(a, "a")
    m, n = a.shape
    spec.validate(m, n)
    s2_kind = spec.s2_kind or spec.sketch_kind
    s2_r = spec.s2_r or spec.r1

    t0 = time.perf_counter()
    s1 = make_sketch(spec.sketch_kind, n, spec.r1, substream(spec.seed, 0), s=spec.s)
    atil = s1.apply_right(a)
    t_sketch = time.perf_counter()

    omega = _draw_omega(spec.omega_kind, spec.r1, spec.r2, substream(spec.seed, 1))
    y = power_iterate(atil, omega, spec.q, stabilized=spec.stabilized)
    t_power = time.perf_counter()

    s2 = make_sketch(s2_kind, m, s2_r, substream(spec.seed, 2), s=spec.s)
    s2y = s2.apply_left_transpose(y)
    if not np.any(s2y):
        raise ValueError("S2.T Y is numerically rank-zero; regression is undefined")
    x = pinv(s2y) @ s2.apply_left_transpose(a)
    t_reg = time.perf_counter()

    return FactorizationResult(
        Y=y,
        X=x,
        elapsed={
            "sketch": t_sketch - t0,
            "power": t_power - t_sketch,
            "regression": t_reg - t_power,
        },
    )


def _check_psd(a, tol: float = 1e-8) -> None:
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"psd input must be square, got {a.shape}")
    scale = np.abs(a).max()
    if scale == 0.0:
        return
    if np.abs(a - a.T).max() > tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    w = np.linalg.eigvalsh((a + a.T) / 2.0)
    norm = np.abs(w).max()
    if norm > 0.0 and w.min() < -tol * norm:
        raise ValueError(
            f"matrix is not psd: min eigenvalue {w.min():.3e} < {-tol * norm:.3e}"
        )


def nystrom_psd(a, spec: RangeFinderSpec) -> NystromResult:
    """Psd Nystrom approximation ``a ~= C @ pinv(W) @ C.T``.

    Builds the large intermediate pair C~ = a S, W~ = S.T a S, powers the
    start block through the small core (Y = W~^q Omega), and contracts to
    C = C~ Y, W = Y.T W~ Y.  The implied approximation is symmetric psd.
    """
    a = as_matrix(a, "a")
    n = a.shape[0]
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"psd Nystrom needs a square matrix, got {a.shape}")
    _check_psd(a)
    spec.validate(n, n)

    t0 = time.perf_counter()
    sketch = make_sketch(spec.sketch_kind, n, spec.r1, substream(spec.seed, 0), s=spec.s)
    ctil = sketch.apply_right(a)
    wtil = sketch.apply_left_transpose(ctil)
    wtil = (wtil + wtil.T) / 2.0  # kill rounding asymmetry before powering
    t_sketch = time.perf_counter()

    omega = _draw_omega(spec.omega_kind, spec.r1, spec.r2, substream(spec.seed, 1))
    y = omega
    for _ in range(spec.q):
        y = wtil @ y
    t_power = time.perf_counter()

    c = ctil @ y
    w = y.T @ (wtil @ y)
    w = (w + w.T) / 2.0
    t_contract = time.perf_counter()

    return NystromResult(
        C=c,
        W=w,
        elapsed={
            "sketch": t_sketch - t0,
            "power": t_power - t_sketch,
            "contract": t_contract - t_power,
        },
    )
