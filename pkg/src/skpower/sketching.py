"""Seeded randomized sketching operators with fast apply paths.

Four sketch families are provided, all realized as immutable operators
mapping an ``n``-dimensional coordinate space down to ``r`` dimensions:

``gaussian``
    i.i.d. N(0, 1/r) entries.
``sign``
    i.i.d. +-1/sqrt(r) entries (the sub-Gaussian sign variant).
``countsketch``
    sparse matrix with exactly ``s`` non-zeros of +-1/sqrt(s) per row, at
    distinct column positions drawn without replacement; applying it costs
    O(nnz(A) * s) and never materializes a dense n-by-r matrix.
``srht``
    subsampled randomized Hadamard transform (1/sqrt(r)) * D * H * I[:, T]
    with a random sign diagonal D, an unnormalized Hadamard matrix H of the
    next power-of-two dimension (inputs are zero-padded internally), and a
    uniformly random size-r column subset T; applied via the O(n log n)
    butterfly, never materialized.

An extra ``identity`` family (square, r == n) is included as a baseline
hook: power iteration on an identity sketch is exactly the classical,
unsketched method.

Operators are deterministic functions of ``(kind, n, r, seed)``.  Seeds for
the several independent operators used inside one algorithm are derived from
a root seed with :func:`substream`.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .linalg import as_matrix

SKETCH_KINDS = ("gaussian", "sign", "countsketch", "srht", "identity")

_DENSIFY_CAP = 10**7  # desk-scale guard for explicit n-by-r materialization

_MASK64 = (1 << 64) - 1


def substream(seed: int, *indices: int) -> int:
    """Derive an independent 64-bit seed from a root seed and stream indices.

    Deterministic: the same ``(seed, indices)`` always yields the same
    value.  Used to split one root seed into the independent streams for
    S1, S2, Omega, per-trial seeds, and so on.
    """
    entropy = [int(seed) & _MASK64] + [int(i) & _MASK64 for i in indices]
    return int(np.random.SeedSequence(entropy=entropy).generate_state(1, np.uint64)[0])


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=[int(seed) & _MASK64]))


def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def fwht(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along ``axis``.

    Equivalent to multiplying by the Sylvester-ordered Hadamard matrix of
    size ``a.shape[axis]`` (which must be a power of two).  O(n log n) per
    transformed fiber.
    """
    a = np.asarray(a, dtype=np.float64)
    if axis == 1:
        return fwht(a.T, axis=0).T
    if axis != 0:
        raise ValueError("axis must be 0 or 1")
    n = a.shape[0]
    if n & (n - 1):
        raise ValueError(f"transform length {n} is not a power of two")
    out = a.copy()
    cols = out.shape[1] if out.ndim == 2 else 1
    out = out.reshape(n, cols)
    h = 1
    while h < n:
        out = out.reshape(n // (2 * h), 2, h, cols)
        top = out[:, 0] + out[:, 1]
        bot = out[:, 0] - out[:, 1]
        out = np.stack((top, bot), axis=1).reshape(n, cols)
        h *= 2
    return out.reshape(a.shape)


class SketchOperator:
    """Immutable seeded linear map from ``n`` to ``r`` coordinates.

    Construct with :func:`make_sketch`.  ``apply_right(A)`` computes
    ``A @ S`` and ``apply_left_transpose(A)`` computes ``S.T @ A`` through
    the family's fast path; ``densify()`` returns the explicit n-by-r
    matrix (the oracle the fast paths are tested against).
    """

    def __init__(self, kind: str, n: int, r: int, seed: int, s: int | None = None):
        if kind not in SKETCH_KINDS:
            raise ValueError(f"unknown sketch kind {kind!r}, expected one of {SKETCH_KINDS}")
        if r < 1:
            raise ValueError(f"sketch dimension r must be >= 1, got {r}")
        if n < 1:
            raise ValueError(f"input dimension n must be >= 1, got {n}")
        self.kind = kind
        self.n = int(n)
        self.r = int(r)
        self.seed = int(seed) & _MASK64
        self.s = None
        rng = _rng(self.seed)
        if kind == "countsketch":
            s = 1 if s is None else int(s)
            if not 1 <= s <= r:
                raise ValueError(f"countsketch needs 1 <= s <= r, got s={s}, r={r}")
            self.s = s
            self._cols, self._signs = self._draw_countsketch(rng, n, r, s)
            data = (self._signs / math.sqrt(s)).ravel()
            indices = self._cols.ravel()
            indptr = np.arange(0, n * s + 1, s)
            self._sparse = sp.csr_array((data, indices, indptr), shape=(n, r))
        elif kind == "srht":
            n_pad = _next_pow2(n)
            if r > n_pad:
                raise ValueError(f"srht needs r <= padded dimension {n_pad}, got r={r}")
            self._n_pad = n_pad
            self._signs = rng.integers(0, 2, size=n_pad).astype(np.float64) * 2.0 - 1.0
            self._subset = np.sort(rng.choice(n_pad, size=r, replace=False))
        elif kind == "gaussian":
            self._dense = rng.standard_normal((n, r)) / math.sqrt(r)
        elif kind == "sign":
            self._dense = (rng.integers(0, 2, size=(n, r)).astype(np.float64) * 2.0 - 1.0)
            self._dense /= math.sqrt(r)
        else:  # identity
            if r != n:
                raise ValueError(f"identity sketch needs r == n, got n={n}, r={r}")

    @staticmethod
    def _draw_countsketch(rng, n, r, s):
        if s == 1:
            cols = rng.integers(0, r, size=(n, 1))
        else:
            # s distinct positions per row, uniform without replacement
            keys = rng.random((n, r))
            cols = np.argpartition(keys, s - 1, axis=1)[:, :s]
        signs = rng.integers(0, 2, size=(n, s)).astype(np.float64) * 2.0 - 1.0
        return cols, signs

    def __repr__(self):
        extra = f", s={self.s}" if self.kind == "countsketch" else ""
        return f"SketchOperator({self.kind}, n={self.n}, r={self.r}, seed={self.seed}{extra})"

    # -- application ---------------------------------------------------

    def apply_right(self, a) -> np.ndarray:
        """Compute ``a @ S`` for ``a`` with ``n`` columns."""
        a = as_matrix(a, "a")
        if a.shape[1] != self.n:
            raise ValueError(f"dimension mismatch: a has {a.shape[1]} cols, sketch n={self.n}")
        if self.kind == "countsketch":
            return np.asarray(a @ self._sparse)
        if self.kind == "srht":
            padded = a
            if self._n_pad != self.n:
                padded = np.zeros((a.shape[0], self._n_pad))
                padded[:, : self.n] = a
            mixed = fwht(padded * self._signs, axis=1)
            return mixed[:, self._subset] / math.sqrt(self.r)
        if self.kind == "identity":
            return a.copy()
        return a @ self._dense

    def apply_left_transpose(self, a) -> np.ndarray:
        """Compute ``S.T @ a`` for ``a`` with ``n`` rows."""
        a = as_matrix(a, "a")
        if a.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: a has {a.shape[0]} rows, sketch n={self.n}")
        if self.kind == "countsketch":
            return np.asarray(self._sparse.T @ a)
        if self.kind == "srht":
            padded = a
            if self._n_pad != self.n:
                padded = np.zeros((self._n_pad, a.shape[1]))
                padded[: self.n, :] = a
            mixed = fwht(padded * self._signs[:, None], axis=0)
            return mixed[self._subset, :] / math.sqrt(self.r)
        if self.kind == "identity":
            return a.copy()
        return self._dense.T @ a

    def densify(self) -> np.ndarray:
        """Explicit n-by-r matrix equal to this operator (test oracle)."""
        if self.n * self.r > _DENSIFY_CAP:
            raise ValueError(
                f"densify cap exceeded: {self.n} x {self.r} > {_DENSIFY_CAP} entries"
            )
        if self.kind == "countsketch":
            out = np.zeros((self.n, self.r))
            rows = np.repeat(np.arange(self.n), self.s)
            out[rows, self._cols.ravel()] = self._signs.ravel() / math.sqrt(self.s)
            return out
        if self.kind == "srht":
            one_hot = np.zeros((self._n_pad, self.r))
            one_hot[self._subset, np.arange(self.r)] = 1.0
            columns = fwht(one_hot, axis=0)  # H[:, T]
            full = self._signs[:, None] * columns / math.sqrt(self.r)
            return full[: self.n, :]
        if self.kind == "identity":
            return np.eye(self.n)
        return self._dense.copy()


def make_sketch(kind: str, n: int, r: int, seed: int, s: int | None = None) -> SketchOperator:
    """Construct a sketch operator; deterministic in ``(kind, n, r, seed)``.

    ``s`` is the per-row non-zero count, used by ``countsketch`` only
    (default 1, the classic CountSketch).
    """
    return SketchOperator(kind, n, r, seed, s=s)


def apply_right(a, sketch: SketchOperator) -> np.ndarray:
    """Functional form of ``sketch.apply_right(a)``."""
    return sketch.apply_right(a)


def apply_left_transpose(sketch: SketchOperator, a) -> np.ndarray:
    """Functional form of ``sketch.apply_left_transpose(a)``."""
    return sketch.apply_left_transpose(a)


def densify(sketch: SketchOperator) -> np.ndarray:
    """Functional form of ``sketch.densify()``."""
    return sketch.densify()


def _check_size_params(k: int, eps: float, delta: float, c: float) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    if c <= 0.0:
        raise ValueError(f"c must be > 0, got {c}")


def countsketch_size(
    k: int, eps: float, delta: float, c: float = 2.0, variant: str = "b"
) -> tuple[int, int]:
    """Heuristic CountSketch dimensions ``(r, s)`` for target rank ``k``.

    Two sizing regimes are offered; ``variant="b"`` (the default used by the
    benchmarks) trades a larger r for a smaller per-row fill:

    * ``"a"``: r = ceil(c*(k + ln(1/(eps*delta)))/eps^2),
      s = ceil(c*(ln^2(k/delta)/eps + ln^3(k/delta)))
    * ``"b"``: r = ceil(c*k*ln(k/delta)/eps^2), s = ceil(c*ln(k/delta)/eps)

    The constants hidden in the theory are unknown; ``c`` is a caller-tuned
    multiplier and these formulas are heuristics to be validated with the
    spectral-approximation certifier, not guarantees.
    """
    _check_size_params(k, eps, delta, c)
    log_kd = math.log(k / delta)
    if variant == "a":
        r = math.ceil(c * (k + math.log(1.0 / (eps * delta))) / eps**2)
        s = math.ceil(c * (log_kd**2 / eps + log_kd**3))
    elif variant == "b":
        r = math.ceil(c * k * log_kd / eps**2)
        s = math.ceil(c * log_kd / eps)
    else:
        raise ValueError(f"variant must be 'a' or 'b', got {variant!r}")
    return r, max(1, min(s, r))


def sketch_size(
    kind: str,
    k: int,
    eps: float,
    delta: float,
    c: float = 2.0,
    n: int | None = None,
) -> int:
    """Heuristic sketch dimension ``r`` for the given family and target rank.

    * gaussian / sign: ceil(c*(k + ln(1/delta))/eps^2)
    * countsketch: the variant-"b" r from :func:`countsketch_size`
    * srht: ceil(c*(k + ln(n/delta))*ln(k/delta)/eps^2); requires ``n``

    Same caveat as :func:`countsketch_size`: calibrate ``c`` empirically.
    """
    _check_size_params(k, eps, delta, c)
    if kind in ("gaussian", "sign"):
        return math.ceil(c * (k + math.log(1.0 / delta)) / eps**2)
    if kind == "countsketch":
        return countsketch_size(k, eps, delta, c, variant="b")[0]
    if kind == "srht":
        if n is None:
            raise ValueError("srht sizing needs the input dimension n")
        return math.ceil(c * (k + math.log(n / delta)) * math.log(k / delta) / eps**2)
    raise ValueError(f"no sizing rule for sketch kind {kind!r}")
