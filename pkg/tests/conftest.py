"""Shared test helpers and calibrated constants.

The sketch-sizing formulas expose a multiplier ``c`` whose theory value is
unknown; the constants below were calibrated empirically against the
spectral-approximation certifier and the bound suites on this package's
synthetic matrices, and are recorded in the BoundReport params of the
acceptance runs that use them.
"""

import numpy as np

from skpower.data_io import _haar_columns

# Gaussian sketch multiplier at which the certifier passes >= 90% of seeds
# for (polydecay 500x300, k=10, eps=0.5, delta=0.1); quartering the
# resulting r drops the pass rate to ~2%.
CALIBRATED_GAUSSIAN_C = 8.0

# CountSketch variant-(b) multiplier for the powered range finder / low-rank
# factorization suites (l-level sizing).
CALIBRATED_COUNTSKETCH_C = 0.25

# Same formula at the larger intermediate rank used by the
# predicted-error-bound suite (l = 80 on 800x400), where c = 0.25 would
# produce r1 > n; calibrated separately.
CALIBRATED_COUNTSKETCH_C_WIDE = 0.075

DELTA = 0.1


def psd_polydecay(n: int, seed: int) -> np.ndarray:
    """Symmetric psd matrix with eigenvalues n/i rotated by a Haar basis."""
    v = _haar_columns(n, n, seed)
    lam = n / np.arange(1.0, n + 1.0)
    a = (v * lam) @ v.T
    return (a + a.T) / 2.0


def random_psd(n: int, seed: int) -> np.ndarray:
    """Generic random Gram matrix, scaled to O(1) eigenvalues."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    a = g @ g.T / n
    return (a + a.T) / 2.0


def random_lowrank(m: int, n: int, rank: int, seed: int) -> np.ndarray:
    """Exactly rank-``rank`` matrix with unit singular values."""
    u = _haar_columns(m, rank, seed)
    v = _haar_columns(n, rank, seed + 1)
    return u @ v.T
