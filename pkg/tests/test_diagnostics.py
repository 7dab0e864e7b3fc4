import math

import mpmath as mp
import numpy as np
import pytest
import scipy.linalg as sla

from conftest import random_lowrank
from skpower.data_io import gen_polydecay
from skpower.diagnostics import (
    BoundReport,
    SpectralProfile,
    approximation_error_bound,
    certify_spectral_approx,
    estimate_spectral_norm,
    estimated_projection_residuals,
    gaussian_rangefinder_bound,
    powered_rangefinder_bound,
    powered_tail_level,
    powered_tail_report,
    projection_residuals,
    regularization_level,
    relative_error,
)
from skpower.linalg import orthonormalize
from skpower.power import choose_q
from skpower.sketching import make_sketch, substream


def profile_of(values):
    values = np.asarray(values, dtype=float)
    return SpectralProfile(values=values, shape=(len(values), len(values)))


class TestSpectralProfile:
    def test_from_matrix_descending(self):
        prof = SpectralProfile.from_matrix(np.diag([1.0, 3.0, 2.0]))
        np.testing.assert_allclose(prof.values, [3.0, 2.0, 1.0], atol=1e-14)

    def test_from_psd_clamps(self):
        g = np.random.default_rng(0).standard_normal((10, 4))
        prof = SpectralProfile.from_psd(g @ g.T)
        assert np.all(prof.values >= 0.0)
        assert len(prof) == 10

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError, match="descending"):
            profile_of([1.0, 2.0])


class TestRegularizationLevel:
    def test_direct(self):
        assert regularization_level(profile_of([2.0, 1.0, 1.0]), 1) == 2.0

    def test_empty_tail(self):
        assert regularization_level(profile_of([2.0, 1.0]), 2) == 0.0

    def test_polydecay_brute_force(self):
        values = 100.0 / np.arange(1.0, 101.0)
        prof = profile_of(values)
        k = 10
        brute = sum(float(v) ** 2 for v in values[k:]) / k
        assert abs(regularization_level(prof, k) - brute) <= 1e-12 * brute

    def test_non_increasing_in_k(self):
        prof = profile_of(np.sort(np.random.default_rng(1).uniform(0, 10, 30))[::-1])
        levels = [regularization_level(prof, k) for k in range(1, 31)]
        assert all(a >= b for a, b in zip(levels, levels[1:]))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            regularization_level(profile_of([1.0]), 2)


class TestCertifier:
    def test_identity_sketch_measures_zero(self):
        a = gen_polydecay(30, 20, seed=2)
        report = certify_spectral_approx(a, a, lam=1.0, eps=0.0)
        assert report.measured <= 1e-12 and report.holds

    def test_eps_zero_strict(self):
        a = gen_polydecay(30, 20, seed=3)
        sketch = make_sketch("gaussian", 20, 10, seed=4)
        report = certify_spectral_approx(a, sketch.apply_right(a), lam=10.0, eps=0.0)
        assert not report.holds and report.measured > 0.0

    def test_lam_zero_singular_gram_errors(self):
        a = random_lowrank(20, 15, rank=3, seed=5)
        with pytest.raises(ValueError, match="singular"):
            certify_spectral_approx(a, a, lam=0.0, eps=0.5)

    def test_matches_generalized_eigenvalue_test(self):
        # the whitened norm equals the extreme pencil eigenvalue deviation
        a = gen_polydecay(40, 30, seed=6)
        lam = regularization_level(SpectralProfile.from_matrix(a), 5)
        sketch = make_sketch("sign", 30, 25, seed=7)
        a_s = sketch.apply_right(a)
        report = certify_spectral_approx(a, a_s, lam, eps=0.5)
        gram = a @ a.T
        gram_s = a_s @ a_s.T
        pencil = sla.eigh(
            gram_s + lam * np.eye(40), gram + lam * np.eye(40), eigvals_only=True
        )
        assert abs(np.abs(pencil - 1.0).max() - report.measured) <= 1e-8

    def test_desk_scale_cap(self):
        a = np.ones((2100, 2))
        with pytest.raises(ValueError, match="desk-scale"):
            certify_spectral_approx(a, a, lam=1.0, eps=0.5)

    def test_report_row_shape(self):
        report = BoundReport(name="x", rhs=1.0, measured=0.5, params={"k": 3.0})
        row = report.as_row()
        assert row["holds"] is True and row["k"] == 3.0


class TestProjectionResiduals:
    def test_spanning_basis_gives_zero(self):
        a = random_lowrank(25, 18, rank=4, seed=8)
        q = orthonormalize(a)
        spec, frob = projection_residuals(a, q)
        assert spec <= 1e-8 and frob <= 1e-8

    def test_single_axis_example(self):
        a = np.diag([3.0, 2.0])
        q = np.array([[1.0], [0.0]])
        assert projection_residuals(a, q) == (2.0, 2.0)

    def test_matches_direct_computation(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((30, 22))
        q = orthonormalize(rng.standard_normal((30, 6)))
        spec, frob = projection_residuals(a, q)
        resid = a - q @ (q.T @ a)
        assert abs(spec - np.linalg.norm(resid, 2)) <= 1e-10 * spec
        assert abs(frob - np.linalg.norm(resid)) <= 1e-10 * frob

    def test_rejects_non_orthonormal(self):
        rng = np.random.default_rng(10)
        with pytest.raises(ValueError, match="orthonormal"):
            projection_residuals(rng.standard_normal((10, 8)), rng.standard_normal((10, 3)))


class TestApproximationErrorBound:
    def test_eps_zero_collapse(self):
        prof = profile_of([4.0, 3.0, 2.0, 1.0])
        assert approximation_error_bound(prof, 1, 2, 0.0) == 9.0

    def test_empty_tail(self):
        prof = profile_of([4.0, 3.0, 2.0])
        assert approximation_error_bound(prof, 1, 3, 0.5) == 1.5 * 9.0

    def test_polydecay_matches_direct_sum(self):
        values = 100.0 / np.arange(1.0, 101.0)
        prof = profile_of(values)
        k, l, eps = 10, 20, 0.5
        direct = (1 + eps) * values[k] ** 2 + eps / l * sum(float(v) ** 2 for v in values[l:])
        assert abs(approximation_error_bound(prof, k, l, eps) - direct) <= 1e-12 * direct

    def test_unsquared_flag(self):
        prof = profile_of([4.0, 3.0, 2.0, 1.0])
        assert approximation_error_bound(prof, 1, 2, 0.0, squared=False) == 3.0

    def test_range_validation(self):
        with pytest.raises(ValueError):
            approximation_error_bound(profile_of([1.0, 0.5]), 2, 1, 0.5)


class TestGaussianRangefinderBound:
    def test_flat_profile(self):
        assert gaussian_rangefinder_bound(profile_of([1.0, 1.0]), 1) == (2.0, 4.0)

    def test_exact_rank_profile(self):
        assert gaussian_rangefinder_bound(profile_of([5.0, 2.0, 0.0, 0.0]), 2) == (0.0, 0.0)

    def test_polydecay_matches_direct_sum(self):
        values = 50.0 / np.arange(1.0, 51.0)
        prof = profile_of(values)
        tail = sum(float(v) ** 2 for v in values[5:])
        spec, frob = gaussian_rangefinder_bound(prof, 5)
        assert abs(spec - 2 * tail / 5) <= 1e-12 * spec
        assert abs(frob - 4 * tail) <= 1e-12 * frob


class TestPoweredRangefinderBound:
    def test_lambda2_zero_collapse(self):
        prof = profile_of([1.0])
        spec, _ = powered_rangefinder_bound(3.0, 0.0, 0.25, 2, prof)
        assert spec == (1 + 0.5) * 0.25 * 3.0

    def test_large_q_boundary(self):
        prof = profile_of([1.0])
        lam2 = 0.7
        spec, _ = powered_rangefinder_bound(0.0, lam2, 0.0, 50, prof)
        assert abs(spec - (2 * lam2) ** (1.0 / 101.0)) <= 1e-14

    def test_frobenius_scan_matches_brute_force(self):
        values = 100.0 / np.arange(1.0, 101.0)
        prof = profile_of(values)
        lam1, lam2, eps, q = 3.0, 40.0, 0.25, 4
        level = lam2 ** (1.0 / (2 * q + 1)) + lam1
        brute = min(
            8 * r * level + sum(float(v) ** 2 for v in values[r:])
            for r in range(len(values) + 1)
        )
        _, frob = powered_rangefinder_bound(lam1, lam2, eps, q, prof)
        assert abs(frob - brute) <= 1e-12 * brute

    def test_monotone_in_parameters(self):
        prof = profile_of(100.0 / np.arange(1.0, 41.0))
        base = powered_rangefinder_bound(2.0, 5.0, 0.25, 3, prof)
        for kwargs in [dict(lambda1=3.0), dict(lambda2=6.0), dict(eps=0.4)]:
            params = dict(lambda1=2.0, lambda2=5.0, eps=0.25, q=3)
            params.update(kwargs)
            bumped = powered_rangefinder_bound(params["lambda1"], params["lambda2"], params["eps"], params["q"], prof)
            assert bumped[0] >= base[0] and bumped[1] >= base[1]


class TestPoweredTail:
    def test_flat_profile_direct(self):
        prof = profile_of([1.0, 1.0, 1.0])
        q = 1
        expected = (2.0 / 1 * 2.0) ** (1.0 / (2 * q + 1))
        assert abs(powered_tail_level(prof, 1, q) - expected) <= 1e-12

    def test_single_nonzero_tail(self):
        prof = profile_of([9.0, 2.0, 0.0, 0.0])
        for q in (1, 3, 8):
            expected = 2.0 ** (1.0 / (2 * q + 1)) * 4.0
            assert abs(powered_tail_level(prof, 1, q) - expected) <= 1e-12 * expected

    def test_matches_extended_precision(self):
        rng = np.random.default_rng(11)
        values = np.sort(rng.uniform(0.1, 200.0, size=60))[::-1]
        prof = profile_of(values)
        k = 7
        q = choose_q(0.5, 60)
        t = 2 * q + 1
        mp.mp.dps = 60
        acc = mp.mpf(0)
        for v in values[k:]:
            acc += mp.mpf(float(v)) ** (2 * t)
        oracle = float((mp.mpf(2) / k * acc) ** (mp.mpf(1) / t))
        mine = powered_tail_level(prof, k, q)
        assert abs(mine - oracle) <= 1e-9 * oracle

    def test_no_overflow_at_large_q(self):
        values = np.sort(np.random.default_rng(12).uniform(1.0, 500.0, 40))[::-1]
        out = powered_tail_level(profile_of(values), 3, 30)
        assert np.isfinite(out) and out > 0.0

    def test_report_checks_q_threshold(self):
        prof = profile_of([4.0, 1.0, 0.5])
        with pytest.raises(ValueError, match="choose_q"):
            powered_tail_report(prof, 1, 0, sigma_kp1=1.0, lambda1=1.0, eps=0.5)
        q = choose_q(0.5, 3)
        report = powered_tail_report(prof, 1, q, sigma_kp1=2.0, lambda1=1.0, eps=0.5)
        assert report.rhs == 3.0 * 4.0 + 1.0
        assert report.params["q"] == q


class TestRelativeError:
    def test_values(self):
        prof = profile_of([5.0, 2.0])
        assert relative_error(2.0, prof, 1) == 0.0
        assert relative_error(4.0, prof, 1) == 1.0

    def test_zero_reference_errors(self):
        with pytest.raises(ValueError, match="zero"):
            relative_error(1.0, profile_of([5.0, 0.0]), 1)


class TestEstimatedResiduals:
    def test_estimator_matches_svd(self):
        a = gen_polydecay(150, 90, seed=13)
        exact = sla.svdvals(a)[0]
        est = estimate_spectral_norm(a, tol=1e-6, seed=1)
        assert abs(est - exact) <= 1e-6 * exact

    def test_estimated_residuals_match_exact(self):
        a = gen_polydecay(120, 80, seed=14)
        q = orthonormalize(np.random.default_rng(15).standard_normal((120, 10)))
        spec_e, frob_e = estimated_projection_residuals(a, q, seed=2)
        spec_x, frob_x = projection_residuals(a, q)
        assert abs(spec_e - spec_x) <= 1e-4 * spec_x
        assert frob_e == frob_x

    def test_estimator_deterministic(self):
        a = gen_polydecay(60, 40, seed=16)
        assert estimate_spectral_norm(a, seed=3) == estimate_spectral_norm(a, seed=3)


def test_powered_tail_inequality_holds_on_certified_pairs():
    # whenever the sketch certifies, the powered tail level stays below
    # (1 + 4 eps) sigma_{k+1}^2 + 2 lambda1 eps at q = choose_q(eps, rank)
    a = gen_polydecay(300, 200, seed=17)
    profile = SpectralProfile.from_matrix(a)
    k, eps = 10, 0.5
    lam = regularization_level(profile, k)
    sigma_kp1 = profile.values[k]
    checked = held = 0
    trial = 0
    while checked < 10 and trial < 40:
        sketch = make_sketch("gaussian", 200, 260, substream(4000, trial))
        trial += 1
        a_s = sketch.apply_right(a)
        if certify_spectral_approx(a, a_s, lam, eps).holds:
            checked += 1
            sprof = SpectralProfile.from_matrix(a_s)
            rank = int(np.count_nonzero(sprof.values > sprof.values[0] * 300 * np.finfo(float).eps))
            report = powered_tail_report(sprof, k, choose_q(eps, rank), sigma_kp1, lam, eps)
            held += report.holds
    assert checked == 10 and held >= 9
