import numpy as np
import pytest

from mutualdep.blml import (
    bin_samples,
    bin_width,
    gram_matrix,
    pdf_eval,
    pdf_integral,
    quick_fit,
    solve_blml,
)
from mutualdep.numerics import QuadratureSpec, integrate_1d, sinc_fc


class TestGramMatrix:
    def test_single_point(self):
        S = gram_matrix(np.array([0.7]), np.array([1.0]), 2.5, dims=1)
        assert S.shape == (1, 1)
        assert S[0, 0] == 2.5

    def test_kernel_zero_separation(self):
        fc = 2.0
        S = gram_matrix(np.array([0.0, 1.0 / fc]), np.ones(2), fc, dims=1)
        assert abs(S[0, 1]) < 1e-12
        assert S[0, 0] == fc

    def test_matches_elementwise_evaluation(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=5) * 2
        fc = 1.7
        S = gram_matrix(pts, np.ones(5), fc, dims=1)
        for i in range(5):
            for j in range(5):
                expect = fc if i == j else sinc_fc(pts[i] - pts[j], fc)
                assert S[i, j] == expect

    def test_2d_diagonal_and_product(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(4, 2))
        fc = 2.2
        S = gram_matrix(pts, np.ones(4), fc, dims=2)
        assert np.all(np.diag(S) == fc ** 2)
        i, j = 0, 3
        expect = sinc_fc(pts[i, 0] - pts[j, 0], fc) * sinc_fc(pts[i, 1] - pts[j, 1], fc)
        assert S[i, j] == pytest.approx(expect, abs=1e-15)

    def test_symmetric(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(8, 2))
        S = gram_matrix(pts, np.ones(8), 1.3, dims=2)
        assert np.allclose(S, S.T, atol=1e-15)


class TestSolveBlml:
    def test_single_sample_closed_form(self):
        fit = solve_blml(np.array([2.0]), np.array([1.0]), 4.0, dims=1)
        assert fit.coeffs[0] == pytest.approx(0.5, abs=1e-12)

    def test_decoupled_points(self):
        # points many kernel zeros apart: S ~ fc I, so c_i ~ sqrt(n/fc)
        fc = 2.0
        pts = np.arange(6) * 50.0 / fc
        fit = solve_blml(pts, np.ones(6), fc, dims=1)
        assert np.allclose(fit.coeffs, np.sqrt(6 / fc), atol=1e-3)

    def test_weighted_single_bin(self):
        # 7*c*1 = 7/c  =>  c = 1
        fit = solve_blml(np.array([0.3]), np.array([7.0]), 1.0, dims=1)
        assert fit.coeffs[0] == pytest.approx(1.0, abs=1e-12)

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError, match="bin"):
            solve_blml(np.array([1.0, 1.0, 2.0]), np.ones(3), 1.0, dims=1)

    def test_positive_branch_and_residual(self):
        rng = np.random.default_rng(11)
        for dims in (1, 2):
            for _ in range(5):
                n = int(rng.integers(2, 120))
                pts = rng.normal(size=(n, dims) if dims == 2 else n) * 3
                fit = solve_blml(pts, np.ones(n), float(rng.uniform(0.5, 4)), dims=dims)
                assert np.all(fit.coeffs > 0)
                assert fit.residual_norm <= 1e-9

    def test_binned_equals_unbinned_on_grid_centers(self):
        # samples already sitting on distinct grid centers: binning is a
        # no-op and the coefficient vectors agree point for point
        fc = 1.25
        delta = bin_width(fc)
        pts = (np.array([-3, -1, 0, 2, 5, 9]) + 0.5) * delta
        unbinned = solve_blml(pts, np.ones(6), fc, dims=1)
        quick = quick_fit(pts, fc, dims=1)
        assert np.allclose(quick.points, pts, atol=1e-12)
        assert np.allclose(unbinned.coeffs, quick.coeffs, rtol=0, atol=1e-9)


class TestBinSamples:
    def test_single_bin(self):
        fc = 1.0
        vals = 0.1 + 0.2 * np.random.default_rng(0).random(50) * bin_width(fc)
        centers, counts = bin_samples(vals, fc, dims=1)
        assert len(centers) == 1
        assert counts[0] == 50

    def test_already_separated(self):
        fc = 2.0
        delta = bin_width(fc)
        vals = (np.arange(10) + 0.5) * delta
        centers, counts = bin_samples(vals, fc, dims=1)
        assert len(centers) == 10
        assert np.all(counts == 1)
        assert np.allclose(centers, vals, atol=1e-12)

    def test_bin_count_bound_normal_data(self):
        fc = 1.5625
        delta = bin_width(fc)
        draws = np.random.default_rng(42).normal(size=10_000)
        centers, counts = bin_samples(draws, fc, dims=1)
        assert len(centers) <= int(np.ceil(16 / delta)) + 1
        assert len(centers) < 1000  # B much smaller than n
        assert counts.sum() == 10_000

    def test_2d(self):
        fc = 1.0
        pts = np.array([[0.1, 0.1], [0.15, 0.12], [3.0, 3.0]])
        centers, counts = bin_samples(pts, fc, dims=2)
        assert centers.shape == (2, 2)
        assert sorted(counts.tolist()) == [1, 2]


class TestPdfEval:
    def test_single_sample_peak_equals_fc(self):
        fit = solve_blml(np.array([1.7]), np.array([1.0]), 4.0, dims=1)
        assert pdf_eval(fit, 1.7) == 4.0

    def test_kernel_zero_gives_zero(self):
        fit = solve_blml(np.array([1.7]), np.array([1.0]), 4.0, dims=1)
        assert pdf_eval(fit, 1.7 + 0.25) < 1e-20

    def test_nonnegative_everywhere(self):
        rng = np.random.default_rng(7)
        fit = solve_blml(rng.normal(size=40), np.ones(40), 2.0, dims=1)
        xs = rng.uniform(-10, 10, size=500)
        assert np.all(pdf_eval(fit, xs) >= 0)

    def test_translation_equivariance(self):
        # dyadic shift, dyadic samples: differences are exact in floats
        rng = np.random.default_rng(8)
        pts = np.unique(np.round(rng.normal(size=24) * 64) / 64)[:16]
        t = 4.0
        fit0 = solve_blml(pts, np.ones(pts.size), 2.0, dims=1)
        fit1 = solve_blml(pts + t, np.ones(pts.size), 2.0, dims=1)
        xs = np.round(rng.uniform(-4, 4, 50) * 64) / 64
        assert np.allclose(pdf_eval(fit0, xs), pdf_eval(fit1, xs + t), rtol=0, atol=1e-12)

    def test_2d_eval(self):
        rng = np.random.default_rng(9)
        pts = rng.normal(size=(30, 2))
        fit = solve_blml(pts, np.ones(30), 1.5, dims=2)
        val = pdf_eval(fit, np.array([0.0, 0.0]))
        assert val >= 0
        grid = rng.normal(size=(20, 2))
        assert np.all(pdf_eval(fit, grid) >= 0)


class TestPdfIntegral:
    def test_single_sample_exact(self):
        fit = solve_blml(np.array([0.2]), np.array([1.0]), 4.0, dims=1)
        assert pdf_integral(fit) == 1.0

    def test_converged_fits_integrate_to_one(self):
        rng = np.random.default_rng(12)
        for dims in (1, 2):
            n = 60
            pts = rng.normal(size=(n, dims) if dims == 2 else n) * 2
            fit = solve_blml(pts, np.ones(n), 1.8, dims=dims)
            assert pdf_integral(fit) == pytest.approx(1.0, abs=1e-6)

    def test_quadrature_cross_check(self):
        rng = np.random.default_rng(13)
        fit = solve_blml(rng.normal(size=50), np.ones(50), 1.5, dims=1)
        spec = QuadratureSpec(domain=(-120.0, 120.0), abs_tol=1e-6, rel_tol=1e-6,
                              initial_panels=2 ** 12, max_refinements=8)
        mass = integrate_1d(lambda x: pdf_eval(fit, x), spec)
        assert mass == pytest.approx(pdf_integral(fit), abs=1e-3)
