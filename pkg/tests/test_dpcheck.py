import math

import numpy as np
import pytest

from ddlab.covariance import Spectrum
from ddlab.designs import MeasureSpec
from ddlab.dpcheck import (
    fixed_generator,
    fixed_k_gram_generator,
    gaussian_entries_generator,
    gen_product,
    gen_sum,
    poisson_gram_generator,
    scaled_fixed_generator,
    verify_closure,
    verify_dp,
    verify_normalization,
    verify_poisson_identity,
)

TRIALS = 20_000


class TestVerifyDp:
    def test_fixed_matrix_consistent(self):
        report = verify_dp(fixed_generator(np.diag([1.0, 2.0, 3.0])), [1, 2, 3], TRIALS, 1)
        assert report.verdict == "consistent"
        assert report.max_abs_z == pytest.approx(0.0, abs=1e-8)

    def test_gaussian_entries_consistent(self):
        report = verify_dp(gaussian_entries_generator(3), [1, 2, 3], TRIALS, 2)
        assert report.verdict == "consistent"

    def test_rank1_scaled_consistent(self):
        rng = np.random.default_rng(3)
        Z = np.outer(rng.standard_normal(3), rng.standard_normal(3))
        report = verify_dp(scaled_fixed_generator(Z, [0.0, 2.0]), [1, 2], TRIALS, 3)
        assert report.verdict == "consistent"

    def test_rank2_scaled_violated(self):
        # s*Z with rank(Z)=2 and Var[s]>0: E[s^2] = 2 but E[s]^2 = 1, so
        # every 2x2 minor determinant is off by a factor of 2
        rng = np.random.default_rng(4)
        Z = rng.standard_normal((3, 2)) @ rng.standard_normal((2, 3))
        report = verify_dp(scaled_fixed_generator(Z, [0.0, 2.0]), [2], 100_000, 4)
        assert report.verdict == "violated"
        assert report.max_abs_z > 5.0

    def test_trivial_trials_rejected(self):
        with pytest.raises(ValueError):
            verify_dp(gaussian_entries_generator(2), [1], 100, 1)

    def test_minor_subsampling_cap(self):
        report = verify_dp(fixed_generator(np.eye(4)), [1, 2, 3, 4], 10_000, 5, max_minors=10)
        assert len(report.records) == 10

    def test_csv_schema(self, tmp_path):
        report = verify_dp(fixed_generator(np.eye(2)), [1, 2], 10_000, 6)
        path = tmp_path / "r.csv"
        report.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "I,J,size,mc_mean,mc_se,det_of_mean,z"
        assert len(lines) == 1 + len(report.records)


class TestClosure:
    def test_fixed_plus_fixed(self):
        report = verify_closure(fixed_generator(np.eye(2)), fixed_generator(2 * np.eye(2)),
                                "sum", [1, 2], 10_000, 7)
        assert report.verdict == "consistent"

    def test_rank1_plus_gaussian(self):
        rng = np.random.default_rng(8)
        Z = np.outer(rng.standard_normal(3), rng.standard_normal(3))
        gA = scaled_fixed_generator(Z, [0.0, 2.0])
        gB = gaussian_entries_generator(3)
        report = verify_closure(gA, gB, "sum", [1, 2, 3], TRIALS, 8)
        assert report.verdict == "consistent"

    def test_gaussian_product(self):
        report = verify_closure(gaussian_entries_generator(2), gaussian_entries_generator(2),
                                "product", [1, 2], TRIALS, 9)
        assert report.verdict == "consistent"

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            verify_closure(fixed_generator(np.eye(2)), fixed_generator(np.eye(2)),
                           "kronecker", [1], 10_000, 1)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            gen_sum(fixed_generator(np.eye(2)), fixed_generator(np.eye(3)))
        with pytest.raises(ValueError):
            gen_product(fixed_generator(np.eye(2)), fixed_generator(np.eye(3)))


class TestPoissonIdentity:
    def test_scalar_case(self):
        m = MeasureSpec(Spectrum(np.ones(1)))
        report = verify_poisson_identity(m, 2.0, TRIALS, 10)
        assert report.verdict == "consistent"
        # full minor expectation is det(gamma Sigma) = 2
        full = report.records[0]
        assert abs(full.mc_mean - 2.0) < 4 * full.mc_se

    def test_d2_gram_target(self):
        m = MeasureSpec(Spectrum(np.ones(2)))
        report = verify_poisson_identity(m, 3.0, 50_000, 11)
        assert report.verdict == "consistent"
        full = [r for r in report.records if r.size == 2 and r.rows == r.cols][0]
        assert abs(full.mc_mean - 9.0) < 4 * full.mc_se

    def test_fixed_k_violates_with_predicted_factor(self):
        # fixed K = d = 2: E[det] = (d!/d^d) det(E) = det(E)/2
        m = MeasureSpec(Spectrum(np.ones(2)))
        report = verify_dp(fixed_k_gram_generator(m, 2), [2], 100_000, 12)
        assert report.verdict == "violated"
        full = [r for r in report.records if r.rows == (0, 1) and r.cols == (0, 1)][0]
        assert full.mc_mean / full.det_of_mean == pytest.approx(0.5, abs=0.05)

    def test_bad_gamma(self):
        with pytest.raises(ValueError):
            verify_poisson_identity(MeasureSpec(Spectrum(np.ones(2))), 0.0, 10_000, 1)


class TestNormalization:
    def test_d1(self):
        m = MeasureSpec(Spectrum(np.array([1.0])))
        est, target = verify_normalization(m, 1.0, 50_000, 13)
        assert target == pytest.approx(2.0 * math.exp(-1.0))
        assert abs(float(est.z_score(target))) < 4.0

    def test_d2_diag(self):
        m = MeasureSpec(Spectrum(np.array([1.0, 2.0])))
        est, target = verify_normalization(m, 1.0, 50_000, 14)
        assert target == pytest.approx(6.0 * math.exp(-1.0))
        assert abs(float(est.z_score(target))) < 4.0

    def test_small_gamma_limit(self):
        m = MeasureSpec(Spectrum(np.ones(2)))
        est, target = verify_normalization(m, 1e-9, 5_000, 15)
        assert float(est.mean) == pytest.approx(1.0, abs=1e-6)
        assert target == pytest.approx(1.0, abs=1e-6)
