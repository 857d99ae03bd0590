import math

import numpy as np
import pytest
from scipy import stats

from ddlab.covariance import Spectrum
from ddlab.designs import (
    DesignSample,
    MeasureSpec,
    gen_responses,
    sample_iid,
    sample_surrogate_over,
    sample_surrogate_under,
    sample_surrogate_under_batch,
    surrogate_expectation_oracle,
)
from ddlab.errors import UnsupportedMeasureError
from ddlab.linalg import projection_complement
from ddlab.parallel import run_trials, trial_rng
from ddlab.surrogate import surrogate_size_pmf


class TestSampleIid:
    def test_empty(self):
        X = sample_iid(MeasureSpec(Spectrum(np.ones(4))), 0, 1)
        assert X.shape == (0, 4)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            sample_iid(MeasureSpec(Spectrum(np.ones(4))), -1, 1)

    def test_rademacher_support(self):
        X = sample_iid(MeasureSpec(Spectrum(np.ones(5)), "rademacher"), 100, 2)
        assert set(np.unique(X)) <= {-1.0, 1.0}

    def test_uniform_support_and_variance(self):
        X = sample_iid(MeasureSpec(Spectrum(np.ones(2)), "uniform_pm_sqrt3"), 50_000, 3)
        assert np.max(np.abs(X)) <= math.sqrt(3.0)
        assert np.var(X) == pytest.approx(1.0, rel=0.05)

    def test_sample_covariance(self):
        s = Spectrum(np.array([2.0, 0.5]))
        n = 200_000
        X = sample_iid(MeasureSpec(s), n, 4)
        cov = X.T @ X / n
        assert np.max(np.abs(cov - np.diag(s.eigenvalues))) < 3 * 3.0 / math.sqrt(n)

    def test_deterministic(self):
        m = MeasureSpec(Spectrum(np.ones(3)))
        np.testing.assert_array_equal(sample_iid(m, 5, 7), sample_iid(m, 5, 7))

    def test_unknown_entry_law(self):
        with pytest.raises(ValueError):
            MeasureSpec(Spectrum(np.ones(3)), "cauchy")


class TestGenResponses:
    def test_noiseless(self):
        X = np.eye(3)
        np.testing.assert_array_equal(gen_responses(X, [1.0, 2.0, 3.0], 0.0, 1), [1, 2, 3])

    def test_pure_noise_variance(self):
        y = gen_responses(np.zeros((100_000, 2)), np.ones(2), 4.0, 5)
        assert np.var(y) == pytest.approx(4.0, rel=3 * math.sqrt(2 / 100_000) + 0.01)

    def test_deterministic(self):
        X = np.ones((10, 2))
        np.testing.assert_array_equal(gen_responses(X, [1.0, 1.0], 1.0, 9),
                                      gen_responses(X, [1.0, 1.0], 1.0, 9))

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            gen_responses(np.eye(3), [1.0, 2.0], 1.0, 1)


class TestOracle:
    def test_constant_functional(self):
        m = MeasureSpec(Spectrum(np.ones(2)))
        est = surrogate_expectation_oracle(lambda X: 1.0, m, 1, 500, 11)
        assert float(est.mean) == pytest.approx(1.0)
        assert float(est.std_error) == pytest.approx(0.0, abs=1e-14)
        assert est.effective_sample_size <= est.trials

    def test_few_trials_rejected(self):
        m = MeasureSpec(Spectrum(np.ones(2)))
        with pytest.raises(ValueError):
            surrogate_expectation_oracle(lambda X: 1.0, m, 1, 50, 1)

    def test_projection_complement_matches_closed_form(self):
        # E[I - pinv(X) X] = (gamma Sigma + I)^{-1} with gamma = 1/sqrt(2)
        s = Spectrum(np.array([1.0, 2.0]))
        m = MeasureSpec(s)
        est = surrogate_expectation_oracle(projection_complement, m, 1, 60_000, 13)
        gamma = 1.0 / math.sqrt(2.0)
        target = np.diag(1.0 / (gamma * s.eigenvalues + 1.0))
        assert np.max(np.abs(est.z_score(target))) < 4.0

    def test_expected_row_count(self):
        m = MeasureSpec(Spectrum(np.ones(4)))
        est = surrogate_expectation_oracle(lambda X: float(X.shape[0]), m, 2, 60_000, 17)
        assert abs(float(est.z_score(2.0))) < 4.0

    def test_at_boundary_n_equals_d(self):
        m = MeasureSpec(Spectrum(np.ones(2)))
        est = surrogate_expectation_oracle(lambda X: float(X.shape[0]), m, 2, 1000, 19)
        assert float(est.mean) == pytest.approx(2.0)

    def test_thread_invariance(self):
        m = MeasureSpec(Spectrum(np.array([1.0, 3.0])))
        a = surrogate_expectation_oracle(projection_complement, m, 1, 500, 23, threads=1)
        b = surrogate_expectation_oracle(projection_complement, m, 1, 500, 23, threads=4)
        np.testing.assert_array_equal(a.mean, b.mean)
        np.testing.assert_array_equal(a.std_error, b.std_error)


class TestSamplerUnder:
    def test_non_gaussian_rejected(self):
        m = MeasureSpec(Spectrum(np.ones(3)), "rademacher")
        with pytest.raises(UnsupportedMeasureError):
            sample_surrogate_under(m, 1, 10, 1)

    def test_size_bounded_by_d(self):
        m = MeasureSpec(Spectrum(np.ones(3)))
        for seed in range(20):
            assert sample_surrogate_under(m, 2, 20, seed).k <= 3

    def test_size_frequencies_match_pmf(self):
        m = MeasureSpec(Spectrum(np.array([1.0, 2.0])))
        pmf = surrogate_size_pmf(m.spectrum, 1)
        samples, _ = sample_surrogate_under_batch(m, 1, 20_000, 1, 29)
        counts = np.bincount([s.shape[0] for s in samples], minlength=3)
        chi2 = stats.chisquare(counts, 20_000 * pmf)
        assert chi2.pvalue > 0.01

    def test_batch_mean_projection(self):
        m = MeasureSpec(Spectrum(np.ones(2)))
        samples, rate = sample_surrogate_under_batch(m, 1, 8000, 60, 31)
        mats = np.stack([projection_complement(X) for X in samples])
        mean = mats.mean(axis=0)
        se = mats.std(axis=0, ddof=1) / math.sqrt(len(samples))
        target = np.diag(1.0 / (1.0 * np.ones(2) + 1.0))  # gamma = 1 at n=1, d=2
        assert np.max(np.abs((mean - target) / np.where(se > 0, se, np.inf))) < 4.0
        assert 0 < rate < 1


class TestSamplerOver:
    def test_expected_total_rows(self):
        m = MeasureSpec(Spectrum(np.ones(2)))
        ks = [sample_surrogate_over(m, 5.0, 30, seed).k for seed in range(3000)]
        se = np.std(ks, ddof=1) / math.sqrt(len(ks))
        assert abs(np.mean(ks) - 5.0) < 3 * se

    def test_d1_moment_ratio(self):
        # block density prop. to x^2 mu(x): second moment E[x^4]/E[x^2] = 3
        m = MeasureSpec(Spectrum(np.ones(1)))
        vals = []
        for seed in range(4000):
            rng = trial_rng(101, seed)
            X, lw = np.zeros((1, 1)), -np.inf
            while not np.isfinite(lw):
                X = sample_iid(m, 1, rng)
                lw = 2.0 * math.log(abs(X[0, 0])) if X[0, 0] != 0 else -np.inf
            for _ in range(60):
                prop = rng.standard_normal()
                lwp = 2.0 * math.log(abs(prop)) if prop != 0 else -np.inf
                if math.log(rng.uniform()) < lwp - lw:
                    X = np.array([[prop]])
                    lw = lwp
            vals.append(X[0, 0] ** 2)
        se = np.std(vals, ddof=1) / math.sqrt(len(vals))
        assert abs(np.mean(vals) - 3.0) < 3 * se

    def test_permutation_exchangeability(self):
        m = MeasureSpec(Spectrum(np.ones(2)))
        first_norms = [np.linalg.norm(sample_surrogate_over(m, 4.0, 40, s).X[0])
                       for s in range(1500)]
        # the appended rows are plain iid; under exchangeability the first row
        # must be indistinguishable from fresh iid norms mixed with block rows
        ks = stats.ks_2samp(first_norms[:750], first_norms[750:])
        assert ks.pvalue > 0.01

    def test_rejects_n_below_d(self):
        m = MeasureSpec(Spectrum(np.ones(3)))
        with pytest.raises(ValueError):
            sample_surrogate_over(m, 2, 10, 1)


class TestDesignSample:
    def test_csv_round_structure(self, tmp_path):
        X = np.arange(6.0).reshape(2, 3)
        sample = DesignSample(X=X, y=np.array([0.5, -1.5]))
        path = tmp_path / "s.csv"
        sample.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "x_1,x_2,x_3,y"
        assert len(lines) == 3
        assert lines[1].endswith(",0.5")

    def test_csv_without_y(self, tmp_path):
        sample = DesignSample(X=np.ones((1, 2)))
        path = tmp_path / "s.csv"
        sample.to_csv(path)
        assert path.read_text().strip().splitlines()[1].endswith(",")


class TestRunTrials:
    def test_thread_invariance(self):
        f = lambda rng, i: rng.standard_normal(3)
        a = run_trials(f, 50, 5, threads=1)
        b = run_trials(f, 50, 5, threads=8)
        np.testing.assert_array_equal(np.stack(a), np.stack(b))

    def test_index_order(self):
        out = run_trials(lambda rng, i: i, 20, 0, threads=4)
        assert out == list(range(20))
