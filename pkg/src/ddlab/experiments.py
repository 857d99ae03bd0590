"""Empirical protocol: i.i.d.-design MSE estimation, variance and bias
discrepancies against the surrogate closed forms, bootstrap confidence
intervals, adaptive trial escalation, and log-log slope fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .covariance import Spectrum
from .designs import MeasureSpec, MonteCarloEstimate, sample_iid
from .parallel import run_trials, trial_rng
from .surrogate import (
    RegressionProblem,
    bias_factors,
    implicit_reg_mean,
    surrogate_mse,
    surrogate_params,
    variance_term,
)

__all__ = [
    "DiscrepancyPoint",
    "CurvePoint",
    "mse_monte_carlo_iid",
    "mse_trial_samples",
    "variance_discrepancy",
    "bias_discrepancy",
    "bootstrap_ci",
    "bootstrap_opnorm_ci",
    "adaptive_trials",
    "loglog_slope",
    "curve_double_descent",
    "curve_dimension_sweep",
]


@dataclass(frozen=True)
class DiscrepancyPoint:
    d: int
    n: int
    aspect: float
    kind: str  # "variance" | "bias"
    value: float
    ci_low: float
    ci_high: float
    trials_used: int
    flagged: bool = False


@dataclass(frozen=True)
class CurvePoint:
    n: float
    d: int
    mse_surrogate: float
    mse_mc: float | None
    mse_mc_se: float | None
    ci_low: float | None
    ci_high: float | None
    lambda_n: float
    alpha_or_beta: float
    norm_implicit_mean: float


def _trial_stat(X: np.ndarray, w_star: np.ndarray, sigma2: float) -> float:
    """Noise-integrated MSE statistic sigma^2 tr((X^T X)^+) + ||(I - X^+X) w*||^2.

    Exact over the response noise, random only in X, which removes all
    noise-sampling variance from the Monte Carlo.
    """
    if X.shape[0] == 0:
        return float(np.dot(w_star, w_star))
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    cut = np.finfo(float).eps * s[0] * max(X.shape) if s.size else 0.0
    nz = s > cut
    tr_pinv = float(np.sum(1.0 / s[nz] ** 2))
    proj = Vt[nz] @ w_star
    bias = float(np.dot(w_star, w_star) - np.dot(proj, proj))
    return sigma2 * tr_pinv + max(bias, 0.0)


def mse_trial_samples(p: RegressionProblem, m: MeasureSpec, n: int, trials: int,
                      seed: int, threads: int | None = None) -> np.ndarray:
    """Per-trial Rao-Blackwellized MSE statistics for an i.i.d. design."""
    if trials < 30:
        raise ValueError("need at least 30 trials")
    w, s2 = p.w_star, p.sigma2

    def one(rng, _i):
        return _trial_stat(sample_iid(m, n, rng), w, s2)

    return np.array(run_trials(one, trials, seed, threads))


def mse_monte_carlo_iid(p: RegressionProblem, m: MeasureSpec, n: int, trials: int,
                        seed: int, threads: int | None = None) -> MonteCarloEstimate:
    """Mean and SE of the MSE statistic; heavy-tailed near n = d, so the
    mean is reported as-is and callers near the peak should also look at
    the per-trial samples (median, trimmed mean) from mse_trial_samples."""
    vals = mse_trial_samples(p, m, n, trials, seed, threads)
    return MonteCarloEstimate(
        mean=np.asarray(float(np.mean(vals))),
        std_error=np.asarray(float(np.std(vals, ddof=1) / math.sqrt(trials))),
        trials=trials,
    )


def bootstrap_ci(samples, resamples: int = 2000, level: float = 0.95,
                 seed: int = 0, stat=None) -> tuple[float, float]:
    """Percentile bootstrap CI of the sample mean (or of ``stat`` applied
    to the resampled mean)."""
    samples = np.asarray(samples, dtype=float)
    T = samples.shape[0]
    if T < 30:
        raise ValueError("need at least 30 samples to bootstrap")
    rng = trial_rng(seed, 0xB5)
    means = np.empty(resamples)
    for b in range(resamples):
        means[b] = np.mean(samples[rng.integers(T, size=T)])
    if stat is not None:
        means = np.array([stat(v) for v in means])
    lo, hi = np.quantile(means, [(1 - level) / 2, 1 - (1 - level) / 2])
    return float(lo), float(hi)


def bootstrap_opnorm_ci(matrix_samples, resamples: int = 2000, level: float = 0.95,
                        seed: int = 0, transform=None) -> tuple[float, float]:
    """Percentile bootstrap over resampled matrix means, with the spectral
    norm (optionally of a transformed mean) computed per resample."""
    stack = np.asarray(matrix_samples, dtype=float)
    T = stack.shape[0]
    if T < 30:
        raise ValueError("need at least 30 matrix samples to bootstrap")
    rng = trial_rng(seed, 0xB6)
    norms = np.empty(resamples)
    for b in range(resamples):
        mean = np.mean(stack[rng.integers(T, size=T)], axis=0)
        if transform is not None:
            mean = transform(mean)
        norms[b] = np.linalg.norm(mean, ord=2)
    lo, hi = np.quantile(norms, [(1 - level) / 2, 1 - (1 - level) / 2])
    return float(lo), float(hi)


def variance_discrepancy(s: Spectrum, d: int, aspect: float, trials: int, seed: int,
                         threads: int | None = None, resamples: int = 1000) -> DiscrepancyPoint:
    """|E[tr((X^T X)^+)] / V(Sigma, n) - 1| for a Gaussian i.i.d. design,
    with an ordinary bootstrap CI mapped through the discrepancy."""
    if s.dim != d:
        raise ValueError("spectrum dimension does not match d")
    n = round(aspect * d)
    if not 0 < n < d:
        raise ValueError("aspect must give 0 < n < d")
    target = variance_term(s, n)
    m = MeasureSpec(s, "gaussian")

    def one(rng, _i):
        X = sample_iid(m, n, rng)
        sv = np.linalg.svd(X, compute_uv=False)
        return float(np.sum(1.0 / sv**2))

    vals = np.array(run_trials(one, trials, seed, threads))
    value = abs(float(np.mean(vals)) / target - 1.0)
    lo, hi = bootstrap_ci(vals, resamples, seed=seed, stat=lambda mu: abs(mu / target - 1.0))
    return DiscrepancyPoint(d=d, n=n, aspect=aspect, kind="variance", value=value,
                            ci_low=lo, ci_high=hi, trials_used=trials)


def bias_discrepancy(s: Spectrum, d: int, aspect: float, trials: int, seed: int,
                     threads: int | None = None, resamples: int = 500,
                     batches: int = 200) -> DiscrepancyPoint:
    """Spectral-norm bias discrepancy ||B^{-1/2} E[I - X^+X] B^{-1/2} - I||
    for a Gaussian i.i.d. design, with an operator-norm bootstrap CI.

    Trials are aggregated into batch means before bootstrapping so memory
    stays flat for large trial counts.
    """
    if s.dim != d:
        raise ValueError("spectrum dimension does not match d")
    n = round(aspect * d)
    if not 0 < n < d:
        raise ValueError("aspect must give 0 < n < d")
    m = MeasureSpec(s, "gaussian")
    white = 1.0 / np.sqrt(bias_factors(s, n))
    batches = min(batches, trials)
    bounds = np.linspace(0, trials, batches + 1).astype(int)
    batch_means = np.empty((batches, d, d))

    def one(rng, _i):
        X = sample_iid(m, n, rng)
        Vt = np.linalg.svd(X, full_matrices=False)[2]
        return np.eye(d) - Vt.T @ Vt

    for b in range(batches):
        lo_i, hi_i = bounds[b], bounds[b + 1]
        acc = np.zeros((d, d))
        for i in range(lo_i, hi_i):
            acc += one(trial_rng(seed, i), i)
        batch_means[b] = acc / (hi_i - lo_i)

    def whitened_dev(mean):
        return (white[:, None] * mean * white[None, :]) - np.eye(d)

    value = float(np.linalg.norm(whitened_dev(np.mean(batch_means, axis=0)), ord=2))
    lo, hi = bootstrap_opnorm_ci(batch_means, resamples, seed=seed, transform=whitened_dev)
    return DiscrepancyPoint(d=d, n=n, aspect=aspect, kind="bias", value=value,
                            ci_low=lo, ci_high=hi, trials_used=trials)


def adaptive_trials(point_fn, target_rel_halfwidth: float = 0.125, cap: int = 100_000,
                    start: int = 100) -> DiscrepancyPoint:
    """Double the trial count until the bootstrap CI half-width is within
    the target fraction of the value; a point that hits the cap first is
    flagged rather than failed."""
    trials = min(start, cap)
    while True:
        point = point_fn(trials)
        halfwidth = 0.5 * (point.ci_high - point.ci_low)
        if halfwidth <= target_rel_halfwidth * point.value:
            return point
        if trials >= cap:
            return replace(point, flagged=True)
        trials = min(2 * trials, cap)


def loglog_slope(points) -> tuple[float, float, float]:
    """Least-squares fit of log(value) on log(d); returns (slope, intercept, r^2)."""
    usable = [p for p in points if p.value > 0]
    if len(usable) < len(list(points)):
        import warnings

        warnings.warn("excluding non-positive discrepancy values from the log-log fit")
    if len(usable) < 3:
        raise ValueError("need at least 3 positive points for a slope fit")
    x = np.log([p.d for p in usable])
    y = np.log([p.value for p in usable])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _curve_point(p: RegressionProblem, m: MeasureSpec, n: int, trials: int, seed: int,
                 threads, with_mc: bool) -> CurvePoint:
    s = p.spectrum
    sp = surrogate_params(s, n)
    ab = sp.alpha_n if n < s.dim else sp.beta_n
    norm_mean = float(np.linalg.norm(implicit_reg_mean(p, n)))
    mse_s = surrogate_mse(p, n)
    if not with_mc:
        return CurvePoint(n=n, d=s.dim, mse_surrogate=mse_s, mse_mc=None, mse_mc_se=None,
                          ci_low=None, ci_high=None, lambda_n=sp.lambda_n,
                          alpha_or_beta=ab, norm_implicit_mean=norm_mean)
    vals = mse_trial_samples(p, m, n, trials, seed, threads)
    lo, hi = bootstrap_ci(vals, seed=seed)
    return CurvePoint(n=n, d=s.dim, mse_surrogate=mse_s,
                      mse_mc=float(np.mean(vals)),
                      mse_mc_se=float(np.std(vals, ddof=1) / math.sqrt(len(vals))),
                      ci_low=lo, ci_high=hi, lambda_n=sp.lambda_n,
                      alpha_or_beta=ab, norm_implicit_mean=norm_mean)


def curve_double_descent(p: RegressionProblem, m: MeasureSpec, n_values, trials: int,
                         seed: int, threads: int | None = None,
                         with_mc: bool = True) -> list[CurvePoint]:
    """Surrogate MSE curve over sample sizes, optionally accompanied by
    i.i.d.-design Monte Carlo estimates with bootstrap CIs."""
    return [
        _curve_point(p, m, int(n), trials, seed + 1000 * i, threads, with_mc)
        for i, n in enumerate(n_values)
    ]


def curve_dimension_sweep(make_problem, d_values) -> list[CurvePoint]:
    """Surrogate-only curve over dimensions at fixed n.

    ``make_problem(d)`` must return (RegressionProblem, n).
    """
    out = []
    for d in d_values:
        p, n = make_problem(int(d))
        sp = surrogate_params(p.spectrum, n)
        ab = sp.alpha_n if n < p.spectrum.dim else sp.beta_n
        out.append(CurvePoint(
            n=n, d=p.spectrum.dim, mse_surrogate=surrogate_mse(p, n), mse_mc=None,
            mse_mc_se=None, ci_low=None, ci_high=None, lambda_n=sp.lambda_n,
            alpha_or_beta=ab, norm_implicit_mean=float(np.linalg.norm(implicit_reg_mean(p, n))),
        ))
    return out
