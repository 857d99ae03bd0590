"""Statistical harness for determinant-preserving random matrices.

A random matrix is determinant preserving when expectation commutes with
the determinant of every square minor. The harness estimates E[det(A_IJ)]
on one stream of draws and det(E[A_IJ]) on an independent stream (the
determinant is nonlinear, so sharing samples would correlate the errors),
then reports z-scores with a Bonferroni-corrected family-wise threshold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats

from .designs import MeasureSpec, MonteCarloEstimate, sample_iid
from .parallel import trial_rng

__all__ = [
    "MatrixGenerator",
    "MinorRecord",
    "DpReport",
    "fixed_generator",
    "gaussian_entries_generator",
    "scaled_fixed_generator",
    "poisson_gram_generator",
    "fixed_k_gram_generator",
    "gen_sum",
    "gen_product",
    "verify_dp",
    "verify_closure",
    "verify_poisson_identity",
    "verify_normalization",
]


@dataclass(frozen=True)
class MatrixGenerator:
    """Named procedure producing i.i.d. random d x d matrices."""

    name: str
    dim: int
    sample: callable  # rng -> (d, d) ndarray

    def draw_stack(self, trials: int, seed: int) -> np.ndarray:
        return np.stack([self.sample(trial_rng(seed, i)) for i in range(trials)])


def fixed_generator(Z) -> MatrixGenerator:
    Z = np.asarray(Z, dtype=float)
    return MatrixGenerator("fixed", Z.shape[0], lambda rng: Z)


def gaussian_entries_generator(d: int) -> MatrixGenerator:
    return MatrixGenerator("gaussian_entries", d, lambda rng: rng.standard_normal((d, d)))


def scaled_fixed_generator(Z, scale_values, name: str = "scaled_fixed") -> MatrixGenerator:
    """s * Z with s drawn uniformly from ``scale_values``."""
    Z = np.asarray(Z, dtype=float)
    vals = np.asarray(scale_values, dtype=float)
    return MatrixGenerator(name, Z.shape[0], lambda rng: vals[rng.integers(vals.size)] * Z)


def poisson_gram_generator(m: MeasureSpec, gamma: float) -> MatrixGenerator:
    """X^T X with X an i.i.d. K x d design and K ~ Poisson(gamma)."""

    def sample(rng):
        X = sample_iid(m, int(rng.poisson(gamma)), rng)
        return X.T @ X

    return MatrixGenerator("poisson_gram", m.dim, sample)


def fixed_k_gram_generator(m: MeasureSpec, k: int) -> MatrixGenerator:
    """X^T X at fixed sample size k; not d.p. (the Poisson size is what
    corrects the k^d versus k-falling-d factor)."""

    def sample(rng):
        X = sample_iid(m, k, rng)
        return X.T @ X

    return MatrixGenerator("fixed_k_gram", m.dim, sample)


def gen_sum(a: MatrixGenerator, b: MatrixGenerator) -> MatrixGenerator:
    if a.dim != b.dim:
        raise ValueError("summed generators must share a dimension")

    def sample(rng):
        return a.sample(rng) + b.sample(rng)

    return MatrixGenerator(f"{a.name}+{b.name}", a.dim, sample)


def gen_product(a: MatrixGenerator, b: MatrixGenerator) -> MatrixGenerator:
    if a.dim != b.dim:
        raise ValueError("multiplied generators must share a dimension")

    def sample(rng):
        return a.sample(rng) @ b.sample(rng)

    return MatrixGenerator(f"{a.name}*{b.name}", a.dim, sample)


@dataclass(frozen=True)
class MinorRecord:
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    size: int
    mc_mean: float
    mc_se: float
    det_of_mean: float
    det_of_mean_se: float
    z: float


@dataclass(frozen=True)
class DpReport:
    records: tuple[MinorRecord, ...]
    z_threshold: float
    verdict: str  # "consistent" | "violated"

    @property
    def max_abs_z(self) -> float:
        return max((abs(r.z) for r in self.records), default=0.0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["I", "J", "size", "mc_mean", "mc_se", "det_of_mean", "z"])
            for r in self.records:
                wr.writerow([
                    " ".join(map(str, r.rows)), " ".join(map(str, r.cols)), r.size,
                    repr(r.mc_mean), repr(r.mc_se), repr(r.det_of_mean), repr(r.z),
                ])


def _select_minors(d: int, minor_sizes, max_minors: int, seed: int):
    pairs = []
    for k in minor_sizes:
        if not 1 <= k <= d:
            raise ValueError(f"minor size {k} out of range for d={d}")
        subs = list(combinations(range(d), k))
        pairs.extend((I, J) for I in subs for J in subs)
    if len(pairs) > max_minors:
        rng = trial_rng(seed, 0xD5)
        idx = rng.choice(len(pairs), size=max_minors, replace=False)
        pairs = [pairs[i] for i in sorted(idx)]
    return pairs


def _bootstrap_det_se(stack: np.ndarray, I, J, resamples: int, rng) -> float:
    sub = stack[:, list(I)][:, :, list(J)]
    T = sub.shape[0]
    dets = np.empty(resamples)
    for b in range(resamples):
        pick = rng.integers(T, size=T)
        dets[b] = np.linalg.det(np.mean(sub[pick], axis=0))
    return float(np.std(dets, ddof=1))


def verify_dp(g: MatrixGenerator, minor_sizes, trials: int, seed: int,
              family_level: float = 0.01, max_minors: int = 200,
              bootstrap_resamples: int = 200) -> DpReport:
    """Compare Monte Carlo E[det(minor)] against det(E[minor]) per minor."""
    if trials < 10_000:
        raise ValueError("verify_dp needs at least 10^4 trials")
    d = g.dim
    pairs = _select_minors(d, minor_sizes, max_minors, seed)
    stack1 = g.draw_stack(trials, seed)
    stack2 = g.draw_stack(trials, seed + 0x9E3779B9)  # independent stream
    mean2 = np.mean(stack2, axis=0)
    boot_rng = trial_rng(seed, 0xB007)
    threshold = float(stats.norm.ppf(1.0 - family_level / (2 * len(pairs))))
    records = []
    for I, J in pairs:
        dets1 = np.linalg.det(stack1[:, list(I)][:, :, list(J)])
        mc_mean = float(np.mean(dets1))
        mc_se = float(np.std(dets1, ddof=1) / math.sqrt(trials))
        det2 = float(np.linalg.det(mean2[np.ix_(I, J)]))
        se2 = _bootstrap_det_se(stack2, I, J, bootstrap_resamples, boot_rng)
        denom = math.hypot(mc_se, se2)
        diff = mc_mean - det2
        # determinants of structurally singular minors cancel only up to
        # rounding; differences at that scale are numerical noise, not evidence
        entry_scale = max(1.0, float(np.max(np.abs(mean2[np.ix_(I, J)]))))
        noise_floor = 1e-10 * entry_scale ** len(I)
        z = diff / denom if denom > 0 and abs(diff) > noise_floor else 0.0
        records.append(MinorRecord(I, J, len(I), mc_mean, mc_se, det2, se2, z))
    verdict = "violated" if any(abs(r.z) > threshold for r in records) else "consistent"
    return DpReport(tuple(records), threshold, verdict)


def verify_closure(gA: MatrixGenerator, gB: MatrixGenerator, mode: str,
                   minor_sizes, trials: int, seed: int, **kw) -> DpReport:
    """Spot-check that a sum or product of two independently seeded d.p.
    generators is itself d.p."""
    if mode == "sum":
        g = gen_sum(gA, gB)
    elif mode == "product":
        g = gen_product(gA, gB)
    else:
        raise ValueError("mode must be 'sum' or 'product'")
    return verify_dp(g, minor_sizes, trials, seed, **kw)


def verify_poisson_identity(m: MeasureSpec, gamma: float, trials: int, seed: int,
                            minor_sizes=None, **kw) -> DpReport:
    """Check that the Poisson-sized Gram matrix X^T X commutes with
    determinants across minors; its full-minor expectation is det(gamma Sigma)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    d = m.dim
    if minor_sizes is None:
        minor_sizes = list(range(1, d + 1))
    return verify_dp(poisson_gram_generator(m, gamma), minor_sizes, trials, seed, **kw)


def verify_normalization(m: MeasureSpec, gamma: float, trials: int,
                         seed: int) -> tuple[MonteCarloEstimate, float]:
    """MC estimate of E[det(X X^T)] with Poisson sample size against the
    closed-form normalizer e^{-gamma} det(I + gamma Sigma).

    det(X X^T) is the plain determinant of the K x K Gram matrix; it
    vanishes automatically once K exceeds d.
    """
    d = m.dim
    vals = np.empty(trials)
    for i in range(trials):
        rng = trial_rng(seed, i)
        k = int(rng.poisson(gamma))
        if k == 0:
            vals[i] = 1.0  # det of the empty matrix
            continue
        X = sample_iid(m, k, rng)
        vals[i] = np.linalg.det(X @ X.T) if k <= d else 0.0
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(trials))
    t = m.spectrum.eigenvalues
    target = math.exp(-gamma + float(np.sum(np.log1p(gamma * t))))
    est = MonteCarloEstimate(mean=np.asarray(mean), std_error=np.asarray(se), trials=trials)
    return est, target
