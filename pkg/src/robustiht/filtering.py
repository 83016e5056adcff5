"""Robust sparse mean/gradient estimation by randomized outlier filtering.

Each round computes the hard-thresholded sample mean, the sample covariance
around it, and the sparse-PCA relaxation value lambda* of that covariance.
A small lambda* certifies the current sample set and the thresholded mean is
returned; otherwise one or more samples are removed at random with
probability proportional to their projection score
(g_i - mean)^T H* (g_i - mean), and the round repeats until certification
or the removal budget is exhausted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateScoresError, InvalidConfigError, InvalidInputError
from .sparse import SparseVector, hard_threshold_array
from .sparse_pca import SolverOptions, SparsePcaSolution, solve_relaxation

RHO_FLOOR = 1e-12


@dataclass
class GradientBatch:
    """A set of same-length vectors with ids tracking their original indices."""

    samples: np.ndarray
    source_ids: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.source_ids = np.asarray(self.source_ids, dtype=np.int64)
        if self.samples.ndim != 2:
            raise InvalidInputError("samples must be a 2-d array")
        if self.source_ids.shape != (self.samples.shape[0],):
            raise InvalidInputError("need one id per sample")
        if np.unique(self.source_ids).shape[0] != self.source_ids.shape[0]:
            raise InvalidInputError("source ids must be unique")

    @classmethod
    def from_samples(cls, samples) -> "GradientBatch":
        samples = np.asarray(samples, dtype=float)
        return cls(samples, np.arange(samples.shape[0]))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    def subset(self, keep: np.ndarray) -> "GradientBatch":
        return GradientBatch(self.samples[keep], self.source_ids[keep])


@dataclass
class FilterConfig:
    """Knobs of the filtering estimator.

    ``rho_sep`` fixes the certification threshold explicitly.  When left
    None the threshold is the plug-in c_gamma * (||mean estimate||^2 +
    sigma_sq), recomputed from the surviving samples at every round (it
    tracks the improving mean estimate as outliers are removed);
    ``g_norm_sq_override`` freezes the squared-norm term instead for
    oracle experiments where the true mean norm is known.
    """

    k_tilde: int
    rho_sep: float | None = None
    c_gamma: float = 10.0
    gamma: float = 4.0
    sigma_sq: float = 0.0
    g_norm_sq_override: float | None = None
    epsilon: float | None = None
    max_removals: int | None = None
    removals_per_step: int = 1
    seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    support_limit: int | None = None

    def __post_init__(self):
        if self.k_tilde < 1:
            raise InvalidConfigError("k_tilde must be >= 1")
        if self.rho_sep is not None and not self.rho_sep > 0:
            raise InvalidConfigError("rho_sep must be positive")
        if self.gamma < 4.0:
            raise InvalidConfigError("gamma must be >= 4")
        if self.removals_per_step < 1:
            raise InvalidConfigError("removals_per_step must be >= 1")
        if self.sigma_sq < 0:
            raise InvalidConfigError("sigma_sq must be nonnegative")


@dataclass
class RsgeOutcome:
    """Robust mean estimate plus the removal / certificate trace."""

    estimate: SparseVector
    removed_ids: np.ndarray
    lambda_trace: list
    rho_trace: list
    certified: bool

    @property
    def steps(self) -> int:
        return len(self.lambda_trace)


@dataclass
class Certified:
    estimate: SparseVector
    lambda_star: float
    rho: float
    solution: SparsePcaSolution


@dataclass
class Removed:
    batch: GradientBatch
    removed_ids: np.ndarray
    scores: np.ndarray
    lambda_star: float
    rho: float
    solution: SparsePcaSolution


def rho_sep_default(g_norm_sq: float, sigma_sq: float, c_gamma: float) -> float:
    """Certification threshold c_gamma * (||G||^2 + sigma^2)."""
    if g_norm_sq < 0 or sigma_sq < 0 or c_gamma < 0:
        raise InvalidInputError("rho_sep inputs must be nonnegative")
    return c_gamma * (g_norm_sq + sigma_sq)


def gradient_samples(dataset, beta) -> GradientBatch:
    """Per-sample squared-loss gradients x_i (x_i^T beta - y_i), ids preserved."""
    beta_vec = np.asarray(getattr(beta, "values", beta), dtype=float)
    if beta_vec.shape[0] != dataset.d:
        raise InvalidInputError("beta has wrong dimension for the dataset")
    residuals = dataset.xs @ beta_vec - dataset.ys
    return GradientBatch(dataset.xs * residuals[:, None], np.arange(dataset.n))


def _effective_rho(cfg: FilterConfig, g_hat: np.ndarray) -> float:
    if cfg.rho_sep is not None:
        return cfg.rho_sep
    if cfg.g_norm_sq_override is not None:
        g_norm_sq = cfg.g_norm_sq_override
    else:
        g_norm_sq = float(g_hat @ g_hat)
    return max(rho_sep_default(g_norm_sq, cfg.sigma_sq, cfg.c_gamma), RHO_FLOOR)


def _screen_support(centered_sq_mean: np.ndarray, g_hat: np.ndarray, limit: int) -> np.ndarray:
    by_variance = np.argsort(-centered_sq_mean, kind="stable")[:limit]
    return np.union1d(by_variance, np.flatnonzero(g_hat))


def _solve_on_support(batch, g_hat, cfg, state):
    """Covariance relaxation, restricted to a screened support when configured.

    The restriction only ever lowers lambda*, so a certificate obtained on
    the restricted problem is optimistic; with the screening below the top
    variance directions are always included and the loss is negligible at
    the scales this is enabled for.  Returns (solution, support, centered
    samples on the support, new warm-start state).
    """
    n, d = batch.samples.shape
    if cfg.support_limit is not None and cfg.support_limit < d:
        diag = ((batch.samples - g_hat) ** 2).mean(axis=0)
        support = _screen_support(diag, g_hat, cfg.support_limit)
    else:
        support = np.arange(d)

    centered = batch.samples[:, support] - g_hat[support]
    cov = centered.T @ centered / n
    warm = None
    if state is not None and np.array_equal(state[0], support):
        warm = state[1]
    sol = solve_relaxation(cov, cfg.k_tilde, cfg.solver, warm_start=warm)
    return sol, support, centered, (support, sol)


def _filter_step(batch: GradientBatch, cfg: FilterConfig, rng, state=None):
    if batch.n < 2:
        raise InvalidInputError("filtering needs at least 2 samples")
    mean = batch.samples.mean(axis=0)
    g_hat = hard_threshold_array(mean, 2 * cfg.k_tilde)
    rho = _effective_rho(cfg, g_hat)

    sol, support, centered, state = _solve_on_support(batch, g_hat, cfg, state)
    if sol.lambda_star <= rho:
        estimate = SparseVector(g_hat, min(2 * cfg.k_tilde, batch.d))
        return Certified(estimate, sol.lambda_star, rho, sol), state

    h = sol.h_star.entries
    scores = ((centered @ h) * centered).sum(axis=1)
    np.clip(scores, 0.0, None, out=scores)
    total = scores.sum()
    if not total > 0:
        raise DegenerateScoresError("lambda* exceeded rho_sep but all scores are zero")

    # zero-score samples have zero removal probability, so a batched removal
    # can draw at most as many samples as there are positive scores
    positive = int(np.count_nonzero(scores))
    n_remove = min(cfg.removals_per_step, batch.n - 1, positive)
    chosen = rng.choice(batch.n, size=n_remove, replace=False, p=scores / total)
    keep = np.ones(batch.n, dtype=bool)
    keep[chosen] = False
    removed = Removed(
        batch=batch.subset(keep),
        removed_ids=batch.source_ids[np.sort(chosen)],
        scores=scores,
        lambda_star=sol.lambda_star,
        rho=rho,
        solution=sol,
    )
    return removed, state


def filter_step(batch: GradientBatch, cfg: FilterConfig, rng):
    """One certify-or-remove round; returns Certified or Removed."""
    return _filter_step(batch, cfg, rng)[0]


def default_max_removals(n: int, gamma: float, epsilon: float | None) -> int:
    """Removal budget ceil(1.1 * gamma / (gamma - 1) * eps * n), or n/4 if eps unknown."""
    if epsilon is None:
        return n // 4
    return math.ceil(1.1 * gamma / (gamma - 1.0) * epsilon * n)


def estimate_sparse_mean_filter(batch: GradientBatch, cfg: FilterConfig, rng=None) -> RsgeOutcome:
    """Run filter rounds until certification or the removal cap is reached."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    n0 = batch.n
    budget = cfg.max_removals
    if budget is None:
        budget = default_max_removals(n0, cfg.gamma, cfg.epsilon)
    budget = min(budget, n0 - 2)
    if budget < 0:
        raise InvalidConfigError("max_removals must be nonnegative")

    removed: list = []
    lambda_trace: list = []
    rho_trace: list = []
    state = None
    step_cfg = cfg
    while True:
        remaining = budget - len(removed)
        if remaining < step_cfg.removals_per_step:
            if remaining <= 0:
                break
            step_cfg = replace(cfg, removals_per_step=remaining)
        result, state = _filter_step(batch, step_cfg, rng, state=state)
        lambda_trace.append(result.lambda_star)
        rho_trace.append(result.rho)
        if isinstance(result, Certified):
            return RsgeOutcome(
                estimate=result.estimate,
                removed_ids=np.asarray(removed, dtype=np.int64),
                lambda_trace=lambda_trace,
                rho_trace=rho_trace,
                certified=True,
            )
        removed.extend(result.removed_ids.tolist())
        batch = result.batch

    # removal cap reached without a certificate: return the current estimate
    mean = batch.samples.mean(axis=0)
    g_hat = hard_threshold_array(mean, 2 * cfg.k_tilde)
    return RsgeOutcome(
        estimate=SparseVector(g_hat, min(2 * cfg.k_tilde, batch.d)),
        removed_ids=np.asarray(removed, dtype=np.int64),
        lambda_trace=lambda_trace,
        rho_trace=rho_trace,
        certified=False,
    )
