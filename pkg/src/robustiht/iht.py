"""Iterative hard thresholding driven by a pluggable robust gradient estimator.

Starting from zero, each iteration estimates the population gradient from
(possibly corrupted) samples via the configured robust estimator and takes
the hard-thresholded step beta <- H_{k'}(beta - eta * estimate).  Sample
splitting into per-iteration subsets is available as a flag but off by
default: refiltering the full sample set every iteration matches how the
method is actually run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datagen import CorruptedDataset
from .ellipsoid import estimate_sparse_mean_ellipsoid
from .errors import InvalidConfigError, InvalidInputError
from .filtering import (
    RHO_FLOOR,
    FilterConfig,
    GradientBatch,
    estimate_sparse_mean_filter,
    gradient_samples,
    rho_sep_default,
)
from .sparse import SparseVector, hard_threshold_array
from .sparse_pca import SolverOptions


@dataclass
class EllipsoidConfig:
    """Options of the cutting-plane estimator when used inside the loop.

    ``rho_sep=None`` uses the plug-in eps-scaled threshold
    c_rho * epsilon * (||thresholded mean||^2 + sigma_sq).
    """

    k_tilde: int
    epsilon: float
    rho_sep: float | None = None
    c_rho: float = 10.0
    sigma_sq: float = 0.0
    budget: int = 40
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class IhtConfig:
    k_prime: int
    eta: float
    t_max: int
    sample_splitting: bool = False
    rsge_kind: str = "filtering"  # "filtering" | "ellipsoid" | "mean"
    rsge_config: FilterConfig | EllipsoidConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k_prime < 1:
            raise InvalidConfigError("k_prime must be >= 1")
        if not self.eta > 0:
            raise InvalidConfigError("eta must be positive")
        if self.t_max < 1:
            raise InvalidConfigError("t_max must be >= 1")
        if self.rsge_kind not in ("filtering", "ellipsoid", "mean"):
            raise InvalidConfigError(f"unknown rsge_kind {self.rsge_kind!r}")
        if self.rsge_kind == "filtering" and not isinstance(self.rsge_config, FilterConfig):
            raise InvalidConfigError("filtering needs a FilterConfig")
        if self.rsge_kind == "ellipsoid" and not isinstance(self.rsge_config, EllipsoidConfig):
            raise InvalidConfigError("ellipsoid needs an EllipsoidConfig")


@dataclass
class IterationDiagnostics:
    certified: bool
    steps: int
    n_removed: int
    lambda_final: float | None


@dataclass
class IhtTrace:
    """Per-iteration parameter estimates; betas[0] is the zero initializer."""

    betas: list
    errors: list | None
    rsge_diagnostics: list

    @property
    def final(self) -> SparseVector:
        return self.betas[-1]


def iht_step(beta, g_hat, eta: float, k_prime: int) -> SparseVector:
    """One update H_{k'}(beta - eta * g_hat)."""
    beta_vec = np.asarray(getattr(beta, "values", beta), dtype=float)
    g_vec = np.asarray(getattr(g_hat, "values", g_hat), dtype=float)
    if beta_vec.shape != g_vec.shape:
        raise InvalidInputError("beta and gradient estimate have different shapes")
    stepped = beta_vec - eta * g_vec
    return SparseVector(hard_threshold_array(stepped, k_prime), min(k_prime, beta_vec.shape[0]))


def default_hyperparams(k: int, mu_alpha: float, mu_beta: float, norm_beta_star: float, psi: float):
    """(k', eta, t_max) from the convergence analysis.

    k' = ceil((mu_beta/mu_alpha)^2 k), eta = 1/mu_beta, and the iteration
    count scales with log(||beta*|| / sqrt(psi)), clamped to [5, 100].
    """
    if not (0 < mu_alpha <= mu_beta):
        raise InvalidConfigError("need 0 < mu_alpha <= mu_beta")
    if psi <= 0 or norm_beta_star <= 0:
        raise InvalidConfigError("psi and norm_beta_star must be positive")
    k_prime = math.ceil((mu_beta / mu_alpha) ** 2 * k)
    eta = 1.0 / mu_beta
    t_max = math.ceil(10.0 * math.log(norm_beta_star / math.sqrt(psi)))
    return k_prime, eta, min(max(t_max, 5), 100)


def _split_indices(n: int, t_max: int):
    if n < t_max:
        raise InvalidConfigError("dataset smaller than the number of splits")
    return np.array_split(np.arange(n), t_max)


def _run_rsge(batch: GradientBatch, cfg: IhtConfig, rng) -> tuple[np.ndarray, IterationDiagnostics]:
    if cfg.rsge_kind == "mean":
        est = batch.samples.mean(axis=0)
        return est, IterationDiagnostics(True, 0, 0, None)
    if cfg.rsge_kind == "filtering":
        outcome = estimate_sparse_mean_filter(batch, cfg.rsge_config, rng)
    else:
        ecfg = cfg.rsge_config
        rho = ecfg.rho_sep
        if rho is None:
            mean = batch.samples.mean(axis=0)
            g_hat = hard_threshold_array(mean, 2 * ecfg.k_tilde)
            rho = max(
                ecfg.epsilon * rho_sep_default(float(g_hat @ g_hat), ecfg.sigma_sq, ecfg.c_rho),
                RHO_FLOOR,
            )
        outcome = estimate_sparse_mean_ellipsoid(
            batch, ecfg.k_tilde, ecfg.epsilon, rho, math.sqrt(ecfg.sigma_sq), ecfg.budget, ecfg.solver
        )
    diag = IterationDiagnostics(
        certified=outcome.certified,
        steps=outcome.steps,
        n_removed=int(outcome.removed_ids.shape[0]),
        lambda_final=outcome.lambda_trace[-1] if outcome.lambda_trace else None,
    )
    return outcome.estimate.values, diag


def robust_iht(dataset: CorruptedDataset, cfg: IhtConfig, truth=None) -> IhtTrace:
    """Run t_max robust IHT iterations and record the full trace."""
    if dataset.n < 2:
        raise InvalidConfigError("need at least 2 samples")
    truth_vec = None
    if truth is not None:
        truth_vec = np.asarray(getattr(truth, "values", truth), dtype=float)
        if truth_vec.shape[0] != dataset.d:
            raise InvalidInputError("truth has wrong dimension")

    splits = _split_indices(dataset.n, cfg.t_max) if cfg.sample_splitting else None
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.t_max)]

    beta = SparseVector(np.zeros(dataset.d), cfg.k_prime)
    betas = [beta]
    errors = [] if truth_vec is not None else None
    diagnostics = []
    if errors is not None:
        errors.append(float(np.linalg.norm(beta.values - truth_vec)))

    for t in range(cfg.t_max):
        if splits is None:
            subset = dataset
        else:
            idx = splits[t]
            subset = CorruptedDataset(
                dataset.xs[idx], dataset.ys[idx], dataset.outlier_mask[idx], dataset.attack
            )
        batch = gradient_samples(subset, beta)
        estimate, diag = _run_rsge(batch, cfg, rngs[t])
        beta = iht_step(beta, estimate, cfg.eta, cfg.k_prime)
        betas.append(beta)
        diagnostics.append(diag)
        if errors is not None:
            errors.append(float(np.linalg.norm(beta.values - truth_vec)))

    return IhtTrace(betas=betas, errors=errors, rsge_diagnostics=diagnostics)
