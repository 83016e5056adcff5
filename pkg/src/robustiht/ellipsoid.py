"""Separation-oracle robust sparse mean estimation over sample weights.

The oracle compares the weighted sample covariance against the closed-form
population gradient covariance F(G) = (||G||^2 + sigma^2) I + G G^T (valid
for identity covariates) and either certifies the weights or returns a
cutting hyperplane.  A projected-subgradient driver over the balanced
weight polytope stands in for the full ellipsoid method at desk scale; the
oracle itself is unchanged by that substitution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .filtering import GradientBatch, RsgeOutcome
from .sparse import SparseVector, SymMatrix, hard_threshold_array
from .sparse_pca import SolverOptions, solve_relaxation


def f_covariance(g, sigma: float) -> SymMatrix:
    """Population covariance of gradient samples under identity covariates."""
    g_vec = np.asarray(getattr(g, "values", g), dtype=float)
    if sigma < 0:
        raise InvalidInputError("sigma must be nonnegative")
    d = g_vec.shape[0]
    norm_sq = float(g_vec @ g_vec)
    return SymMatrix((norm_sq + sigma**2) * np.eye(d) + np.outer(g_vec, g_vec))


def smoothness_constants(g, sigma: float):
    """(L_cov, L_F) = (2 ||G||^2 + sigma^2, 4 ||G||)."""
    g_vec = np.asarray(getattr(g, "values", g), dtype=float)
    norm_sq = float(g_vec @ g_vec)
    return 2.0 * norm_sq + sigma**2, 4.0 * float(np.sqrt(norm_sq))


@dataclass
class WeightVector:
    """Sample weights in the balanced polytope {0 <= w <= 1/((1-2eps)n), sum w = 1}."""

    weights: np.ndarray
    epsilon: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if not (0.0 <= self.epsilon < 0.5):
            raise InvalidConfigError("epsilon must lie in [0, 1/2)")
        n = self.weights.shape[0]
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise InvalidConfigError("weights must sum to 1")
        ub = self.upper_bound(n, self.epsilon)
        if self.weights.min() < -1e-12 or self.weights.max() > ub + 1e-12:
            raise InvalidConfigError("weights violate the balanced box bounds")

    @staticmethod
    def upper_bound(n: int, epsilon: float) -> float:
        return 1.0 / ((1.0 - 2.0 * epsilon) * n)

    @classmethod
    def uniform(cls, n: int, epsilon: float) -> "WeightVector":
        return cls(np.full(n, 1.0 / n), epsilon)


def project_weights(v: np.ndarray, epsilon: float) -> WeightVector:
    """Euclidean projection onto the balanced weight polytope.

    The projection is clip(v - theta, 0, ub) for the scalar theta making the
    sum equal one; the sum is monotone in theta so bisection is exact.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    ub = WeightVector.upper_bound(n, epsilon)

    def mass(theta):
        return np.clip(v - theta, 0.0, ub).sum()

    lo = v.min() - ub
    hi = v.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mass(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16 * max(1.0, abs(hi)):
            break
    w = np.clip(v - 0.5 * (lo + hi), 0.0, ub)
    total = w.sum()
    if total > 0:  # absorb the last bisection epsilon
        w = w / total
    np.clip(w, 0.0, ub, out=w)
    return WeightVector(w, epsilon)


@dataclass
class OracleResult:
    verdict: str  # "yes" | "hyperplane"
    lambda_star: float
    h_star: SymMatrix
    estimate: SparseVector
    normal: np.ndarray | None = None
    offset: float | None = None

    def evaluate(self, weights: np.ndarray) -> float:
        if self.verdict != "hyperplane":
            raise InvalidInputError("only hyperplane results can be evaluated")
        return float(self.normal @ weights) - self.offset


def _weighted_mean(samples: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # exactly-uniform weights take the unweighted path so that clean-data
    # results agree bitwise with the filtering estimator
    if weights.max() == weights.min():
        return samples.mean(axis=0)
    return weights @ samples


def separation_oracle(
    w: WeightVector,
    batch: GradientBatch,
    k_tilde: int,
    rho_sep: float,
    sigma: float,
    solver: SolverOptions | None = None,
) -> OracleResult:
    """Certify the weighted sample set or cut it with a separating hyperplane.

    The relaxation runs on the weighted covariance minus F(mean estimate); a
    value above ``rho_sep`` yields the hyperplane l(w') = sum_i a_i w'_i -
    offset with a_i the projection score of sample i, which vanishes at the
    queried weights by construction.
    """
    weights = w.weights
    if weights.shape[0] != batch.n:
        raise InvalidInputError("weights and batch size differ")
    mean = _weighted_mean(batch.samples, weights)
    g_hat = hard_threshold_array(mean, 2 * k_tilde)
    centered = batch.samples - g_hat
    cov = (centered * weights[:, None]).T @ centered
    f_mat = f_covariance(g_hat, sigma).entries
    sol = solve_relaxation(cov - f_mat, k_tilde, solver)
    estimate = SparseVector(g_hat, min(2 * k_tilde, batch.d))

    if sol.lambda_star <= rho_sep:
        return OracleResult("yes", sol.lambda_star, sol.h_star, estimate)

    h = sol.h_star.entries
    normal = ((centered @ h) * centered).sum(axis=1)
    offset = float(np.tensordot(f_mat, h)) + sol.lambda_star
    return OracleResult("hyperplane", sol.lambda_star, sol.h_star, estimate, normal, offset)


def estimate_sparse_mean_ellipsoid(
    batch: GradientBatch,
    k_tilde: int,
    epsilon: float,
    rho_sep: float,
    sigma: float,
    budget: int,
    solver: SolverOptions | None = None,
) -> RsgeOutcome:
    """Cutting-plane search over the weight polytope, certified by the oracle.

    Starts from uniform weights; each hyperplane answer moves the weights
    down the cut normal with step 1/(L sqrt(t)) and projects back onto the
    polytope.  After ``budget`` uncertified queries the best-certificate
    iterate is returned flagged ``certified=False``.
    """
    if budget < 0:
        raise InvalidConfigError("budget must be nonnegative")
    w = WeightVector.uniform(batch.n, epsilon)
    best_estimate = None
    best_lambda = np.inf
    lambda_trace: list = []
    for t in range(1, budget + 1):
        result = separation_oracle(w, batch, k_tilde, rho_sep, sigma, solver)
        lambda_trace.append(result.lambda_star)
        if result.verdict == "yes":
            return RsgeOutcome(
                estimate=result.estimate,
                removed_ids=np.empty(0, dtype=np.int64),
                lambda_trace=lambda_trace,
                rho_trace=[rho_sep] * len(lambda_trace),
                certified=True,
            )
        if result.lambda_star < best_lambda:
            best_lambda = result.lambda_star
            best_estimate = result.estimate
        scale = float(np.abs(result.normal).max())
        if scale <= 0:
            break
        step = 1.0 / (scale * np.sqrt(t))
        w = project_weights(w.weights - step * result.normal, epsilon)

    if best_estimate is None:
        mean = batch.samples.mean(axis=0)
        best_estimate = SparseVector(
            hard_threshold_array(mean, 2 * k_tilde), min(2 * k_tilde, batch.d)
        )
    return RsgeOutcome(
        estimate=best_estimate,
        removed_ids=np.empty(0, dtype=np.int64),
        lambda_trace=lambda_trace,
        rho_trace=[rho_sep] * len(lambda_trace),
        certified=False,
    )
