"""Synthetic data for robust sparse regression and sparse mean estimation.

Generates Gaussian-design sparse linear-model samples, applies adversarial
corruption strategies, and pre-prunes gross outliers.  All generators are
pure functions of (config, rng) for reproducibility.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .sparse import SparseVector

COVARIANCE_SPARSITY_CUTOFF = 1e-6


def covariance_toeplitz(d: int) -> np.ndarray:
    """Toeplitz covariance with squared-exponential decay exp(-(i-j)^2)."""
    if d < 1:
        raise InvalidInputError("dimension must be >= 1")
    idx = np.arange(d)
    return np.exp(-((idx[:, None] - idx[None, :]) ** 2.0))


def _row_sparsity(matrix: np.ndarray, cutoff: float = COVARIANCE_SPARSITY_CUTOFF) -> int:
    return int((np.abs(matrix) >= cutoff).sum(axis=1).max())


@dataclass
class IdentityCovariance:
    kind: str = field(default="identity", init=False)

    def materialize(self, d: int) -> np.ndarray:
        return np.eye(d)

    def row_sparsity(self, d: int) -> int:
        return 1


@dataclass
class ToeplitzCovariance:
    kind: str = field(default="toeplitz", init=False)

    def materialize(self, d: int) -> np.ndarray:
        return covariance_toeplitz(d)

    def row_sparsity(self, d: int) -> int:
        return _row_sparsity(self.materialize(d))


@dataclass
class ExplicitSparseCovariance:
    matrix: np.ndarray
    r: int
    kind: str = field(default="explicit", init=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise InvalidConfigError("covariance must be square")
        if self.r < 1:
            raise InvalidConfigError("row sparsity r must be >= 1")

    def materialize(self, d: int) -> np.ndarray:
        if self.matrix.shape[0] != d:
            raise InvalidConfigError("explicit covariance has wrong dimension")
        return self.matrix

    def row_sparsity(self, d: int) -> int:
        return self.r


@dataclass
class ModelConfig:
    """Ground-truth generative parameters of the sparse linear model."""

    d: int
    k: int
    sigma: float
    beta_star: SparseVector
    covariance: IdentityCovariance | ToeplitzCovariance | ExplicitSparseCovariance = field(
        default_factory=IdentityCovariance
    )

    def __post_init__(self):
        if self.d < 1 or not (1 <= self.k <= self.d):
            raise InvalidConfigError("need 1 <= k <= d")
        if self.sigma < 0:
            raise InvalidConfigError("sigma must be nonnegative")
        if self.beta_star.dim != self.d:
            raise InvalidConfigError("beta_star has wrong dimension")
        if self.beta_star.nnz > self.k:
            raise InvalidConfigError("beta_star exceeds the sparsity budget k")
        diag = np.diag(self.covariance.materialize(self.d))
        if (diag > 1.0 + 1e-9).any():
            raise InvalidConfigError("covariance diagonal entries must be <= 1")

    @classmethod
    def with_random_support(cls, d, k, sigma, rng, covariance=None):
        """Standard setup: k random coordinates of beta* set to +/-1."""
        support = rng.choice(d, size=k, replace=False)
        beta = np.zeros(d)
        beta[support] = rng.choice([-1.0, 1.0], size=k)
        return cls(
            d=d,
            k=k,
            sigma=sigma,
            beta_star=SparseVector(beta, k),
            covariance=covariance or IdentityCovariance(),
        )


@dataclass
class CorruptedDataset:
    """Covariate/response pairs plus the ground-truth outlier mask.

    The mask exists only for evaluation; estimators must never read it.
    For sparse mean estimation the rows of ``xs`` are the sample vectors
    themselves and ``ys`` is all zeros.
    """

    xs: np.ndarray
    ys: np.ndarray
    outlier_mask: np.ndarray
    attack: dict = field(default_factory=lambda: {"name": "none"})

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        self.outlier_mask = np.asarray(self.outlier_mask, dtype=bool)
        if self.xs.ndim != 2:
            raise InvalidInputError("xs must be a 2-d array")
        if not (len(self.xs) == len(self.ys) == len(self.outlier_mask)):
            raise InvalidInputError("xs, ys and outlier_mask must have equal length")

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def d(self) -> int:
        return self.xs.shape[1]

    @property
    def n_outliers(self) -> int:
        return int(self.outlier_mask.sum())


def _covariance_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        if vals.min() < -1e-9:
            raise InvalidConfigError("covariance is not positive semidefinite")
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def generate_clean(model: ModelConfig, n: int, rng) -> CorruptedDataset:
    """Draw n samples of y = x^T beta* + noise with the configured covariance."""
    if n < 1:
        raise InvalidConfigError("need n >= 1")
    z = rng.standard_normal((n, model.d))
    if isinstance(model.covariance, IdentityCovariance):
        xs = z
    else:
        xs = z @ _covariance_factor(model.covariance.materialize(model.d)).T
    ys = xs @ model.beta_star.values
    if model.sigma > 0:
        ys = ys + model.sigma * rng.standard_normal(n)
    return CorruptedDataset(xs, ys, np.zeros(n, dtype=bool))


def generate_gradient_samples(g_target: np.ndarray, sigma: float, n: int, rng) -> CorruptedDataset:
    """Samples whose population mean is ``g_target`` under the gradient model.

    Each row is x <x, g> - noise * x with x standard Gaussian, i.e. the
    residual gradient of a squared loss whose population gradient equals
    ``g_target`` under identity covariance.  Rows live in ``xs``; ``ys`` is
    unused and zero.
    """
    g = np.asarray(g_target, dtype=float)
    xs = rng.standard_normal((n, g.shape[0]))
    samples = xs * (xs @ g)[:, None]
    if sigma > 0:
        samples = samples - xs * (sigma * rng.standard_normal(n))[:, None]
    return CorruptedDataset(samples, np.zeros(n), np.zeros(n, dtype=bool))


@dataclass
class SignFlipAttack:
    """Outlier covariates from a random +/-1 matrix A with responses -A beta*."""

    beta_star: np.ndarray

    name: str = field(default="sign_flip", init=False)

    def draw(self, m: int, d: int, rng):
        beta = np.asarray(self.beta_star, dtype=float)
        if beta.shape[0] != d:
            raise InvalidConfigError("beta_star has wrong dimension for the attack")
        a = rng.choice([-1.0, 1.0], size=(m, d))
        return a, -(a @ beta)

    def describe(self) -> dict:
        return {"name": self.name}


@dataclass
class OrthogonalMeanAttack:
    """Outlier vectors orthogonal to the target mean, all at one shared point.

    By default the direction is a random Gaussian vector projected
    orthogonal to the target mean and rescaled; with ``direction_sparsity``
    set, it is instead a random sign pattern on that many coordinates
    outside the target support (still exactly orthogonal), which
    concentrates the corruption where a sparse estimator must look.
    ``norm_scale`` multiplies the baseline outlier norm ||g_target||.
    Designed for sample sets whose rows are the vectors being averaged
    (mean estimation), so responses are zero.
    """

    g_target: np.ndarray
    norm_scale: float = 1.0
    direction_sparsity: int | None = None

    name: str = field(default="orthogonal_mean", init=False)

    def draw(self, m: int, d: int, rng):
        g = np.asarray(self.g_target, dtype=float)
        if g.shape[0] != d:
            raise InvalidConfigError("g_target has wrong dimension for the attack")
        g_norm = np.linalg.norm(g)
        if g_norm == 0:
            raise InvalidConfigError("orthogonal attack needs a nonzero target mean")
        if self.direction_sparsity is None:
            u = rng.standard_normal(d)
            u -= (u @ g) / g_norm**2 * g
            u /= np.linalg.norm(u)
        else:
            off_support = np.flatnonzero(g == 0.0)
            s = min(self.direction_sparsity, off_support.shape[0])
            if s == 0:
                raise InvalidConfigError("no off-support coordinates for a sparse direction")
            u = np.zeros(d)
            u[rng.choice(off_support, size=s, replace=False)] = rng.choice(
                [-1.0, 1.0], size=s
            ) / np.sqrt(s)
        point = self.norm_scale * g_norm * u
        return np.tile(point, (m, 1)), np.zeros(m)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "norm_scale": self.norm_scale,
            "direction_sparsity": self.direction_sparsity,
        }


def corrupt(ds: CorruptedDataset, epsilon: float, strategy, rng, mode: str = "append") -> CorruptedDataset:
    """Apply an adversarial corruption so outliers form an epsilon-fraction.

    ``append`` adds m = round(eps*n/(1-eps)) adversarial rows so that the
    outliers are an epsilon-fraction of the enlarged set; ``replace``
    overwrites a uniformly chosen round(eps*n) subset in place.  Clean
    samples' values are never modified.
    """
    if not (0.0 <= epsilon < 0.5):
        raise InvalidConfigError("epsilon must lie in [0, 1/2)")
    if mode not in ("append", "replace"):
        raise InvalidConfigError(f"unknown corruption mode {mode!r}")
    if epsilon == 0.0:
        return CorruptedDataset(ds.xs.copy(), ds.ys.copy(), ds.outlier_mask.copy(), dict(ds.attack))

    n = ds.n
    if mode == "append":
        m = int(round(epsilon * n / (1.0 - epsilon)))
        m = max(m, 1)
        bad_x, bad_y = strategy.draw(m, ds.d, rng)
        xs = np.vstack([ds.xs, bad_x])
        ys = np.concatenate([ds.ys, bad_y])
        mask = np.concatenate([ds.outlier_mask, np.ones(m, dtype=bool)])
    else:
        m = max(int(round(epsilon * n)), 1)
        victims = rng.choice(n, size=m, replace=False)
        bad_x, bad_y = strategy.draw(m, ds.d, rng)
        xs = ds.xs.copy()
        ys = ds.ys.copy()
        mask = ds.outlier_mask.copy()
        xs[victims] = bad_x
        ys[victims] = bad_y
        mask[victims] = True

    attack = strategy.describe()
    attack.update({"epsilon": epsilon, "mode": mode})
    return CorruptedDataset(xs, ys, mask, attack)


def default_prune_radius(n: int, d: int) -> float:
    return 10.0 * np.sqrt(d * np.log(max(n, 2)))


def prune_gross_outliers(ds: CorruptedDataset, radius: float) -> CorruptedDataset:
    """Drop samples far outside any plausible radius for the clean model.

    A crude response bound is derived from the median |y|, so clean Gaussian
    samples survive the default radius with overwhelming probability.
    """
    if not radius > 0:
        raise InvalidInputError("radius must be positive")
    x_norms = np.linalg.norm(ds.xs, axis=1)
    norm_bound = 1.5 * float(np.median(np.abs(ds.ys))) if ds.n else 0.0
    keep = (x_norms <= radius) & (np.abs(ds.ys) <= radius * (norm_bound + 1.0))
    return CorruptedDataset(ds.xs[keep], ds.ys[keep], ds.outlier_mask[keep], dict(ds.attack))


def save_dataset(ds: CorruptedDataset, csv_path) -> None:
    """Write samples as CSV (y, x0..x_{d-1}) plus a JSON sidecar with the mask."""
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"x{j}" for j in range(ds.d)])
        for i in range(ds.n):
            writer.writerow([repr(float(ds.ys[i]))] + [repr(float(v)) for v in ds.xs[i]])
    sidecar = {
        "attack": ds.attack,
        "outlier_mask": ds.outlier_mask.astype(int).tolist(),
        "n": ds.n,
        "d": ds.d,
    }
    csv_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))


def load_dataset(csv_path) -> CorruptedDataset:
    csv_path = Path(csv_path)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows)
    sidecar = json.loads(csv_path.with_suffix(".json").read_text())
    mask = np.asarray(sidecar["outlier_mask"], dtype=bool)
    return CorruptedDataset(data[:, 1:], data[:, 0], mask, sidecar["attack"])
