"""Randomized-removal robust sparse mean estimation."""

import numpy as np
import pytest

from robustiht import (
    Certified,
    CorruptedDataset,
    FilterConfig,
    GradientBatch,
    InvalidConfigError,
    InvalidInputError,
    ModelConfig,
    OrthogonalMeanAttack,
    Removed,
    corrupt,
    estimate_sparse_mean_filter,
    filter_step,
    generate_clean,
    generate_gradient_samples,
    gradient_samples,
    rho_sep_default,
    sparse_largest_eigenvalue_bf,
)
from robustiht.filtering import default_max_removals
from robustiht.sparse_pca import SolverOptions

FAST_SOLVER = SolverOptions(value_tolerance=1e-5, stall_window=40, max_iterations=1000)


def jittered_cluster_batch():
    """99 near-zero samples plus one spike at (10, 0); d=2, k_tilde=1."""
    samples = np.zeros((100, 2))
    samples[:99, 1] = 0.001 * np.where(np.arange(99) % 2 == 0, 1.0, -1.0)
    samples[99] = [10.0, 0.0]
    return GradientBatch.from_samples(samples)


class TestGradientSamples:
    def test_hand_computed_gradient(self):
        ds = CorruptedDataset(np.array([[1.0, 2.0]]), np.array([3.0]), np.array([False]))
        batch = gradient_samples(ds, np.array([1.0, 0.0]))
        # residual = 1*1 + 2*0 - 3 = -2, so g = (-2, -4)
        np.testing.assert_array_equal(batch.samples, [[-2.0, -4.0]])

    def test_zero_cases(self):
        ds = CorruptedDataset(np.array([[1.0, 0.0]]), np.array([0.0]), np.array([False]))
        batch = gradient_samples(ds, np.zeros(2))
        np.testing.assert_array_equal(batch.samples, [[0.0, 0.0]])

    def test_gradients_vanish_at_truth_noiseless(self):
        model = ModelConfig.with_random_support(6, 2, 0.0, np.random.default_rng(0))
        ds = generate_clean(model, 40, np.random.default_rng(1))
        batch = gradient_samples(ds, model.beta_star)
        np.testing.assert_allclose(batch.samples, 0.0, atol=1e-12)

    def test_dimension_mismatch(self):
        ds = CorruptedDataset(np.ones((3, 4)), np.ones(3), np.zeros(3, dtype=bool))
        with pytest.raises(InvalidInputError):
            gradient_samples(ds, np.ones(5))


class TestRhoSepDefault:
    def test_formula(self):
        assert rho_sep_default(0.0, 1.0, 10.0) == 10.0
        assert rho_sep_default(5.0, 0.0, 10.0) == 50.0

    def test_sign_pattern_mean_norm(self):
        g = np.ones(5)  # +/-1 entries of sparsity 5 have squared norm 5
        assert rho_sep_default(float(g @ g), 0.0, 10.0) == 50.0

    def test_rejects_negative(self):
        with pytest.raises(InvalidInputError):
            rho_sep_default(-1.0, 0.0, 1.0)


class TestFilterStep:
    def test_identical_samples_certify(self):
        g = np.array([2.0, -1.0, 0.5])
        batch = GradientBatch.from_samples(np.tile(g, (20, 1)))
        cfg = FilterConfig(k_tilde=1, solver=FAST_SOLVER)
        result = filter_step(batch, cfg, np.random.default_rng(0))
        assert isinstance(result, Certified)
        np.testing.assert_array_equal(result.estimate.values, [2.0, -1.0, 0.0])

    def test_spike_triggers_removal_with_expected_scores(self):
        batch = jittered_cluster_batch()
        cfg = FilterConfig(k_tilde=1, rho_sep=0.9, solver=FAST_SOLVER)
        result = filter_step(batch, cfg, np.random.default_rng(1))
        assert isinstance(result, Removed)

        # oracle: with H* ~ e1 e1^T, tau_i = (x_i1 - mean1)^2
        mean1 = batch.samples[:, 0].mean()
        assert mean1 == pytest.approx(0.1)
        expected_lambda = np.mean((batch.samples[:, 0] - mean1) ** 2)
        assert expected_lambda == pytest.approx(0.99, abs=1e-9)
        assert result.lambda_star == pytest.approx(expected_lambda, rel=1e-3)

        spike_share = result.scores[99] / result.scores.sum()
        assert spike_share > 0.9
        assert result.batch.n == 99

    def test_removal_distribution_matches_scores(self):
        # 8 samples on one axis with distinct spreads; k_tilde=1 so H* ~ e1e1^T
        values = np.array([-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 5.0])
        samples = np.zeros((8, 2))
        samples[:, 0] = values
        batch = GradientBatch.from_samples(samples)
        cfg = FilterConfig(k_tilde=1, rho_sep=1e-6, solver=FAST_SOLVER)

        probe = filter_step(batch, cfg, np.random.default_rng(0))
        assert isinstance(probe, Removed)
        target = probe.scores / probe.scores.sum()

        rng = np.random.default_rng(123)
        counts = np.zeros(8)
        trials = 10_000
        for _ in range(trials):
            result = filter_step(batch, cfg, rng)
            counts[result.removed_ids[0]] += 1
        tv = 0.5 * np.abs(counts / trials - target).sum()
        assert tv < 0.02

    def test_batch_too_small(self):
        batch = GradientBatch.from_samples(np.zeros((1, 3)))
        with pytest.raises(InvalidInputError):
            filter_step(batch, FilterConfig(k_tilde=1), np.random.default_rng(0))

    def test_batched_removals(self):
        batch = jittered_cluster_batch()
        cfg = FilterConfig(k_tilde=1, rho_sep=0.5, removals_per_step=5, solver=FAST_SOLVER)
        result = filter_step(batch, cfg, np.random.default_rng(2))
        assert isinstance(result, Removed)
        assert result.removed_ids.shape[0] == 5
        assert result.batch.n == 95
        assert np.unique(result.removed_ids).shape[0] == 5


class TestEstimateSparseMeanFilter:
    def test_clean_batch_certifies_immediately(self):
        model = ModelConfig.with_random_support(10, 3, 0.0, np.random.default_rng(3))
        ds = generate_clean(model, 200, np.random.default_rng(4))
        batch = gradient_samples(ds, model.beta_star)
        cfg = FilterConfig(k_tilde=6, sigma_sq=0.0, solver=FAST_SOLVER)
        outcome = estimate_sparse_mean_filter(batch, cfg)
        assert outcome.certified
        assert outcome.steps == 1
        assert outcome.removed_ids.size == 0
        np.testing.assert_allclose(outcome.estimate.values, 0.0, atol=1e-10)

    def test_attack_removals_hit_true_outliers(self):
        hits, totals = [], []
        for seed in range(6):
            rng = np.random.default_rng(1000 + seed)
            d, k, eps = 30, 3, 0.1
            g = np.zeros(d)
            g[rng.choice(d, size=k, replace=False)] = rng.choice([-1.0, 1.0], size=k)
            n = int(k * k * np.log(d) / eps)
            ds = generate_gradient_samples(g, 0.0, n, rng)
            ds = corrupt(ds, eps, OrthogonalMeanAttack(g, 8.0, direction_sparsity=k), rng)
            batch = GradientBatch.from_samples(ds.xs)
            cfg = FilterConfig(
                k_tilde=k, c_gamma=4.0, g_norm_sq_override=float(g @ g),
                epsilon=eps, removals_per_step=2, solver=FAST_SOLVER,
            )
            outcome = estimate_sparse_mean_filter(batch, cfg, rng)
            assert outcome.removed_ids.size > 0
            hits.append(ds.outlier_mask[outcome.removed_ids].sum())
            totals.append(outcome.removed_ids.size)
        assert sum(hits) / sum(totals) >= 0.6

    def test_cap_reached_returns_uncertified_estimate(self):
        batch = jittered_cluster_batch()
        cfg = FilterConfig(k_tilde=1, rho_sep=1e-9, max_removals=3, solver=FAST_SOLVER)
        outcome = estimate_sparse_mean_filter(batch, cfg)
        assert not outcome.certified
        assert outcome.removed_ids.size == 3
        assert outcome.estimate.values.shape == (2,)
        assert len(outcome.lambda_trace) == 3

    def test_seeded_determinism(self):
        batch = jittered_cluster_batch()
        cfg = FilterConfig(k_tilde=1, rho_sep=1e-3, max_removals=20, seed=5, solver=FAST_SOLVER)
        a = estimate_sparse_mean_filter(batch, cfg)
        b = estimate_sparse_mean_filter(batch, cfg)
        np.testing.assert_array_equal(a.removed_ids, b.removed_ids)
        np.testing.assert_array_equal(a.estimate.values, b.estimate.values)
        assert a.lambda_trace == b.lambda_trace

    def test_batch_shrinks_each_step(self):
        batch = jittered_cluster_batch()
        cfg = FilterConfig(k_tilde=1, rho_sep=1e-9, max_removals=10, solver=FAST_SOLVER)
        outcome = estimate_sparse_mean_filter(batch, cfg)
        assert len(outcome.lambda_trace) == 10
        assert outcome.removed_ids.size == 10

    def test_certificate_bounds_sparse_eigenvalue(self):
        rng = np.random.default_rng(8)
        samples = rng.standard_normal((300, 6))
        batch = GradientBatch.from_samples(samples)
        cfg = FilterConfig(k_tilde=2, rho_sep=10.0)
        outcome = estimate_sparse_mean_filter(batch, cfg, rng)
        assert outcome.certified
        mean = samples.mean(axis=0)
        from robustiht.sparse import hard_threshold_array

        centered = samples - hard_threshold_array(mean, 4)
        second_moment = centered.T @ centered / samples.shape[0]
        bf, _, _ = sparse_largest_eigenvalue_bf(second_moment, 2)
        assert bf <= outcome.lambda_trace[-1] + 1e-4

    def test_scores_nonnegative_and_normalized(self):
        batch = jittered_cluster_batch()
        cfg = FilterConfig(k_tilde=1, rho_sep=0.5, solver=FAST_SOLVER)
        result = filter_step(batch, cfg, np.random.default_rng(3))
        assert (result.scores >= 0.0).all()
        p = result.scores / result.scores.sum()
        assert p.sum() == pytest.approx(1.0, abs=1e-12)


class TestConfigValidation:
    def test_gamma_floor(self):
        with pytest.raises(InvalidConfigError):
            FilterConfig(k_tilde=1, gamma=2.0)

    def test_rho_positive(self):
        with pytest.raises(InvalidConfigError):
            FilterConfig(k_tilde=1, rho_sep=0.0)

    def test_default_max_removals(self):
        # ceil(1.1 * gamma/(gamma-1) * eps * n) at gamma=4 is ceil(22/15 * eps * n)
        assert default_max_removals(1000, 4.0, 0.1) == 147
        assert default_max_removals(1000, 4.0, None) == 250

    def test_unique_ids_required(self):
        with pytest.raises(InvalidInputError):
            GradientBatch(np.zeros((2, 2)), np.array([1, 1]))
