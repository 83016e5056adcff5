"""Robust IHT outer loop."""

import numpy as np
import pytest

from robustiht import (
    EllipsoidConfig,
    FilterConfig,
    IhtConfig,
    InvalidConfigError,
    ModelConfig,
    SignFlipAttack,
    corrupt,
    default_hyperparams,
    generate_clean,
    iht_step,
    robust_iht,
)
from robustiht.sparse import hard_threshold_array
from robustiht.sparse_pca import SolverOptions

FAST_SOLVER = SolverOptions(value_tolerance=1e-5, stall_window=40, max_iterations=1000)


def filter_cfg(k_tilde, eps=None, sigma_sq=0.0, **kw):
    return FilterConfig(
        k_tilde=k_tilde, sigma_sq=sigma_sq, epsilon=eps, solver=FAST_SOLVER, **kw
    )


class TestIhtStep:
    def test_zero_fixed_point(self):
        out = iht_step(np.zeros(3), np.zeros(3), 0.7, 2)
        np.testing.assert_array_equal(out.values, np.zeros(3))

    def test_hand_computed_step(self):
        out = iht_step(np.array([1.0, 0.0]), np.array([1.0, -2.0]), 1.0, 1)
        np.testing.assert_array_equal(out.values, [0.0, 2.0])

    def test_stationary_at_truth(self):
        beta = np.array([0.0, 1.5, -0.5])
        out = iht_step(beta, np.zeros(3), 0.3, 2)
        np.testing.assert_array_equal(out.values, beta)

    def test_result_is_budget_sparse(self):
        rng = np.random.default_rng(0)
        out = iht_step(rng.standard_normal(20), rng.standard_normal(20), 0.5, 4)
        assert out.nnz <= 4

    def test_dimension_mismatch(self):
        with pytest.raises(Exception):
            iht_step(np.zeros(3), np.zeros(4), 1.0, 1)


class TestDefaultHyperparams:
    def test_unit_condition_number(self):
        k_prime, eta, _ = default_hyperparams(5, 1.0, 1.0, np.sqrt(5.0), 1e-4)
        assert k_prime == 5
        assert eta == 1.0

    def test_condition_number_squares(self):
        k_prime, eta, _ = default_hyperparams(5, 0.5, 1.0, np.sqrt(5.0), 1e-4)
        assert k_prime == 20
        assert eta == 1.0

    def test_iteration_clamp(self):
        _, _, t_max = default_hyperparams(5, 1.0, 1.0, np.sqrt(5.0), 1e-12)
        assert 5 <= t_max <= 100
        _, _, t_small = default_hyperparams(5, 1.0, 1.0, 1.0, 0.99)
        assert t_small == 5

    def test_rejects_bad_spectrum(self):
        with pytest.raises(InvalidConfigError):
            default_hyperparams(5, 2.0, 1.0, 1.0, 0.1)


class TestRobustIht:
    def test_clean_data_exact_recovery(self):
        rng = np.random.default_rng(1)
        model = ModelConfig.with_random_support(50, 3, 0.0, rng)
        ds = generate_clean(model, 500, rng)
        cfg = IhtConfig(k_prime=3, eta=1.0, t_max=15, rsge_config=filter_cfg(6), seed=0)
        trace = robust_iht(ds, cfg, truth=model.beta_star)
        assert trace.errors[-1] < 1e-6

    def test_corrupted_recovery_desk_scale(self):
        rng = np.random.default_rng(2)
        model = ModelConfig.with_random_support(40, 3, 0.0, rng)
        ds = corrupt(generate_clean(model, 400, rng), 0.1,
                     SignFlipAttack(model.beta_star.values), rng)
        cfg = IhtConfig(
            k_prime=3, eta=1.0, t_max=12,
            rsge_config=filter_cfg(6, eps=0.1, removals_per_step=4), seed=1,
        )
        trace = robust_iht(ds, cfg, truth=model.beta_star)
        assert trace.errors[-1] ** 2 < 1e-8

    def test_trace_shape_and_initializer(self):
        rng = np.random.default_rng(3)
        model = ModelConfig.with_random_support(10, 2, 0.0, rng)
        ds = generate_clean(model, 60, rng)
        cfg = IhtConfig(k_prime=2, eta=1.0, t_max=4, rsge_config=filter_cfg(4), seed=0)
        trace = robust_iht(ds, cfg, truth=model.beta_star)
        assert len(trace.betas) == 5
        np.testing.assert_array_equal(trace.betas[0].values, np.zeros(10))
        assert len(trace.errors) == 5
        assert len(trace.rsge_diagnostics) == 4

    def test_every_iterate_is_k_prime_sparse(self):
        rng = np.random.default_rng(4)
        model = ModelConfig.with_random_support(30, 3, 0.1, rng)
        ds = corrupt(generate_clean(model, 300, rng), 0.1,
                     SignFlipAttack(model.beta_star.values), rng)
        cfg = IhtConfig(
            k_prime=5, eta=1.0, t_max=6,
            rsge_config=filter_cfg(8, eps=0.1, sigma_sq=0.01, removals_per_step=3), seed=2,
        )
        trace = robust_iht(ds, cfg)
        for beta in trace.betas:
            assert beta.nnz <= 5

    def test_mean_rsge_reproduces_classical_iht_bitwise(self):
        rng = np.random.default_rng(5)
        model = ModelConfig.with_random_support(25, 3, 0.2, rng)
        ds = generate_clean(model, 200, rng)
        cfg = IhtConfig(k_prime=4, eta=0.8, t_max=8, rsge_kind="mean", seed=0)
        trace = robust_iht(ds, cfg)

        beta = np.zeros(25)
        for _ in range(8):
            residuals = ds.xs @ beta - ds.ys
            grad = (ds.xs * residuals[:, None]).mean(axis=0)
            beta = hard_threshold_array(beta - 0.8 * grad, 4)
        np.testing.assert_array_equal(trace.betas[-1].values, beta)

    def test_linear_convergence_before_floor(self):
        rng = np.random.default_rng(6)
        model = ModelConfig.with_random_support(60, 4, 0.0, rng)
        ds = generate_clean(model, 600, rng)
        cfg = IhtConfig(k_prime=4, eta=1.0, t_max=10, rsge_config=filter_cfg(8), seed=0)
        trace = robust_iht(ds, cfg, truth=model.beta_star)
        errors = trace.errors
        floor = max(errors[-1], 1e-13)
        for prev, cur in zip(errors, errors[1:]):
            if prev <= 2 * floor:
                break
            assert cur < prev

    def test_seeded_determinism(self):
        rng = np.random.default_rng(7)
        model = ModelConfig.with_random_support(20, 2, 0.1, rng)
        ds = corrupt(generate_clean(model, 200, rng), 0.15,
                     SignFlipAttack(model.beta_star.values), rng)
        cfg = IhtConfig(
            k_prime=2, eta=1.0, t_max=5,
            rsge_config=filter_cfg(4, eps=0.15, sigma_sq=0.01), seed=11,
        )
        a = robust_iht(ds, cfg, truth=model.beta_star)
        b = robust_iht(ds, cfg, truth=model.beta_star)
        assert a.errors == b.errors
        for x, y in zip(a.betas, b.betas):
            np.testing.assert_array_equal(x.values, y.values)

    def test_sample_splitting(self):
        rng = np.random.default_rng(8)
        model = ModelConfig.with_random_support(15, 2, 0.0, rng)
        ds = generate_clean(model, 400, rng)
        cfg = IhtConfig(
            k_prime=2, eta=1.0, t_max=4, sample_splitting=True,
            rsge_config=filter_cfg(4), seed=0,
        )
        trace = robust_iht(ds, cfg, truth=model.beta_star)
        assert trace.errors[-1] < 1e-3

    def test_splitting_requires_enough_samples(self):
        rng = np.random.default_rng(9)
        model = ModelConfig.with_random_support(10, 2, 0.0, rng)
        ds = generate_clean(model, 3, rng)
        cfg = IhtConfig(
            k_prime=2, eta=1.0, t_max=5, sample_splitting=True,
            rsge_config=filter_cfg(4), seed=0,
        )
        with pytest.raises(InvalidConfigError):
            robust_iht(ds, cfg)

    def test_ellipsoid_rsge_clean_path(self):
        # the weighted-oracle route certifies only at the 1/eps^2 sample scale
        rng = np.random.default_rng(10)
        model = ModelConfig.with_random_support(15, 2, 0.0, rng)
        ds = generate_clean(model, 2000, rng)
        cfg = IhtConfig(
            k_prime=2, eta=1.0, t_max=8, rsge_kind="ellipsoid",
            rsge_config=EllipsoidConfig(k_tilde=4, epsilon=0.1, budget=5, solver=FAST_SOLVER),
            seed=0,
        )
        trace = robust_iht(ds, cfg, truth=model.beta_star)
        assert trace.errors[-1] < 1e-3
        assert all(diag.certified for diag in trace.rsge_diagnostics)

    def test_config_kind_mismatch_rejected(self):
        with pytest.raises(InvalidConfigError):
            IhtConfig(k_prime=2, eta=1.0, t_max=3, rsge_kind="filtering",
                      rsge_config=EllipsoidConfig(k_tilde=2, epsilon=0.1))
