import math

import numpy as np
import pytest

from core.autodiff import Tensor, backward, grad_check
from core.exceptions import DomainError, FactorizationError, ShapeError
from priors.gp_prior import (DEFAULT_BASE_JITTER, DEFAULT_PRIOR_NOISE, EECoefficients, GPPriorSet,
                             PriorFactor, cholesky_with_jitter, default_length_scales, ee_penalty,
                             kl_gaussian_vs_gp, normalized_time_grid, prior_factor,
                             se_kernel_matrix)


def exact_factor(K):
    """Factor without jitter, for closed-form spot values"""
    return PriorFactor(chol=np.linalg.cholesky(np.asarray(K, dtype=np.float64)))


class TestKernel:
    def test_time_grid(self):
        assert normalized_time_grid(4).tolist() == [0.0, 0.25, 0.5, 0.75]

    def test_unit_diagonal_and_symmetry(self):
        K = se_kernel_matrix(normalized_time_grid(30), 0.1)
        assert np.array_equal(np.diag(K), np.ones(30))
        assert np.array_equal(K, K.T)

    def test_unit_length_scale_spot_value(self):
        K = se_kernel_matrix(np.array([0.0, 1.0]), 1.0)
        assert K[0, 1] == pytest.approx(math.exp(-0.5), rel=1e-15)
        assert K[0, 1] == pytest.approx(0.60653, abs=1e-5)

    def test_short_length_scale_underflows(self):
        K = se_kernel_matrix(np.array([0.0, 1.0]), 0.01)
        assert K[0, 1] < 1e-300

    @pytest.mark.parametrize("gamma", [0.0, -0.5])
    def test_rejects_non_positive_length_scale(self, gamma):
        with pytest.raises(DomainError):
            se_kernel_matrix(np.array([0.0, 1.0]), gamma)


class TestCholesky:
    def test_identity(self):
        L, jitter = cholesky_with_jitter(np.eye(3), 1e-8)
        assert jitter == 1e-8
        assert np.allclose(L, np.eye(3) * math.sqrt(1 + 1e-8), rtol=0, atol=1e-15)

    def test_two_by_two(self):
        L, _ = cholesky_with_jitter(np.array([[1.0, 0.5], [0.5, 1.0]]))
        assert L[0, 0] == pytest.approx(1.0, abs=1e-7)
        assert L[1, 0] == pytest.approx(0.5, abs=1e-7)
        assert L[1, 1] == pytest.approx(0.86603, abs=1e-5)
        assert L[0, 1] == 0.0

    def test_rank_one_matrix_succeeds(self):
        K = np.ones((2, 2))
        L, jitter = cholesky_with_jitter(K)
        assert np.all(np.isfinite(L))
        assert np.allclose(L @ L.T, K + jitter * np.eye(2), atol=1e-12)

    def test_indefinite_matrix_hits_cap(self):
        with pytest.raises(FactorizationError):
            cholesky_with_jitter(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_asymmetric(self):
        with pytest.raises(DomainError):
            cholesky_with_jitter(np.array([[1.0, 0.5], [0.4, 1.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(ShapeError):
            cholesky_with_jitter(np.ones((2, 3)))

    def test_reconstruction(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            T = int(rng.integers(2, 60))
            K = se_kernel_matrix(normalized_time_grid(T), rng.uniform(0.02, 0.5))
            L, jitter = cholesky_with_jitter(K)
            assert np.all(np.diag(L) > 0)
            assert np.allclose(L, np.tril(L))
            err = np.linalg.norm(L @ L.T - (K + jitter * np.eye(T))) / np.linalg.norm(K)
            assert err < 1e-10


class TestKL:
    def test_identical_distributions(self):
        value = kl_gaussian_vs_gp(np.zeros(4), 1.0, exact_factor(np.eye(4))).item()
        assert abs(value) < 1e-10

    def test_half_mean_squared(self):
        assert kl_gaussian_vs_gp([1.0], 1.0, exact_factor([[1.0]])).item() == 0.5

    def test_variance_only(self):
        value = kl_gaussian_vs_gp([0.0], 2.0, exact_factor([[1.0]])).item()
        assert value == pytest.approx(0.5 * (2.0 - 1.0 - math.log(2.0)), rel=1e-14)
        assert value == pytest.approx(0.15343, abs=1e-5)

    def test_rejects_non_positive_variance(self):
        with pytest.raises(DomainError):
            kl_gaussian_vs_gp([0.0], 0.0, exact_factor([[1.0]]))

    def test_rejects_wrong_length(self):
        with pytest.raises(ShapeError):
            kl_gaussian_vs_gp(np.zeros(3), 1.0, exact_factor(np.eye(4)))

    def test_non_negative_on_random_instances(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            T = int(rng.integers(1, 51))
            prior = prior_factor(normalized_time_grid(T), rng.uniform(0.01, 0.5))
            mu = rng.normal(scale=rng.uniform(0.0, 3.0), size=T)
            value = kl_gaussian_vs_gp(mu, rng.uniform(0.01, 3.0), prior).item()
            assert value >= -1e-8

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(5)
        grid = normalized_time_grid(5)
        mu = Tensor(rng.normal(size=5), requires_grad=True)
        var = Tensor([0.7], requires_grad=True)
        prior = prior_factor(grid, 0.3)
        report = grad_check(lambda: kl_gaussian_vs_gp(mu, var, prior), [mu, var], epsilon=1e-6)
        assert report.max_relative_error < 1e-4

    def test_length_scale_gradient(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            T = int(rng.integers(5, 21))
            grid = normalized_time_grid(T)
            # Γ around one grid step, so neighbouring points stay correlated
            gamma = Tensor(rng.uniform(0.6, 1.1) / T, requires_grad=True)
            mu = Tensor(rng.normal(size=T))
            var = Tensor(rng.uniform(0.2, 1.5))
            report = grad_check(lambda: kl_gaussian_vs_gp(mu, var, prior_factor(grid, gamma)),
                                [gamma], epsilon=1e-6)
            assert report.max_relative_error < 1e-4, f"T={T}"

    def test_gradients_with_noise(self):
        rng = np.random.default_rng(9)
        grid = normalized_time_grid(20)
        gamma = Tensor(0.1, requires_grad=True)
        mu = Tensor(rng.normal(size=20), requires_grad=True)
        var = Tensor([0.05], requires_grad=True)
        report = grad_check(lambda: kl_gaussian_vs_gp(mu, var, prior_factor(grid, gamma, noise=0.01)),
                            [gamma, mu, var], epsilon=1e-6)
        assert report.max_relative_error < 1e-4

    def test_constant_length_scale_gets_no_gradient_slot(self):
        prior = prior_factor(normalized_time_grid(3), 0.2)
        assert prior.length_scale is None


class TestPriorNoise:
    def test_noise_lands_on_the_diagonal(self):
        grid = normalized_time_grid(30)
        factor = prior_factor(grid, 0.1, noise=0.01)
        assert factor.noise == 0.01
        assert factor.jitter == DEFAULT_BASE_JITTER
        assert np.array_equal(np.diag(factor.kernel), np.ones(30))
        expected = se_kernel_matrix(grid, 0.1) + (0.01 + factor.jitter) * np.eye(30)
        assert np.allclose(factor.chol @ factor.chol.T, expected, rtol=0, atol=1e-10)

    def test_rejects_negative_noise(self):
        with pytest.raises(DomainError):
            prior_factor(normalized_time_grid(4), 0.1, noise=-1e-3)
        with pytest.raises(DomainError):
            GPPriorSet(2, 8, noise=-1e-3)

    def test_prior_set_passes_noise_on(self):
        priors = GPPriorSet(2, 12, noise=0.05)
        assert priors.factor(0).noise == 0.05
        assert priors.factor(1).noise == 0.05

    def test_noise_bounds_the_inverse(self):
        grid = normalized_time_grid(200)
        noisy = prior_factor(grid, 0.2, noise=DEFAULT_PRIOR_NOISE)
        bare = prior_factor(grid, 0.2)
        assert np.trace(noisy.inverse) <= 200 / DEFAULT_PRIOR_NOISE * (1 + 1e-6)
        assert np.trace(bare.inverse) > 100 * np.trace(noisy.inverse)

    def test_kl_stays_moderate_at_benchmark_length(self):
        log_var = Tensor(np.full(3, math.log(DEFAULT_PRIOR_NOISE)))
        mu = Tensor(np.zeros((3, 200)))
        noisy = GPPriorSet(3, 200, noise=DEFAULT_PRIOR_NOISE).kl_total(mu, log_var).item()
        bare = GPPriorSet(3, 200).kl_total(mu, log_var).item()
        assert 0.0 <= noisy < 1e4
        assert bare > 1e5


class TestPriorSet:
    def test_default_length_scales_are_distinct(self):
        gammas = default_length_scales(3)
        assert gammas[0] == pytest.approx(0.02)
        assert gammas[-1] == pytest.approx(0.2)
        assert len(set(gammas.tolist())) == 3

    def test_positive_length_scales(self):
        priors = GPPriorSet(3, 10)
        priors.log_length_scales.value[...] = [-50.0, 0.0, 3.0]
        assert np.all(priors.length_scale_values > 0)

    def test_factor_cache(self):
        priors = GPPriorSet(2, 12)
        first = priors.factor(0)
        assert priors.factor(0).chol is first.chol
        priors.log_length_scales.value[0] += 0.1
        assert priors.factor(0).chol is not first.chol

    def test_kl_total_gradients(self):
        rng = np.random.default_rng(2)
        priors = GPPriorSet(2, 8, init_length_scales=[0.08, 0.15])
        mu = Tensor(rng.normal(size=(2, 8)), requires_grad=True)
        log_var = Tensor(np.log([0.3, 0.8]), requires_grad=True)
        params = [priors.log_length_scales, mu, log_var]
        report = grad_check(lambda: priors.kl_total(mu, log_var), params, epsilon=1e-6)
        assert report.max_relative_error < 1e-4

    def test_kl_total_rejects_shapes(self):
        priors = GPPriorSet(2, 8)
        with pytest.raises(ShapeError):
            priors.kl_total(Tensor(np.zeros((3, 8))), Tensor(np.zeros(3)))

    def test_rejects_bad_initial_length_scales(self):
        with pytest.raises(DomainError):
            GPPriorSet(2, 8, init_length_scales=[0.1, 0.0])
        with pytest.raises(ShapeError):
            GPPriorSet(2, 8, init_length_scales=[0.1])


class TestEEPenalty:
    def test_direct_substitution(self):
        coeffs = EECoefficients(1.0, 1.0, 1.0, floor=0.0)
        assert ee_penalty([1.0, 3.0], [0.5, 0.5], coeffs).item() == 5.25

    def test_zero_weights(self):
        coeffs = EECoefficients(0.0, 0.0, 0.0)
        assert ee_penalty([0.1, 0.2, 0.3], [1.0, 2.0, 3.0], coeffs).item() == 0.0

    def test_floor_bounds_equal_length_scales(self):
        coeffs = EECoefficients(1.0, 0.0, 0.0, floor=1e-6)
        assert ee_penalty([1.0, 1.0], [1.0, 1.0], coeffs).item() == pytest.approx(1e6, rel=1e-12)

    def test_repulsion_decreases_with_separation(self):
        coeffs = EECoefficients(1.0, 0.0, 0.0)
        values = [ee_penalty([0.1, 0.1 + d], [1.0, 1.0], coeffs).item() for d in (0.01, 0.05, 0.2, 1.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_rejects_negative_coefficients(self):
        with pytest.raises(DomainError):
            EECoefficients(beta1=-1.0)

    def test_gradients(self):
        gammas = Tensor([0.05, 0.12, 0.3], requires_grad=True)
        variances = Tensor([0.2, 0.4, 0.9], requires_grad=True)
        coeffs = EECoefficients()
        report = grad_check(lambda: ee_penalty(gammas, variances, coeffs), [gammas, variances])
        assert report.max_relative_error < 1e-5

    def test_backward_reaches_both_arguments(self):
        gammas = Tensor([0.1, 0.2], requires_grad=True)
        variances = Tensor([0.5, 0.5], requires_grad=True)
        grads = backward(ee_penalty(gammas, variances, EECoefficients(0.0, 2.0, 3.0)))
        assert grads[gammas].tolist() == [2.0, 2.0]
        assert grads[variances].tolist() == [3.0, 3.0]
