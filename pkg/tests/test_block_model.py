import math

import numpy as np
import pytest

from mmvsbl.block_model import (
    ar1_toeplitz, build_block_dictionary, cost, initial_lambda, map_estimate,
    measurement_covariance, posterior_moments, reduced_posterior,
)
from mmvsbl.exceptions import DimensionOverflowError, InvalidProblemError
from mmvsbl.models import Hyperparams, MmvProblem
from tests.oracles import dense_cost, dense_dictionary, dense_posterior, dense_sigma_y, make_instance


class TestBuildBlockDictionary:

    def test_scalar(self):
        np.testing.assert_array_equal(build_block_dictionary(np.array([[2.0]]), 2), [[2, 0], [0, 2]])

    def test_identity(self):
        np.testing.assert_array_equal(build_block_dictionary(np.eye(2), 3), np.eye(6))

    def test_vec_identity(self, rng):
        """(Φ⊗I)·vec(Xᵀ) = vec((ΦX)ᵀ)."""
        phi = rng.standard_normal((2, 3))
        x = rng.standard_normal((3, 2))
        d = build_block_dictionary(phi, 2)
        np.testing.assert_allclose(d @ x.ravel(), (phi @ x).ravel(), atol=1e-12)
        np.testing.assert_array_equal(d, dense_dictionary(phi, 2))

    def test_cap_exceeded(self):
        with pytest.raises(DimensionOverflowError, match="T-MSBL"):
            build_block_dictionary(np.ones((10, 20)), 4, cap=100)

    def test_cap_from_environment(self, monkeypatch):
        monkeypatch.setenv("MMVSBL_KRON_CAP", "10")
        with pytest.raises(DimensionOverflowError):
            build_block_dictionary(np.ones((2, 3)), 2)

    def test_l_zero_rejected(self):
        with pytest.raises(InvalidProblemError):
            build_block_dictionary(np.eye(2), 0)


class TestCost:

    def test_scalar_unit_covariance(self):
        problem = MmvProblem([[1.0]], [[2.0]])
        value = cost(problem, Hyperparams([1.0], [[1.0]], 1e-12))
        assert value == pytest.approx(4.0, abs=1e-9)

    def test_scalar_noise_only(self):
        problem = MmvProblem([[1.0]], [[2.0]])
        value = cost(problem, Hyperparams([0.0], [[1.0]], 3.0))
        assert value == pytest.approx(4.0 / 3.0 + math.log(3.0), rel=1e-12)

    def test_matches_dense(self, rng):
        problem, hyper = make_instance(rng, 3, 5, 2)
        np.testing.assert_allclose(cost(problem, hyper), dense_cost(problem, hyper), rtol=1e-10)

    def test_sigma_y_matches_dense(self, small_instance):
        problem, hyper = small_instance
        np.testing.assert_allclose(measurement_covariance(problem, hyper),
                                   dense_sigma_y(problem, hyper), atol=1e-12)

    def test_scale_invariance(self, small_instance):
        """γ ← cγ, B ← B/c deja el coste igual."""
        problem, hyper = small_instance
        scaled = hyper.with_updates(gamma=3.0 * hyper.gamma, b_mat=hyper.b_mat / 3.0)
        assert cost(problem, scaled) == pytest.approx(cost(problem, hyper), rel=1e-12)

    def test_invalid_hyper_rejected(self, small_instance):
        problem, hyper = small_instance
        with pytest.raises(InvalidProblemError):
            cost(problem, hyper.with_updates(lam=0.0))
        with pytest.raises(InvalidProblemError):
            cost(problem, Hyperparams(np.ones(problem.m + 1), hyper.b_mat, 1.0))


class TestPosteriorMoments:

    def test_zero_gamma(self, rng):
        problem, hyper = make_instance(rng, 3, 6, 2, zero_gamma=range(6))
        moments = posterior_moments(problem, hyper)
        np.testing.assert_array_equal(moments.mu_x, 0.0)
        np.testing.assert_array_equal(moments.sigma_x_blocks, 0.0)

    def test_determined_noiseless(self, rng):
        y = rng.standard_normal((2, 3))
        problem = MmvProblem(np.eye(2), y)
        moments = posterior_moments(problem, Hyperparams(np.ones(2), np.eye(3), 1e-12))
        np.testing.assert_allclose(moments.mu_matrix, y, atol=1e-6)

    def test_blocks_match_dense(self, rng):
        problem, hyper = make_instance(rng, 4, 8, 3)
        mu, sigma_x = dense_posterior(problem, hyper)
        moments = posterior_moments(problem, hyper)
        np.testing.assert_allclose(moments.mu_x, mu, atol=1e-10)
        for i in range(problem.m):
            block = sigma_x[i * 3:(i + 1) * 3, i * 3:(i + 1) * 3]
            np.testing.assert_allclose(moments.sigma_x_blocks[i], block, atol=1e-9)

    def test_pruned_rows_exactly_zero(self, rng):
        problem, hyper = make_instance(rng, 4, 8, 2, zero_gamma=[1, 5])
        moments = posterior_moments(problem, hyper)
        np.testing.assert_array_equal(moments.mu_matrix[[1, 5]], 0.0)
        np.testing.assert_array_equal(moments.sigma_x_blocks[[1, 5]], 0.0)


class TestMapEstimate:

    def test_zero_gamma(self, rng):
        problem, hyper = make_instance(rng, 3, 6, 2, zero_gamma=range(6))
        np.testing.assert_array_equal(map_estimate(problem, hyper), np.zeros((6, 2)))

    def test_primal_form(self, rng):
        """(λΣ0⁻¹ + DᵀD)⁻¹Dᵀy coincide con Σ0Dᵀ(λI + DΣ0Dᵀ)⁻¹y."""
        problem, hyper = make_instance(rng, 4, 8, 3, lam=0.1)
        d = dense_dictionary(problem.phi, 3)
        sigma0_inv = np.kron(np.diag(1.0 / hyper.gamma), np.linalg.inv(hyper.b_mat))
        primal = np.linalg.solve(hyper.lam * sigma0_inv + d.T @ d, d.T @ problem.y_vec)
        np.testing.assert_allclose(map_estimate(problem, hyper).ravel(), primal, atol=1e-10)

    def test_determined_system(self, rng):
        phi = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        y = rng.standard_normal((3, 2))
        x_hat = map_estimate(MmvProblem(phi, y), Hyperparams(np.ones(3), np.eye(2), 1e-12))
        np.testing.assert_allclose(x_hat, np.linalg.solve(phi, y), atol=1e-6)

    def test_never_builds_dictionary(self, small_instance, monkeypatch):
        problem, hyper = small_instance
        calls = []
        original = np.kron
        monkeypatch.setattr(np, "kron", lambda a, b: calls.append(np.shape(a)) or original(a, b))
        map_estimate(problem, hyper)
        assert all(shape != problem.phi.shape for shape in calls)


class TestReducedPosterior:

    def test_identity_b_matches_block_model(self, rng):
        """Con B = I la media reducida coincide con la del modelo por bloques."""
        problem, hyper = make_instance(rng, 4, 8, 2, zero_gamma=[3])
        hyper = hyper.with_updates(b_mat=np.eye(2))
        x_cur, xi_diag = reduced_posterior(problem.phi, problem.y_mat, hyper.gamma, hyper.lam)
        moments = posterior_moments(problem, hyper)
        np.testing.assert_allclose(x_cur, moments.mu_matrix, atol=1e-10)
        np.testing.assert_allclose(xi_diag, moments.sigma_x_blocks[:, 0, 0], atol=1e-10)
        assert xi_diag[3] == 0.0

    def test_all_pruned(self, rng):
        x_cur, xi_diag = reduced_posterior(np.eye(2), np.ones((2, 3)), np.zeros(2), 1.0)
        np.testing.assert_array_equal(x_cur, 0.0)
        np.testing.assert_array_equal(xi_diag, 0.0)


def test_initial_lambda_floor():
    assert initial_lambda(np.zeros((3, 2)), 1e-2, 1e-12) == 1e-12
    assert initial_lambda(np.ones((2, 2)), 1e-2, 1e-12) == pytest.approx(1e-2 * 2.0 / 2)


class TestAr1Toeplitz:

    def test_entries(self):
        b = ar1_toeplitz(0.5, 3)
        np.testing.assert_allclose(b, [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]])

    def test_is_valid_b(self):
        hyper = Hyperparams(np.ones(2), ar1_toeplitz(-0.9, 4), 1.0)
        assert hyper.validate() == []

    def test_unit_beta_rejected(self):
        with pytest.raises(InvalidProblemError):
            ar1_toeplitz(1.0, 3)
