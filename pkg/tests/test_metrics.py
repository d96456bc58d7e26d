import math

import numpy as np
import pytest

from mmvsbl.exceptions import InconsistentSystemError, InvalidProblemError
from mmvsbl.metrics import (
    approx_error, cost_gradient_fd, gamma_card_within_bound, global_min_support_check,
    is_failure, lemma3_gamma, mse, nonzero_rows, source_condition_number,
)
from mmvsbl.models import Hyperparams, MmvProblem, SolverResult
from tests.oracles import random_spd, unit_columns


def _result(x_hat, gamma, converged=True):
    hyper = Hyperparams(gamma, np.eye(x_hat.shape[1]), 1.0)
    return SolverResult(x_hat=x_hat, hyper=hyper, active_set=np.flatnonzero(gamma), converged=converged)


class TestFailure:

    def test_exact_estimate(self, rng):
        x = np.zeros((8, 3))
        x[[1, 4]] = rng.standard_normal((2, 3))
        assert not is_failure(x, [1, 4], 2, "noiseless")
        assert not is_failure(x, [1, 4], 2, "noisy")

    def test_zero_estimate(self):
        assert is_failure(np.zeros((5, 2)), [0], 1, "noiseless")
        assert is_failure(np.zeros((5, 2)), [0, 3], 2, "noisy")

    def test_noisy_ignores_small_rows(self):
        x = np.zeros((6, 2))
        x[[0, 2]] = 1.0
        x[5] = 1e-3
        assert not is_failure(x, [0, 2], 2, "noisy")
        assert is_failure(x, [0, 2], 2, "noiseless")

    def test_unknown_regime(self):
        with pytest.raises(ValueError):
            is_failure(np.ones((2, 1)), [0], 1, "other")

    def test_nonzero_rows_relative(self):
        x = np.array([[1.0], [1e-10], [0.5]])
        np.testing.assert_array_equal(nonzero_rows(x), [0, 2])


class TestMse:

    def test_values(self, rng):
        x = rng.standard_normal((4, 3))
        assert mse(x, x) == 0.0
        assert mse(np.zeros_like(x), x) == pytest.approx(1.0)
        assert mse(2 * x, x) == pytest.approx(1.0)

    def test_zero_reference(self):
        with pytest.raises(InvalidProblemError):
            mse(np.ones((2, 2)), np.zeros((2, 2)))


class TestSourceCondition:

    def test_orthonormal(self):
        x = np.zeros((5, 3))
        x[[0, 2]] = [[1, 0, 0], [0, 1, 0]]
        assert source_condition_number(x, [0, 2]) == pytest.approx(1.0)

    def test_rank_deficient(self):
        x = np.zeros((4, 3))
        x[[1, 3]] = [[1, 2, 3], [2, 4, 6]]
        assert math.isinf(source_condition_number(x, [1, 3]))

    def test_singular_values(self, rng):
        x = np.zeros((6, 4))
        x[[0, 3, 5]] = rng.standard_normal((3, 4))
        s = np.linalg.svd(x[[0, 3, 5]], compute_uv=False)
        assert source_condition_number(x, [0, 3, 5]) == pytest.approx(s[0] / s[-1], rel=1e-12)


class TestLemma3Gamma:

    def test_identity_restriction(self, rng):
        phi = np.hstack([np.eye(3), rng.standard_normal((3, 2))])
        y = rng.standard_normal((3, 4))
        gamma = lemma3_gamma(phi, y, [0, 1, 2], np.eye(4))
        np.testing.assert_allclose(gamma, np.sum(y ** 2, axis=1) / 4, rtol=1e-12)

    def test_identity_b_row_norms(self, rng):
        phi = unit_columns(rng.standard_normal((5, 9)))
        x_tilde = rng.standard_normal((3, 2))
        support = [1, 4, 7]
        gamma = lemma3_gamma(phi, phi[:, support] @ x_tilde, support, np.eye(2))
        np.testing.assert_allclose(gamma, np.sum(x_tilde ** 2, axis=1) / 2, rtol=1e-9)

    def test_stationary_point(self, rng):
        """El gradiente del coste en (γ̂, B, λ=1e−9) es prácticamente nulo."""
        n, m, l = 4, 8, 3
        phi = unit_columns(rng.standard_normal((n, m)))
        support = np.sort(rng.choice(m, size=n, replace=False))
        x_gen = np.zeros((m, l))
        x_gen[support] = rng.standard_normal((n, l))
        problem = MmvProblem(phi, phi @ x_gen)
        b_mat = random_spd(l, rng)
        gamma = np.zeros(m)
        gamma[support] = lemma3_gamma(phi, problem.y_mat, support, b_mat)
        grad = cost_gradient_fd(problem, Hyperparams(gamma, b_mat, 1e-9), support)
        assert np.max(np.abs(grad)) < 1e-4

    def test_inconsistent(self, rng):
        phi = unit_columns(rng.standard_normal((4, 6)))
        with pytest.raises(InconsistentSystemError):
            lemma3_gamma(phi, rng.standard_normal((4, 2)), [0, 1], np.eye(2))

    def test_support_too_large(self, rng):
        with pytest.raises(InvalidProblemError):
            lemma3_gamma(rng.standard_normal((2, 5)), np.ones((2, 1)), [0, 1, 2], np.eye(1))


class TestApproxError:

    def test_identity_b_exact(self, rng):
        phi = rng.standard_normal((3, 6))
        assert approx_error(phi, rng.uniform(0.5, 1.5, 6), np.eye(2), 0.5) < 1e-10

    def test_zero_lambda_exact(self, rng):
        phi = rng.standard_normal((3, 6))
        assert approx_error(phi, rng.uniform(0.5, 1.5, 6), random_spd(3, rng), 0.0) < 1e-10

    def test_generic_positive(self, rng):
        phi = rng.standard_normal((3, 6))
        gamma = rng.uniform(0.5, 1.5, 6)
        b = random_spd(2, rng)
        err = approx_error(phi, gamma, b, 1.0)
        pgp = (phi * gamma) @ phi.T
        exact = np.linalg.inv(np.eye(6) + np.kron(pgp, b))
        approx = np.kron(np.linalg.inv(np.eye(3) + pgp), np.linalg.inv(b))
        assert err > 1e-6
        assert err == pytest.approx(np.linalg.norm(exact - approx) / np.linalg.norm(exact), rel=1e-10)

    def test_size_limit(self):
        with pytest.raises(InvalidProblemError):
            approx_error(np.ones((101, 101)), np.ones(101), np.eye(2), 1.0)


class TestGlobalMinimum:

    def test_exact_recovery(self):
        x = np.zeros((6, 3))
        x[[1, 2]] = 1.0
        assert global_min_support_check(np.ones((4, 6)), np.ones((4, 3)), _result(x, np.ones(6)), [1, 2])

    def test_superset_support(self):
        x = np.zeros((6, 3))
        x[[1, 2, 5]] = 1.0
        assert not global_min_support_check(np.ones((4, 6)), np.ones((4, 3)), _result(x, np.ones(6)), [1, 2])

    def test_uniqueness_condition(self):
        x = np.zeros((6, 1))
        with pytest.raises(InvalidProblemError):
            global_min_support_check(np.ones((2, 6)), np.ones((2, 1)), _result(x, np.ones(6)), [0, 1])


def test_gamma_card_bound():
    gamma = np.ones(10)
    assert not gamma_card_within_bound(_result(np.zeros((10, 2)), gamma), n=4, l=2)
    assert gamma_card_within_bound(_result(np.zeros((10, 2)), gamma, converged=False), n=4, l=2)
    assert gamma_card_within_bound(_result(np.zeros((10, 2)), gamma), n=5, l=2)
