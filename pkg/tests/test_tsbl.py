import numpy as np
import pytest

from mmvsbl import tsbl
from mmvsbl.datagen import generate_problem, trial_seeds
from mmvsbl.exceptions import AllPrunedError, DimensionOverflowError, NotPositiveDefiniteError
from mmvsbl.metrics import nonzero_rows
from mmvsbl.models import (
    DictionaryKind, Hyperparams, LambdaPolicy, MmvProblem, PosteriorMoments, SourceModel, TsblOptions,
)
from mmvsbl.tsbl import (
    normalize_b, tsbl_b_update, tsbl_em_step, tsbl_gamma_update, tsbl_lambda_rule, tsbl_solve,
)
from tests.oracles import dense_tsbl_step, make_instance, random_spd

NOISELESS = LambdaPolicy.fixed(1e-9)


class TestUpdateRules:

    def test_gamma_fixed_point(self, rng):
        """μ_x^i = 0 y Σ_x^i = c·B dan γ_i = c."""
        b = random_spd(3, rng)
        second = (0.7 * b)[None]
        np.testing.assert_allclose(tsbl_gamma_update(second, b), [0.7], rtol=1e-12)

    def test_gamma_inactive_stays_zero(self, rng):
        b = random_spd(2, rng)
        second = np.stack([b, 2 * b])
        gamma = tsbl_gamma_update(second, b, active=np.array([True, False]))
        assert gamma[1] == 0.0

    def test_b_single_source(self, rng):
        b = random_spd(3, rng)
        second = (2.0 * b)[None]
        np.testing.assert_allclose(tsbl_b_update(second, np.array([4.0])), b / 2.0, rtol=1e-12)

    def test_b_without_active_returns_fallback(self):
        fallback = np.diag([2.0, 1.0])
        np.testing.assert_array_equal(
            tsbl_b_update(np.zeros((3, 2, 2)), np.zeros(3), fallback=fallback), fallback)

    def test_b_stays_spd_with_fewer_sources_than_l(self, rng):
        """Dos fuentes de rango uno con L = 4: la media es singular y B sale SPD."""
        vectors = rng.standard_normal((2, 4))
        second = np.einsum('is,it->ist', vectors, vectors)
        b = tsbl_b_update(second, np.array([1.0, 3.0]))
        np.testing.assert_allclose(b, b.T)
        eigvals = np.linalg.eigvalsh(b)
        assert eigvals[0] > 0.0
        assert eigvals[0] >= 0.5 * tsbl.B_EIG_FLOOR * eigvals[-1]

    def test_normalize_keeps_product(self, rng):
        b = 5.0 * random_spd(3, rng)
        gamma = np.array([0.2, 0.0, 1.5])
        b_norm, gamma_norm = normalize_b(b, gamma)
        assert np.trace(b_norm) == pytest.approx(3.0)
        np.testing.assert_allclose(gamma_norm[:, None, None] * b_norm, gamma[:, None, None] * b, rtol=1e-12)
        assert gamma_norm[1] == 0.0

    def test_lambda_zero_residual_zero_previous(self, rng):
        phi = rng.standard_normal((3, 5))
        mu = rng.standard_normal((5, 2))
        problem = MmvProblem(phi, phi @ mu)
        hyper = Hyperparams(np.ones(5), np.eye(2), 0.0)
        moments = PosteriorMoments(mu.ravel(), np.zeros((5, 2, 2)))
        assert tsbl_lambda_rule(problem, hyper, moments) == pytest.approx(0.0, abs=1e-12)


class TestEmStep:

    def test_matches_dense_em(self, rng):
        """γ_i·B y λ de un paso coinciden con el EM que materializa Σ_x completa."""
        problem, hyper = make_instance(rng, 4, 8, 2, lam=0.2)
        updated, _ = tsbl_em_step(problem, hyper, TsblOptions())
        gamma, b_mat, lam = dense_tsbl_step(problem, hyper)
        np.testing.assert_allclose(updated.gamma[:, None, None] * updated.b_mat,
                                   gamma[:, None, None] * b_mat, rtol=1e-10, atol=1e-14)
        assert np.trace(updated.b_mat) == pytest.approx(problem.l)
        assert updated.lam == pytest.approx(lam, rel=1e-10)

    def test_fixed_lambda_untouched(self, small_instance):
        problem, hyper = small_instance
        updated, _ = tsbl_em_step(problem, hyper, TsblOptions(lambda_policy=LambdaPolicy.fixed(0.3)))
        assert updated.lam == 0.3

    def test_all_pruned_raises(self, small_instance):
        problem, hyper = small_instance
        with pytest.raises(AllPrunedError):
            tsbl_em_step(problem, hyper.with_updates(gamma=np.full(problem.m, 1e-7)), TsblOptions())


class TestSolve:

    def test_zero_measurements(self, rng):
        phi = rng.standard_normal((4, 8))
        result = tsbl_solve(MmvProblem(phi, np.zeros((4, 2))), TsblOptions(lambda_policy=NOISELESS))
        np.testing.assert_array_equal(result.x_hat, 0.0)
        assert result.gamma_card == 0
        assert result.converged

    def test_cost_trace_and_callback(self, small_instance):
        problem, _ = small_instance
        states = []
        result = tsbl_solve(problem, TsblOptions(max_iters=15), states.append)
        assert len(result.cost_trace) == result.iterations == len(states)
        assert [s.iteration for s in states] == list(range(1, result.iterations + 1))

    def test_learned_lambda_cost_non_increasing(self, rng):
        problem, _ = make_instance(rng, 4, 8, 2, lam=1.0)
        opts = TsblOptions(max_iters=30, prune_thresh=1e-300, gamma_tol=1e-12)
        trace = np.array(tsbl_solve(problem, opts).cost_trace)
        assert np.all(np.diff(trace) <= 1e-8 * np.maximum(np.abs(trace[:-1]), 1.0))

    def test_pruned_rows_are_zero(self, small_instance):
        problem, _ = small_instance
        result = tsbl_solve(problem, TsblOptions(max_iters=200, lambda_policy=LambdaPolicy.fixed(0.05)))
        inactive = np.setdiff1d(np.arange(problem.m), result.active_set)
        np.testing.assert_array_equal(result.x_hat[inactive], 0.0)
        assert result.algorithm == "tsbl"

    def test_noiseless_recovery(self):
        """N=10, M=20, L=4, K=3, β=0.9 sin ruido: soporte exacto en casi todos los ensayos."""
        model = SourceModel(kind="common_ar1", beta=0.9)
        hits = 0
        for trial in range(10):
            problem = generate_problem(10, 20, 4, 3, None, model, DictionaryKind(), trial_seeds(7, 0, trial))
            result = tsbl_solve(problem, TsblOptions(lambda_policy=NOISELESS))
            hits += set(nonzero_rows(result.x_hat).tolist()) == set(problem.truth.support.tolist())
        assert hits >= 9

    def test_b_spd_every_iteration(self):
        """K = 3 < L = 4: B sigue siendo SPD tras cada iteración y la traza de coste es finita."""
        model = SourceModel(kind="common_ar1", beta=0.9)
        for trial in range(3):
            problem = generate_problem(10, 20, 4, 3, None, model, DictionaryKind(), trial_seeds(7, 0, trial))
            states = []
            result = tsbl_solve(problem, TsblOptions(lambda_policy=NOISELESS), states.append)
            assert all(np.linalg.eigvalsh(s.b_mat)[0] > 0.0 for s in states)
            assert np.all(np.isfinite(result.cost_trace))

    def test_cost_failure_does_not_stop_solver(self, small_instance, monkeypatch):
        def broken(problem, hyper):
            raise NotPositiveDefiniteError("Σ_y no es definida positiva")

        monkeypatch.setattr(tsbl, "cost", broken)
        problem, _ = small_instance
        result = tsbl_solve(problem, TsblOptions(max_iters=5))
        assert len(result.cost_trace) == result.iterations
        assert np.all(np.isnan(result.cost_trace))

    def test_identity_switch_pins_b(self):
        model = SourceModel(kind="common_ar1", beta=0.5)
        problem = generate_problem(10, 20, 3, 3, None, model, DictionaryKind(), trial_seeds(3, 0, 0))
        result = tsbl_solve(problem, TsblOptions(lambda_policy=NOISELESS, b_identity_switch=True))
        assert result.gamma_card < problem.n
        np.testing.assert_array_equal(result.hyper.b_mat, np.eye(3))

    def test_dimension_cap(self, small_instance, monkeypatch):
        monkeypatch.setenv("MMVSBL_KRON_CAP", "16")
        problem, _ = small_instance
        with pytest.raises(DimensionOverflowError):
            tsbl_solve(problem)
