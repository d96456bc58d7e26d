import math

import numpy as np
import pytest

from mmvsbl import runner
from mmvsbl.config import protocol_config
from mmvsbl.exceptions import ConfigError
from mmvsbl.models import ExperimentConfig, GridCell, SourceModel, TrialRecord
from mmvsbl.runner import build_grid, lambda_grid_search, run_experiment, support_bound_audit


def _tiny(**changes):
    base = dict(experiment_id="tiny", n=6, m_over_n=[2.0], l_values=[2], k_values=[2],
                snr_db=[None], beta_values=[0.5], algorithms=["tsbl", "tmsbl", "msbl"],
                trials=2, master_seed=7, timestamp=False)
    base.update(changes)
    return ExperimentConfig(**base)


class TestBuildGrid:

    def test_axis_order(self):
        cells = build_grid(_tiny(l_values=[1, 2], k_values=[1, 2, 3], beta_values=[0.0, 0.9]))
        assert len(cells) == 12
        assert [c.index for c in cells] == list(range(12))
        assert (cells[0].l, cells[0].k, cells[0].beta) == (1, 1, 0.0)
        assert (cells[1].l, cells[1].k, cells[1].beta) == (1, 1, 0.9)
        assert (cells[2].k, cells[2].beta) == (2, 0.0)
        assert cells[6].l == 2

    def test_noiseless_cells(self):
        cells = build_grid(_tiny(snr_db=[None, 20.0]))
        assert cells[0].noiseless and math.isinf(cells[0].snr_db)
        assert cells[1].snr_db == 20.0

    def test_hadamard_protocol_has_reference_cell(self):
        cells = build_grid(protocol_config("G"))
        assert all((c.n, c.m) == (40, 128) for c in cells)
        assert len(cells) == 22 and [c.c for c in cells[:-1]] == [float(c) for c in range(-10, 11)]
        assert cells[-1].beta == 1.0 and cells[-1].c is None
        assert all(c.c is not None for c in cells[:-1])

    def test_non_ar1_sources(self):
        config = _tiny(source=SourceModel(kind="ar", order=1), orders=[1, 2, 3])
        cells = build_grid(config)
        assert [c.order for c in cells] == [1, 2, 3]
        assert all(math.isnan(c.beta) for c in cells)


class TestRunExperiment:

    def test_one_record_per_algorithm(self):
        records = run_experiment(_tiny(trials=1))
        assert [r.algorithm for r in records] == ["tsbl", "tmsbl", "msbl"]
        assert all(r.trial == 0 and r.cell.index == 0 for r in records)
        assert all(math.isnan(r.wall_ms) for r in records)

    def test_same_records_for_any_worker_count(self):
        config = _tiny(k_values=[1, 2], trials=3)
        serial = run_experiment(config)
        parallel = run_experiment(_tiny(k_values=[1, 2], trials=3, jobs=2))
        assert [r.key() for r in serial] == [r.key() for r in parallel]
        np.testing.assert_array_equal([r.mse for r in serial], [r.mse for r in parallel])
        assert [r.failure for r in serial] == [r.failure for r in parallel]
        assert [r.iterations for r in serial] == [r.iterations for r in parallel]

    def test_solver_error_is_recorded(self, monkeypatch):
        def broken(problem, opts):
            raise FloatingPointError("boom")

        monkeypatch.setitem(runner.SOLVERS, "msbl", broken)
        records = run_experiment(_tiny(trials=1))
        failed = [r for r in records if r.algorithm == "msbl"]
        assert failed[0].failure and failed[0].error_tag == "FloatingPointError"
        assert math.isnan(failed[0].mse)
        assert all(not r.error_tag for r in records if r.algorithm != "msbl")

    def test_progress_callback(self):
        calls = []
        run_experiment(_tiny(trials=3), progress=lambda done, total: calls.append((done, total)))
        assert calls[-1] == (3, 3)
        assert [done for done, _ in calls] == sorted(done for done, _ in calls)

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            run_experiment(_tiny(trials=0))


class TestSupportBoundAudit:

    @staticmethod
    def _record(card, converged=True):
        cell = GridCell(index=0, n=3, m=9, l=2, k=1, snr_db=math.inf, beta=0.0)
        return TrialRecord(cell=cell, trial=0, algorithm="tmsbl", failure=False, mse=0.0,
                           gamma_card=card, converged=converged)

    def test_bound(self):
        assert support_bound_audit([self._record(6), self._record(2)]) == (6, True)
        assert support_bound_audit([self._record(7)]) == (7, False)

    def test_unconverged_ignored(self):
        assert support_bound_audit([self._record(9, converged=False)]) == (0, True)

    def test_real_run_respects_bound(self):
        _, ok = support_bound_audit(run_experiment(_tiny(trials=2)))
        assert ok


class TestLambdaSearch:

    def test_picks_a_candidate(self):
        calls = []
        config = _tiny(snr_db=[20.0])
        result = lambda_grid_search(config, "tmsbl", candidates=[1e-3, 1e-1], pilot_trials=2,
                                    progress=lambda done, total: calls.append(done))
        assert result.best_lambda in (1e-3, 1e-1)
        assert [row["lambda"] for row in result.table] == [1e-3, 1e-1]
        assert calls == [1, 2]

    def test_tie_breaks_on_smaller_lambda(self, monkeypatch):
        def constant(config, progress=None):
            cell = build_grid(config)[0]
            return [TrialRecord(cell=cell, trial=0, algorithm="msbl", failure=False, mse=1.0)]

        monkeypatch.setattr(runner, "run_experiment", constant)
        result = lambda_grid_search(_tiny(), "msbl", candidates=[0.5, 0.01, 0.1], pilot_trials=1)
        assert result.best_lambda == 0.01

    def test_bad_inputs(self):
        with pytest.raises(ConfigError):
            lambda_grid_search(_tiny(), "omp")
        with pytest.raises(ConfigError):
            lambda_grid_search(_tiny(), "msbl", candidates=[0.0])
