import numpy as np
import pytest

from mmvsbl.config import (
    DEFAULT_ETA, DEFAULT_LAMBDA_GRID, NOISELESS_LAMBDA, PROTOCOLS, cell_dimensions,
    default_experiment_config, get_default_jobs, get_kron_cap, get_output_dir, load_environment,
    protocol_config, regime_for_snr, solver_options, validate_config,
)
from mmvsbl.exceptions import InvalidProblemError
from mmvsbl.models import BPolicy, ExperimentConfig, LambdaPolicy, TmsblOptions, TsblOptions


class TestRegimes:

    @pytest.mark.parametrize("snr,regime", [
        (None, "noiseless"), (float("inf"), "noiseless"), (25.0, "high_snr"),
        (20.0, "moderate_snr"), (15.1, "moderate_snr"), (15.0, "low_snr"), (5.0, "low_snr"),
    ])
    def test_boundaries(self, snr, regime):
        assert regime_for_snr(snr) == regime

    def test_noiseless_preset(self):
        opts = solver_options("tmsbl", None)
        assert isinstance(opts, TmsblOptions)
        assert opts.lambda_policy == LambdaPolicy.fixed(NOISELESS_LAMBDA)
        assert opts.b_policy == BPolicy.plain()
        assert not opts.low_snr_lambda_mod

    def test_moderate_preset(self):
        opts = solver_options("tmsbl", 18.0)
        assert opts.lambda_policy.is_learned
        assert opts.low_snr_lambda_mod
        assert opts.b_policy.kind == "plain"
        assert not opts.b_identity_switch

    def test_low_snr_preset(self):
        tmsbl = solver_options("tmsbl", 10.0)
        assert tmsbl.b_policy == BPolicy.regularized(DEFAULT_ETA)
        assert tmsbl.b_identity_switch
        tsbl = solver_options("tsbl", 10.0)
        assert type(tsbl) is TsblOptions
        assert tsbl.b_identity_switch
        assert not solver_options("msbl", 10.0).b_identity_switch

    def test_overrides(self):
        opts = solver_options("msbl", 25.0, {"lambda_policy": {"kind": "fixed", "value": 0.01},
                                             "max_iters": 10})
        assert opts.lambda_policy == LambdaPolicy.fixed(0.01)
        assert opts.max_iters == 10

    def test_unknown_override(self):
        with pytest.raises(InvalidProblemError):
            solver_options("tsbl", None, {"b_policy": {"kind": "plain"}})

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            solver_options("omp", None)


class TestEnvironment:

    def test_defaults(self, monkeypatch):
        for name in ("MMVSBL_JOBS", "MMVSBL_OUTPUT_DIR", "MMVSBL_KRON_CAP"):
            monkeypatch.delenv(name, raising=False)
        assert get_default_jobs() == 1
        assert get_output_dir() == "outputs"
        assert get_kron_cap() == 20_000_000

    def test_overrides(self, monkeypatch):
        monkeypatch.setenv("MMVSBL_JOBS", "4")
        monkeypatch.setenv("MMVSBL_OUTPUT_DIR", "/tmp/bench")
        assert get_default_jobs() == 4
        assert get_output_dir() == "/tmp/bench"
        assert default_experiment_config().jobs == 4

    def test_bad_integer_falls_back(self, monkeypatch):
        monkeypatch.setenv("MMVSBL_JOBS", "many")
        assert get_default_jobs() == 1

    def test_dotenv_file(self, tmp_path, monkeypatch):
        # setenv + delenv para que monkeypatch limpie lo que cargue dotenv
        monkeypatch.setenv("MMVSBL_KRON_CAP", "1")
        monkeypatch.delenv("MMVSBL_KRON_CAP")
        env = tmp_path / ".env"
        env.write_text("MMVSBL_KRON_CAP=123\n", encoding="utf-8")
        assert load_environment(str(env))
        assert get_kron_cap() == 123


class TestProtocols:

    @pytest.mark.parametrize("name", sorted(PROTOCOLS))
    def test_presets_are_valid(self, name):
        assert validate_config(protocol_config(name)) == []

    def test_unknown_protocol(self):
        with pytest.raises(KeyError):
            protocol_config("Z")

    def test_hadamard_dimensions(self):
        config = protocol_config("G")
        assert cell_dimensions(config, config.m_over_n[0]) == (40, 128)
        assert config.include_beta_one

    def test_extreme_correlation_grid(self):
        """Protocolo G barre los 21 enteros c = −10, …, 10, c = 1 incluido."""
        config = protocol_config("G")
        assert config.c_values == [float(c) for c in range(-10, 11)]
        assert 1.0 in config.c_values

    def test_ar_protocol_samples_full_stable_region(self):
        config = protocol_config("D")
        assert config.source.kind == "ar"
        assert config.source.coeff_range is None
        assert config.orders == [1, 2, 3]

    def test_noiseless_replication_cell(self):
        config = protocol_config("A")
        assert cell_dimensions(config, 5.0) == (25, 125)
        assert config.l_values == [1, 2, 3, 4]
        assert config.beta_values == [-0.9, -0.5, 0.0, 0.5, 0.9, 0.99]

    def test_lambda_grid(self):
        np.testing.assert_allclose(DEFAULT_LAMBDA_GRID, np.logspace(-4, 0, 9))


class TestValidateConfig:

    def test_default_is_valid(self):
        assert validate_config(default_experiment_config()) == []

    def test_k_above_m(self):
        errors = validate_config(ExperimentConfig(n=4, m_over_n=[2.0], k_values=[9]))
        assert any("K=9" in e for e in errors)

    def test_beta_out_of_range(self):
        assert validate_config(ExperimentConfig(beta_values=[1.0]))
        assert validate_config(ExperimentConfig(beta_values=[-1.5]))

    def test_bad_overrides(self):
        config = ExperimentConfig(solver_overrides={"tmsbl": {"max_iters": 0}})
        assert any("max_iters" in e for e in validate_config(config))

    def test_basic_fields(self):
        errors = validate_config(ExperimentConfig(trials=0, algorithms=["omp"], l_values=[]))
        assert len(errors) >= 3
