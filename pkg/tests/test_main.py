import json
import logging

import pytest

from mmvsbl import cli_helpers
from mmvsbl.main import build_parser, main
from mmvsbl.models import ExperimentConfig
from mmvsbl.persistence import save_config


@pytest.fixture(autouse=True)
def _restore_log_level():
    root = logging.getLogger()
    level = root.level
    yield
    root.setLevel(level)


@pytest.fixture
def printed(monkeypatch):
    lines = []
    monkeypatch.setattr(cli_helpers, "print_plain", lines.append)
    return lines


def _exit_code(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    return info.value.code


class TestParser:

    def test_run_flags(self):
        args = build_parser().parse_args(["run", "--protocol", "A", "--trials", "5", "--no-timestamp"])
        assert (args.command, args.protocol, args.trials, args.no_timestamp) == ("run", "A", 5, True)

    def test_config_and_protocol_exclusive(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "--config", "a.json", "--protocol", "A"])

    def test_lambda_search_needs_algorithm(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["lambda-search", "--protocol", "B"])


class TestPrintDefaults:

    def test_default_json(self, printed):
        main(["--quiet", "print-defaults"])
        data = json.loads(printed[0])
        assert data == ExperimentConfig(jobs=data["jobs"], output_dir=data["output_dir"]).to_dict()

    def test_protocol_json(self, printed):
        main(["--quiet", "print-defaults", "--protocol", "G"])
        assert json.loads(printed[0])["dictionary"]["kind"] == "hadamard_rows"

    def test_template(self, tmp_path):
        path = tmp_path / "template.json"
        main(["--quiet", "print-defaults", "--template", str(path)])
        assert "_INSTRUCTIONS" in json.loads(path.read_text(encoding="utf-8"))

    def test_unknown_protocol(self):
        assert _exit_code(["--quiet", "print-defaults", "--protocol", "Z"]) == 1


class TestRun:

    def _config_file(self, tmp_path, **changes):
        base = dict(experiment_id="cli", n=5, m_over_n=[2.0], l_values=[1, 2], k_values=[2],
                    algorithms=["tmsbl", "msbl"], trials=2, output_dir=str(tmp_path / "out"))
        base.update(changes)
        path = tmp_path / "config.json"
        save_config(ExperimentConfig(**base), path)
        return path

    def test_writes_outputs(self, tmp_path):
        path = self._config_file(tmp_path)
        main(["--quiet", "run", "--config", str(path), "--no-timestamp"])
        out = tmp_path / "out"
        raw = (out / "cli_trials.csv").read_text(encoding="utf-8")
        assert raw.startswith("schema_version,")
        assert len(raw.strip().splitlines()) == 1 + 2 * 2 * 2
        assert (out / "cli_aggregate.csv").exists()
        assert (out / "cli_l.svg").exists()

    def test_cli_overrides(self, tmp_path):
        path = self._config_file(tmp_path)
        main(["--quiet", "run", "--config", str(path), "--trials", "1", "--out", str(tmp_path / "alt"),
              "--no-timestamp"])
        raw = (tmp_path / "alt" / "cli_trials.csv").read_text(encoding="utf-8")
        assert len(raw.strip().splitlines()) == 1 + 2 * 2

    def test_invalid_config(self, tmp_path):
        path = self._config_file(tmp_path, k_values=[50])
        assert _exit_code(["--quiet", "run", "--config", str(path)]) == 1

    def test_missing_config(self, tmp_path):
        assert _exit_code(["--quiet", "run", "--config", str(tmp_path / "none.json")]) == 1


class TestVerify:

    def test_small_suite_passes(self):
        main(["--quiet", "verify", "--scale", "0.1"])
