"""
Tests for the command-line interface: output formats and exit codes.

Output goes through --out so that log lines on stderr never mix into the
payload being checked.

Run with: pytest tests/test_cli.py -v
"""

import json
import logging

import pytest
from click.testing import CliRunner

import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from app.config import DATA_DIR  # noqa: E402
from app.errors import MissingCellError  # noqa: E402
from app.main import EXIT_CONFIG, EXIT_SOLVER, cli  # noqa: E402
from app.services.experiments import CSV_COLUMNS  # noqa: E402

TOY5_SCENARIO = str(DATA_DIR / "scenarios" / "toy5.env")


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

@pytest.fixture(autouse=True)
def restore_logging():
    """The CLI reconfigures the root logger; put the previous handlers back."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def invoke(runner, tmp_path):
    """Run the CLI with --out; returns (result, output text or None)."""
    def _invoke(*args, out_name="out.txt"):
        out = tmp_path / out_name
        result = runner.invoke(cli, ["--out", str(out), *args])
        text = out.read_text(encoding="utf-8") if out.exists() else None
        return result, text
    return _invoke


# ===================================================================
# 1. Successful runs
# ===================================================================


class TestCommands:
    def test_opf_json(self, invoke):
        result, text = invoke("--config", TOY5_SCENARIO, "opf")
        assert result.exit_code == 0, result.output
        payload = json.loads(text)
        assert payload["cost"] == pytest.approx(2800.0)
        assert payload["attribution"]["data_center_share"] == pytest.approx(100.0 / 370.0)

    def test_opf_csv(self, invoke):
        result, text = invoke("--config", TOY5_SCENARIO, "--format", "csv", "opf")
        assert result.exit_code == 0, result.output
        lines = text.strip().split("\n")
        assert lines[0] == "generator,bus,fuel,p_g"
        assert len(lines) == 1 + 5

    def test_lmce_with_verification(self, invoke):
        result, text = invoke("--network", str(DATA_DIR / "two_bus"), "lmce", "--verify")
        assert result.exit_code == 0, result.output
        rows = json.loads(text)["table"]
        for row in rows:
            assert row["lmce"] == pytest.approx(0.6042)
            assert row["lmce_fd"] == pytest.approx(row["lmce"], abs=1e-6)

    def test_shift_model1(self, invoke):
        result, text = invoke("--config", TOY5_SCENARIO, "shift", "--model", "1")
        assert result.exit_code == 0, result.output
        payload = json.loads(text)
        assert payload["plan"]["delta_pd"] == pytest.approx([10.0, -10.0])
        assert payload["after"]["cost"] == pytest.approx(2700.0)

    def test_shift_model3_co2(self, invoke):
        result, text = invoke("--config", TOY5_SCENARIO, "shift", "--model", "3", "--objective", "co2")
        assert result.exit_code == 0, result.output
        assert json.loads(text)["after"]["cost"] == pytest.approx(3600.0)

    def test_pipeline_csv(self, invoke):
        result, text = invoke("--config", TOY5_SCENARIO, "--format", "csv", "pipeline")
        assert result.exit_code == 0, result.output
        lines = text.strip().split("\n")
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1].startswith("base,")
        assert lines[2].startswith("M1,f_balance,marginal,2700,")

    def test_compare_is_byte_identical_across_runs(self, invoke):
        first, text1 = invoke("--config", TOY5_SCENARIO, "--format", "csv", "compare", out_name="a.csv")
        second, text2 = invoke("--config", TOY5_SCENARIO, "--format", "csv", "compare", out_name="b.csv")
        assert first.exit_code == second.exit_code == 0
        assert text1 == text2

    def test_check_sweep(self, invoke):
        result, text = invoke("--config", TOY5_SCENARIO, "check", "--rho", "10", "--rho", "30")
        assert result.exit_code == 0, result.output
        checks = json.loads(text)["checks"]
        assert {row["rho"] for row in checks} == {10.0, 30.0}
        assert all(row["passed"] for row in checks)

    def test_version(self, runner):
        result = runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert "carbonshift" in result.output.lower()


# ===================================================================
# 2. Exit codes
# ===================================================================


class TestExitCodes:
    def test_no_network_given(self, invoke):
        result, text = invoke("opf")
        assert result.exit_code == EXIT_CONFIG
        assert text is None

    def test_shift_without_data_centers(self, invoke):
        result, _ = invoke("--network", str(DATA_DIR / "toy3"), "shift")
        assert result.exit_code == EXIT_CONFIG

    def test_unknown_scenario_key(self, invoke, tmp_path):
        scenario = tmp_path / "bad.env"
        scenario.write_text(f"NETWORK_DIR={DATA_DIR / 'toy3'}\nCARBON_TAX=5\n", encoding="utf-8")
        result, _ = invoke("--config", str(scenario), "opf")
        assert result.exit_code == EXIT_CONFIG

    def test_missing_network_directory(self, invoke, tmp_path):
        result, _ = invoke("--network", str(tmp_path / "nowhere"), "opf")
        assert result.exit_code == EXIT_CONFIG

    def test_incomplete_report(self, invoke, monkeypatch):
        def missing_cell(*args, **kwargs):
            raise MissingCellError(["M2/f_co2"])

        monkeypatch.setattr("app.main.compare_models", missing_cell)
        result, text = invoke("--config", TOY5_SCENARIO, "compare")
        assert result.exit_code == EXIT_SOLVER
        assert text is None

    def test_infeasible_scenario(self, invoke, tmp_path):
        scenario = tmp_path / "huge.env"
        scenario.write_text(
            f"NETWORK_DIR={DATA_DIR / 'toy3'}\nDATA_CENTER_BUSES=2\nDATA_CENTER_DEMAND=10000\n"
            "NOISE_MAGNITUDE=0\n",
            encoding="utf-8",
        )
        result, _ = invoke("--config", str(scenario), "opf")
        assert result.exit_code == EXIT_SOLVER
