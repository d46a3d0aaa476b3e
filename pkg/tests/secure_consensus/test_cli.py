import json
from pathlib import Path

import pandas as pd
import pytest

from app.secure_consensus.cli import EXIT_INFEASIBLE, EXIT_INVARIANT, EXIT_IO, EXIT_OK, parse_floats, parse_seeds
from app.secure_consensus.main import main
from app.secure_consensus.models.schemas import ScenarioConfig, config_digest, default_scenario_config, table_config
from app.secure_consensus.scenario import LoadedScenario, gains_to_document


def _write_config(path: Path, config: ScenarioConfig) -> Path:
    path.write_text(config.model_dump_json(indent=2), encoding="utf-8")
    return path


def _short(config: ScenarioConfig, horizon: float = 1.0) -> ScenarioConfig:
    integration = config.integration.model_copy(update={"horizon": horizon})
    return config.model_copy(update={"integration": integration})


@pytest.fixture
def workspace(tmp_path: Path, default_gains):
    config = _short(default_scenario_config())
    config_path = _write_config(tmp_path / "scenario.json", config)
    gains_path = tmp_path / "gains.json"
    gains_path.write_text(gains_to_document(default_gains, config_digest(config)).model_dump_json(), encoding="utf-8")
    return tmp_path, config_path, gains_path


def test_parse_seeds_and_floats() -> None:
    assert parse_seeds("0-4") == [0, 1, 2, 3, 4]
    assert parse_seeds("1, 2,7-8") == [1, 2, 7, 8]
    with pytest.raises(ValueError):
        parse_seeds(" ")
    with pytest.raises(ValueError):
        parse_seeds("a-b")
    assert parse_floats("0.01,0.02") == [0.01, 0.02]
    with pytest.raises(ValueError):
        parse_floats(",")


def test_usage_errors_exit_with_one() -> None:
    assert main([]) == EXIT_IO
    assert main(["run", "--config", "x.json"]) == EXIT_IO
    assert main(["--help"]) == EXIT_OK


def test_init_writes_loadable_documents(tmp_path: Path) -> None:
    assert main(["init", "--out", str(tmp_path / "a" / "scenario.json")]) == EXIT_OK
    written = ScenarioConfig.model_validate_json((tmp_path / "a" / "scenario.json").read_text())
    assert config_digest(written) == config_digest(default_scenario_config())

    assert main(["init", "--out", str(tmp_path / "table.json"), "--literal-table"]) == EXIT_OK
    table = ScenarioConfig.model_validate_json((tmp_path / "table.json").read_text())
    assert table.name == table_config().name


def test_missing_and_malformed_config(tmp_path: Path) -> None:
    assert main(["verify", "--config", str(tmp_path / "none.json"), "--gains", "g.json"]) == EXIT_IO
    broken = tmp_path / "broken.json"
    broken.write_text('{"name": "x",\n "graphs": }', encoding="utf-8")
    assert main(["verify", "--config", str(broken), "--gains", "g.json"]) == EXIT_IO


def test_synth_writes_gains(workspace, default_gains, monkeypatch: pytest.MonkeyPatch, capsys) -> None:
    tmp_path, config_path, _ = workspace
    monkeypatch.setattr(LoadedScenario, "synthesize", lambda self: default_gains)
    out = tmp_path / "out" / "gains.json"
    assert main(["synth", "--config", str(config_path), "--out", str(out)]) == EXIT_OK
    payload = json.loads(out.read_text())
    assert payload["config_digest"] == config_digest(_short(default_scenario_config()))
    assert len(payload["P"]) == 6
    assert "VERDICT: PASS" in capsys.readouterr().out


def test_verify_passes_for_synthesized_gains(workspace, capsys) -> None:
    _, config_path, gains_path = workspace
    assert main(["verify", "--config", str(config_path), "--gains", str(gains_path)]) == EXIT_OK
    assert "VERDICT: PASS" in capsys.readouterr().out


def test_verify_fails_on_literal_table(workspace, capsys) -> None:
    tmp_path, _, gains_path = workspace
    table_path = _write_config(tmp_path / "table.json", table_config())
    assert main(["verify", "--config", str(table_path), "--gains", str(gains_path)]) == EXIT_INFEASIBLE
    out = capsys.readouterr().out
    assert "VERDICT: FAIL" in out
    assert "FALSE" in out


def test_run_writes_trace_and_summary(workspace) -> None:
    tmp_path, config_path, gains_path = workspace
    out = tmp_path / "run"
    code = main(["run", "--config", str(config_path), "--gains", str(gains_path), "--seed", "3", "--out", str(out)])
    assert code == EXIT_OK

    trace = pd.read_csv(out / "trace.csv")
    assert len(trace) == 11 * 10
    assert trace["agent_id"].between(1, 10).all()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seeds"] == [3]
    assert summary["scenario_digest"] == config_digest(_short(default_scenario_config()))
    assert summary["protocol"] == "proposed"
    assert summary["verification"]["feasible"] is True
    assert summary["metrics"]["threshold_audit"]["passed"] is True


def test_run_seed_from_environment(workspace, monkeypatch: pytest.MonkeyPatch) -> None:
    tmp_path, config_path, gains_path = workspace
    monkeypatch.setenv("ETC_SEED", "41")
    out = tmp_path / "env"
    assert main(["run", "--config", str(config_path), "--gains", str(gains_path), "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "summary.json").read_text())["seeds"] == [41]


def test_run_ablation_flags(workspace) -> None:
    tmp_path, config_path, gains_path = workspace
    out = tmp_path / "ablation"
    code = main([
        "run", "--config", str(config_path), "--gains", str(gains_path), "--out", str(out),
        "--xi-hold-mode", "freeze", "--rebroadcast-on-switch",
    ])
    assert code == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["xi_hold_mode"] == "freeze"
    assert summary["rebroadcast_on_switch"] is True


def test_run_reports_invariant_violation(workspace, capsys) -> None:
    tmp_path, _, gains_path = workspace
    config = _short(default_scenario_config())
    trigger = config.trigger.model_copy(update={"iota": 1e-9, "varsigma": 1e6})
    adaptive = config.adaptive.model_copy(update={"varpi0": 1e-9})
    config_path = _write_config(
        tmp_path / "fragile.json", config.model_copy(update={"trigger": trigger, "adaptive": adaptive})
    )
    code = main(["run", "--config", str(config_path), "--gains", str(gains_path), "--out", str(tmp_path / "x")])
    assert code == EXIT_INVARIANT
    assert "invariant violation at step" in capsys.readouterr().err


def test_compare_writes_summary(workspace) -> None:
    tmp_path, config_path, gains_path = workspace
    out = tmp_path / "compare.json"
    code = main([
        "compare", "--config", str(config_path), "--gains", str(gains_path), "--seeds", "1,2", "--out", str(out),
    ])
    assert code == EXIT_OK
    payload = json.loads(out.read_text())
    assert payload["seeds"] == [1, 2]
    assert "scenario_digest" in payload
    assert payload["proposed"]["mean"]["total_triggers"] >= 10


def test_sweep_writes_one_row_per_tau(workspace) -> None:
    tmp_path, config_path, gains_path = workspace
    out = tmp_path / "sweep.csv"
    code = main([
        "sweep", "--config", str(config_path), "--gains", str(gains_path),
        "--taus", "0.01,0.04", "--seeds", "1-2", "--out", str(out),
    ])
    assert code == EXIT_OK
    frame = pd.read_csv(out)
    assert frame["tau"].tolist() == [0.01, 0.04]
    assert frame["bound"].iloc[1] == pytest.approx(2.0 * frame["bound"].iloc[0])
