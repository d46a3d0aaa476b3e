"""End-to-end replication of the ten-spacecraft scenario (run with -m slow)."""

import json
from pathlib import Path

import pandas as pd
import pytest

from app.secure_consensus.artifacts import SERIES_FILES
from app.secure_consensus.baseline import compare_protocols
from app.secure_consensus.main import main
from app.secure_consensus.sim_harness import monte_carlo

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def demo_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    out = tmp_path_factory.mktemp("demo")
    main(["demo", "--out", str(out)])
    return out


def test_bundle_is_complete(demo_dir: Path) -> None:
    for name in ("gains.json", "trace.csv", "trace_baseline.csv", "summary.json", "acceptance.json"):
        assert (demo_dir / name).is_file(), name
    for name in SERIES_FILES:
        assert (demo_dir / "series" / name).is_file(), name

    positions = pd.read_csv(demo_dir / "series" / "positions_x.csv")
    assert list(positions.columns[:2]) == ["t", "sigma"]
    assert positions.shape[1] == 2 + 10
    instants = pd.read_csv(demo_dir / "series" / "trigger_instants_proposed.csv")
    assert set(instants["agent_id"]) == set(range(1, 11))


def test_acceptance_checks_pass(demo_dir: Path) -> None:
    payload = json.loads((demo_dir / "acceptance.json").read_text())
    failed = [name for name, passed in payload["checks"].items() if not passed]
    assert failed == []
    assert payload["all_passed"] is True


def test_summary_reports_both_protocols(demo_dir: Path) -> None:
    summary = json.loads((demo_dir / "summary.json").read_text())
    metrics = summary["metrics"]
    assert metrics["steady_state_pos_error"] < 0.5
    assert metrics["varpi_min"] > 0
    assert all(1.05 <= d <= 22.0 for d in metrics["d_final"])
    assert summary["verification"]["feasible"] is True
    assert summary["baseline_error_larger"] is True
    assert summary["baseline_triggers_larger"] is True
    assert summary["baseline"]["d_final"] is None


def test_tail_error_stays_inside_bound_over_twenty_seeds(loaded_with_gains) -> None:
    summary = monte_carlo(loaded_with_gains.scenario, list(range(20)))
    assert summary.bound is not None
    assert summary.bound_holds is True
    assert summary.mean["varpi_min"] > 0


def test_baseline_is_dominated_over_ten_paired_seeds(loaded_with_gains) -> None:
    comparison = compare_protocols(loaded_with_gains.scenario, list(range(10)), loaded_with_gains.baseline)
    payload = comparison.to_dict()
    assert len(payload["seeds"]) == 10
    assert payload["proposed"]["mean"]["steady_state_pos_error"] < 0.5
    assert comparison.error_dominance
    assert comparison.trigger_dominance
    assert payload["baseline_error_larger"] is True
    assert payload["baseline_triggers_larger"] is True
