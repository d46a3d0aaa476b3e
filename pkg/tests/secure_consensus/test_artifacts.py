import json
import math

import numpy as np
import pandas as pd

from app.secure_consensus.artifacts import (
    SERIES_FILES,
    RunSummary,
    series_frames,
    trigger_instants,
    write_json,
    write_series,
    write_trace,
)
from app.secure_consensus.baseline import run_baseline
from app.secure_consensus.sim_harness import run_scenario


def test_write_json_sorts_keys_and_nulls_non_finite(tmp_path) -> None:
    path = write_json({"b": np.float64(math.nan), "a": np.arange(2), "c": np.bool_(True)}, tmp_path / "x" / "o.json")
    text = path.read_text(encoding="utf-8")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [0, 1], "b": None, "c": True}
    assert text.endswith("\n") and "\r" not in text


def test_run_bundle_writers(tmp_path, short_scenario) -> None:
    scenario = short_scenario(horizon=1.0)
    ts, metrics = run_scenario(scenario, seed=2, verify=False)
    ts_base, _ = run_baseline(scenario, seed=2)

    trace = pd.read_csv(write_trace(ts, tmp_path / "trace.csv", decimation=10))
    assert len(trace) == 11 * 10

    instants = trigger_instants(ts)
    assert list(instants.columns) == ["agent_id", "t"]
    assert len(instants) == int(ts.triggered.sum())
    assert (instants[instants["t"] == 0.0]["agent_id"].tolist()) == list(range(1, 11))

    frames = series_frames(ts, ts_base, decimation=10)
    assert tuple(frames) == SERIES_FILES
    np.testing.assert_allclose(frames["errors_x.csv"].iloc[:, 2:].sum(axis=1), 0.0, atol=1e-9)
    assert frames["coupling_strength.csv"]["agent_1"].iloc[0] == 1.05

    paths = write_series(tmp_path / "series", ts, ts_base, decimation=10)
    assert sorted(p.name for p in paths) == sorted(SERIES_FILES)

    summary = RunSummary.from_run("abc", 2, metrics, None, protocol="proposed").to_dict()
    assert summary["scenario_digest"] == "abc"
    assert summary["seeds"] == [2]
    assert summary["protocol"] == "proposed"
    assert summary["metrics"]["total_triggers"] == metrics.total_triggers
