import numpy as np
import pytest

from app.secure_consensus.baseline import (
    BaselineController,
    BaselineParams,
    baseline_gain,
    compare_protocols,
    run_baseline,
    trigger_function,
)
from app.secure_consensus.sim_harness import run_scenario


def test_params_validation() -> None:
    with pytest.raises(ValueError):
        BaselineParams(kappa=0.0)
    with pytest.raises(ValueError):
        BaselineParams(gamma=np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        BaselineParams(state_source="sensor")
    np.testing.assert_array_equal(BaselineParams().gamma_for(3), np.ones(3))
    np.testing.assert_array_equal(BaselineParams(gamma=2.0).gamma_for(2), [2.0, 2.0])


def test_trigger_function_terms() -> None:
    params = BaselineParams(kappa=0.8, beta1=0.8, beta2=0.5, mu=2.0, c=1.0)
    held = np.array([[3.0, 0.0]])
    xi = np.array([[1.0, 0.0]])
    # 1 * 4 - 0.5 * 1 * 2 * 1 - 1
    f = trigger_function(held, xi, np.eye(2), params, np.ones(1))
    assert float(f[0]) == pytest.approx(2.0)


def test_baseline_gain_solves_unit_riccati(plant) -> None:
    P_b = baseline_gain(plant)
    np.testing.assert_allclose(P_b, P_b.T)
    residual = plant.A.T @ P_b + P_b @ plant.A - P_b @ plant.B @ plant.B.T @ P_b + np.eye(plant.n)
    assert np.linalg.norm(residual) < 1e-6 * max(1.0, np.linalg.norm(P_b))
    assert np.all(np.linalg.eigvalsh(P_b) > 0)


def test_controller_has_no_auxiliary_states(short_scenario) -> None:
    controller = BaselineController(short_scenario(), BaselineParams())
    assert controller.coupling(()) is None
    assert controller.threshold(()) is None
    assert controller.aux_derivative(None, None, ()) == ()


def test_run_shares_seed_streams_with_proposed(short_scenario) -> None:
    scenario = short_scenario(horizon=1.0)
    ts_b, metrics_b = run_baseline(scenario, seed=5)
    ts_p, _ = run_scenario(scenario, seed=5, verify=False)
    assert ts_b.protocol == "baseline"
    assert ts_b.d is None and ts_b.varpi is None
    assert metrics_b.threshold_audit is None
    assert metrics_b.d_final is None
    np.testing.assert_array_equal(ts_b.x[0], ts_p.x[0])
    np.testing.assert_array_equal(ts_b.sigma, ts_p.sigma)
    np.testing.assert_array_equal(ts_b.alpha, ts_p.alpha)
    assert ts_b.triggered[0].all()

    frame = ts_b.to_frame(decimation=10)
    assert frame["d"].isna().all()
    assert frame["varpi"].isna().all()


def test_raw_state_ablation_runs(short_scenario) -> None:
    scenario = short_scenario(horizon=0.5)
    ts, metrics = run_baseline(scenario, BaselineParams(state_source="raw"), seed=2)
    assert np.all(np.isfinite(ts.x))
    assert metrics.total_triggers >= scenario.agent_count


def test_compare_needs_seeds(short_scenario) -> None:
    with pytest.raises(ValueError):
        compare_protocols(short_scenario(), [])


def test_compare_reports_both_protocols(short_scenario) -> None:
    comparison = compare_protocols(short_scenario(horizon=0.5), [1, 2], n_jobs=1)
    payload = comparison.to_dict()
    assert payload["seeds"] == [1, 2]
    assert set(payload) >= {"proposed", "baseline", "baseline_error_larger", "baseline_triggers_larger"}
    assert isinstance(comparison.error_dominance, bool)
    assert len(comparison.baseline.table) == 2
