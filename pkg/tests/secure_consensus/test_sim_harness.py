from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import expm

from app.secure_consensus.attack_model import AttackConfig
from app.secure_consensus.core.errors import DimensionMismatch, InvariantViolation
from app.secure_consensus.gain_synthesis import ProtocolParameters
from app.secure_consensus.graph_markov import Graph, MarkovChain, SwitchingPath, TopologyProcess, union_and_check
from app.secure_consensus.sim_harness import (
    InitialConditions,
    InitialSpec,
    IntegrationSettings,
    ProposedController,
    Scenario,
    TimeSeries,
    compute_metrics,
    lyapunov_diagnostic,
    monte_carlo,
    rk4_step,
    run_scenario,
    seed_streams,
    simulate,
    threshold_decay_audit,
    trigger_statistics,
)


@pytest.fixture
def short_run(short_scenario):
    scenario = short_scenario(horizon=2.0)
    ts, metrics = run_scenario(scenario, seed=3, verify=False)
    return scenario, ts, metrics


def test_integration_settings_validation() -> None:
    assert IntegrationSettings(step=0.01, horizon=100.0).steps == 10000
    with pytest.raises(ValueError):
        IntegrationSettings(step=0.0)
    with pytest.raises(ValueError):
        IntegrationSettings(step=0.1, horizon=0.5)
    with pytest.raises(ValueError):
        IntegrationSettings(decimation=0)


def test_initial_conditions_draw(plant) -> None:
    rng = np.random.default_rng(0)
    spec = InitialSpec(d0=np.full(4, 1.05), position_range=5.0)
    init = InitialConditions.draw(spec, plant, np.full(4, 10.0), rng)
    assert init.x.shape == (4, 6)
    assert np.all(np.abs(init.x[:, :3]) <= 5.0)
    np.testing.assert_array_equal(init.x[:, 3:], 0.0)
    np.testing.assert_array_equal(init.xhat, 0.0)

    matched = InitialConditions.draw(replace(spec, observer_start="match"), plant, np.full(4, 10.0), rng)
    np.testing.assert_array_equal(matched.xhat, matched.x)

    with pytest.raises(DimensionMismatch):
        InitialConditions.draw(replace(spec, x0=np.zeros((3, 6))), plant, np.full(4, 10.0), rng)
    with pytest.raises(ValueError):
        InitialSpec(d0=[1.05], observer_start="guess")


def test_scenario_validation(short_scenario) -> None:
    scenario = short_scenario()
    with pytest.raises(ValueError):
        replace(scenario, xi_hold_mode="sometimes")
    with pytest.raises(ValueError):
        replace(scenario, initial=replace(scenario.initial, d0=np.full(10, 30.0)))
    with pytest.raises(ValueError):
        replace(scenario, initial=replace(scenario.initial, d0=np.full(10, 1.0)))
    with pytest.raises(DimensionMismatch):
        replace(scenario, attack=AttackConfig.disabled(9, 3, 0.01))
    with pytest.raises(ValueError):
        replace(scenario, gains=None).require_gains()


def test_seed_streams_are_reproducible_and_distinct() -> None:
    first = [g.random(3) for g in seed_streams(5)]
    second = [g.random(3) for g in seed_streams(5)]
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)
    assert not np.allclose(first[0], first[1])


def test_rk4_matches_exponential_to_fourth_order() -> None:
    state = (np.ones(1), 2.0 * np.ones(1))
    h = 0.1
    out = rk4_step(lambda a, b: (-a, 3.0 * b), state, h)
    assert out[0][0] == pytest.approx(np.exp(-h), abs=1e-6)
    assert out[1][0] == pytest.approx(2.0 * np.exp(3.0 * h), abs=1e-4)


def test_run_is_deterministic_per_seed(short_scenario) -> None:
    scenario = short_scenario(horizon=1.0)
    first, _ = run_scenario(scenario, seed=9, verify=False)
    second, _ = run_scenario(scenario, seed=9, verify=False)
    np.testing.assert_array_equal(first.x, second.x)
    np.testing.assert_array_equal(first.triggered, second.triggered)
    np.testing.assert_array_equal(first.alpha, second.alpha)
    other, _ = run_scenario(scenario, seed=10, verify=False)
    assert not np.array_equal(first.x, other.x)


def test_runtime_invariants_hold_on_short_run(short_run) -> None:
    scenario, ts, metrics = short_run
    steps = scenario.integration.steps
    assert ts.x.shape == (steps + 1, 10, 6)
    assert ts.u.shape == (steps + 1, 10, 3)
    assert ts.triggered[0].all()
    assert np.all(ts.varpi > 0)
    assert np.all(np.diff(ts.d, axis=0) >= 0)
    assert np.all(ts.d <= scenario.params.dbar + 1e-12)
    assert np.all(ts.d[0] == 1.05)
    assert metrics.energy_audit.passed
    assert metrics.trigger_floor_respected
    assert metrics.threshold_audit.passed
    assert metrics.occupancy.sum() == pytest.approx(1.0)
    np.testing.assert_array_equal(ts.sigma, ts.path.states_at(ts.t))


def test_trigger_rule_between_events(short_run) -> None:
    scenario, ts, _ = short_run
    quiet = ~ts.triggered[1:]
    assert np.all(ts.trigger_gap[1:][quiet] < 0)
    fired = ts.triggered[1:]
    assert np.all(ts.trigger_gap[1:][fired] >= 0)


def test_matched_observer_without_attack_has_zero_estimation_error(short_scenario) -> None:
    scenario = short_scenario(horizon=1.0)
    scenario = replace(
        scenario,
        attack=AttackConfig.disabled(10, 3, 0.01),
        initial=replace(scenario.initial, observer_start="match"),
    )
    ts = simulate(scenario, ProposedController(scenario), seed=4)
    np.testing.assert_array_equal(ts.estimation_error, 0.0)
    np.testing.assert_array_equal(ts.alpha, 0.0)


def test_single_agent_drifts_freely(default_gains, plant) -> None:
    process = TopologyProcess(
        topology=union_and_check([Graph.from_edges(1, [])]),
        chain=MarkovChain.from_generator(np.array([[0.0]])),
    )
    params = default_gains.params
    single = ProtocolParameters(
        c=params.c,
        kappa=params.kappa,
        **{name: getattr(params, name)[:1] for name in ProtocolParameters.PER_AGENT},
    )
    x0 = np.array([[1.0, -2.0, 0.5, 0.01, 0.0, -0.02]])
    scenario = Scenario(
        plant=plant,
        process=process,
        attack=AttackConfig.disabled(1, 3, 0.01),
        params=single,
        initial=InitialSpec(d0=[1.05], x0=x0),
        integration=IntegrationSettings(step=0.01, horizon=5.0),
        gains=default_gains,
    )
    ts = simulate(scenario, ProposedController(scenario), seed=0)
    np.testing.assert_array_equal(ts.u, 0.0)
    np.testing.assert_array_equal(ts.delta, 0.0)
    np.testing.assert_allclose(ts.x[-1, 0], expm(plant.A * 5.0) @ x0[0], rtol=1e-9, atol=1e-12)


def test_freeze_mode_and_rebroadcast(short_scenario) -> None:
    frozen = short_scenario(horizon=2.0, xi_hold_mode="freeze")
    ts, metrics = run_scenario(frozen, seed=3, verify=False)
    assert np.all(ts.varpi > 0)
    assert metrics.threshold_audit.trigger_rule_holds

    eager = short_scenario(horizon=20.0, rebroadcast_on_switch=True)
    ts = simulate(eager, ProposedController(eager), seed=3)
    switches = np.flatnonzero(np.diff(ts.sigma) != 0) + 1
    assert switches.size > 0
    assert ts.triggered[switches].all()


def test_non_positive_threshold_aborts_run(short_scenario) -> None:
    scenario = short_scenario(horizon=1.0)
    params = replace(
        scenario.params,
        iota=np.full(10, 1e-9),
        varsigma=np.full(10, 1e6),
        varpi0=np.full(10, 1e-9),
    )
    scenario = replace(scenario, params=params)
    with pytest.raises(InvariantViolation) as info:
        simulate(scenario, ProposedController(scenario), seed=1)
    assert info.value.step >= 1
    assert "varpi" in info.value.reason


def test_trace_frame_layout(short_run) -> None:
    scenario, ts, _ = short_run
    frame = ts.to_frame(decimation=10)
    expected = ["t", "agent_id"]
    expected += [f"x{j}" for j in range(1, 7)] + [f"xhat{j}" for j in range(1, 7)] + [f"u{j}" for j in range(1, 4)]
    expected += ["d", "varpi", "triggered", "alpha", "sigma", "delta_pos_norm"]
    assert list(frame.columns) == expected
    assert len(frame) == 21 * 10
    assert frame["sigma"].isin([1, 2]).all()
    # decimation keeps every agent that fired at least once after t = 0
    fired_after_start = ts.triggered[1:].any(axis=0)
    flagged = frame[frame["t"] > 0].groupby("agent_id")["triggered"].max().to_numpy() > 0
    np.testing.assert_array_equal(flagged, fired_after_start)


def test_trigger_statistics_from_times() -> None:
    stats = trigger_statistics([np.array([0.0, 1.0, 3.0]), np.array([0.5])], step=0.01)
    assert stats.counts.tolist() == [3, 1]
    assert stats.min_gap[0] == pytest.approx(1.0)
    assert stats.mean_gap[0] == pytest.approx(1.5)
    assert np.isnan(stats.min_gap[1])
    assert stats.floor_respected
    assert stats.total == 4


def test_threshold_audit_detects_fast_decay(short_run) -> None:
    scenario, ts, _ = short_run
    varpi = np.full_like(ts.varpi, 1e-3)
    varpi[0] = 10.0
    triggered = np.zeros_like(ts.triggered)
    triggered[0] = True
    forged = replace(ts, varpi=varpi, triggered=triggered)
    audit = threshold_decay_audit(forged, scenario.params.trigger())
    assert not audit.decay_bound_holds
    assert audit.worst_ratio < 1e-3
    assert not audit.passed

    honest = threshold_decay_audit(ts, scenario.params.trigger())
    assert honest.passed
    assert honest.min_varpi > 0


def test_lyapunov_diagnostic_two_agent_example(default_gains) -> None:
    process = TopologyProcess(
        topology=union_and_check([Graph.from_edges(2, [(1, 2)])]),
        chain=MarkovChain.from_generator(np.array([[0.0]])),
    )
    v = np.array([1.0, 2.0])
    x = np.stack([v, -v])[None, ...]
    ts = TimeSeries(
        t=np.zeros(1),
        sigma=np.zeros(1, dtype=int),
        x=x,
        xhat=x.copy(),
        u=np.zeros((1, 2, 1)),
        d=None,
        varpi=None,
        triggered=np.ones((1, 2), dtype=bool),
        alpha=np.zeros((1, 2)),
        trigger_gap=np.full((1, 2), np.nan),
        attack_energy=np.zeros(1),
        path=SwitchingPath(np.zeros(1), np.zeros(1, dtype=int), 1.0, 1),
        step=0.01,
        position_dims=2,
    )
    gains = default_gains.with_matrices(P=np.eye(2), Q=np.eye(2))
    assert lyapunov_diagnostic(ts, gains, process)[0] == pytest.approx(4.0 * float(v @ v))


def test_metrics_summary(short_run) -> None:
    scenario, ts, metrics = short_run
    again = compute_metrics(ts, scenario)
    assert again.steady_state_pos_error == pytest.approx(metrics.steady_state_pos_error)
    assert metrics.total_triggers == int(ts.triggered.sum())
    assert metrics.d_final.shape == (10,)
    payload = metrics.to_dict()
    assert payload["total_triggers"] == metrics.total_triggers
    assert set(metrics.scalars()) == set(metrics.SCALARS)


def test_monte_carlo_needs_two_seeds(short_scenario) -> None:
    with pytest.raises(ValueError):
        monte_carlo(short_scenario(), [1])


def test_monte_carlo_aggregates_seeds(short_scenario) -> None:
    summary = monte_carlo(short_scenario(horizon=0.5), [1, 2], n_jobs=1)
    assert summary.seeds == [1, 2]
    assert len(summary.table) == 2
    assert summary.std["total_triggers"] is not None
    assert summary.bound == short_scenario().gains.bound
    assert summary.bound_holds in (True, False, None)
    assert summary.to_dict()["seeds"] == [1, 2]


@pytest.mark.slow
def test_attack_free_complete_graph_converges(sanity_loaded) -> None:
    ts, metrics = run_scenario(sanity_loaded.scenario, verify=False)
    assert metrics.delta_ratio < 1e-3
    assert metrics.steady_state_pos_error < 1e-3
    np.testing.assert_array_equal(ts.estimation_error, 0.0)
    assert metrics.threshold_audit.passed
