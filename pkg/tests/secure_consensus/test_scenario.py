import numpy as np
import pytest

from app.secure_consensus.core.errors import UnionDisconnected
from app.secure_consensus.models.schemas import GainsDocument, ScenarioConfig
from app.secure_consensus.scenario import (
    build_scenario,
    gains_from_document,
    gains_to_document,
    resolve_seed,
)


def test_build_default_scenario(default_loaded) -> None:
    scenario = default_loaded.scenario
    assert scenario.agent_count == 10
    assert scenario.process.s == 2
    assert scenario.seed == 7
    assert scenario.gains is None
    assert scenario.attack.resample_interval == pytest.approx(0.01)
    assert scenario.xi_hold_mode == "refresh"
    assert not scenario.rebroadcast_on_switch
    np.testing.assert_array_equal(scenario.initial.d0, np.full(10, 1.05))
    np.testing.assert_array_equal(scenario.params.iota, np.full(10, 5.0e8))
    assert default_loaded.baseline.state_source == "observer"
    assert len(default_loaded.grid.values()) == 13


def test_overrides_take_precedence(default_config: ScenarioConfig) -> None:
    loaded = build_scenario(default_config, seed=1, xi_hold_mode="freeze", rebroadcast_on_switch=True)
    assert loaded.scenario.xi_hold_mode == "freeze"
    assert loaded.scenario.rebroadcast_on_switch


def test_disconnected_union_is_reported(default_config: ScenarioConfig) -> None:
    payload = default_config.model_dump()
    payload["graphs"]["edges"] = [[[1, 2]], [[3, 4]]]
    with pytest.raises(UnionDisconnected):
        build_scenario(ScenarioConfig.model_validate(payload))


def test_disabled_attack_keeps_output_dimension(default_config: ScenarioConfig) -> None:
    payload = default_config.model_dump()
    payload["attack"]["enabled"] = False
    attack = build_scenario(ScenarioConfig.model_validate(payload)).scenario.attack
    assert attack.output_dim == 3
    assert attack.tau == 0.0


def test_seed_precedence(monkeypatch: pytest.MonkeyPatch, default_config: ScenarioConfig) -> None:
    assert resolve_seed(default_config) == 2024
    monkeypatch.setenv("ETC_SEED", "99")
    assert resolve_seed(default_config) == 99
    assert resolve_seed(default_config, 5) == 5
    monkeypatch.setenv("ETC_SEED", "ninety")
    with pytest.raises(ValueError):
        resolve_seed(default_config)


def test_gains_document_round_trip(loaded_with_gains, default_gains) -> None:
    document = gains_to_document(default_gains, loaded_with_gains.digest)
    assert document.config_digest == loaded_with_gains.digest
    assert document.constants["lambda2"] == pytest.approx(0.381966, abs=1e-6)

    reparsed = GainsDocument.model_validate_json(document.model_dump_json())
    rebuilt = gains_from_document(reparsed, loaded_with_gains.scenario)
    for name in ("P", "Q", "X", "K", "G", "Gamma"):
        np.testing.assert_allclose(getattr(rebuilt, name), getattr(default_gains, name), rtol=1e-12)
    assert rebuilt.chi == pytest.approx(default_gains.chi, rel=1e-9)
    assert rebuilt.bound == pytest.approx(default_gains.bound, rel=1e-9)


def test_indefinite_document_leaves_chi_unset(loaded_with_gains, default_gains) -> None:
    document = gains_to_document(default_gains.with_matrices(P=-default_gains.P))
    rebuilt = gains_from_document(document, loaded_with_gains.scenario)
    assert rebuilt.chi is None
    assert rebuilt.bound is None
