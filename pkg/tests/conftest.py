"""Shared fixtures: the embedded scenario, its synthesized gains and short runs."""

from dataclasses import replace
from itertools import combinations
from typing import Callable

import pytest

from app.secure_consensus.gain_synthesis import GainSet
from app.secure_consensus.models.schemas import ScenarioConfig, default_scenario_config
from app.secure_consensus.protocol_core import PlantModel, build_spacecraft_model
from app.secure_consensus.scenario import LoadedScenario, build_scenario
from app.secure_consensus.sim_harness import IntegrationSettings, Scenario


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("ETC_SEED", raising=False)


@pytest.fixture
def plant() -> PlantModel:
    return build_spacecraft_model()


@pytest.fixture
def default_config() -> ScenarioConfig:
    return default_scenario_config()


@pytest.fixture(scope="session")
def default_loaded() -> LoadedScenario:
    return build_scenario(default_scenario_config(), seed=7)


@pytest.fixture(scope="session")
def default_gains(default_loaded: LoadedScenario) -> GainSet:
    return default_loaded.synthesize()


@pytest.fixture(scope="session")
def loaded_with_gains(default_loaded: LoadedScenario, default_gains: GainSet) -> LoadedScenario:
    return default_loaded.with_gains(default_gains)


@pytest.fixture
def short_scenario(loaded_with_gains: LoadedScenario) -> Callable[..., Scenario]:
    """Factory for the embedded scenario cut down to a short horizon."""

    def make(horizon: float = 1.0, step: float = 0.01, **changes) -> Scenario:
        integration = IntegrationSettings(step=step, horizon=horizon, decimation=10)
        return replace(loaded_with_gains.scenario, integration=integration, **changes)

    return make


@pytest.fixture(scope="session")
def sanity_loaded() -> LoadedScenario:
    """Attacks off, one fixed complete graph, observers started on the true state."""
    config = default_scenario_config().model_dump()
    N = config["graphs"]["node_count"]
    config["name"] = "sanity-complete-graph"
    config["graphs"]["edges"] = [[list(pair) for pair in combinations(range(1, N + 1), 2)]]
    config["markov"]["generator"] = [[0.0]]
    config["attack"]["enabled"] = False
    config["adaptive"].update({"kappa": 0.5, "varpi0": 1e-3})
    config["initial_conditions"]["observer_start"] = "match"
    loaded = build_scenario(ScenarioConfig.model_validate(config), seed=11)
    return loaded.with_gains(loaded.synthesize())
