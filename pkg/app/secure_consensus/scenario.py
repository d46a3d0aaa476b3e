#!/usr/bin/env python3
"""
Scenario Assembly

Turns a validated ScenarioConfig into runtime objects (plant, topology
process, attack, protocol scalars, initial-condition spec, baseline and
synthesis options) and converts GainSets to and from gains documents.

Author: ThinkCraft
"""

from dataclasses import dataclass, replace
from typing import Optional
import logging

import numpy as np

from .attack_model import AttackConfig
from .baseline import BaselineParams
from .core.config import settings
from .gain_synthesis import (
    GainSet,
    ObserverGrid,
    ProtocolParameters,
    compute_protocol_constants,
    synthesize_gains,
)
from .graph_markov import Graph, MarkovChain, TopologyProcess, union_and_check
from .matrix_core import as_matrix, is_positive_definite
from .models.schemas import GainsDocument, ScenarioConfig, config_digest
from .protocol_core import PlantModel, build_spacecraft_model
from .sim_harness import InitialSpec, IntegrationSettings, Scenario

logger = logging.getLogger(__name__)


def build_plant(config: ScenarioConfig) -> PlantModel:
    section = config.plant
    if section.kind == "spacecraft":
        return build_spacecraft_model(omega=section.omega, omega_dot=section.omega_dot, mu=section.mu, r=section.r)
    return PlantModel(A=as_matrix(section.A, "A"), B=as_matrix(section.B, "B"), C=as_matrix(section.C, "C"))


def build_process(config: ScenarioConfig) -> TopologyProcess:
    """
    Raises:
        UnionDisconnected: If the candidate graphs do not cover a connected union
        Reducible, AbsorbingState: If the generator is unusable
    """
    N = config.graphs.node_count
    graphs = [Graph.from_edges(N, edges, one_based=config.graphs.one_based) for edges in config.graphs.edges]
    topology = union_and_check(graphs)
    chain = MarkovChain.from_generator(np.asarray(config.markov.generator, dtype=float))
    return TopologyProcess(topology=topology, chain=chain)


def build_attack(config: ScenarioConfig, plant: PlantModel) -> AttackConfig:
    section = config.attack
    N = config.graphs.node_count
    interval = section.resample_interval or config.integration.step
    if not section.enabled:
        return AttackConfig.disabled(N, plant.p, interval)
    return AttackConfig.build(
        probabilities=config.agents(section.probabilities, "attack.probabilities"),
        tau=section.tau,
        output_dim=plant.p,
        resample_interval=interval,
        frequencies=section.frequencies,
        phases=section.phases,
        directions=section.directions,
        weights=section.weights,
    )


def build_parameters(config: ScenarioConfig) -> ProtocolParameters:
    trigger, adaptive = config.trigger, config.adaptive
    return ProtocolParameters(
        c=adaptive.c,
        kappa=adaptive.kappa,
        iota=config.agents(trigger.iota, "trigger.iota"),
        o=config.agents(trigger.o, "trigger.o"),
        upsilon=config.agents(trigger.upsilon, "trigger.upsilon"),
        eta=config.agents(trigger.eta, "trigger.eta"),
        varsigma=config.agents(trigger.varsigma, "trigger.varsigma"),
        beta=config.agents(adaptive.beta, "adaptive.beta"),
        dbar=config.agents(adaptive.dbar, "adaptive.dbar"),
        varpi0=config.agents(adaptive.varpi0, "adaptive.varpi0"),
        chi=adaptive.chi,
        rho_stated=adaptive.rho,
    )


def build_baseline(config: ScenarioConfig) -> BaselineParams:
    section = config.baseline
    return BaselineParams(
        kappa=section.kappa,
        beta1=section.beta1,
        beta2=section.beta2,
        mu=section.mu,
        c=section.c,
        gamma=config.agents(section.gamma, "baseline.gamma"),
        state_source=section.state_source,
    )


def build_grid(config: ScenarioConfig) -> ObserverGrid:
    section = config.synthesis
    return ObserverGrid(
        exponent_min=section.exponent_min,
        exponent_max=section.exponent_max,
        points_per_decade=section.points_per_decade,
        scales=tuple(section.scales),
        shift_fractions=tuple(section.shift_fractions),
    )


@dataclass(frozen=True)
class LoadedScenario:
    """A config document with everything built from it."""
    config: ScenarioConfig
    digest: str
    scenario: Scenario
    baseline: BaselineParams
    grid: ObserverGrid
    epsilon: Optional[float]

    def with_gains(self, gains: GainSet) -> "LoadedScenario":
        return replace(self, scenario=replace(self.scenario, gains=gains))

    def synthesize(self) -> GainSet:
        s = self.scenario
        return synthesize_gains(s.plant, s.process, s.attack, s.params, epsilon=self.epsilon, grid=self.grid)


def resolve_seed(config: ScenarioConfig, seed: Optional[int] = None) -> int:
    """Explicit seed, else ETC_SEED, else the document seed."""
    if seed is not None:
        return seed
    override = settings.seed_override()
    return config.seed if override is None else override


def build_scenario(
    config: ScenarioConfig,
    gains: Optional[GainSet] = None,
    seed: Optional[int] = None,
    xi_hold_mode: Optional[str] = None,
    rebroadcast_on_switch: Optional[bool] = None,
) -> LoadedScenario:
    """
    Assemble the runtime scenario.

    Command-line overrides for hold mode and rebroadcast take precedence over
    the document's trigger section.
    """
    plant = build_plant(config)
    process = build_process(config)
    attack = build_attack(config, plant)
    params = build_parameters(config)
    section = config.initial_conditions
    initial = InitialSpec(
        d0=config.agents(config.adaptive.d0, "adaptive.d0"),
        position_range=section.position_range,
        position_dims=section.position_dims,
        observer_start=section.observer_start,
        x0=None if section.x0 is None else np.asarray(section.x0, dtype=float),
    )
    integration = IntegrationSettings(
        step=config.integration.step,
        horizon=config.integration.horizon,
        decimation=config.integration.decimation,
    )
    scenario = Scenario(
        plant=plant,
        process=process,
        attack=attack,
        params=params,
        initial=initial,
        integration=integration,
        gains=gains,
        seed=resolve_seed(config, seed),
        xi_hold_mode=xi_hold_mode or config.trigger.xi_hold_mode,
        rebroadcast_on_switch=(
            config.trigger.rebroadcast_on_switch if rebroadcast_on_switch is None else rebroadcast_on_switch
        ),
        name=config.name,
    )
    logger.debug(f"Built scenario {config.name!r}: N={process.node_count}, s={process.s}, n={plant.n}")
    return LoadedScenario(
        config=config,
        digest=config_digest(config),
        scenario=scenario,
        baseline=build_baseline(config),
        grid=build_grid(config),
        epsilon=config.synthesis.epsilon,
    )


def gains_to_document(gains: GainSet, digest: Optional[str] = None) -> GainsDocument:
    constants = gains.constants
    return GainsDocument(
        P=gains.P.tolist(),
        Q=gains.Q.tolist(),
        X=gains.X.tolist(),
        K=gains.K.tolist(),
        G=gains.G.tolist(),
        Gamma=gains.Gamma.tolist(),
        epsilon=gains.epsilon,
        chi=gains.chi,
        bound=gains.bound,
        config_digest=digest,
        observer={k: (float(v) if isinstance(v, (int, float, np.floating)) else v) for k, v in gains.observer.items()},
        constants={
            "lambda2": constants.lambda2,
            "lambdaM": constants.lambdaM,
            "lambdaM_FFT": constants.lambdaM_FFT,
            "PiBar": constants.PiBar,
            "PiBreve": constants.PiBreve,
            "ctilde": constants.ctilde,
            "rho": constants.rho,
        },
    )


def gains_from_document(document: GainsDocument, scenario: Scenario) -> GainSet:
    """
    Rebuild a GainSet against a scenario.

    chi is re-derived from (P, Q) unless the scenario fixes it; a P or Q that
    is not positive definite leaves chi unset so the verifier can report it.
    """
    P = as_matrix(document.P, "P")
    Q = as_matrix(document.Q, "Q")
    usable = is_positive_definite(P) and is_positive_definite(Q)
    constants = compute_protocol_constants(
        scenario.params,
        scenario.process,
        scenario.attack,
        P=P if usable else None,
        Q=Q if usable else None,
    )
    return GainSet(
        P=P,
        Q=Q,
        X=as_matrix(document.X, "X"),
        K=as_matrix(document.K, "K"),
        G=as_matrix(document.G, "G"),
        Gamma=as_matrix(document.Gamma, "Gamma"),
        params=scenario.params,
        constants=constants,
        epsilon=document.epsilon,
        observer=dict(document.observer),
    )
