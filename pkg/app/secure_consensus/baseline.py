#!/usr/bin/env python3
"""
Baseline - Static Event-Triggered Consensus for Comparison

Description: The comparison protocol u_i = -kappa B^T P_b xi_i(t_k^i) with
xi_i = sum_j a_ij (s_i - s_j), where s is the observer estimate (default) or
the true state (ablation). Agent i fires when

    f_i = (kappa / beta1) e_i^T P_b B B^T P_b e_i - beta2 gamma_i mu xi_i^T xi_i - c >= 0,
    e_i = xi_i(t_k^i) - xi_i(t).

P_b solves A^T P + P A - P B B^T P + I = 0. Runs reuse the seed streams of the
proposed protocol, so paired seeds see the same switching path, attack gates
and initial conditions.

Dependencies: numpy, joblib
Author: ThinkCraft
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple
import logging
import time

import numpy as np
from joblib import Parallel, delayed

from .core.config import settings
from .gain_synthesis import solve_riccati
from .protocol_core import NetworkView, PlantModel, broadcast_relative_state, gamma_norm
from .sim_harness import (
    InitialConditions,
    Metrics,
    MonteCarloSummary,
    Scenario,
    State,
    TimeSeries,
    aggregate_metrics,
    compute_metrics,
    run_scenario,
    simulate,
    summarize,
)

logger = logging.getLogger(__name__)

STATE_SOURCES = ("observer", "raw")


@dataclass(frozen=True)
class BaselineParams:
    """
    Comparison protocol constants.

    Attributes:
        kappa: Feedback gain
        beta1, beta2: Trigger weights
        mu: Relative-state weight
        c: Trigger offset
        gamma: Per-agent weight gamma_i
        state_source: "observer" (x_hat) or "raw" (true x)
    """
    kappa: float = 0.05
    beta1: float = 0.8
    beta2: float = 0.35
    mu: float = 1.0
    c: float = 10.0
    gamma: Optional[np.ndarray] = None
    state_source: str = "observer"

    def __post_init__(self) -> None:
        for name in ("kappa", "beta1", "beta2", "mu", "c"):
            if getattr(self, name) <= 0:
                raise ValueError(f"baseline {name} must be positive, got {getattr(self, name)}")
        if self.gamma is not None:
            gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
            if np.any(gamma <= 0):
                raise ValueError("baseline gamma_i must be positive")
            object.__setattr__(self, "gamma", gamma)
        if self.state_source not in STATE_SOURCES:
            raise ValueError(f"state_source must be one of {STATE_SOURCES}, got {self.state_source!r}")

    def gamma_for(self, agent_count: int) -> np.ndarray:
        if self.gamma is None:
            return np.ones(agent_count)
        return np.broadcast_to(self.gamma, (agent_count,)).copy()


def baseline_gain(plant: PlantModel) -> np.ndarray:
    """P_b from the unit-weight Riccati equation."""
    return solve_riccati(plant.A, plant.B, 1.0, np.eye(plant.n))


def trigger_function(
    held_xi: np.ndarray, xi: np.ndarray, Gamma_b: np.ndarray, params: BaselineParams, gamma: np.ndarray
) -> np.ndarray:
    """
    f_i for every agent.

    Examples:
        >>> f = trigger_function(np.ones((1, 2)), np.ones((1, 2)), np.eye(2), BaselineParams(), np.ones(1))
        >>> round(float(f[0]), 2)
        -10.7
    """
    e = held_xi - xi
    return (
        params.kappa / params.beta1 * gamma_norm(e, Gamma_b)
        - params.beta2 * gamma * params.mu * np.einsum("...i,...i->...", xi, xi)
        - params.c
    )


class BaselineController:
    """Static trigger, fixed gain, no auxiliary states."""

    name = "baseline"

    def __init__(self, scenario: Scenario, params: BaselineParams):
        plant = scenario.plant
        self.params = params
        self.P_b = baseline_gain(plant)
        self.K_b = plant.B.T @ self.P_b
        self.Gamma_b = self.P_b @ plant.B @ plant.B.T @ self.P_b
        self.gamma = params.gamma_for(scenario.agent_count)
        self.adjacency = scenario.process.topology.adjacency_stack
        self.rebroadcast = scenario.rebroadcast_on_switch
        self.held_xi: Optional[np.ndarray] = None

    def _relative(self, x: np.ndarray, xhat: np.ndarray, sigma: int) -> np.ndarray:
        source = xhat if self.params.state_source == "observer" else x
        return -broadcast_relative_state(NetworkView(sigma, self.adjacency[sigma], source))

    def reset(self, init: InitialConditions, sigma: int) -> State:
        self.held_xi = self._relative(init.x, init.xhat, sigma)
        return ()

    def coupling(self, aux: State) -> Optional[np.ndarray]:
        return None

    def threshold(self, aux: State) -> Optional[np.ndarray]:
        return None

    def control(self, x: np.ndarray, xhat: np.ndarray, aux: State) -> np.ndarray:
        return -self.params.kappa * self.held_xi @ self.K_b.T

    def begin_step(self, x: np.ndarray, xhat: np.ndarray, aux: State) -> None:
        return None

    def aux_derivative(self, x: np.ndarray, xhat: np.ndarray, aux: State) -> State:
        return ()

    def end_step(
        self, step: int, x: np.ndarray, xhat: np.ndarray, aux: State, sigma: int, switched: bool
    ) -> Tuple[State, np.ndarray, np.ndarray]:
        xi = self._relative(x, xhat, sigma)
        f = trigger_function(self.held_xi, xi, self.Gamma_b, self.params, self.gamma)
        fired = f >= 0
        if self.rebroadcast and switched:
            fired = np.ones_like(fired)
        self.held_xi[fired] = xi[fired]
        return (), fired, f


def run_baseline(
    scenario: Scenario,
    baseline: Optional[BaselineParams] = None,
    seed: Optional[int] = None,
    verify: bool = False,
) -> Tuple[TimeSeries, Metrics]:
    """
    Run the comparison protocol with the scenario's observers and seeds.

    verify is accepted so the function can stand in as a monte_carlo runner;
    the baseline has no design certificates to check.

    Raises:
        InvariantViolation: If a state becomes non-finite
    """
    baseline = baseline or BaselineParams()
    seed = scenario.seed if seed is None else seed
    logger.info(f"Running {scenario.name!r} (baseline, {baseline.state_source} states) with seed {seed}")
    started = time.perf_counter()
    ts = simulate(scenario, BaselineController(scenario, baseline), seed)
    metrics = compute_metrics(ts, scenario, time.perf_counter() - started)
    logger.debug(f"Baseline seed {seed}: {metrics.total_triggers} triggers")
    return ts, metrics


@dataclass(frozen=True)
class Comparison:
    """Paired-seed summaries of both protocols."""
    proposed: MonteCarloSummary
    baseline: MonteCarloSummary

    @property
    def error_dominance(self) -> bool:
        """Baseline mean steady-state error strictly above the proposed one."""
        return self.baseline.mean["steady_state_pos_error"] > self.proposed.mean["steady_state_pos_error"]

    @property
    def trigger_dominance(self) -> bool:
        """Baseline mean trigger total strictly above the proposed one."""
        return self.baseline.mean["total_triggers"] > self.proposed.mean["total_triggers"]

    def to_dict(self) -> Dict[str, object]:
        return {
            "seeds": self.proposed.seeds,
            "proposed": self.proposed.to_dict(),
            "baseline": self.baseline.to_dict(),
            "baseline_error_larger": self.error_dominance,
            "baseline_triggers_larger": self.trigger_dominance,
        }


def compare_protocols(
    scenario: Scenario,
    seeds: Sequence[int],
    baseline: Optional[BaselineParams] = None,
    n_jobs: Optional[int] = None,
) -> Comparison:
    """
    Run both protocols on every seed (worker threads) and summarize.

    Raises:
        ValueError: If seeds is empty
    """
    if not seeds:
        raise ValueError("compare needs at least one seed")
    baseline = baseline or BaselineParams()
    jobs = n_jobs or settings.worker_count()

    def pair(seed: int) -> Tuple[Metrics, Metrics]:
        return (
            run_scenario(scenario, seed=seed, verify=False)[1],
            run_baseline(scenario, baseline, seed=seed)[1],
        )

    logger.info(f"Comparing protocols over {len(seeds)} paired seeds on {jobs} threads")
    results = Parallel(n_jobs=jobs, prefer="threads")(delayed(pair)(seed) for seed in seeds)
    bound = scenario.require_gains().bound
    tau = scenario.attack.tau
    proposed = summarize(aggregate_metrics([r[0] for r in results], seeds), bound, tau)
    reference = summarize(aggregate_metrics([r[1] for r in results], seeds), bound, tau)
    return Comparison(proposed=proposed, baseline=reference)
