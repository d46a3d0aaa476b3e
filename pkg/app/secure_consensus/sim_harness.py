#!/usr/bin/env python3
"""
Simulation Harness - Closed-Loop Runs, Metrics and Monte-Carlo Batches

Description: Fixed-step fourth-order Runge-Kutta integration of N agents
(plant, observer and controller auxiliary states) under a pre-sampled Markov
switching path and Bernoulli output attacks. Triggers are evaluated once per
step and take effect at the step boundary. A controller object supplies the
protocol: the proposed adaptive dynamic-trigger law lives here, the comparison
protocol in baseline.py.

Within a step the relative state xi_tilde, the deviation m, the attack signal
and the coupling-law branch are frozen at their step-start values.

Time Complexity: O(T/h * N * n^2) per run
Space Complexity: O(T/h * N * n) for the full-resolution trace

Dependencies: numpy, pandas, joblib
Author: ThinkCraft
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple
import logging
import math
import time

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .attack_model import AttackConfig, EnergyAudit, corrupt_output, sample_attack, verify_energy_bound
from .core.config import settings
from .core.errors import DimensionMismatch, InvariantViolation
from .gain_synthesis import GainSet, ProtocolParameters, verify_theorem_conditions
from .graph_markov import SwitchingPath, TopologyProcess, occupancy_fractions, sample_switching_path
from .protocol_core import (
    NetworkView,
    PlantModel,
    TriggerParameters,
    broadcast_relative_state,
    control_input,
    coupling_derivative,
    observer_derivative,
    plant_derivative,
    trigger_level,
    varpi_derivative,
)

logger = logging.getLogger(__name__)

HOLD_MODES = ("refresh", "freeze")
OBSERVER_STARTS = ("zero", "match")
STEADY_STATE_FRACTION = 0.1
DECAY_TOLERANCE = 0.01

State = Tuple[np.ndarray, ...]


# ---------------------------------------------------------------------------
# Scenario description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegrationSettings:
    """Step h, horizon T and the trace decimation used by the CSV writer."""
    step: float = 0.01
    horizon: float = 100.0
    decimation: int = 10

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ValueError(f"integration step must be positive, got {self.step}")
        if self.horizon < 10 * self.step - 1e-12:
            raise ValueError(f"horizon {self.horizon} must be at least 10 steps of {self.step}")
        if self.decimation < 1:
            raise ValueError(f"decimation must be at least 1, got {self.decimation}")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.step))


@dataclass(frozen=True)
class InitialSpec:
    """
    How x(0), x_hat(0) and d(0) are chosen.

    Attributes:
        d0: Initial coupling per agent, each in (1, d_bar_i)
        position_range: Positions drawn uniform in [-range, range] per axis
        position_dims: Leading state entries treated as positions
        observer_start: "zero" for x_hat(0) = 0, "match" for x_hat(0) = x(0)
        x0: Explicit (N, n) initial states; overrides the random draw
    """
    d0: np.ndarray
    position_range: float = 5.0
    position_dims: int = 3
    observer_start: str = "zero"
    x0: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "d0", np.atleast_1d(np.asarray(self.d0, dtype=float)))
        if self.observer_start not in OBSERVER_STARTS:
            raise ValueError(f"observer_start must be one of {OBSERVER_STARTS}, got {self.observer_start!r}")
        if self.position_range < 0:
            raise ValueError(f"position_range must be non-negative, got {self.position_range}")
        if self.x0 is not None:
            object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))


@dataclass(frozen=True)
class InitialConditions:
    """Per-agent x(0), x_hat(0), d(0) and varpi(0)."""
    x: np.ndarray
    xhat: np.ndarray
    d: np.ndarray
    varpi: np.ndarray

    @classmethod
    def draw(
        cls, spec: InitialSpec, plant: PlantModel, varpi0: np.ndarray, rng: np.random.Generator
    ) -> "InitialConditions":
        N = spec.d0.shape[0]
        if spec.x0 is not None:
            if spec.x0.shape != (N, plant.n):
                raise DimensionMismatch(f"x0 must have shape ({N}, {plant.n}), got {spec.x0.shape}")
            x = spec.x0.copy()
        else:
            x = np.zeros((N, plant.n))
            dims = min(spec.position_dims, plant.n)
            x[:, :dims] = rng.uniform(-spec.position_range, spec.position_range, size=(N, dims))
        xhat = x.copy() if spec.observer_start == "match" else np.zeros_like(x)
        return cls(x=x, xhat=xhat, d=spec.d0.copy(), varpi=np.asarray(varpi0, dtype=float).copy())


@dataclass(frozen=True)
class Scenario:
    """Everything a closed-loop run needs."""
    plant: PlantModel
    process: TopologyProcess
    attack: AttackConfig
    params: ProtocolParameters
    initial: InitialSpec
    integration: IntegrationSettings = field(default_factory=IntegrationSettings)
    gains: Optional[GainSet] = None
    seed: int = 0
    xi_hold_mode: str = "refresh"
    rebroadcast_on_switch: bool = False
    name: str = "scenario"

    def __post_init__(self) -> None:
        N = self.process.node_count
        if self.attack.agent_count != N or self.params.agent_count != N or self.initial.d0.shape[0] != N:
            raise DimensionMismatch(
                f"agent counts disagree: graphs {N}, attack {self.attack.agent_count}, "
                f"parameters {self.params.agent_count}, d0 {self.initial.d0.shape[0]}"
            )
        if self.attack.output_dim != self.plant.p:
            raise DimensionMismatch(
                f"attack directions have {self.attack.output_dim} outputs, plant has {self.plant.p}"
            )
        if self.xi_hold_mode not in HOLD_MODES:
            raise ValueError(f"xi_hold_mode must be one of {HOLD_MODES}, got {self.xi_hold_mode!r}")
        if np.any(self.params.varpi0 <= 0):
            raise ValueError("varpi_i(0) must be positive for every agent")
        if np.any(self.initial.d0 <= 1.0) or np.any(self.initial.d0 >= self.params.dbar):
            raise ValueError("d_i(0) must lie strictly between 1 and d_bar_i")

    @property
    def agent_count(self) -> int:
        return self.process.node_count

    def require_gains(self) -> GainSet:
        if self.gains is None:
            raise ValueError(f"scenario {self.name!r} has no gains; synthesize or load them first")
        return self.gains


def seed_streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent generators for the switching path, the attack gate and x(0)."""
    path_seq, attack_seq, init_seq = np.random.SeedSequence(seed).spawn(3)
    return (
        np.random.default_rng(path_seq),
        np.random.default_rng(attack_seq),
        np.random.default_rng(init_seq),
    )


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def rk4_step(f: Callable[..., State], state: State, h: float) -> State:
    """
    One classical Runge-Kutta step for a tuple of arrays.

    Examples:
        >>> rk4_step(lambda y: (-y,), (np.ones(1),), 0.1)[0].round(6)
        array([0.904838])
    """
    k1 = f(*state)
    k2 = f(*(s + 0.5 * h * k for s, k in zip(state, k1)))
    k3 = f(*(s + 0.5 * h * k for s, k in zip(state, k2)))
    k4 = f(*(s + h * k for s, k in zip(state, k3)))
    return tuple(
        s + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d) for s, a, b, c, d in zip(state, k1, k2, k3, k4)
    )


@dataclass
class _AgentView:
    """Stacked per-agent quantities handed to the protocol formulas."""
    held: Optional[np.ndarray] = None
    xhat: Optional[np.ndarray] = None
    d: Optional[np.ndarray] = None
    varpi: Optional[np.ndarray] = None


class ProposedController:
    """
    Adaptive coupling plus dynamic event trigger on held observer broadcasts.

    Auxiliary state: (d, varpi).
    """

    name = "proposed"

    def __init__(self, scenario: Scenario):
        gains = scenario.require_gains()
        self.K = gains.K
        self.Gamma = gains.Gamma
        self.trigger = scenario.params.trigger()
        self.adjacency = scenario.process.topology.adjacency_stack
        self.hold_mode = scenario.xi_hold_mode
        self.rebroadcast = scenario.rebroadcast_on_switch
        self.held: Optional[np.ndarray] = None
        self.xi: Optional[np.ndarray] = None
        self._xhat_start: Optional[np.ndarray] = None
        self._d_rate: Optional[np.ndarray] = None

    def _relative(self, sigma: int) -> np.ndarray:
        return broadcast_relative_state(NetworkView(sigma, self.adjacency[sigma], self.held))

    def reset(self, init: InitialConditions, sigma: int) -> State:
        self.held = init.xhat.copy()
        self.xi = self._relative(sigma)
        return (init.d.copy(), init.varpi.copy())

    def coupling(self, aux: State) -> Optional[np.ndarray]:
        return aux[0]

    def threshold(self, aux: State) -> Optional[np.ndarray]:
        return aux[1]

    def control(self, x: np.ndarray, xhat: np.ndarray, aux: State) -> np.ndarray:
        return control_input(_AgentView(d=aux[0]), self.xi, self.K)

    def begin_step(self, x: np.ndarray, xhat: np.ndarray, aux: State) -> None:
        self._xhat_start = xhat.copy()
        self._d_rate = coupling_derivative(_AgentView(d=aux[0]), self.xi, self.Gamma, self.trigger)

    def aux_derivative(self, x: np.ndarray, xhat: np.ndarray, aux: State) -> State:
        view = _AgentView(held=self.held, xhat=self._xhat_start, varpi=aux[1])
        return (self._d_rate, varpi_derivative(view, self.xi, self.Gamma, self.trigger))

    def end_step(
        self, step: int, x: np.ndarray, xhat: np.ndarray, aux: State, sigma: int, switched: bool
    ) -> Tuple[State, np.ndarray, np.ndarray]:
        d = np.minimum(aux[0], self.trigger.dbar)
        varpi = aux[1]
        bad = np.flatnonzero(varpi <= 0)
        if bad.size:
            raise InvariantViolation(step, f"threshold varpi <= 0 for agents {(bad + 1).tolist()}")

        xi_eval = self._relative(sigma) if self.hold_mode == "refresh" else self.xi
        level = trigger_level(_AgentView(held=self.held, xhat=xhat), xi_eval, self.Gamma, self.trigger)
        gap = level - varpi
        fired = gap >= 0
        if self.rebroadcast and switched:
            fired = np.ones_like(fired)

        self.held[fired] = xhat[fired]
        refreshed = self._relative(sigma)
        if self.hold_mode == "refresh":
            self.xi = refreshed
        else:
            self.xi[fired] = refreshed[fired]
        return (d, varpi), fired, gap


@dataclass
class TimeSeries:
    """
    Full-resolution trace of one run, samples at t = k h.

    Arrays carry time as the leading axis; d and varpi are None for protocols
    without those states.
    """
    t: np.ndarray
    sigma: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    u: np.ndarray
    d: Optional[np.ndarray]
    varpi: Optional[np.ndarray]
    triggered: np.ndarray
    alpha: np.ndarray
    trigger_gap: np.ndarray
    attack_energy: np.ndarray
    path: SwitchingPath
    step: float
    position_dims: int = 3
    protocol: str = "proposed"
    seed: int = 0

    @property
    def agent_count(self) -> int:
        return self.x.shape[1]

    @property
    def delta(self) -> np.ndarray:
        """Consensus error (M kron I_n) x with M = I - (1/N) 1 1^T."""
        return self.x - self.x.mean(axis=1, keepdims=True)

    @property
    def estimation_error(self) -> np.ndarray:
        return self.x - self.xhat

    def delta_position_norm(self) -> np.ndarray:
        return np.linalg.norm(self.delta[..., : self.position_dims], axis=2)

    def trigger_times(self) -> List[np.ndarray]:
        return [self.t[self.triggered[:, i]] for i in range(self.agent_count)]

    def to_frame(self, decimation: int = 1) -> pd.DataFrame:
        """
        Long-format trace: one row per (sample, agent).

        triggered marks any trigger since the previous kept sample so
        decimation never hides events.
        """
        keep = np.arange(0, self.t.shape[0], decimation)
        if keep[-1] != self.t.shape[0] - 1:
            keep = np.append(keep, self.t.shape[0] - 1)
        counts = np.cumsum(self.triggered, axis=0)[keep]
        fired = np.diff(counts, axis=0, prepend=0) > 0

        K, N = keep.shape[0], self.agent_count
        columns: Dict[str, np.ndarray] = {
            "t": np.repeat(self.t[keep], N),
            "agent_id": np.tile(np.arange(1, N + 1), K),
        }
        for label, block in (("x", self.x), ("xhat", self.xhat), ("u", self.u)):
            flat = block[keep].reshape(K * N, -1)
            for j in range(flat.shape[1]):
                columns[f"{label}{j + 1}"] = flat[:, j]
        nan = np.full(K * N, np.nan)
        columns["d"] = nan if self.d is None else self.d[keep].ravel()
        columns["varpi"] = nan if self.varpi is None else self.varpi[keep].ravel()
        columns["triggered"] = fired.ravel().astype(int)
        columns["alpha"] = self.alpha[keep].ravel().astype(int)
        columns["sigma"] = np.repeat(self.sigma[keep] + 1, N)
        columns["delta_pos_norm"] = self.delta_position_norm()[keep].ravel()
        return pd.DataFrame(columns)


def simulate(scenario: Scenario, controller, seed: Optional[int] = None) -> TimeSeries:
    """
    Integrate the closed loop under the given controller.

    Raises:
        InvariantViolation: On a non-positive threshold or a non-finite state
    """
    seed = scenario.seed if seed is None else seed
    plant, attack = scenario.plant, scenario.attack
    gains = scenario.require_gains()
    h, steps = scenario.integration.step, scenario.integration.steps
    N = scenario.agent_count

    path_rng, attack_rng, init_rng = seed_streams(seed)
    path = sample_switching_path(scenario.process.chain, scenario.integration.horizon, path_rng)
    init = InitialConditions.draw(scenario.initial, plant, scenario.params.varpi0, init_rng)

    t = np.arange(steps + 1) * h
    x_log = np.empty((steps + 1, N, plant.n))
    xhat_log = np.empty_like(x_log)
    u_log = np.empty((steps + 1, N, plant.m))
    sigma_log = path.states_at(t)
    triggered = np.zeros((steps + 1, N), dtype=bool)
    gap_log = np.full((steps + 1, N), np.nan)
    alpha_log = np.zeros((steps + 1, N))
    energy_log = np.zeros(steps + 1)

    x, xhat = init.x.copy(), init.xhat.copy()
    sigma = int(sigma_log[0])
    aux = controller.reset(init, sigma)
    d_log = None if controller.coupling(aux) is None else np.empty((steps + 1, N))
    varpi_log = None if controller.threshold(aux) is None else np.empty((steps + 1, N))
    triggered[0] = True

    def record(k: int) -> None:
        x_log[k], xhat_log[k] = x, xhat
        if d_log is not None:
            d_log[k] = controller.coupling(aux)
        if varpi_log is not None:
            varpi_log[k] = controller.threshold(aux)

    record(0)
    sample = None
    for k in range(steps + 1):
        sample = sample_attack(attack, k * h, attack_rng, sample)
        alpha_log[k] = sample.alpha
        energy_log[k] = sample.energy
        u_log[k] = controller.control(x, xhat, aux)
        if k == steps:
            break

        controller.begin_step(x, xhat, aux)
        offset = corrupt_output(np.zeros((N, plant.p)), sample)

        def derivative(x_: np.ndarray, xhat_: np.ndarray, *aux_: np.ndarray) -> State:
            u = controller.control(x_, xhat_, aux_)
            y = x_ @ plant.C.T + offset
            return (
                plant_derivative(plant, x_, u),
                observer_derivative(plant, gains.G, xhat_, u, y),
            ) + controller.aux_derivative(x_, xhat_, aux_)

        x, xhat, *rest = rk4_step(derivative, (x, xhat) + tuple(aux), h)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xhat)) and all(np.all(np.isfinite(a)) for a in rest)):
            raise InvariantViolation(k + 1, "non-finite state")

        next_sigma = int(sigma_log[k + 1])
        aux, fired, gap = controller.end_step(k + 1, x, xhat, tuple(rest), next_sigma, next_sigma != sigma)
        sigma = next_sigma
        triggered[k + 1] = fired
        gap_log[k + 1] = gap
        record(k + 1)

    return TimeSeries(
        t=t,
        sigma=sigma_log,
        x=x_log,
        xhat=xhat_log,
        u=u_log,
        d=d_log,
        varpi=varpi_log,
        triggered=triggered,
        alpha=alpha_log,
        trigger_gap=gap_log,
        attack_energy=energy_log,
        path=path,
        step=h,
        position_dims=min(scenario.initial.position_dims, plant.n),
        protocol=controller.name,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TriggerStatistics:
    """Per-agent counts and inter-event gaps (NaN where fewer than two events)."""
    counts: np.ndarray
    min_gap: np.ndarray
    mean_gap: np.ndarray
    max_gap: np.ndarray
    floor: float
    floor_respected: bool

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def overall_min_gap(self) -> float:
        return float(np.nanmin(self.min_gap)) if np.any(np.isfinite(self.min_gap)) else math.nan

    @property
    def overall_mean_gap(self) -> float:
        return float(np.nanmean(self.mean_gap)) if np.any(np.isfinite(self.mean_gap)) else math.nan


def trigger_statistics(ts, step: Optional[float] = None) -> TriggerStatistics:
    """
    Counts and inter-event gaps per agent.

    Accepts a TimeSeries or a list of per-agent trigger-time arrays together
    with the step h used as the gap floor.

    Examples:
        >>> stats = trigger_statistics([np.array([0.0, 1.0, 3.0])], step=0.01)
        >>> float(stats.min_gap[0]), float(stats.mean_gap[0])
        (1.0, 1.5)
    """
    if isinstance(ts, TimeSeries):
        times, floor = ts.trigger_times(), ts.step
    else:
        times, floor = [np.asarray(item, dtype=float) for item in ts], float(step or 0.0)

    counts = np.array([len(item) for item in times], dtype=np.int64)
    mins, means, maxs = [], [], []
    respected = True
    for item in times:
        gaps = np.diff(np.sort(item))
        if gaps.size == 0:
            mins.append(math.nan)
            means.append(math.nan)
            maxs.append(math.nan)
            continue
        mins.append(float(gaps.min()))
        means.append(float(gaps.mean()))
        maxs.append(float(gaps.max()))
        respected &= bool(gaps.min() >= floor * (1.0 - 1e-9))
    return TriggerStatistics(
        counts=counts,
        min_gap=np.array(mins),
        mean_gap=np.array(means),
        max_gap=np.array(maxs),
        floor=floor,
        floor_respected=respected,
    )


@dataclass(frozen=True)
class ThresholdAudit:
    """Post-hoc checks of the threshold lower bound and the trigger rule."""
    decay_bound_holds: bool
    worst_ratio: float
    trigger_rule_holds: bool
    worst_gap: float
    min_varpi: float

    @property
    def passed(self) -> bool:
        return self.decay_bound_holds and self.trigger_rule_holds and self.min_varpi > 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "passed": self.passed,
            "decay_bound_holds": self.decay_bound_holds,
            "worst_ratio": self.worst_ratio,
            "trigger_rule_holds": self.trigger_rule_holds,
            "worst_gap": self.worst_gap,
            "min_varpi": self.min_varpi,
        }


def threshold_decay_audit(ts: TimeSeries, params: TriggerParameters, tolerance: float = DECAY_TOLERANCE) -> ThresholdAudit:
    """
    Between triggers varpi(t) >= varpi(t_k) exp(-(eta + varsigma/iota)(t - t_k))
    within the relative tolerance, and the trigger level stays strictly below
    varpi at every step where the agent did not fire.
    """
    if ts.varpi is None:
        raise ValueError("trace has no threshold states to audit")
    K, N = ts.varpi.shape
    index = np.arange(K)[:, None]
    last = np.maximum.accumulate(np.where(ts.triggered, index, 0), axis=0)
    reference = np.take_along_axis(ts.varpi, last, axis=0)
    rate = np.broadcast_to(np.asarray(params.decay_rate(), dtype=float), (N,))
    bound = reference * np.exp(-rate[None, :] * (index - last) * ts.step)
    ratio = ts.varpi / bound
    worst_ratio = float(np.min(ratio))

    quiet = ~ts.triggered & np.isfinite(ts.trigger_gap)
    worst_gap = float(np.max(ts.trigger_gap[quiet], initial=-math.inf))
    audit = ThresholdAudit(
        decay_bound_holds=worst_ratio >= 1.0 - tolerance,
        worst_ratio=worst_ratio,
        trigger_rule_holds=worst_gap < 0,
        worst_gap=worst_gap,
        min_varpi=float(np.min(ts.varpi)),
    )
    if not audit.passed:
        logger.warning(f"Threshold audit failed: {audit.to_dict()}")
    return audit


def lyapunov_diagnostic(ts: TimeSeries, gains: GainSet, process: TopologyProcess) -> np.ndarray:
    """
    V1(t) = delta^T (L(sigma) kron P) delta + (1/s) q^T (I_N kron Q) q.

    Examples:
        With P = Q = I, one K2 graph and delta = (v, -v), q = 0 the value is
        4 ||v||^2.
    """
    laplacians = process.topology.laplacians[ts.sigma]
    delta = ts.delta
    q = ts.estimation_error
    consensus = np.einsum("tij,tin,nm,tjm->t", laplacians, delta, gains.P, delta)
    estimation = np.einsum("tin,nm,tim->t", q, gains.Q, q) / process.s
    return consensus + estimation


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    """Scalar and per-agent summaries of one run."""
    steady_state_pos_error: float
    trigger_counts: np.ndarray
    min_inter_event: np.ndarray
    mean_inter_event: np.ndarray
    d_final: Optional[np.ndarray]
    varpi_min: Optional[float]
    occupancy: np.ndarray
    delta_norm_tail_mean: float
    delta_sq_tail_mean: float
    delta_ratio: float
    lyapunov_v1_initial: float
    lyapunov_v1_tail: float
    estimation_error_tail: float
    energy_audit: EnergyAudit
    trigger_floor_respected: bool
    threshold_audit: Optional[ThresholdAudit] = None
    wall_clock: float = 0.0

    SCALARS = (
        "steady_state_pos_error",
        "total_triggers",
        "mean_gap",
        "varpi_min",
        "delta_norm_tail_mean",
        "delta_sq_tail_mean",
        "lyapunov_v1_tail",
        "estimation_error_tail",
    )

    @property
    def total_triggers(self) -> int:
        return int(self.trigger_counts.sum())

    @property
    def mean_gap(self) -> float:
        finite = self.mean_inter_event[np.isfinite(self.mean_inter_event)]
        return float(finite.mean()) if finite.size else math.nan

    def scalars(self) -> Dict[str, float]:
        values = {}
        for name in self.SCALARS:
            value = getattr(self, name)
            values[name] = math.nan if value is None else float(value)
        return values

    def to_dict(self) -> Dict[str, object]:
        def listed(array: Optional[np.ndarray]):
            if array is None:
                return None
            return [None if not np.isfinite(v) else float(v) for v in np.asarray(array, dtype=float)]

        return {
            "steady_state_pos_error": self.steady_state_pos_error,
            "trigger_counts": [int(c) for c in self.trigger_counts],
            "total_triggers": self.total_triggers,
            "min_inter_event": listed(self.min_inter_event),
            "mean_inter_event": listed(self.mean_inter_event),
            "d_final": listed(self.d_final),
            "varpi_min": self.varpi_min,
            "occupancy": listed(self.occupancy),
            "delta_norm_tail_mean": self.delta_norm_tail_mean,
            "delta_sq_tail_mean": self.delta_sq_tail_mean,
            "delta_ratio": self.delta_ratio,
            "lyapunov_v1_initial": self.lyapunov_v1_initial,
            "lyapunov_v1_tail": self.lyapunov_v1_tail,
            "estimation_error_tail": self.estimation_error_tail,
            "energy_audit": {
                "passed": self.energy_audit.passed,
                "max_energy": self.energy_audit.max_energy,
                "tau": self.energy_audit.tau,
            },
            "trigger_floor_respected": self.trigger_floor_respected,
            "threshold_audit": None if self.threshold_audit is None else self.threshold_audit.to_dict(),
            "wall_clock": self.wall_clock,
        }


def compute_metrics(ts: TimeSeries, scenario: Scenario, wall_clock: float = 0.0) -> Metrics:
    """Reduce a trace to Metrics; the tail is the final 10% of the horizon."""
    gains = scenario.require_gains()
    horizon = ts.t[-1]
    tail = ts.t >= (1.0 - STEADY_STATE_FRACTION) * horizon - 1e-9

    delta = ts.delta
    delta_norm = np.linalg.norm(delta.reshape(delta.shape[0], -1), axis=1)
    q_norm = np.linalg.norm(ts.estimation_error.reshape(delta.shape[0], -1), axis=1)
    v1 = lyapunov_diagnostic(ts, gains, scenario.process)
    stats = trigger_statistics(ts)

    threshold = None
    if ts.varpi is not None:
        threshold = threshold_decay_audit(ts, scenario.params.trigger())

    return Metrics(
        steady_state_pos_error=float(np.max(np.abs(delta[tail][..., : ts.position_dims]))),
        trigger_counts=stats.counts,
        min_inter_event=stats.min_gap,
        mean_inter_event=stats.mean_gap,
        d_final=None if ts.d is None else ts.d[-1].copy(),
        varpi_min=None if ts.varpi is None else float(np.min(ts.varpi)),
        occupancy=occupancy_fractions(ts.path, scenario.process.s),
        delta_norm_tail_mean=float(delta_norm[tail].mean()),
        delta_sq_tail_mean=float(np.square(delta_norm[tail]).mean()),
        delta_ratio=float(delta_norm[-1] / delta_norm[0]) if delta_norm[0] > 0 else 0.0,
        lyapunov_v1_initial=float(v1[0]),
        lyapunov_v1_tail=float(v1[tail].mean()),
        estimation_error_tail=float(q_norm[tail].mean()),
        energy_audit=verify_energy_bound(ts.attack_energy, scenario.attack.tau),
        trigger_floor_respected=stats.floor_respected,
        threshold_audit=threshold,
        wall_clock=wall_clock,
    )


def run_scenario(scenario: Scenario, seed: Optional[int] = None, verify: bool = True) -> Tuple[TimeSeries, Metrics]:
    """
    Run the proposed protocol once.

    Args:
        scenario: Scenario with gains attached
        seed: Overrides scenario.seed
        verify: Re-check the design conditions first; failures only warn

    Returns:
        (TimeSeries, Metrics)

    Raises:
        InvariantViolation: If a runtime invariant breaks
    """
    seed = scenario.seed if seed is None else seed
    if verify:
        report = verify_theorem_conditions(scenario.require_gains(), scenario.plant, scenario.process, scenario.attack)
        if not report.feasible:
            logger.warning(f"Design conditions do not all hold for {scenario.name!r}; running anyway")

    logger.info(f"Running {scenario.name!r} (proposed) with seed {seed}")
    started = time.perf_counter()
    ts = simulate(scenario, ProposedController(scenario), seed)
    metrics = compute_metrics(ts, scenario, time.perf_counter() - started)
    logger.debug(f"Seed {seed}: {metrics.total_triggers} triggers, error {metrics.steady_state_pos_error:.4f} m")
    logger.info(f"Finished seed {seed} in {metrics.wall_clock:.2f}s")
    return ts, metrics


# ---------------------------------------------------------------------------
# Monte-Carlo
# ---------------------------------------------------------------------------

def aggregate_metrics(runs: Sequence[Metrics], seeds: Sequence[int]) -> pd.DataFrame:
    """One row per seed with every scalar metric."""
    rows = []
    for seed, metrics in zip(seeds, runs):
        row = {"seed": int(seed)}
        row.update(metrics.scalars())
        rows.append(row)
    return pd.DataFrame(rows)


@dataclass(frozen=True)
class MonteCarloSummary:
    """Per-seed table, mean and sample standard deviation of every scalar."""
    table: pd.DataFrame
    mean: Dict[str, float]
    std: Dict[str, Optional[float]]
    bound: Optional[float]
    bound_ratio: Optional[float]
    bound_holds: Optional[bool]
    tau: float

    @property
    def seeds(self) -> List[int]:
        return [int(s) for s in self.table["seed"]]

    def to_dict(self) -> Dict[str, object]:
        return {
            "seeds": self.seeds,
            "mean": self.mean,
            "std": self.std,
            "bound": self.bound,
            "bound_ratio": self.bound_ratio,
            "bound_holds": self.bound_holds,
            "tau": self.tau,
        }


def summarize(table: pd.DataFrame, bound: Optional[float], tau: float) -> MonteCarloSummary:
    scalars = table.drop(columns=["seed"])
    mean = {name: float(value) for name, value in scalars.mean().items()}
    if len(table) > 1:
        std: Dict[str, Optional[float]] = {name: float(value) for name, value in scalars.std(ddof=1).items()}
    else:
        std = {name: None for name in scalars.columns}

    tail = mean["delta_norm_tail_mean"]
    ratio = holds = None
    if bound is not None and math.isfinite(bound) and bound > 0:
        ratio = tail / bound
        holds = bool(tail <= bound)
    return MonteCarloSummary(table=table, mean=mean, std=std, bound=bound, bound_ratio=ratio, bound_holds=holds, tau=tau)


def monte_carlo(
    scenario: Scenario,
    seeds: Sequence[int],
    runner: Optional[Callable[..., Tuple[TimeSeries, Metrics]]] = None,
    n_jobs: Optional[int] = None,
) -> MonteCarloSummary:
    """
    Run a batch over seeds on worker threads and aggregate.

    The tail mean of ||delta|| is compared with sqrt(tau / (chi kappa)).

    Raises:
        ValueError: With fewer than two seeds
    """
    if len(seeds) < 2:
        raise ValueError(f"monte_carlo needs at least 2 seeds, got {len(seeds)}")
    runner = runner or run_scenario
    gains = scenario.require_gains()
    report = verify_theorem_conditions(gains, scenario.plant, scenario.process, scenario.attack)
    if not report.feasible:
        logger.warning(f"Design conditions do not all hold for {scenario.name!r}")

    jobs = n_jobs or settings.worker_count()
    logger.info(f"Monte-Carlo over {len(seeds)} seeds on {jobs} threads")
    runs = Parallel(n_jobs=jobs, prefer="threads")(
        delayed(lambda s: runner(scenario, seed=s, verify=False)[1])(seed) for seed in seeds
    )
    table = aggregate_metrics(runs, seeds)
    return summarize(table, gains.bound, scenario.attack.tau)
