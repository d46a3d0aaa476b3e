#!/usr/bin/env python3
"""
Scenario and Gains Documents

Pydantic models for the JSON files the CLI reads and writes. A scenario
document has the sections plant, graphs, markov, attack, trigger, adaptive,
integration and initial_conditions, plus optional baseline and synthesis.
Per-agent scalars accept one number (broadcast to every agent) or a list of N.

Author: ThinkCraft
"""

from typing import Any, Dict, List, Literal, Optional, Tuple, Union
import hashlib
import json
import logging
import math
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..core.errors import ConfigError

logger = logging.getLogger(__name__)

PerAgent = Union[float, List[float]]
Matrix = List[List[float]]

TABLE_ATTACK_PROBABILITIES = [0.32, 0.24, 0.30, 0.42, 0.27, 0.32, 0.25, 0.23, 0.39, 0.28]
DEFAULT_GRAPHS = [
    [[1, 2], [2, 3], [4, 5], [6, 7], [8, 9], [9, 10]],
    [[3, 4], [5, 6], [7, 8], [10, 1]],
]
DEFAULT_GENERATOR = [[-1.0, 1.0], [2.0, -2.0]]


def per_agent(value: PerAgent, count: int, name: str = "value") -> np.ndarray:
    """Broadcast a scalar or check a list against the agent count."""
    if isinstance(value, (int, float)):
        return np.full(count, float(value))
    array = np.asarray(value, dtype=float)
    if array.shape != (count,):
        raise ValueError(f"{name} must be a number or a list of {count} numbers, got {len(value)}")
    return array


def _check_finite_matrix(value: Optional[Matrix], name: str) -> Optional[Matrix]:
    if value is None:
        return value
    if not value or any(len(row) != len(value[0]) for row in value):
        raise ValueError(f"{name} must be a non-empty rectangular list of rows")
    if not all(math.isfinite(entry) for row in value for entry in row):
        raise ValueError(f"{name} contains non-finite entries")
    return value


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PlantSection(Section):
    """Spacecraft relative dynamics by orbit parameters, or explicit matrices."""
    kind: Literal["spacecraft", "matrices"] = "spacecraft"
    mu: float = Field(3.986e14, gt=0, description="Gravitational parameter (m^3/s^2)")
    r: float = Field(4.224e7, gt=0, description="Reference orbit radius (m)")
    omega: Optional[float] = Field(None, description="Orbital rate (rad/s); circular rate if omitted")
    omega_dot: float = 0.0
    A: Optional[Matrix] = None
    B: Optional[Matrix] = None
    C: Optional[Matrix] = None

    @field_validator("A", "B", "C")
    @classmethod
    def validate_matrix(cls, v, info):
        return _check_finite_matrix(v, info.field_name)

    @model_validator(mode="after")
    def check_matrices(self):
        if self.kind == "matrices" and (self.A is None or self.B is None or self.C is None):
            raise ValueError("plant kind 'matrices' needs A, B and C")
        return self


class GraphsSection(Section):
    """Candidate graphs as edge lists (1-based by default)."""
    node_count: int = Field(..., ge=1)
    edges: List[List[Tuple[int, int]]] = Field(..., min_length=1)
    one_based: bool = True

    @model_validator(mode="after")
    def check_edges(self):
        low = 1 if self.one_based else 0
        high = self.node_count if self.one_based else self.node_count - 1
        for index, graph in enumerate(self.edges):
            for i, j in graph:
                if not (low <= i <= high and low <= j <= high):
                    raise ValueError(f"graph {index + 1} edge ({i}, {j}) is outside [{low}, {high}]")
                if i == j:
                    raise ValueError(f"graph {index + 1} has a self-loop at node {i}")
        return self


class MarkovSection(Section):
    generator: Matrix

    @field_validator("generator")
    @classmethod
    def validate_generator(cls, v):
        v = _check_finite_matrix(v, "generator")
        if len(v) != len(v[0]):
            raise ValueError("generator must be square")
        return v


class AttackSection(Section):
    """Bernoulli gate probabilities and the sinusoid waveform."""
    enabled: bool = True
    probabilities: PerAgent
    tau: float = Field(..., ge=0)
    resample_interval: Optional[float] = Field(None, gt=0, description="Defaults to the integration step")
    frequencies: Optional[List[float]] = None
    phases: Optional[List[float]] = None
    directions: Optional[Matrix] = None
    weights: Optional[List[float]] = None

    @field_validator("probabilities")
    @classmethod
    def validate_probabilities(cls, v):
        values = [v] if isinstance(v, (int, float)) else v
        if any(not 0.0 <= p <= 1.0 for p in values):
            raise ValueError("attack probabilities must lie in [0, 1]")
        return v


class TriggerSection(Section):
    iota: PerAgent
    o: PerAgent
    upsilon: PerAgent
    eta: PerAgent
    varsigma: PerAgent
    xi_hold_mode: Literal["refresh", "freeze"] = "refresh"
    rebroadcast_on_switch: bool = False


class AdaptiveSection(Section):
    c: float = Field(..., gt=0)
    kappa: float = Field(..., gt=0)
    beta: PerAgent
    dbar: PerAgent
    d0: PerAgent
    varpi0: PerAgent
    chi: Optional[float] = Field(None, gt=0)
    rho: Optional[float] = Field(None, gt=0, description="Stated rho, cross-checked only")

    @field_validator("varpi0")
    @classmethod
    def validate_varpi0(cls, v):
        values = [v] if isinstance(v, (int, float)) else v
        if any(value <= 0 for value in values):
            raise ValueError("varpi0 must be positive for every agent")
        return v


class IntegrationSection(Section):
    step: float = Field(0.01, gt=0)
    horizon: float = Field(100.0, gt=0)
    decimation: int = Field(10, ge=1)

    @model_validator(mode="after")
    def check_horizon(self):
        if self.horizon < 10 * self.step - 1e-12:
            raise ValueError("horizon must cover at least 10 integration steps")
        return self


class InitialConditionsSection(Section):
    position_range: float = Field(5.0, ge=0)
    position_dims: int = Field(3, ge=0)
    observer_start: Literal["zero", "match"] = "zero"
    x0: Optional[Matrix] = None


class BaselineSection(Section):
    kappa: float = Field(0.05, gt=0)
    beta1: float = Field(0.8, gt=0)
    beta2: float = Field(0.35, gt=0)
    mu: float = Field(1.0, gt=0)
    c: float = Field(10.0, gt=0)
    gamma: PerAgent = 1.0
    state_source: Literal["observer", "raw"] = "observer"


class SynthesisSection(Section):
    epsilon: Optional[float] = Field(None, gt=0)
    exponent_min: int = -3
    exponent_max: int = 3
    points_per_decade: int = Field(2, ge=1)
    scales: List[float] = Field(default_factory=lambda: [10.0 ** k for k in range(-3, 4)])
    shift_fractions: List[float] = Field(default_factory=lambda: [0.5, 0.75, 0.9])

    @model_validator(mode="after")
    def check_range(self):
        if self.exponent_max < self.exponent_min:
            raise ValueError("exponent_max must not be below exponent_min")
        if any(not 0.0 < fraction < 1.0 for fraction in self.shift_fractions):
            raise ValueError("shift_fractions must lie in (0, 1)")
        return self


class ScenarioConfig(Section):
    """A full scenario document."""
    name: str = "scenario"
    seed: int = 0
    plant: PlantSection = Field(default_factory=PlantSection)
    graphs: GraphsSection
    markov: MarkovSection
    attack: AttackSection
    trigger: TriggerSection
    adaptive: AdaptiveSection
    integration: IntegrationSection = Field(default_factory=IntegrationSection)
    initial_conditions: InitialConditionsSection = Field(default_factory=InitialConditionsSection)
    baseline: BaselineSection = Field(default_factory=BaselineSection)
    synthesis: SynthesisSection = Field(default_factory=SynthesisSection)

    @model_validator(mode="after")
    def check_agent_lists(self):
        N = self.graphs.node_count
        fields = {
            "attack.probabilities": self.attack.probabilities,
            "trigger.iota": self.trigger.iota,
            "trigger.o": self.trigger.o,
            "trigger.upsilon": self.trigger.upsilon,
            "trigger.eta": self.trigger.eta,
            "trigger.varsigma": self.trigger.varsigma,
            "adaptive.beta": self.adaptive.beta,
            "adaptive.dbar": self.adaptive.dbar,
            "adaptive.d0": self.adaptive.d0,
            "adaptive.varpi0": self.adaptive.varpi0,
            "baseline.gamma": self.baseline.gamma,
        }
        for name, value in fields.items():
            if isinstance(value, list) and len(value) != N:
                raise ValueError(f"{name} has {len(value)} entries, expected {N}")
        if len(self.markov.generator) != len(self.graphs.edges):
            raise ValueError(
                f"markov.generator has {len(self.markov.generator)} states "
                f"but {len(self.graphs.edges)} graphs are listed"
            )
        return self

    def agents(self, value: PerAgent, name: str) -> np.ndarray:
        return per_agent(value, self.graphs.node_count, name)


class GainsDocument(Section):
    """Synthesized matrices with the scalars needed to reuse them."""
    P: Matrix
    Q: Matrix
    X: Matrix
    K: Matrix
    G: Matrix
    Gamma: Matrix
    epsilon: Optional[float] = None
    chi: Optional[float] = None
    bound: Optional[float] = None
    config_digest: Optional[str] = None
    observer: Dict[str, Any] = Field(default_factory=dict)
    constants: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("P", "Q", "X", "K", "G", "Gamma")
    @classmethod
    def validate_matrix(cls, v, info):
        return _check_finite_matrix(v, info.field_name)


def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(piece) for piece in item["loc"]) or "<root>"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def parse_document(text: str, model: type, source: str = "<string>"):
    """
    Parse JSON text into a pydantic model.

    Raises:
        ConfigError: With line and column on a syntax error, or the failing
            field paths on a validation error
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    try:
        return model.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_validation_error(exc)}") from exc


def load_document(path: Union[str, Path], model: type):
    """Read and parse a JSON document. OSError propagates for missing files."""
    path = Path(path)
    return parse_document(path.read_text(encoding="utf-8"), model, str(path))


def load_scenario_config(path: Union[str, Path]) -> ScenarioConfig:
    return load_document(path, ScenarioConfig)


def load_gains_document(path: Union[str, Path]) -> GainsDocument:
    return load_document(path, GainsDocument)


def canonical_json(config: BaseModel) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_digest(config: BaseModel) -> str:
    """sha256 of the canonical JSON form (sorted keys, compact separators)."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def default_scenario_config() -> ScenarioConfig:
    """
    Ten-spacecraft scenario with scalars chosen so every design condition holds.

    Keeps c, o, varsigma, d(0), tau and the attack probabilities of the
    reference table and raises d_bar, iota, eta and upsilon so that
    d_bar > 4c + o + 1 and eta > (rho - varsigma)/iota. varpi(0) = 2.5e4
    puts a threshold floor varpi/iota of 5e-5 above the estimate noise. The
    baseline keeps its gains but scales its trigger offsets to 1e-7: with
    the reference beta2 = 0.35 > (kappa/beta1) lambda_M(P_b B B^T P_b) = 0.25
    and x_hat(0) = 0 its trigger function is negative for every state, so
    it would never broadcast.
    """
    return ScenarioConfig.model_validate(
        {
            "name": "spacecraft-10",
            "seed": 2024,
            "plant": {"kind": "spacecraft"},
            "graphs": {"node_count": 10, "edges": DEFAULT_GRAPHS},
            "markov": {"generator": DEFAULT_GENERATOR},
            "attack": {"probabilities": TABLE_ATTACK_PROBABILITIES, "tau": 0.02},
            "trigger": {"iota": 5.0e8, "o": 0.002, "upsilon": 25.0, "eta": 0.03, "varsigma": 579.6},
            "adaptive": {
                "c": 5.2356,
                "kappa": 0.01,
                "beta": 50.0,
                "dbar": 22.0,
                "d0": 1.05,
                "varpi0": 2.5e4,
            },
            "baseline": {"beta2": 1.0e-7, "c": 1.0e-7},
        }
    )


def table_config() -> ScenarioConfig:
    """The reference parameter table taken literally, inconsistencies included."""
    config = default_scenario_config().model_dump()
    config["name"] = "spacecraft-10-literal-table"
    config["trigger"].update({"iota": 560.0, "upsilon": 0.00173, "eta": 0.001})
    config["adaptive"].update({"dbar": 3.0, "rho": 579.6, "varpi0": 10.0})
    config["baseline"].update({"beta2": 0.35, "c": 10.0})
    return ScenarioConfig.model_validate(config)
