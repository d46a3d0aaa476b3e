#!/usr/bin/env python3
"""
Protocol Core - Per-Agent Closed-Loop Machinery

Description: Plant and observer derivatives, broadcast bookkeeping, the dynamic
event-trigger rule, the auxiliary threshold dynamics, the adaptive coupling law
and the control input of the secure consensus protocol.

Every operation accepts either a single agent (1-D vectors, scalar
parameters) or the stacked network (leading agent axis, per-agent parameter
arrays); the formulas broadcast over the agent axis.

Time Complexity: O(N * n^2) per stacked evaluation
Space Complexity: O(N * n)

Dependencies: numpy
Author: ThinkCraft
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Union
import logging
import math

import numpy as np

from .core.errors import DimensionMismatch
from .matrix_core import as_matrix

logger = logging.getLogger(__name__)

Scalar = Union[float, np.ndarray]

GEO_MU = 3.986e14
GEO_RADIUS = 4.224e7


@dataclass(frozen=True)
class PlantModel:
    """Linear agent dynamics x_dot = A x + B u, y = C x."""
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self) -> None:
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        C = as_matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise DimensionMismatch(f"C must have {n} columns, got {C.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


def build_spacecraft_model(
    omega: Optional[float] = None,
    omega_dot: float = 0.0,
    mu: float = GEO_MU,
    r: float = GEO_RADIUS,
) -> PlantModel:
    """
    Linearized relative motion of a spacecraft about a reference orbit.

    State [x, y, z, vx, vy, vz] in m and m/s, thrust accelerations as inputs,
    positions as outputs.

    Args:
        omega: Orbital rate (rad/s); defaults to the circular rate sqrt(mu / r^3)
        omega_dot: Orbital angular acceleration (rad/s^2)
        mu: Gravitational parameter (m^3/s^2)
        r: Reference orbit radius (m)

    Returns:
        PlantModel with n = 6, m = p = 3

    Raises:
        ValueError: If r is not positive

    Examples:
        >>> model = build_spacecraft_model()
        >>> bool(abs(model.A[3, 0] - 1.587e-08) < 1e-11)
        True
    """
    if r <= 0:
        raise ValueError(f"orbit radius must be positive, got {r}")
    k = mu / r ** 3
    if omega is None:
        omega = math.sqrt(k)

    A = np.zeros((6, 6))
    A[0:3, 3:6] = np.eye(3)
    A[3] = [omega ** 2 + 2.0 * k, omega_dot, 0.0, 0.0, 2.0 * omega, 0.0]
    A[4] = [-omega_dot, omega ** 2 - k, 0.0, -2.0 * omega, 0.0, 0.0]
    A[5] = [0.0, 0.0, -2.0 * k, 0.0, 0.0, 0.0]
    B = np.vstack([np.zeros((3, 3)), np.eye(3)])
    C = np.hstack([np.eye(3), np.zeros((3, 3))])
    return PlantModel(A=A, B=B, C=C)


@dataclass(frozen=True)
class TriggerParameters:
    """
    Event-trigger and adaptive-law scalars, scalar or one entry per agent.

    Attributes:
        iota: Trigger gain iota_i
        o: Relative weight o_i
        upsilon: Relative weight upsilon_i
        eta: Threshold decay eta_i
        varsigma: Threshold injection gain varsigma_i
        beta: Adaptation rate beta_i
        dbar: Coupling ceiling d_bar_i
    """
    iota: Scalar
    o: Scalar
    upsilon: Scalar
    eta: Scalar
    varsigma: Scalar
    beta: Scalar
    dbar: Scalar

    def for_agent(self, i: int) -> "TriggerParameters":
        """Scalar parameters of agent i."""
        values = {}
        for name in ("iota", "o", "upsilon", "eta", "varsigma", "beta", "dbar"):
            value = np.asarray(getattr(self, name), dtype=float)
            values[name] = float(value) if value.ndim == 0 else float(value[i])
        return TriggerParameters(**values)

    def decay_rate(self) -> Scalar:
        """eta + varsigma / iota, the worst-case threshold decay between events."""
        return np.asarray(self.eta) + np.asarray(self.varsigma) / np.asarray(self.iota)


@dataclass
class AgentState:
    """One agent's continuous and bookkeeping state."""
    x: np.ndarray
    xhat: np.ndarray
    held: np.ndarray
    d: float
    varpi: float
    last_trigger: float = 0.0
    trigger_count: int = 0


@dataclass
class NetworkState:
    """Stacked AgentStates: arrays carry a leading agent axis."""
    x: np.ndarray
    xhat: np.ndarray
    held: np.ndarray
    d: np.ndarray
    varpi: np.ndarray
    last_trigger: np.ndarray = field(default=None)
    trigger_count: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        count = self.x.shape[0]
        if self.last_trigger is None:
            self.last_trigger = np.zeros(count)
        if self.trigger_count is None:
            self.trigger_count = np.zeros(count, dtype=np.int64)

    @property
    def agent_count(self) -> int:
        return self.x.shape[0]

    def agent(self, i: int) -> AgentState:
        return AgentState(
            x=self.x[i].copy(),
            xhat=self.xhat[i].copy(),
            held=self.held[i].copy(),
            d=float(self.d[i]),
            varpi=float(self.varpi[i]),
            last_trigger=float(self.last_trigger[i]),
            trigger_count=int(self.trigger_count[i]),
        )

    def copy(self) -> "NetworkState":
        return replace(
            self,
            x=self.x.copy(),
            xhat=self.xhat.copy(),
            held=self.held.copy(),
            d=self.d.copy(),
            varpi=self.varpi.copy(),
            last_trigger=self.last_trigger.copy(),
            trigger_count=self.trigger_count.copy(),
        )


@dataclass(frozen=True)
class NetworkView:
    """Active graph index and the held broadcasts neighbours can see."""
    sigma: int
    adjacency: np.ndarray
    held: np.ndarray


def _check_last_axis(vector: np.ndarray, size: int, label: str) -> None:
    if vector.shape[-1] != size:
        raise DimensionMismatch(f"{label} has trailing size {vector.shape[-1]}, expected {size}")


def plant_derivative(model: PlantModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """x_dot = A x + B u (row vectors, leading agent axis allowed)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_last_axis(x, model.n, "x")
    _check_last_axis(u, model.m, "u")
    return x @ model.A.T + u @ model.B.T


def observer_derivative(
    model: PlantModel,
    G: np.ndarray,
    xhat: np.ndarray,
    u: np.ndarray,
    y_corrupted: np.ndarray,
) -> np.ndarray:
    """x_hat_dot = A x_hat + B u + G (y_breve - C x_hat)."""
    xhat = np.asarray(xhat, dtype=float)
    y_corrupted = np.asarray(y_corrupted, dtype=float)
    if G.shape != (model.n, model.p):
        raise DimensionMismatch(f"G must be {model.n}x{model.p}, got {G.shape}")
    _check_last_axis(y_corrupted, model.p, "y")
    innovation = y_corrupted - xhat @ model.C.T
    return plant_derivative(model, xhat, u) + innovation @ G.T


def broadcast_relative_state(view: NetworkView, i: Optional[int] = None) -> np.ndarray:
    """
    xi_tilde_i = sum_j a_ij(sigma) (held_j - held_i).

    Returns the row of agent i, or all rows stacked when i is None.
    """
    adjacency = np.asarray(view.adjacency, dtype=float)
    held = np.asarray(view.held, dtype=float)
    if i is not None:
        return adjacency[i] @ held - adjacency[i].sum() * held[i]
    return adjacency @ held - adjacency.sum(axis=1)[:, None] * held


def estimation_deviation(agent) -> np.ndarray:
    """m_i = held - x_hat (zero right after agent i broadcasts)."""
    return np.asarray(agent.held) - np.asarray(agent.xhat)


def gamma_norm(vector: np.ndarray, Gamma: np.ndarray) -> Scalar:
    """v^T Gamma v over the trailing axis."""
    return np.einsum("...i,ij,...j->...", vector, Gamma, vector)


def trigger_level(agent, xi_tilde: np.ndarray, Gamma: np.ndarray, params: TriggerParameters) -> Scalar:
    """iota (m^T Gamma m - o upsilon xi^T Gamma xi), the left side of the trigger rule."""
    m = estimation_deviation(agent)
    return np.asarray(params.iota) * (
        gamma_norm(m, Gamma)
        - np.asarray(params.o) * np.asarray(params.upsilon) * gamma_norm(xi_tilde, Gamma)
    )


def trigger_predicate(agent, xi_tilde: np.ndarray, Gamma: np.ndarray, params: TriggerParameters):
    """
    True iff iota (m^T Gamma m - o upsilon xi^T Gamma xi) >= varpi.

    Examples:
        >>> agent = AgentState(np.zeros(1), np.zeros(1), np.ones(1), 1.5, 10.0)
        >>> p = TriggerParameters(560.0, 0.002, 0.00173, 0.001, 579.6, 1.0, 3.0)
        >>> bool(trigger_predicate(agent, np.zeros(1), np.eye(1), p))
        True
    """
    return trigger_level(agent, xi_tilde, Gamma, params) >= np.asarray(agent.varpi)


def varpi_derivative(agent, xi_tilde: np.ndarray, Gamma: np.ndarray, params: TriggerParameters):
    """varpi_dot = -eta varpi + varsigma (o upsilon xi^T Gamma xi - m^T Gamma m)."""
    m = estimation_deviation(agent)
    relative = np.asarray(params.o) * np.asarray(params.upsilon) * gamma_norm(xi_tilde, Gamma)
    return -np.asarray(params.eta) * np.asarray(agent.varpi) + np.asarray(params.varsigma) * (
        relative - gamma_norm(m, Gamma)
    )


def coupling_derivative(agent, xi_tilde: np.ndarray, Gamma: np.ndarray, params: TriggerParameters):
    """d_dot = beta xi^T Gamma xi while d < d_bar, else 0."""
    rate = np.asarray(params.beta) * gamma_norm(xi_tilde, Gamma)
    return np.where(np.asarray(agent.d) < np.asarray(params.dbar), rate, 0.0)


def control_input(agent, xi_tilde: np.ndarray, K: np.ndarray) -> np.ndarray:
    """
    u_i = d_i K xi_tilde_i.

    Raises:
        DimensionMismatch: If K does not act on xi_tilde
    """
    xi_tilde = np.asarray(xi_tilde, dtype=float)
    if K.shape[1] != xi_tilde.shape[-1]:
        raise DimensionMismatch(f"K has {K.shape[1]} columns, xi_tilde has {xi_tilde.shape[-1]}")
    d = np.asarray(agent.d, dtype=float)
    return d[..., None] * (xi_tilde @ K.T) if d.ndim else float(d) * (K @ xi_tilde)
