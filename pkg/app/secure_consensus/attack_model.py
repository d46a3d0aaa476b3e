#!/usr/bin/env python3
"""
Attack Model - Bernoulli Deception Attacks on Sensor Outputs

Description: Each agent's measured output is corrupted as
y_breve_i = y_i + alpha_i(t) * eps_i(t), where alpha_i is a Bernoulli gate
resampled once per resample interval and eps_i is a sinusoid. Amplitudes are
normalized once at construction so the stacked signal energy never exceeds tau.

Time Complexity: O(N * p) per sample
Space Complexity: O(N * p)

Dependencies: numpy
Author: ThinkCraft
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union
import logging
import math

import numpy as np

from .core.errors import DimensionMismatch

logger = logging.getLogger(__name__)

ENERGY_SLACK = 1e-12


@dataclass(frozen=True)
class AttackConfig:
    """
    Attack parameters for N agents with p outputs each.

    Attributes:
        probabilities: Attack probability per agent, diagonal of F
        tau: Bound on the stacked energy ||eps(t)||^2
        amplitudes: Per-agent sinusoid amplitudes after normalization
        frequencies: Angular frequencies (rad/s)
        phases: Phases (rad)
        directions: Unit direction per agent, shape (N, p)
        resample_interval: Seconds between Bernoulli redraws
    """
    probabilities: np.ndarray
    tau: float
    amplitudes: np.ndarray
    frequencies: np.ndarray
    phases: np.ndarray
    directions: np.ndarray
    resample_interval: float

    def __post_init__(self) -> None:
        probabilities = np.asarray(self.probabilities, dtype=float)
        if np.any((probabilities < 0) | (probabilities > 1)):
            raise ValueError(f"attack probabilities must lie in [0, 1], got {probabilities}")
        if self.tau < 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")
        if self.resample_interval <= 0:
            raise ValueError(f"resample_interval must be positive, got {self.resample_interval}")
        n = probabilities.shape[0]
        for name in ("amplitudes", "frequencies", "phases"):
            if np.asarray(getattr(self, name)).shape != (n,):
                raise DimensionMismatch(f"{name} must have one entry per agent ({n})")
        if np.asarray(self.directions).ndim != 2 or np.asarray(self.directions).shape[0] != n:
            raise DimensionMismatch(f"directions must have shape ({n}, p)")
        if float(np.sum(np.square(self.amplitudes))) > self.tau + ENERGY_SLACK:
            raise ValueError("amplitudes exceed the energy bound tau")

    @property
    def agent_count(self) -> int:
        return int(np.asarray(self.probabilities).shape[0])

    @property
    def output_dim(self) -> int:
        return int(np.asarray(self.directions).shape[1])

    @property
    def lambda_max_fft(self) -> float:
        """Largest eigenvalue of F F^T with F = diag(probabilities)."""
        return float(np.max(np.square(self.probabilities), initial=0.0))

    @classmethod
    def build(
        cls,
        probabilities: Sequence[float],
        tau: float,
        output_dim: int,
        resample_interval: float,
        frequencies: Optional[Sequence[float]] = None,
        phases: Optional[Sequence[float]] = None,
        directions: Optional[Sequence[Sequence[float]]] = None,
        weights: Optional[Sequence[float]] = None,
    ) -> "AttackConfig":
        """
        Build a config, filling in the default waveform and normalizing it.

        Default waveform: agent i uses frequency 0.5 + 0.1 i rad/s, phase
        2 pi i / N and a direction mixing two adjacent output axes. Raw
        amplitude weights (default all ones) are scaled once so that
        sum_i amp_i^2 = tau, which bounds sum_i ||eps_i(t)||^2 by tau.
        """
        probs = np.asarray(probabilities, dtype=float)
        n = probs.shape[0]
        index = np.arange(n)

        freq = 0.5 + 0.1 * index if frequencies is None else np.asarray(frequencies, dtype=float)
        phase = 2.0 * math.pi * index / max(n, 1) if phases is None else np.asarray(phases, dtype=float)

        if directions is None:
            dirs = np.zeros((n, output_dim))
            dirs[index, index % output_dim] = 1.0
            dirs[index, (index + 1) % output_dim] += 0.5
        else:
            dirs = np.asarray(directions, dtype=float)
            if dirs.shape != (n, output_dim):
                raise DimensionMismatch(f"directions must have shape ({n}, {output_dim})")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(norms == 0):
            raise ValueError("attack directions must be non-zero")
        dirs = dirs / norms[:, None]

        raw = np.ones(n) if weights is None else np.abs(np.asarray(weights, dtype=float))
        total = float(np.sum(raw ** 2))
        amps = raw * math.sqrt(tau / total) if total > 0 else np.zeros(n)

        return cls(
            probabilities=probs,
            tau=float(tau),
            amplitudes=amps,
            frequencies=freq,
            phases=phase,
            directions=dirs,
            resample_interval=float(resample_interval),
        )

    @classmethod
    def disabled(cls, agent_count: int, output_dim: int, resample_interval: float) -> "AttackConfig":
        return cls.build(np.zeros(agent_count), 0.0, output_dim, resample_interval)


@dataclass(frozen=True)
class AttackSample:
    """Gate and signal at one instant; interval_index records the alpha draw."""
    alpha: np.ndarray
    epsilon: np.ndarray
    interval_index: int = 0

    @property
    def energy(self) -> float:
        return float(np.sum(np.square(self.epsilon)))


def attack_signal(cfg: AttackConfig, t: float) -> np.ndarray:
    """eps_i(t) = amp_i * sin(omega_i t + phi_i) * dir_i, shape (N, p)."""
    envelope = cfg.amplitudes * np.sin(cfg.frequencies * t + cfg.phases)
    return envelope[:, None] * cfg.directions


def interval_index(cfg: AttackConfig, t: float) -> int:
    # nudged so t = k * interval lands in interval k despite round-off
    return int(math.floor(t / cfg.resample_interval + 1e-9))


def sample_attack(
    cfg: AttackConfig,
    t: float,
    rng: np.random.Generator,
    previous: Optional[AttackSample] = None,
) -> AttackSample:
    """
    Attack gate and signal at time t.

    alpha is drawn independently per agent at the start of each resample
    interval and reused for every t inside it; passing the previous sample
    lets the caller keep that hold. Agents with probability 0 never draw 1.

    Args:
        cfg: Attack configuration
        t: Time in seconds, t >= 0
        rng: Generator that owns the Bernoulli stream
        previous: Sample returned for an earlier t, if any

    Raises:
        ValueError: If t is negative
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    index = interval_index(cfg, t)
    if previous is not None and previous.interval_index == index:
        alpha = previous.alpha
    else:
        alpha = (rng.random(cfg.agent_count) < cfg.probabilities).astype(float)
    return AttackSample(alpha=alpha, epsilon=attack_signal(cfg, t), interval_index=index)


def corrupt_output(y: np.ndarray, sample: AttackSample) -> np.ndarray:
    """
    y_breve_i = y_i + alpha_i * eps_i for stacked outputs of shape (N, p).

    Raises:
        DimensionMismatch: If y and the sample disagree in shape
    """
    y = np.asarray(y, dtype=float)
    if y.shape != sample.epsilon.shape:
        raise DimensionMismatch(
            f"output shape {y.shape} does not match attack signal shape {sample.epsilon.shape}"
        )
    return y + sample.alpha[:, None] * sample.epsilon


@dataclass(frozen=True)
class EnergyAudit:
    passed: bool
    max_energy: float
    tau: float


def verify_energy_bound(
    trace: Union[Iterable[AttackSample], np.ndarray],
    tau: float,
) -> EnergyAudit:
    """
    Compare max_t ||eps(t)||^2 over a trace with tau.

    The trace may be AttackSamples, a 1-D array of per-instant energies, or a
    (K, N, p) array of stacked signals.
    """
    if isinstance(trace, np.ndarray):
        if trace.ndim == 1:
            energies = trace
        else:
            energies = np.sum(np.square(trace.reshape(trace.shape[0], -1)), axis=1)
    else:
        energies = np.array([sample.energy for sample in trace])
    max_energy = float(np.max(energies, initial=0.0))
    passed = max_energy <= tau + ENERGY_SLACK
    if not passed:
        logger.warning(f"Attack energy {max_energy:.6e} exceeds bound tau={tau:.6e}")
    return EnergyAudit(passed=passed, max_energy=max_energy, tau=float(tau))
