#!/usr/bin/env python3
"""
Gain Synthesis - Riccati Gains, Observer Search and Certificates

Description: Computes the controller Riccati matrix P and K = B^T P, searches
observer gains (Q, X, G = Q^-1 X) over a dual-Riccati grid and a shifted
Lyapunov family, derives the protocol constants (c_tilde, rho, bound) and
certifies every matrix inequality with eigenvalue margins from matrix_core.

The observer inequality reads

    Psi + lambda_M(F F^T) X X^T < 0,
    Psi = A^T Q + Q A - X C - (X C)^T + W Gamma + kappa Q,
    W   = s (2c + d_bar^2) Pi_breve lambda_M(L_hat)^2,

checked through its Schur block [[Psi, sqrt(lambda_F) X], [., -I]].

Time Complexity: O(grid * iterations * n^3) for the observer search
Space Complexity: O(n^2) per candidate

Dependencies: numpy, scipy (linalg, integrate), joblib
Author: ThinkCraft
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
import logging
import math
import warnings

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg
from scipy.integrate import solve_ivp

from .attack_model import AttackConfig
from .core.config import settings
from .core.errors import Infeasible, NoConvergence, SecureConsensusError, Singular
from .graph_markov import TopologyProcess
from .matrix_core import (
    as_matrix,
    definiteness_margin,
    is_positive_definite,
    lambda_min,
    solve_linear,
    symmetrize,
)
from .protocol_core import PlantModel, TriggerParameters

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-8
FLOW_TOLERANCE = 1e-10
MAX_FLOW_EVALUATIONS = 1_000_000
DIVERGENCE_LIMIT = 1e12
CHI_SHRINK = 0.99
UNATTACKED_WEIGHTS = (1.0, 10.0, 100.0)


# ---------------------------------------------------------------------------
# Protocol scalars
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProtocolParameters:
    """
    Scalar block of a scenario. Per-agent entries are arrays of length N.

    Attributes:
        c: Coupling constant c
        kappa: Convergence-rate constant kappa
        iota, o, upsilon, eta, varsigma, beta, dbar, varpi0: per-agent arrays
        chi: Optional fixed chi; derived from (P, Q) when None
        rho_stated: Optional rho quoted by a parameter table, cross-checked only
    """
    c: float
    kappa: float
    iota: np.ndarray
    o: np.ndarray
    upsilon: np.ndarray
    eta: np.ndarray
    varsigma: np.ndarray
    beta: np.ndarray
    dbar: np.ndarray
    varpi0: np.ndarray
    chi: Optional[float] = None
    rho_stated: Optional[float] = None

    PER_AGENT = ("iota", "o", "upsilon", "eta", "varsigma", "beta", "dbar", "varpi0")

    def __post_init__(self) -> None:
        lengths = set()
        for name in self.PER_AGENT:
            value = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, value)
            lengths.add(value.shape[0])
        if len(lengths) != 1:
            raise ValueError(f"per-agent parameters have inconsistent lengths {sorted(lengths)}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")

    @property
    def agent_count(self) -> int:
        return int(self.iota.shape[0])

    def trigger(self) -> TriggerParameters:
        return TriggerParameters(
            iota=self.iota,
            o=self.o,
            upsilon=self.upsilon,
            eta=self.eta,
            varsigma=self.varsigma,
            beta=self.beta,
            dbar=self.dbar,
        )


@dataclass(frozen=True)
class ScalarChecks:
    """The four scalar conditions, one boolean per agent each."""
    rho_exceeds_varsigma: np.ndarray
    eta_condition: np.ndarray
    dbar_condition: np.ndarray
    upsilon_condition: np.ndarray
    dbar_threshold: np.ndarray
    rho: float
    rho_stated: Optional[float] = None

    @property
    def rho_consistent(self) -> Optional[bool]:
        if self.rho_stated is None:
            return None
        return bool(math.isclose(self.rho_stated, self.rho, rel_tol=1e-3))

    @property
    def all_passed(self) -> bool:
        return bool(
            np.all(self.rho_exceeds_varsigma)
            and np.all(self.eta_condition)
            and np.all(self.dbar_condition)
            and np.all(self.upsilon_condition)
        )

    def items(self) -> List[Tuple[str, bool, str]]:
        """(name, passed, detail) rows for reports."""
        rows = [
            ("rho - varsigma_i > 0", bool(np.all(self.rho_exceeds_varsigma)), f"rho = {self.rho:.4f}"),
            ("eta_i - (rho - varsigma_i)/iota_i > 0", bool(np.all(self.eta_condition)), ""),
            (
                "d_bar_i > 4c + o_i + 1",
                bool(np.all(self.dbar_condition)),
                f"threshold = {float(np.max(self.dbar_threshold)):.4f}",
            ),
            ("upsilon_i >= 1/rho", bool(np.all(self.upsilon_condition)), f"1/rho = {1.0 / self.rho:.6g}"),
        ]
        if self.rho_stated is not None:
            rows.append(
                (
                    "stated rho matches c_tilde Pi_breve N(N^2+N)",
                    bool(self.rho_consistent),
                    f"stated = {self.rho_stated:.4f}, computed = {self.rho:.4f}",
                )
            )
        return rows


def evaluate_scalar_checks(params: ProtocolParameters, rho: float) -> ScalarChecks:
    """Evaluate the four scalar conditions with rho_i = rho for every agent."""
    threshold = 4.0 * params.c + params.o + 1.0
    return ScalarChecks(
        rho_exceeds_varsigma=rho - params.varsigma > 0,
        eta_condition=params.eta - (rho - params.varsigma) / params.iota > 0,
        dbar_condition=params.dbar > threshold,
        upsilon_condition=params.upsilon >= 1.0 / rho,
        dbar_threshold=threshold,
        rho=float(rho),
        rho_stated=params.rho_stated,
    )


@dataclass(frozen=True)
class ProtocolConstants:
    """Graph, chain and attack derived constants used by the certificates."""
    N: int
    s: int
    lambda2: float
    lambdaM: float
    lambdaM_FFT: float
    PiBar: float
    PiBreve: float
    ctilde: float
    rho: float
    tau: float
    chi: Optional[float]
    bound: Optional[float]
    checks: ScalarChecks

    def control_gamma(self, c: float) -> float:
        """gamma = (c / s) lambda_2(L_hat)."""
        return c / self.s * self.lambda2

    def kappa_eff(self, kappa: float) -> float:
        return kappa / self.PiBar

    def coupling_weight(self, params: ProtocolParameters) -> float:
        """W = s (2c + d_bar^2) Pi_breve lambda_M^2, with the largest d_bar_i."""
        dbar = float(np.max(params.dbar))
        return self.s * (2.0 * params.c + dbar ** 2) * self.PiBreve * self.lambdaM ** 2


def derive_chi(P: np.ndarray, Q: np.ndarray, lambda2: float) -> float:
    """chi = 0.99 min(lambda_min(lambda_2 P), lambda_min(Q))."""
    return CHI_SHRINK * min(lambda_min(lambda2 * P), lambda_min(Q))


def compute_protocol_constants(
    params: ProtocolParameters,
    process: TopologyProcess,
    attack: AttackConfig,
    P: Optional[np.ndarray] = None,
    Q: Optional[np.ndarray] = None,
) -> ProtocolConstants:
    """
    Fill c_tilde, rho, lambda_2, lambda_M, Pi bounds, chi and the bound radius.

    Violated scalar conditions are reported in the result, never raised.

    Examples:
        With N = 10, d_bar = 3.0, c = 5.2356 and Pi_breve = 2/3:
        c_tilde = 23.9424 and rho = 23.9424 * (2/3) * 10 * 110 = 17557.76.
    """
    N = process.node_count
    ctilde = float(np.max(params.dbar + 4.0 * params.c))
    rho = ctilde * process.pi_breve * N * (N ** 2 + N)

    chi = params.chi
    if chi is None and P is not None and Q is not None:
        chi = derive_chi(P, Q, process.lambda2)

    bound = None
    if chi is not None and chi > 0:
        bound = math.sqrt(attack.tau / (chi * params.kappa)) if params.kappa > 0 else math.inf

    return ProtocolConstants(
        N=N,
        s=process.s,
        lambda2=process.lambda2,
        lambdaM=process.lambdaM,
        lambdaM_FFT=attack.lambda_max_fft,
        PiBar=process.pi_bar,
        PiBreve=process.pi_breve,
        ctilde=ctilde,
        rho=rho,
        tau=attack.tau,
        chi=chi,
        bound=bound,
        checks=evaluate_scalar_checks(params, rho),
    )


# ---------------------------------------------------------------------------
# Riccati machinery
# ---------------------------------------------------------------------------

def default_riccati_offset(A: np.ndarray) -> float:
    """epsilon = 1e-4 ||A||_2, falling back to 1e-4 when A = 0."""
    norm = float(np.linalg.norm(A, 2))
    return 1e-4 * norm if norm > 0 else 1e-4


def _residual(P: np.ndarray, A: np.ndarray, BBt: np.ndarray, gamma: float, Qc: np.ndarray) -> np.ndarray:
    return A.T @ P + P @ A - gamma * P @ BBt @ P + Qc


def _newton_refine(
    P: np.ndarray, A: np.ndarray, B: np.ndarray, gamma: float, Qc: np.ndarray, steps: int = 6
) -> Tuple[np.ndarray, float]:
    """Kleinman iterations from P; keeps the iterate with the smallest residual."""
    BBt = B @ B.T
    best = P
    best_residual = float(np.linalg.norm(_residual(P, A, BBt, gamma, Qc)))
    for _ in range(steps):
        closed_loop = A - gamma * BBt @ best
        try:
            candidate = linalg.solve_continuous_lyapunov(
                closed_loop.T, -(Qc + gamma * best @ BBt @ best)
            )
        except (linalg.LinAlgError, ValueError):
            break
        candidate = symmetrize(candidate)
        if not np.all(np.isfinite(candidate)):
            break
        residual = float(np.linalg.norm(_residual(candidate, A, BBt, gamma, Qc)))
        if residual >= best_residual:
            break
        best, best_residual = candidate, residual
    return best, best_residual


def _riccati_flow(A: np.ndarray, B: np.ndarray, gamma: float, Qc: np.ndarray) -> np.ndarray:
    """
    Integrate P_dot = A^T P + P A - gamma P B B^T P + Qc forward from P(0) = I
    over doubling windows until ||P_dot|| < 1e-10 ||P||.
    """
    n = A.shape[0]
    BBt = B @ B.T

    def rhs(_t: float, flat: np.ndarray) -> np.ndarray:
        return _residual(flat.reshape(n, n), A, BBt, gamma, Qc).ravel()

    P = np.eye(n)
    start, window, evaluations = 0.0, 10.0, 0
    while evaluations < MAX_FLOW_EVALUATIONS:
        solution = solve_ivp(rhs, (start, start + window), P.ravel(), method="RK45", rtol=1e-10, atol=1e-12)
        evaluations += int(solution.nfev)
        if not solution.success:
            raise NoConvergence(f"Riccati flow integration failed: {solution.message}", evaluations)
        P = symmetrize(solution.y[:, -1].reshape(n, n))
        norm = float(np.linalg.norm(P))
        if not np.all(np.isfinite(P)) or norm > DIVERGENCE_LIMIT:
            raise NoConvergence("Riccati flow diverged; the pair is likely not stabilizable", evaluations)
        if float(np.linalg.norm(rhs(0.0, P.ravel()))) < FLOW_TOLERANCE * norm:
            logger.debug(f"Riccati flow settled after {evaluations} evaluations")
            return P
        start += window
        window *= 2.0
    raise NoConvergence(
        f"Riccati flow did not settle within {MAX_FLOW_EVALUATIONS} evaluations", evaluations
    )


def solve_riccati(
    A: np.ndarray,
    B: np.ndarray,
    gamma: float,
    Qc: np.ndarray,
    allow_flow: bool = True,
) -> np.ndarray:
    """
    Stabilizing solution of A^T P + P A - gamma P B B^T P + Qc = 0.

    scipy's Schur-method CARE solver gives the first iterate, Kleinman steps
    polish it, and the forward differential Riccati flow takes over when the
    direct solve fails or leaves a residual above 1e-8 ||P||.

    Raises:
        NoConvergence: If no positive definite solution meets the tolerance
    """
    n = A.shape[0]
    if not np.any(B):
        try:
            P = symmetrize(linalg.solve_continuous_lyapunov(A.T, -Qc))
        except (linalg.LinAlgError, ValueError) as exc:
            raise NoConvergence(f"Lyapunov solve failed: {exc}") from exc
        if not is_positive_definite(P):
            raise NoConvergence("Lyapunov solution is not positive definite; A is not Hurwitz")
        return P

    P: Optional[np.ndarray] = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            P = symmetrize(linalg.solve_continuous_are(A, B, Qc, np.eye(B.shape[1]) / gamma))
        if not np.all(np.isfinite(P)):
            P = None
    except (linalg.LinAlgError, ValueError) as exc:
        logger.debug(f"Direct CARE solve failed: {exc}")

    if P is not None:
        P, residual = _newton_refine(P, A, B, gamma, Qc)
        if residual <= RESIDUAL_TOLERANCE * np.linalg.norm(P) and is_positive_definite(P):
            return P

    if not allow_flow:
        raise NoConvergence("Direct CARE solve did not produce an accurate stabilizing solution")

    logger.warning(f"Falling back to differential Riccati flow for n={n}")
    P = _riccati_flow(A, B, gamma, Qc)
    P, residual = _newton_refine(P, A, B, gamma, Qc)
    if residual > RESIDUAL_TOLERANCE * np.linalg.norm(P) or not is_positive_definite(P):
        raise NoConvergence(f"Riccati residual {residual:.3e} stalled above tolerance")
    return P


def solve_control_riccati(
    A: np.ndarray,
    B: np.ndarray,
    gamma: float,
    kappa_eff: float,
    epsilon: Optional[float] = None,
) -> np.ndarray:
    """
    Controller Riccati matrix P.

    Solves (A + (kappa_eff/2) I)^T P + P (A + (kappa_eff/2) I)
    - gamma P B B^T P + epsilon I = 0, which makes
    Pi_bar((A^T P + P A) - gamma Gamma) + kappa P <= -Pi_bar epsilon I.

    Args:
        A: State matrix
        B: Input matrix
        gamma: (c / s) lambda_2(L_hat), must be positive unless B = 0
        kappa_eff: kappa / Pi_bar, non-negative
        epsilon: Riccati offset; defaults to 1e-4 ||A||_2

    Returns:
        Symmetric positive definite P

    Raises:
        ValueError: On negative kappa_eff, non-positive gamma or epsilon
        NoConvergence: If the pair is not stabilizable in practice

    Examples:
        >>> float(solve_control_riccati([[0.0]], [[1.0]], 1.0, 0.0, epsilon=1.0)[0, 0])
        1.0
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if kappa_eff < 0:
        raise ValueError(f"kappa_eff must be non-negative, got {kappa_eff}")
    eps = default_riccati_offset(A) if epsilon is None else float(epsilon)
    if eps <= 0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    if np.any(B) and gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")

    shifted = A + 0.5 * kappa_eff * np.eye(A.shape[0])
    return solve_riccati(shifted, B, gamma, eps * np.eye(A.shape[0]))


def riccati_residual(
    P: np.ndarray, A: np.ndarray, B: np.ndarray, gamma: float, kappa_eff: float, epsilon: float
) -> float:
    """Frobenius norm of the controller Riccati residual at P."""
    shifted = A + 0.5 * kappa_eff * np.eye(A.shape[0])
    return float(np.linalg.norm(_residual(P, shifted, B @ B.T, gamma, epsilon * np.eye(A.shape[0]))))


def is_hurwitz(M: np.ndarray) -> bool:
    """
    All eigenvalues of M in the open left half plane.

    Checked through M^T Y + Y M = -I having a positive definite solution, so
    no nonsymmetric eigensolver is needed.
    """
    try:
        Y = linalg.solve_continuous_lyapunov(M.T, -np.eye(M.shape[0]))
    except (linalg.LinAlgError, ValueError):
        return False
    return bool(np.all(np.isfinite(Y))) and is_positive_definite(Y)


def stability_margin(M: np.ndarray, iterations: int = 40) -> float:
    """Largest alpha >= 0 with M + alpha I Hurwitz, found by bisection."""
    if not is_hurwitz(M):
        return 0.0
    identity = np.eye(M.shape[0])
    low, high = 0.0, float(np.linalg.norm(M, 2))
    for _ in range(iterations):
        mid = 0.5 * (low + high)
        if is_hurwitz(M + mid * identity):
            low = mid
        else:
            high = mid
    return low


def closed_loop_is_stable(A: np.ndarray, B: np.ndarray, gamma: float, kappa_eff: float, P: np.ndarray) -> bool:
    """A - gamma B B^T P + (kappa_eff/2) I is Hurwitz."""
    shifted = A + 0.5 * kappa_eff * np.eye(A.shape[0])
    return is_hurwitz(shifted - gamma * B @ B.T @ P)


# ---------------------------------------------------------------------------
# Observer search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObserverProblem:
    """Scalars entering the observer inequality."""
    kappa: float
    coupling_weight: float
    lambda_fft: float


@dataclass(frozen=True)
class ObserverGrid:
    """Dual-Riccati weights w, v in 10^k and the S^-1 scale family."""
    exponent_min: int = -3
    exponent_max: int = 3
    points_per_decade: int = 2
    scales: Tuple[float, ...] = tuple(10.0 ** k for k in range(-3, 4))
    shift_fractions: Tuple[float, ...] = (0.5, 0.75, 0.9)

    def values(self) -> np.ndarray:
        count = (self.exponent_max - self.exponent_min) * self.points_per_decade + 1
        return 10.0 ** np.linspace(self.exponent_min, self.exponent_max, count)

    def points(self) -> List[Tuple[float, float]]:
        values = self.values()
        return [(float(w), float(v)) for w in values for v in values]


@dataclass(frozen=True)
class ObserverGains:
    """Selected observer certificate."""
    Q: np.ndarray
    X: np.ndarray
    G: np.ndarray
    margin: float
    decay_rate: float
    w: float
    v: float
    method: str
    feasible_candidates: int = 0


def observer_block(
    A: np.ndarray,
    C: np.ndarray,
    Q: np.ndarray,
    X: np.ndarray,
    Gamma: np.ndarray,
    problem: ObserverProblem,
) -> np.ndarray:
    """Schur block [[Psi, sqrt(lambda_F) X], [sqrt(lambda_F) X^T, -I_p]]."""
    XC = X @ C
    psi = A.T @ Q + Q @ A - XC - XC.T + problem.coupling_weight * Gamma + problem.kappa * Q
    coupling = math.sqrt(problem.lambda_fft) * X
    p = C.shape[0]
    return np.block([[psi, coupling], [coupling.T, -np.eye(p)]])


def _observer_fixed_point(
    A_g: np.ndarray, G: np.ndarray, base: np.ndarray, problem: ObserverProblem, max_iterations: int = 500
) -> Optional[np.ndarray]:
    """
    Minimal Q with (A_g + kappa/2 I)^T Q + Q (A_g + kappa/2 I) + base
    + lambda_F Q G G^T Q = 0, by monotone Lyapunov iteration from Q_0
    solving the same equation without the quadratic term.
    """
    n = A_g.shape[0]
    shifted = A_g + 0.5 * problem.kappa * np.eye(n)
    if not is_hurwitz(shifted):
        return None
    GGt = G @ G.T
    try:
        Q = symmetrize(linalg.solve_continuous_lyapunov(shifted.T, -base))
        for _ in range(max_iterations):
            forcing = base + problem.lambda_fft * Q @ GGt @ Q
            Q_next = symmetrize(linalg.solve_continuous_lyapunov(shifted.T, -forcing))
            norm = float(np.linalg.norm(Q_next))
            if not np.isfinite(norm) or norm > DIVERGENCE_LIMIT:
                return None
            converged = np.linalg.norm(Q_next - Q) <= FLOW_TOLERANCE * norm
            Q = Q_next
            if converged:
                break
        else:
            return None
    except (linalg.LinAlgError, ValueError):
        return None
    return Q if is_positive_definite(Q) else None


@dataclass
class _Candidate:
    Q: np.ndarray
    X: np.ndarray
    G: np.ndarray
    block: np.ndarray
    feasible: bool
    decay_rate: float
    w: float
    v: float
    method: str
    margin: Optional[float] = None

    def resolve_margin(self) -> float:
        if self.margin is None:
            self.margin = definiteness_margin(self.block)
        return self.margin


def _evaluate_point(
    A: np.ndarray,
    C: np.ndarray,
    Gamma: np.ndarray,
    problem: ObserverProblem,
    w: float,
    v: float,
    scales: Sequence[float],
) -> List[_Candidate]:
    n = A.shape[0]
    try:
        S = solve_riccati(A.T, C.T, w, v * np.eye(n), allow_flow=False)
    except SecureConsensusError:
        return []
    G = w * S @ C.T
    A_g = A - G @ C
    decay = stability_margin(A_g)

    options: List[Tuple[np.ndarray, str]] = []
    try:
        S_inv = symmetrize(solve_linear(S, np.eye(n)))
        options.extend((scale * S_inv, f"scaled-dual x{scale:g}") for scale in scales)
    except Singular:
        pass

    base = problem.coupling_weight * Gamma
    delta = 1e-3 * (1.0 + float(np.linalg.norm(base, 2)))
    Q_fp = _observer_fixed_point(A_g, G, base + delta * np.eye(n), problem)
    if Q_fp is not None:
        options.append((Q_fp, "lyapunov-fixed-point"))

    candidates = []
    for Q, method in options:
        X = Q @ G
        block = observer_block(A, C, Q, X, Gamma, problem)
        feasible = is_positive_definite(-block)
        candidates.append(_Candidate(Q, X, G, block, feasible, decay, w, v, method))
    return candidates


def injection_weights(problem: ObserverProblem) -> Tuple[float, ...]:
    """
    Weights t in X = t C^T. Under attack t = 1/lambda_F minimizes
    lambda_F t^2 - 2t; without attack X is unconstrained and any t helps.
    """
    if problem.lambda_fft > 0:
        return (1.0 / problem.lambda_fft,)
    return UNATTACKED_WEIGHTS


def shifted_certificate(
    A: np.ndarray,
    C: np.ndarray,
    Gamma: np.ndarray,
    problem: ObserverProblem,
    shift: float,
    weight: float,
) -> Optional[np.ndarray]:
    """
    Q solving (A + shift/2 I)^T Q + Q (A + shift/2 I) = -(W Gamma + (lambda_F t^2 - 2t) C^T C).

    With X = t C^T the left side of the observer inequality becomes
    -(shift - kappa) Q, so any positive definite Q certifies it for
    shift > kappa. Returns None when Q is not positive definite.
    """
    n = A.shape[0]
    forcing = problem.coupling_weight * Gamma + (problem.lambda_fft * weight ** 2 - 2.0 * weight) * (C.T @ C)
    shifted = A + 0.5 * shift * np.eye(n)
    try:
        Q = symmetrize(linalg.solve_continuous_lyapunov(shifted.T, -forcing))
    except (linalg.LinAlgError, ValueError):
        return None
    if not np.all(np.isfinite(Q)) or not is_positive_definite(Q):
        return None
    return Q


def shift_interval(
    A: np.ndarray,
    C: np.ndarray,
    Gamma: np.ndarray,
    problem: ObserverProblem,
    weight: float,
    bisections: int = 40,
) -> Optional[Tuple[float, float]]:
    """
    First interval of shifts above kappa with a positive definite certificate.

    Shifts kappa + unit * 10^(k/4), k = -8..8, are scanned; the upper edge of
    the first positive run is refined by bisection.
    """
    unit = problem.kappa if problem.kappa > 0 else 1e-3
    shifts = problem.kappa + unit * 10.0 ** (np.arange(-8, 9) / 4.0)
    positive = [shifted_certificate(A, C, Gamma, problem, float(s), weight) is not None for s in shifts]
    if not any(positive):
        return None
    first = positive.index(True)
    last = first
    while last + 1 < len(shifts) and positive[last + 1]:
        last += 1
    if last + 1 == len(shifts):
        return float(shifts[first]), float(shifts[last])
    low, high = float(shifts[last]), float(shifts[last + 1])
    for _ in range(bisections):
        middle = 0.5 * (low + high)
        if shifted_certificate(A, C, Gamma, problem, middle, weight) is not None:
            low = middle
        else:
            high = middle
    return float(shifts[first]), low


def _shifted_candidates(
    A: np.ndarray,
    C: np.ndarray,
    Gamma: np.ndarray,
    problem: ObserverProblem,
    fractions: Sequence[float],
) -> List[_Candidate]:
    candidates = []
    for weight in injection_weights(problem):
        interval = shift_interval(A, C, Gamma, problem, weight)
        if interval is None:
            continue
        start, end = interval
        X = weight * C.T
        for fraction in fractions:
            shift = start + fraction * (end - start)
            Q = shifted_certificate(A, C, Gamma, problem, shift, weight)
            if Q is None:
                continue
            try:
                G = solve_linear(Q, X)
            except Singular:
                continue
            block = observer_block(A, C, Q, X, Gamma, problem)
            feasible = is_positive_definite(-block)
            decay = stability_margin(A - G @ C)
            candidates.append(_Candidate(Q, X, G, block, feasible, decay, shift, weight, "shifted-lyapunov"))
    return candidates


def synthesize_observer(
    A: np.ndarray,
    C: np.ndarray,
    Gamma: np.ndarray,
    problem: ObserverProblem,
    grid: Optional[ObserverGrid] = None,
    n_jobs: Optional[int] = None,
) -> ObserverGains:
    """
    Search observer gains satisfying the Schur-block inequality.

    For each (w, v) the dual Riccati equation
    A S + S A^T - w S C^T C S + v I = 0 gives G = w S C^T. Each G is paired
    with Q = scale * S^-1 for every scale, and with the minimal solution of
    the observer Riccati inequality. A second family fixes X = t C^T with the
    weights of injection_weights (t = 1/lambda_F minimizes the X-dependent
    part of Psi + lambda_F X X^T), and takes Q from a Lyapunov equation with
    a decay shift above kappa; for those candidates w holds the shift and v
    the weight. Feasible candidates are ranked by the certified decay rate of
    A - G C, ties by the most negative margin.

    Args:
        A: State matrix
        C: Output matrix
        Gamma: P B B^T P
        problem: kappa, W and lambda_M(F F^T)
        grid: Search grid
        n_jobs: Worker threads; defaults to Settings.worker_count()

    Returns:
        ObserverGains

    Raises:
        Infeasible: If no grid candidate certifies the inequality
    """
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    grid = grid or ObserverGrid()
    points = grid.points()
    jobs = n_jobs or settings.worker_count()

    results = Parallel(n_jobs=jobs, prefer="threads")(
        delayed(_evaluate_point)(A, C, Gamma, problem, w, v, grid.scales) for w, v in points
    )
    candidates = [candidate for batch in results for candidate in batch]
    candidates.extend(_shifted_candidates(A, C, Gamma, problem, grid.shift_fractions))
    feasible = [candidate for candidate in candidates if candidate.feasible]
    logger.debug(
        f"Observer search: {len(points)} grid points, {len(candidates)} candidates, "
        f"{len(feasible)} feasible"
    )

    if not feasible:
        best = min((candidate.resolve_margin() for candidate in candidates), default=math.inf)
        logger.error(f"Observer synthesis infeasible over {len(points)} grid points")
        raise Infeasible("No observer gain on the search grid satisfies the Schur block inequality", best)

    fastest = max(candidate.decay_rate for candidate in feasible)
    leaders = [c for c in feasible if c.decay_rate >= fastest * (1.0 - 1e-9)]
    chosen = min(leaders, key=lambda c: c.resolve_margin())
    logger.info(
        f"Observer gain selected at w={chosen.w:.3g}, v={chosen.v:.3g} ({chosen.method}), "
        f"decay {chosen.decay_rate:.4f} 1/s, margin {chosen.margin:.3e}"
    )
    return ObserverGains(
        Q=chosen.Q,
        X=chosen.X,
        G=chosen.G,
        margin=chosen.margin,
        decay_rate=chosen.decay_rate,
        w=chosen.w,
        v=chosen.v,
        method=chosen.method,
        feasible_candidates=len(feasible),
    )


# ---------------------------------------------------------------------------
# Gain set and verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GainSet:
    """Synthesized matrices plus the protocol scalars they were built for."""
    P: np.ndarray
    Q: np.ndarray
    X: np.ndarray
    K: np.ndarray
    G: np.ndarray
    Gamma: np.ndarray
    params: ProtocolParameters
    constants: ProtocolConstants
    epsilon: Optional[float] = None
    observer: Dict[str, object] = field(default_factory=dict)

    @property
    def chi(self) -> Optional[float]:
        return self.constants.chi

    @property
    def bound(self) -> Optional[float]:
        return self.constants.bound

    def with_matrices(self, **matrices: np.ndarray) -> "GainSet":
        """Copy with some matrices replaced (used by audits)."""
        values = {name: getattr(self, name) for name in ("P", "Q", "X", "K", "G", "Gamma")}
        values.update(matrices)
        return GainSet(
            params=self.params,
            constants=self.constants,
            epsilon=self.epsilon,
            observer=dict(self.observer),
            **values,
        )


def synthesize_gains(
    plant: PlantModel,
    process: TopologyProcess,
    attack: AttackConfig,
    params: ProtocolParameters,
    epsilon: Optional[float] = None,
    grid: Optional[ObserverGrid] = None,
) -> GainSet:
    """
    Full synthesis: constants, P and K, observer search, chi and bound.

    Raises:
        NoConvergence: If the controller Riccati equation cannot be solved
        Infeasible: If the observer search fails
    """
    pre = compute_protocol_constants(params, process, attack)
    gamma = pre.control_gamma(params.c)
    kappa_eff = pre.kappa_eff(params.kappa)
    eps = default_riccati_offset(plant.A) if epsilon is None else epsilon
    logger.info(f"Solving controller Riccati equation (gamma={gamma:.4f}, kappa_eff={kappa_eff:.4g})")

    P = solve_control_riccati(plant.A, plant.B, gamma, kappa_eff, epsilon=eps)
    K = plant.B.T @ P
    Gamma = symmetrize(P @ plant.B @ plant.B.T @ P)

    problem = ObserverProblem(
        kappa=params.kappa,
        coupling_weight=pre.coupling_weight(params),
        lambda_fft=pre.lambdaM_FFT,
    )
    observer = synthesize_observer(plant.A, plant.C, Gamma, problem, grid)
    constants = compute_protocol_constants(params, process, attack, P=P, Q=observer.Q)

    return GainSet(
        P=P,
        Q=observer.Q,
        X=observer.X,
        K=K,
        G=observer.G,
        Gamma=Gamma,
        params=params,
        constants=constants,
        epsilon=eps,
        observer={
            "w": observer.w,
            "v": observer.v,
            "method": observer.method,
            "decay_rate": observer.decay_rate,
            "margin": observer.margin,
        },
    )


@dataclass
class VerificationReport:
    """Signed margins and checks; None marks a check skipped after an abort."""
    p_positive_definite: bool
    q_positive_definite: Optional[bool] = None
    cond_P: Optional[float] = None
    cond_observer: Optional[float] = None
    cond_chi_P: Optional[float] = None
    cond_chi_Q: Optional[float] = None
    norms: Dict[str, float] = field(default_factory=dict)
    chi: Optional[float] = None
    riccati_residual: Optional[float] = None
    closed_loop_stable: Optional[bool] = None
    gains_consistent: Optional[bool] = None
    scalar_checks: Optional[ScalarChecks] = None
    constants: Optional[ProtocolConstants] = None
    aborted: bool = False

    MATRIX_CONDITIONS = ("cond_P", "cond_observer", "cond_chi_P", "cond_chi_Q")

    def margins(self) -> Dict[str, Optional[float]]:
        return {name: getattr(self, name) for name in self.MATRIX_CONDITIONS}

    @property
    def matrix_conditions_hold(self) -> bool:
        values = self.margins().values()
        return all(value is not None and value < 0 for value in values)

    @property
    def feasible(self) -> bool:
        return (
            not self.aborted
            and bool(self.q_positive_definite)
            and self.matrix_conditions_hold
            and self.scalar_checks is not None
            and self.scalar_checks.all_passed
        )

    def strictly_certified(self, relative: float = 1e-8) -> bool:
        """Every matrix margin below -relative * norm of its matrix."""
        if not self.matrix_conditions_hold:
            return False
        return all(
            getattr(self, name) < -relative * self.norms.get(name, 0.0)
            for name in self.MATRIX_CONDITIONS
        )

    def lines(self) -> List[str]:
        rows = [f"P positive definite: {'PASS' if self.p_positive_definite else 'FAIL'}"]
        if self.aborted:
            rows.append("remaining checks skipped")
            rows.append("VERDICT: FAIL")
            return rows
        rows.append(f"Q positive definite: {'PASS' if self.q_positive_definite else 'FAIL'}")
        for name in self.MATRIX_CONDITIONS:
            margin = getattr(self, name)
            status = "PASS" if margin is not None and margin < 0 else "FAIL"
            rows.append(f"{name:<14} margin {margin: .6e}  {status}")
        if self.riccati_residual is not None:
            rows.append(f"Riccati residual: {self.riccati_residual:.3e}")
        if self.closed_loop_stable is not None:
            rows.append(f"closed loop Hurwitz: {'PASS' if self.closed_loop_stable else 'FAIL'}")
        if self.gains_consistent is not None:
            rows.append(f"K = B^T P, G = Q^-1 X: {'PASS' if self.gains_consistent else 'FAIL'}")
        if self.scalar_checks is not None:
            for name, passed, detail in self.scalar_checks.items():
                suffix = f"  ({detail})" if detail else ""
                rows.append(f"{name}: {'TRUE' if passed else 'FALSE'}{suffix}")
        if self.chi is not None:
            rows.append(f"chi = {self.chi:.6e}")
        if self.constants is not None and self.constants.bound is not None:
            rows.append(f"bound sqrt(tau/(chi kappa)) = {self.constants.bound:.6g}")
        rows.append(f"VERDICT: {'PASS' if self.feasible else 'FAIL'}")
        return rows

    def to_dict(self) -> Dict[str, object]:
        checks = None
        if self.scalar_checks is not None:
            checks = {name: passed for name, passed, _ in self.scalar_checks.items()}
            checks["dbar_threshold"] = float(np.max(self.scalar_checks.dbar_threshold))
            checks["rho"] = self.scalar_checks.rho
        return {
            "feasible": self.feasible,
            "aborted": self.aborted,
            "p_positive_definite": self.p_positive_definite,
            "q_positive_definite": self.q_positive_definite,
            "margins": self.margins(),
            "norms": dict(self.norms),
            "chi": self.chi,
            "riccati_residual": self.riccati_residual,
            "closed_loop_stable": self.closed_loop_stable,
            "gains_consistent": self.gains_consistent,
            "scalar_checks": checks,
            "bound": None if self.constants is None else self.constants.bound,
        }


def verify_theorem_conditions(
    gains: GainSet,
    plant: PlantModel,
    process: TopologyProcess,
    attack: AttackConfig,
) -> VerificationReport:
    """
    Assemble every inequality as written and report signed margins.

    Conditions:
        cond_P:        Pi_bar((A^T P + P A) - gamma Gamma) + kappa P
        cond_observer: Schur block of the observer inequality
        cond_chi_P:    chi I - lambda_2 P
        cond_chi_Q:    chi I - Q

    A P that is not positive definite aborts the remaining checks.
    """
    A, B, C = plant.A, plant.B, plant.C
    n = plant.n
    params = gains.params
    P = as_matrix(gains.P, "P")
    report = VerificationReport(p_positive_definite=is_positive_definite(P))
    report.norms["P"] = float(np.linalg.norm(P, 2))
    if not report.p_positive_definite:
        logger.warning("P is not positive definite; skipping remaining checks")
        report.aborted = True
        return report

    Q = as_matrix(gains.Q, "Q")
    X = as_matrix(gains.X, "X")
    constants = compute_protocol_constants(params, process, attack, P=P, Q=Q)
    if gains.constants.chi is not None:
        chi = gains.constants.chi
    else:
        chi = constants.chi
    report.constants = constants
    report.scalar_checks = constants.checks
    report.q_positive_definite = is_positive_definite(Q)

    gamma = constants.control_gamma(params.c)
    Gamma = symmetrize(P @ B @ B.T @ P)
    first = constants.PiBar * (A.T @ P + P @ A - gamma * Gamma) + params.kappa * P
    report.cond_P = definiteness_margin(first)
    report.norms["cond_P"] = float(np.linalg.norm(first, 2))

    problem = ObserverProblem(
        kappa=params.kappa,
        coupling_weight=constants.coupling_weight(params),
        lambda_fft=constants.lambdaM_FFT,
    )
    block = observer_block(A, C, Q, X, Gamma, problem)
    report.cond_observer = definiteness_margin(block)
    report.norms["cond_observer"] = float(np.linalg.norm(block, 2))

    if chi is None:
        chi = derive_chi(P, Q, constants.lambda2) if report.q_positive_definite else 0.0
    report.chi = chi
    chi_P = chi * np.eye(n) - constants.lambda2 * P
    chi_Q = chi * np.eye(n) - Q
    report.cond_chi_P = definiteness_margin(chi_P)
    report.cond_chi_Q = definiteness_margin(chi_Q)
    report.norms["cond_chi_P"] = float(np.linalg.norm(chi_P, 2))
    report.norms["cond_chi_Q"] = float(np.linalg.norm(chi_Q, 2))

    kappa_eff = constants.kappa_eff(params.kappa)
    if gains.epsilon is not None:
        report.riccati_residual = riccati_residual(P, A, B, gamma, kappa_eff, gains.epsilon)
    report.closed_loop_stable = closed_loop_is_stable(A, B, gamma, kappa_eff, P)

    consistent = np.allclose(gains.K, B.T @ P, rtol=1e-12, atol=1e-14)
    consistent &= np.allclose(gains.Gamma, Gamma, rtol=1e-9, atol=1e-14)
    if report.q_positive_definite:
        try:
            consistent &= np.allclose(solve_linear(Q, X), gains.G, rtol=1e-6, atol=1e-9)
        except Singular:
            consistent = False
    report.gains_consistent = bool(consistent)

    verdict = "PASS" if report.feasible else "FAIL"
    logger.info(f"Verification {verdict}: margins {report.margins()}")
    return report
