#!/usr/bin/env python3
"""
Secure Consensus - Exception Hierarchy

Every failure the toolkit can report is a subclass of SecureConsensusError so
command handlers can map them onto exit codes in one place.

Author: ThinkCraft
"""

from typing import List, Optional, Sequence


class SecureConsensusError(Exception):
    """Root of all toolkit errors."""


class NotSymmetric(SecureConsensusError):
    """Matrix handed to the symmetric eigensolver is not symmetric."""

    def __init__(self, asymmetry: float):
        self.asymmetry = asymmetry
        super().__init__(f"Matrix is not symmetric (relative asymmetry {asymmetry:.3e})")


class NoConvergence(SecureConsensusError):
    """An iterative routine hit its cap before meeting its tolerance."""

    def __init__(self, message: str, iterations: Optional[int] = None):
        self.iterations = iterations
        super().__init__(message)


class Singular(SecureConsensusError):
    """Linear solve met a pivot below the singularity floor."""

    def __init__(self, pivot: float, floor: float):
        self.pivot = pivot
        self.floor = floor
        super().__init__(f"Matrix is singular: pivot {pivot:.3e} below floor {floor:.3e}")


class DimensionMismatch(SecureConsensusError, ValueError):
    """Operand shapes are inconsistent."""


class UnionDisconnected(SecureConsensusError):
    """The union of the candidate graphs is not connected."""

    def __init__(self, components: Sequence[Sequence[int]]):
        self.components: List[List[int]] = [list(c) for c in components]
        super().__init__(
            f"Union graph is disconnected into {len(self.components)} components: "
            f"{self.components}"
        )


class Reducible(SecureConsensusError):
    """Markov generator has more than one closed class."""


class AbsorbingState(SecureConsensusError):
    """Markov generator has a state with zero exit rate."""

    def __init__(self, state: int):
        self.state = state
        super().__init__(f"State {state} is absorbing (zero exit rate)")


class Infeasible(SecureConsensusError):
    """Gain synthesis found no candidate with a negative margin."""

    def __init__(self, message: str, best_margin: float):
        self.best_margin = best_margin
        super().__init__(f"{message} (best margin {best_margin:.6e})")


class InvariantViolation(SecureConsensusError):
    """A runtime invariant broke during integration."""

    def __init__(self, step: int, reason: str):
        self.step = step
        self.reason = reason
        super().__init__(f"Invariant violated at step {step}: {reason}")


class ConfigError(SecureConsensusError, ValueError):
    """Scenario or gains document could not be parsed or validated."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
