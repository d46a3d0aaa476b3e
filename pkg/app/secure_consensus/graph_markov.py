#!/usr/bin/env python3
"""
Graph Markov - Switching Communication Topologies

Description: Candidate undirected communication graphs, their Laplacians and
union, connectivity checks by breadth-first search, and the continuous-time
Markov chain sigma(t) that selects the active graph.

Time Complexity: O(N^2) per graph for Laplacians and BFS, O(s^3) for the
stationary law, O(number of switches) to sample a path
Space Complexity: O(s * N^2)

Dependencies: numpy
Author: ThinkCraft
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from .core.errors import AbsorbingState, DimensionMismatch, Reducible, Singular, UnionDisconnected
from .matrix_core import as_matrix, solve_linear, sym_eig

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]
SeedLike = Union[int, np.random.Generator, None]


@dataclass(frozen=True)
class Graph:
    """
    Undirected, unweighted graph on node_count nodes.

    Attributes:
        node_count: Number of agents N
        adjacency: Symmetric 0/1 integer matrix with zero diagonal
    """
    node_count: int
    adjacency: np.ndarray

    def __post_init__(self) -> None:
        adjacency = np.asarray(self.adjacency)
        if adjacency.shape != (self.node_count, self.node_count):
            raise DimensionMismatch(
                f"adjacency shape {adjacency.shape} does not match node_count {self.node_count}"
            )
        if not np.all((adjacency == 0) | (adjacency == 1)):
            raise ValueError("adjacency must be binary")
        if np.any(np.diag(adjacency) != 0):
            raise ValueError("adjacency must have a zero diagonal")
        if not np.array_equal(adjacency, adjacency.T):
            raise ValueError("adjacency must be symmetric")
        object.__setattr__(self, "adjacency", adjacency.astype(np.int64))

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[Edge], one_based: bool = True) -> "Graph":
        """
        Build a graph from an undirected edge list.

        Examples:
            >>> int(Graph.from_edges(3, [(1, 2), (2, 3)]).adjacency.sum())
            4
        """
        offset = 1 if one_based else 0
        adjacency = np.zeros((node_count, node_count), dtype=np.int64)
        for a, b in edges:
            i, j = int(a) - offset, int(b) - offset
            if not (0 <= i < node_count and 0 <= j < node_count):
                raise ValueError(f"edge ({a}, {b}) references a node outside 1..{node_count}")
            if i == j:
                raise ValueError(f"self-loop ({a}, {b}) is not allowed")
            adjacency[i, j] = adjacency[j, i] = 1
        return cls(node_count=node_count, adjacency=adjacency)

    @classmethod
    def complete(cls, node_count: int) -> "Graph":
        adjacency = np.ones((node_count, node_count), dtype=np.int64) - np.eye(node_count, dtype=np.int64)
        return cls(node_count=node_count, adjacency=adjacency)

    def edges(self) -> List[Edge]:
        """Edge list as 1-based (i, j) pairs with i < j."""
        rows, cols = np.nonzero(np.triu(self.adjacency))
        return [(int(i) + 1, int(j) + 1) for i, j in zip(rows, cols)]


def laplacian(g: Graph) -> np.ndarray:
    """
    Graph Laplacian L = D - A.

    Built in integer arithmetic so every row sums to exactly zero.

    Examples:
        >>> laplacian(Graph.from_edges(2, [(1, 2)]))
        array([[ 1., -1.],
               [-1.,  1.]])
    """
    degrees = g.adjacency.sum(axis=1)
    return (np.diag(degrees) - g.adjacency).astype(float)


def connected_components(adjacency: np.ndarray) -> List[List[int]]:
    """
    Connected components by breadth-first search.

    Returns:
        Components as sorted lists of 1-based node labels, ordered by their
        smallest member
    """
    node_count = adjacency.shape[0]
    visited = np.zeros(node_count, dtype=bool)
    components: List[List[int]] = []

    for start in range(node_count):
        if visited[start]:
            continue
        visited[start] = True
        queue = deque([start])
        component = []
        while queue:
            vertex = queue.popleft()
            component.append(vertex + 1)
            for neighbor in np.nonzero(adjacency[vertex])[0]:
                if not visited[neighbor]:
                    visited[neighbor] = True
                    queue.append(int(neighbor))
        components.append(sorted(component))

    return components


@dataclass(frozen=True)
class TopologySet:
    """Candidate graphs with their Laplacians, union and summed Laplacian."""
    graphs: Tuple[Graph, ...]
    union: Graph
    laplacians: np.ndarray
    union_laplacian: np.ndarray

    @property
    def count(self) -> int:
        return len(self.graphs)

    @property
    def node_count(self) -> int:
        return self.union.node_count

    @property
    def adjacency_stack(self) -> np.ndarray:
        return np.stack([g.adjacency.astype(float) for g in self.graphs])


def union_and_check(graphs: Sequence[Graph]) -> TopologySet:
    """
    Combine candidate graphs and verify the union is connected.

    The union adjacency is the elementwise OR of the candidates. The summed
    Laplacian L_hat = sum_p L(p) is kept separately because the protocol
    constants use it, not the union's Laplacian.

    Args:
        graphs: Candidate graphs sharing the same node count

    Returns:
        TopologySet

    Raises:
        ValueError: If the list is empty
        DimensionMismatch: If node counts differ
        UnionDisconnected: If the union has more than one component
    """
    if not graphs:
        raise ValueError("At least one candidate graph is required")
    node_count = graphs[0].node_count
    for g in graphs:
        if g.node_count != node_count:
            raise DimensionMismatch(
                f"All graphs must share N={node_count}, got one with N={g.node_count}"
            )

    union_adjacency = np.zeros((node_count, node_count), dtype=np.int64)
    for g in graphs:
        union_adjacency |= g.adjacency
    union = Graph(node_count=node_count, adjacency=union_adjacency)

    components = connected_components(union_adjacency)
    if len(components) > 1:
        logger.error(f"Union of {len(graphs)} graphs splits into {components}")
        raise UnionDisconnected(components)

    laplacians = np.stack([laplacian(g) for g in graphs])
    logger.debug(f"Union of {len(graphs)} graphs on {node_count} nodes is connected")
    return TopologySet(
        graphs=tuple(graphs),
        union=union,
        laplacians=laplacians,
        union_laplacian=laplacians.sum(axis=0),
    )


def _check_laplacian(l: np.ndarray) -> np.ndarray:
    matrix = as_matrix(l, "laplacian")
    scale = max(1.0, float(np.abs(matrix).max(initial=0.0)))
    if matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"Laplacian must be square, got {matrix.shape}")
    if np.abs(matrix.sum(axis=1)).max(initial=0.0) > 1e-9 * scale:
        raise ValueError("Laplacian rows must sum to zero")
    return matrix


def algebraic_connectivity(l: np.ndarray) -> float:
    """
    Second-smallest Laplacian eigenvalue (zero for a single node).

    Examples:
        >>> round(algebraic_connectivity(laplacian(Graph.from_edges(2, [(1, 2)]))), 12)
        2.0
    """
    matrix = _check_laplacian(l)
    if matrix.shape[0] < 2:
        return 0.0
    return float(sym_eig(matrix).eigenvalues[1])


def largest_laplacian_eigenvalue(l: np.ndarray) -> float:
    """Largest Laplacian eigenvalue lambda_M."""
    return sym_eig(_check_laplacian(l)).lambda_max


def _check_generator(generator: np.ndarray) -> np.ndarray:
    matrix = as_matrix(generator, "generator")
    s, cols = matrix.shape
    if s != cols:
        raise DimensionMismatch(f"Generator must be square, got {matrix.shape}")
    off_diagonal = matrix - np.diag(np.diag(matrix))
    if np.any(off_diagonal < 0):
        raise ValueError("Generator off-diagonal rates must be non-negative")
    scale = max(1.0, float(np.abs(matrix).max(initial=0.0)))
    if np.abs(matrix.sum(axis=1)).max(initial=0.0) > 1e-12 * scale:
        raise ValueError("Generator rows must sum to zero")
    return matrix


def stationary_distribution(generator: np.ndarray) -> np.ndarray:
    """
    Invariant law Pi of a continuous-time Markov generator.

    Solves Pi^T Upsilon = 0 with one balance equation replaced by the
    normalization sum(Pi) = 1.

    Raises:
        Reducible: If the system is singular or some state has zero mass

    Examples:
        >>> stationary_distribution(np.array([[-1.0, 1.0], [2.0, -2.0]]))
        array([0.66666667, 0.33333333])
    """
    matrix = _check_generator(generator)
    s = matrix.shape[0]
    if s == 1:
        return np.ones(1)

    system = matrix.T.copy()
    system[-1, :] = 1.0
    rhs = np.zeros(s)
    rhs[-1] = 1.0
    try:
        pi = solve_linear(system, rhs)
    except Singular as exc:
        raise Reducible(f"Generator is reducible: {exc}") from exc

    if np.any(pi <= 1e-12):
        raise Reducible(f"Generator has states with zero stationary mass: {pi}")
    return pi / pi.sum()


@dataclass(frozen=True)
class MarkovChain:
    """Generator Upsilon and its stationary row Pi."""
    generator: np.ndarray
    stationary: np.ndarray

    @classmethod
    def from_generator(cls, generator: np.ndarray) -> "MarkovChain":
        matrix = _check_generator(generator)
        return cls(generator=matrix, stationary=stationary_distribution(matrix))

    @property
    def size(self) -> int:
        return self.generator.shape[0]


@dataclass(frozen=True)
class SwitchingPath:
    """
    Piecewise-constant, right-continuous graph index sigma(t).

    States are 0-based graph indices internally.
    """
    breakpoints: np.ndarray
    states: np.ndarray
    horizon: float
    state_count: int = 1

    def state_at(self, t: float) -> int:
        index = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return int(self.states[max(index, 0)])

    def states_at(self, times: np.ndarray) -> np.ndarray:
        index = np.searchsorted(self.breakpoints, np.asarray(times), side="right") - 1
        return self.states[np.clip(index, 0, None)]

    def durations(self) -> np.ndarray:
        ends = np.append(self.breakpoints[1:], self.horizon)
        return ends - self.breakpoints


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_switching_path(chain: MarkovChain, horizon: float, seed: SeedLike = None) -> SwitchingPath:
    """
    Sample sigma(t) on [0, horizon].

    The initial state is drawn from Pi. In state p the holding time is
    Exponential with rate -w_pp and the next state q != p is chosen with
    probability w_pq / (-w_pp).

    Args:
        chain: Markov chain
        horizon: End time in seconds
        seed: Integer seed or a numpy Generator

    Returns:
        SwitchingPath

    Raises:
        ValueError: If horizon is not positive
        AbsorbingState: If a state has zero exit rate and s > 1
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    rng = _rng(seed)
    s = chain.size
    if s == 1:
        return SwitchingPath(np.zeros(1), np.zeros(1, dtype=np.int64), float(horizon), 1)

    rates = -np.diag(chain.generator)
    for p, rate in enumerate(rates):
        if rate <= 0.0:
            raise AbsorbingState(p + 1)

    state = int(rng.choice(s, p=chain.stationary))
    breakpoints = [0.0]
    states = [state]
    t = 0.0
    while True:
        t += rng.exponential(1.0 / rates[state])
        if t >= horizon:
            break
        jump = chain.generator[state].copy()
        jump[state] = 0.0
        state = int(rng.choice(s, p=jump / rates[state]))
        breakpoints.append(t)
        states.append(state)

    return SwitchingPath(
        breakpoints=np.array(breakpoints),
        states=np.array(states, dtype=np.int64),
        horizon=float(horizon),
        state_count=s,
    )


def occupancy_fractions(path: SwitchingPath, state_count: Optional[int] = None) -> np.ndarray:
    """
    Fraction of the horizon spent in each state.

    Examples:
        >>> path = SwitchingPath(np.array([0.0, 5.0]), np.array([0, 1]), 10.0, 2)
        >>> occupancy_fractions(path)
        array([0.5, 0.5])
    """
    count = state_count or path.state_count
    totals = np.bincount(path.states, weights=path.durations(), minlength=count)
    return totals / path.horizon


@dataclass(frozen=True)
class TopologyProcess:
    """Candidate graphs plus the Markov chain that switches among them."""
    topology: TopologySet
    chain: MarkovChain
    lambda2: float = field(init=False)
    lambdaM: float = field(init=False)

    def __post_init__(self) -> None:
        if self.chain.size != self.topology.count:
            raise DimensionMismatch(
                f"Generator has {self.chain.size} states but {self.topology.count} graphs were given"
            )
        object.__setattr__(self, "lambda2", algebraic_connectivity(self.topology.union_laplacian))
        object.__setattr__(
            self, "lambdaM", largest_laplacian_eigenvalue(self.topology.union_laplacian)
        )

    @property
    def s(self) -> int:
        return self.topology.count

    @property
    def node_count(self) -> int:
        return self.topology.node_count

    @property
    def pi_bar(self) -> float:
        return float(self.chain.stationary.min())

    @property
    def pi_breve(self) -> float:
        return float(self.chain.stationary.max())
