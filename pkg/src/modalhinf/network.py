"""Sensor-network topology, measurement operators, and gain sparsity.

Nodes are 1-based everywhere, matching the serialized artifacts.  The graph
is directed and is never symmetrized: an edge (i, j) with weight m_ij > 0
means node i consumes the estimate of node j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import Eigensystem, project_point_device


@dataclass(frozen=True)
class SensorNetwork:
    """Directed sensor graph plus per-node measurement operators.

    c_slow[i-1] is the q_y,i x n matrix mapping slow modes to node i's
    output; c_fast[i-1] carries the contribution of the retained fast
    modes (the observation spillover).
    """

    node_count: int
    edge_weights: dict[tuple[int, int], float]
    sensor_locations: tuple[tuple[float, ...], ...]
    controller_nodes: frozenset[int]
    c_slow: tuple[np.ndarray, ...]
    c_fast: tuple[np.ndarray, ...]

    def __post_init__(self):
        p = self.node_count
        if p < 1:
            raise ValueError("node_count must be >= 1")
        if not self.controller_nodes:
            raise ValueError("controller node set must be nonempty")
        if not self.controller_nodes <= set(range(1, p + 1)):
            raise ValueError("controller nodes outside 1..p")
        for (i, j), m in self.edge_weights.items():
            if i == j:
                raise ValueError(f"self-loop ({i},{i}) not allowed")
            if not (1 <= i <= p and 1 <= j <= p):
                raise ValueError(f"edge ({i},{j}) outside 1..p")
            if m <= 0:
                raise ValueError(f"edge ({i},{j}) must have positive weight")

    @property
    def output_dims(self) -> tuple[int, ...]:
        return tuple(c.shape[0] for c in self.c_slow)

    @property
    def total_outputs(self) -> int:
        return sum(self.output_dims)

    @property
    def n_slow(self) -> int:
        return self.c_slow[0].shape[1]

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(self.edge_weights))

    def weight(self, i: int, j: int) -> float:
        return self.edge_weights.get((i, j), 0.0)

    def c_slow_blockdiag(self) -> np.ndarray:
        """C_bar: block-diagonal stack of the per-node slow output maps."""
        p, n = self.node_count, self.n_slow
        out = np.zeros((self.total_outputs, n * p))
        r = 0
        for i, c in enumerate(self.c_slow):
            out[r:r + c.shape[0], i * n:(i + 1) * n] = c
            r += c.shape[0]
        return out


def build_network(node_count: int,
                  edges: dict[tuple[int, int], float],
                  sensor_locations,
                  controller_nodes,
                  eig: Eigensystem) -> SensorNetwork:
    """Construct a network with point sensors evaluated against the eigenbasis."""
    locations = tuple(tuple(float(z) for z in locs) for locs in sensor_locations)
    if len(locations) != node_count:
        raise ValueError("one sensor-location list required per node")
    n, N = eig.n_slow, eig.n_total
    c_slow, c_fast = [], []
    for locs in locations:
        if not locs:
            raise ValueError("every node needs at least one sensor")
        rows = np.vstack([project_point_device(z, 1.0, N) for z in locs])
        c_slow.append(rows[:, :n])
        c_fast.append(rows[:, n:])
    return SensorNetwork(
        node_count=node_count,
        edge_weights={(int(i), int(j)): float(m) for (i, j), m in edges.items()},
        sensor_locations=locations,
        controller_nodes=frozenset(int(i) for i in controller_nodes),
        c_slow=tuple(c_slow),
        c_fast=tuple(c_fast),
    )


def single_node_reduction(net: SensorNetwork, node: int = 1) -> SensorNetwork:
    """Degenerate single-observer variant: keep one node, drop all edges."""
    if not 1 <= node <= net.node_count:
        raise KeyError(f"unknown node {node}")
    return SensorNetwork(
        node_count=1,
        edge_weights={},
        sensor_locations=(net.sensor_locations[node - 1],),
        controller_nodes=frozenset({1}),
        c_slow=(net.c_slow[node - 1],),
        c_fast=(net.c_fast[node - 1],),
    )


def neighbors(net: SensorNetwork, i: int) -> set[int]:
    """Out-neighbor set N_i = {j : (i, j) is an edge}."""
    if not 1 <= i <= net.node_count:
        raise KeyError(f"unknown node {i}")
    return {j for (a, j) in net.edge_weights if a == i}


@dataclass(frozen=True)
class SparsityPattern:
    """Admissible gain structure: which K, consensus, and L blocks may be nonzero."""

    k_nodes: frozenset[int]
    g_edges: frozenset[tuple[int, int]]
    l_blocks: tuple[int, ...]   # output dim per node; L is block-diagonal

    def allows_k(self, i: int) -> bool:
        return i in self.k_nodes

    def allows_g(self, i: int, j: int) -> bool:
        return (i, j) in self.g_edges


def sparsity_pattern(net: SensorNetwork) -> SparsityPattern:
    return SparsityPattern(
        k_nodes=frozenset(net.controller_nodes),
        g_edges=frozenset(net.edge_weights),
        l_blocks=net.output_dims,
    )


def recover_consensus_gains(gains, net: SensorNetwork,
                            edges=None) -> dict[tuple[int, int], np.ndarray]:
    """Per-edge consensus gains G_ij = G_bar_ij / m_ij.

    `gains` may be a GainSet-like object exposing .g_bar or a plain dict of
    edge -> matrix.  Requesting a non-edge raises (its weight is zero).
    """
    g_bar = getattr(gains, "g_bar", gains)
    wanted = tuple(g_bar) if edges is None else tuple(edges)
    out = {}
    for (i, j) in wanted:
        m = net.weight(i, j)
        if m == 0.0:
            raise ZeroDivisionError(f"({i},{j}) is not an edge: m_ij = 0")
        out[(i, j)] = np.asarray(g_bar[(i, j)], dtype=float) / m
    return out


def measure(net: SensorNetwork, x_s: np.ndarray, x_f: np.ndarray,
            v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stacked node outputs y and slow-model measurement disturbances v_bar.

    y_i = C_s,i x_s + C_f,i x_f + v_i; v_bar_i = y_i - C_s,i x_s, i.e. the
    spillover of the retained fast modes plus the raw sensor noise.
    """
    x_s = np.asarray(x_s, dtype=float)
    x_f = np.asarray(x_f, dtype=float)
    v = np.asarray(v, dtype=float)
    if x_s.size != net.n_slow:
        raise ValueError("x_s dimension mismatch")
    if v.size != net.total_outputs:
        raise ValueError("noise dimension mismatch")
    y = np.empty(net.total_outputs)
    v_bar = np.empty(net.total_outputs)
    r = 0
    for cs, cf in zip(net.c_slow, net.c_fast):
        q = cs.shape[0]
        if x_f.size != cf.shape[1]:
            raise ValueError("x_f dimension mismatch")
        spill = cf @ x_f
        y[r:r + q] = cs @ x_s + spill + v[r:r + q]
        v_bar[r:r + q] = spill + v[r:r + q]
        r += q
    return y, v_bar
