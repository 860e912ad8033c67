"""Switching graph topologies: per-mode Laplacians and pinned-node sets.

A mode is an undirected unit-weight graph together with the subset of
nodes that receive direct feedback toward the target trajectory.  A
switching network bundles the mode family with the infinitesimal
generator of the Markov chain that drives the switching.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np


class TopologyError(ValueError):
    """Malformed edge list, pinned set, or mode family."""


def laplacian_from_edges(edges, m: int) -> np.ndarray:
    """Build the m x m unit-weight graph Laplacian from 1-based node pairs.

    Off-diagonal entries are -1 per link, the diagonal holds node degrees,
    so every row sums to zero.  Rejects out-of-range indices, self-loops
    and duplicate (unordered) edges.
    """
    lap = np.zeros((m, m), dtype=float)
    seen = set()
    for edge in edges:
        i, j = int(edge[0]), int(edge[1])
        if not (1 <= i <= m and 1 <= j <= m):
            raise TopologyError(f"edge ({i},{j}) out of range for {m} nodes")
        if i == j:
            raise TopologyError(f"self-loop on node {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise TopologyError(f"duplicate edge ({key[0]},{key[1]})")
        seen.add(key)
        a, b = i - 1, j - 1
        lap[a, b] -= 1.0
        lap[b, a] -= 1.0
        lap[a, a] += 1.0
        lap[b, b] += 1.0
    return lap


@dataclass(frozen=True)
class GraphMode:
    """One coupling configuration: Laplacian plus pinned node indices.

    ``pinned`` stores 0-based indices internally; configuration files and
    logs use 1-based labels.  Instances are immutable after construction
    and safe to share across concurrent trials.
    """

    laplacian: np.ndarray
    pinned: tuple[int, ...]

    def __post_init__(self):
        lap = np.asarray(self.laplacian, dtype=float)
        object.__setattr__(self, "laplacian", lap)
        object.__setattr__(self, "pinned", tuple(sorted(int(i) for i in self.pinned)))
        lap.flags.writeable = False

    @property
    def size(self) -> int:
        return self.laplacian.shape[0]

    @functools.cached_property
    def _pin_vector(self) -> np.ndarray:
        vec = np.zeros(self.size)
        if self.pinned:
            vec[list(self.pinned)] = 1.0
        vec.flags.writeable = False
        return vec

    def pin_vector(self) -> np.ndarray:
        """Indicator vector of pinned nodes (1.0 where pinned); read-only."""
        return self._pin_vector

    @functools.cached_property
    def _neighbor_lists(self) -> tuple[np.ndarray, ...]:
        idx = np.arange(self.size)
        return tuple(np.flatnonzero((self.laplacian[i] != 0.0) & (idx != i))
                     for i in range(self.size))

    def neighbors(self, i: int) -> np.ndarray:
        """0-based indices of nodes linked to node ``i`` in this mode."""
        return self._neighbor_lists[i]


def graph_mode_from_edges(edges, pinned, m: int) -> GraphMode:
    """Construct a :class:`GraphMode` from 1-based edges and pinned labels."""
    lap = laplacian_from_edges(edges, m)
    pins = []
    for label in pinned:
        label = int(label)
        if not 1 <= label <= m:
            raise TopologyError(f"pinned node {label} out of range for {m} nodes")
        pins.append(label - 1)
    if len(set(pins)) != len(pins):
        raise TopologyError("duplicate pinned node")
    return GraphMode(laplacian=lap, pinned=tuple(pins))


@dataclass(frozen=True)
class SwitchingNetwork:
    """Mode family plus the Markov generator that switches between modes."""

    modes: tuple[GraphMode, ...]
    generator: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        gen = np.asarray(self.generator, dtype=float)
        object.__setattr__(self, "generator", gen)
        gen.flags.writeable = False

    @property
    def num_modes(self) -> int:
        return len(self.modes)

    @property
    def num_nodes(self) -> int:
        return self.modes[0].size


def validate_network(net: SwitchingNetwork) -> list[str]:
    """Check every structural invariant; return all violations found.

    An empty list means the network is well formed.  Laplacian checks are
    exact (entries are small integers); generator row sums are checked to
    1e-9 since rates may be arbitrary floats.
    """
    diags = []
    if not net.modes:
        return ["network has no modes"]
    m = net.modes[0].size
    for k, mode in enumerate(net.modes):
        tag = f"mode {k + 1}"
        lap = mode.laplacian
        if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
            diags.append(f"{tag}: laplacian is not square")
            continue
        if lap.shape[0] != m:
            diags.append(f"{tag}: has {lap.shape[0]} nodes, expected {m}")
        sz = lap.shape[0]
        for i in range(sz):
            rowsum = lap[i].sum()
            if rowsum != 0.0:
                diags.append(f"{tag}: row {i + 1} sums to {rowsum:g}")
        off = lap[~np.eye(sz, dtype=bool)]
        bad = np.setdiff1d(np.unique(off), [0.0, -1.0])
        if bad.size:
            diags.append(f"{tag}: off-diagonal entries outside {{0,-1}}: {bad.tolist()}")
        if not np.array_equal(lap, lap.T):
            diags.append(f"{tag}: laplacian is not symmetric")
        for i in range(sz):
            degree = -(lap[i].sum() - lap[i, i])
            if lap[i, i] != degree:
                diags.append(f"{tag}: diagonal entry {i + 1} is {lap[i, i]:g}, expected degree {degree:g}")
        for i in mode.pinned:
            if not 0 <= i < sz:
                diags.append(f"{tag}: pinned node {i + 1} out of range")

    gen = net.generator
    n_modes = len(net.modes)
    if gen.ndim != 2 or gen.shape != (n_modes, n_modes):
        diags.append(f"generator shape {gen.shape} does not match {n_modes} modes")
        return diags
    for u in range(n_modes):
        rowsum = gen[u].sum()
        if abs(rowsum) > 1e-9:
            diags.append(f"generator row {u + 1} sums to {rowsum:g}")
        if gen[u, u] > 0.0:
            diags.append(f"generator diagonal entry {u + 1} is positive ({gen[u, u]:g})")
        for v in range(n_modes):
            if v != u and gen[u, v] < 0.0:
                diags.append(f"generator entry ({u + 1},{v + 1}) is negative ({gen[u, v]:g})")
    return diags
