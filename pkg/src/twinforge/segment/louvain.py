"""Louvain community detection on a weighted undirected graph.

Deterministic: nodes are visited in their given order, community ids compact
by first appearance, and the seed only drives optional shuffling (off by
default). Modularity per pass is recorded so callers can audit the
non-decreasing guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class LouvainResult:
    labels: np.ndarray  # (N,) community id per node, compacted to 0..K-1
    modularity: float
    pass_modularity: list[float] = field(default_factory=list)


def modularity(adj: np.ndarray, labels: np.ndarray, resolution: float = 1.0) -> float:
    """Newman modularity Q = sum_c [ in_c / 2m - resolution * (tot_c / 2m)^2 ]."""
    m2 = adj.sum()  # counts both directions = 2m
    if m2 <= 0:
        return 0.0
    q = 0.0
    degrees = adj.sum(axis=1)
    for c in np.unique(labels):
        members = labels == c
        q += adj[np.ix_(members, members)].sum() / m2
        q -= resolution * (degrees[members].sum() / m2) ** 2
    return float(q)


def louvain(
    adj: np.ndarray,
    resolution: float = 1.0,
    seed: int = 0,
    shuffle: bool = False,
    max_passes: int = 32,
) -> LouvainResult:
    """Greedy modularity maximization; returns one community per node."""
    adj = np.asarray(adj, np.float64)
    n = adj.shape[0]
    if n == 0:
        raise ValueError("louvain requires at least one node")
    if not np.allclose(adj, adj.T):
        raise ValueError("adjacency must be symmetric")
    if np.diag(adj).any():
        raise ValueError("self-edges are not allowed")

    rng = np.random.default_rng(seed)
    node_to_comm = np.arange(n)  # original node -> current-level super node
    current = adj.copy()
    pass_mod: list[float] = []

    for _ in range(max_passes):
        labels, improved = _one_level(current, resolution, rng, shuffle)
        _, inv = np.unique(labels, return_inverse=True)
        node_to_comm = inv[node_to_comm]
        pass_mod.append(modularity(adj, node_to_comm, resolution))
        if not improved:
            break
        current = _aggregate(current, inv)
        if current.shape[0] <= 1:
            break

    # compact ids by first appearance for deterministic output
    final = np.empty(n, np.int64)
    seen: dict[int, int] = {}
    for i, lab in enumerate(node_to_comm):
        if lab not in seen:
            seen[lab] = len(seen)
        final[i] = seen[lab]
    return LouvainResult(final, modularity(adj, final, resolution), pass_mod)


def _one_level(
    adj: np.ndarray, resolution: float, rng: np.random.Generator, shuffle: bool
) -> tuple[np.ndarray, bool]:
    """Local moving: migrate nodes between communities while the gain is positive.

    The graph may carry self-loops (aggregated levels); they ride along with
    the node and cancel out of the gain comparison, so only j != i edges count
    toward community affinity.
    """
    n = adj.shape[0]
    m2 = adj.sum()
    if m2 <= 0:
        return np.arange(n), False
    degrees = adj.sum(axis=1)  # includes self-loops
    labels = np.arange(n)
    tot = degrees.copy()  # summed degree per community

    order = np.arange(n)
    if shuffle:
        rng.shuffle(order)

    improved_any = False
    for _ in range(100):  # sweep cap; normally exits in a handful
        moved = 0
        for i in order:
            ci = labels[i]
            ki = degrees[i]
            w_to: dict[int, float] = {}
            for j in np.nonzero(adj[i])[0]:
                if j == i:
                    continue
                w_to[labels[j]] = w_to.get(labels[j], 0.0) + adj[i, j]
            tot[ci] -= ki
            best_c = ci
            best_gain = w_to.get(ci, 0.0) - resolution * tot[ci] * ki / m2
            for c, w in sorted(w_to.items()):
                if c == ci:
                    continue
                gain = w - resolution * tot[c] * ki / m2
                if gain > best_gain + 1e-15:
                    best_gain = gain
                    best_c = c
            tot[best_c] += ki
            if best_c != ci:
                labels[i] = best_c
                moved += 1
        if moved == 0:
            break
        improved_any = True
    return labels, improved_any


def _aggregate(adj: np.ndarray, compact_labels: np.ndarray) -> np.ndarray:
    """Collapse communities to super nodes; internal weight becomes a self-loop."""
    k = compact_labels.max() + 1
    onehot = np.zeros((adj.shape[0], k))
    onehot[np.arange(adj.shape[0]), compact_labels] = 1.0
    return onehot.T @ adj @ onehot
