"""Shared test oracles, implemented independently of the package internals."""

from __future__ import annotations

import numpy as np


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def floyd_warshall_theta(n: int, edges: list[tuple[int, int, int]]) -> np.ndarray:
    """All-pairs minimum theta-sum; inf where disconnected."""
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for a, b, th in edges:
        d[a, b] = min(d[a, b], th)
        d[b, a] = min(d[b, a], th)
    for k in range(n):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return d


def entailment_verdict(n: int, edges: list[tuple[int, int, int]], i: int, j: int) -> str:
    """Brute-force constraint entailment: contract must-link components, then
    check whether any cannot-link edge joins the components of i and j."""
    uf = UnionFind(n)
    for a, b, th in edges:
        if th == 0:
            uf.union(a, b)
    if uf.find(i) == uf.find(j):
        return "must_link"
    for a, b, th in edges:
        if th == 1:
            ra, rb = uf.find(a), uf.find(b)
            if {ra, rb} == {uf.find(i), uf.find(j)}:
                return "cannot_link"
    return "unknown"


def force_edge(g, a: int, b: int, theta: int) -> None:
    """Insert a constraint bypassing the deducibility guard (test seam for
    graphs the engine's insertion discipline would never produce)."""
    g._adj.setdefault(a, {})[b] = theta
    g._adj.setdefault(b, {})[a] = theta
    g._edge_count += 1


def grow_disciplined_graph(n: int, n_attempts: int, rng: np.random.Generator):
    """Randomly grow a conflict-free constraint graph the way the engine does:
    only insert a pair when its verdict is not already entailed."""
    from skelcluster.graph import MinimalConstraintGraph, PairwiseConstraint

    g = MinimalConstraintGraph()
    edges: list[tuple[int, int, int]] = []
    for _ in range(n_attempts):
        a, b = rng.integers(0, n, size=2)
        if a == b:
            continue
        a, b = int(a), int(b)
        if entailment_verdict(n, edges, a, b) != "unknown":
            continue
        th = int(rng.integers(0, 2))
        g.add_constraint(PairwiseConstraint(a, b, th))
        edges.append((a, b, th))
    return g, edges
