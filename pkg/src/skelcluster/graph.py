"""Sparse graph structures for skeleton-based active clustering.

Two structures live here. A DataSkeleton is a directed forest over dataset
rows: every node carries at most one outgoing edge toward another node, with
a distance weight and a confirmed flag. A MinimalConstraintGraph is an
undirected graph holding only oracle-provided pairwise constraints, with a
boolean theta per edge (0 = must-link, 1 = cannot-link). Constraint
deduction reduces to 0/1-weighted shortest paths on the latter: theta-sum 0
means must-link, 1 means cannot-link, anything longer is unknown.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .errors import DeduciblePair, DuplicatePair

MUST_LINK = 0
CANNOT_LINK = 1


@dataclass(frozen=True)
class SkeletonEdge:
    """One directed skeleton edge. confirmed=True marks a verified must-link."""

    source: int
    target: int
    distance: float
    confirmed: bool = False

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError("self-loop edge")
        if not np.isfinite(self.distance) or self.distance < 0:
            raise ValueError(f"bad edge distance {self.distance!r}")


@dataclass(frozen=True)
class PairwiseConstraint:
    """Unordered node pair with theta in {0 = must-link, 1 = cannot-link}."""

    a: int
    b: int
    theta: int

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("constraint on identical nodes")
        if self.theta not in (MUST_LINK, CANNOT_LINK):
            raise ValueError(f"theta must be 0 or 1, got {self.theta!r}")

    def key(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


class DataSkeleton:
    """Directed forest with per-node out-degree <= 1, backed by flat arrays.

    The representative set is managed explicitly by the engine; the invariant
    that representatives are exactly the zero-out-degree nodes holds at every
    externally observable moment, not mid-operation.
    """

    def __init__(self, node_count: int):
        if node_count < 1:
            raise ValueError("node_count must be >= 1")
        self._n = node_count
        self._target = np.full(node_count, -1, dtype=np.int64)
        self._distance = np.zeros(node_count, dtype=np.float64)
        self._confirmed = np.zeros(node_count, dtype=bool)
        self._in_degree = np.zeros(node_count, dtype=np.int64)
        self.representatives: set[int] = set(range(node_count))

    @property
    def node_count(self) -> int:
        return self._n

    def has_edge(self, source: int) -> bool:
        return self._target[source] >= 0

    def out_edge(self, source: int) -> Optional[SkeletonEdge]:
        t = self._target[source]
        if t < 0:
            return None
        return SkeletonEdge(
            source=int(source),
            target=int(t),
            distance=float(self._distance[source]),
            confirmed=bool(self._confirmed[source]),
        )

    def in_degree(self, node: int) -> int:
        return int(self._in_degree[node])

    def set_edge(self, source: int, target: int, distance: float, confirmed: bool = False) -> None:
        """Create or replace the outgoing edge of ``source``."""
        if source == target:
            raise ValueError("self-loop edge")
        if not np.isfinite(distance) or distance < 0:
            raise ValueError(f"bad edge distance {distance!r}")
        old = self._target[source]
        if old >= 0:
            self._in_degree[old] -= 1
        self._target[source] = target
        self._distance[source] = distance
        self._confirmed[source] = confirmed
        self._in_degree[target] += 1

    def delete_edge(self, source: int) -> None:
        t = self._target[source]
        if t < 0:
            raise ValueError(f"node {source} has no outgoing edge")
        self._in_degree[t] -= 1
        self._target[source] = -1
        self._distance[source] = 0.0
        self._confirmed[source] = False

    def confirm_edge(self, source: int) -> None:
        if self._target[source] < 0:
            raise ValueError(f"node {source} has no outgoing edge")
        self._confirmed[source] = True

    def _bulk_set_edges(self, sources: np.ndarray, targets: np.ndarray, distances: np.ndarray) -> None:
        # fast path for initialization; sources must have no current out-edge
        if (self._target[sources] >= 0).any():
            raise ValueError("bulk set over existing edges")
        self._target[sources] = targets
        self._distance[sources] = distances
        self._confirmed[sources] = False
        np.add.at(self._in_degree, targets, 1)

    def edge_count(self) -> int:
        return int((self._target >= 0).sum())

    def unconfirmed_count(self) -> int:
        return int(((self._target >= 0) & ~self._confirmed).sum())

    def edges(self) -> Iterator[SkeletonEdge]:
        """Yield all edges in ascending source order."""
        for src in np.flatnonzero(self._target >= 0):
            yield self.out_edge(int(src))

    def to_snapshot(self) -> dict:
        """JSON-ready document: {"n", "edges", "representatives"}."""
        return {
            "n": self._n,
            "edges": [
                {
                    "src": e.source,
                    "dst": e.target,
                    "dist": e.distance,
                    "confirmed": e.confirmed,
                }
                for e in self.edges()
            ],
            "representatives": sorted(int(r) for r in self.representatives),
        }

    @classmethod
    def from_snapshot(cls, doc: dict) -> "DataSkeleton":
        s = cls(doc["n"])
        for e in doc["edges"]:
            s.set_edge(e["src"], e["dst"], e["dist"], e["confirmed"])
        s.representatives = set(doc["representatives"])
        return s


def max_suspicious_edge(s: DataSkeleton) -> Optional[SkeletonEdge]:
    """Unconfirmed edge of maximum weight, ties to the smallest (source, target).

    Returns None when every edge is confirmed, which is the termination
    signal for the refinement loop.
    """
    mask = (s._target >= 0) & ~s._confirmed
    if not mask.any():
        return None
    idx = np.flatnonzero(mask)
    # argmax takes the first maximum; sources are unique and ascending, so
    # this realizes the lexicographic (source, target) tie rule
    best = idx[np.argmax(s._distance[idx])]
    return s.out_edge(int(best))


def connected_component_labels(s: DataSkeleton) -> np.ndarray:
    """Per-node component id, ignoring edge direction.

    Labels are 0..(#components - 1), assigned in order of each component's
    smallest contained node id.
    """
    n = s.node_count
    parent = np.where(s._target >= 0, s._target, np.arange(n))
    while True:
        grand = parent[parent]
        if np.array_equal(grand, parent):
            break
        parent = grand
    _, first_idx, inverse = np.unique(parent, return_index=True, return_inverse=True)
    order = np.argsort(first_idx)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return rank[inverse].astype(np.int64)


class MinimalConstraintGraph:
    """Undirected constraint store; holds only oracle answers, never deductions."""

    def __init__(self):
        self._adj: dict[int, dict[int, int]] = {}
        self._edge_count = 0

    @property
    def edge_count(self) -> int:
        return self._edge_count

    def theta(self, a: int, b: int) -> Optional[int]:
        nbrs = self._adj.get(a)
        if nbrs is None:
            return None
        return nbrs.get(b)

    def degree(self, node: int) -> int:
        return len(self._adj.get(node, ()))

    def nodes(self) -> Iterator[int]:
        return iter(self._adj)

    def constraints(self) -> Iterator[PairwiseConstraint]:
        for a, nbrs in self._adj.items():
            for b, th in nbrs.items():
                if a < b:
                    yield PairwiseConstraint(a, b, th)

    def add_constraint(self, c: PairwiseConstraint) -> None:
        """Insert an oracle-provided constraint.

        Raises DuplicatePair if the pair is already stored, DeduciblePair if
        its verdict was already derivable (theta-sum path of length <= 1),
        which indicates a logic bug in the caller.
        """
        a, b = c.a, c.b
        if self.theta(a, b) is not None:
            raise DuplicatePair(f"constraint for ({a}, {b}) already stored")
        if self.path_verdict(a, b) is not None:
            raise DeduciblePair(f"pair ({a}, {b}) is already deducible")
        self._adj.setdefault(a, {})[b] = c.theta
        self._adj.setdefault(b, {})[a] = c.theta
        self._edge_count += 1

    def shortest_constraint_path_length(self, i: int, j: int) -> Optional[int]:
        """Minimum theta-sum over all i-j paths; None when disconnected.

        0/1-weighted breadth-first search with a deque: must-link edges cost
        nothing and go to the front, cannot-link edges cost one and go to the
        back, so nodes pop in nondecreasing theta-sum order.
        """
        if i == j:
            raise ValueError("path endpoints must differ")
        adj = self._adj
        if i not in adj or j not in adj:
            return None
        dist = {i: 0}
        dq = deque([i])
        while dq:
            u = dq.popleft()
            du = dist[u]
            if u == j:
                return du
            for v, th in adj[u].items():
                dv = du + th
                old = dist.get(v)
                if old is None or dv < old:
                    dist[v] = dv
                    if th == 0:
                        dq.appendleft(v)
                    else:
                        dq.append(v)
        return None

    def path_verdict(self, i: int, j: int) -> Optional[int]:
        """Like shortest_constraint_path_length but capped at theta-sum 1.

        Returns 0, 1, or None (no path of theta-sum <= 1). Never expands
        beyond the cap, so the cost is bounded by the theta-sum <= 1
        neighborhood of the cheaper endpoint rather than the whole graph.
        """
        if i == j:
            raise ValueError("path endpoints must differ")
        adj = self._adj
        ai = adj.get(i)
        aj = adj.get(j)
        if not ai or not aj:
            return None
        if len(aj) < len(ai):
            i, j = j, i
            ai = aj
        dist = {i: 0}
        dq = deque([i])
        while dq:
            u = dq.popleft()
            du = dist[u]
            if u == j:
                return du
            for v, th in adj[u].items():
                dv = du + th
                if dv > 1:
                    continue
                old = dist.get(v)
                if old is None or dv < old:
                    dist[v] = dv
                    if th == 0:
                        dq.appendleft(v)
                    else:
                        dq.append(v)
        return None
