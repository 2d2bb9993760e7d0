"""Clustering quality metrics and trace scoring.

The refinement loop emits an ICE trace, one (query_count, ARI) sample per
oracle query. AUIC@n condenses the first n constraints of that curve into a
single trapezoidal mean, with step interpolation between samples and plateau
padding past the end of the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTrace, LengthMismatch, MissingLabels


@dataclass(frozen=True)
class IceTrace:
    """Ordered (query_count, ari) samples; query counts strictly increase
    and the first sample sits at zero queries."""

    samples: tuple[tuple[int, float], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(
            self, "samples", tuple((int(q), float(a)) for q, a in self.samples)
        )
        if self.samples:
            if self.samples[0][0] != 0:
                raise ValueError("first trace sample must be at query_count 0")
            qs = [q for q, _ in self.samples]
            if any(b <= a for a, b in zip(qs, qs[1:])):
                raise ValueError("trace query counts must strictly increase")

    def __len__(self) -> int:
        return len(self.samples)


def _dense_codes(labels) -> np.ndarray:
    arr = np.asarray(labels)
    _, inverse = np.unique(arr, return_inverse=True)
    return inverse


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected partition agreement from the pair-counting table.

    When the expected index equals the maximum index (both labelings
    constant, or a single point) the usual formula is 0/0; that case is
    pinned to 1.0 if the two labelings induce identical partitions and 0.0
    otherwise.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"labelings of shape {a.shape} vs {b.shape}")
    if a.size < 1:
        raise LengthMismatch("labelings must be nonempty")
    ca = _dense_codes(a)
    cb = _dense_codes(b)
    n = ca.size
    nb = int(cb.max()) + 1

    def comb2(counts) -> int:
        return int(sum(int(c) * (int(c) - 1) // 2 for c in counts))

    # contingency cells via joint codes, kept sparse
    _, cell_counts = np.unique(ca.astype(np.int64) * nb + cb, return_counts=True)
    index = comb2(cell_counts)
    sum_a = comb2(np.bincount(ca))
    sum_b = comb2(np.bincount(cb))
    pairs = n * (n - 1) // 2

    # exact integer arithmetic: ARI = (index - E) / (max - E) with
    # E = sum_a * sum_b / pairs, scaled through by 2 * pairs
    num = 2 * (index * pairs - sum_a * sum_b)
    den = (sum_a + sum_b) * pairs - 2 * sum_a * sum_b
    if den == 0:
        # expected equals maximum (e.g. both labelings constant, or n = 1):
        # pinned to 1.0 for identical partitions, else 0.0
        first_a: dict[int, int] = {}
        first_b: dict[int, int] = {}
        for x, y in zip(ca.tolist(), cb.tolist()):
            if first_a.setdefault(x, y) != y or first_b.setdefault(y, x) != x:
                return 0.0
        return 1.0
    return num / den


def auic(t: IceTrace, n: int) -> float:
    """Trapezoidal mean of the ICE curve over the first n constraints.

    s_i is the ARI at exactly i constraints: the last recorded sample at or
    before i, carried forward, and held flat past the final sample when the
    run ended early.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not t.samples:
        raise EmptyTrace("cannot score an empty trace")
    qs = np.array([q for q, _ in t.samples])
    aris = np.array([a for _, a in t.samples])
    grid = np.arange(n + 1)
    idx = np.searchsorted(qs, grid, side="right") - 1
    s = aris[idx]
    return float((s[:-1] + s[1:]).sum() / (2.0 * n))


def format_auic(value: float) -> str:
    return f"{value:.3f}"


def erroneous_edge_rate(skeleton, labels) -> float:
    """Fraction of skeleton edges whose endpoints carry different labels.

    Meaningful on the freshly initialized skeleton, before any refinement;
    this is the lambda of the query-count bound (1 + lambda * k) * n.
    """
    if labels is None:
        raise MissingLabels("erroneous_edge_rate needs ground-truth labels")
    labels = np.asarray(labels)
    if labels.shape != (skeleton.node_count,):
        raise MissingLabels(
            f"labels cover {labels.shape}, skeleton has {skeleton.node_count} nodes"
        )
    total = 0
    bad = 0
    for e in skeleton.edges():
        total += 1
        if labels[e.source] != labels[e.target]:
            bad += 1
    if total == 0:
        return 0.0
    return bad / total


def trace_to_csv(rows) -> str:
    """Render trace rows as CSV with the header "queries,ari".

    Rows are (query_count, ari) pairs; a missing ARI (no ground-truth
    labels) renders as an empty field. Floats use shortest round-trip text
    so identical runs serialize identically.
    """
    lines = ["queries,ari"]
    for q, a in rows:
        lines.append(f"{q}," if a is None else f"{q},{a!r}")
    return "\n".join(lines) + "\n"
