"""The clustering engine: skeleton initialization, suspicion-driven
refinement, and constraint deduction, wrapped in a resumable session.

Initialization links every representative to its nearest fellow
representative, then resolves reciprocal nearest-neighbor pairs by keeping
the higher-in-degree member as the pair's representative, until a single
tree remains. Refinement repeatedly takes the heaviest unconfirmed edge and
asks whether its endpoints belong together; answers come from stored
constraints when a theta-sum 0 or 1 path exists, and from the oracle
otherwise. A cannot-link verdict detaches the edge's subtree and tries to
reattach it under the nearest agreeing representative.

Sessions suspend instead of blocking when the oracle is a human: a pending
pair parks in the session until resume_with_answer supplies the verdict,
and the interrupted step continues exactly where it stopped. A headless run
and an interactive run fed the same answers walk identical states.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import NoPendingQuery, PendingQueryExists
from .evaluation import IceTrace, adjusted_rand_index, erroneous_edge_rate
from .graph import (
    CANNOT_LINK,
    MUST_LINK,
    DataSkeleton,
    PairwiseConstraint,
    MinimalConstraintGraph,
    connected_component_labels,
)
from .metrics import (
    Dataset,
    Metric,
    batch_nearest_neighbors,
    distance,
    distances_from,
    pair_distances,
)

logger = logging.getLogger(__name__)

# child-stream tags so initialization and refinement draw from
# independent generators under one session seed
_DS_INIT_STREAM = 1
_RECONS_STREAM = 2


class Verdict(Enum):
    MUST_LINK = "must_link"
    CANNOT_LINK = "cannot_link"


class _Suspended:
    __slots__ = ()

    def __repr__(self) -> str:
        return "SUSPENDED"


#: returned by deduce when an interactive oracle must be asked first
SUSPENDED = _Suspended()


class Phase(Enum):
    IDLE = "idle"
    AWAIT_EDGE_VERDICT = "await_edge_verdict"
    AWAIT_CANDIDATE_VERDICT = "await_candidate_verdict"
    DONE = "done"


class StepKind(Enum):
    EDGE_CONFIRMED = "edge_confirmed"
    REATTACHED = "reattached"
    NEW_REPRESENTATIVE = "new_representative"
    ALL_CONFIRMED = "all_confirmed"
    SUSPENDED = "suspended"


@dataclass(frozen=True)
class StepOutcome:
    kind: StepKind
    node: Optional[int] = None
    parent: Optional[int] = None


class GroundTruthOracle:
    """Error-free oracle simulated from ground-truth labels."""

    kind = "ground_truth"

    def __init__(self, labels):
        self.labels = np.asarray(labels)

    def answer(self, i: int, j: int) -> int:
        return MUST_LINK if self.labels[i] == self.labels[j] else CANNOT_LINK


class InteractiveOracle:
    """Marker oracle: answers arrive asynchronously via resume_with_answer."""

    kind = "interactive"


def _tie_rng(seed: int, stream: int) -> Optional[np.random.Generator]:
    # seed 0 selects the deterministic lowest-index tie rule everywhere
    if seed == 0:
        return None
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


def _pick_tie(a: int, b: int, rng: Optional[np.random.Generator]) -> int:
    if rng is None:
        return min(a, b)
    return (a, b)[int(rng.integers(0, 2))]


def ds_init(
    ds: Dataset,
    metric: Metric,
    seed: int = 0,
    iteration_log: Optional[list] = None,
) -> DataSkeleton:
    """Build the initial skeleton: a single tree with n - 1 edges.

    Each round links every representative to its nearest fellow
    representative, then finds reciprocal nearest-neighbor pairs. In each
    pair the higher-in-degree node survives as a representative and its
    outgoing edge to the partner is removed; in-degree ties fall to the
    seeded coin flip (lowest index when seed is 0). Survivors carry the next
    round until one remains.
    """
    s = DataSkeleton(ds.n)
    if ds.n == 1:
        return s
    rng = _tie_rng(seed, _DS_INIT_STREAM)
    reps = np.arange(ds.n, dtype=np.int64)
    while reps.size > 1:
        nn = batch_nearest_neighbors(metric, ds, reps)
        dists = pair_distances(metric, ds, reps, nn)
        s._bulk_set_edges(reps, nn, dists)
        # reciprocal pairs, anchored at the lower member
        nn_pos = np.searchsorted(reps, nn)
        mutual = (nn[nn_pos] == reps) & (reps < nn)
        winners = []
        for x, y in zip(reps[mutual].tolist(), nn[mutual].tolist()):
            di, dj = s.in_degree(x), s.in_degree(y)
            if di > dj:
                w = x
            elif dj > di:
                w = y
            else:
                w = _pick_tie(x, y, rng)
            s.delete_edge(w)
            winners.append(w)
        reps = np.sort(np.array(winners, dtype=np.int64))
        if iteration_log is not None:
            iteration_log.append(reps.copy())
    s.representatives = {int(reps[0])}
    return s


@dataclass
class RunResult:
    labels: np.ndarray
    trace_rows: list
    ice: Optional[IceTrace]
    query_count: int
    step_count: int
    budget_exhausted: bool
    ari: Optional[float]


class Session:
    """Resumable state machine around one skeleton refinement run.

    The session owns the skeleton, the constraint graph, the oracle, the
    query trace and the optional query budget. The budget gates step starts
    only; a step in flight always runs to completion, so the final count may
    overshoot by at most the length of one candidate scan.
    """

    def __init__(
        self,
        dataset: Dataset,
        metric: Metric,
        oracle,
        seed: int = 0,
        budget: Optional[int] = None,
        skeleton: Optional[DataSkeleton] = None,
        iteration_log: Optional[list] = None,
    ):
        self.dataset = dataset
        self.metric = metric
        self.oracle = oracle
        self.rng_seed = seed
        self.budget = budget
        self.skeleton = (
            skeleton
            if skeleton is not None
            else ds_init(dataset, metric, seed, iteration_log)
        )
        self.cgraph = MinimalConstraintGraph()
        self.phase = Phase.IDLE
        self.query_count = 0
        self.step_count = 0
        self.trace_rows: list[tuple[int, Optional[float], int]] = []
        self._rng = _tie_rng(seed, _RECONS_STREAM)
        self._heap: list[tuple[float, int, int]] = [
            (-e.distance, e.source, e.target)
            for e in self.skeleton.edges()
            if not e.confirmed
        ]
        heapq.heapify(self._heap)
        self._pending: Optional[tuple[int, int]] = None
        self._resume_ctx: Optional[dict] = None
        self._struct_version = 0
        self._labels_version = -1
        self._cached_labels: Optional[np.ndarray] = None
        self._ari_version = -1
        self._cached_ari: Optional[float] = None
        if dataset.labels is not None:
            self.initial_lambda: Optional[float] = erroneous_edge_rate(
                self.skeleton, dataset.labels
            )
            self.class_count: Optional[int] = int(len(np.unique(dataset.labels)))
        else:
            self.initial_lambda = None
            self.class_count = None
        self._sample_trace()

    # ----- observers -------------------------------------------------

    def component_labels(self) -> np.ndarray:
        """Current cluster assignment; cached until the structure changes."""
        if self._labels_version != self._struct_version:
            self._cached_labels = connected_component_labels(self.skeleton)
            self._labels_version = self._struct_version
        return self._cached_labels

    def cluster_count(self) -> int:
        return int(self.component_labels().max()) + 1

    def current_ari(self) -> Optional[float]:
        if self.dataset.labels is None:
            return None
        if self._ari_version != self._struct_version:
            self._cached_ari = adjusted_rand_index(
                self.component_labels(), self.dataset.labels
            )
            self._ari_version = self._struct_version
        return self._cached_ari

    def budget_exhausted(self) -> bool:
        return self.budget is not None and self.query_count >= self.budget

    def pending_pair(self) -> Optional[tuple[int, int]]:
        return self._pending

    def ice_trace(self) -> Optional[IceTrace]:
        if any(a is None for _, a, _ in self.trace_rows):
            return None
        return IceTrace(tuple((q, a) for q, a, _ in self.trace_rows))

    # ----- internals ---------------------------------------------------

    def _sample_trace(self) -> None:
        self.trace_rows.append(
            (self.query_count, self.current_ari(), self.cluster_count())
        )

    def _record_answer(self, i: int, j: int, theta: int) -> None:
        self.cgraph.add_constraint(PairwiseConstraint(i, j, theta))
        self.query_count += 1
        self._sample_trace()

    def _pop_suspicious(self):
        s = self.skeleton
        while self._heap:
            negd, src, dst = heapq.heappop(self._heap)
            if s._target[src] == dst and not s._confirmed[src]:
                return s.out_edge(src)
        return None

    def _sorted_candidates(self, i: int) -> np.ndarray:
        reps = np.fromiter(self.skeleton.representatives, dtype=np.int64)
        reps.sort()
        if (reps == i).any():
            raise AssertionError(f"detached node {i} is already a representative")
        d = distances_from(self.metric, self.dataset, i, reps)
        return reps[np.lexsort((reps, d))]

    def _finish_step(self, outcome: StepOutcome) -> StepOutcome:
        self.step_count += 1
        self._resume_ctx = None
        self.phase = Phase.IDLE
        return outcome

    def _apply_edge_verdict(self, edge, verdict: Verdict) -> StepOutcome:
        i, j = edge.source, edge.target
        if verdict is Verdict.MUST_LINK:
            self.skeleton.confirm_edge(i)
            return self._finish_step(
                StepOutcome(StepKind.EDGE_CONFIRMED, node=i, parent=j)
            )
        # the subtree hanging off i detaches with the deleted edge
        self.skeleton.delete_edge(i)
        self._struct_version += 1
        self._resume_ctx = {
            "mode": "candidates",
            "node": i,
            "candidates": self._sorted_candidates(i),
            "cursor": 0,
        }
        return self._scan_candidates()

    def _scan_candidates(self) -> StepOutcome:
        ctx = self._resume_ctx
        i = ctx["node"]
        cands = ctx["candidates"]
        while ctx["cursor"] < len(cands):
            r = int(cands[ctx["cursor"]])
            verdict = self.deduce(i, r)
            if verdict is SUSPENDED:
                return StepOutcome(StepKind.SUSPENDED)
            if verdict is Verdict.MUST_LINK:
                return self._finish_step(self._reattach(i, r))
            ctx["cursor"] += 1
        # every representative refused: i roots a new component
        self.skeleton.representatives.add(i)
        return self._finish_step(StepOutcome(StepKind.NEW_REPRESENTATIVE, node=i))

    def _reattach(self, i: int, r: int) -> StepOutcome:
        di, dr = self.skeleton.in_degree(i), self.skeleton.in_degree(r)
        if di > dr:
            hi = i
        elif dr > di:
            hi = r
        else:
            hi = _pick_tie(i, r, self._rng)
        lo = r if hi == i else i
        self.skeleton.set_edge(lo, hi, distance(self.metric, self.dataset, lo, hi), confirmed=True)
        self._struct_version += 1
        self.skeleton.representatives.discard(lo)
        self.skeleton.representatives.add(hi)
        return StepOutcome(StepKind.REATTACHED, node=lo, parent=hi)

    # ----- operations ----------------------------------------------------

    def deduce(self, i: int, j: int):
        """Constraint verdict for (i, j): deduced when a theta-sum 0 or 1
        path exists, otherwise the oracle is consulted.

        Ground-truth oracles answer inline (the constraint is stored and the
        query counted); an interactive oracle parks the pair and returns
        SUSPENDED.
        """
        if self.phase in (Phase.AWAIT_EDGE_VERDICT, Phase.AWAIT_CANDIDATE_VERDICT):
            raise PendingQueryExists(f"pair {self._pending} is awaiting an answer")
        if self.phase is Phase.DONE:
            raise ValueError("session is done")
        v = self.cgraph.path_verdict(i, j)
        if v == MUST_LINK:
            return Verdict.MUST_LINK
        if v == CANNOT_LINK:
            return Verdict.CANNOT_LINK
        if isinstance(self.oracle, GroundTruthOracle):
            theta = self.oracle.answer(i, j)
            self._record_answer(i, j, theta)
            return Verdict.MUST_LINK if theta == MUST_LINK else Verdict.CANNOT_LINK
        self._pending = (i, j)
        ctx = self._resume_ctx
        self.phase = (
            Phase.AWAIT_EDGE_VERDICT
            if ctx is not None and ctx["mode"] == "edge"
            else Phase.AWAIT_CANDIDATE_VERDICT
        )
        return SUSPENDED

    def recons_step(self) -> StepOutcome:
        """One refinement step on the most suspicious unconfirmed edge.

        Outcomes: the edge is confirmed; or its subtree detaches and
        reattaches under the nearest agreeing representative; or no
        representative agrees and the detached node becomes one itself.
        Returns ALL_CONFIRMED when no unconfirmed edge remains, SUSPENDED
        when a human answer is needed first.
        """
        if self.phase is Phase.DONE:
            return StepOutcome(StepKind.ALL_CONFIRMED)
        if self.phase is not Phase.IDLE:
            raise PendingQueryExists(f"pair {self._pending} is awaiting an answer")
        edge = self._pop_suspicious()
        if edge is None:
            self.phase = Phase.DONE
            return StepOutcome(StepKind.ALL_CONFIRMED)
        self._resume_ctx = {"mode": "edge", "edge": edge}
        verdict = self.deduce(edge.source, edge.target)
        if verdict is SUSPENDED:
            return StepOutcome(StepKind.SUSPENDED)
        return self._apply_edge_verdict(edge, verdict)

    def resume_with_answer(self, theta: int) -> StepOutcome:
        """Feed the pending pair's verdict and continue the interrupted step."""
        if self._pending is None or self.phase not in (
            Phase.AWAIT_EDGE_VERDICT,
            Phase.AWAIT_CANDIDATE_VERDICT,
        ):
            raise NoPendingQuery("no query is pending")
        if theta not in (MUST_LINK, CANNOT_LINK):
            raise ValueError(f"theta must be 0 or 1, got {theta!r}")
        i, j = self._pending
        self._pending = None
        resumed_phase = self.phase
        self.phase = Phase.IDLE
        self._record_answer(i, j, theta)
        ctx = self._resume_ctx
        if resumed_phase is Phase.AWAIT_EDGE_VERDICT:
            verdict = Verdict.MUST_LINK if theta == MUST_LINK else Verdict.CANNOT_LINK
            return self._apply_edge_verdict(ctx["edge"], verdict)
        # candidate scan: the stored constraint now resolves the cursor's
        # deduce call for free, so simply re-enter the loop
        return self._scan_candidates()

    def advance(self) -> None:
        """Run refinement steps until done, suspended or out of budget."""
        while self.phase is Phase.IDLE and not self.budget_exhausted():
            out = self.recons_step()
            if out.kind in (StepKind.ALL_CONFIRMED, StepKind.SUSPENDED):
                break

    def accept(self) -> np.ndarray:
        """Terminate now and return the current cluster assignment.

        Unconfirmed edges stay where they are; a pending query, if any, is
        dropped. Safe to call repeatedly.
        """
        self._pending = None
        self._resume_ctx = None
        self.phase = Phase.DONE
        return self.component_labels().copy()

    def run(self) -> RunResult:
        """Drive the session to completion headlessly.

        With an error-free ground-truth oracle and no budget this terminates
        at a perfect clustering, and the query count is audited against the
        (1 + lambda * k) * n bound.
        """
        self.advance()
        if self.phase is not Phase.DONE and not self.budget_exhausted():
            raise PendingQueryExists(
                "interactive session suspended; answer via resume_with_answer"
            )
        done = self.phase is Phase.DONE
        if done:
            self._audit_query_bound()
        return RunResult(
            labels=self.component_labels().copy(),
            trace_rows=list(self.trace_rows),
            ice=self.ice_trace(),
            query_count=self.query_count,
            step_count=self.step_count,
            budget_exhausted=not done,
            ari=self.current_ari(),
        )

    def _audit_query_bound(self) -> None:
        if not isinstance(self.oracle, GroundTruthOracle):
            return
        if self.initial_lambda is None or self.class_count is None:
            return
        bound = (1.0 + self.initial_lambda * self.class_count) * self.dataset.n
        if self.query_count > bound:
            raise AssertionError(
                f"query bound violated: {self.query_count} > "
                f"(1 + {self.initial_lambda} * {self.class_count}) * {self.dataset.n}"
            )
        logger.debug(
            "query bound ok: %d <= %.2f", self.query_count, bound
        )
