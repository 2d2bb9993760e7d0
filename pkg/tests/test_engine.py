import numpy as np
import pytest
from helpers import entailment_verdict, grow_disciplined_graph

from skelcluster.engine import (
    SUSPENDED,
    GroundTruthOracle,
    InteractiveOracle,
    Phase,
    Session,
    StepKind,
    Verdict,
    ds_init,
)
from skelcluster.errors import NoPendingQuery, PendingQueryExists
from skelcluster.graph import (
    CANNOT_LINK,
    MUST_LINK,
    DataSkeleton,
    PairwiseConstraint,
    connected_component_labels,
    max_suspicious_edge,
)
from skelcluster.metrics import Dataset, Metric

EUCLID = Metric.euclidean()


def ds_1d(values, labels=None):
    pts = np.asarray(values, dtype=float).reshape(-1, 1)
    return Dataset(points=pts, labels=None if labels is None else np.asarray(labels))


def edge_set(skeleton):
    return {(e.source, e.target, e.distance, e.confirmed) for e in skeleton.edges()}


def random_clusters(rng, n, k, d):
    """Well-separated gaussian blobs, labels included."""
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    pts = []
    labels = []
    for c, size in enumerate(sizes):
        center = np.zeros(d)
        center[0] = 100.0 * c
        pts.append(center + rng.normal(0, 1.0, size=(size, d)))
        labels += [c] * size
    return Dataset(points=np.vstack(pts), labels=np.array(labels))


class TestDsInit:
    def test_single_node(self):
        s = ds_init(ds_1d([5.0]), EUCLID)
        assert s.edge_count() == 0
        assert s.representatives == {0}

    def test_two_nodes(self):
        s = ds_init(ds_1d([0.0, 1.0]), EUCLID)
        assert s.edge_count() == 1
        assert s.representatives == {0}  # in-degree tie, lowest index roots
        assert edge_set(s) == {(1, 0, 1.0, False)}

    def test_golden_four_point_fixture(self):
        s = ds_init(ds_1d([0.0, 1.0, 10.0, 11.0]), EUCLID, seed=0)
        assert edge_set(s) == {
            (1, 0, 1.0, False),
            (3, 2, 1.0, False),
            (2, 0, 10.0, False),
        }
        assert s.representatives == {0}

    def test_three_group_layout_first_round_keeps_three(self):
        # three tight pairs plus four satellites: round one resolves
        # exactly the three reciprocal pairs
        pts = np.array(
            [
                [0, 0], [0, 1],
                [10, 0], [10, 1],
                [20, 0], [20, 1],
                [0, 3], [10, 3], [20, 3], [20, 5],
            ],
            dtype=float,
        )
        log = []
        ds_init(Dataset(points=pts), EUCLID, seed=0, iteration_log=log)
        assert len(log[0]) == 3

    def test_structure_properties_on_random_data(self):
        rng = np.random.default_rng(31)
        for trial in range(200):
            n = int(rng.integers(1, 60))
            d = int(rng.integers(1, 4))
            pts = rng.normal(size=(n, d))
            if trial % 5 == 0 and n > 2:
                pts[1] = pts[0]  # force duplicates now and then
            seed = int(rng.integers(0, 3))
            s = ds_init(Dataset(points=pts), EUCLID, seed=seed)
            assert s.edge_count() == n - 1
            assert len(s.representatives) == 1
            root = next(iter(s.representatives))
            assert s.out_edge(root) is None
            for node in range(n):
                if node != root:
                    assert s.has_edge(node)
            # single component and acyclic follow from n-1 edges plus
            # full connectivity
            assert connected_component_labels(s).max() == 0

    def test_same_seed_same_skeleton(self):
        rng = np.random.default_rng(37)
        pts = rng.integers(0, 4, size=(40, 2)).astype(float)  # tie-heavy
        ds = Dataset(points=pts)
        for seed in (0, 7, 123456789):
            a = ds_init(ds, EUCLID, seed=seed)
            b = ds_init(ds, EUCLID, seed=seed)
            assert a.to_snapshot() == b.to_snapshot()

    def test_cosine_and_random_metrics_build_valid_trees(self):
        rng = np.random.default_rng(41)
        ds = Dataset(points=rng.normal(size=(30, 3)))
        for m in (Metric.cosine(), Metric.random(9)):
            s = ds_init(ds, m)
            assert s.edge_count() == 29
            assert len(s.representatives) == 1


class TestDeduce:
    def make_session(self, labels=(0, 0, 0, 1), oracle=None):
        ds = ds_1d([0.0, 1.0, 2.0, 9.0], labels=list(labels))
        if oracle is None:
            oracle = GroundTruthOracle(ds.labels)
        return Session(ds, EUCLID, oracle)

    def test_must_link_chain_costs_nothing(self):
        s = self.make_session()
        s.cgraph.add_constraint(PairwiseConstraint(0, 1, MUST_LINK))
        s.cgraph.add_constraint(PairwiseConstraint(1, 2, MUST_LINK))
        before = s.query_count
        assert s.deduce(0, 2) is Verdict.MUST_LINK
        assert s.query_count == before

    def test_must_then_cannot(self):
        s = self.make_session()
        s.cgraph.add_constraint(PairwiseConstraint(0, 1, MUST_LINK))
        s.cgraph.add_constraint(PairwiseConstraint(1, 3, CANNOT_LINK))
        before = s.query_count
        assert s.deduce(0, 3) is Verdict.CANNOT_LINK
        assert s.query_count == before

    def test_two_cannot_links_are_not_deducible(self):
        s = self.make_session(labels=(0, 1, 0, 2))
        s.cgraph.add_constraint(PairwiseConstraint(0, 1, CANNOT_LINK))
        s.cgraph.add_constraint(PairwiseConstraint(1, 2, CANNOT_LINK))
        before = s.cgraph.edge_count
        v = s.deduce(0, 2)  # unknown, oracle queried: labels match
        assert v is Verdict.MUST_LINK
        assert s.cgraph.edge_count == before + 1
        assert s.query_count == 1

    def test_empty_graph_queries(self):
        s = self.make_session()
        assert s.deduce(0, 3) is Verdict.CANNOT_LINK
        assert s.query_count == 1
        assert s.cgraph.theta(0, 3) == CANNOT_LINK

    def test_matches_entailment_oracle_on_disciplined_graphs(self):
        rng = np.random.default_rng(43)
        mapping = {MUST_LINK: "must_link", CANNOT_LINK: "cannot_link", None: "unknown"}
        for _ in range(200):
            n = int(rng.integers(2, 13))
            g, edges = grow_disciplined_graph(n, int(rng.integers(0, 3 * n)), rng)
            for i in range(n):
                for j in range(i + 1, n):
                    want = entailment_verdict(n, edges, i, j)
                    assert mapping[g.path_verdict(i, j)] == want


class TestGoldenRun:
    def make(self, oracle_cls=GroundTruthOracle, budget=None):
        ds = ds_1d([0.0, 1.0, 10.0, 11.0], labels=[0, 0, 1, 1])
        oracle = oracle_cls(ds.labels) if oracle_cls is GroundTruthOracle else oracle_cls()
        return Session(ds, EUCLID, oracle, seed=0, budget=budget)

    def test_step_one_detaches_and_promotes(self):
        s = self.make()
        out = s.recons_step()
        assert out.kind is StepKind.NEW_REPRESENTATIVE
        assert out.node == 2
        assert s.query_count == 1
        assert s.skeleton.representatives == {0, 2}
        assert s.cluster_count() == 2

    def test_step_two_and_three_confirm(self):
        s = self.make()
        s.recons_step()
        out2 = s.recons_step()
        assert (out2.kind, out2.node, out2.parent) == (StepKind.EDGE_CONFIRMED, 1, 0)
        out3 = s.recons_step()
        assert (out3.kind, out3.node, out3.parent) == (StepKind.EDGE_CONFIRMED, 3, 2)
        out4 = s.recons_step()
        assert out4.kind is StepKind.ALL_CONFIRMED
        assert s.phase is Phase.DONE

    def test_full_run_counters_and_trace(self):
        s = self.make()
        res = s.run()
        assert res.labels.tolist() == [0, 0, 1, 1]
        assert res.ari == 1.0
        assert res.query_count == 3
        assert res.step_count == 3
        assert not res.budget_exhausted
        assert [(q, a) for q, a, _ in res.trace_rows] == [
            (0, 0.0),
            (1, 0.0),
            (2, 1.0),
            (3, 1.0),
        ]

    def test_single_class_confirms_every_edge(self):
        rng = np.random.default_rng(47)
        for n in (2, 5, 11, 20):
            pts = rng.normal(size=(n, 2))
            ds = Dataset(points=pts, labels=np.zeros(n, dtype=int))
            res = Session(ds, EUCLID, GroundTruthOracle(ds.labels)).run()
            assert res.query_count == n - 1
            assert res.step_count == n - 1
            assert res.labels.max() == 0
            assert res.ari == 1.0

    def test_single_point_run(self):
        ds = ds_1d([3.0], labels=[7])
        res = Session(ds, EUCLID, GroundTruthOracle(ds.labels)).run()
        assert res.query_count == 0
        assert res.step_count == 0
        assert res.ari == 1.0
        assert res.trace_rows == [(0, 1.0, 1)]


class TestReattach:
    def make(self, oracle=None):
        # one true-A pair sits across a B bridge: edges 0->2 and 4->2 are
        # both wrong, and the second detachment must-links representative 0
        ds = ds_1d([0.0, 1.0, 10.0, 11.0, 20.0, 21.0], labels=[0, 0, 1, 1, 0, 0])
        return Session(ds, EUCLID, oracle or GroundTruthOracle(ds.labels), seed=0)

    def test_initial_shape(self):
        s = self.make()
        assert edge_set(s.skeleton) == {
            (1, 0, 1.0, False),
            (3, 2, 1.0, False),
            (5, 4, 1.0, False),
            (0, 2, 10.0, False),
            (4, 2, 10.0, False),
        }
        assert s.skeleton.representatives == {2}

    def test_reattachment_step(self):
        s = self.make()
        out1 = s.recons_step()
        assert (out1.kind, out1.node) == (StepKind.NEW_REPRESENTATIVE, 0)
        out2 = s.recons_step()
        assert (out2.kind, out2.node, out2.parent) == (StepKind.REATTACHED, 4, 0)
        e = s.skeleton.out_edge(4)
        assert (e.target, e.distance, e.confirmed) == (0, 20.0, True)
        assert s.skeleton.representatives == {2, 0}
        # edge query, free parent rejection, then one paid candidate query
        assert s.query_count == 3

    def test_full_run(self):
        s = self.make()
        res = s.run()
        assert res.ari == 1.0
        assert res.labels.tolist() == [0, 0, 1, 1, 0, 0]
        assert res.query_count == 6
        assert res.step_count == 5


class TestBudget:
    def make(self, budget):
        ds = ds_1d([0.0, 1.0, 10.0, 11.0, 20.0, 21.0], labels=[0, 0, 1, 1, 2, 2])
        return Session(ds, EUCLID, GroundTruthOracle(ds.labels), seed=0, budget=budget)

    def test_budget_gates_step_starts_and_may_overshoot(self):
        s = self.make(budget=2)
        res = s.run()
        assert res.budget_exhausted
        # the second step was allowed to finish: one edge query plus one
        # paid candidate query beyond the budget
        assert res.query_count == 3
        assert s.phase is Phase.IDLE
        k = s.class_count
        assert res.query_count - s.budget <= k + 1

    def test_zero_budget_runs_nothing(self):
        s = self.make(budget=0)
        res = s.run()
        assert res.query_count == 0
        assert res.step_count == 0
        assert res.budget_exhausted

    def test_unbudgeted_completes(self):
        res = self.make(budget=None).run()
        assert res.ari == 1.0
        assert not res.budget_exhausted


class TestInteractive:
    def make_pair(self):
        ds = ds_1d([0.0, 1.0, 10.0, 11.0, 20.0, 21.0], labels=[0, 0, 1, 1, 0, 0])
        inter = Session(ds, EUCLID, InteractiveOracle(), seed=0)
        head = Session(ds, EUCLID, GroundTruthOracle(ds.labels), seed=0)
        return ds, inter, head

    def drive_from_labels(self, session, labels):
        answered = 0
        while True:
            session.advance()
            if session.phase is Phase.DONE:
                return answered
            pair = session.pending_pair()
            assert pair is not None
            i, j = pair
            theta = MUST_LINK if labels[i] == labels[j] else CANNOT_LINK
            session.resume_with_answer(theta)
            answered += 1

    def test_replay_matches_headless(self):
        ds, inter, head = self.make_pair()
        head_res = head.run()
        answered = self.drive_from_labels(inter, ds.labels)
        assert answered == head_res.query_count
        assert inter.skeleton.to_snapshot() == head.skeleton.to_snapshot()
        assert inter.trace_rows == head.trace_rows
        assert inter.step_count == head.step_count

    def test_phase_transitions(self):
        _, inter, _ = self.make_pair()
        out = inter.recons_step()
        assert out.kind is StepKind.SUSPENDED
        assert inter.phase is Phase.AWAIT_EDGE_VERDICT
        assert inter.pending_pair() == (0, 2)
        out = inter.resume_with_answer(CANNOT_LINK)
        # candidate scan resolves the parent for free and finishes the step
        assert out.kind is StepKind.NEW_REPRESENTATIVE
        assert inter.phase is Phase.IDLE

    def test_candidate_suspension(self):
        _, inter, _ = self.make_pair()
        inter.recons_step()
        inter.resume_with_answer(CANNOT_LINK)  # step 1 completes
        out = inter.recons_step()  # edge (4, 2) suspends
        assert out.kind is StepKind.SUSPENDED
        assert inter.pending_pair() == (4, 2)
        out = inter.resume_with_answer(CANNOT_LINK)
        # parent rejection is free; candidate 0 needs a human answer
        assert out.kind is StepKind.SUSPENDED
        assert inter.phase is Phase.AWAIT_CANDIDATE_VERDICT
        assert inter.pending_pair() == (4, 0)
        out = inter.resume_with_answer(MUST_LINK)
        assert (out.kind, out.node, out.parent) == (StepKind.REATTACHED, 4, 0)

    def test_pending_query_guards(self):
        _, inter, _ = self.make_pair()
        inter.recons_step()
        with pytest.raises(PendingQueryExists):
            inter.recons_step()
        with pytest.raises(PendingQueryExists):
            inter.deduce(1, 3)

    def test_no_pending_query(self):
        _, inter, _ = self.make_pair()
        with pytest.raises(NoPendingQuery):
            inter.resume_with_answer(MUST_LINK)

    def test_bad_theta(self):
        _, inter, _ = self.make_pair()
        inter.recons_step()
        with pytest.raises(ValueError):
            inter.resume_with_answer(2)

    def test_run_on_undriven_interactive_raises(self):
        _, inter, _ = self.make_pair()
        with pytest.raises(PendingQueryExists):
            inter.run()

    def test_accept_mid_run(self):
        _, inter, _ = self.make_pair()
        inter.recons_step()  # suspended with a pending pair
        labels = inter.accept()
        assert inter.phase is Phase.DONE
        assert inter.pending_pair() is None
        assert labels.tolist() == inter.accept().tolist()  # idempotent
        assert inter.query_count == 0


class TestTermination:
    def test_each_step_consumes_one_unconfirmed_edge(self):
        rng = np.random.default_rng(53)
        for _ in range(10):
            ds = random_clusters(rng, n=int(rng.integers(10, 60)), k=3, d=2)
            s = Session(ds, EUCLID, GroundTruthOracle(ds.labels))
            steps = 0
            while True:
                before = s.skeleton.unconfirmed_count()
                out = s.recons_step()
                if out.kind is StepKind.ALL_CONFIRMED:
                    break
                steps += 1
                assert s.skeleton.unconfirmed_count() == before - 1
            assert steps <= ds.n - 1
            assert s.current_ari() == 1.0

    def test_query_bound_audit_raises_on_violation(self):
        ds = ds_1d([0.0, 1.0], labels=[0, 1])
        s = Session(ds, EUCLID, GroundTruthOracle(ds.labels))
        s.query_count = 10**6
        with pytest.raises(AssertionError):
            s._audit_query_bound()


class TestHeapSelection:
    def test_pop_matches_vectorized_max_under_mutation(self):
        rng = np.random.default_rng(59)
        for _ in range(20):
            n = int(rng.integers(3, 40))
            ds = Dataset(points=rng.normal(size=(n, 2)))
            s = Session(ds, EUCLID, GroundTruthOracle(np.zeros(n, dtype=int)))
            sk = s.skeleton
            while True:
                # mutate some unconfirmed edges behind the heap's back
                for src in range(n):
                    e = sk.out_edge(src)
                    if e and not e.confirmed and rng.random() < 0.2:
                        if rng.random() < 0.5:
                            sk.confirm_edge(src)
                        else:
                            sk.delete_edge(src)
                want = max_suspicious_edge(sk)
                got = s._pop_suspicious()
                assert got == want
                if got is None:
                    break
                sk.confirm_edge(got.source)


class TestDeterminism:
    def test_identical_runs_are_identical(self):
        rng = np.random.default_rng(61)
        ds = random_clusters(rng, n=80, k=4, d=3)
        a = Session(ds, EUCLID, GroundTruthOracle(ds.labels), seed=5).run()
        b = Session(ds, EUCLID, GroundTruthOracle(ds.labels), seed=5).run()
        assert a.trace_rows == b.trace_rows
        assert a.labels.tolist() == b.labels.tolist()
        assert a.query_count == b.query_count

    def test_blob_runs_reach_perfect_clustering(self):
        rng = np.random.default_rng(67)
        for seed in (0, 1, 2):
            ds = random_clusters(rng, n=int(rng.integers(30, 120)), k=int(rng.integers(2, 5)), d=2)
            sess = Session(ds, EUCLID, GroundTruthOracle(ds.labels), seed=seed)
            res = sess.run()
            assert res.ari == 1.0
            assert res.query_count <= (1 + sess.initial_lambda * sess.class_count) * ds.n
