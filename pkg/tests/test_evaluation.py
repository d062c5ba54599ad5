import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sourcequote.errors import MissingClusterModel, TooFewSources, UnknownQuery
from sourcequote.evaluation import (
    OVERFLOW_CLUSTER,
    Qrels,
    average_precision,
    build_cluster_model,
    evaluate_run,
    lloyd_kmeans,
    load_qrels,
    ndcg_at_k,
    read_run,
    same_cluster,
    save_qrels,
    span_scores,
    write_run,
)


class TestSpanScores:
    def test_identity(self):
        assert span_scores("John Smith", "John Smith") == (1, 1.0)

    def test_partial_overlap(self):
        em, f1 = span_scores("John", "John Smith")
        assert em == 0
        assert f1 == pytest.approx(2 / 3)

    def test_empty_prediction(self):
        assert span_scores("", "John") == (0, 0.0)

    def test_normalization_folds_case_punct_articles(self):
        em, f1 = span_scores("the  Vaccine, works!", "vaccine works")
        assert (em, f1) == (1, 1.0)

    def test_bag_semantics(self):
        # repeated token counts once against a single gold occurrence
        _, f1 = span_scores("risk risk", "risk")
        assert f1 == pytest.approx(2 * (1 / 2) * 1.0 / (1 / 2 + 1.0))


class TestAveragePrecision:
    def test_relevant_at_rank_one(self):
        assert average_precision(["a", "b"], {"a"}) == 1.0

    def test_relevant_at_rank_four(self):
        assert average_precision(["x", "y", "z", "a"], {"a"}) == 0.25

    def test_map_is_mean(self):
        aps = [
            average_precision(["a"], {"a"}),
            average_precision(["x", "y", "z", "a"], {"a"}),
        ]
        assert sum(aps) / 2 == 0.625

    def test_no_relevant_retrieved(self):
        assert average_precision(["x", "y"], {"a"}) == 0.0

    def test_multi_relevant(self):
        # hits at ranks 1 and 3 of a 3-relevant set
        ap = average_precision(["a", "x", "b"], {"a", "b", "c"})
        assert ap == pytest.approx((1.0 + 2 / 3) / 3)

    def test_reciprocal_rank_identity(self):
        ranked = [f"e{i}" for i in range(100)]
        for rank in range(1, 101):
            relevant = {f"e{rank - 1}"}
            assert average_precision(ranked, relevant) == pytest.approx(1.0 / rank)


class TestNdcg:
    def test_rank_one_is_ideal(self):
        assert ndcg_at_k(["a", "x", "y"], {"a"}, 5) == 1.0

    def test_rank_three_discount(self):
        value = ndcg_at_k(["x", "y", "a"], {"a"}, 10)
        assert value == pytest.approx(1.0 / math.log2(3), abs=1e-4)
        assert value == pytest.approx(0.6309, abs=1e-4)

    def test_no_relevant_in_top_k(self):
        assert ndcg_at_k(["x", "y"], {"a"}, 2) == 0.0

    def test_rank_two_undiscounted_denominator(self):
        # log2(2) == 1, so rank 2 also carries full gain
        assert ndcg_at_k(["x", "a"], {"a"}, 5) == 1.0

    @given(
        rel_positions=st.sets(st.integers(min_value=0, max_value=19), min_size=1),
        swap=st.integers(min_value=1, max_value=19),
        k=st.sampled_from([5, 10]),
    )
    @settings(max_examples=60, deadline=None)
    def test_promoting_a_relevant_item_never_hurts(self, rel_positions, swap, k):
        ranked = [f"e{i}" for i in range(20)]
        relevant = {f"e{i}" for i in rel_positions}
        before = ndcg_at_k(ranked, relevant, k)
        if ranked[swap] in relevant and ranked[swap - 1] not in relevant:
            promoted = ranked.copy()
            promoted[swap - 1], promoted[swap] = promoted[swap], promoted[swap - 1]
            assert ndcg_at_k(promoted, relevant, k) >= before - 1e-12


class TestKmeans:
    def test_separable_groups_recovered(self):
        rng = np.random.default_rng(0)
        a = rng.normal(0.0, 0.05, size=(20, 3))
        b = rng.normal(5.0, 0.05, size=(20, 3))
        X = np.vstack([a, b])
        _, labels, _ = lloyd_kmeans(X, k=2, seed=1)
        assert len(set(labels[:20])) == 1
        assert len(set(labels[20:])) == 1
        assert labels[0] != labels[-1]

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        X = rng.random((50, 4))
        c1, l1, _ = lloyd_kmeans(X, k=5, seed=9)
        c2, l2, _ = lloyd_kmeans(X, k=5, seed=9)
        np.testing.assert_array_equal(c1, c2)
        np.testing.assert_array_equal(l1, l2)

    def test_objective_non_increasing(self):
        rng = np.random.default_rng(2)
        X = rng.random((80, 6))
        _, _, history = lloyd_kmeans(X, k=6, seed=3)
        for earlier, later in zip(history, history[1:]):
            assert later <= earlier * (1 + 1e-9) + 1e-9


class TestClusterModel:
    def make_sources(self):
        sources = {}
        for group in range(4):
            for i in range(10):
                sources[f"g{group}_s{i}"] = [f"cat{group}a", f"cat{group}b"]
        return sources

    def test_indicator_embedding_two_ones(self):
        model = build_cluster_model(
            {"s": ["Person", "Scientist"], **{f"x{i}": ["Person"] for i in range(3)}},
            m=10, k=2, seed=0,
        )
        assert set(model.category_vocab) == {"Person", "Scientist"}

    def test_groups_recovered(self):
        model = build_cluster_model(self.make_sources(), m=100, k=4, seed=0)
        for group in range(4):
            ids = {model.assignment[f"g{group}_s{i}"] for i in range(10)}
            assert len(ids) == 1
        assert len({model.assignment[f"g{g}_s0"] for g in range(4)}) == 4

    def test_too_few_sources(self):
        with pytest.raises(TooFewSources):
            build_cluster_model({"a": ["x"], "b": ["x"]}, m=10, k=5, seed=0)

    def test_overflow_sources_match_only_themselves(self):
        sources = self.make_sources()
        sources["lonely"] = []
        model = build_cluster_model(sources, m=100, k=4, seed=0)
        assert model.assignment["lonely"] == OVERFLOW_CLUSTER
        assert same_cluster(model, "lonely", "lonely")
        assert not same_cluster(model, "lonely", "g0_s0")

    def test_source_shares_its_own_cluster(self):
        model = build_cluster_model(self.make_sources(), m=100, k=4, seed=0)
        assert same_cluster(model, "g1_s1", "g1_s1")
        assert same_cluster(model, "g1_s1", "g1_s2")
        assert not same_cluster(model, "g1_s1", "g2_s1")

    def test_unknown_entity_matches_only_itself(self):
        model = build_cluster_model(self.make_sources(), m=100, k=4, seed=0)
        assert same_cluster(model, "never_seen", "never_seen")
        assert not same_cluster(model, "never_seen", "g0_s0")


class TestEvaluateRun:
    def qrels(self):
        return Qrels(truth={"q1": "a", "q2": "b"})

    def test_perfect_run(self):
        run = {"q1": ["a", "x"], "q2": ["b", "y"]}
        report = evaluate_run(run, self.qrels())
        assert report.map_strict == 1.0
        assert report.ndcg5_strict == 1.0
        assert report.ndcg10_strict == 1.0
        assert report.map_relaxed is None

    def test_relaxed_hit_without_strict(self):
        sources = {f"s{i}": ["catA"] for i in range(5)}
        sources.update({f"t{i}": ["catB"] for i in range(5)})
        model = build_cluster_model(sources, m=10, k=2, seed=0)
        qrels = Qrels(truth={"q": "s0"})
        run = {"q": ["s1", "x", "y"]}  # same cluster as s0 at rank 1
        report = evaluate_run(run, qrels, cluster_model=model)
        assert report.per_query["q"]["ap_strict"] == 0.0
        assert report.per_query["q"]["ap_relaxed"] > 0.0

    def test_relaxed_never_below_strict(self):
        sources = {f"s{i}": ["catA"] for i in range(5)}
        model = build_cluster_model(sources, m=10, k=1, seed=0)
        qrels = Qrels(truth={"q": "s0"})
        for ranked in (["s0"], ["s1", "s0"], ["x", "s1"], ["x"]):
            report = evaluate_run({"q": ranked}, qrels, cluster_model=model)
            row = report.per_query["q"]
            assert row["ap_relaxed"] >= row["ap_strict"]
            assert row["ndcg5_relaxed"] >= row["ndcg5_strict"]

    def test_unknown_query(self):
        with pytest.raises(UnknownQuery):
            evaluate_run({"mystery": ["a"]}, self.qrels())

    def test_relaxed_requested_without_model(self):
        with pytest.raises(MissingClusterModel):
            evaluate_run({"q1": ["a"]}, self.qrels(), relaxed=True)

    def test_strict_path_matches_general_metrics(self):
        run = {"q1": ["x", "a", "y"], "q2": ["y", "x", "z", "b"]}
        report = evaluate_run(run, self.qrels())
        for qid, ranked in run.items():
            true = self.qrels()[qid]
            row = report.per_query[qid]
            assert row["ap_strict"] == average_precision(ranked, {true})
            assert row["ndcg5_strict"] == ndcg_at_k(ranked, {true}, 5)
            assert row["ndcg10_strict"] == ndcg_at_k(ranked, {true}, 10)


class TestFiles:
    def test_qrels_round_trip(self, tmp_path):
        qrels = Qrels(truth={"q1": "entity/A", "q2": "entity/B"})
        path = tmp_path / "qrels.txt"
        save_qrels(qrels, path)
        assert load_qrels(path) == qrels
        line = path.read_text().splitlines()[0].split("\t")
        assert line == ["q1", "0", "entity/A", "1"]

    def test_run_round_trip(self, tmp_path):
        run = {"q1": [("a", 2.5), ("b", 1.0)], "q2": [("c", 9.0)]}
        path = tmp_path / "run.txt"
        write_run(run, path, tag="test")
        loaded = read_run(path)
        assert loaded == {"q1": ["a", "b"], "q2": ["c"]}
        fields = path.read_text().splitlines()[0].split("\t")
        assert fields == ["q1", "a", "1", "2.500000", "test"]
