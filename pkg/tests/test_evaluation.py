import numpy as np
import pytest

from openvocab.errors import EvaluationError, ParseError
from openvocab.evaluation import (
    JudgmentPool,
    average_precision,
    evaluate_run,
    paired_permutation_test,
    read_pool,
    reciprocal_rank,
)


def judged(*labels):
    """Ranking e1..en with the given 0/1 labels, as (ranking, judgments)."""
    ranking = [f"e{i}" for i in range(len(labels))]
    judgments = {f"e{i}": bool(v) for i, v in enumerate(labels)}
    return ranking, judgments


class TestAveragePrecision:
    def test_1010_paper_and_standard(self):
        ranking, judgments = judged(1, 0, 1, 0)
        assert average_precision(ranking, judgments, "paper") == pytest.approx(5 / 12)
        assert average_precision(ranking, judgments, "standard") == pytest.approx(5 / 6)

    def test_perfect_ranking_standard_is_one(self):
        ranking, judgments = judged(1, 1, 1)
        assert average_precision(ranking, judgments, "standard") == 1.0

    def test_no_correct_answers(self):
        ranking, judgments = judged(0, 0, 0)
        assert average_precision(ranking, judgments, "paper") == 0.0
        assert average_precision(ranking, judgments, "standard") == 0.0

    def test_empty_ranking_is_zero(self):
        assert average_precision([], {}, "paper") == 0.0
        assert average_precision([], {"e": True}, "standard", annotated_correct=1) == 0.0

    def test_standard_zero_annotated_flagged_zero(self):
        ranking, judgments = judged(0)
        assert average_precision(ranking, judgments, "standard", annotated_correct=0) == 0.0

    def test_paper_at_most_standard_when_m_exceeds_n(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            labels = [int(rng.random() < 0.4) for _ in range(rng.integers(1, 20))]
            ranking, judgments = judged(*labels)
            n = sum(labels)
            if n == 0 or len(labels) < n:
                continue
            paper = average_precision(ranking, judgments, "paper")
            standard = average_precision(ranking, judgments, "standard")
            assert paper <= standard + 1e-12

    def test_tail_of_incorrect_entities_is_invisible(self):
        ranking, judgments = judged(1, 0, 1)
        base_ap = average_precision(ranking, judgments, "standard")
        base_rr = reciprocal_rank(ranking, judgments)
        longer = ranking + ["x1", "x2", "x3"]
        assert average_precision(longer, judgments, "standard") == pytest.approx(base_ap)
        assert reciprocal_rank(longer, judgments) == base_rr

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            average_precision(["a"], {"a": True}, "bogus")


class TestReciprocalRank:
    def test_first_rank(self):
        ranking, judgments = judged(1, 0)
        assert reciprocal_rank(ranking, judgments) == 1.0

    def test_second_rank(self):
        ranking, judgments = judged(0, 1)
        assert reciprocal_rank(ranking, judgments) == 0.5

    def test_none_correct(self):
        ranking, judgments = judged(0, 0)
        assert reciprocal_rank(ranking, judgments) == 0.0


def pool_from(table):
    pool = JudgmentPool()
    for qid, per_query in table.items():
        pool.judgments[qid] = dict(per_query)
    return pool


class TestEvaluateRun:
    def test_map_is_mean(self):
        pool = pool_from({"q1": {"a": True, "x": False}, "q2": {"b": True, "c": True}})
        run = {"q1": ["x", "a"], "q2": ["b", "z", "c"]}
        report = evaluate_run(run, pool, "standard")
        ap = report.ap_by_query()
        assert ap["q1"] == pytest.approx(0.5)
        assert ap["q2"] == pytest.approx((1.0 + 2 / 3) / 2)
        assert report.map == pytest.approx((ap["q1"] + ap["q2"]) / 2)

    def test_w_map_weighted_mean(self):
        # APs 0.2 and 0.4 with annotated counts 1 and 3 -> (0.2 + 1.2)/4
        pool = pool_from(
            {"q1": {"a": True}, "q2": {"b": True, "c": True, "d": True}}
        )
        run = {
            "q1": ["x", "y", "z", "v", "a"],  # standard AP = (1/5)/1 = 0.2
            "q2": ["b", "x", "y", "z", "c", "w", "u", "t", "s", "d"],
        }
        report = evaluate_run(run, pool, "standard")
        ap = report.ap_by_query()
        assert ap["q1"] == pytest.approx(0.2)
        assert ap["q2"] == pytest.approx((1 + 2 / 5 + 3 / 10) / 3)
        expected = (ap["q1"] * 1 + ap["q2"] * 3) / 4
        assert report.w_map == pytest.approx(expected)

    def test_unknown_query_id_is_error(self):
        pool = pool_from({"q1": {"a": True}})
        with pytest.raises(EvaluationError, match="q9"):
            evaluate_run({"q9": ["a"]}, pool)

    def test_missing_query_counts_as_empty_ranking(self):
        pool = pool_from({"q1": {"a": True}, "q2": {"b": True}})
        report = evaluate_run({"q1": ["a"]}, pool, "standard")
        assert report.ap_by_query()["q2"] == 0.0
        assert report.map == pytest.approx(0.5)

    def test_unjudged_tally(self):
        pool = pool_from({"q1": {"a": True, "b": False}})
        report = evaluate_run({"q1": ["a", "zz", "b", "yy"]}, pool)
        assert report.per_query[0].unjudged == 2

    def test_matches_brute_force_on_random_pools(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            n_queries = int(rng.integers(1, 12))
            pool = JudgmentPool()
            run = {}
            for q in range(n_queries):
                qid = f"q{q}"
                entities = [f"e{i}" for i in range(int(rng.integers(1, 15)))]
                pool.judgments[qid] = {
                    e: bool(rng.random() < 0.4)
                    for e in entities
                    if rng.random() < 0.8
                }
                if not pool.judgments[qid]:
                    pool.judgments[qid] = {"e0": False}
                returned = [e for e in entities if rng.random() < 0.7]
                rng.shuffle(returned)
                run[qid] = returned
            mode = "paper" if rng.random() < 0.5 else "standard"
            report = evaluate_run(run, pool, mode)

            # brute force: recompute every metric with naive loops
            aps, rrs, ns = [], [], []
            for qid in sorted(pool.judgments):
                ranking = run.get(qid, [])
                correct = {e for e, v in pool.judgments[qid].items() if v}
                hits = 0
                ap = 0.0
                rr = 0.0
                for k, e in enumerate(ranking, start=1):
                    if e in correct:
                        hits += 1
                        ap += hits / k
                        if rr == 0.0:
                            rr = 1.0 / k
                denom = len(ranking) if mode == "paper" else len(correct)
                aps.append(ap / denom if denom else 0.0)
                rrs.append(rr)
                ns.append(len(correct))
            assert report.map == pytest.approx(sum(aps) / len(aps))
            assert report.mrr == pytest.approx(sum(rrs) / len(rrs))
            total = sum(ns)
            if total:
                expected = sum(a * n for a, n in zip(aps, ns)) / total
                assert report.w_map == pytest.approx(expected)

    def test_report_text_layout(self):
        pool = pool_from({"q1": {"a": True}})
        report = evaluate_run({"q1": ["a"]}, pool)
        text = report.to_text()
        assert "ap_mode\tpaper" in text
        assert "q1\t1.000000\t1.000000\t1\t1\t0" in text
        assert "MAP\t1.000000" in text

    def test_empty_pool_rejected(self):
        with pytest.raises(EvaluationError):
            evaluate_run({}, JudgmentPool())


class TestPoolFile:
    def test_read(self, tmp_path):
        path = tmp_path / "pool.tsv"
        path.write_text("q1\ta\t1\nq1\tb\t0\nq2\tc\t1\n")
        pool = read_pool(str(path))
        assert pool.is_correct("q1", "a")
        assert not pool.is_correct("q1", "b")
        assert pool.correct_count("q2") == 1
        assert not pool.is_correct("q1", "unseen")

    def test_conflicting_duplicate_rejected(self, tmp_path):
        path = tmp_path / "pool.tsv"
        path.write_text("q1\ta\t1\nq1\ta\t0\n")
        with pytest.raises(ParseError):
            read_pool(str(path))

    def test_consistent_duplicate_allowed(self, tmp_path):
        path = tmp_path / "pool.tsv"
        path.write_text("q1\ta\t1\nq1\ta\t1\n")
        assert read_pool(str(path)).correct_count("q1") == 1

    @pytest.mark.parametrize("line", ["q1\ta", "q1\ta\t2", "q1\ta\tyes"])
    def test_malformed_rejected(self, tmp_path, line):
        path = tmp_path / "pool.tsv"
        path.write_text(line + "\n")
        with pytest.raises(ParseError):
            read_pool(str(path))


class TestPermutationTest:
    def test_identical_lists_give_one(self):
        a = [0.2, 0.4, 0.6]
        assert paired_permutation_test(a, list(a)) == 1.0

    def test_uniform_dominance_ten_queries(self):
        b = [0.1 * i for i in range(10)]
        a = [x + 0.3 for x in b]
        assert paired_permutation_test(a, b) == pytest.approx(2 / 1024)

    def test_single_query_is_one(self):
        assert paired_permutation_test([0.9], [0.1]) == 1.0

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(14)
        for n in (5, 10, 20):
            a = list(rng.random(n))
            b = list(rng.random(n))
            assert paired_permutation_test(a, b, seed=5) == paired_permutation_test(
                b, a, seed=5
            )

    def test_monte_carlo_includes_observed(self):
        rng = np.random.default_rng(15)
        n = 20  # beyond the exact-enumeration limit
        b = list(rng.random(n))
        a = [x + 1.0 for x in b]
        p = paired_permutation_test(a, b, iterations=999, seed=1)
        assert p >= 1 / 1000
        assert p < 0.05

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            paired_permutation_test([0.1], [0.1, 0.2])
