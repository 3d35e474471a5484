"""nDCG@k, aggregation arithmetic, and qrels/report I/O."""

import math

import numpy as np
import pytest

from adec.evaluation import (
    MetricsReport,
    MetricsRow,
    aggregate,
    evaluate_run,
    load_qrels,
    ndcg_at_k,
    relative_change,
)

# Relative nDCG@10 changes (as fractions) of a distilled single-layer
# student across the fifteen benchmark datasets used by the reference
# evaluation; the aggregate of this column is the headline number the
# arithmetic below must reproduce.
REFERENCE_DELTAS = [
    -0.0658,  # msmarco
    -0.0758,  # trec-covid
    -0.0784,  # nfcorpus
    -0.0794,  # nq
    -0.2506,  # hotpotqa
    -0.0984,  # fiqa
    +0.1433,  # arguana
    -0.0222,  # touche
    -0.1702,  # scidocs
    -0.1554,  # cqadupstack
    -0.0359,  # quora
    -0.1806,  # fever
    -0.1977,  # climate-fever
    -0.1109,  # scifact
    -0.1241,  # dbpedia
]


def test_single_relevant_at_rank_two():
    # DCG = 1/log2(3), ideal = 1/log2(2) = 1
    run = [("a", 5.0), ("b", 4.0)]
    qrels = {"b": 1}
    assert ndcg_at_k(run, qrels, k=10) == pytest.approx(1.0 / math.log2(3), abs=1e-12)


def test_perfect_ranking_scores_one():
    run = [("a", 3.0), ("b", 2.0), ("c", 1.0)]
    qrels = {"a": 2, "b": 1, "c": 1}
    assert ndcg_at_k(run, qrels, k=10) == pytest.approx(1.0, abs=1e-12)


def test_graded_relevance_hand_computed():
    # ranking: d1(grade 0), d2(grade 2), d3(grade 1)
    # DCG  = 0 + 2/log2(3) + 1/log2(4)
    # IDCG = 2/log2(2) + 1/log2(3) + 0
    run = [("d1", 9.0), ("d2", 8.0), ("d3", 7.0)]
    qrels = {"d2": 2, "d3": 1}
    dcg = 2.0 / math.log2(3) + 1.0 / math.log2(4)
    idcg = 2.0 + 1.0 / math.log2(3)
    assert ndcg_at_k(run, qrels, k=10) == pytest.approx(dcg / idcg, abs=1e-12)


def test_zero_relevance_query_scores_zero():
    assert ndcg_at_k([("a", 1.0)], {}, k=10) == 0.0
    assert ndcg_at_k([("a", 1.0)], {"other": 1}, k=10) == 0.0


def test_cutoff_applies_to_both_dcg_and_ideal():
    # relevant doc at rank 11 contributes nothing at k=10
    run = [(f"d{i}", 100.0 - i) for i in range(11)]
    qrels = {"d10": 3}
    assert ndcg_at_k(run, qrels, k=10) == 0.0
    assert ndcg_at_k(run, qrels, k=11) == pytest.approx(
        (3.0 / math.log2(12)) / 3.0, abs=1e-12
    )


def test_bare_doc_ids_accepted():
    assert ndcg_at_k(["a", "b"], {"a": 1}, k=10) == pytest.approx(1.0)


def test_duplicate_docs_in_run_rejected():
    with pytest.raises(ValueError):
        ndcg_at_k([("a", 2.0), ("a", 1.0)], {"a": 1}, k=10)


def test_ndcg_matches_brute_force_oracle():
    """100 randomized instances against a from-scratch implementation.

    The oracle below shares no code with the library: explicit loops,
    explicit ideal ordering by grade, linear gain, log2(i + 2) discounts.
    """

    def oracle(ranked_ids, grades, k):
        dcg = 0.0
        for i, doc in enumerate(ranked_ids[:k]):
            dcg += grades.get(doc, 0) / math.log2(i + 2)
        ideal = sorted(grades.values(), reverse=True)[:k]
        idcg = 0.0
        for i, g in enumerate(ideal):
            idcg += g / math.log2(i + 2)
        if idcg == 0.0:
            return 0.0
        return dcg / idcg

    rng = np.random.default_rng(77)
    for trial in range(100):
        n_docs = int(rng.integers(1, 40))
        ids = [f"d{i}" for i in range(n_docs)]
        # scores with frequent ties; stable sort equals the library's order
        scores = rng.integers(0, 5, size=n_docs).astype(np.float32)
        order = sorted(range(n_docs), key=lambda i: (-scores[i], ids[i]))
        ranked = [(ids[i], float(scores[i])) for i in order]
        graded = {f"d{i}": int(g) for i, g in
                  enumerate(rng.integers(0, 4, size=n_docs)) if g > 0}
        k = int(rng.integers(1, 15))
        ours = ndcg_at_k(ranked, graded, k=k)
        ref = oracle([doc for doc, _ in ranked], graded, k)
        assert ours == pytest.approx(ref, abs=1e-9), f"trial {trial}"


def test_evaluate_run_means_over_run_queries():
    run = {
        "q1": [("a", 2.0)],   # ndcg 1
        "q2": [("b", 2.0)],   # ndcg 0 (no qrels for q2)
    }
    qrels = {"q1": {"a": 1}}
    assert evaluate_run(run, qrels, k=10) == pytest.approx(0.5)


def test_evaluate_run_empty():
    with pytest.raises(ValueError):
        evaluate_run({}, {"q": {"a": 1}}, k=10)


def test_relative_change():
    assert relative_change(0.45, 0.5) == pytest.approx(-0.1)
    assert relative_change(0.55, 0.5) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        relative_change(0.4, 0.0)


def test_reference_column_aggregate():
    """Average of the fifteen per-dataset changes is -10.01%, and the
    corresponding retention is 89.99%, to within 0.01 percentage points."""
    mean_change, retention = aggregate(REFERENCE_DELTAS)
    assert mean_change == pytest.approx(-0.1001, abs=1e-4)
    assert retention == pytest.approx(0.8999, abs=1e-4)


def test_aggregate_requires_values():
    with pytest.raises(ValueError):
        aggregate([])


def test_load_qrels_with_and_without_header(tmp_path):
    with_header = tmp_path / "qrels_a.tsv"
    with_header.write_text("query-id\tcorpus-id\tscore\nq1\td1\t2\nq1\td2\t0\nq2\td1\t1\n")
    qrels = load_qrels(with_header)
    assert qrels == {"q1": {"d1": 2, "d2": 0}, "q2": {"d1": 1}}

    bare = tmp_path / "qrels_b.tsv"
    bare.write_text("q1\td1\t1\n")
    assert load_qrels(bare) == {"q1": {"d1": 1}}


def test_load_qrels_rejects_negative_grades(tmp_path):
    path = tmp_path / "qrels.tsv"
    path.write_text("q1\td1\t-1\n")
    with pytest.raises(ValueError):
        load_qrels(path)


def test_metrics_report_csv_and_text(tmp_path):
    rows = [
        MetricsRow(dataset="set-a", teacher_ndcg=0.5, student_ndcg=0.45),
        MetricsRow(dataset="set-b", teacher_ndcg=0.4, student_ndcg=0.44),
    ]
    report = MetricsReport(rows=rows)
    assert rows[0].rel_change == pytest.approx(-0.1)
    assert report.average_change == pytest.approx((-0.1 + 0.1) / 2)
    assert report.retention == pytest.approx(1.0)

    path = tmp_path / "report.csv"
    report.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("dataset,")
    assert lines[1].startswith("set-a,")
    assert any(line.startswith("AVERAGE") for line in lines)
    assert any(line.startswith("RETENTION") for line in lines)
    text = report.to_text()
    assert "set-b" in text
