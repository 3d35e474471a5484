"""nDCG@10 scoring and the teacher-relative aggregation arithmetic.

Gain is linear (the raw grade, not 2^grade - 1) with a log2(rank + 1)
discount, matching the trec-eval lineage of BEIR tooling. Queries whose
judgments are all zero (or missing entirely) score 0 and are counted in
the average; that choice is ours, documented here, not taken from any
benchmark convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Qrels = dict  # query id -> {doc_id: grade >= 0}


def load_qrels(path) -> Qrels:
    """Tab-separated "query-id<TAB>corpus-id<TAB>score", optional header."""
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{n + 1}: expected 3 tab-separated fields")
            qid, doc_id, grade = parts
            if n == 0 and not _is_int(grade):
                continue  # header line
            grade = int(grade)
            if grade < 0:
                raise ValueError(f"{path}:{n + 1}: negative relevance grade")
            qrels.setdefault(qid, {})[doc_id] = grade
    return qrels


def _is_int(s: str) -> bool:
    try:
        int(s)
    except ValueError:
        return False
    return True


def ndcg_at_k(run_list, qrels_for_query: dict, k: int = 10) -> float:
    """nDCG at cutoff k for one ranked list.

    ``run_list`` holds (doc_id, score) pairs or bare doc ids, best first,
    already deduplicated. Missing judgments count as grade 0.
    """
    doc_ids = [item[0] if isinstance(item, tuple) else item for item in run_list]
    if len(set(doc_ids)) != len(doc_ids):
        raise ValueError("ranked list contains duplicate doc ids")
    ideal = sorted(qrels_for_query.values(), reverse=True)[:k]
    idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal))
    if idcg == 0.0:
        return 0.0
    dcg = sum(
        qrels_for_query.get(doc_id, 0) / math.log2(i + 2)
        for i, doc_id in enumerate(doc_ids[:k])
    )
    return dcg / idcg


def evaluate_run(run: dict, qrels: Qrels, k: int = 10) -> float:
    """Arithmetic mean of per-query nDCG@k over the run's queries."""
    if not run:
        raise ValueError("cannot evaluate an empty run")
    total = 0.0
    for qid, ranked in run.items():
        total += ndcg_at_k(ranked, qrels.get(qid, {}), k)
    return total / len(run)


def relative_change(student_metric: float, teacher_metric: float) -> float:
    """(student - teacher) / teacher, signed."""
    if teacher_metric <= 0:
        raise ValueError(f"teacher metric must be positive, got {teacher_metric}")
    return (student_metric - teacher_metric) / teacher_metric


def aggregate(changes) -> tuple[float, float]:
    """Unweighted mean of per-dataset relative changes, plus retention.

    Retention is 1 + mean change, the "student keeps X% of the teacher"
    framing.
    """
    changes = [float(c) for c in changes]
    if not changes:
        raise ValueError("aggregate requires at least one relative change")
    mean = sum(changes) / len(changes)
    return mean, 1.0 + mean


@dataclass
class MetricsRow:
    dataset: str
    teacher_ndcg: float
    student_ndcg: float

    @property
    def rel_change(self) -> float:
        return relative_change(self.student_ndcg, self.teacher_ndcg)


@dataclass
class MetricsReport:
    rows: list

    @property
    def average_change(self) -> float:
        return aggregate([r.rel_change for r in self.rows])[0]

    @property
    def retention(self) -> float:
        return aggregate([r.rel_change for r in self.rows])[1]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("dataset,teacher_ndcg10,student_ndcg10,rel_change\n")
            for r in self.rows:
                f.write(f"{r.dataset},{r.teacher_ndcg!r},{r.student_ndcg!r},{r.rel_change!r}\n")
            f.write(f"AVERAGE,,,{self.average_change!r}\n")
            f.write(f"RETENTION,,,{self.retention!r}\n")

    def to_text(self) -> str:
        lines = [f"{'dataset':<16}{'teacher':>10}{'student':>10}{'change':>10}"]
        for r in self.rows:
            lines.append(
                f"{r.dataset:<16}{r.teacher_ndcg:>10.4f}{r.student_ndcg:>10.4f}"
                f"{r.rel_change:>+10.2%}"
            )
        lines.append(f"{'average change':<36}{self.average_change:>+10.2%}")
        lines.append(f"{'retention':<36}{self.retention:>10.2%}")
        return "\n".join(lines)
