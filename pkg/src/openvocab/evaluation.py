"""Pooled ranking evaluation: AP, RR, MAP, W-MAP, MRR, permutation test.

Judgments come from a pool file (``queryId<TAB>entityName<TAB>{0|1}``); any
returned entity absent from the pool counts as incorrect and is tallied as
unjudged.  AP has two normalizations: ``paper`` divides the precision sum by
the number of returned answers, ``standard`` by the number of annotated
correct answers (the reading under which AP is the area under the
precision-recall curve).  W-MAP weights each query's AP by its annotated
correct count and normalizes by the total so it stays in [0, 1].

The report is a tabbed text document: one row per query, then an aggregate
block; all floats printed to 6 decimals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, ParseError

AP_MODES = ("paper", "standard")
DEFAULT_AP_MODE = "paper"

EXACT_PERMUTATION_LIMIT = 12  # 2^12 sign assignments; enumerate exactly
_TIE_EPS = 1e-12


@dataclass
class JudgmentPool:
    """(query, entity) -> correctness; anything unjudged is incorrect."""

    judgments: dict[str, dict[str, bool]] = field(default_factory=dict)

    @property
    def query_ids(self) -> list[str]:
        return sorted(self.judgments)

    def correct_count(self, query_id: str) -> int:
        return sum(self.judgments.get(query_id, {}).values())

    def is_correct(self, query_id: str, entity: str) -> bool:
        return self.judgments.get(query_id, {}).get(entity, False)

    def is_judged(self, query_id: str, entity: str) -> bool:
        return entity in self.judgments.get(query_id, {})


def read_pool(path: str) -> JudgmentPool:
    pool = JudgmentPool()
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3 or fields[2] not in ("0", "1"):
                raise ParseError(
                    f"pool file line {lineno}: expected queryId<TAB>entity<TAB>0|1"
                )
            qid, entity, label = fields
            value = label == "1"
            per_query = pool.judgments.setdefault(qid, {})
            if entity in per_query and per_query[entity] != value:
                raise ParseError(
                    f"pool file line {lineno}: conflicting judgment for "
                    f"({qid!r}, {entity!r})"
                )
            per_query[entity] = value
    return pool


def average_precision(
    ranking: list[str],
    judgments: dict[str, bool],
    mode: str = DEFAULT_AP_MODE,
    annotated_correct: int | None = None,
) -> float:
    """(1/m) sum over correct ranks k of Prec(k), with m the returned count in
    paper mode or the annotated correct count in standard mode.

    ``annotated_correct`` overrides the count derived from ``judgments``
    (pool-level counts can exceed what a single ranking contains).  Empty
    rankings, and standard mode with zero annotated correct answers, give 0.
    """
    if mode not in AP_MODES:
        raise ValueError(f"ap mode must be one of {AP_MODES}, got {mode!r}")
    if annotated_correct is None:
        annotated_correct = sum(judgments.values())
    hits = 0
    precision_sum = 0.0
    for k, entity in enumerate(ranking, start=1):
        if judgments.get(entity, False):
            hits += 1
            precision_sum += hits / k
    denominator = len(ranking) if mode == "paper" else annotated_correct
    if denominator == 0:
        return 0.0
    return precision_sum / denominator


def reciprocal_rank(ranking: list[str], judgments: dict[str, bool]) -> float:
    """1/rank of the first correct prediction, 0 when none is returned."""
    for k, entity in enumerate(ranking, start=1):
        if judgments.get(entity, False):
            return 1.0 / k
    return 0.0


@dataclass
class QueryResult:
    query_id: str
    ap: float
    rr: float
    returned: int
    annotated_correct: int
    unjudged: int


@dataclass
class EvaluationReport:
    ap_mode: str
    per_query: list[QueryResult]
    map: float
    w_map: float
    mrr: float

    def ap_by_query(self) -> dict[str, float]:
        return {row.query_id: row.ap for row in self.per_query}

    def to_text(self) -> str:
        lines = ["# evaluation report", f"ap_mode\t{self.ap_mode}"]
        lines.append("# query\tap\trr\treturned\tannotated_correct\tunjudged")
        for row in self.per_query:
            lines.append(
                f"{row.query_id}\t{row.ap:.6f}\t{row.rr:.6f}\t{row.returned}\t"
                f"{row.annotated_correct}\t{row.unjudged}"
            )
        lines.append("# aggregates")
        lines.append(f"MAP\t{self.map:.6f}")
        lines.append(f"W-MAP\t{self.w_map:.6f}")
        lines.append(f"MRR\t{self.mrr:.6f}")
        lines.append(f"queries\t{len(self.per_query)}")
        return "\n".join(lines) + "\n"


def evaluate_run(
    run: dict[str, list[str]], pool: JudgmentPool, mode: str = DEFAULT_AP_MODE
) -> EvaluationReport:
    """Score a run against the pool over the pool's whole query universe.

    A pool query missing from the run is an empty ranking (AP = RR = 0); a
    run query missing from the pool is an error.
    """
    unknown = sorted(set(run) - set(pool.judgments))
    if unknown:
        raise EvaluationError(f"run references unknown query ids: {', '.join(unknown)}")
    if not pool.judgments:
        raise EvaluationError("judgment pool is empty")

    per_query = []
    for qid in pool.query_ids:
        ranking = run.get(qid, [])
        judgments = pool.judgments[qid]
        n = pool.correct_count(qid)
        per_query.append(
            QueryResult(
                query_id=qid,
                ap=average_precision(ranking, judgments, mode, annotated_correct=n),
                rr=reciprocal_rank(ranking, judgments),
                returned=len(ranking),
                annotated_correct=n,
                unjudged=sum(1 for e in ranking if e not in judgments),
            )
        )
    total_correct = sum(row.annotated_correct for row in per_query)
    w_map = (
        sum(row.ap * row.annotated_correct for row in per_query) / total_correct
        if total_correct
        else 0.0
    )
    return EvaluationReport(
        ap_mode=mode,
        per_query=per_query,
        map=sum(row.ap for row in per_query) / len(per_query),
        w_map=w_map,
        mrr=sum(row.rr for row in per_query) / len(per_query),
    )


def paired_permutation_test(
    per_query_a: list[float],
    per_query_b: list[float],
    iterations: int = 10000,
    seed: int = 0,
) -> float:
    """Two-sided sign-flip permutation test on paired per-query differences.

    Exact enumeration up to 12 pairs, seeded Monte Carlo beyond; the Monte
    Carlo estimate includes the observed statistic, so p >= 1/(iterations+1).
    """
    if len(per_query_a) != len(per_query_b):
        raise ValueError("paired lists must have equal length")
    diffs = [a - b for a, b in zip(per_query_a, per_query_b)]
    n = len(diffs)
    observed = abs(sum(diffs))
    threshold = observed - _TIE_EPS
    if n == 0:
        return 1.0
    if n <= EXACT_PERMUTATION_LIMIT:
        at_least = sum(
            1
            for signs in itertools.product((1.0, -1.0), repeat=n)
            if abs(sum(s * d for s, d in zip(signs, diffs))) >= threshold
        )
        return at_least / 2.0 ** n
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = np.random.default_rng(seed)
    diffs_arr = np.array(diffs)
    at_least = 1  # the observed assignment
    for _ in range(iterations):
        signs = rng.integers(0, 2, size=n) * 2 - 1
        if abs(float(signs @ diffs_arr)) >= threshold:
            at_least += 1
    return at_least / (iterations + 1)
