"""Candidate generation and execution of fill-in-the-blank queries.

Candidates for a query are every entity seen at training time with one of
the query's entities, plus every entity directly connected to one in the
knowledge graph (or connected through a mediator node).  Each candidate is
substituted for the blank and scored as the product of its conjunct
probabilities; the top 100 are returned.

Run file: ``queryId<TAB>rank<TAB>entityName<TAB>probability`` lines, rank
1-based, at most 100 per query.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from .errors import ParseError, UnsupportedQueryError
from .kb import KnowledgeGraph
from .logical_forms import LogicalForm, PredicateInstance, Var
from .models import Model, NEUTRAL_PROBABILITY
from .subgraph_features import FeatureStore

MAX_ANSWERS = 100

TRAINED_WITH = "trained-with"
KB_DIRECT = "kb-direct"
KB_MEDIATOR = "kb-mediator"


class CooccurrenceIndex:
    """Symmetric entity co-occurrence within relation instances."""

    def __init__(self) -> None:
        self._partners: dict[str, set[str]] = {}

    @classmethod
    def from_instances(cls, instances: Iterable[PredicateInstance]) -> "CooccurrenceIndex":
        index = cls()
        for inst in instances:
            if inst.predicate.arity == 2:
                e1, e2 = inst.args
                index._partners.setdefault(e1, set()).add(e2)
                index._partners.setdefault(e2, set()).add(e1)
        return index

    def partners(self, entity: str) -> set[str]:
        return self._partners.get(entity, set())

    def __contains__(self, entity: str) -> bool:
        return entity in self._partners


@dataclass
class CandidateSet:
    """Candidates with provenance tags and, per candidate, the set of query
    entities it is KB-connected to (used to order the appended tail)."""

    provenance: dict[str, set[str]] = field(default_factory=dict)
    kb_connections: dict[str, set[str]] = field(default_factory=dict)

    @property
    def entities(self) -> list[str]:
        return list(self.provenance)

    def _add(self, entity: str, tag: str, query_entity: str | None = None) -> None:
        self.provenance.setdefault(entity, set()).add(tag)
        if query_entity is not None:
            self.kb_connections.setdefault(entity, set()).add(query_entity)

    def kb_connected(self, entity: str) -> bool:
        tags = self.provenance.get(entity, set())
        return KB_DIRECT in tags or KB_MEDIATOR in tags


def generate_candidates(
    query: LogicalForm, graph: KnowledgeGraph, cooccurrence: CooccurrenceIndex
) -> CandidateSet:
    """Union over the query's entities of training partners, KB neighbors and
    mediator-linked entities; the query entities themselves are excluded."""
    query_entities = query.grounded_entities()
    candidates = CandidateSet()
    for qe in query_entities:
        for partner in sorted(cooccurrence.partners(qe)):
            if partner not in query_entities:
                candidates._add(partner, TRAINED_WITH)
        if graph.has_entity(qe):
            eid = graph.entity_id(qe)
            for n in sorted(graph.entity_name(x) for x in graph.neighbors(eid)):
                if n not in query_entities:
                    candidates._add(n, KB_DIRECT, qe)
            for n in sorted(graph.entity_name(x) for x in graph.mediator_neighbors(eid)):
                if n not in query_entities:
                    candidates._add(n, KB_MEDIATOR, qe)
        elif qe not in cooccurrence:
            logging.getLogger(__name__).warning(
                "query entity %r is in neither the KB nor the training index", qe
            )
    return candidates


@dataclass
class RankedAnswers:
    query_id: str
    entries: list[tuple[str, float]]


def _substitute(term, blank: str, candidate: str) -> str:
    if isinstance(term, Var):
        if term.name != blank:
            raise UnsupportedQueryError(
                f"free variable {term.name!r} is not the blank {blank!r}"
            )
        return candidate
    return term


def execute_query(
    query: LogicalForm,
    candidates: CandidateSet,
    model: Model,
    store: FeatureStore,
    query_id: str = "",
) -> RankedAnswers:
    """Rank candidates by the product of their conjunct probabilities.

    Conjunct probabilities are independent (they multiply, as in the model
    overview); predicates absent from the trained model behave as the
    reserved ``unknown`` predicate and contribute a neutral 0.5.  Ties break
    by entity name so candidate order never matters.
    """
    if query.blank is None:
        raise UnsupportedQueryError("query has no blank to fill")
    blank = query.blank
    scored: list[tuple[str, float]] = []
    for entity in candidates.entities:
        probability = 1.0
        for category, term in query.categories:
            e = _substitute(term, blank, entity)
            if model.knows(category):
                probability *= model.score_category(category, e, store.entity_vector(e))
            else:
                probability *= NEUTRAL_PROBABILITY
        for relation, t1, t2 in query.relations:
            e1 = _substitute(t1, blank, entity)
            e2 = _substitute(t2, blank, entity)
            if model.knows(relation):
                probability *= model.score_relation(
                    relation, e1, e2, store.pair_vector(e1, e2)
                )
            else:
                probability *= NEUTRAL_PROBABILITY
        scored.append((entity, probability))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return RankedAnswers(query_id, scored[:MAX_ANSWERS])


def append_kb_candidates(scored: RankedAnswers, candidates: CandidateSet) -> RankedAnswers:
    """Append KB-connected candidates after the positively-scored prefix.

    Meant for distributional-mode output, where unseen pairs score exactly 0:
    every KB-connected candidate that scored 0 (or fell off the list) is
    appended with probability 0, ordered by how many distinct query entities
    it connects to, then by name.
    """
    prefix = [(e, p) for e, p in scored.entries if p > 0.0]
    present = {e for e, _ in prefix}
    tail = [
        entity
        for entity in candidates.entities
        if entity not in present and candidates.kb_connected(entity)
    ]
    tail.sort(key=lambda e: (-len(candidates.kb_connections.get(e, set())), e))
    entries = prefix + [(e, 0.0) for e in tail]
    return RankedAnswers(scored.query_id, entries[:MAX_ANSWERS])


def write_run(path: str, answers: list[RankedAnswers]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for ranked in answers:
            for rank, (entity, probability) in enumerate(ranked.entries, start=1):
                handle.write(f"{ranked.query_id}\t{rank}\t{entity}\t{probability:.6f}\n")


def read_run(path: str) -> dict[str, list[str]]:
    """Run file -> per-query entity list in rank order."""
    by_query: dict[str, list[tuple[int, str]]] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ParseError(f"run file line {lineno}: expected 4 fields")
            qid, rank_text, entity, prob_text = fields
            try:
                rank = int(rank_text)
                float(prob_text)
            except ValueError:
                raise ParseError(f"run file line {lineno}: bad rank or probability") from None
            by_query.setdefault(qid, []).append((rank, entity))
    result = {}
    for qid, entries in by_query.items():
        entries.sort()
        ranks = [r for r, _ in entries]
        if ranks != list(range(1, len(ranks) + 1)):
            raise ParseError(f"run file: ranks for query {qid!r} are not 1..{len(ranks)}")
        result[qid] = [entity for _, entity in entries]
    return result
