"""Surface logical forms from entity-linked text.

Textual predicates are named after the words themselves: a noun directly in
front of a mention yields a category instance; two mentions separated only
by noun/adjective tokens yield a noun-compound relation whose name joins the
intervening tokens with ``_`` plus the suffix ``_N/N``; appositive
preposition phrases yield ``head_prep`` relations; possessives yield
``'s_head`` relations.  Token classes arrive pre-assigned (NOUN, ADJ, PREP,
POSS, ENTITY, OTHER) along with entity-linked mention spans, so no parsing
happens here.

Corpus file: line-delimited JSON records, either
``{"instance": {"predicate": ..., "arity": ..., "args": [...]}}`` or
``{"sentence": {"tokens": [[surface, class], ...],
                "mentions": [[start, end, entity], ...]}}``.
Query file: line-delimited JSON with ``id``, ``categories``, ``relations``
and ``blank`` fields, e.g.
``{"id": "q1", "categories": [["architect", "x"]],
   "relations": [["architect_N/N", "Italy", "x"]], "blank": "x"}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from collections import Counter
from typing import Iterable, Union

from .errors import ParseError

NOUN = "NOUN"
ADJ = "ADJ"
PREP = "PREP"
POSS = "POSS"
ENTITY = "ENTITY"
OTHER = "OTHER"
TOKEN_CLASSES = frozenset((NOUN, ADJ, PREP, POSS, ENTITY, OTHER))

COMPOUND_SUFFIX = "_N/N"
UNKNOWN_PREDICATE = "unknown"

DEFAULT_MIN_PREDICATE_COUNT = 6


@dataclass(frozen=True)
class Predicate:
    name: str
    arity: int

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise ValueError(f"predicate arity must be 1 or 2, got {self.arity}")
        if not self.name:
            raise ValueError("predicate name must be non-empty")


@dataclass(frozen=True)
class PredicateInstance:
    predicate: Predicate
    args: tuple[str, ...]

    def __post_init__(self):
        if len(self.args) != self.predicate.arity:
            raise ValueError(
                f"{self.predicate.name}/{self.predicate.arity} applied to "
                f"{len(self.args)} arguments"
            )

    @property
    def key(self) -> Union[str, tuple[str, str]]:
        """Parameter-table key: the entity for categories, the ordered pair
        for relations."""
        return self.args[0] if self.predicate.arity == 1 else (self.args[0], self.args[1])


@dataclass(frozen=True)
class Mention:
    start: int
    end: int  # exclusive
    entity: str


@dataclass
class AnnotatedSentence:
    tokens: list[tuple[str, str]]
    mentions: list[Mention]

    def validate(self) -> None:
        for surface, cls in self.tokens:
            if cls not in TOKEN_CLASSES:
                raise ParseError(f"unknown token class {cls!r}")
            if not surface:
                raise ParseError("empty token surface")
        covered = [False] * len(self.tokens)
        for m in self.mentions:
            if not (0 <= m.start < m.end <= len(self.tokens)):
                raise ParseError(f"mention span [{m.start}, {m.end}) out of bounds")
            for i in range(m.start, m.end):
                if covered[i]:
                    raise ParseError(f"overlapping mention at token {i}")
                covered[i] = True
        for i, (surface, cls) in enumerate(self.tokens):
            if cls == ENTITY and not covered[i]:
                raise ParseError(f"ENTITY token {surface!r} at {i} belongs to no mention")


@dataclass(frozen=True)
class Var:
    name: str


Term = Union[str, Var]  # plain strings are entity names


@dataclass(frozen=True)
class LogicalForm:
    categories: tuple[tuple[Predicate, Term], ...] = ()
    relations: tuple[tuple[Predicate, Term, Term], ...] = ()
    blank: str | None = None

    def grounded_entities(self) -> list[str]:
        """Entity names in first-appearance order across conjuncts."""
        seen: list[str] = []
        for _, term in self.categories:
            if isinstance(term, str) and term not in seen:
                seen.append(term)
        for _, t1, t2 in self.relations:
            for term in (t1, t2):
                if isinstance(term, str) and term not in seen:
                    seen.append(term)
        return seen


def _name(tokens: Iterable[str]) -> str:
    return "_".join(t.lower() for t in tokens)


def _check_entity_name(name: str, where: str) -> None:
    # names end up in tab-separated files and |-joined pair keys
    if any(ch in "<>|" or ch.isspace() for ch in name):
        raise ParseError(
            f"{where}: entity name {name!r} contains whitespace or one of < > |"
        )


def extract_instances(sentence: AnnotatedSentence) -> list[PredicateInstance]:
    """Apply the four surface patterns to one sentence.

    Sentences matching no pattern yield an empty list.  With three or more
    mentions in a compound, relations are emitted for adjacent mention pairs
    only.
    """
    sentence.validate()
    tokens = sentence.tokens
    cls = [c for _, c in tokens]
    surface = [s for s, _ in tokens]
    mentions = sorted(sentence.mentions, key=lambda m: m.start)
    instances: list[PredicateInstance] = []

    # Category: a common noun directly in front of a mention names it.
    for m in mentions:
        i = m.start - 1
        if i >= 0 and cls[i] == NOUN:
            instances.append(
                PredicateInstance(Predicate(surface[i].lower(), 1), (m.entity,))
            )

    mention_starting_at = {m.start: m for m in mentions}

    for a, b in zip(mentions, mentions[1:]):
        gap = range(a.end, b.start)
        gap_classes = [cls[i] for i in gap]

        # Noun compound: mentions separated only by >= 1 noun/adjective tokens.
        if gap_classes and all(c in (NOUN, ADJ) for c in gap_classes):
            name = _name(surface[i] for i in gap) + COMPOUND_SUFFIX
            instances.append(PredicateInstance(Predicate(name, 2), (a.entity, b.entity)))

        # Appositive preposition: ``e1 , h p e2`` -> h_p(e1, e2); h is the
        # noun right before the preposition, anything after p up to e2 must
        # be filler (determiners etc.).
        if len(gap_classes) >= 3 and surface[a.end] == ",":
            i = a.end + 1
            while i < b.start and cls[i] in (NOUN, ADJ):
                i += 1
            if (
                i < b.start
                and cls[i] == PREP
                and cls[i - 1] == NOUN
                and all(cls[j] == OTHER for j in range(i + 1, b.start))
            ):
                name = surface[i - 1].lower() + "_" + surface[i].lower()
                instances.append(
                    PredicateInstance(Predicate(name, 2), (a.entity, b.entity))
                )

    # Possessive: ``e1 's h`` names a relation to a neighboring mention.
    for m in mentions:
        i = m.end
        if i >= len(tokens) or cls[i] != POSS:
            continue
        run_end = i + 1
        head = None
        while run_end < len(tokens) and cls[run_end] in (NOUN, ADJ):
            if cls[run_end] == NOUN:
                head = surface[run_end]
            run_end += 1
        if head is None:
            continue
        name = "'s_" + head.lower()
        follower = mention_starting_at.get(run_end)
        if follower is not None:
            instances.append(
                PredicateInstance(Predicate(name, 2), (m.entity, follower.entity))
            )
        elif m.start >= 2 and surface[m.start - 1] == ",":
            for other in mentions:
                if other.end == m.start - 1:
                    instances.append(
                        PredicateInstance(Predicate(name, 2), (m.entity, other.entity))
                    )
                    break
    return instances


def filter_rare_predicates(
    instances: list[PredicateInstance], min_count: int = DEFAULT_MIN_PREDICATE_COUNT
) -> tuple[list[PredicateInstance], set[Predicate]]:
    """Drop every instance whose predicate occurs fewer than ``min_count``
    times; counting is per (name, arity).  Idempotent at fixed ``min_count``."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter(inst.predicate for inst in instances)
    dropped = {p for p, n in counts.items() if n < min_count}
    kept = [inst for inst in instances if inst.predicate not in dropped]
    return kept, dropped


def _parse_term(value, blank: str, where: str) -> Term:
    if not isinstance(value, str) or not value:
        raise ParseError(f"{where}: term must be a non-empty string, got {value!r}")
    if value == blank:
        return Var(value)
    _check_entity_name(value, where)
    return value


def parse_query(line: str, where: str = "query") -> tuple[str | None, LogicalForm]:
    """Parse one query record into (id, logical form with the blank set)."""
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{where}: invalid JSON at column {exc.colno}: {exc.msg}") from None
    if not isinstance(record, dict):
        raise ParseError(f"{where}: record must be a JSON object")
    blank = record.get("blank")
    if not isinstance(blank, str) or not blank:
        raise ParseError(f"{where}: missing or empty 'blank' field")
    qid = record.get("id")
    if qid is not None and not isinstance(qid, str):
        raise ParseError(f"{where}: 'id' must be a string")

    categories = []
    for pos, entry in enumerate(record.get("categories", [])):
        if not isinstance(entry, list) or len(entry) != 2:
            raise ParseError(f"{where}: categories[{pos}] must be [name, term]")
        name, term = entry
        if not isinstance(name, str) or not name:
            raise ParseError(f"{where}: categories[{pos}] has an invalid name")
        categories.append(
            (Predicate(name, 1), _parse_term(term, blank, f"{where}: categories[{pos}]"))
        )
    relations = []
    for pos, entry in enumerate(record.get("relations", [])):
        if not isinstance(entry, list) or len(entry) != 3:
            raise ParseError(f"{where}: relations[{pos}] must be [name, term, term]")
        name, t1, t2 = entry
        if not isinstance(name, str) or not name:
            raise ParseError(f"{where}: relations[{pos}] has an invalid name")
        relations.append(
            (
                Predicate(name, 2),
                _parse_term(t1, blank, f"{where}: relations[{pos}]"),
                _parse_term(t2, blank, f"{where}: relations[{pos}]"),
            )
        )
    form = LogicalForm(tuple(categories), tuple(relations), blank)
    uses_blank = any(isinstance(t, Var) for _, t in categories) or any(
        isinstance(t, Var) for _, t1, t2 in relations for t in (t1, t2)
    )
    if not uses_blank:
        raise ParseError(f"{where}: blank {blank!r} appears in no argument")
    return qid, form


def read_queries(path: str) -> list[tuple[str, LogicalForm]]:
    queries = []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            qid, form = parse_query(line, where=f"query file line {lineno}")
            if qid is None:
                raise ParseError(f"query file line {lineno}: missing 'id' field")
            queries.append((qid, form))
    return queries


def _sentence_from_record(record: dict, where: str) -> AnnotatedSentence:
    tokens = record.get("tokens")
    raw_mentions = record.get("mentions")
    if not isinstance(tokens, list) or not isinstance(raw_mentions, list):
        raise ParseError(f"{where}: sentence needs 'tokens' and 'mentions' lists")
    try:
        parsed_tokens = [(str(s), str(c)) for s, c in tokens]
        mentions = [Mention(int(s), int(e), str(n)) for s, e, n in raw_mentions]
    except (TypeError, ValueError):
        raise ParseError(f"{where}: malformed token or mention entry") from None
    sentence = AnnotatedSentence(parsed_tokens, mentions)
    sentence.validate()
    return sentence


def _instance_from_record(record: dict, where: str) -> PredicateInstance:
    name = record.get("predicate")
    arity = record.get("arity")
    args = record.get("args")
    if not isinstance(name, str) or arity not in (1, 2) or not isinstance(args, list):
        raise ParseError(f"{where}: instance needs predicate, arity in (1, 2), args")
    if len(args) != arity or not all(isinstance(a, str) and a for a in args):
        raise ParseError(f"{where}: args must be {arity} non-empty strings")
    return PredicateInstance(Predicate(name, arity), tuple(args))


def read_corpus(path: str) -> list[PredicateInstance]:
    """Read a training corpus, running extraction on sentence records."""
    instances: list[PredicateInstance] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            where = f"corpus line {lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{where}: invalid JSON: {exc.msg}") from None
            if not isinstance(record, dict):
                raise ParseError(f"{where}: record must be a JSON object")
            if "instance" in record:
                instances.append(_instance_from_record(record["instance"], where))
            elif "sentence" in record:
                instances.extend(extract_instances(_sentence_from_record(record["sentence"], where)))
            else:
                raise ParseError(f"{where}: record has neither 'instance' nor 'sentence'")
    return instances


def write_instances(path: str, instances: list[PredicateInstance]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for inst in instances:
            record = {
                "instance": {
                    "predicate": inst.predicate.name,
                    "arity": inst.predicate.arity,
                    "args": list(inst.args),
                }
            }
            handle.write(json.dumps(record, sort_keys=True) + "\n")
