"""Path features over the knowledge graph.

A feature is a sequence of edge labels along a simple path (no repeated
node), walked in either direction with inverse labels marked by the
``_inv`` suffix, optionally annotated with the terminal entity.  Every such
feature doubles as an executable graph query: following its edge sequence
from a start node reproduces the entities it was extracted against.

Canonical string form: ``<label1->label2>`` with ``:entityName`` appended
when a terminal is present, e.g. ``<designed->located_in>:Italy``.

Feature matrix file: one ``key<TAB>feature feature ...`` line per entity or
entity pair, pair keys written ``e1|e2``, features in canonical form sorted
lexicographically.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import LoadError, ParseError
from .kb import KnowledgeGraph

DEFAULT_MAX_PATH_LEN = 2
DEFAULT_FANOUT_CAP = 100

PAIR_KEY_SEPARATOR = "|"


@dataclass(frozen=True)
class PathFeature:
    """Directed edge-label sequence, optionally ending at a named entity."""

    edges: tuple[str, ...]
    terminal: str | None = None

    def __post_init__(self):
        if not self.edges:
            raise ValueError("a path feature needs at least one edge label")


def format_feature(feature: PathFeature) -> str:
    """Canonical, injective string form of a feature."""
    body = "<" + "->".join(feature.edges) + ">"
    if feature.terminal is not None:
        body += ":" + feature.terminal
    return body


def parse_feature(text: str) -> PathFeature:
    """Inverse of :func:`format_feature`."""
    if not text.startswith("<"):
        raise ParseError(f"feature {text!r} does not start with '<'")
    try:
        # '->' separators contain '>', so the path closes at the last one
        # (names never contain '<' or '>')
        close = text.rindex(">")
    except ValueError:
        raise ParseError(f"feature {text!r} has no closing '>'") from None
    edges = tuple(text[1:close].split("->"))
    if not all(edges) or any("<" in e or ">" in e for e in edges):
        raise ParseError(f"feature {text!r} has an empty or malformed edge label")
    rest = text[close + 1 :]
    if not rest:
        return PathFeature(edges)
    if rest.startswith(":") and len(rest) > 1:
        return PathFeature(edges, terminal=rest[1:])
    raise ParseError(f"feature {text!r} has trailing junk after the path")


def reverse_feature(feature: PathFeature) -> PathFeature:
    """The same path walked from the other end (labels reversed and inverted)."""
    from .kb import INVERSE_SUFFIX

    flipped = tuple(
        label[: -len(INVERSE_SUFFIX)] if label.endswith(INVERSE_SUFFIX) else label + INVERSE_SUFFIX
        for label in reversed(feature.edges)
    )
    return PathFeature(flipped, terminal=feature.terminal)


class FeatureSpace:
    """Global intern table mapping canonical feature strings to dense ids.

    Shared across predicates so that feature vectors stay comparable;
    get-or-insert is a single dict operation and therefore atomic under the
    GIL.
    """

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}
        self._strings: list[str] = []

    def __len__(self) -> int:
        return len(self._strings)

    def intern(self, feature: PathFeature | str) -> int:
        text = feature if isinstance(feature, str) else format_feature(feature)
        ident = self._ids.get(text)
        if ident is None:
            ident = len(self._strings)
            self._ids[text] = ident
            self._strings.append(text)
        return ident

    def intern_all(self, features) -> frozenset[int]:
        return frozenset(self.intern(f) for f in features)

    def string_of(self, ident: int) -> str:
        if not 0 <= ident < len(self._strings):
            raise KeyError(f"unknown feature id: {ident}")
        return self._strings[ident]

    def strings_of(self, ids) -> list[str]:
        return sorted(self.string_of(i) for i in ids)


def _capped_edges(
    graph: KnowledgeGraph, node: int, fanout_cap: int
) -> list[tuple[str, int]]:
    """Walkable (label, target) pairs at ``node`` with at most ``fanout_cap``
    edges kept per direction-marked relation (excess dropped by target id)."""
    groups: dict[int, list[int]] = {}
    for rel, target in graph.traversal_edges(node):
        groups.setdefault(rel, []).append(target)
    edges: list[tuple[str, int]] = []
    for rel in sorted(groups):
        targets = groups[rel]
        if len(targets) > fanout_cap:
            targets = sorted(targets)[:fanout_cap]
        label = graph.relations.name_of(rel)
        edges.extend((label, t) for t in targets)
    return edges


def extract_pair_features(
    graph: KnowledgeGraph,
    e1: int,
    e2: int,
    max_len: int = DEFAULT_MAX_PATH_LEN,
    fanout_cap: int = DEFAULT_FANOUT_CAP,
) -> set[PathFeature]:
    """Edge-label sequences of every simple path from ``e1`` to ``e2`` of
    length <= ``max_len``; no terminal annotations."""
    if e1 == e2:
        raise ValueError("pair features need two distinct entities")
    graph._check_entity(e1)
    graph._check_entity(e2)
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    found: set[PathFeature] = set()

    def walk(node: int, labels: tuple[str, ...], visited: frozenset[int]) -> None:
        for label, target in _capped_edges(graph, node, fanout_cap):
            if target == e2:
                found.add(PathFeature(labels + (label,)))
            elif target not in visited and len(labels) + 1 < max_len:
                walk(target, labels + (label,), visited | {target})

    walk(e1, (), frozenset((e1,)))
    return found


def extract_entity_features(
    graph: KnowledgeGraph,
    e: int,
    max_len: int = DEFAULT_MAX_PATH_LEN,
    fanout_cap: int = DEFAULT_FANOUT_CAP,
) -> set[PathFeature]:
    """For every simple path starting at ``e`` of length <= ``max_len``, both
    the bare path feature and its terminal-annotated variant."""
    graph._check_entity(e)
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    found: set[PathFeature] = set()

    def walk(node: int, labels: tuple[str, ...], visited: frozenset[int]) -> None:
        for label, target in _capped_edges(graph, node, fanout_cap):
            if target in visited:
                continue
            path = labels + (label,)
            found.add(PathFeature(path))
            found.add(PathFeature(path, terminal=graph.entity_name(target)))
            if len(path) < max_len:
                walk(target, path, visited | {target})

    walk(e, (), frozenset((e,)))
    return found


def pair_key(e1_name: str, e2_name: str) -> str:
    return e1_name + PAIR_KEY_SEPARATOR + e2_name


class FeatureStore:
    """Caching front-end over feature extraction, keyed by entity names.

    Entities or pairs absent from the graph (or identical pairs, which admit
    no simple path) get empty vectors.  Vectors are frozensets of ids in the
    store's :class:`FeatureSpace`.
    """

    def __init__(
        self,
        graph: KnowledgeGraph,
        space: FeatureSpace | None = None,
        max_len: int = DEFAULT_MAX_PATH_LEN,
        fanout_cap: int = DEFAULT_FANOUT_CAP,
    ) -> None:
        self.graph = graph
        self.space = space if space is not None else FeatureSpace()
        self.max_len = max_len
        self.fanout_cap = fanout_cap
        self._entity_cache: dict[str, frozenset[int]] = {}
        self._pair_cache: dict[tuple[str, str], frozenset[int]] = {}

    def entity_vector(self, name: str) -> frozenset[int]:
        vec = self._entity_cache.get(name)
        if vec is None:
            if self.graph.has_entity(name):
                feats = extract_entity_features(
                    self.graph, self.graph.entity_id(name), self.max_len, self.fanout_cap
                )
                vec = self.space.intern_all(feats)
            else:
                vec = frozenset()
            self._entity_cache[name] = vec
        return vec

    def pair_vector(self, e1_name: str, e2_name: str) -> frozenset[int]:
        key = (e1_name, e2_name)
        vec = self._pair_cache.get(key)
        if vec is None:
            if (
                e1_name != e2_name
                and self.graph.has_entity(e1_name)
                and self.graph.has_entity(e2_name)
            ):
                feats = extract_pair_features(
                    self.graph,
                    self.graph.entity_id(e1_name),
                    self.graph.entity_id(e2_name),
                    self.max_len,
                    self.fanout_cap,
                )
                vec = self.space.intern_all(feats)
            else:
                vec = frozenset()
            self._pair_cache[key] = vec
        return vec

    def vector_for(self, args: tuple[str, ...]) -> frozenset[int]:
        """Feature vector for predicate-instance arguments (arity 1 or 2)."""
        if len(args) == 1:
            return self.entity_vector(args[0])
        if len(args) == 2:
            return self.pair_vector(args[0], args[1])
        raise ValueError(f"unsupported arity: {len(args)}")


def write_feature_matrix(path: str, rows: dict[str, frozenset[int]], space: FeatureSpace) -> None:
    """Write ``key<TAB>sorted features`` lines, rows sorted by key."""
    with open(path, "w", encoding="utf-8") as handle:
        for key in sorted(rows):
            handle.write(key + "\t" + " ".join(space.strings_of(rows[key])) + "\n")


def read_feature_matrix(path: str, space: FeatureSpace) -> dict[str, frozenset[int]]:
    rows: dict[str, frozenset[int]] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            key, sep, feats = line.partition("\t")
            if not sep or not key:
                raise LoadError(f"feature matrix line {lineno}: missing key or tab")
            rows[key] = frozenset(space.intern(f) for f in feats.split() if f)
    return rows
