"""Labeled knowledge graph: interned entities and relations, adjacency, mediators.

KB file format: UTF-8, one ``subject<TAB>relation<TAB>object`` triple per line,
no header; blank lines and ``#``-prefixed lines are ignored.  The mediator
side file lists one entity name per line; mediator nodes stand in for n-ary
facts, so two entities joined through one count as connected.

Every relation label gets a synthesized inverse (``<label>_inv``) at load
time; the file stores forward edges only.  The graph is immutable after
loading and safe for any number of concurrent readers.
"""

from __future__ import annotations

from .errors import LoadError

INVERSE_SUFFIX = "_inv"

# Names containing these would break the TSV / feature-string / pair-key
# formats used elsewhere in the pipeline.
_FORBIDDEN_CHARS = set("<>|")


def _check_name(name: str, kind: str, lineno: int) -> None:
    if any(ch in _FORBIDDEN_CHARS or ch.isspace() for ch in name):
        raise LoadError(
            f"line {lineno}: {kind} name {name!r} contains whitespace or one of < > |"
        )


class Interner:
    """Bijective name <-> dense-id table; ids assigned in first-appearance order."""

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}
        self._names: list[str] = []

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def intern(self, name: str) -> int:
        """Return the id for ``name``, assigning the next dense id if new."""
        ident = self._ids.get(name)
        if ident is None:
            ident = len(self._names)
            self._ids[name] = ident
            self._names.append(name)
        return ident

    def id_of(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise KeyError(f"unknown name: {name!r}") from None

    def name_of(self, ident: int) -> str:
        if not 0 <= ident < len(self._names):
            raise KeyError(f"unknown id: {ident}")
        return self._names[ident]

    @property
    def names(self) -> list[str]:
        return list(self._names)


class KnowledgeGraph:
    """Immutable-after-load labeled multigraph with bidirectional adjacency.

    ``out_adjacency[s]`` holds ``(relation_id, object_id)`` pairs and
    ``in_adjacency[o]`` the mirrored ``(relation_id, subject_id)`` pairs, both
    in edge insertion order; relation ids in both lists are the *forward*
    label's id.  Use :meth:`traversal_edges` for direction-marked walks.
    """

    def __init__(self) -> None:
        self.entities = Interner()
        self.relations = Interner()
        self._inverse: list[int] = []
        self._is_forward: list[bool] = []
        self.out_adjacency: list[list[tuple[int, int]]] = []
        self.in_adjacency: list[list[tuple[int, int]]] = []
        self.mediators: set[int] = set()
        self.edge_count = 0
        self.duplicates_dropped = 0
        self._edges: set[tuple[int, int, int]] = set()

    # -- construction -------------------------------------------------

    def _intern_entity(self, name: str) -> int:
        ident = self.entities.intern(name)
        if ident == len(self.out_adjacency):
            self.out_adjacency.append([])
            self.in_adjacency.append([])
        return ident

    def _intern_relation(self, label: str) -> int:
        if label in self.relations:
            return self.relations.id_of(label)
        ident = self.relations.intern(label)
        self._is_forward.append(True)
        inv = self.relations.intern(label + INVERSE_SUFFIX)
        self._is_forward.append(False)
        self._inverse.extend((inv, ident))
        return ident

    def add_edge(self, subject: str, relation: str, obj: str) -> bool:
        """Insert one forward triple; returns False for a duplicate."""
        s = self._intern_entity(subject)
        r = self._intern_relation(relation)
        o = self._intern_entity(obj)
        triple = (s, r, o)
        if triple in self._edges:
            self.duplicates_dropped += 1
            return False
        self._edges.add(triple)
        self.out_adjacency[s].append((r, o))
        self.in_adjacency[o].append((r, s))
        self.edge_count += 1
        return True

    # -- lookups -------------------------------------------------------

    def _check_entity(self, e: int) -> None:
        if not 0 <= e < len(self.entities):
            raise KeyError(f"unknown entity id: {e}")

    def has_entity(self, name: str) -> bool:
        return name in self.entities

    def entity_id(self, name: str) -> int:
        return self.entities.id_of(name)

    def entity_name(self, e: int) -> str:
        return self.entities.name_of(e)

    def inverse_of(self, r: int) -> int:
        if not 0 <= r < len(self._inverse):
            raise KeyError(f"unknown relation id: {r}")
        return self._inverse[r]

    def is_forward(self, r: int) -> bool:
        if not 0 <= r < len(self._is_forward):
            raise KeyError(f"unknown relation id: {r}")
        return self._is_forward[r]

    @property
    def forward_relation_count(self) -> int:
        return sum(self._is_forward)

    def out_edges(self, e: int) -> list[tuple[int, int]]:
        """Outgoing (relation, object) pairs in insertion order."""
        self._check_entity(e)
        return list(self.out_adjacency[e])

    def in_edges(self, e: int) -> list[tuple[int, int]]:
        """Incoming (forward relation, subject) pairs in insertion order."""
        self._check_entity(e)
        return list(self.in_adjacency[e])

    def traversal_edges(self, e: int) -> list[tuple[int, int]]:
        """All walkable edges at ``e``: forward edges as-is, incoming edges
        under the inverse relation id.  Order: out edges, then in edges."""
        self._check_entity(e)
        edges = list(self.out_adjacency[e])
        edges.extend((self._inverse[r], s) for r, s in self.in_adjacency[e])
        return edges

    def neighbors(self, e: int) -> set[int]:
        """Union of out- and in-neighbors; contains ``e`` only on a self-loop."""
        self._check_entity(e)
        result = {o for _, o in self.out_adjacency[e]}
        result.update(s for _, s in self.in_adjacency[e])
        return result

    def mediator_neighbors(self, e: int) -> set[int]:
        """Entities exactly two hops away through a mediator node, excluding ``e``."""
        self._check_entity(e)
        result: set[int] = set()
        for m in self.neighbors(e):
            if m in self.mediators:
                result.update(self.neighbors(m))
        result.discard(e)
        return result

    def summary(self) -> dict:
        return {
            "entities": len(self.entities),
            "relation_labels": self.forward_relation_count,
            "edges": self.edge_count,
            "duplicates_dropped": self.duplicates_dropped,
            "mediators": len(self.mediators),
        }


def load_kb(path: str, mediator_path: str | None = None) -> KnowledgeGraph:
    """Load a graph from a TSV triple file, deduplicating repeated triples.

    Ids are assigned in first-appearance order, so identical files always
    produce identical graphs.  Raises :class:`LoadError` (naming the line)
    for malformed lines and for mediator names absent from every triple.
    """
    graph = KnowledgeGraph()
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise LoadError(
                    f"line {lineno}: expected 3 tab-separated fields, got {len(fields)}"
                )
            subject, relation, obj = fields
            if not subject or not relation or not obj:
                raise LoadError(f"line {lineno}: empty field in triple {line!r}")
            _check_name(subject, "entity", lineno)
            _check_name(obj, "entity", lineno)
            _check_name(relation, "relation", lineno)
            if relation.endswith(INVERSE_SUFFIX):
                raise LoadError(
                    f"line {lineno}: relation label {relation!r} ends with the "
                    f"reserved suffix {INVERSE_SUFFIX!r}"
                )
            if "->" in relation:
                raise LoadError(
                    f"line {lineno}: relation label {relation!r} contains '->'"
                )
            graph.add_edge(subject, relation, obj)
    if mediator_path is not None:
        with open(mediator_path, encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                name = raw.strip()
                if not name:
                    continue
                if not graph.has_entity(name):
                    raise LoadError(
                        f"mediator file line {lineno}: entity {name!r} does not "
                        "appear in any triple"
                    )
                graph.mediators.add(graph.entity_id(name))
    return graph


def save_kb(graph: KnowledgeGraph, path: str) -> None:
    """Write the forward edges back out as TSV; reloading yields an equal graph."""
    with open(path, "w", encoding="utf-8") as handle:
        for e in range(len(graph.entities)):
            s = graph.entity_name(e)
            for r, o in graph.out_adjacency[e]:
                handle.write(f"{s}\t{graph.relations.name_of(r)}\t{graph.entity_name(o)}\n")


def save_mediators(graph: KnowledgeGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for name in sorted(graph.entity_name(m) for m in graph.mediators):
            handle.write(name + "\n")
