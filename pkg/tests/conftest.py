import pytest

from openvocab.kb import KnowledgeGraph, load_kb

# The five-edge architect graph used throughout: Palladio's nationality,
# type and designs, plus the country type of Italy and the villa's location.
ARCHITECT_TRIPLES = [
    ("Palladio", "nationality", "Italy"),
    ("Palladio", "type", "architect"),
    ("Palladio", "designed", "VillaCapra"),
    ("Italy", "type", "country"),
    ("VillaCapra", "located_in", "Italy"),
]


def build_graph(triples, mediators=()):
    graph = KnowledgeGraph()
    for s, r, o in triples:
        graph.add_edge(s, r, o)
    for name in mediators:
        graph.mediators.add(graph.entity_id(name))
    return graph


@pytest.fixture
def architect_graph():
    return build_graph(ARCHITECT_TRIPLES)


@pytest.fixture
def architect_kb_file(tmp_path):
    path = tmp_path / "kb.tsv"
    path.write_text("".join(f"{s}\t{r}\t{o}\n" for s, r, o in ARCHITECT_TRIPLES))
    return str(path)
