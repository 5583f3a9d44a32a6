"""Open-vocabulary semantic parsing over a knowledge graph.

Textual predicates get learned execution models — a distributional embedding
plus a weighted combination of knowledge-graph queries — which are used to
answer fill-in-the-blank queries by ranking candidate entities, with a
pooled-judgment evaluation harness on top.
"""

__version__ = "0.1.0"
