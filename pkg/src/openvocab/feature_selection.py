"""Per-predicate feature selection by pointwise mutual information.

Counts are accumulated by summing the binary feature vectors of the entities
(or entity pairs) seen with each predicate in the training data, giving
count(pred), count(feat) and count(pred, feat); features are then ranked per
predicate by count(pred, feat) / (count(pred) * count(feat)) and the top k
kept after dropping low-frequency features.

Selected-features file: ``predicateName<TAB>arity<TAB>feature<TAB>pmi``
lines grouped by predicate, rank order preserved.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import LoadError
from .logical_forms import Predicate, PredicateInstance
from .subgraph_features import FeatureSpace

DEFAULT_TOP_K = 100
DEFAULT_MIN_FEATURE_COUNT = 5

# predicate -> ranked [(feature id, pmi), ...]
SelectedFeatures = dict[Predicate, list[tuple[int, float]]]


@dataclass
class FeatureCounts:
    """Instance-multiset counts; merging two shards is plain addition."""

    predicate: Counter = field(default_factory=Counter)
    feature: Counter = field(default_factory=Counter)
    joint: Counter = field(default_factory=Counter)

    def merge(self, other: "FeatureCounts") -> "FeatureCounts":
        self.predicate.update(other.predicate)
        self.feature.update(other.feature)
        self.joint.update(other.joint)
        return self


def accumulate_counts(
    instances: Iterable[PredicateInstance],
    vector_lookup: Callable[[tuple[str, ...]], frozenset[int]],
) -> FeatureCounts:
    """Sum the argument feature vectors seen with each predicate.

    An entity occurring in two instances counts twice; within one instance a
    feature contributes at most 1 (binary vectors).
    """
    counts = FeatureCounts()
    for inst in instances:
        counts.predicate[inst.predicate] += 1
        for feat in vector_lookup(inst.args):
            counts.feature[feat] += 1
            counts.joint[(inst.predicate, feat)] += 1
    return counts


def pmi_score(counts: FeatureCounts, predicate: Predicate, feature: int) -> float:
    """count(pred, feat) / (count(pred) * count(feat)); 0 when never joint."""
    pred_count = counts.predicate.get(predicate, 0)
    feat_count = counts.feature.get(feature, 0)
    if pred_count <= 0 or feat_count <= 0:
        raise ValueError(
            f"pmi needs positive counts, got count({predicate.name})={pred_count}, "
            f"count(feature {feature})={feat_count}"
        )
    joint = counts.joint.get((predicate, feature), 0)
    return joint / (pred_count * feat_count)


def select_top_k(
    counts: FeatureCounts,
    k: int = DEFAULT_TOP_K,
    min_feat_count: int = DEFAULT_MIN_FEATURE_COUNT,
    space: FeatureSpace | None = None,
) -> SelectedFeatures:
    """Top-k features per predicate by PMI, after the frequency floor.

    Only features actually seen with the predicate qualify (a zero joint
    count means zero association).  Ties break by higher joint count, then
    lexicographic feature string (ids when no space is given).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    per_predicate: dict[Predicate, list[int]] = {}
    for (predicate, feature), _ in counts.joint.items():
        per_predicate.setdefault(predicate, []).append(feature)

    selected: SelectedFeatures = {}
    for predicate in counts.predicate:
        ranked = []
        for feature in per_predicate.get(predicate, []):
            if counts.feature[feature] < min_feat_count:
                continue
            pmi = pmi_score(counts, predicate, feature)
            tie = space.string_of(feature) if space is not None else feature
            ranked.append((-pmi, -counts.joint[(predicate, feature)], tie, feature, pmi))
        ranked.sort(key=lambda row: row[:3])
        selected[predicate] = [(feature, pmi) for *_, feature, pmi in ranked[:k]]
    return selected


def write_selected(path: str, selected: SelectedFeatures, space: FeatureSpace) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for predicate in sorted(selected, key=lambda p: (p.arity, p.name)):
            for feature, pmi in selected[predicate]:
                handle.write(
                    f"{predicate.name}\t{predicate.arity}\t"
                    f"{space.string_of(feature)}\t{pmi:.12g}\n"
                )


def read_selected(path: str, space: FeatureSpace) -> SelectedFeatures:
    selected: SelectedFeatures = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise LoadError(f"selected-features line {lineno}: expected 4 fields")
            name, arity_text, feature_text, pmi_text = fields
            try:
                predicate = Predicate(name, int(arity_text))
                pmi = float(pmi_text)
            except ValueError as exc:
                raise LoadError(f"selected-features line {lineno}: {exc}") from None
            selected.setdefault(predicate, []).append((space.intern(feature_text), pmi))
    return selected
