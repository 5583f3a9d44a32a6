"""Predicate execution models: distributional, formal, and combined.

The truth probability of a category instance c(e) is sigma(theta_c.phi_e +
omega_c.psi_c(e)); relation instances r(e1, e2) use the embedding of the
ordered pair.  theta and phi are dense learned embeddings, omega holds one
weight per selected graph-query feature, psi is the binary feature vector of
the entity or pair.  The distributional mode zeroes the omega term, the
formal mode pins theta and phi at zero, and the combined mode uses both.

A purely distributional model has no pair embedding for pairs never seen in
training and scores them exactly 0; the feature term has no such gap, which
is the whole point of the combined model.

Training minimizes the pairwise logistic ranking loss -log sigma(s+ - s-)
over (positive, sampled negative) raw-score pairs with L2 regularization,
by plain SGD at a fixed learning rate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .errors import LoadError, ScoringError, TrainingError
from .logical_forms import Predicate, PredicateInstance, UNKNOWN_PREDICATE
from .feature_selection import SelectedFeatures
from .subgraph_features import FeatureSpace

MODES = ("distributional", "formal", "combined")

NEUTRAL_PROBABILITY = 0.5  # score of the reserved `unknown` predicate

MODEL_FORMAT = "openvocab-model"
MODEL_VERSION = 1

Key = Union[str, tuple[str, str]]


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass
class ModelConfig:
    mode: str = "combined"
    dim: int = 300
    learning_rate: float = 0.05
    epochs: int = 30
    negatives_per_positive: int = 10
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.dim < 1 or self.epochs < 1 or self.negatives_per_positive < 1:
            raise ValueError("dim, epochs and negatives_per_positive must be >= 1")
        if self.learning_rate <= 0 or self.l2 < 0:
            raise ValueError("learning_rate must be > 0 and l2 >= 0")


class Model:
    """Parameter container plus scoring; see the module docstring for the math."""

    def __init__(self, config: ModelConfig, feature_space: FeatureSpace | None = None):
        self.config = config
        self.feature_space = feature_space if feature_space is not None else FeatureSpace()
        self.theta: dict[Predicate, np.ndarray] = {}
        self.omega: dict[Predicate, dict[int, float]] = {}
        self.phi_entity: dict[str, np.ndarray] = {}
        self.phi_pair: dict[tuple[str, str], np.ndarray] = {}

    def knows(self, predicate: Predicate) -> bool:
        return predicate in self.theta

    def predicates(self) -> list[Predicate]:
        return list(self.theta)

    # -- scoring -------------------------------------------------------

    def _phi(self, predicate: Predicate, key: Key) -> np.ndarray | None:
        return (
            self.phi_entity.get(key)
            if predicate.arity == 1
            else self.phi_pair.get(key)
        )

    def raw_score(self, predicate: Predicate, key: Key, psi: frozenset[int]) -> float:
        """theta.phi + omega.psi, with the mode's disabled term dropped and a
        missing phi entry contributing 0."""
        total = 0.0
        if self.config.mode != "formal":
            phi = self._phi(predicate, key)
            if phi is not None:
                total += float(self.theta[predicate] @ phi)
        if self.config.mode != "distributional":
            omega = self.omega.get(predicate)
            if omega:
                total += sum(w for f, w in omega.items() if f in psi)
        return total

    def score_category(self, category: Predicate, entity: str, psi: frozenset[int]) -> float:
        if category.name == UNKNOWN_PREDICATE:
            return NEUTRAL_PROBABILITY
        if category.arity != 1:
            raise ScoringError(f"{category.name} is not a category predicate")
        if category not in self.theta:
            raise ScoringError(f"unknown category predicate: {category.name}")
        return sigmoid(self.raw_score(category, entity, psi))

    def score_relation(
        self, relation: Predicate, e1: str, e2: str, psi: frozenset[int]
    ) -> float:
        if relation.name == UNKNOWN_PREDICATE:
            return NEUTRAL_PROBABILITY
        if relation.arity != 2:
            raise ScoringError(f"{relation.name} is not a relation predicate")
        if relation not in self.theta:
            raise ScoringError(f"unknown relation predicate: {relation.name}")
        pair = (e1, e2)
        if self.config.mode == "distributional" and pair not in self.phi_pair:
            return 0.0
        return sigmoid(self.raw_score(relation, pair, psi))


def initialize_model(
    config: ModelConfig,
    instances: Sequence[PredicateInstance],
    selected: SelectedFeatures,
    feature_space: FeatureSpace,
) -> Model:
    """Fresh model with seeded uniform theta/phi in [-0.1/sqrt(dim), 0.1/sqrt(dim)]
    and omega zeroed over each predicate's selected features.

    Parameters are created in first-appearance order over the instances, so a
    fixed seed reproduces the exact same state.  In formal mode theta and phi
    are pinned at zero.
    """
    model = Model(config, feature_space)
    rng = np.random.default_rng(config.seed)
    scale = 0.1 / math.sqrt(config.dim)

    def fresh() -> np.ndarray:
        if config.mode == "formal":
            return np.zeros(config.dim)
        return rng.uniform(-scale, scale, size=config.dim)

    for inst in instances:
        if inst.predicate not in model.theta:
            model.theta[inst.predicate] = fresh()
            ranked = selected.get(inst.predicate, [])
            model.omega[inst.predicate] = {feat: 0.0 for feat, _ in ranked}
        key = inst.key
        if inst.predicate.arity == 1:
            if key not in model.phi_entity:
                model.phi_entity[key] = fresh()
        else:
            if key not in model.phi_pair:
                model.phi_pair[key] = fresh()
    return model


def pair_loss_and_grads(
    theta: np.ndarray,
    phi_pos: np.ndarray | None,
    phi_neg: np.ndarray | None,
    omega: dict[int, float],
    psi_pos: frozenset[int],
    psi_neg: frozenset[int],
    l2: float,
):
    """Loss and exact gradients for one (positive, negative) ranking pair.

    Loss = -log sigma(s+ - s-) + l2 * (|theta|^2 + |phi+|^2 + |phi-|^2 +
    |omega|^2), where s = theta.phi + omega.psi and absent phi entries
    contribute nothing (and receive no gradient).

    Returns (loss, grad_theta, grad_phi_pos, grad_phi_neg, grad_omega).
    """
    s_pos = float(theta @ phi_pos) if phi_pos is not None else 0.0
    s_neg = float(theta @ phi_neg) if phi_neg is not None else 0.0
    for f, w in omega.items():
        if f in psi_pos:
            s_pos += w
        if f in psi_neg:
            s_neg += w
    margin = s_pos - s_neg
    # -log sigma(m) = log(1 + exp(-m)), computed stably
    loss = math.log1p(math.exp(-abs(margin))) + max(-margin, 0.0)
    g = sigmoid(margin) - 1.0  # d loss / d margin

    grad_theta = np.zeros_like(theta)
    if phi_pos is not None:
        grad_theta += g * phi_pos
    if phi_neg is not None:
        grad_theta -= g * phi_neg
    grad_theta += 2.0 * l2 * theta

    grad_phi_pos = g * theta + 2.0 * l2 * phi_pos if phi_pos is not None else None
    grad_phi_neg = -g * theta + 2.0 * l2 * phi_neg if phi_neg is not None else None

    grad_omega = {}
    for f, w in omega.items():
        grad = 2.0 * l2 * w
        if f in psi_pos:
            grad += g
        if f in psi_neg:
            grad -= g
        grad_omega[f] = grad

    if l2:
        loss += l2 * float(theta @ theta)
        if phi_pos is not None:
            loss += l2 * float(phi_pos @ phi_pos)
        if phi_neg is not None:
            loss += l2 * float(phi_neg @ phi_neg)
        loss += l2 * sum(w * w for w in omega.values())
    return loss, grad_theta, grad_phi_pos, grad_phi_neg, grad_omega


def train(
    model: Model,
    instances: Sequence[PredicateInstance],
    vector_lookup: Callable[[tuple[str, ...]], frozenset[int]],
    negative_universe: Callable[[PredicateInstance], Sequence[Key]],
) -> list[float]:
    """SGD over shuffled instances; returns the per-epoch mean ranking loss.

    Each positive draws ``negatives_per_positive`` uniform samples (with
    replacement) from its universe.  The traced loss is the ranking term
    only; the L2 term enters the gradients.  Formal mode updates omega only,
    distributional mode updates theta/phi only.
    """
    if not instances:
        raise TrainingError("empty training set")
    cfg = model.config
    rng = np.random.default_rng(cfg.seed + 1)
    update_embeddings = cfg.mode != "formal"
    update_omega = cfg.mode != "distributional"
    lr = cfg.learning_rate

    universes = []
    for inst in instances:
        universe = negative_universe(inst)
        if not universe:
            raise TrainingError(
                f"empty candidate universe for instance {inst.predicate.name}{inst.args}"
            )
        universes.append(universe)
    psis = [vector_lookup(inst.args) for inst in instances]

    epoch_losses: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(instances))
        total = 0.0
        pairs = 0
        for idx in order:
            inst = instances[idx]
            predicate = inst.predicate
            pos_key = inst.key
            psi_pos = psis[idx]
            universe = universes[idx]
            theta = model.theta[predicate]
            omega = model.omega.get(predicate, {})
            phi_table = model.phi_entity if predicate.arity == 1 else model.phi_pair
            draws = rng.integers(len(universe), size=cfg.negatives_per_positive)
            for draw in draws:
                neg_key = universe[int(draw)]
                psi_neg = (
                    vector_lookup((neg_key,))
                    if predicate.arity == 1
                    else vector_lookup(neg_key)
                )
                phi_pos = phi_table.get(pos_key)
                phi_neg = phi_table.get(neg_key)
                loss, g_theta, g_phi_pos, g_phi_neg, g_omega = pair_loss_and_grads(
                    theta, phi_pos, phi_neg, omega, psi_pos, psi_neg, cfg.l2
                )
                total += loss
                pairs += 1
                if update_embeddings:
                    theta -= lr * g_theta
                    if g_phi_pos is not None:
                        phi_pos -= lr * g_phi_pos
                    if g_phi_neg is not None:
                        phi_neg -= lr * g_phi_neg
                if update_omega and omega:
                    for f, grad in g_omega.items():
                        omega[f] -= lr * grad
        mean_loss = total / pairs
        if not math.isfinite(mean_loss):
            raise TrainingError(f"non-finite loss {mean_loss} at epoch {epoch + 1}")
        epoch_losses.append(mean_loss)
    return epoch_losses


# -- serialization -----------------------------------------------------

def _hex_vector(vec: np.ndarray) -> list[str]:
    return [float(x).hex() for x in vec]


def _unhex_vector(values: list[str], dim: int, what: str) -> np.ndarray:
    try:
        vec = np.array([float.fromhex(v) for v in values], dtype=np.float64)
    except (TypeError, ValueError):
        raise LoadError(f"model file: bad float encoding in {what}") from None
    if vec.shape != (dim,):
        raise LoadError(f"model file: {what} has length {len(values)}, expected {dim}")
    return vec


def save_model(model: Model, path: str) -> None:
    """Versioned text serialization; floats as hex so loads are bit-exact."""
    predicates = []
    for predicate in model.theta:
        predicates.append(
            {
                "name": predicate.name,
                "arity": predicate.arity,
                "theta": _hex_vector(model.theta[predicate]),
                "omega": [
                    [model.feature_space.string_of(f), float(w).hex()]
                    for f, w in model.omega.get(predicate, {}).items()
                ],
            }
        )
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": asdict(model.config),
        "predicates": predicates,
        "entities": [[name, _hex_vector(vec)] for name, vec in model.phi_entity.items()],
        "pairs": [
            [list(pair), _hex_vector(vec)] for pair, vec in model.phi_pair.items()
        ],
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)
        handle.write("\n")


def load_model(path: str) -> Model:
    """Inverse of :func:`save_model`; raises LoadError on any defect, never
    returning a partial model."""
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as exc:
        raise LoadError(f"model file: invalid JSON: {exc.msg}") from None
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise LoadError("model file: missing or wrong format header")
    if payload.get("version") != MODEL_VERSION:
        raise LoadError(
            f"model file: version {payload.get('version')!r} unsupported "
            f"(expected {MODEL_VERSION})"
        )
    try:
        config = ModelConfig(**payload["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"model file: bad config: {exc}") from None

    model = Model(config)
    try:
        for entry in payload["predicates"]:
            predicate = Predicate(entry["name"], entry["arity"])
            model.theta[predicate] = _unhex_vector(
                entry["theta"], config.dim, f"theta[{predicate.name}]"
            )
            omega = {}
            for feature_text, weight_hex in entry["omega"]:
                omega[model.feature_space.intern(feature_text)] = float.fromhex(weight_hex)
            model.omega[predicate] = omega
        for name, values in payload["entities"]:
            model.phi_entity[name] = _unhex_vector(values, config.dim, f"phi[{name}]")
        for pair, values in payload["pairs"]:
            e1, e2 = pair
            model.phi_pair[(e1, e2)] = _unhex_vector(values, config.dim, f"phi[{e1},{e2}]")
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"model file: malformed payload: {exc}") from None
    return model
