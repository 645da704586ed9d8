"""Synthetic inference-pattern graphs and a train-then-check harness.

Each pattern is a tiny graph whose training facts must be retrieved exactly
(F1 = 1 on every head and tail query) while a list of forbidden facts must
stay disjoint.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .kg import HEAD_QUERY, TAIL_QUERY, KnowledgeGraph
from .model import ModelConfig, SphereModel
from .retrieval import f1, query_distances, sphere_mask
from .training import fit

PATTERNS = ("symmetry", "anti_symmetry", "inversion", "composition", "nc_composition",
            "multiplicity", "rmp_1n", "rmp_n1", "rmp_nn")

# SpherE-2D is not expected to express these.
EXPECTED_2D_FAILURES = ("nc_composition", "multiplicity")

Facts = List[Tuple[int, int, int]]


@dataclass
class PatternGraph:
    name: str
    facts: Facts
    forbidden: Facts
    n_entities: int
    n_relations: int

    def kg(self) -> KnowledgeGraph:
        return KnowledgeGraph.from_ids(self.facts, n_entities=self.n_entities, n_relations=self.n_relations)


def pattern_graph(pattern: str) -> PatternGraph:
    """Build the synthetic graph for ``pattern``; two spare entities appear in no fact."""
    if pattern == "symmetry":
        pairs = [(0, 1), (2, 3), (4, 5)]
        facts = [(a, 0, b) for a, b in pairs] + [(b, 0, a) for a, b in pairs]
        return PatternGraph(pattern, facts, [(a, 0, a) for a in range(6)], 8, 1)
    if pattern == "anti_symmetry":
        facts = [(0, 0, 1), (2, 0, 3), (4, 0, 5), (1, 0, 2)]
        return PatternGraph(pattern, facts, [(t, r, h) for h, r, t in facts], 8, 1)
    if pattern == "inversion":
        pairs = [(0, 1), (2, 3), (4, 5)]
        facts = [(a, 0, b) for a, b in pairs] + [(b, 1, a) for a, b in pairs]
        forbidden = [(b, 0, a) for a, b in pairs] + [(a, 1, b) for a, b in pairs]
        return PatternGraph(pattern, facts, forbidden, 8, 2)
    if pattern == "composition":
        facts = []
        for x, y, z in [(0, 1, 2), (3, 4, 5), (6, 7, 8)]:
            facts += [(x, 0, y), (y, 1, z), (x, 2, z)]
        return PatternGraph(pattern, facts, [(x, 2, y) for x, y in [(0, 1), (3, 4), (6, 7)]], 11, 3)
    if pattern == "nc_composition":
        # r2 = r0 then r1; r3 = r1 then r0
        facts, forbidden = [], []
        for x, y, z in [(0, 1, 2), (3, 4, 5)]:
            facts += [(x, 0, y), (y, 1, z), (x, 2, z)]
            forbidden.append((x, 3, z))
        for x, y, z in [(6, 7, 8), (9, 10, 11)]:
            facts += [(x, 1, y), (y, 0, z), (x, 3, z)]
            forbidden.append((x, 2, z))
        return PatternGraph(pattern, facts, forbidden, 14, 4)
    if pattern == "multiplicity":
        facts = [(0, 0, 1), (0, 1, 1), (2, 0, 3), (4, 1, 5), (6, 2, 7)]
        forbidden = [(0, 2, 1), (2, 1, 3), (2, 2, 3), (4, 0, 5), (6, 0, 7), (6, 1, 7)]
        return PatternGraph(pattern, facts, forbidden, 10, 3)
    if pattern == "rmp_1n":
        facts = [(0, 0, t) for t in range(1, 6)]
        return PatternGraph(pattern, facts, [(t, 0, 0) for t in range(1, 6)], 8, 1)
    if pattern == "rmp_n1":
        facts = [(h, 0, 0) for h in range(1, 6)]
        return PatternGraph(pattern, facts, [(0, 0, h) for h in range(1, 6)], 8, 1)
    if pattern == "rmp_nn":
        facts = [(h, 0, t) for h in range(3) for t in range(3, 6)]
        return PatternGraph(pattern, facts, [(t, 0, h) for h in range(3) for t in range(3, 6)], 8, 1)
    raise ValueError(f"unknown pattern {pattern!r}; expected one of {PATTERNS}")


def suite_config(k: int, seed: int = 0, **overrides) -> ModelConfig:
    base = dict(k=k, n_blocks=4, gamma=3.0, alpha=0.0, beta=0.0, adv_temperature=1.0,
                learning_rate=0.02, neg_count=16, batch_size=64, steps=5000, seed=seed, log_every=100,
                filter_negatives=1)
    base.update(overrides)
    return ModelConfig(**base).validate()


def training_fact_f1(model: SphereModel, kg: KnowledgeGraph) -> float:
    """Mean sphere-retrieval F1 over the head and tail query of every training fact."""
    scores = []
    for direction in (TAIL_QUERY, HEAD_QUERY):
        for h, r, t in kg.train:
            anchor = h if direction == TAIL_QUERY else t
            dists = query_distances(model, direction, [anchor], [r])[0]
            got = np.flatnonzero(sphere_mask(model, model.radii[anchor], dists))
            scores.append(f1(got.tolist(), kg.answers(direction, anchor, r)))
    return float(np.mean(scores))


def forbidden_retrieved(model: SphereModel, forbidden: Sequence[Tuple[int, int, int]]) -> int:
    return sum(bool(model.is_retrieved(h, r, t)) for h, r, t in forbidden)


@dataclass
class ExpressivenessResult:
    pattern: str
    k: int
    passed: bool
    f1: float
    forbidden_retrieved: int
    steps: int
    expected_pass: bool = True
    history: List[Tuple[int, float]] = field(default_factory=list)


def expressiveness_suite(k: int, pattern: str, max_steps: int = 5000, check_every: int = 100,
                         seed: int = 0, config: Optional[ModelConfig] = None) -> ExpressivenessResult:
    """Train on the pattern graph, checking every ``check_every`` steps; stop at the first pass."""
    graph = pattern_graph(pattern)
    kg = graph.kg()
    config = config or suite_config(k, seed)
    rng = np.random.default_rng(config.seed)
    model = SphereModel.initialize(config, kg.n_entities, kg.n_relations, rng)
    history = []
    done = 0
    score, bad = 0.0, len(graph.forbidden)
    while True:
        score = training_fact_f1(model, kg)
        bad = forbidden_retrieved(model, graph.forbidden)
        history.append((done, score))
        if (score == 1.0 and bad == 0) or done >= max_steps:
            break
        n = min(check_every, max_steps - done)
        fit(model, kg, config, rng, steps=n)
        done += n
    expected = not (k == 2 and pattern in EXPECTED_2D_FAILURES)
    return ExpressivenessResult(pattern, k, score == 1.0 and bad == 0, score, bad, done, expected, history)


def run_suite(ks: Sequence[int] = (2, 3), **kwargs) -> Dict[Tuple[int, str], ExpressivenessResult]:
    return {(k, p): expressiveness_suite(k, p, **kwargs) for k in ks for p in PATTERNS}
