"""Set retrieval by sphere intersection, top-l baselines and evaluation metrics."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .kg import CATEGORIES, HEAD_QUERY, MANY_TO_MANY, TAIL_QUERY, KnowledgeGraph, classify_relations, occurrence_counts
from .model import SphereModel

SPHERE = "sphere"
DEFAULT_LS = (1, 3, 5, 10, 20, 100)
CHUNK = 128


@dataclass(frozen=True)
class QueryResult:
    query: Tuple[str, int, int]
    retrieved: FrozenSet[int]
    mode: str


def mode_name(l: Optional[int]) -> str:
    return SPHERE if l is None else f"top-{l}"


def parse_mode(mode: str) -> Optional[int]:
    """``"sphere"`` -> ``None``; ``"top-5"``/``"top_l=5"`` -> ``5``."""
    if mode == SPHERE:
        return None
    for prefix in ("top-", "top_l=", "top"):
        if mode.startswith(prefix):
            return int(mode[len(prefix):])
    raise ValueError(f"unknown retrieval mode {mode!r}")


def _check_direction(direction: str) -> None:
    if direction not in (TAIL_QUERY, HEAD_QUERY):
        raise ValueError(f"unknown query direction {direction!r}")


def query_points(model: SphereModel, direction: str, anchors, rels) -> np.ndarray:
    """Rotated anchor centers, flat ``(m, d)``: f_r(c_h) for tail queries,
    f_r^-1(c_t) for head queries."""
    _check_direction(direction)
    anchors = np.atleast_1d(np.asarray(anchors, dtype=np.int64))
    rels = np.atleast_1d(np.asarray(rels, dtype=np.int64))
    model._check_ids(anchors, rels)
    y = model.rotate(rels, model.centers[anchors], inverse=direction == HEAD_QUERY)
    return y.reshape(len(anchors), -1)


def query_distances(model: SphereModel, direction: str, anchors, rels, threads: int = 1) -> np.ndarray:
    """Euclidean center distance from each query to every entity, ``(m, |E|)``."""
    q = query_points(model, direction, anchors, rels)
    flat = np.ascontiguousarray(model.centers.reshape(model.n_entities, -1))
    return kernels.query_distances(q, flat, threads)


def sphere_mask(model: SphereModel, anchor_radius: float, dists: np.ndarray) -> np.ndarray:
    return dists <= anchor_radius + model.radii


def top_l_indices(dists: np.ndarray, l: int) -> np.ndarray:
    """The ``l`` smallest distances, ties broken by ascending entity id."""
    if l < 1:
        raise ValueError("l must be >= 1")
    n = len(dists)
    if l >= n:
        return np.arange(n)
    kth = np.partition(dists, l - 1)[l - 1]
    less = np.flatnonzero(dists < kth)
    tied = np.flatnonzero(dists == kth)[: l - len(less)]
    return np.concatenate([less, tied])


def retrieve_set(model: SphereModel, kg: KnowledgeGraph, direction: str, anchor: int, rel: int) -> QueryResult:
    dists = query_distances(model, direction, [anchor], [rel])[0]
    mask = sphere_mask(model, model.radii[anchor], dists)
    return QueryResult((direction, anchor, rel), frozenset(np.flatnonzero(mask).tolist()), SPHERE)


def retrieve_top_l(model: SphereModel, kg: KnowledgeGraph, direction: str, anchor: int, rel: int,
                   l: int) -> QueryResult:
    dists = query_distances(model, direction, [anchor], [rel])[0]
    idx = top_l_indices(dists, l)
    return QueryResult((direction, anchor, rel), frozenset(idx.tolist()), mode_name(l))


def f1(retrieved: Iterable[int], truth: Iterable[int]) -> float:
    retrieved = set(retrieved)
    truth = set(truth)
    tp = len(retrieved & truth)
    if tp == 0:
        return 0.0
    return 2.0 * tp / (len(retrieved) + len(truth))


@dataclass
class MetricsReport:
    mode: str
    head_f1: float
    tail_f1: float
    head_rr: float
    tail_rr: float
    nn_f1: float
    n_queries: int
    nn_queries: int = 0
    per_category: Dict[str, float] = field(default_factory=dict)

    COLUMNS = ("mode", "head_f1", "tail_f1", "head_rr", "tail_rr", "nn_f1", "n_queries")

    def row(self) -> Tuple:
        return (self.mode, self.head_f1, self.tail_f1, self.head_rr, self.tail_rr, self.nn_f1, self.n_queries)


def write_metrics_csv(reports: Sequence[MetricsReport], out) -> None:
    out.write(",".join(MetricsReport.COLUMNS) + "\n")
    for rep in reports:
        mode, *vals, n = rep.row()
        out.write(mode + "," + ",".join(f"{v:.6f}" for v in vals) + f",{n}\n")


def evaluate(model: SphereModel, kg: KnowledgeGraph, modes: Sequence[Optional[int]] = (None,),
             head_model: Optional[SphereModel] = None, threads: int = 1,
             split: str = "test") -> List[MetricsReport]:
    """Set-retrieval metrics over both masked queries of every triple in ``split``.

    ``modes`` holds ``None`` for sphere retrieval or an integer ``l`` for the
    top-l baseline. F1 and retrieve rate are averaged per triple, so repeated
    queries count once for each triple that produces them. ``head_model``, if
    given, answers the head queries.
    """
    triples = np.asarray(getattr(kg, split), dtype=np.int64).reshape(-1, 3)
    if len(triples) == 0:
        raise ValueError(f"empty {split} split")
    cats = {c.rel: c.category for c in classify_relations(kg.train, kg.n_relations, model.config.rmp_threshold)}
    modes = list(modes)
    # per mode, per direction: arrays of per-triple f1 / hit
    f1s = {m: {} for m in range(len(modes))}
    hits = {m: {} for m in range(len(modes))}
    for direction in (TAIL_QUERY, HEAD_QUERY):
        mdl = head_model if (direction == HEAD_QUERY and head_model is not None) else model
        if direction == TAIL_QUERY:
            anchors, answers = triples[:, 0], triples[:, 2]
        else:
            anchors, answers = triples[:, 2], triples[:, 0]
        rels = triples[:, 1]
        keys, inverse = np.unique(np.stack([anchors, rels], axis=1), axis=0, return_inverse=True)
        inverse = inverse.ravel()
        by_query = defaultdict(list)
        for i, q in enumerate(inverse):
            by_query[q].append(i)
        per_f1 = np.zeros((len(modes), len(triples)))
        per_hit = np.zeros((len(modes), len(triples)))
        for start in range(0, len(keys), CHUNK):
            chunk = keys[start:start + CHUNK]
            dists = query_distances(mdl, direction, chunk[:, 0], chunk[:, 1], threads)
            for j, (anchor, rel) in enumerate(chunk):
                truth = np.fromiter(kg.answers(direction, int(anchor), int(rel)), dtype=np.int64)
                rows = by_query[start + j]
                for mi, l in enumerate(modes):
                    if l is None:
                        mask = sphere_mask(mdl, mdl.radii[anchor], dists[j])
                    else:
                        mask = np.zeros(mdl.n_entities, dtype=bool)
                        mask[top_l_indices(dists[j], l)] = True
                    tp = int(mask[truth].sum())
                    score = 2.0 * tp / (int(mask.sum()) + len(truth)) if tp else 0.0
                    per_f1[mi, rows] = score
                    per_hit[mi, rows] = mask[answers[rows]]
        for mi in range(len(modes)):
            f1s[mi][direction] = per_f1[mi]
            hits[mi][direction] = per_hit[mi]
    rel_cat = np.array([cats[int(r)] for r in triples[:, 1]])
    reports = []
    for mi, l in enumerate(modes):
        both = np.concatenate([f1s[mi][TAIL_QUERY], f1s[mi][HEAD_QUERY]])
        cat_both = np.concatenate([rel_cat, rel_cat])
        per_category = {c: float(both[cat_both == c].mean()) for c in CATEGORIES if np.any(cat_both == c)}
        nn = both[cat_both == MANY_TO_MANY]
        reports.append(MetricsReport(
            mode=mode_name(l),
            head_f1=float(f1s[mi][HEAD_QUERY].mean()),
            tail_f1=float(f1s[mi][TAIL_QUERY].mean()),
            head_rr=float(hits[mi][HEAD_QUERY].mean()),
            tail_rr=float(hits[mi][TAIL_QUERY].mean()),
            nn_f1=float(nn.mean()) if len(nn) else 0.0,
            n_queries=2 * len(triples),
            nn_queries=len(nn),
            per_category=per_category,
        ))
    return reports


# --- radius vs occurrence --------------------------------------------------------

@dataclass
class RadiusOccurrenceStats:
    buckets: Dict[int, Tuple[int, float]]
    spearman: float

    def to_csv(self, out) -> None:
        out.write("occurrence,n_entities,mean_radius\n")
        for occ in sorted(self.buckets):
            n, mean = self.buckets[occ]
            out.write(f"{occ},{n},{mean:.10g}\n")


def spearman(a, b) -> float:
    """Rank correlation; 0 when either side is constant."""
    from scipy.stats import spearmanr

    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or np.all(a == a[0]) or np.all(b == b[0]):
        return 0.0
    return float(spearmanr(a, b)[0])


def radius_occurrence(model: SphereModel, kg: KnowledgeGraph) -> RadiusOccurrenceStats:
    """Mean learned radius per exact occurrence count (entities never seen are dropped)."""
    counts = np.asarray(occurrence_counts(kg))
    seen = counts > 0
    radii = model.radii[: len(counts)]
    buckets = {}
    for occ in np.unique(counts[seen]):
        sel = counts == occ
        buckets[int(occ)] = (int(sel.sum()), float(radii[sel].mean()))
    return RadiusOccurrenceStats(buckets, spearman(counts[seen], radii[seen]))
