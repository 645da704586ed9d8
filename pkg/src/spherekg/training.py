"""Negative sampling, self-adversarial sigmoid loss, analytic gradients and Adam."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import kernels
from .kg import KnowledgeGraph, Triple
from .model import ModelConfig, SphereModel

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "loss", "positive_term", "negative_term", "mean_training_distance")


class DivergenceError(FloatingPointError):
    pass


@dataclass
class TrainingBatch:
    """``positives`` is ``(B, 3)``; ``negatives`` is ``(B, neg_count, 3)``."""

    positives: np.ndarray
    negatives: np.ndarray

    @classmethod
    def from_triples(cls, positives, negatives) -> "TrainingBatch":
        pos = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
        neg = np.asarray(negatives, dtype=np.int64).reshape(len(pos), -1, 3)
        return cls(pos, neg)


@dataclass
class LossReport:
    total_loss: float
    positive_term: float
    negative_term: float
    mean_training_distance: float


@dataclass
class Gradients:
    centers: np.ndarray
    radii: np.ndarray
    rel_params: np.ndarray

    def items(self):
        return (("centers", self.centers), ("radii", self.radii), ("rel_params", self.rel_params))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softplus(x):
    return np.logaddexp(0.0, x)


# --- negative sampling -------------------------------------------------------

def corrupt(rng: np.random.Generator, n_entities: int, positives: np.ndarray, neg_count: int) -> np.ndarray:
    """Raw negatives ``(B, neg_count, 3)``: a fair coin picks the side, a uniform
    *different* entity replaces it."""
    if neg_count < 1:
        raise ValueError("neg_count must be >= 1")
    if n_entities < 2:
        raise ValueError("need at least two entities to corrupt a triple")
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    B = len(positives)
    head_side = rng.random((B, neg_count)) < 0.5
    draw = rng.integers(0, n_entities - 1, size=(B, neg_count))
    neg = np.repeat(positives[:, None, :], neg_count, axis=1)
    orig = np.where(head_side, neg[..., 0], neg[..., 2])
    repl = draw + (draw >= orig)
    neg[..., 0] = np.where(head_side, repl, neg[..., 0])
    neg[..., 2] = np.where(head_side, neg[..., 2], repl)
    return neg


def triple_keys(triples: np.ndarray, n_entities: int, n_relations: int) -> np.ndarray:
    t = np.asarray(triples, dtype=np.int64)
    return (t[..., 0] * n_relations + t[..., 1]) * n_entities + t[..., 2]


def corrupt_filtered(rng: np.random.Generator, n_entities: int, n_relations: int, positives: np.ndarray,
                     neg_count: int, known_keys: np.ndarray, max_rounds: int = 20) -> np.ndarray:
    """Like :func:`corrupt`, but redraws negatives that are known facts.

    ``known_keys`` are sorted :func:`triple_keys` of the known facts. Draws still
    colliding after ``max_rounds`` redraws are kept.
    """
    neg = corrupt(rng, n_entities, positives, neg_count)
    pos = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    for _ in range(max_rounds):
        bad = np.isin(triple_keys(neg, n_entities, n_relations), known_keys)
        if not bad.any():
            break
        rows, cols = np.nonzero(bad)
        fresh = corrupt(rng, n_entities, pos[rows], 1)[:, 0]
        neg[rows, cols] = fresh
    return neg


def sample_negatives(rng: np.random.Generator, kg: KnowledgeGraph, positive, neg_count: int) -> List[Triple]:
    neg = corrupt(rng, kg.n_entities, np.asarray(positive)[None, :], neg_count)[0]
    return [Triple(*map(int, x)) for x in neg]


# --- loss and gradients --------------------------------------------------------

def _pre_hinge(model: SphereModel, triples: np.ndarray):
    c = model.config
    h, r, t = triples[:, 0], triples[:, 1], triples[:, 2]
    y = model.rotate(r, model.centers[h])
    diff = (y - model.centers[t]).reshape(len(triples), -1)
    p = c.p_norm
    if p == 2:
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    elif p == 1:
        dist = np.abs(diff).sum(axis=1)
    else:
        dist = (np.abs(diff) ** p).sum(axis=1) ** (1.0 / p)
    pre = dist - (1 + c.alpha) * model.radii[h] - (1 + c.beta) * model.radii[t]
    return pre, dist, diff


def training_distances(model: SphereModel, triples) -> np.ndarray:
    """Hinged distance for each row of ``(N, 3)`` triples."""
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    return np.maximum(_pre_hinge(model, triples)[0], 0.0)


def adversarial_weights(model: SphereModel, negatives, adv_temperature: Optional[float] = None) -> np.ndarray:
    """Softmax of ``temperature * (gamma - d)`` along the last axis; constants w.r.t. parameters."""
    neg = np.asarray(negatives, dtype=np.int64)
    if neg.size == 0:
        raise ValueError("no negatives to weight")
    temp = model.config.adv_temperature if adv_temperature is None else adv_temperature
    shape = neg.shape[:-1]
    d = training_distances(model, neg.reshape(-1, 3)).reshape(shape)
    return _softmax(temp * (model.config.gamma - d))


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(model: SphereModel, batch: TrainingBatch, weights=None):
    c = model.config
    for name in ("centers", "radii", "rel_params"):
        if not np.all(np.isfinite(getattr(model, name))):
            raise DivergenceError(f"non-finite values in {name} before loss computation")
    pos = batch.positives
    B, n = batch.negatives.shape[:2]
    triples = np.concatenate([pos, batch.negatives.reshape(-1, 3)]) if n else pos
    pre, dist, diff = _pre_hinge(model, triples)
    d = np.maximum(pre, 0.0)
    pos_d = d[:B]
    neg_d = d[B:].reshape(B, n)
    if weights is None:
        weights = _softmax(c.adv_temperature * (c.gamma - neg_d)) if n else np.zeros((B, 0))
    pos_terms = _softplus(pos_d - c.gamma)
    neg_terms = np.sum(weights * _softplus(c.gamma - neg_d), axis=1)
    return dict(triples=triples, pre=pre, dist=dist, diff=diff, pos_d=pos_d, neg_d=neg_d,
                weights=weights, pos_terms=pos_terms, neg_terms=neg_terms)


def per_positive_loss(model: SphereModel, batch: TrainingBatch, weights=None) -> np.ndarray:
    """Loss contribution of each positive (before averaging)."""
    f = _forward(model, batch, weights)
    return f["pos_terms"] + f["neg_terms"]


def _report(f) -> LossReport:
    pos = float(np.mean(f["pos_terms"]))
    neg = float(np.mean(f["neg_terms"]))
    return LossReport(pos + neg, pos, neg, float(np.mean(f["pos_d"])))


def loss(model: SphereModel, batch: TrainingBatch, weights=None) -> LossReport:
    return _report(_forward(model, batch, weights))


def gradients(model: SphereModel, batch: TrainingBatch, weights=None, with_report: bool = False):
    """Analytic gradient of the batch-mean loss.

    Adversarial weights are held constant. Subgradients: the hinge has slope 0
    at 0, and the norm has gradient 0 at the origin.
    """
    c = model.config
    f = _forward(model, batch, weights)
    B, n = batch.negatives.shape[:2]
    g_d = np.empty(len(f["pre"]))
    g_d[:B] = _sigmoid(f["pos_d"] - c.gamma) / B
    g_d[B:] = (-f["weights"] * _sigmoid(c.gamma - f["neg_d"])).ravel() / B
    g_pre = np.where(f["pre"] > 0, g_d, 0.0)

    diff, dist = f["diff"], f["dist"]
    safe = np.where(dist > 0, dist, 1.0)
    if c.p_norm == 2:
        ddiff = diff / safe[:, None]
    elif c.p_norm == 1:
        ddiff = np.sign(diff)
    else:
        p = c.p_norm
        ddiff = np.sign(diff) * np.abs(diff) ** (p - 1) / safe[:, None] ** (p - 1)
    ddiff[dist == 0] = 0.0
    g_diff = g_pre[:, None] * ddiff

    triples = f["triples"]
    h, r, t = triples[:, 0], triples[:, 1], triples[:, 2]
    shape3 = (len(triples), c.n_blocks, c.k)
    g_y = np.ascontiguousarray(g_diff.reshape(shape3))
    grad_rel = np.zeros_like(model.rel_params)
    g_xh, grad_rel = kernels.rotate_vjp(model.kind, model.rel_params, np.ascontiguousarray(r),
                                        np.ascontiguousarray(model.centers[h]), g_y, False, grad_rel)
    grad_c = np.zeros_like(model.centers)
    flat = grad_c.reshape(model.n_entities, -1)
    kernels.scatter_add_rows(flat, np.ascontiguousarray(h), g_xh.reshape(len(triples), -1))
    kernels.scatter_add_rows(flat, np.ascontiguousarray(t), g_y.reshape(len(triples), -1), -1.0)
    grad_r = np.zeros_like(model.radii)
    np.add.at(grad_r, h, -(1 + c.alpha) * g_pre)
    np.add.at(grad_r, t, -(1 + c.beta) * g_pre)
    grads = Gradients(grad_c, grad_r, grad_rel)
    if with_report:
        return grads, _report(f)
    return grads


# --- optimisation ----------------------------------------------------------------

class Adam:
    """Dense Adam over the model's parameter arrays."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, model: SphereModel, grads: Gradients) -> None:
        self.t += 1
        if self.lr == 0:
            return
        b1, b2 = self.beta1, self.beta2
        bc1, bc2 = 1 - b1 ** self.t, 1 - b2 ** self.t
        for name, g in grads.items():
            param = getattr(model, name)
            if not param.flags.c_contiguous:
                param = np.ascontiguousarray(param)
                setattr(model, name, param)
            m = self.m.setdefault(name, np.zeros_like(param))
            v = self.v.setdefault(name, np.zeros_like(param))
            kernels.adam_update(param.reshape(-1), np.ascontiguousarray(g).reshape(-1), m.reshape(-1),
                                v.reshape(-1), self.lr, b1, b2, self.eps, bc1, bc2)
        model.renormalize()


@dataclass
class TrainingLog:
    rows: List[tuple] = field(default_factory=list)

    def append(self, step: int, report: LossReport) -> None:
        self.rows.append((step, report.total_loss, report.positive_term, report.negative_term,
                          report.mean_training_distance))

    def to_csv(self, out) -> None:
        out.write(",".join(LOG_COLUMNS) + "\n")
        for row in self.rows:
            out.write(f"{row[0]}," + ",".join(f"{v:.10g}" for v in row[1:]) + "\n")


def batches(rng: np.random.Generator, train: np.ndarray, batch_size: int):
    """Endless stream of shuffled mini-batches, reshuffling every epoch."""
    n = len(train)
    while True:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield train[order[start:start + batch_size]]


def fit(model: SphereModel, kg: KnowledgeGraph, config: Optional[ModelConfig] = None,
        rng: Optional[np.random.Generator] = None, steps: Optional[int] = None,
        callback: Optional[Callable[[int, LossReport], None]] = None) -> TrainingLog:
    """Train ``model`` in place on ``kg.train``; returns the loss log."""
    config = (config or model.config).validate()
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    steps = config.steps if steps is None else steps
    train = np.asarray(kg.train, dtype=np.int64).reshape(-1, 3)
    if len(train) == 0:
        raise ValueError("empty training split")
    known = np.unique(triple_keys(train, model.n_entities, model.n_relations)) if config.filter_negatives else None
    opt = Adam(config.learning_rate)
    stream = batches(rng, train, config.batch_size)
    history = TrainingLog()
    for i in range(steps):
        if config.lr_decay_every and i and i % config.lr_decay_every == 0:
            opt.lr *= config.lr_decay_factor
        pos = next(stream)
        if known is None:
            neg = corrupt(rng, model.n_entities, pos, config.neg_count)
        else:
            neg = corrupt_filtered(rng, model.n_entities, model.n_relations, pos, config.neg_count, known)
        batch = TrainingBatch(pos, neg)
        grads, report = gradients(model, batch, with_report=True)
        if not math.isfinite(report.total_loss):
            raise DivergenceError(f"loss became {report.total_loss} at step {model.step}")
        opt.step(model, grads)
        model.step += 1
        if not (np.all(np.isfinite(model.centers)) and np.all(np.isfinite(model.radii))
                and np.all(np.isfinite(model.rel_params))):
            raise DivergenceError(f"non-finite parameters after step {model.step}")
        if i % config.log_every == 0 or i == steps - 1:
            history.append(model.step, report)
            if callback is not None:
                callback(model.step, report)
    return history
