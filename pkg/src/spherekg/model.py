"""Sphere entity embeddings with blockwise relation rotations."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from . import kernels
from .rotations import kind_for_dim, param_width

FORWARD = "forward"
BACKWARD = "backward"


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class ModelConfig:
    k: int = 2
    n_blocks: int = 50
    gamma: float = 0.25
    alpha: float = 0.0
    beta: float = 0.0
    p_norm: int = 2
    adv_temperature: float = 1.0
    learning_rate: float = 0.01
    neg_count: int = 16
    batch_size: int = 512
    steps: int = 1000
    seed: int = 0
    rmp_threshold: float = 1.5
    n_reflections: int = 2
    filter_negatives: int = 0
    radius_init: float = 0.05
    init_epsilon: float = 2.0
    rotation_init: str = "random"
    lr_decay_every: int = 0
    lr_decay_factor: float = 0.5
    log_every: int = 10

    def validate(self) -> "ModelConfig":
        if not (self.k in (2, 3) or self.k >= 4):
            raise ConfigError("k", "must be 2, 3 or >= 4")
        if self.n_blocks < 1:
            raise ConfigError("n_blocks", "must be >= 1")
        if not self.gamma > 0:
            raise ConfigError("gamma", "must be > 0")
        if self.alpha < 0:
            raise ConfigError("alpha", "must be >= 0")
        if self.beta < 0:
            raise ConfigError("beta", "must be >= 0")
        if self.p_norm < 1:
            raise ConfigError("p_norm", "must be a positive integer")
        if not self.adv_temperature > 0:
            raise ConfigError("adv_temperature", "must be > 0")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate", "must be >= 0")
        if self.neg_count < 1:
            raise ConfigError("neg_count", "must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size", "must be >= 1")
        if self.steps < 0:
            raise ConfigError("steps", "must be >= 0")
        if not self.rmp_threshold > 0:
            raise ConfigError("rmp_threshold", "must be > 0")
        if self.n_reflections < 2 or self.n_reflections % 2:
            raise ConfigError("n_reflections", "must be an even number >= 2")
        if self.init_epsilon < 0:
            raise ConfigError("init_epsilon", "must be >= 0")
        if self.rotation_init not in ("random", "identity"):
            raise ConfigError("rotation_init", "must be 'random' or 'identity'")
        return self

    @property
    def dim(self) -> int:
        return self.k * self.n_blocks

    def to_dict(self) -> Dict[str, object]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, object]) -> "ModelConfig":
        """Build from string or typed values, coercing to the declared field types."""
        kwargs = {}
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(key, "unknown configuration key")
            typ = types[key]
            try:
                if typ in ("int", int):
                    kwargs[key] = int(raw)
                elif typ in ("float", float):
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = str(raw)
            except ValueError as exc:
                raise ConfigError(key, f"cannot parse {raw!r}") from exc
        return cls(**kwargs)


@dataclass
class SphereModel:
    """All learnable parameters.

    ``centers`` is ``(n_entities, n_blocks, k)``, ``radii`` is ``(n_entities,)``
    and ``rel_params`` is ``(n_relations, n_blocks, P)``.
    """

    config: ModelConfig
    centers: np.ndarray
    radii: np.ndarray
    rel_params: np.ndarray
    step: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def kind(self) -> int:
        return kind_for_dim(self.config.k)

    @property
    def n_entities(self) -> int:
        return self.centers.shape[0]

    @property
    def n_relations(self) -> int:
        return self.rel_params.shape[0]

    @classmethod
    def initialize(cls, config: ModelConfig, n_entities: int, n_relations: int,
                   rng: np.random.Generator) -> "SphereModel":
        config.validate()
        k, nb = config.k, config.n_blocks
        # centers start spread wider than the radii, so the hinge is live
        bound = (config.gamma + config.init_epsilon) / config.dim
        centers = rng.uniform(-bound, bound, size=(n_entities, nb, k))
        radii = np.full(n_entities, config.radius_init)
        width = param_width(k, config.n_reflections)
        kind = kind_for_dim(k)
        if config.rotation_init == "identity":
            rel = np.zeros((n_relations, nb, width))
            if kind == kernels.QUAT:
                rel[..., 0] = 1.0
            elif kind == kernels.HOUSEHOLDER:
                rel.reshape(n_relations, nb, -1, k)[..., 0] = 1.0
        elif kind == kernels.ANGLE:
            rel = rng.uniform(-math.pi, math.pi, size=(n_relations, nb, 1))
        else:
            rel = rng.normal(size=(n_relations, nb, width))
        model = cls(config, centers, radii, rel)
        model.renormalize()
        return model

    def copy(self) -> "SphereModel":
        return SphereModel(dataclasses.replace(self.config), self.centers.copy(), self.radii.copy(),
                           self.rel_params.copy(), self.step, dict(self.extra))

    def renormalize(self) -> None:
        """Project quaternions / Householder normals back to unit length."""
        if self.kind == kernels.ANGLE:
            return
        k = self.config.k
        shaped = self.rel_params.reshape(self.rel_params.shape[:2] + (-1, 4 if self.kind == kernels.QUAT else k))
        norms = np.linalg.norm(shaped, axis=-1, keepdims=True)
        shaped /= np.where(norms == 0, 1.0, norms)

    def check_finite(self) -> None:
        for name in ("centers", "radii", "rel_params"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise FloatingPointError(f"non-finite values in {name}")

    def _check_ids(self, ents, rels) -> None:
        ents = np.asarray(ents)
        rels = np.asarray(rels)
        if ents.size and (ents.min() < 0 or ents.max() >= self.n_entities):
            raise IndexError("entity id out of range")
        if rels.size and (rels.min() < 0 or rels.max() >= self.n_relations):
            raise IndexError("relation id out of range")

    # --- batched primitives -------------------------------------------------

    def rotate(self, rels, x, inverse: bool = False) -> np.ndarray:
        rels = np.ascontiguousarray(rels, dtype=np.int64)
        self._check_ids([], rels)
        x = np.ascontiguousarray(x, dtype=np.float64)
        return kernels.rotate(self.kind, self.rel_params, rels, x, inverse)

    def center_distances(self, heads, rels, tails, direction: str = FORWARD, p: int = 2) -> np.ndarray:
        heads, rels, tails = (np.atleast_1d(np.asarray(a, dtype=np.int64)) for a in (heads, rels, tails))
        self._check_ids(np.concatenate([heads, tails]), rels)
        if direction == FORWARD:
            diff = self.rotate(rels, self.centers[heads]) - self.centers[tails]
        elif direction == BACKWARD:
            diff = self.centers[heads] - self.rotate(rels, self.centers[tails], inverse=True)
        else:
            raise ValueError(f"unknown direction {direction!r}")
        return _pnorm(diff.reshape(len(heads), -1), p)

    # --- single triple API --------------------------------------------------

    def transform_head(self, rel: int, center) -> np.ndarray:
        """Rotate a flat ``k * n_blocks`` center by relation ``rel``."""
        center = np.asarray(center, dtype=np.float64)
        if center.shape != (self.config.dim,):
            raise ValueError(f"center must have length {self.config.dim}")
        x = center.reshape(1, self.config.n_blocks, self.config.k)
        return self.rotate([rel], x)[0].ravel()

    def center_distance(self, h: int, rel: int, t: int, direction: str = FORWARD) -> float:
        return float(self.center_distances([h], [rel], [t], direction, self.config.p_norm)[0])

    def training_distance(self, h: int, rel: int, t: int) -> float:
        c = self.config
        dist = self.center_distance(h, rel, t)
        return max(0.0, dist - (1 + c.alpha) * self.radii[h] - (1 + c.beta) * self.radii[t])

    def is_retrieved(self, h: int, rel: int, t: int, direction: str = FORWARD) -> bool:
        """Sphere intersection test (Euclidean, unslacked); tangency counts."""
        dist = float(self.center_distances([h], [rel], [t], direction, 2)[0])
        return dist <= self.radii[h] + self.radii[t]


def _pnorm(v: np.ndarray, p: int) -> np.ndarray:
    if p == 2:
        return np.sqrt(np.einsum("ij,ij->i", v, v))
    if p == 1:
        return np.abs(v).sum(axis=1)
    return (np.abs(v) ** p).sum(axis=1) ** (1.0 / p)
