"""Single-block rotations: 2D angle, 3D quaternion, kD Householder chain.

Thin typed wrappers over the batched kernels in :mod:`spherekg.kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from . import kernels

NORM_TOL = 1e-9


class DimensionError(ValueError):
    """Vector dimension does not match the rotation variant."""


@dataclass(frozen=True)
class Angle2D:
    theta: float

    kind = kernels.ANGLE
    dim = 2

    def as_array(self) -> np.ndarray:
        return np.array([self.theta], dtype=np.float64)

    def inverse(self) -> "Angle2D":
        return Angle2D(-self.theta)


@dataclass(frozen=True)
class Quat3D:
    """Unit quaternion ``(w, x, y, z)``; normalised on construction."""

    q: Tuple[float, float, float, float]

    kind = kernels.QUAT
    dim = 3

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        if q.shape != (4,):
            raise DimensionError("quaternion needs 4 components")
        n = float(np.linalg.norm(q))
        if n == 0.0:
            raise ValueError("zero quaternion")
        object.__setattr__(self, "q", tuple(float(v) for v in q / n))

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Quat3D":
        axis = np.asarray(axis, dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        s = math.sin(angle / 2)
        return cls((math.cos(angle / 2), *(s * axis)))

    def as_array(self) -> np.ndarray:
        return np.array(self.q, dtype=np.float64)

    def inverse(self) -> "Quat3D":
        w, x, y, z = self.q
        return Quat3D((w, -x, -y, -z))


@dataclass(frozen=True)
class HouseholderKD:
    """Chain of ``m`` reflections ``I - 2 u u^T`` applied in list order; ``m`` even."""

    normals: Tuple[Tuple[float, ...], ...]

    kind = kernels.HOUSEHOLDER

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.normals, dtype=np.float64))
        if u.shape[0] % 2:
            raise ValueError("an even number of reflections is required for a rotation")
        if u.shape[1] < 2:
            raise DimensionError("normals need dimension >= 2")
        u = u / np.linalg.norm(u, axis=1, keepdims=True)
        object.__setattr__(self, "normals", tuple(tuple(float(v) for v in row) for row in u))

    @property
    def dim(self) -> int:
        return len(self.normals[0])

    def as_array(self) -> np.ndarray:
        return np.asarray(self.normals, dtype=np.float64).ravel()

    def inverse(self) -> "HouseholderKD":
        return HouseholderKD(tuple(reversed(self.normals)))


RotationParams = Union[Angle2D, Quat3D, HouseholderKD]


def _check(params: RotationParams, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (params.dim,):
        raise DimensionError(f"expected a vector of length {params.dim}, got shape {v.shape}")
    return v


def _run(params: RotationParams, v, inverse: bool) -> np.ndarray:
    v = _check(params, v)
    p = np.ascontiguousarray(params.as_array()[None, None, :])
    out = kernels.rotate(params.kind, p, np.zeros(1, dtype=np.int64), v[None, None, :].copy(), inverse)
    return out[0, 0]


def apply(params: RotationParams, v) -> np.ndarray:
    return _run(params, v, False)


def apply_inverse(params: RotationParams, v) -> np.ndarray:
    return _run(params, v, True)


def compose_check(p1: RotationParams, p2: RotationParams, v) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(p2(p1(v)), p1(p2(v)))``."""
    if p1.dim != p2.dim:
        raise DimensionError("rotations act on different dimensions")
    return apply(p2, apply(p1, v)), apply(p1, apply(p2, v))


def to_matrix(params: RotationParams) -> np.ndarray:
    """Dense matrix of the rotation, built column by column from :func:`apply`."""
    eye = np.eye(params.dim)
    return np.stack([apply(params, e) for e in eye], axis=1)


def identity(k: int, n_reflections: int = 2) -> RotationParams:
    if k == 2:
        return Angle2D(0.0)
    if k == 3:
        return Quat3D((1.0, 0.0, 0.0, 0.0))
    e = tuple(1.0 if i == 0 else 0.0 for i in range(k))
    return HouseholderKD((e,) * n_reflections)


def kind_for_dim(k: int) -> int:
    if k == 2:
        return kernels.ANGLE
    if k == 3:
        return kernels.QUAT
    if k >= 4:
        return kernels.HOUSEHOLDER
    raise ValueError(f"rotation dimension must be 2, 3 or >= 4, got {k}")


def param_width(k: int, n_reflections: int = 2) -> int:
    """Number of stored parameters per block for dimension ``k``."""
    kind = kind_for_dim(k)
    return {kernels.ANGLE: 1, kernels.QUAT: 4}.get(kind, n_reflections * k)


def from_array(k: int, arr) -> RotationParams:
    """Inverse of ``as_array`` for a block of dimension ``k``."""
    arr = np.asarray(arr, dtype=np.float64)
    kind = kind_for_dim(k)
    if kind == kernels.ANGLE:
        return Angle2D(float(arr[0]))
    if kind == kernels.QUAT:
        return Quat3D(tuple(arr))
    return HouseholderKD(tuple(map(tuple, arr.reshape(-1, k))))
