"""Versioned binary checkpoints.

Layout: ``MAGIC`` | uint32 LE header length | UTF-8 JSON header |
little-endian float64 blocks for centers, radii and relation parameters.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .model import ModelConfig, SphereModel

MAGIC = b"SPHEREKG"
FORMAT_VERSION = 1
_ARRAYS = ("centers", "radii", "rel_params")


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


def dumps(model: SphereModel, vocab_hash: str) -> bytes:
    header = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "vocab_hash": vocab_hash,
        "step": int(model.step),
        "seed": int(model.config.seed),
        "shapes": {name: list(getattr(model, name).shape) for name in _ARRAYS},
    }
    text = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(text)), text]
    for name in _ARRAYS:
        parts.append(np.ascontiguousarray(getattr(model, name), dtype="<f8").tobytes())
    return b"".join(parts)


def save(path: str, model: SphereModel, vocab_hash: str) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model, vocab_hash))


def read_header(fh) -> dict:
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointError("not a spherekg checkpoint")
    try:
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n).decode("utf-8"))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version}, expected {FORMAT_VERSION}")
    return header


def load(path: str):
    """Return ``(model, header)``."""
    with open(path, "rb") as fh:
        header = read_header(fh)
        arrays = {}
        for name in _ARRAYS:
            shape = tuple(header["shapes"][name])
            count = int(np.prod(shape))
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise CheckpointError(f"truncated checkpoint while reading {name}")
            arrays[name] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
    config = ModelConfig.from_dict(header["config"])
    model = SphereModel(config, arrays["centers"], arrays["radii"], arrays["rel_params"], step=header["step"])
    return model, header
