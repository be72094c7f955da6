"""Precomputed image-feature storage and the visual projection layer.

Feature files hold one record per line: ``id<TAB>base64(float32 LE x dim)``.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import logging
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from .exceptions import DimensionError, ParseError
from .tensor import relu

log = logging.getLogger(__name__)

VISUAL_DIM = 4096
_WIRE_DTYPE = np.dtype("<f4")


class VisualStore(Mapping):
    """Read-only id -> feature-vector mapping.

    Lookups through :meth:`vector` fall back to a zero vector for unknown ids
    and count the miss in ``missing``.
    """

    def __init__(self, features=None, dim: int = VISUAL_DIM, duplicates: int = 0):
        self._features = {}
        for key, vec in (features or {}).items():
            vec = np.asarray(vec, dtype=np.float32)
            if vec.shape != (dim,):
                raise DimensionError(f"visual feature {key!r} has shape {vec.shape}, expected ({dim},)")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"visual feature {key!r} contains non-finite values")
            vec.setflags(write=False)
            self._features[key] = vec
        self.dim = dim
        self.duplicates = duplicates
        self.missing = 0

    def __getitem__(self, key):
        return self._features[key]

    def __iter__(self):
        return iter(self._features)

    def __len__(self):
        return len(self._features)

    def vector(self, key) -> np.ndarray:
        if key is not None and key in self._features:
            return self._features[key]
        self.missing += 1
        return np.zeros(self.dim, dtype=np.float32)


def encode_record(key: str, vec: np.ndarray) -> str:
    payload = np.asarray(vec, dtype=_WIRE_DTYPE).tobytes()
    return f"{key}\t{base64.b64encode(payload).decode('ascii')}"


def write_visual_features(path, features: Mapping[str, np.ndarray]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for key, vec in features.items():
            if "\t" in key or "\n" in key:
                raise ValueError(f"feature id {key!r} contains a tab or newline")
            fh.write(encode_record(key, vec) + "\n")


def load_visual_features(path, dim: int = VISUAL_DIM) -> VisualStore:
    """Parse a feature file; duplicate ids keep the last record and are counted."""
    path = Path(path)
    features: dict[str, np.ndarray] = {}
    duplicates = 0
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            key, sep, blob = line.partition("\t")
            if not sep or not key:
                raise ParseError("expected 'id<TAB>base64'", path, lineno)
            try:
                raw = base64.b64decode(blob, validate=True)
            except (binascii.Error, ValueError):
                raise ParseError(f"invalid base64 payload for {key!r}", path, lineno) from None
            if len(raw) % _WIRE_DTYPE.itemsize:
                raise ParseError(f"payload for {key!r} is not a whole number of float32 values", path, lineno)
            vec = np.frombuffer(raw, dtype=_WIRE_DTYPE).astype(np.float32)
            if vec.shape != (dim,):
                raise DimensionError(f"visual feature {key!r} has {vec.size} values, expected {dim}")
            if key in features:
                duplicates += 1
            features[key] = vec
    if duplicates:
        log.warning("%s: %d duplicate feature ids, last record kept", path, duplicates)
    return VisualStore(features, dim=dim, duplicates=duplicates)


def stub_extract(image_bytes: bytes, dim: int = VISUAL_DIM) -> np.ndarray:
    """Deterministic stand-in for a pretrained image network: hash -> uniform [0, 1) vector."""
    if not image_bytes:
        raise ValueError("cannot extract features from empty input")
    seed = int.from_bytes(hashlib.sha256(image_bytes).digest(), "little")
    return np.random.default_rng(seed).random(dim, dtype=np.float32)


def visual_fc(W_vf: np.ndarray, feature: np.ndarray) -> np.ndarray:
    """``relu(W_vf @ feature)``; no bias."""
    W_vf = np.asarray(W_vf)
    feature = np.asarray(feature)
    if W_vf.ndim != 2 or feature.shape != (W_vf.shape[1],):
        raise DimensionError(f"cannot project visual feature {feature.shape} with weights {W_vf.shape}")
    return relu(W_vf @ feature)
