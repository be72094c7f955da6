"""Deterministic on-disk containers for checkpoints and prepared datasets.

A container is a zip archive holding ``manifest.json`` plus one raw
little-endian blob per array under ``arrays/``. Entry timestamps are fixed
and the manifest is written with sorted keys, so equal content gives
byte-identical files.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from .exceptions import CheckpointError, DimensionError
from .estimator import VeracityClassifier
from .features import MessageFeatures, MessageFeaturizer
from .model import ModelConfig, VeracityNet

CHECKPOINT_FORMAT = "veracity-checkpoint"
DATASET_FORMAT = "veracity-dataset"
FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


def _le(dtype: np.dtype) -> np.dtype:
    return np.dtype(dtype).newbyteorder("<")


def write_container(path, manifest: dict, arrays: dict[str, np.ndarray]) -> None:
    index = {}
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        dtype = _le(arr.dtype)
        entry = f"arrays/{name}.bin"
        index[name] = {"shape": list(arr.shape), "dtype": dtype.str, "file": entry}
        blobs.append((entry, arr.astype(dtype, copy=False).tobytes()))
    manifest = dict(manifest, arrays=index)
    payload = json.dumps(manifest, sort_keys=True, indent=1, ensure_ascii=False).encode("utf-8")
    with zipfile.ZipFile(path, "w") as zf:
        for entry, data in [("manifest.json", payload), *blobs]:
            info = zipfile.ZipInfo(entry, date_time=_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            zf.writestr(info, data)


def read_container(path, expected_format: str):
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            if manifest.get("format") != expected_format:
                raise CheckpointError(f"{path}: not a {expected_format} file (format={manifest.get('format')!r})")
            version = manifest.get("version")
            if version != FORMAT_VERSION:
                raise CheckpointError(f"{path}: unsupported {expected_format} version {version!r}, "
                                      f"this build reads version {FORMAT_VERSION}")
            arrays = {}
            for name, meta in manifest["arrays"].items():
                raw = zf.read(meta["file"])
                arrays[name] = np.frombuffer(raw, dtype=np.dtype(meta["dtype"])).reshape(meta["shape"]).copy()
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: corrupt {expected_format} ({exc})") from None
    return manifest, arrays


# -- prepared datasets -------------------------------------------------------


def save_features(path, features: MessageFeatures) -> None:
    manifest = {
        "format": DATASET_FORMAT,
        "version": FORMAT_VERSION,
        "ids": list(features.ids),
        "event_ids": list(features.event_ids) if features.event_ids is not None else None,
        "missing_visual": features.missing_visual,
    }
    arrays = {
        "token_ids": features.token_ids.astype(np.int64),
        "sentiment": features.sentiment,
        "visual": features.visual,
    }
    if features.labels is not None:
        arrays["labels"] = np.asarray(features.labels, dtype=np.int64)
    write_container(path, manifest, arrays)


def load_features(path, embeddings: np.ndarray) -> MessageFeatures:
    manifest, arrays = read_container(path, DATASET_FORMAT)
    return MessageFeatures(
        ids=manifest["ids"],
        token_ids=arrays["token_ids"],
        sentiment=arrays["sentiment"],
        visual=arrays["visual"],
        embeddings=embeddings,
        labels=arrays.get("labels"),
        event_ids=manifest["event_ids"],
        missing_visual=manifest.get("missing_visual", 0),
    )


def save_featurizer(path, featurizer: MessageFeaturizer) -> None:
    manifest, arrays = featurizer.state()
    write_container(path, {"format": "veracity-featurizer", "version": FORMAT_VERSION, "featurizer": manifest},
                    arrays)


def load_featurizer(path, visual=None) -> MessageFeaturizer:
    manifest, arrays = read_container(path, "veracity-featurizer")
    return MessageFeaturizer.from_state(manifest["featurizer"], arrays, visual=visual)


# -- model checkpoints -------------------------------------------------------


@dataclass
class Checkpoint:
    classifier: VeracityClassifier
    featurizer: Optional[MessageFeaturizer]
    epoch: int
    best_val_loss: float


def save_checkpoint(path, classifier: VeracityClassifier, featurizer: MessageFeaturizer | None = None) -> None:
    net = classifier.net_
    arrays = {f"param/{name}": p for name, p in net.state_dict().items()}
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "version": FORMAT_VERSION,
        "tool_version": __version__,
        "config": classifier.config_.to_dict(),
        "epoch": int(classifier.best_epoch_),
        "best_val_loss": float(classifier.best_val_loss_),
        "featurizer": None,
    }
    if featurizer is not None:
        fman, farr = featurizer.state()
        if "embedding" in net.layers:
            # the network's own table is stored under param/
            farr = {k: v for k, v in farr.items() if k != "embeddings"}
        manifest["featurizer"] = fman
        arrays.update({f"featurizer/{k}": v for k, v in farr.items()})
    write_container(path, manifest, arrays)


def load_checkpoint(path, visual=None) -> Checkpoint:
    manifest, arrays = read_container(path, CHECKPOINT_FORMAT)
    try:
        config = ModelConfig.from_dict(manifest["config"]).validate()
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: invalid config in checkpoint version {manifest['version']} ({exc})") from None
    state = {k[len("param/"):]: v for k, v in arrays.items() if k.startswith("param/")}
    embeddings = state.get("embedding.table")
    clf = VeracityClassifier.from_config(config)
    try:
        net = VeracityNet(config, embeddings)
        net.load_state_dict(state)
    except DimensionError as exc:
        raise CheckpointError(f"{path}: parameters inconsistent with config (version {manifest['version']}): {exc}") \
            from None
    clf.net_ = net
    clf.config_ = config
    clf.classes_ = np.array([0, 1])
    clf.history_ = []
    clf.best_epoch_ = manifest["epoch"]
    clf.best_val_loss_ = manifest["best_val_loss"]
    featurizer = None
    if manifest.get("featurizer") is not None:
        farr = {k[len("featurizer/"):]: v for k, v in arrays.items() if k.startswith("featurizer/")}
        if "embeddings" not in farr:
            farr["embeddings"] = embeddings.astype(np.float64) if embeddings is not None else \
                np.zeros((len(manifest["featurizer"]["vocab"]) + 2, manifest["featurizer"]["k"]))
        featurizer = MessageFeaturizer.from_state(manifest["featurizer"], farr, visual=visual)
    return Checkpoint(clf, featurizer, manifest["epoch"], manifest["best_val_loss"])
