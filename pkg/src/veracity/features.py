"""Turn messages into the three model inputs: token-id grids, standardised
sentiment vectors and visual feature vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DimensionError
from .pipeline import Message
from .sentiment import N_FEATURES, SentimentFeaturizer, SentimentLexicon
from .text import TextEncoder, Vocabulary
from .visual import VISUAL_DIM, VisualStore, load_visual_features


@dataclass
class MessageFeatures:
    """A featurised batch of messages.

    ``embeddings`` is the shared [V, k] table the token ids index into; it
    is carried by reference, never copied per batch.
    """

    ids: list
    token_ids: np.ndarray
    sentiment: np.ndarray
    visual: np.ndarray
    embeddings: np.ndarray
    labels: Optional[np.ndarray] = None
    event_ids: Optional[list] = None
    missing_visual: int = field(default=0, compare=False)

    def __post_init__(self):
        n = len(self.ids)
        if self.token_ids.ndim != 3 or self.token_ids.shape[0] != n:
            raise DimensionError(f"token_ids must be (n, steps, seg_len) with n={n}, got {self.token_ids.shape}")
        if self.sentiment.shape != (n, N_FEATURES):
            raise DimensionError(f"sentiment must be ({n}, {N_FEATURES}), got {self.sentiment.shape}")
        if self.visual.ndim != 2 or self.visual.shape[0] != n:
            raise DimensionError(f"visual must be (n, dim) with n={n}, got {self.visual.shape}")
        if self.labels is not None and np.shape(self.labels) != (n,):
            raise DimensionError(f"labels must have length {n}")

    def __len__(self):
        return len(self.ids)

    def __getitem__(self, idx) -> "MessageFeatures":
        idx = np.arange(len(self))[idx]
        idx = np.atleast_1d(idx)
        return MessageFeatures(
            ids=[self.ids[i] for i in idx],
            token_ids=self.token_ids[idx],
            sentiment=self.sentiment[idx],
            visual=self.visual[idx],
            embeddings=self.embeddings,
            labels=None if self.labels is None else self.labels[idx],
            event_ids=None if self.event_ids is None else [self.event_ids[i] for i in idx],
        )

    @property
    def steps(self) -> int:
        return self.token_ids.shape[1]

    @property
    def seg_len(self) -> int:
        return self.token_ids.shape[2]

    @property
    def visual_dim(self) -> int:
        return self.visual.shape[1]


def _resolve_visual(visual, dim):
    if visual is None:
        return VisualStore(dim=dim)
    if isinstance(visual, VisualStore):
        return visual
    if isinstance(visual, (str, Path)):
        return load_visual_features(visual, dim=dim)
    return VisualStore(visual, dim=dim)


class MessageFeaturizer(TransformerMixin, BaseEstimator):
    """Fit vocabulary, embedding table and sentiment statistics on training messages.

    ``visual`` (a :class:`VisualStore`, mapping or feature-file path) is
    consulted at transform time, so a fitted featurizer can be pointed at a
    different feature file later. Messages without a stored image feature
    get a zero vector; the count of such messages is ``missing_visual_``.
    """

    def __init__(self, embeddings=None, lexicon=None, visual=None, steps=4, seg_len=32, min_freq=2, k=50,
                 visual_dim=VISUAL_DIM):
        self.embeddings = embeddings
        self.lexicon = lexicon
        self.visual = visual
        self.steps = steps
        self.seg_len = seg_len
        self.min_freq = min_freq
        self.k = k
        self.visual_dim = visual_dim

    def fit(self, X: Sequence[Message], y=None):
        texts = [m.text for m in X]
        self.text_encoder_ = TextEncoder(self.embeddings, self.steps, self.seg_len, self.min_freq, self.k).fit(texts)
        self.sentiment_ = SentimentFeaturizer(self.lexicon).fit(texts)
        self._store = None
        return self

    @property
    def vocabulary_(self) -> Vocabulary:
        check_is_fitted(self, "text_encoder_")
        return self.text_encoder_.vocabulary_

    @property
    def embedding_table_(self) -> np.ndarray:
        check_is_fitted(self, "text_encoder_")
        return self.text_encoder_.embedding_table_

    @property
    def coverage_(self) -> float:
        check_is_fitted(self, "text_encoder_")
        return self.text_encoder_.coverage_

    def visual_store(self) -> VisualStore:
        if getattr(self, "_store", None) is None:
            self._store = _resolve_visual(self.visual, self.visual_dim)
        return self._store

    def set_params(self, **params):
        if "visual" in params:
            self._store = None
        return super().set_params(**params)

    def transform(self, X: Sequence[Message]) -> MessageFeatures:
        check_is_fitted(self, "text_encoder_")
        texts = [m.text for m in X]
        store = self.visual_store()
        missing_before = store.missing
        visual = np.zeros((len(X), self.visual_dim), dtype=np.float32)
        for row, m in enumerate(X):
            visual[row] = store.vector(m.image_ref)
        self.missing_visual_ = store.missing - missing_before
        labels = None
        if all(m.label is not None for m in X):
            labels = np.array([m.label for m in X], dtype=np.int64)
        return MessageFeatures(
            ids=[m.id for m in X],
            token_ids=self.text_encoder_.transform(texts),
            sentiment=self.sentiment_.transform(texts),
            visual=visual,
            embeddings=self.embedding_table_,
            labels=labels,
            event_ids=[m.event_id for m in X],
            missing_visual=self.missing_visual_,
        )

    # -- persistence ---------------------------------------------------------

    def state(self):
        """``(manifest_dict, arrays)`` describing the fitted state."""
        check_is_fitted(self, "text_encoder_")
        manifest = {
            "steps": self.steps,
            "seg_len": self.seg_len,
            "min_freq": self.min_freq,
            "k": int(self.embedding_table_.shape[1]),
            "visual_dim": self.visual_dim,
            "vocab": self.vocabulary_.words,
            "coverage": self.coverage_,
            "lexicon": self.sentiment_.lexicon_.to_dict(),
        }
        arrays = {
            "embeddings": self.embedding_table_,
            "sentiment_mean": self.sentiment_.mean_,
            "sentiment_scale": self.sentiment_.scale_,
        }
        return manifest, arrays

    @classmethod
    def from_state(cls, manifest: dict, arrays: dict, visual=None) -> "MessageFeaturizer":
        lexicon = SentimentLexicon.from_dict(manifest["lexicon"])
        obj = cls(lexicon=lexicon, visual=visual, steps=manifest["steps"], seg_len=manifest["seg_len"],
                  min_freq=manifest["min_freq"], k=manifest["k"], visual_dim=manifest["visual_dim"])
        enc = TextEncoder(None, obj.steps, obj.seg_len, obj.min_freq, obj.k)
        enc.vocabulary_ = Vocabulary(manifest["vocab"])
        enc.embedding_table_ = np.array(arrays["embeddings"])
        enc.coverage_ = manifest["coverage"]
        if enc.embedding_table_.shape[0] != len(enc.vocabulary_):
            raise DimensionError("embedding table rows do not match vocabulary size")
        sent = SentimentFeaturizer(lexicon)
        sent.lexicon_ = lexicon
        sent.mean_ = np.array(arrays["sentiment_mean"])
        sent.scale_ = np.array(arrays["sentiment_scale"])
        obj.text_encoder_ = enc
        obj.sentiment_ = sent
        obj._store = None
        return obj
