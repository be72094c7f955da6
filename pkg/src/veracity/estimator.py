"""scikit-learn compatible classifier wrapping :class:`~veracity.model.VeracityNet`."""

from __future__ import annotations

import csv
from dataclasses import fields

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DimensionError
from .features import MessageFeatures
from .model import CHANNELS, ModelConfig, VeracityNet, train_network

# config fields taken from the data rather than from estimator parameters
_DATA_FIELDS = ("k", "steps", "seg_len", "visual_dim")


class VeracityClassifier(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Fake (1) / real (0) message classifier over :class:`MessageFeatures`.

    Parameters mirror :class:`ModelConfig`; embedding width, number of
    segments, segment length and visual dimension are read from the
    training features. ``transform`` returns the joint text/sentiment
    representation (the final LSTM state) of each message.

    Fitted attributes: ``net_``, ``config_``, ``history_``, ``best_epoch_``,
    ``best_val_loss_``, ``classes_``.
    """

    def __init__(self, window_sizes=(4, 6, 8), d=32, lstm1=64, lstm2=32, sent_fc=32, vis_fc=32, head_hidden=10,
                 batch=64, lr=1e-2, max_epochs=100, patience=10, seed=0, val_frac=0.1, channels=CHANNELS,
                 head_bias=True, finetune_embeddings=False, class_weight=None, dtype="float64", callback=None):
        self.window_sizes = window_sizes
        self.d = d
        self.lstm1 = lstm1
        self.lstm2 = lstm2
        self.sent_fc = sent_fc
        self.vis_fc = vis_fc
        self.head_hidden = head_hidden
        self.batch = batch
        self.lr = lr
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed
        self.val_frac = val_frac
        self.channels = channels
        self.head_bias = head_bias
        self.finetune_embeddings = finetune_embeddings
        self.class_weight = class_weight
        self.dtype = dtype
        self.callback = callback

    @classmethod
    def from_config(cls, config: ModelConfig, **kwargs) -> "VeracityClassifier":
        params = {f.name: getattr(config, f.name) for f in fields(config) if f.name not in _DATA_FIELDS}
        params.update(kwargs)
        return cls(**params)

    def _make_config(self, X: MessageFeatures) -> ModelConfig:
        params = self.get_params()
        params.pop("callback")
        return ModelConfig(k=X.embeddings.shape[1], steps=X.steps, seg_len=X.seg_len, visual_dim=X.visual_dim,
                           **params).validate()

    def _split_validation(self, X: MessageFeatures):
        n = len(X)
        n_val = int(round(self.val_frac * n))
        if n_val < 1 or n - n_val < 1:
            return X, None
        order = np.random.default_rng([self.seed, 2]).permutation(n)
        return X[np.sort(order[n_val:])], X[np.sort(order[:n_val])]

    def fit(self, X: MessageFeatures, y=None):
        if y is not None:
            X = MessageFeatures(X.ids, X.token_ids, X.sentiment, X.visual, X.embeddings,
                                np.asarray(y, dtype=np.int64), X.event_ids)
        if X.labels is None:
            raise ValueError("labels are required to fit")
        if len(X) == 0:
            raise ValueError("cannot fit on an empty training set")
        if not np.isin(X.labels, (0, 1)).all():
            raise ValueError("labels must be 0 (real) or 1 (fake)")
        config = self._make_config(X)
        train, val = self._split_validation(X)
        self.net_ = VeracityNet(config, X.embeddings)
        self.config_ = config
        self.classes_ = np.array([0, 1])
        result = train_network(self.net_, train, val, on_epoch=self.callback)
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.best_val_loss_ = result.best_val_loss
        return self

    def _check_input(self, X: MessageFeatures):
        check_is_fitted(self, "net_")
        cfg = self.config_
        if "text" in cfg.channels and (X.steps != cfg.steps or X.token_ids.max(initial=0) >= self._vocab_size()):
            raise DimensionError("token ids do not fit the trained grid shape or vocabulary")
        if "visual" in cfg.channels and X.visual_dim != cfg.visual_dim:
            raise DimensionError(f"visual features have dimension {X.visual_dim}, model expects {cfg.visual_dim}")

    def _vocab_size(self) -> int:
        return self.net_.layers["embedding"].params["table"].shape[0]

    def _batched(self, X: MessageFeatures, key: str) -> np.ndarray:
        self._check_input(X)
        outs = []
        for start in range(0, len(X), self.config_.batch):
            sl = slice(start, start + self.config_.batch)
            self.net_.forward(X.token_ids[sl], X.sentiment[sl], X.visual[sl])
            outs.append(np.array(self.net_.outputs[key]))
        if not outs:
            return np.zeros((0,) + ((self.config_.lstm2,) if key == "C_TS" else ()))
        return np.concatenate(outs, axis=0)

    def predict_proba(self, X: MessageFeatures) -> np.ndarray:
        p = self._batched(X, "p").astype(np.float64)
        return np.column_stack([1.0 - p, p])

    def predict(self, X: MessageFeatures) -> np.ndarray:
        # strictly above one half is fake; an exact tie is real
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)

    def transform(self, X: MessageFeatures) -> np.ndarray:
        if not self.config_.uses_sequence:
            raise ValueError("model has no text or sentiment channel, so no joint representation")
        return self._batched(X, "C_TS")

    def loss(self, X: MessageFeatures) -> float:
        check_is_fitted(self, "net_")
        self._check_input(X)
        total = 0.0
        for start in range(0, len(X), self.config_.batch):
            sl = slice(start, start + self.config_.batch)
            n = len(X.labels[sl])
            total += self.net_.batch_loss(X.token_ids[sl], X.sentiment[sl], X.visual[sl], X.labels[sl]) * n
        return total / len(X)

    def export_embeddings(self, X: MessageFeatures, path) -> None:
        """Write ``id, c0..c{p-1}, label`` rows of the joint representation as CSV."""
        reps = self.transform(X) if len(X) else np.zeros((0, self.config_.lstm2))
        labels = X.labels if X.labels is not None else self.predict(X)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", *(f"c{i}" for i in range(self.config_.lstm2)), "label"])
            for mid, rep, label in zip(X.ids, reps, labels):
                writer.writerow([mid, *(repr(float(v)) for v in rep), int(label)])
