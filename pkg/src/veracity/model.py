"""The fused text/sentiment/image network, its loss, and the SGD training loop."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from .exceptions import DimensionError, NumericError
from .sentiment import N_FEATURES
from .tensor import Dense, Layer, RepeatVector, concat, resolve_dtype, sigmoid
from .text import PAD_ID
from .recurrent import StackedLSTM
from .textcnn import ConvFilterBank, TimeDistributed

log = logging.getLogger(__name__)

CHANNELS = ("text", "sentiment", "visual")
LOSS_EPS = 1e-7


@dataclass
class ModelConfig:
    k: int = 50
    window_sizes: tuple = (4, 6, 8)
    d: int = 32
    steps: int = 4
    seg_len: int = 32
    lstm1: int = 64
    lstm2: int = 32
    sent_fc: int = 32
    vis_fc: int = 32
    head_hidden: int = 10
    batch: int = 64
    lr: float = 1e-2
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    val_frac: float = 0.1
    visual_dim: int = 4096
    channels: tuple = CHANNELS
    head_bias: bool = True
    finetune_embeddings: bool = False
    class_weight: Optional[str] = None
    dtype: str = "float64"

    def __post_init__(self):
        self.window_sizes = tuple(int(h) for h in self.window_sizes)
        self.channels = tuple(c for c in CHANNELS if c in set(self.channels))

    def validate(self) -> "ModelConfig":
        for name in ("k", "d", "steps", "seg_len", "lstm1", "lstm2", "sent_fc", "vis_fc", "head_hidden",
                     "batch", "max_epochs", "patience", "visual_dim"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.window_sizes or min(self.window_sizes) < 1:
            raise ValueError(f"window sizes must be positive, got {self.window_sizes}")
        if self.lr < 0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")
        if not 0.0 <= self.val_frac < 1.0:
            raise ValueError(f"val_frac must be in [0, 1), got {self.val_frac}")
        if not self.channels:
            raise ValueError("at least one of text, sentiment, visual channels is required")
        if self.lstm2 != self.vis_fc:
            raise ValueError(f"lstm2 ({self.lstm2}) and vis_fc ({self.vis_fc}) must be equal")
        if self.class_weight not in (None, "balanced"):
            raise ValueError(f"class_weight must be None or 'balanced', got {self.class_weight!r}")
        resolve_dtype(self.dtype)
        return self

    def to_dict(self) -> dict:
        out = asdict(self)
        out["window_sizes"] = list(self.window_sizes)
        out["channels"] = list(self.channels)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    @property
    def uses_sequence(self) -> bool:
        return "text" in self.channels or "sentiment" in self.channels


class Embedding(Layer):
    """Frozen (by default) lookup table; the padding row never receives gradient."""

    def __init__(self, table: np.ndarray, trainable: bool = False):
        super().__init__()
        self._add_param("table", np.array(table))
        self.trainable = trainable

    def forward(self, ids):
        ids = np.asarray(ids)
        self._cache = ids
        return self.params["table"][ids]

    def backward(self, dout):
        ids = self._cached()
        if self.trainable:
            grad = self.grads["table"]
            grad.fill(0.0)
            np.add.at(grad, ids.ravel(), dout.reshape(-1, grad.shape[1]))
            grad[PAD_ID] = 0.0
        return None


def bce_loss(p, y, eps: float = LOSS_EPS):
    """Per-example cross-entropy; returns ``(losses, n_clamped)``."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    clamped = np.clip(p, eps, 1.0 - eps)
    n_clamped = int(np.count_nonzero(clamped != p))
    losses = -y * np.log(clamped) - (1.0 - y) * np.log(1.0 - clamped)
    return losses, n_clamped


def loss(p_fake: float, y: int) -> float:
    """Cross-entropy of one prediction."""
    losses, n_clamped = bce_loss([p_fake], [y])
    if n_clamped:
        log.debug("probability %r clamped into [%g, 1-%g]", p_fake, LOSS_EPS, LOSS_EPS)
    return float(losses[0])


class VeracityNet:
    """Layer graph: time-distributed Text-CNN and repeated sentiment projection
    feed a stacked LSTM; its final state is concatenated with the projected
    visual feature and classified by a two-layer head."""

    def __init__(self, config: ModelConfig, embeddings: np.ndarray | None = None, rng=None):
        config.validate()
        self.config = config
        self.dtype = resolve_dtype(config.dtype)
        rng = np.random.default_rng(config.seed if rng is None else rng)
        dt = self.dtype
        self.layers: dict[str, Layer] = {}
        seq_in = 0
        if "text" in config.channels:
            if embeddings is None:
                embeddings = np.zeros((2, config.k))
            embeddings = np.asarray(embeddings, dtype=dt)
            if embeddings.shape[1] != config.k:
                raise DimensionError(f"embedding width {embeddings.shape[1]} does not match k={config.k}")
            self.layers["embedding"] = Embedding(embeddings, trainable=config.finetune_embeddings)
            bank = ConvFilterBank(config.k, config.window_sizes, config.d, rng=rng, dtype=dt)
            self.layers["textcnn"] = TimeDistributed(bank)
            seq_in += bank.out_dim
        if "sentiment" in config.channels:
            self.layers["sentiment_fc"] = Dense(N_FEATURES, config.sent_fc, bias=False, rng=rng, dtype=dt)
            self.repeat = RepeatVector(config.steps)
            seq_in += config.sent_fc
        fused = 0
        if config.uses_sequence:
            self.layers["lstm"] = StackedLSTM(seq_in, config.lstm1, config.lstm2, rng=rng, dtype=dt)
            fused += config.lstm2
        if "visual" in config.channels:
            self.layers["visual_fc"] = Dense(config.visual_dim, config.vis_fc, bias=False, activation="relu",
                                             rng=rng, dtype=dt)
            fused += config.vis_fc
        self.layers["head1"] = Dense(fused, config.head_hidden, bias=config.head_bias, activation="relu",
                                     rng=rng, dtype=dt)
        self.layers["head2"] = Dense(config.head_hidden, 1, bias=config.head_bias, rng=rng, dtype=dt)
        self.seq_in = seq_in
        self.fused_dim = fused
        self.outputs: dict[str, np.ndarray] = {}

    # -- parameters ----------------------------------------------------------

    def named_parameters(self, trainable_only: bool = True):
        for lname, layer in self.layers.items():
            if trainable_only and not layer.trainable:
                continue
            for pname, param in layer.params.items():
                yield f"{lname}.{pname}", param, layer.grads[pname]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p for name, p, _ in self.named_parameters(trainable_only=False)}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = self.state_dict()
        if set(own) != set(state):
            missing = sorted(set(own) - set(state))
            extra = sorted(set(state) - set(own))
            raise DimensionError(f"parameter names differ (missing {missing}, unexpected {extra})")
        for name, value in state.items():
            if own[name].shape != np.shape(value):
                raise DimensionError(f"{name}: expected shape {own[name].shape}, got {np.shape(value)}")
            own[name][...] = value

    def n_parameters(self, trainable_only: bool = True) -> int:
        return sum(p.size for _, p, _ in self.named_parameters(trainable_only))

    # -- passes --------------------------------------------------------------

    def forward(self, token_ids, sentiment, visual) -> np.ndarray:
        """Return ``p_fake`` for a batch; intermediate representations land in ``self.outputs``."""
        cfg = self.config
        dt = self.dtype
        out = {}
        seq_parts = []
        if "text" in cfg.channels:
            token_ids = np.asarray(token_ids)
            if token_ids.ndim != 3 or token_ids.shape[1] != cfg.steps:
                raise DimensionError(f"token ids must be (batch, {cfg.steps}, seg_len), got {token_ids.shape}")
            emb = self.layers["embedding"].forward(token_ids)
            out["C_T"] = self.layers["textcnn"].forward(emb)
            seq_parts.append(out["C_T"])
        if "sentiment" in cfg.channels:
            sentiment = np.asarray(sentiment, dtype=dt)
            out["C_S"] = self.layers["sentiment_fc"].forward(sentiment)
            seq_parts.append(self.repeat.forward(out["C_S"]))
        fused = []
        if seq_parts:
            seq = concat(seq_parts, axis=2) if len(seq_parts) > 1 else seq_parts[0]
            out["C_TS"] = self.layers["lstm"].forward(seq)
            fused.append(out["C_TS"])
        if "visual" in cfg.channels:
            out["C_V"] = self.layers["visual_fc"].forward(np.asarray(visual, dtype=dt))
            fused.append(out["C_V"])
        out["C_M"] = concat(fused, axis=1) if len(fused) > 1 else fused[0]
        hidden = self.layers["head1"].forward(out["C_M"])
        out["logit"] = self.layers["head2"].forward(hidden)[:, 0]
        out["p"] = sigmoid(out["logit"])
        self.outputs = out
        return out["p"]

    def backward(self, dlogit: np.ndarray) -> None:
        """Backpropagate the gradient of the loss w.r.t. the pre-sigmoid output."""
        cfg = self.config
        dhidden = self.layers["head2"].backward(np.asarray(dlogit).reshape(-1, 1))
        dfused = self.layers["head1"].backward(dhidden)
        offset = 0
        if cfg.uses_sequence:
            dcts = dfused[:, offset : offset + cfg.lstm2]
            offset += cfg.lstm2
            dseq = self.layers["lstm"].backward(dcts)
            seq_off = 0
            if "text" in cfg.channels:
                width = self.layers["textcnn"].inner.out_dim
                demb = self.layers["textcnn"].backward(dseq[:, :, :width])
                self.layers["embedding"].backward(demb)
                seq_off = width
            if "sentiment" in cfg.channels:
                dcs = self.repeat.backward(dseq[:, :, seq_off:])
                self.layers["sentiment_fc"].backward(dcs)
        if "visual" in cfg.channels:
            self.layers["visual_fc"].backward(dfused[:, offset:])

    def loss_and_backward(self, token_ids, sentiment, visual, labels, weights=None) -> float:
        """Mean cross-entropy of a batch; gradients are left in each layer."""
        p = self.forward(token_ids, sentiment, visual)
        y = np.asarray(labels, dtype=np.float64)
        losses, _ = bce_loss(p, y)
        w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
        n = len(y)
        value = float(np.sum(w * losses) / n)
        if math.isfinite(value):
            self.backward((w * (p - y) / n).astype(self.dtype))
        return value

    def batch_loss(self, token_ids, sentiment, visual, labels, weights=None) -> float:
        p = self.forward(token_ids, sentiment, visual)
        losses, _ = bce_loss(p, labels)
        w = 1.0 if weights is None else np.asarray(weights, dtype=np.float64)
        return float(np.sum(w * losses) / len(losses))


def class_weights(labels: np.ndarray, mode: Optional[str]) -> Optional[dict]:
    if mode is None:
        return None
    labels = np.asarray(labels)
    n = len(labels)
    return {c: n / (2.0 * max(int(np.sum(labels == c)), 1)) for c in (0, 1)}


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    elapsed: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf
    stopped_early: bool = False


def _dataset_loss(net: VeracityNet, data, batch: int, weights=None) -> float:
    total, n = 0.0, len(data.labels)
    for start in range(0, n, batch):
        sl = slice(start, start + batch)
        w = None if weights is None else weights[sl]
        total += net.batch_loss(data.token_ids[sl], data.sentiment[sl], data.visual[sl], data.labels[sl], w) * len(
            data.labels[sl]
        )
    return total / n


def train_network(net: VeracityNet, train, val=None, on_epoch: Callable[[EpochRecord], None] | None = None) -> TrainResult:
    """Plain mini-batch SGD with early stopping on validation loss.

    ``train``/``val`` expose ``token_ids``, ``sentiment``, ``visual`` and
    ``labels`` arrays. Without a validation set the training loss drives
    early stopping. The network is left holding the best parameters seen.
    """
    cfg = net.config
    n = len(train.labels)
    if n == 0:
        raise ValueError("training set is empty")
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    cw = class_weights(train.labels, cfg.class_weight)
    weights = None if cw is None else np.array([cw[int(c)] for c in train.labels])
    val_weights = None if cw is None or val is None else np.array([cw[int(c)] for c in val.labels])
    params = list(net.named_parameters())
    result = TrainResult()
    best_state = {name: p.copy() for name, p, _ in params}
    wait = 0
    start_time = time.perf_counter()
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        for b, start in enumerate(range(0, n, cfg.batch)):
            idx = order[start : start + cfg.batch]
            w = None if weights is None else weights[idx]
            value = net.loss_and_backward(train.token_ids[idx], train.sentiment[idx], train.visual[idx],
                                          train.labels[idx], w)
            if not math.isfinite(value):
                raise NumericError(f"non-finite training loss at epoch {epoch}, batch {b}")
            for name, p, g in params:
                p -= cfg.lr * g
            bad = next((name for name, p, _ in params if not np.isfinite(p).all()), None)
            if bad is not None:
                raise NumericError(f"parameter {bad} became non-finite at epoch {epoch}, batch {b}")
        train_loss = _dataset_loss(net, train, cfg.batch, weights)
        val_loss = _dataset_loss(net, val, cfg.batch, val_weights) if val is not None and len(val.labels) else train_loss
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise NumericError(f"non-finite loss after epoch {epoch}")
        record = EpochRecord(epoch, train_loss, val_loss, time.perf_counter() - start_time)
        result.history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            best_state = {name: p.copy() for name, p, _ in params}
            wait = 0
        else:
            wait += 1
            if wait >= cfg.patience:
                result.stopped_early = True
                log.info("early stopping at epoch %d (best %d, val loss %.6f)", epoch, result.best_epoch,
                         result.best_val_loss)
                break
    for name, p, _ in params:
        p[...] = best_state[name]
    return result
