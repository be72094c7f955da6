"""Multi-window text convolution with max-over-time pooling, and a
time-distributed wrapper applying one shared filter bank to every segment
of a message."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import DimensionError
from .tensor import Layer, relu, uniform_init


def embed_sequence(token_ids, embedding_table: np.ndarray) -> np.ndarray:
    """Row-stack the embedding vectors of ``token_ids``."""
    ids = np.asarray(token_ids, dtype=np.int64)
    vocab_size = embedding_table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        bad = ids[(ids < 0) | (ids >= vocab_size)][0]
        raise ValueError(f"token id {bad} outside embedding table of size {vocab_size}")
    return embedding_table[ids]


def conv_feature_map(W_c: np.ndarray, b_c: float, segment: np.ndarray) -> np.ndarray:
    """ReLU response of one [h, k] filter at every window position of a [seg_len, k] segment."""
    W_c = np.asarray(W_c, dtype=np.float64)
    segment = np.asarray(segment, dtype=np.float64)
    h, k = W_c.shape
    if segment.ndim != 2 or segment.shape[1] != k:
        raise DimensionError(f"segment shape {segment.shape} incompatible with filter shape {W_c.shape}")
    if segment.shape[0] < h:
        raise DimensionError(f"segment length {segment.shape[0]} shorter than window {h}")
    windows = sliding_window_view(segment, h, axis=0)  # (positions, k, h)
    return relu(np.einsum("pkh,hk->p", windows, W_c) + b_c)


def max_pool(feature_map: np.ndarray) -> float:
    feature_map = np.asarray(feature_map)
    if feature_map.size == 0:
        raise DimensionError("cannot max-pool an empty feature map")
    return feature_map.max()


class ConvFilterBank(Layer):
    """``d`` filters per window size over (batch, seg_len, k) input.

    Output is (batch, len(window_sizes) * d): pooled features grouped by
    window size in the order given. Segments shorter than the widest window
    are zero-padded so every map has at least one position. Pooling routes
    the gradient to the first maximal position.
    """

    def __init__(self, k: int = 50, window_sizes: Sequence[int] = (4, 6, 8), d: int = 32, rng=None, dtype=np.float64):
        super().__init__()
        rng = np.random.default_rng(rng)
        self.k = k
        self.window_sizes = tuple(int(h) for h in window_sizes)
        self.d = d
        if not self.window_sizes or min(self.window_sizes) < 1:
            raise ValueError(f"window sizes must be positive, got {window_sizes}")
        for h in self.window_sizes:
            self._add_param(f"W{h}", uniform_init(rng, (d, h, k), h * k, dtype))
            self._add_param(f"b{h}", np.zeros(d, dtype=dtype))

    @property
    def out_dim(self) -> int:
        return len(self.window_sizes) * self.d

    def forward(self, x):
        x = np.asarray(x)
        if x.ndim != 3 or x.shape[2] != self.k:
            raise DimensionError(f"ConvFilterBank expects (batch, seg_len, {self.k}), got {x.shape}")
        n, seg_len, _ = x.shape
        pad = max(self.window_sizes) - seg_len
        if pad > 0:
            x = np.concatenate([x, np.zeros((n, pad, self.k), dtype=x.dtype)], axis=1)
        pooled, per_window = [], []
        for h in self.window_sizes:
            W = self.params[f"W{h}"]
            win = sliding_window_view(x, h, axis=1).transpose(0, 1, 3, 2)  # (n, P, h, k)
            positions = win.shape[1]
            win = win.reshape(n, positions, h * self.k)
            act = relu(win @ W.reshape(self.d, -1).T + self.params[f"b{h}"])  # (n, P, d)
            arg = act.argmax(axis=1)
            pooled.append(np.take_along_axis(act, arg[:, None, :], axis=1)[:, 0, :])
            per_window.append((win, arg, positions))
        out = np.concatenate(pooled, axis=1)
        self._cache = (x.shape, seg_len, per_window, out)
        return out

    def backward(self, dout):
        padded_shape, seg_len, per_window, out = self._cached()
        n = padded_shape[0]
        dx = np.zeros(padded_shape, dtype=np.result_type(dout, self.params[f"W{self.window_sizes[0]}"]))
        rows = np.arange(n)[:, None]
        cols = np.arange(self.d)[None, :]
        for j, (h, (win, arg, positions)) in enumerate(zip(self.window_sizes, per_window)):
            sl = slice(j * self.d, (j + 1) * self.d)
            dpool = dout[:, sl] * (out[:, sl] > 0)
            dz = np.zeros((n, positions, self.d), dtype=dx.dtype)
            dz[rows, arg, cols] = dpool
            W = self.params[f"W{h}"]
            self.grads[f"W{h}"][...] = np.einsum("npd,npq->dq", dz, win).reshape(W.shape)
            self.grads[f"b{h}"][...] = dpool.sum(axis=0)
            dwin = (dz @ W.reshape(self.d, -1)).reshape(n, positions, h, self.k)
            for offset in range(h):
                dx[:, offset : offset + positions] += dwin[:, :, offset, :]
        return dx[:, :seg_len]


class TimeDistributed(Layer):
    """Apply ``inner`` independently to every step of a (batch, steps, ...) tensor."""

    def __init__(self, inner: Layer):
        super().__init__()
        self.inner = inner
        self.params = inner.params
        self.grads = inner.grads

    def forward(self, x):
        x = np.asarray(x)
        batch, steps = x.shape[:2]
        out = self.inner.forward(x.reshape((batch * steps,) + x.shape[2:]))
        self._cache = x.shape
        return out.reshape((batch, steps) + out.shape[1:])

    def backward(self, dout):
        shape = self._cached()
        batch, steps = shape[:2]
        dx = self.inner.backward(dout.reshape((batch * steps,) + dout.shape[2:]))
        return dx.reshape(shape)


def textcnn_forward(bank: ConvFilterBank, segment: np.ndarray) -> np.ndarray:
    """Flattened pooled features (length c*d) of one [seg_len, k] segment."""
    return bank.forward(np.asarray(segment)[None])[0]


def time_distributed_textcnn(bank: ConvFilterBank, segments: np.ndarray) -> np.ndarray:
    """Apply the shared bank to each of a [steps, seg_len, k] stack; returns [steps, c*d]."""
    segments = np.asarray(segments)
    if segments.ndim != 3 or segments.shape[0] < 1:
        raise DimensionError(f"expected [steps, seg_len, k] segments, got {segments.shape}")
    return TimeDistributed(bank).forward(segments[None])[0]
