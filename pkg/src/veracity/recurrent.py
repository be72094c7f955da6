"""LSTM cell, unrolled LSTM layer with backpropagation through time, and the
two-layer stack that produces the joint text/sentiment representation."""

from __future__ import annotations

from typing import Mapping, NamedTuple

import numpy as np

from .exceptions import DimensionError
from .tensor import Layer, sigmoid, tanh, uniform_init

GATES = ("i", "f", "o", "c")
PARAM_NAMES = tuple(f"Wx_{g}" for g in GATES) + tuple(f"Wh_{g}" for g in GATES) + tuple(
    f"b_{g}" for g in GATES
)


class LstmState(NamedTuple):
    h: np.ndarray
    c: np.ndarray


def init_lstm_params(input_dim: int, hidden: int, rng=None, dtype=np.float64, forget_bias: float = 1.0):
    """Cell parameters: ``Wx_*`` [hidden, input], ``Wh_*`` [hidden, hidden], ``b_*`` [hidden].

    Weights are uniform in ``+-1/sqrt(fan_in)``; the forget-gate bias starts
    at ``forget_bias``, the others at zero.
    """
    rng = np.random.default_rng(rng)
    params = {}
    for g in GATES:
        params[f"Wx_{g}"] = uniform_init(rng, (hidden, input_dim), input_dim, dtype)
    for g in GATES:
        params[f"Wh_{g}"] = uniform_init(rng, (hidden, hidden), hidden, dtype)
    for g in GATES:
        params[f"b_{g}"] = np.zeros(hidden, dtype=dtype)
    params["b_f"][:] = forget_bias
    return params


def zero_lstm_params(input_dim: int, hidden: int, dtype=np.float64):
    params = init_lstm_params(input_dim, hidden, rng=0, dtype=dtype)
    for p in params.values():
        p.fill(0.0)
    return params


def _dims(params: Mapping[str, np.ndarray]) -> tuple[int, int]:
    hidden, input_dim = params["Wx_i"].shape
    return input_dim, hidden


def zero_state(hidden: int, batch: int | None = None, dtype=np.float64) -> LstmState:
    shape = (hidden,) if batch is None else (batch, hidden)
    return LstmState(np.zeros(shape, dtype=dtype), np.zeros(shape, dtype=dtype))


def lstm_cell_step(params: Mapping[str, np.ndarray], x_t: np.ndarray, prev: LstmState) -> LstmState:
    """One step of the gated recurrence; ``x_t`` may be a vector or a (batch, input) matrix."""
    input_dim, hidden = _dims(params)
    x_t = np.asarray(x_t)
    if x_t.shape[-1] != input_dim:
        raise DimensionError(f"LSTM input has {x_t.shape[-1]} features, cell expects {input_dim}")
    if prev.h.shape[-1] != hidden or prev.c.shape[-1] != hidden:
        raise DimensionError(
            f"LSTM state dims {prev.h.shape}/{prev.c.shape} do not match hidden size {hidden}"
        )

    def pre(g):
        return x_t @ params[f"Wx_{g}"].T + prev.h @ params[f"Wh_{g}"].T + params[f"b_{g}"]

    i = sigmoid(pre("i"))
    f = sigmoid(pre("f"))
    o = sigmoid(pre("o"))
    c_tilde = tanh(pre("c"))
    c = f * prev.c + i * c_tilde
    h = o * tanh(c)
    return LstmState(h, c)


def lstm_forward(params: Mapping[str, np.ndarray], sequence: np.ndarray, init: LstmState | None = None):
    """Run the cell across a [time, input] sequence; returns ``(outputs [time, hidden], final)``."""
    sequence = np.asarray(sequence)
    if sequence.ndim != 2 or sequence.shape[0] < 1:
        raise ValueError(f"expected a non-empty [time, input] sequence, got shape {sequence.shape}")
    _, hidden = _dims(params)
    state = init if init is not None else zero_state(hidden, dtype=sequence.dtype)
    outputs = []
    for x_t in sequence:
        state = lstm_cell_step(params, x_t, state)
        outputs.append(state.h)
    return np.stack(outputs), state


def stacked_lstm_forward(layer1, layer2, sequence: np.ndarray) -> np.ndarray:
    """First layer emits its full sequence; the final hidden state of the second is returned."""
    sequence = np.asarray(sequence)
    if sequence.ndim != 2 or sequence.shape[1] != _dims(layer1)[0]:
        raise DimensionError(
            f"sequence shape {sequence.shape} does not match first-layer input {_dims(layer1)[0]}"
        )
    hidden_seq, _ = lstm_forward(layer1, sequence)
    if _dims(layer2)[0] != _dims(layer1)[1]:
        raise DimensionError("second LSTM input size must equal first LSTM hidden size")
    _, final = lstm_forward(layer2, hidden_seq)
    return final.h


class LSTM(Layer):
    """Batched LSTM over (batch, time, input) with full BPTT.

    With ``return_sequences`` the output is (batch, time, hidden); otherwise
    only the final hidden state (batch, hidden). After ``backward`` the
    gradients with respect to the (zero) initial state are in ``dh0``/``dc0``.
    """

    def __init__(self, input_dim, hidden, return_sequences=True, rng=None, dtype=np.float64, forget_bias=1.0):
        super().__init__()
        self.input_dim = input_dim
        self.hidden = hidden
        self.return_sequences = return_sequences
        for name, value in init_lstm_params(input_dim, hidden, rng, dtype, forget_bias).items():
            self._add_param(name, value)
        self.dh0 = None
        self.dc0 = None

    def forward(self, x):
        x = np.asarray(x)
        if x.ndim != 3 or x.shape[2] != self.input_dim:
            raise DimensionError(f"LSTM expects (batch, time, {self.input_dim}), got {x.shape}")
        batch, steps, _ = x.shape
        if steps < 1:
            raise ValueError("LSTM needs at least one time step")
        p = self.params
        # input projections for all steps at once
        xproj = {g: x @ p[f"Wx_{g}"].T + p[f"b_{g}"] for g in GATES}
        h = np.zeros((batch, self.hidden), dtype=x.dtype)
        c = np.zeros_like(h)
        hs, cs, gates = [h], [c], []
        for t in range(steps):
            i = sigmoid(xproj["i"][:, t] + h @ p["Wh_i"].T)
            f = sigmoid(xproj["f"][:, t] + h @ p["Wh_f"].T)
            o = sigmoid(xproj["o"][:, t] + h @ p["Wh_o"].T)
            g = tanh(xproj["c"][:, t] + h @ p["Wh_c"].T)
            c = f * c + i * g
            tc = tanh(c)
            h = o * tc
            hs.append(h)
            cs.append(c)
            gates.append((i, f, o, g, tc))
        self._cache = (x, hs, cs, gates)
        out = np.stack(hs[1:], axis=1)
        return out if self.return_sequences else h

    def backward(self, dout):
        x, hs, cs, gates = self._cached()
        batch, steps, _ = x.shape
        p = self.params
        if self.return_sequences:
            dseq = dout
        else:
            dseq = np.zeros((batch, steps, self.hidden), dtype=dout.dtype)
            dseq[:, -1] = dout
        grads = {name: np.zeros_like(v) for name, v in p.items()}
        dx = np.zeros_like(x, dtype=np.result_type(x, dout))
        dh_next = np.zeros((batch, self.hidden), dtype=dx.dtype)
        dc_next = np.zeros_like(dh_next)
        for t in reversed(range(steps)):
            i, f, o, g, tc = gates[t]
            h_prev, c_prev = hs[t], cs[t]
            dh = dseq[:, t] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            da = {
                "i": dc * g * i * (1.0 - i),
                "f": dc * c_prev * f * (1.0 - f),
                "o": do * o * (1.0 - o),
                "c": dc * i * (1.0 - g * g),
            }
            x_t = x[:, t]
            dh_next = np.zeros_like(dh_next)
            for gate, d in da.items():
                grads[f"Wx_{gate}"] += d.T @ x_t
                grads[f"Wh_{gate}"] += d.T @ h_prev
                grads[f"b_{gate}"] += d.sum(axis=0)
                dx[:, t] += d @ p[f"Wx_{gate}"]
                dh_next += d @ p[f"Wh_{gate}"]
            dc_next = dc * f
        for name, g in grads.items():
            self.grads[name][...] = g
        self.dh0, self.dc0 = dh_next, dc_next
        return dx


class StackedLSTM(Layer):
    """Two LSTMs; the first returns its sequence, the second only its last hidden state."""

    def __init__(self, input_dim, hidden1, hidden2, rng=None, dtype=np.float64):
        super().__init__()
        rng = np.random.default_rng(rng)
        self.first = LSTM(input_dim, hidden1, return_sequences=True, rng=rng, dtype=dtype)
        self.second = LSTM(hidden1, hidden2, return_sequences=False, rng=rng, dtype=dtype)
        for prefix, layer in (("l1", self.first), ("l2", self.second)):
            for name in layer.params:
                self.params[f"{prefix}.{name}"] = layer.params[name]
                self.grads[f"{prefix}.{name}"] = layer.grads[name]

    def forward(self, x):
        out = self.second.forward(self.first.forward(x))
        self._cache = True
        return out

    def backward(self, dout):
        self._cached()
        return self.first.backward(self.second.backward(dout))
