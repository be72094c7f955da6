"""Dense tensor operations and the layer abstraction.

Tensors are plain :class:`numpy.ndarray` objects in row-major layout. This
module adds the shape-checked primitives the network is built from, a
``Layer`` base class with explicit forward/backward passes, and a
finite-difference gradient checker used throughout the test-suite.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .exceptions import DimensionError, NumericError, StateError

FLOAT_DTYPES = {"float64": np.float64, "float32": np.float32}


def resolve_dtype(dtype) -> np.dtype:
    if isinstance(dtype, str):
        try:
            return np.dtype(FLOAT_DTYPES[dtype])
        except KeyError:
            raise ValueError(f"unsupported dtype {dtype!r}; use 'float64' or 'float32'") from None
    return np.dtype(dtype)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two rank-2 tensors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


_ELEMENTWISE = {"add": np.add, "sub": np.subtract, "mul": np.multiply}


def elementwise(op: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise ``add``, ``sub`` or ``mul`` of two same-shape tensors (no broadcasting)."""
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"elementwise {op} needs equal shapes, got {a.shape} and {b.shape}")
    return fn(a, b)


def _float_like(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float64)
    return x


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Branch on sign so exp never overflows; clip keeps the result inside (0, 1)
    # even where the exact value rounds to an endpoint.
    x = _float_like(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    info = np.finfo(x.dtype)
    return np.clip(out, info.tiny, 1.0 - info.epsneg, out=out)


def tanh(x: np.ndarray) -> np.ndarray:
    x = _float_like(x)
    edge = 1.0 - np.finfo(x.dtype).epsneg
    return np.clip(np.tanh(x), -edge, edge)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(_float_like(x), 0.0)


_ACTIVATIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
}


def activation(kind: str, x: np.ndarray) -> np.ndarray:
    """Apply ``sigmoid``, ``tanh`` or ``relu`` pointwise."""
    try:
        return _ACTIVATIONS[kind](x)
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None


def activation_grad(kind: str, out: np.ndarray, dout: np.ndarray) -> np.ndarray:
    """Backpropagate ``dout`` through an activation given its forward output."""
    if kind == "sigmoid":
        return dout * out * (1.0 - out)
    if kind == "tanh":
        return dout * (1.0 - out * out)
    if kind == "relu":
        return dout * (out > 0)
    raise ValueError(f"unknown activation {kind!r}")


def concat(tensors: Sequence[np.ndarray], axis: int = 0) -> np.ndarray:
    """Concatenate tensors that agree on every axis except ``axis``."""
    arrays = [np.asarray(t) for t in tensors]
    if not arrays:
        raise DimensionError("concat needs at least one tensor")
    ndim = arrays[0].ndim
    ax = axis % ndim if ndim else 0
    for t in arrays[1:]:
        if t.ndim != ndim or any(
            s != r for i, (s, r) in enumerate(zip(t.shape, arrays[0].shape)) if i != ax
        ):
            raise DimensionError(
                f"cannot concatenate shapes {[a.shape for a in arrays]} along axis {axis}"
            )
    return np.concatenate(arrays, axis=axis)


def split(tensor: np.ndarray, sizes: Sequence[int], axis: int = 0) -> list[np.ndarray]:
    """Inverse of :func:`concat`: cut ``tensor`` into pieces of the given lengths."""
    tensor = np.asarray(tensor)
    if sum(sizes) != tensor.shape[axis]:
        raise DimensionError(f"sizes {list(sizes)} do not sum to axis length {tensor.shape[axis]}")
    return np.split(tensor, np.cumsum(sizes)[:-1], axis=axis)


def uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype=np.float64) -> np.ndarray:
    """Uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Layer:
    """A differentiable block with named parameters and matching gradients.

    Subclasses implement ``forward`` (caching whatever ``backward`` needs)
    and ``backward``, which fills ``self.grads`` and returns the gradient
    with respect to the layer input.
    """

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.trainable = True
        self._cache = None

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def __call__(self, x):
        return self.forward(x)

    def _add_param(self, name: str, value: np.ndarray) -> None:
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)

    def _cached(self):
        if self._cache is None:
            raise StateError(f"{type(self).__name__}.backward called before forward")
        return self._cache

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def clear_cache(self) -> None:
        self._cache = None


class Dense(Layer):
    """Fully connected layer ``y = act(x @ W.T + b)`` with ``W`` of shape [out, in]."""

    def __init__(self, in_dim, out_dim, bias=True, activation=None, rng=None, dtype=np.float64):
        super().__init__()
        rng = np.random.default_rng(rng)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.use_bias = bias
        self._add_param("W", uniform_init(rng, (out_dim, in_dim), in_dim, dtype))
        if bias:
            self._add_param("b", np.zeros(out_dim, dtype=dtype))

    def forward(self, x):
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionError(f"Dense expects (batch, {self.in_dim}), got {x.shape}")
        z = x @ self.params["W"].T
        if self.use_bias:
            z = z + self.params["b"]
        out = activation(self.activation, z) if self.activation else z
        self._cache = (x, out)
        return out

    def backward(self, dout):
        x, out = self._cached()
        dz = activation_grad(self.activation, out, dout) if self.activation else dout
        self.grads["W"][...] = dz.T @ x
        if self.use_bias:
            self.grads["b"][...] = dz.sum(axis=0)
        return dz @ self.params["W"]


class RepeatVector(Layer):
    """Tile a (batch, features) tensor to (batch, steps, features)."""

    def __init__(self, steps: int):
        super().__init__()
        if steps < 1:
            raise ValueError(f"steps must be >= 1, got {steps}")
        self.steps = steps

    def forward(self, x):
        x = np.asarray(x)
        self._cache = x.shape
        return np.repeat(x[:, None, :], self.steps, axis=1)

    def backward(self, dout):
        self._cached()
        return dout.sum(axis=1)


def repeat_vector(v: np.ndarray, steps: int) -> np.ndarray:
    """Stack ``steps`` copies of a vector as rows."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    v = np.asarray(v)
    return np.repeat(v[None, :], steps, axis=0)


# -- gradient checking -------------------------------------------------------


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Max of ``|a - n| / max(|a|, |n|, floor)`` over all elements."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def numerical_gradient(f: Callable[[], float], array: np.ndarray, epsilon: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``f`` w.r.t. ``array`` (perturbed in place)."""
    grad = np.zeros(array.shape, dtype=np.float64)
    it = np.nditer(array, flags=["multi_index"], op_flags=[["readwrite"]])
    for _ in it:
        idx = it.multi_index
        orig = array[idx]
        array[idx] = orig + epsilon
        plus = f()
        array[idx] = orig - epsilon
        minus = f()
        array[idx] = orig
        if not (np.isfinite(plus) and np.isfinite(minus)):
            raise NumericError(f"non-finite loss while perturbing element {idx}")
        grad[idx] = (plus - minus) / (2.0 * epsilon)
    return grad


def check_gradients(
    loss: Callable[[], float],
    arrays: Mapping[str, np.ndarray],
    analytic: Mapping[str, np.ndarray],
    epsilon: float = 1e-5,
) -> dict[str, float]:
    """Relative error between ``analytic`` and finite-difference gradients, per array."""
    return {
        name: relative_error(analytic[name], numerical_gradient(loss, arr, epsilon))
        for name, arr in arrays.items()
    }


def gradient_errors(layer: Layer, x, epsilon: float = 1e-5, seed: int = 0, check_input: bool = True):
    """Per-tensor relative gradient errors of ``layer`` at input ``x``.

    The scalar loss is ``sum(R * layer(x))`` for a fixed random ``R``. Keys
    are parameter names (trainable layers only) plus ``"input"`` when the
    input is floating point.
    """
    rng = np.random.default_rng(seed)
    is_float = np.issubdtype(np.asarray(x).dtype, np.floating)
    if is_float:
        x = np.array(x, dtype=np.float64)
    out = layer.forward(x)
    weights = rng.standard_normal(np.shape(out))

    def loss() -> float:
        return float(np.sum(weights * layer.forward(x)))

    if not np.isfinite(loss()):
        raise NumericError("loss is not finite at the check point")
    layer.forward(x)
    dx = layer.backward(weights)
    # a frozen layer has no parameter gradients to check
    analytic = {name: g.copy() for name, g in layer.grads.items()} if layer.trainable else {}
    arrays = dict(layer.params) if layer.trainable else {}
    if check_input and is_float:
        arrays["input"] = x
        analytic["input"] = np.asarray(dx)
    return check_gradients(loss, arrays, analytic, epsilon)


def layer_backward_check(layer: Layer, x, epsilon: float = 1e-5, seed: int = 0, check_input: bool = True) -> float:
    """Maximum relative gradient error of ``layer`` over parameters and input."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    errors = gradient_errors(layer, x, epsilon=epsilon, seed=seed, check_input=check_input)
    return max(errors.values(), default=0.0)


def iter_params(layers: Iterable[tuple[str, Layer]]):
    """Yield ``(qualified_name, param, grad)`` for every trainable parameter."""
    for prefix, layer in layers:
        if not layer.trainable:
            continue
        for name, p in layer.params.items():
            yield f"{prefix}.{name}", p, layer.grads[name]
