"""Float64 tensors with tape-based reverse-mode differentiation.

Only the handful of primitives needed by the tagger and the span classifier
are provided.  Operations record themselves on the innermost active
:class:`GradTape` when at least one input requires a gradient; outside a
tape everything is plain numpy arithmetic.

    with GradTape() as tape:
        w = tape.watch(np.ones(3), "w")
        loss = (w * w).sum()
    grads = backward(loss, tape)      # {"w": array([2., 2., 2.])}
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, TrainingError, UsageError

_local = threading.local()


def _tape_stack():
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


class Tensor:
    """An immutable float64 array that may participate in a gradient tape."""

    __slots__ = ("data", "requires_grad", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    __add__ = lambda self, other: add(self, other)
    __radd__ = lambda self, other: add(other, self)
    __sub__ = lambda self, other: sub(self, other)
    __rsub__ = lambda self, other: sub(other, self)
    __mul__ = lambda self, other: mul(self, other)
    __rmul__ = lambda self, other: mul(other, self)
    __neg__ = lambda self: neg(self)
    __matmul__ = lambda self, other: matmul(self, other)
    __getitem__ = lambda self, idx: getitem(self, idx)

    def sum(self, axis=None) -> "Tensor":
        return tsum(self, axis)

    def reshape(self, *shape) -> "Tensor":
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)


Backward = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class GradTape:
    """Ordered record of primitive operations for one backward traversal.

    A tape is confined to the thread that entered it.
    """

    def __init__(self):
        self._nodes: list = []
        self._watched: Dict[str, Tensor] = {}

    def __enter__(self) -> "GradTape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _tape_stack().pop()

    def __len__(self) -> int:
        return len(self._nodes)

    def watch(self, value, name: str) -> Tensor:
        """Register ``value`` as a differentiable leaf called ``name``."""
        if name in self._watched:
            raise UsageError(f"parameter {name!r} is already watched on this tape")
        data = value.data if isinstance(value, Tensor) else value
        t = Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)
        self._watched[name] = t
        return t

    def watch_all(self, arrays: Mapping[str, np.ndarray]) -> Dict[str, Tensor]:
        return {k: self.watch(v, k) for k, v in arrays.items()}

    def _record(self, out: Tensor, parents: Tuple[Tensor, ...], fn: Backward) -> None:
        self._nodes.append((out, parents, fn))

    def gradient(self, loss: Tensor) -> Dict[str, np.ndarray]:
        """Gradients of scalar ``loss`` w.r.t. every watched leaf.

        Each call starts from fresh accumulators, so calling twice returns the
        same result.  Leaves the loss does not depend on get zero gradients.
        """
        if not isinstance(loss, Tensor) or loss.data.size != 1:
            shape = loss.shape if isinstance(loss, Tensor) else type(loss).__name__
            raise UsageError(f"backward needs a scalar loss, got {shape}")
        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for out, parents, fn in reversed(self._nodes):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for p, pg in zip(parents, fn(g)):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                prev = grads.get(key)
                grads[key] = pg if prev is None else prev + pg
        result = {}
        for name, t in self._watched.items():
            g = grads.get(id(t))
            result[name] = np.zeros_like(t.data) if g is None else np.array(g, dtype=np.float64).reshape(t.shape)
        return result


def backward(loss: Tensor, tape: GradTape) -> Dict[str, np.ndarray]:
    """Reverse-mode gradients of ``loss`` for all leaves watched on ``tape``."""
    return tape.gradient(loss)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Tuple[Tensor, ...], fn: Backward) -> Tensor:
    stack = _tape_stack()
    if stack and any(p.requires_grad for p in parents):
        out = Tensor(data, requires_grad=True)
        stack[-1]._record(out, parents, fn)
        return out
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shapes(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ----------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shapes(a, b, "add")
    sa, sb = a.shape, b.shape
    return _result(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shapes(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _result(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shapes(a, b, "mul")
    x, y = a.data, b.data
    return _result(x * y, (a, b), lambda g: (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.data)
    return _result(y, (a,), lambda g: (g * y,))


def log(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    return _result(np.log(x), (a,), lambda g: (g / x,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # split on sign so neither branch overflows
    x = a.data
    e = np.exp(-np.abs(x))
    y = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


# ----------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    x, y = a.data, b.data
    if x.ndim not in (1, 2) or y.ndim not in (1, 2) or x.shape[-1] != y.shape[0]:
        raise DimensionError(f"matmul: shapes {x.shape} and {y.shape} do not conform")

    def fn(g):
        if x.ndim == 1 and y.ndim == 1:
            return g * y, g * x
        if x.ndim == 2 and y.ndim == 1:
            return np.outer(g, y), x.T @ g
        if x.ndim == 1:
            return y @ g, np.outer(x, g)
        return g @ y.T, x.T @ g

    return _result(x @ y, (a, b), fn)


def affine(W, x, b) -> Tensor:
    """``W @ x + b``; ``x`` may also be a batch of rows, giving ``x @ W.T + b``."""
    W, x, b = as_tensor(W), as_tensor(x), as_tensor(b)
    w, v, c = W.data, x.data, b.data
    if w.ndim != 2 or v.ndim not in (1, 2) or v.shape[-1] != w.shape[1] or c.shape != (w.shape[0],):
        raise DimensionError(
            f"affine: W{w.shape}, x{v.shape}, b{c.shape} do not conform "
            f"(expected W[m×n], x[n] or x[T×n], b[m])"
        )
    if v.ndim == 1:
        y = w @ v + c
        fn = lambda g: (np.outer(g, v), w.T @ g, g)
    else:
        y = v @ w.T + c
        fn = lambda g: (g.T @ v, g @ w, g.sum(axis=0))
    return _result(y, (W, x, b), fn)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _result(a.data.T, (a,), lambda g: (g.T,))


# ----------------------------------------------------------------------------
# reductions and normalisers


def tsum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    shape = a.shape

    def fn(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _result(np.sum(a.data, axis=axis), (a,), fn)


def log_sum_exp(a, axis=None) -> Tensor:
    """``log Σ exp(a)``, shifted by the maximum so large inputs do not overflow."""
    a = as_tensor(a)
    x = a.data
    if x.size == 0:
        raise DimensionError("log_sum_exp of an empty tensor")
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    s = e.sum(axis=axis, keepdims=True)
    out = m + np.log(s)
    w = e / s

    def fn(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (g * w,)

    return _result(np.squeeze(out, axis=axis) if axis is not None else out.reshape(()), (a,), fn)


def softmax(a, axis=-1) -> Tensor:
    a = as_tensor(a)
    x = a.data
    if x.size == 0:
        raise DimensionError("softmax of an empty tensor")
    e = np.exp(x - np.max(x, axis=axis, keepdims=True))
    y = e / e.sum(axis=axis, keepdims=True)
    return _result(y, (a,), lambda g: (y * (g - np.sum(g * y, axis=axis, keepdims=True)),))


def log_softmax(a, axis=-1) -> Tensor:
    a = as_tensor(a)
    x = a.data
    if x.size == 0:
        raise DimensionError("log_softmax of an empty tensor")
    m = np.max(x, axis=axis, keepdims=True)
    lse = m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))
    y = x - lse
    p = np.exp(y)
    return _result(y, (a,), lambda g: (g - p * np.sum(g, axis=axis, keepdims=True),))


# ----------------------------------------------------------------------------
# indexing and assembly


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    basic = isinstance(idx, (int, np.integer, slice)) or (
        isinstance(idx, tuple) and all(isinstance(i, (int, np.integer, slice)) for i in idx)
    )

    def fn(g):
        out = np.zeros(shape)
        if basic:
            out[idx] = g
        else:
            # fancy indices may repeat
            np.add.at(out, idx, g)
        return (out,)

    return _result(np.array(a.data[idx]), (a,), fn)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    parts = tuple(as_tensor(p) for p in parts)
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: {[p.shape for p in parts]}: {exc}") from None
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]
    return _result(data, parts, lambda g: np.split(g, bounds, axis=axis))


def stack(parts: Sequence, axis: int = 0) -> Tensor:
    parts = tuple(as_tensor(p) for p in parts)
    if not parts:
        raise DimensionError("stack of an empty sequence")
    try:
        data = np.stack([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"stack: {[p.shape for p in parts]}: {exc}") from None
    return _result(data, parts, lambda g: [np.take(g, i, axis=axis) for i in range(len(parts))])


# ----------------------------------------------------------------------------
# recurrent cell


def lstm_update(z: Tensor, c_prev: Tensor) -> Tuple[Tensor, Tensor]:
    """Gate nonlinearities and state update from the 4H pre-activation ``z``.

    Gate order inside ``z`` is input, forget, output, candidate.
    """
    H = c_prev.shape[-1]
    gates = sigmoid(z[: 3 * H])
    cand = tanh(z[3 * H:])
    c = gates[H: 2 * H] * c_prev + gates[:H] * cand
    h = gates[2 * H:] * tanh(c)
    return h, c


def lstm_cell(x, h_prev, c_prev, params: Mapping[str, Tensor], prefix: str = "") -> Tuple[Tensor, Tensor]:
    """One LSTM step.  ``params`` holds ``Wx`` (4H×d), ``Wh`` (4H×H) and ``b`` (4H)."""
    Wx, Wh, b = (as_tensor(params[prefix + k]) for k in ("Wx", "Wh", "b"))
    x, h_prev, c_prev = as_tensor(x), as_tensor(h_prev), as_tensor(c_prev)
    H = Wh.shape[1]
    if Wh.shape != (4 * H, H) or h_prev.shape != (H,) or c_prev.shape != (H,):
        raise DimensionError(
            f"lstm_cell: Wh{Wh.shape}, h{h_prev.shape}, c{c_prev.shape} do not conform to hidden size {H}"
        )
    z = affine(Wx, x, b) + matmul(Wh, h_prev)
    return lstm_update(z, c_prev)


def lstm_sequence(xs, params: Mapping[str, Tensor], prefix: str = "", reverse: bool = False) -> list:
    """Run an LSTM over the rows of ``xs`` from zero state.

    Returns the hidden states aligned with input positions, so for
    ``reverse=True`` element ``t`` is the state after reading ``xs[t:]``.
    """
    Wx, Wh, b = (as_tensor(params[prefix + k]) for k in ("Wx", "Wh", "b"))
    xs = as_tensor(xs)
    H = Wh.shape[1]
    proj = affine(Wx, xs, b)
    T = xs.shape[0]
    order = range(T - 1, -1, -1) if reverse else range(T)
    h = c = None
    out = [None] * T
    for t in order:
        z = proj[t]
        if h is None:
            c = Tensor(np.zeros(H))
        else:
            z = z + matmul(Wh, h)
        h, c = lstm_update(z, c)
        out[t] = h
    return out


# ----------------------------------------------------------------------------
# parameters and optimisation


def glorot_uniform(shape: Tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    r = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-r, r, size=shape)


def init_lstm(input_size: int, hidden: int, rng: np.random.Generator, prefix: str = "") -> Dict[str, np.ndarray]:
    b = np.zeros(4 * hidden)
    b[hidden: 2 * hidden] = 1.0  # forget gate
    return {
        prefix + "Wx": glorot_uniform((4 * hidden, input_size), rng),
        prefix + "Wh": glorot_uniform((4 * hidden, hidden), rng),
        prefix + "b": b,
    }


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, 0)


def clip_global_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> Dict[str, np.ndarray]:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total <= max_norm:
        return dict(grads)
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update.  Inputs are left untouched."""
    if not lr > 0:
        raise UsageError(f"learning rate must be positive, got {lr}")
    for k, g in grads.items():
        if k not in params:
            raise UsageError(f"gradient for unknown parameter block {k!r}")
        if g.shape != params[k].shape:
            raise DimensionError(f"gradient {k!r} has shape {g.shape}, parameter has {params[k].shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in parameter block {k!r}")
    step = state.step + 1
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    new_params, m, v = dict(params), dict(state.m), dict(state.v)
    for k, g in grads.items():
        m[k] = beta1 * state.m.get(k, 0.0) + (1.0 - beta1) * g
        v[k] = beta2 * state.v.get(k, 0.0) + (1.0 - beta2) * g * g
        new_params[k] = params[k] - lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + eps)
    return new_params, AdamState(m, v, step)
