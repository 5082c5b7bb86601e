"""Array-valued reverse-mode tape used on the training path.

The scalar :mod:`~pecann.autodiff.graph` engine is exact but pays Python
overhead per scalar; training a 4x50 network on ~1400 collocation points
needs whole arrays per node.  This module keeps the same contract (record a
value, sweep adjoints back once) with NumPy arrays as node values.

Operands may be plain ndarrays or floats; they are treated as constants.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = ["Tensor", "backward", "huber", "tanh", "sigmoid", "constant"]

Backward = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    __slots__ = ("value", "parents", "backward_fn", "requires_grad")
    # make ndarray <op> Tensor dispatch to the reflected Tensor method
    __array_ufunc__ = None

    def __init__(self, value, parents: tuple["Tensor", ...] = (), backward_fn: Backward | None = None,
                 requires_grad: bool = False) -> None:
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, o):
        o_val, o_t = _split(o)
        out = self.value + o_val
        return _make(out, self, o_t, lambda g: (_unbroadcast(g, self.shape),
                                                None if o_t is None else _unbroadcast(g, o_t.shape)))

    __radd__ = __add__

    def __sub__(self, o):
        o_val, o_t = _split(o)
        out = self.value - o_val
        return _make(out, self, o_t, lambda g: (_unbroadcast(g, self.shape),
                                                None if o_t is None else -_unbroadcast(g, o_t.shape)))

    def __rsub__(self, o):
        o_val, o_t = _split(o)
        out = o_val - self.value
        return _make(out, self, o_t, lambda g: (-_unbroadcast(g, self.shape),
                                                None if o_t is None else _unbroadcast(g, o_t.shape)))

    def __mul__(self, o):
        o_val, o_t = _split(o)
        a = self.value
        out = a * o_val
        return _make(out, self, o_t, lambda g: (_unbroadcast(g * o_val, self.shape),
                                                None if o_t is None else _unbroadcast(g * a, o_t.shape)))

    __rmul__ = __mul__

    def __truediv__(self, o):
        o_val, o_t = _split(o)
        out = self.value / o_val
        return _make(out, self, o_t, lambda g: (_unbroadcast(g / o_val, self.shape),
                                                None if o_t is None else _unbroadcast(-g * out / o_val, o_t.shape)))

    def __rtruediv__(self, o):
        o_val, o_t = _split(o)
        out = o_val / self.value
        return _make(out, self, o_t, lambda g: (_unbroadcast(-g * out / self.value, self.shape),
                                                None if o_t is None else _unbroadcast(g / self.value, o_t.shape)))

    def __neg__(self):
        return _make(-self.value, self, None, lambda g: (-g, None))

    def __pow__(self, c: float):
        c = float(c)
        a = self.value
        if c == 2.0:
            return _make(a * a, self, None, lambda g: (2.0 * g * a, None))
        return _make(a**c, self, None, lambda g: (g * c * a ** (c - 1.0), None))

    def __getitem__(self, idx):
        shape = self.shape

        def bw(g):
            full = np.zeros(shape)
            np.add.at(full, idx, g)
            return (full, None)

        return _make(self.value[idx], self, None, bw)

    def sum(self) -> "Tensor":
        shape = self.shape
        return _make(np.sum(self.value), self, None, lambda g: (np.broadcast_to(g, shape), None))


def constant(value) -> Tensor:
    return Tensor(value)


def _split(o) -> tuple[np.ndarray, "Tensor | None"]:
    if isinstance(o, Tensor):
        return o.value, o
    return np.asarray(o, dtype=np.float64), None


def _make(value, a: Tensor, b: "Tensor | None", bw: Backward) -> Tensor:
    parents = (a,) if b is None else (a, b)
    if not any(p.requires_grad for p in parents):
        return Tensor(value)
    if b is None:
        return Tensor(value, (a,), lambda g: bw(g)[:1], True)
    return Tensor(value, parents, bw, True)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def tanh(x):
    if not isinstance(x, Tensor):
        return np.tanh(x)
    t = np.tanh(x.value)
    return _make(t, x, None, lambda g: (g * (1.0 - t * t), None))


def sigmoid(x):
    if not isinstance(x, Tensor):
        return _np_sigmoid(x)
    s = _np_sigmoid(x.value)
    return _make(s, x, None, lambda g: (g * s * (1.0 - s), None))


def _np_sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def huber(r, delta: float = 1.0):
    """Elementwise Huber distance; slope is ``clip(r, -delta, delta)``."""
    rv = r.value if isinstance(r, Tensor) else np.asarray(r, dtype=np.float64)
    a = np.abs(rv)
    val = np.where(a <= delta, 0.5 * rv * rv, delta * (a - 0.5 * delta))
    if not isinstance(r, Tensor):
        return val
    slope = np.clip(rv, -delta, delta)
    return _make(val, r, None, lambda g: (g * slope, None))


def backward(out: Tensor, wrt: Sequence[Tensor]) -> list[np.ndarray]:
    """Adjoints of scalar ``out`` with respect to ``wrt`` (one sweep)."""
    if out.value.size != 1:
        raise ValueError("backward needs a scalar output")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(out, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    grads: dict[int, np.ndarray] = {id(out): np.ones_like(out.value)}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node.backward_fn is None:
            continue
        for p, gp in zip(node.parents, node.backward_fn(g)):
            if gp is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + gp
            else:
                grads[key] = gp
    return [np.asarray(grads.get(id(w), np.zeros_like(w.value)), dtype=np.float64).reshape(w.shape)
            for w in wrt]
