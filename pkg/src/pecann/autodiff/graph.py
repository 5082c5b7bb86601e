"""Scalar computation graph with reverse sweeps and nested input derivatives.

Every node is appended to a flat list, so node ids are already a topological
order and a reverse sweep is a single backwards loop.  Input derivatives are
built *inside* the graph by forward-mode tangent propagation (each tangent is
itself a node), which means a later reverse sweep differentiates straight
through ``u_x`` or ``u_xx`` with respect to the network parameters.

Example
-------
>>> g, (x,), y = record(lambda x: x * x, [3.0])
>>> y.value
9.0
>>> g.grad(y, [x])
[6.0]
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

__all__ = [
    "Graph",
    "Var",
    "DualTrace",
    "DomainError",
    "UnsupportedPrimitiveError",
    "record",
    "input_derivative",
    "exp",
    "log",
    "sin",
    "cos",
    "tanh",
    "sigmoid",
    "absolute",
    "huber",
    "minimum",
    "maximum",
    "step",
]


class DomainError(ValueError):
    """A primitive was evaluated outside its domain (or on a non-finite value)."""


class UnsupportedPrimitiveError(ValueError):
    """An operation name is not one of the recorded primitives."""


# arity of every primitive; "leaf" and "const" carry no operands
_ARITY = {
    "leaf": 0,
    "const": 0,
    "add": 2,
    "sub": 2,
    "mul": 2,
    "div": 2,
    "neg": 1,
    "powc": 1,  # x ** c with a fixed real exponent
    "pow": 2,  # x ** y with both operands on the graph
    "exp": 1,
    "ln": 1,
    "sin": 1,
    "cos": 1,
    "tanh": 1,
    "sigmoid": 1,
    "abs": 1,
    "huber": 1,  # parameter delta stored as the node's constant
    "min": 2,
    "max": 2,
    "step": 1,  # Heaviside with step(0) = 1/2, zero derivative
}


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def _huber(r: float, delta: float) -> float:
    a = abs(r)
    return 0.5 * r * r if a <= delta else delta * (a - 0.5 * delta)


def _step(x: float) -> float:
    if x > 0:
        return 1.0
    if x < 0:
        return 0.0
    return 0.5


def _eval(op: str, a: float, b: float, c: float) -> float:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if b == 0.0:
            raise DomainError("division by zero")
        return a / b
    if op == "neg":
        return -a
    if op == "powc":
        if a < 0 and not float(c).is_integer():
            raise DomainError(f"negative base {a} with non-integer exponent {c}")
        if a == 0 and c < 0:
            raise DomainError("zero raised to a negative power")
        return a**c
    if op == "pow":
        if a <= 0:
            raise DomainError(f"pow with graph exponent needs a positive base, got {a}")
        return a**b
    if op == "exp":
        return math.exp(a)
    if op == "ln":
        if a <= 0:
            raise DomainError(f"log of non-positive value {a}")
        return math.log(a)
    if op == "sin":
        return math.sin(a)
    if op == "cos":
        return math.cos(a)
    if op == "tanh":
        return math.tanh(a)
    if op == "sigmoid":
        return _sigmoid(a)
    if op == "abs":
        return abs(a)
    if op == "huber":
        return _huber(a, c)
    if op == "min":
        return a if a <= b else b
    if op == "max":
        return a if a >= b else b
    if op == "step":
        return _step(a)
    raise UnsupportedPrimitiveError(op)


@dataclass(frozen=True)
class DualTrace:
    """Primal value and directional derivative of one node."""

    primal: float
    tangent: float


class Graph:
    """Append-only scalar tape.

    Nodes are stored column-wise in ``ops``, ``args``, ``consts`` and
    ``values``.  ``roots`` holds the ids of leaf (input) nodes in creation
    order.  Constants are leaves too, but are never reported as roots and
    always carry a zero tangent.
    """

    def __init__(self) -> None:
        self.ops: list[str] = []
        self.args: list[tuple[int, ...]] = []
        self.consts: list[float] = []
        self.values: list[float] = []
        self.roots: list[int] = []
        self._const_cache: dict[float, int] = {}

    def __len__(self) -> int:
        return len(self.ops)

    # -- construction -------------------------------------------------------

    def _push(self, op: str, args: tuple[int, ...], value: float, const: float = 0.0) -> "Var":
        self.ops.append(op)
        self.args.append(args)
        self.consts.append(const)
        self.values.append(value)
        return Var(self, len(self.ops) - 1)

    def leaf(self, value: float) -> "Var":
        value = float(value)
        if not math.isfinite(value):
            raise DomainError(f"non-finite leaf value {value}")
        var = self._push("leaf", (), value)
        self.roots.append(var.id)
        return var

    def const(self, value: float) -> "Var":
        value = float(value)
        if not math.isfinite(value):
            raise DomainError(f"non-finite constant {value}")
        # bit-identical constants share one node
        key = value if value != 0.0 else 0.0
        if key in self._const_cache:
            return Var(self, self._const_cache[key])
        var = self._push("const", (), value, value)
        self._const_cache[key] = var.id
        return var

    def apply(self, op: str, *operands: "Var | float", param: float = 0.0) -> "Var":
        """Append a primitive node.  ``param`` is the exponent for ``powc``
        and the threshold for ``huber``."""
        if op not in _ARITY or op in ("leaf", "const"):
            raise UnsupportedPrimitiveError(f"unsupported primitive {op!r}")
        if len(operands) != _ARITY[op]:
            raise ValueError(f"{op} takes {_ARITY[op]} operand(s), got {len(operands)}")
        if op == "huber" and not param > 0:
            raise ValueError("huber threshold must be positive")
        ids = tuple(self._lift(o).id for o in operands)
        a = self.values[ids[0]]
        b = self.values[ids[1]] if len(ids) > 1 else 0.0
        value = _eval(op, a, b, param)
        if not math.isfinite(value):
            raise DomainError(f"{op} produced non-finite value from {a}, {b}")
        return self._push(op, ids, value, param)

    def _lift(self, x: "Var | float") -> "Var":
        if isinstance(x, Var):
            if x.graph is not self:
                raise ValueError("operand belongs to a different graph")
            return x
        return self.const(x)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, leaf_values: Sequence[float] | None = None) -> list[float]:
        """Recompute every cached value in node order.

        ``leaf_values`` replaces the root values (in ``roots`` order); with
        ``None`` the current leaf values are reused.
        """
        if leaf_values is not None:
            if len(leaf_values) != len(self.roots):
                raise ValueError(f"expected {len(self.roots)} leaf values, got {len(leaf_values)}")
            for rid, v in zip(self.roots, leaf_values):
                v = float(v)
                if not math.isfinite(v):
                    raise DomainError(f"non-finite leaf value {v}")
                self.values[rid] = v
        vals = self.values
        for i, op in enumerate(self.ops):
            if op in ("leaf", "const"):
                continue
            ids = self.args[i]
            a = vals[ids[0]]
            b = vals[ids[1]] if len(ids) > 1 else 0.0
            vals[i] = _eval(op, a, b, self.consts[i])
        return list(vals)

    # -- reverse sweep ------------------------------------------------------

    def grad(self, output: "Var | int", wrt: Iterable["Var | int"]) -> list[float]:
        """Gradient of a scalar node with respect to the requested nodes.

        One backwards pass over ids ``output, output-1, ..., 0``; each node
        is visited at most once.
        """
        out = output.id if isinstance(output, Var) else int(output)
        if not 0 <= out < len(self.ops):
            raise KeyError(f"output id {out} not in graph of {len(self.ops)} nodes")
        adj = self.adjoints(out)
        result = []
        for w in wrt:
            wid = w.id if isinstance(w, Var) else int(w)
            if not 0 <= wid < len(self.ops):
                raise KeyError(f"node id {wid} not in graph")
            result.append(adj[wid] if wid <= out else 0.0)
        return result

    def adjoints(self, out: int) -> list[float]:
        vals, ops, args, consts = self.values, self.ops, self.args, self.consts
        adj = [0.0] * (out + 1)
        adj[out] = 1.0
        for i in range(out, -1, -1):
            g = adj[i]
            if g == 0.0:
                continue
            op = ops[i]
            if op in ("leaf", "const", "step"):
                continue
            ids = args[i]
            a = vals[ids[0]]
            if op == "add":
                adj[ids[0]] += g
                adj[ids[1]] += g
            elif op == "sub":
                adj[ids[0]] += g
                adj[ids[1]] -= g
            elif op == "mul":
                b = vals[ids[1]]
                adj[ids[0]] += g * b
                adj[ids[1]] += g * a
            elif op == "div":
                b = vals[ids[1]]
                adj[ids[0]] += g / b
                adj[ids[1]] -= g * vals[i] / b
            elif op == "neg":
                adj[ids[0]] -= g
            elif op == "powc":
                c = consts[i]
                adj[ids[0]] += g * c * a ** (c - 1.0) if c != 0.0 else 0.0
            elif op == "pow":
                b = vals[ids[1]]
                adj[ids[0]] += g * b * a ** (b - 1.0)
                adj[ids[1]] += g * vals[i] * math.log(a)
            elif op == "exp":
                adj[ids[0]] += g * vals[i]
            elif op == "ln":
                adj[ids[0]] += g / a
            elif op == "sin":
                adj[ids[0]] += g * math.cos(a)
            elif op == "cos":
                adj[ids[0]] -= g * math.sin(a)
            elif op == "tanh":
                t = vals[i]
                adj[ids[0]] += g * (1.0 - t * t)
            elif op == "sigmoid":
                s = vals[i]
                adj[ids[0]] += g * s * (1.0 - s)
            elif op == "abs":
                # subgradient 0 at the kink
                adj[ids[0]] += g * (_step(a) - _step(-a))
            elif op == "huber":
                d = consts[i]
                adj[ids[0]] += g * min(max(a, -d), d)
            elif op in ("min", "max"):
                b = vals[ids[1]]
                wa = _step(b - a) if op == "min" else _step(a - b)
                adj[ids[0]] += g * wa
                adj[ids[1]] += g * (1.0 - wa)
            else:  # pragma: no cover - _ARITY guards construction
                raise UnsupportedPrimitiveError(op)
        return adj

    # -- forward-mode -------------------------------------------------------

    def jvp(self, seed: "Var | int", upto: "Var | int | None" = None) -> list[DualTrace]:
        """Numeric forward-mode sweep with tangent 1 on ``seed``."""
        sid = seed.id if isinstance(seed, Var) else int(seed)
        last = len(self.ops) - 1 if upto is None else (upto.id if isinstance(upto, Var) else int(upto))
        vals, ops, args, consts = self.values, self.ops, self.args, self.consts
        tan = [0.0] * (last + 1)
        for i in range(last + 1):
            op = ops[i]
            if op in ("leaf", "const"):
                tan[i] = 1.0 if i == sid else 0.0
                continue
            ids = args[i]
            a = vals[ids[0]]
            ta = tan[ids[0]]
            if len(ids) > 1:
                b = vals[ids[1]]
                tb = tan[ids[1]]
            if op == "add":
                t = ta + tb
            elif op == "sub":
                t = ta - tb
            elif op == "mul":
                t = ta * b + a * tb
            elif op == "div":
                t = (ta - vals[i] * tb) / b
            elif op == "neg":
                t = -ta
            elif op == "powc":
                c = consts[i]
                t = c * a ** (c - 1.0) * ta if c != 0.0 else 0.0
            elif op == "pow":
                t = vals[i] * (tb * math.log(a) + b * ta / a)
            elif op == "exp":
                t = vals[i] * ta
            elif op == "ln":
                t = ta / a
            elif op == "sin":
                t = math.cos(a) * ta
            elif op == "cos":
                t = -math.sin(a) * ta
            elif op == "tanh":
                t = (1.0 - vals[i] ** 2) * ta
            elif op == "sigmoid":
                t = vals[i] * (1.0 - vals[i]) * ta
            elif op == "abs":
                t = (_step(a) - _step(-a)) * ta
            elif op == "huber":
                t = min(max(a, -consts[i]), consts[i]) * ta
            elif op == "min":
                w = _step(b - a)
                t = w * ta + (1.0 - w) * tb
            elif op == "max":
                w = _step(a - b)
                t = w * ta + (1.0 - w) * tb
            elif op == "step":
                t = 0.0
            else:  # pragma: no cover
                raise UnsupportedPrimitiveError(op)
            tan[i] = t
        return [DualTrace(vals[i], tan[i]) for i in range(last + 1)]

    def tangent_node(self, output: "Var", wrt: "Var") -> "Var":
        """Build a node equal to d(output)/d(wrt) by symbolic forward mode.

        Only nodes up to ``output`` are traversed; the new tangent nodes are
        appended after them, so the graph stays topologically ordered.
        """
        if output.graph is not self or wrt.graph is not self:
            raise ValueError("nodes belong to a different graph")
        last = output.id
        tan: list[Var | None] = [None] * (last + 1)
        for i in range(last + 1):
            op = self.ops[i]
            if op in ("leaf", "const"):
                tan[i] = self.const(1.0) if i == wrt.id else None
                continue
            if op == "step":
                continue
            ids = self.args[i]
            a = Var(self, ids[0])
            ta = tan[ids[0]]
            b = Var(self, ids[1]) if len(ids) > 1 else None
            tb = tan[ids[1]] if len(ids) > 1 else None
            if ta is None and tb is None:
                continue
            me = Var(self, i)
            if op == "add":
                t = _sum(ta, tb)
            elif op == "sub":
                t = _sum(ta, None if tb is None else -tb)
            elif op == "mul":
                t = _sum(None if ta is None else ta * b, None if tb is None else a * tb)
            elif op == "div":
                t = _sum(None if ta is None else ta / b, None if tb is None else -(me * tb) / b)
            elif op == "neg":
                t = -ta
            elif op == "powc":
                c = self.consts[i]
                if c == 0.0:
                    continue
                deriv = c if c == 1.0 else c * (a ** (c - 1.0))
                t = deriv * ta
            elif op == "pow":
                parts = None if ta is None else b * (a ** (b - 1.0)) * ta
                t = _sum(parts, None if tb is None else me * log(a) * tb)
            elif op == "exp":
                t = me * ta
            elif op == "ln":
                t = ta / a
            elif op == "sin":
                t = cos(a) * ta
            elif op == "cos":
                t = -sin(a) * ta
            elif op == "tanh":
                t = (1.0 - me * me) * ta
            elif op == "sigmoid":
                t = me * (1.0 - me) * ta
            elif op == "abs":
                t = (step(a) - step(-a)) * ta
            elif op == "huber":
                d = self.consts[i]
                t = maximum(minimum(a, d), -d) * ta
            elif op == "min":
                w = step(b - a)
                t = _sum(None if ta is None else w * ta, None if tb is None else (1.0 - w) * tb)
            elif op == "max":
                w = step(a - b)
                t = _sum(None if ta is None else w * ta, None if tb is None else (1.0 - w) * tb)
            else:  # pragma: no cover
                raise UnsupportedPrimitiveError(op)
            tan[i] = t
        return tan[last] if tan[last] is not None else self.const(0.0)


def _sum(a: "Var | None", b: "Var | None") -> "Var | None":
    if a is None:
        return b
    if b is None:
        return a
    return a + b


class Var:
    """Handle to one node of a :class:`Graph`."""

    __slots__ = ("graph", "id")

    def __init__(self, graph: Graph, id: int) -> None:
        self.graph = graph
        self.id = id

    @property
    def value(self) -> float:
        return self.graph.values[self.id]

    def __repr__(self) -> str:
        return f"Var(id={self.id}, op={self.graph.ops[self.id]}, value={self.value!r})"

    def __add__(self, o):
        return self.graph.apply("add", self, o)

    def __radd__(self, o):
        return self.graph.apply("add", o, self)

    def __sub__(self, o):
        return self.graph.apply("sub", self, o)

    def __rsub__(self, o):
        return self.graph.apply("sub", o, self)

    def __mul__(self, o):
        return self.graph.apply("mul", self, o)

    def __rmul__(self, o):
        return self.graph.apply("mul", o, self)

    def __truediv__(self, o):
        return self.graph.apply("div", self, o)

    def __rtruediv__(self, o):
        return self.graph.apply("div", o, self)

    def __neg__(self):
        return self.graph.apply("neg", self)

    def __pow__(self, o):
        if isinstance(o, Var):
            return self.graph.apply("pow", self, o)
        return self.graph.apply("powc", self, param=float(o))

    def __rpow__(self, o):
        return self.graph.apply("pow", o, self)


def _unary(op: str) -> Callable[[Var], Var]:
    def f(x: Var) -> Var:
        return x.graph.apply(op, x)

    f.__name__ = op
    return f


exp = _unary("exp")
log = _unary("ln")
sin = _unary("sin")
cos = _unary("cos")
tanh = _unary("tanh")
sigmoid = _unary("sigmoid")
absolute = _unary("abs")
step = _unary("step")


def huber(r: Var, delta: float = 1.0) -> Var:
    return r.graph.apply("huber", r, param=float(delta))


def minimum(a: Var | float, b: Var | float) -> Var:
    g = a.graph if isinstance(a, Var) else b.graph
    return g.apply("min", a, b)


def maximum(a: Var | float, b: Var | float) -> Var:
    g = a.graph if isinstance(a, Var) else b.graph
    return g.apply("max", a, b)


def record(builder: Callable[..., Var], leaf_values: Sequence[float]) -> tuple[Graph, list[Var], Var]:
    """Run ``builder`` on fresh leaves and return ``(graph, leaves, output)``."""
    g = Graph()
    leaves = [g.leaf(v) for v in leaf_values]
    out = builder(*leaves)
    if not isinstance(out, Var):
        out = g.const(out)
    return g, leaves, out


def input_derivative(output: Var, wrt: Var, order: int = 1) -> Var:
    """Node for ``d^order output / d wrt^order`` (order 1 or 2).

    The returned node lives in the same graph, so ``Graph.grad`` over the
    parameters differentiates through it.
    """
    if order not in (1, 2):
        raise ValueError(f"derivative order {order} unsupported (only 1 and 2)")
    g = output.graph
    d = g.tangent_node(output, wrt)
    if order == 2:
        d = g.tangent_node(d, wrt)
    return d
