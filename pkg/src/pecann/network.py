"""Fully connected networks over a flat parameter vector.

Layout of the flat vector: for each layer, the weight matrix of shape
``(fan_out, fan_in)`` in row-major order, followed by its bias.  Hidden
layers apply the activation; the output layer is affine.

Two forward paths share this layout:

* :func:`forward` records the network on a scalar :class:`~pecann.autodiff.Graph`
  so outputs are nodes differentiable in both inputs and parameters.
* :func:`forward_jets` pushes a stack of input-derivative "jets" through the
  layers in one pass (value, selected first derivatives, selected diagonal
  second derivatives).  With a :class:`~pecann.autodiff.Tensor` parameter
  list it records onto the batched tape; with plain arrays it is a fast
  NumPy evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import graph as G
from .autodiff.tape import Tensor

__all__ = [
    "NetworkConfig",
    "Jets",
    "init_xavier",
    "layer_shapes",
    "unflatten",
    "flatten",
    "forward",
    "forward_jets",
    "param_leaves",
    "predict",
]

ACTIVATIONS = ("tanh", "sigmoid")


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    output_dim: int
    hidden_layers: int
    hidden_width: int
    activation: str = "tanh"

    def __post_init__(self) -> None:
        for name in ("input_dim", "output_dim", "hidden_layers", "hidden_width"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")

    @property
    def dims(self) -> list[int]:
        return [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]

    @property
    def n_params(self) -> int:
        return sum(fo * fi + fo for fi, fo in layer_shapes(self))

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "hidden_layers": self.hidden_layers,
            "hidden_width": self.hidden_width,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(int(d["input_dim"]), int(d["output_dim"]), int(d["hidden_layers"]),
                   int(d["hidden_width"]), str(d["activation"]))


def layer_shapes(config: NetworkConfig) -> list[tuple[int, int]]:
    """``(fan_in, fan_out)`` for every layer."""
    d = config.dims
    return list(zip(d[:-1], d[1:]))


def init_xavier(config: NetworkConfig, seed: int) -> np.ndarray:
    """Uniform Glorot weights in ``±sqrt(6 / (fan_in + fan_out))``, zero biases."""
    rng = np.random.default_rng(seed)
    parts = []
    for fi, fo in layer_shapes(config):
        limit = np.sqrt(6.0 / (fi + fo))
        parts.append(rng.uniform(-limit, limit, size=fo * fi))
        parts.append(np.zeros(fo))
    return np.concatenate(parts)


def unflatten(config: NetworkConfig, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (config.n_params,):
        raise ValueError(f"parameter vector has shape {theta.shape}, expected ({config.n_params},)")
    layers = []
    k = 0
    for fi, fo in layer_shapes(config):
        W = theta[k:k + fo * fi].reshape(fo, fi)
        k += fo * fi
        b = theta[k:k + fo]
        k += fo
        layers.append((W, b))
    return layers


def flatten(layers: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    return np.concatenate([np.concatenate([np.ravel(W), np.ravel(b)]) for W, b in layers])


# -- scalar graph path ------------------------------------------------------

def forward(config: NetworkConfig, theta: Sequence, x: Sequence, graph: G.Graph | None = None):
    """Record the network on a scalar graph.

    ``theta`` and ``x`` may hold floats (new leaves are created, parameters
    first) or existing :class:`~pecann.autodiff.graph.Var` nodes.  Returns
    ``(graph, theta_vars, x_vars, outputs)``.
    """
    if len(x) != config.input_dim:
        raise ValueError(f"input has {len(x)} components, network expects {config.input_dim}")
    if len(theta) != config.n_params:
        raise ValueError(f"got {len(theta)} parameters, network has {config.n_params}")
    if graph is None:
        graph = next((v.graph for v in list(theta) + list(x) if isinstance(v, G.Var)), None) or G.Graph()
    th = [v if isinstance(v, G.Var) else graph.leaf(v) for v in theta]
    xs = [v if isinstance(v, G.Var) else graph.leaf(v) for v in x]
    act = G.tanh if config.activation == "tanh" else G.sigmoid
    h = xs
    k = 0
    shapes = layer_shapes(config)
    for li, (fi, fo) in enumerate(shapes):
        W = th[k:k + fo * fi]
        k += fo * fi
        b = th[k:k + fo]
        k += fo
        z = []
        for r in range(fo):
            acc = b[r]
            for c in range(fi):
                acc = acc + W[r * fi + c] * h[c]
            z.append(acc)
        h = z if li == len(shapes) - 1 else [act(zi) for zi in z]
    return graph, th, xs, h


# -- batched jet path -------------------------------------------------------

class Jets:
    """Stacked network outputs with their input derivatives.

    ``stack`` has shape ``(J, N, output_dim)``: slot 0 is the value, then one
    slot per entry of ``first`` and one per entry of ``second``.
    """

    def __init__(self, stack, first: Sequence[int], second: Sequence[int]) -> None:
        self.stack = stack
        self.first = tuple(first)
        self.second = tuple(second)

    def out(self, i: int):
        return self.stack[0, :, i]

    def d(self, i: int, k: int):
        return self.stack[1 + self.first.index(k), :, i]

    def dd(self, i: int, k: int):
        return self.stack[1 + len(self.first) + self.second.index(k), :, i]


def _act_derivs(name: str, z: np.ndarray):
    """Activation value and its first three derivatives."""
    if name == "tanh":
        s0 = np.tanh(z)
        s1 = 1.0 - s0 * s0
        s2 = -2.0 * s0 * s1
        s3 = s1 * (4.0 * s0 * s0 - 2.0 * s1)
    else:
        s0 = 0.5 * (1.0 + np.tanh(0.5 * z))
        s1 = s0 * (1.0 - s0)
        s2 = s1 * (1.0 - 2.0 * s0)
        s3 = s2 * (1.0 - 2.0 * s0) - 2.0 * s1 * s1
    return s0, s1, s2, s3


def _affine(H, W, b):
    """Jet-stacked ``H @ W.T`` with the bias added to the value slot only."""
    Hv = H.value if isinstance(H, Tensor) else H
    Wv = W.value if isinstance(W, Tensor) else W
    bv = b.value if isinstance(b, Tensor) else b
    Z = Hv @ Wv.T
    Z[0] += bv
    parents = tuple(p for p in (H, W, b) if isinstance(p, Tensor) and p.requires_grad)
    if not parents:
        return Z

    def bw(g):
        out = []
        if isinstance(H, Tensor) and H.requires_grad:
            out.append(g @ Wv)
        if isinstance(W, Tensor) and W.requires_grad:
            out.append(np.einsum("jno,jni->oi", g, Hv))
        if isinstance(b, Tensor) and b.requires_grad:
            out.append(g[0].sum(axis=0))
        return out

    return Tensor(Z, parents, bw, True)


def _activate(Z, name: str, n_first: int, second_slots: Sequence[int]):
    """Push a jet stack through an elementwise activation.

    ``second_slots[m]`` is the first-derivative slot (1-based) paired with the
    m-th second-derivative slot.
    """
    Zv = Z.value if isinstance(Z, Tensor) else Z
    s0, s1, s2, s3 = _act_derivs(name, Zv[0])
    A = np.empty_like(Zv)
    A[0] = s0
    A[1:1 + n_first] = s1 * Zv[1:1 + n_first]
    for m, k in enumerate(second_slots):
        j = 1 + n_first + m
        A[j] = s2 * Zv[k] ** 2 + s1 * Zv[j]
    if not (isinstance(Z, Tensor) and Z.requires_grad):
        return A

    def bw(g):
        dZ = np.empty_like(Zv)
        d0 = g[0] * s1
        dZ[1:1 + n_first] = g[1:1 + n_first] * s1
        if n_first:
            d0 += np.einsum("jno,jno->no", g[1:1 + n_first], Zv[1:1 + n_first]) * s2
        for m, k in enumerate(second_slots):
            j = 1 + n_first + m
            zk = Zv[k]
            dZ[j] = g[j] * s1
            dZ[k] += 2.0 * g[j] * s2 * zk
            d0 += g[j] * (s3 * zk * zk + s2 * Zv[j])
        dZ[0] = d0
        return (dZ,)

    return Tensor(A, (Z,), bw, True)


def param_leaves(config: NetworkConfig, theta: np.ndarray) -> list[tuple[Tensor, Tensor]]:
    """Trainable tape leaves for every layer's ``(W, b)``."""
    return [(Tensor(W.copy(), requires_grad=True), Tensor(b.copy(), requires_grad=True))
            for W, b in unflatten(config, theta)]


def forward_jets(config: NetworkConfig, layers, X: np.ndarray, first: Sequence[int] = (),
                 second: Sequence[int] = ()) -> Jets:
    """Evaluate outputs and input derivatives at the rows of ``X``.

    ``layers`` is either a flat parameter vector, a list of ``(W, b)``
    arrays, or the tape leaves from :func:`param_leaves`.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != config.input_dim:
        raise ValueError(f"input has {X.shape[1]} columns, network expects {config.input_dim}")
    first = tuple(first)
    second = tuple(second)
    if not set(second) <= set(first):
        raise ValueError("second-derivative dims must also be requested as first-derivative dims")
    if isinstance(layers, np.ndarray):
        layers = unflatten(config, layers)
    n = X.shape[0]
    H = np.zeros((1 + len(first) + len(second), n, config.input_dim))
    H[0] = X
    for m, k in enumerate(first):
        H[1 + m, :, k] = 1.0
    second_slots = [1 + first.index(k) for k in second]
    for li, (W, b) in enumerate(layers):
        H = _affine(H, W, b)
        if li < len(layers) - 1:
            H = _activate(H, config.activation, len(first), second_slots)
    return Jets(H, first, second)


def predict(config: NetworkConfig, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Plain NumPy forward pass, shape ``(N, output_dim)``."""
    return forward_jets(config, theta, X).stack[0]
