"""One-dimensional Poisson problem in second-order form, u'' = f on (0, 1)."""
from __future__ import annotations

import numpy as np

from ..network import NetworkConfig
from ..sampling import CollocationSet, Region
from .base import ProblemSpec, Residuals, interior_points, stack_jets

__all__ = ["Poisson1D", "poisson1d_spec"]


class Poisson1D(ProblemSpec):
    """Manufactured solution ``u = sin(5 pi x)`` with homogeneous Dirichlet ends.

    No flux variable: the residual carries the second derivative directly,
    which is what the noise-amplification diagnostic needs.
    """

    name = "poisson1d"
    outputs = ("u",)
    family_regions = {"B": "dirichlet"}

    def __init__(self, wavenumber: float = 5.0, n_interior: int = 256) -> None:
        self.omega = wavenumber * np.pi
        self.bounds = np.array([[0.0, 1.0]])
        self.network = NetworkConfig(1, 1, 2, 20, "tanh")
        self.epochs = 1000
        self.mu_max = 1e4
        self.counts = {"interior": n_interior, "dirichlet": 2}

    def solution(self, x):
        return np.sin(self.omega * np.asarray(x, dtype=np.float64))

    def source(self, x):
        return -self.omega**2 * np.sin(self.omega * np.asarray(x, dtype=np.float64))

    def boundary(self, x):
        return self.solution(x)

    def sample(self, seed=None) -> CollocationSet:
        xb = self.bounds[:, [0, 1]].T
        return CollocationSet({
            "interior": Region(interior_points(self.bounds, self.counts["interior"], seed)),
            "dirichlet": Region(xb.copy(), self.boundary(xb[:, 0])),
        })

    def residuals(self, evaluate, points) -> Residuals:
        X = points["interior"].points
        j = evaluate(X, (0,), (0,))
        D = j.dd(0, 0) - self.source(X[:, 0])
        b = points["dirichlet"]
        B = evaluate(b.points, (), ()).out(0) - b.targets
        return Residuals(D=D, B=B)

    def exact(self, X):
        x = np.asarray(X, dtype=np.float64).reshape(len(X), -1)[:, 0]
        w = self.omega
        return {"u": np.sin(w * x), "u_x": w * np.cos(w * x), "u_xx": -w * w * np.sin(w * x)}

    def exact_jets(self, X, first=(), second=()):
        e = self.exact(X)
        cols = [[e["u"]]] + [[e["u_x"]] for _ in first] + [[e["u_xx"]] for _ in second]
        return stack_jets(cols, first, second)


def poisson1d_spec() -> Poisson1D:
    return Poisson1D()
