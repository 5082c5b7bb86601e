"""Steady heat conduction through a two-material rod, as a first-order system.

With flux ``sigma = -a u_x`` the equation ``-(a u_x)_x = f`` becomes

    D = sigma_x - f        (objective residual)
    F = sigma + a u_x      (pointwise flux constraint)
    B = u                  (Dirichlet, u(0) = u(1) = 0)

``a = 1`` on (0, 1/2) and ``a = k`` on (1/2, 1).  The source is derived from
the exact temperature profile so the two stay consistent; on the right half
that gives ``4k(k+1)``.
"""
from __future__ import annotations

import numpy as np

from ..network import NetworkConfig
from ..sampling import CollocationSet, Region
from .base import ProblemSpec, Residuals, interior_points, stack_jets

__all__ = ["CompositeHeat", "composite_heat_spec"]

INTERFACE = 0.5


class CompositeHeat(ProblemSpec):
    name = "composite_heat"
    outputs = ("u", "sigma")
    family_regions = {"F": "interior", "B": "dirichlet"}

    def __init__(self, k: float = 2.0, n_interior: int = 500) -> None:
        if not k > 0:
            raise ValueError(f"conductivity ratio k must be positive, got {k}")
        self.k = float(k)
        self.bounds = np.array([[0.0, 1.0]])
        self.network = NetworkConfig(1, 2, 1, 32, "sigmoid")
        self.epochs = 20000
        self.mu_max = 1e4
        self.counts = {"interior": n_interior, "dirichlet": 2}

    # points at exactly x = 1/2 take the right-hand material
    def conductivity(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.where(x < INTERFACE, 1.0, self.k)

    def source(self, x):
        x = np.asarray(x, dtype=np.float64)
        k = self.k
        return np.where(x < INTERFACE, 8.0 * k * (3.0 * x - 1.0), 4.0 * k * (k + 1.0))

    def solution(self, x):
        x = np.asarray(x, dtype=np.float64)
        k = self.k
        return np.where(x < INTERFACE, 4.0 * k * x**2 * (1.0 - x), (2.0 * (k + 1.0) * x - 1.0) * (1.0 - x))

    def solution_dx(self, x):
        x = np.asarray(x, dtype=np.float64)
        k = self.k
        left = 4.0 * k * (2.0 * x - 3.0 * x**2)
        right = 2.0 * (k + 1.0) * (1.0 - 2.0 * x) + 1.0
        return np.where(x < INTERFACE, left, right)

    def flux(self, x):
        return -self.conductivity(x) * self.solution_dx(x)

    def sample(self, seed=None) -> CollocationSet:
        xb = np.array([[0.0], [1.0]])
        return CollocationSet({
            "interior": Region(interior_points(self.bounds, self.counts["interior"], seed)),
            "dirichlet": Region(xb, np.zeros(2)),
        })

    def residuals(self, evaluate, points) -> Residuals:
        X = points["interior"].points
        x = X[:, 0]
        j = evaluate(X, (0,), ())
        D = j.d(1, 0) - self.source(x)
        F = j.out(1) + self.conductivity(x) * j.d(0, 0)
        b = points["dirichlet"]
        B = evaluate(b.points, (), ()).out(0) - b.targets
        return Residuals(D=D, F=F, B=B)

    def exact(self, X):
        x = np.asarray(X, dtype=np.float64).reshape(len(X), -1)[:, 0]
        return {"u": self.solution(x), "sigma": self.flux(x)}

    def exact_jets(self, X, first=(), second=()):
        if second:
            raise ValueError("the exact temperature is only piecewise smooth; no second derivatives")
        x = np.asarray(X, dtype=np.float64).reshape(len(X), -1)[:, 0]
        cols = [[self.solution(x), self.flux(x)]]
        for _ in first:
            # d(sigma)/dx = f on each side of the interface
            cols.append([self.solution_dx(x), self.source(x)])
        return stack_jets(cols, first, second)


def composite_heat_spec(k: float = 2.0) -> CompositeHeat:
    return CompositeHeat(k)
