"""Convection-dominated convection-diffusion, ``v u_x + alpha u_xx = 0`` on (0, 1).

First-order system with ``sigma = -alpha u_x``:

    D = v u_x - sigma_x,    F = sigma + alpha u_x,    B = u - g  at x in {0, 1}

The exact solution ``exp(-v x / alpha) / (1 - exp(-v / alpha)) - 1/2`` has a
boundary layer of width ~alpha at x = 0.
"""
from __future__ import annotations

import numpy as np

from ..network import NetworkConfig
from ..sampling import CollocationSet, Region
from .base import ProblemSpec, Residuals, interior_points, stack_jets

__all__ = ["ConvectionDiffusion", "convection_diffusion_spec", "exact_solution", "exact_derivative"]


def _layer(x, alpha: float, v: float = 1.0):
    """``exp(-v x / alpha) / (1 - exp(-v / alpha))`` without overflow."""
    x = np.asarray(x, dtype=np.float64)
    # -expm1(-r) -> 1 for large r; exp of a large negative underflows to 0 cleanly
    return np.exp(-v * x / alpha) / (-np.expm1(-v / alpha))


def exact_solution(x, alpha: float, v: float = 1.0):
    return _layer(x, alpha, v) - 0.5


def exact_derivative(x, alpha: float, v: float = 1.0):
    return -(v / alpha) * _layer(x, alpha, v)


class ConvectionDiffusion(ProblemSpec):
    name = "convection_diffusion"
    outputs = ("u", "sigma")
    family_regions = {"F": "interior", "B": "dirichlet"}

    def __init__(self, alpha: float = 1e-4, v: float = 1.0, n_interior: int = 2048) -> None:
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.alpha = float(alpha)
        self.v = float(v)
        self.bounds = np.array([[0.0, 1.0]])
        self.network = NetworkConfig(1, 2, 4, 20, "tanh")
        self.epochs = 2000
        self.mu_max = 1e4
        self.counts = {"interior": n_interior, "dirichlet": 2}

    def solution(self, x):
        return exact_solution(x, self.alpha, self.v)

    def flux(self, x):
        return -self.alpha * exact_derivative(x, self.alpha, self.v)

    def sample(self, seed=None) -> CollocationSet:
        xb = np.array([[0.0], [1.0]])
        return CollocationSet({
            "interior": Region(interior_points(self.bounds, self.counts["interior"], seed)),
            "dirichlet": Region(xb, self.solution(xb[:, 0])),
        })

    def residuals(self, evaluate, points) -> Residuals:
        X = points["interior"].points
        j = evaluate(X, (0,), ())
        u_x = j.d(0, 0)
        D = self.v * u_x - j.d(1, 0)
        F = j.out(1) + self.alpha * u_x
        b = points["dirichlet"]
        B = evaluate(b.points, (), ()).out(0) - b.targets
        return Residuals(D=D, F=F, B=B)

    def exact(self, X):
        x = np.asarray(X, dtype=np.float64).reshape(len(X), -1)[:, 0]
        return {"u": self.solution(x), "sigma": self.flux(x)}

    def exact_jets(self, X, first=(), second=()):
        x = np.asarray(X, dtype=np.float64).reshape(len(X), -1)[:, 0]
        a, v = self.alpha, self.v
        u_x = exact_derivative(x, a, v)
        u_xx = -(v / a) * u_x
        cols = [[self.solution(x), -a * u_x]]
        cols += [[u_x, -a * u_xx] for _ in first]
        cols += [[u_xx, (v / a) * a * u_xx] for _ in second]
        return stack_jets(cols, first, second)


def convection_diffusion_spec(alpha: float = 1e-4) -> ConvectionDiffusion:
    return ConvectionDiffusion(alpha)
