"""Relative condition number of a scalar map sampled on a grid."""
from __future__ import annotations

import warnings

import numpy as np

from .convection_diffusion import exact_derivative, exact_solution

__all__ = ["condition_number", "condition_number_norm", "convection_diffusion_condition"]


def condition_number(G, Gp, xs) -> np.ndarray:
    """Pointwise ``|G'(x)| |x| / |G(x)|``; samples with ``G(x) = 0`` are dropped."""
    xs = np.asarray(xs, dtype=np.float64)
    g = np.asarray(G(xs), dtype=np.float64)
    gp = np.asarray(Gp(xs), dtype=np.float64)
    zero = g == 0.0
    if np.any(zero):
        warnings.warn(f"G vanishes at {int(zero.sum())} sample(s); skipped", RuntimeWarning, stacklevel=2)
    keep = ~zero
    return np.abs(gp[keep]) * np.abs(xs[keep]) / np.abs(g[keep])


def condition_number_norm(G, Gp, xs) -> float:
    """Grid-vector form ``||G'(x)||_2 ||x||_2 / ||G(x)||_2``."""
    xs = np.asarray(xs, dtype=np.float64)
    g = np.asarray(G(xs), dtype=np.float64)
    if not np.any(g):
        raise ValueError("G vanishes on the whole grid")
    return float(np.linalg.norm(Gp(xs)) * np.linalg.norm(xs) / np.linalg.norm(g))


def convection_diffusion_condition(alpha: float, n: int = 100, v: float = 1.0) -> dict:
    """Both condition-number readings for the boundary-layer solution on ``linspace(0, 1, n)``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    xs = np.linspace(0.0, 1.0, n)

    def G(x):
        return exact_solution(x, alpha, v)

    def Gp(x):
        return exact_derivative(x, alpha, v)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        pointwise = condition_number(G, Gp, xs)
    return {"alpha": float(alpha), "kappa_norm": condition_number_norm(G, Gp, xs),
            "kappa_max_pointwise": float(pointwise.max())}
