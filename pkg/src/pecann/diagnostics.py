"""Noise amplification through differential operators.

Perturb trained parameters along filter-normalized random directions and
compare ``u``, ``u_x``, ``u_xx`` and the objective gradient before and after.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alm import MultiplierSet, objective
from .network import NetworkConfig, forward_jets, layer_shapes

__all__ = ["perturbation_directions", "perturb", "neuron_blocks", "amplification_report",
           "PerturbationReport", "histogram", "write_histogram_csv"]


def neuron_blocks(config: NetworkConfig) -> list[np.ndarray]:
    """Flat indices of each neuron's incoming weights plus its bias."""
    blocks = []
    k = 0
    for fi, fo in layer_shapes(config):
        for r in range(fo):
            w = k + r * fi + np.arange(fi)
            blocks.append(np.append(w, k + fo * fi + r))
        k += fo * fi + fo
    return blocks


def perturbation_directions(theta: np.ndarray, config: NetworkConfig, seed: int,
                            count: int = 2) -> list[np.ndarray]:
    """Gaussian directions rescaled so every neuron block matches the norm of ``theta``'s block.

    A block where ``theta`` is all zero keeps its raw Gaussian draw.
    """
    theta = np.asarray(theta, dtype=np.float64)
    rng = np.random.default_rng(seed)
    blocks = neuron_blocks(config)
    out = []
    for _ in range(count):
        d = rng.standard_normal(theta.size)
        for idx in blocks:
            tn = np.linalg.norm(theta[idx])
            dn = np.linalg.norm(d[idx])
            if tn > 0 and dn > 0:
                d[idx] *= tn / dn
        out.append(d)
    return out


def perturb(theta: np.ndarray, config: NetworkConfig, scale: float = 0.05, seed: int = 0) -> np.ndarray:
    """``theta + scale * (d1 + d2)`` with two filter-normalized directions."""
    if scale < 0:
        raise ValueError(f"scale must be non-negative, got {scale}")
    theta = np.asarray(theta, dtype=np.float64)
    if scale == 0:
        return theta.copy()
    d1, d2 = perturbation_directions(theta, config, seed)
    return theta + scale * (d1 + d2)


@dataclass
class PerturbationReport:
    grid: np.ndarray
    delta_u: np.ndarray
    delta_ux: np.ndarray
    delta_uxx: np.ndarray
    grad_clean: np.ndarray
    grad_perturbed: np.ndarray
    summary: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "delta_u", "delta_ux", "delta_uxx"])
            for row in zip(self.grid, self.delta_u, self.delta_ux, self.delta_uxx):
                w.writerow([format(float(v), ".17g") for v in row])

    def gradients_to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "grad_clean", "grad_perturbed"])
            for i, (a, b) in enumerate(zip(self.grad_clean, self.grad_perturbed)):
                w.writerow([i, format(float(a), ".17g"), format(float(b), ".17g")])

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary, indent=2))


def amplification_report(spec, theta: np.ndarray, theta_tilde: np.ndarray, grid: np.ndarray | None = None,
                         multipliers: MultiplierSet | None = None, points=None,
                         huber_delta: float = 1.0) -> PerturbationReport:
    """Pointwise output and derivative deltas on ``grid`` plus objective gradients at both states."""
    theta = np.asarray(theta, dtype=np.float64)
    theta_tilde = np.asarray(theta_tilde, dtype=np.float64)
    if theta.shape != theta_tilde.shape:
        raise ValueError("clean and perturbed parameter vectors differ in length")
    if grid is None:
        lo, hi = spec.bounds[0]
        grid = np.linspace(lo, hi, 1000)
    grid = np.asarray(grid, dtype=np.float64).ravel()
    X = grid[:, None]
    a = forward_jets(spec.network, theta, X, (0,), (0,))
    b = forward_jets(spec.network, theta_tilde, X, (0,), (0,))
    du = np.abs(a.out(0) - b.out(0))
    dux = np.abs(a.d(0, 0) - b.d(0, 0))
    duxx = np.abs(a.dd(0, 0) - b.dd(0, 0))
    points = spec.sample() if points is None else points
    if multipliers is None:
        multipliers = MultiplierSet.zeros(spec.family_sizes(points))
    g0 = objective(theta, multipliers, spec, points, huber_delta).grad
    g1 = objective(theta_tilde, multipliers, spec, points, huber_delta).grad
    means = [float(np.mean(v)) for v in (du, dux, duxx)]
    maxes = [float(np.max(v)) for v in (du, dux, duxx)]
    vacuous = maxes[2] == 0.0
    if vacuous:
        warnings.warn("parameters unchanged; amplification check is vacuous", RuntimeWarning, stacklevel=2)
    monotone = vacuous or (means[0] < means[1] < means[2])
    gi0, gi1 = float(np.max(np.abs(g0))), float(np.max(np.abs(g1)))

    def ratio(p, q):
        return p / q if q > 0 else float("inf") if p > 0 else float("nan")

    summary = {
        "mean_delta_u": means[0], "mean_delta_ux": means[1], "mean_delta_uxx": means[2],
        "max_delta_u": maxes[0], "max_delta_ux": maxes[1], "max_delta_uxx": maxes[2],
        "max_ratio_ux_u": ratio(maxes[1], maxes[0]), "max_ratio_uxx_ux": ratio(maxes[2], maxes[1]),
        "mean_ratio_ux_u": ratio(means[1], means[0]), "mean_ratio_uxx_ux": ratio(means[2], means[1]),
        "grad_inf_clean": gi0, "grad_inf_perturbed": gi1, "grad_ratio": ratio(gi1, gi0),
        "monotone_amplification": bool(monotone), "vacuous": bool(vacuous),
        "gradient_increased": bool(gi1 > gi0),
    }
    return PerturbationReport(grid, du, dux, duxx, g0, g1, summary)


def histogram(values, bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width bins over ``[min, max]``; counts sum to the number of values."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("histogram of an empty array")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    counts, edges = np.histogram(values, bins=bins, range=(values.min(), values.max()))
    return edges, counts


def write_histogram_csv(path, edges: np.ndarray, counts: np.ndarray) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["left", "right", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([format(float(lo), ".17g"), format(float(hi), ".17g"), int(c)])
