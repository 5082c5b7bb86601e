"""Shared pieces of every problem definition."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..network import Jets, NetworkConfig
from ..sampling import CollocationSet, sobol

__all__ = ["Residuals", "ProblemSpec", "Evaluator", "interior_points", "FAMILIES"]

# constraint families, in the order multipliers are stored
FAMILIES = ("F", "B", "N", "I")

Evaluator = Callable[[np.ndarray, Sequence[int], Sequence[int]], Jets]


@dataclass
class Residuals:
    """Pointwise residual arrays (ndarray or tape Tensor); ``None`` if absent.

    ``D`` is the objective residual; ``F``, ``B``, ``N``, ``I`` are the
    constraint families (flux or PDE, Dirichlet/periodic value, Neumann or
    periodic derivative, initial condition).
    """

    D: object = None
    F: object = None
    B: object = None
    N: object = None
    I: object = None  # noqa: E741

    def items(self):
        for name in ("D",) + FAMILIES:
            v = getattr(self, name)
            if v is not None:
                yield name, v


class ProblemSpec:
    """Base class for a PDE posed on a box with a network preset.

    Subclasses set the class attributes and implement :meth:`sample`,
    :meth:`residuals`, :meth:`exact` and :meth:`exact_jets`.
    """

    name: str = ""
    bounds: np.ndarray
    network: NetworkConfig
    epochs: int = 1000
    mu_max: float = 1e4
    counts: dict
    outputs: tuple[str, ...] = ("u",)
    # which region carries each constraint family's points (for multiplier sizes)
    family_regions: dict

    def sample(self, seed: int | None = None) -> CollocationSet:
        raise NotImplementedError

    def residuals(self, evaluate: Evaluator, points: CollocationSet) -> Residuals:
        raise NotImplementedError

    def exact(self, X: np.ndarray) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def exact_jets(self, X: np.ndarray, first: Sequence[int] = (), second: Sequence[int] = ()) -> Jets:
        raise NotImplementedError

    def eval_grid(self) -> np.ndarray:
        """Points where final metrics are measured."""
        lo, hi = self.bounds[0]
        return np.linspace(lo, hi, 1000)[:, None]

    def family_sizes(self, points: CollocationSet) -> dict[str, int]:
        return {f: (len(points[r]) if r in points else 0) for f, r in self.family_regions.items()}

    def describe(self) -> dict:
        return {"name": self.name, "network": self.network.to_dict(), "epochs": self.epochs,
                "mu_max": self.mu_max, "counts": dict(self.counts)}


def interior_points(bounds: np.ndarray, n: int, seed: int | None = None) -> np.ndarray:
    """Sobol points mapped into the open box."""
    bounds = np.asarray(bounds, dtype=np.float64)
    u = sobol(n, bounds.shape[0], seed=seed)
    return bounds[:, 0] + u * (bounds[:, 1] - bounds[:, 0])


def stack_jets(columns: list[list[np.ndarray]], first: Sequence[int], second: Sequence[int]) -> Jets:
    """Build a NumPy :class:`Jets` from ``columns[slot][output]`` arrays."""
    arr = np.stack([np.stack(c, axis=-1) for c in columns])
    return Jets(arr, first, second)
