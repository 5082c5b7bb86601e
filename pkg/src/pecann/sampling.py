"""Sobol points and collocation sets.

The generator is the classic Gray-code construction with the Joe–Kuo
direction numbers for the first eight dimensions.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["sobol", "sample_problem", "CollocationSet", "Region", "write_csv", "read_csv", "MAX_DIM", "BITS"]

BITS = 32
MAX_DIM = 8

# (degree s, coefficient a, initial m_1..m_s) for dimensions 2..8
_JOE_KUO = [
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
]


def _direction_numbers(dim: int) -> np.ndarray:
    V = np.zeros((dim, BITS), dtype=np.uint64)
    V[0] = [1 << (BITS - 1 - i) for i in range(BITS)]
    for j in range(1, dim):
        s, a, m = _JOE_KUO[j - 1]
        mm = list(m)
        for i in range(s, BITS):
            new = mm[i - s] ^ (mm[i - s] << s)
            for k in range(1, s):
                if (a >> (s - 1 - k)) & 1:
                    new ^= mm[i - k] << k
            mm.append(new)
        V[j] = [mm[i] << (BITS - 1 - i) for i in range(BITS)]
    return V


def sobol(n: int, dim: int, skip: int = 1, seed: int | None = None) -> np.ndarray:
    """First ``n`` points after skipping ``skip``, shape ``(n, dim)`` in ``[0, 1)``.

    The default ``skip=1`` drops the all-zeros point.  An integer ``seed``
    applies a random digital shift (XOR of every coordinate with a fixed
    random word), which keeps the net structure.
    """
    if dim < 1 or dim > MAX_DIM:
        raise ValueError(f"sobol supports 1 <= dim <= {MAX_DIM}, got {dim}")
    if n < 0 or skip < 0:
        raise ValueError("n and skip must be non-negative")
    total = n + skip
    if total >= 1 << BITS:
        raise ValueError("too many points requested")
    V = _direction_numbers(dim)
    out = np.empty((total, dim), dtype=np.uint64)
    x = np.zeros(dim, dtype=np.uint64)
    for k in range(total):
        out[k] = x
        # index of the lowest zero bit of k
        c = (~k & (k + 1)).bit_length() - 1
        x = x ^ V[:, c]
    out = out[skip:]
    if seed is not None:
        shift = np.random.default_rng(seed).integers(0, 1 << BITS, size=dim, dtype=np.uint64)
        out = out ^ shift
    return out.astype(np.float64) / float(1 << BITS)


@dataclass
class Region:
    """Points of one constraint family with their target values.

    ``normals`` is only set for Neumann points.
    """

    points: np.ndarray
    targets: np.ndarray | None = None
    normals: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class CollocationSet:
    """Fixed training points, keyed by region tag.

    Standard tags are ``interior``, ``dirichlet``, ``neumann`` and
    ``initial``; periodic problems add ``periodic_lo``/``periodic_hi`` whose
    rows are matched pairwise.
    """

    regions: dict[str, Region] = field(default_factory=dict)

    def __getitem__(self, tag: str) -> Region:
        return self.regions[tag]

    def __contains__(self, tag: str) -> bool:
        return tag in self.regions

    def counts(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.regions.items()}


def sample_problem(spec, seed: int | None = None) -> CollocationSet:
    """Collocation set for a problem; identical inputs give identical points."""
    return spec.sample(seed)


def write_csv(cs: CollocationSet, path: str | Path) -> None:
    """One row per point: ``region, x0..x{d-1}, target, n0..n{d-1}``."""
    path = Path(path)
    dim = max(v.points.shape[1] for v in cs.regions.values())
    header = ["region"] + [f"x{i}" for i in range(dim)] + ["target"] + [f"n{i}" for i in range(dim)]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for tag, reg in cs.regions.items():
            for i, p in enumerate(reg.points):
                t = "" if reg.targets is None else repr(float(reg.targets[i]))
                nrm = [""] * dim if reg.normals is None else [repr(float(v)) for v in reg.normals[i]]
                w.writerow([tag] + [repr(float(v)) for v in p] + [t] + nrm)


def read_csv(path: str | Path) -> CollocationSet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"collocation file not found: {path}")
    rows: dict[str, list[list[str]]] = {}
    with path.open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        dim = sum(1 for h in header if h.startswith("x"))
        for row in r:
            rows.setdefault(row[0], []).append(row[1:])
    cs = CollocationSet()
    for tag, rr in rows.items():
        pts = np.array([[float(v) for v in row[:dim]] for row in rr])
        tg = None if rr[0][dim] == "" else np.array([float(row[dim]) for row in rr])
        nm = None if rr[0][dim + 1] == "" else np.array([[float(v) for v in row[dim + 1:]] for row in rr])
        cs.regions[tag] = Region(pts, tg, nm)
    return cs
