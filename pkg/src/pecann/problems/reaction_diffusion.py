"""Periodic Fisher-type reaction-diffusion, ``u_t - nu u_xx - rho u (1 - u) = 0``.

Posed on ``[0, 2 pi) x [0, 1]`` with a Gaussian initial bump.  There is no
closed form, so the exact field comes from a Strang-split spectral solver:
logistic half-steps in closed form around an exact Fourier diffusion step.

Constraint families for training:

    F = u_t - nu u_xx - rho u (1 - u)      (interior)
    B = u(0, t) - u(2 pi, t)               (periodic value)
    N = u_x(0, t) - u_x(2 pi, t)           (periodic slope)
    I = u(x, 0) - h(x)                     (initial condition)

There is no separate objective residual; the equation itself is a constraint.
"""
from __future__ import annotations

import csv
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..network import Jets, NetworkConfig
from ..sampling import CollocationSet, Region, sobol
from .base import ProblemSpec, Residuals, interior_points

__all__ = ["ReactionDiffusion", "ReferenceField", "reaction_diffusion_spec",
           "reference_reaction_diffusion", "gaussian_bump"]

TWO_PI = 2.0 * np.pi
NU = 6.0
RHO = 5.0
X0 = np.pi
WIDTH = np.pi / 4.0


def gaussian_bump(x, x0: float = X0, width: float = WIDTH):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-((x - x0) ** 2) / (2.0 * width**2))


def _lagrange(nodes: np.ndarray, t: np.ndarray):
    """Weights for value and first derivative of the interpolant through ``nodes``.

    ``nodes`` has shape ``(M, p)``, ``t`` shape ``(M,)``; both outputs ``(M, p)``.
    """
    M, p = nodes.shape
    w = np.ones((M, p))
    dw = np.zeros((M, p))
    for j in range(p):
        for m in range(p):
            if m == j:
                continue
            den = nodes[:, j] - nodes[:, m]
            # product rule: d/dt prod (t - x_m)/(x_j - x_m)
            dw[:, j] = dw[:, j] * (t - nodes[:, m]) / den + w[:, j] / den
            w[:, j] = w[:, j] * (t - nodes[:, m]) / den
    return w, dw


class ReferenceField:
    """Space-time field on a uniform periodic grid with spectral-in-x,
    polynomial-in-t evaluation.

    ``values[i, j]`` is the field at ``t[i]``, ``x[j]``; ``x`` excludes the
    right end ``2 pi``.
    """

    STENCIL = 5

    def __init__(self, x: np.ndarray, t: np.ndarray, values: np.ndarray, provenance: str = "splitting-oracle",
                 nu: float = NU, rho: float = RHO) -> None:
        self.x = np.asarray(x, dtype=np.float64)
        self.t = np.asarray(t, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.shape != (len(self.t), len(self.x)):
            raise ValueError(f"values have shape {self.values.shape}, expected ({len(self.t)}, {len(self.x)})")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("reference field contains non-finite values")
        if len(self.t) < self.STENCIL:
            raise ValueError(f"need at least {self.STENCIL} time levels")
        self.provenance = provenance
        self.nu = nu
        self.rho = rho

    @property
    def nx(self) -> int:
        return len(self.x)

    @property
    def nt(self) -> int:
        return len(self.t) - 1

    def frame(self, t: float) -> np.ndarray:
        """Stored level nearest to ``t``."""
        return self.values[int(np.argmin(np.abs(self.t - t)))]

    def _time_combine(self, tq: np.ndarray):
        p = self.STENCIL
        i = np.searchsorted(self.t, tq) - p // 2
        i = np.clip(i, 0, len(self.t) - p)
        idx = i[:, None] + np.arange(p)
        w, dw = _lagrange(self.t[idx], tq)
        frames = self.values[idx]  # (M, p, nx)
        return np.einsum("mp,mpx->mx", w, frames), np.einsum("mp,mpx->mx", dw, frames)

    def _space_eval(self, rows: np.ndarray, xq: np.ndarray, order: int) -> np.ndarray:
        """Trigonometric interpolant of each row of ``rows`` (or its x-derivative) at ``xq``."""
        n = self.nx
        c = np.fft.rfft(rows, axis=1) / n
        m = np.arange(c.shape[1])
        scale = np.full(c.shape[1], 2.0)
        scale[0] = 1.0
        if n % 2 == 0:
            scale[-1] = 1.0
        L = self.x[-1] + (self.x[1] - self.x[0]) - self.x[0]
        k = 2.0 * np.pi * m / L
        phase = np.exp(1j * np.outer(xq - self.x[0], k))
        coef = c * scale * (1j * k) ** order
        if order and n % 2 == 0:
            coef[:, -1] = 0.0  # Nyquist mode has no well-defined derivative
        return np.real(np.sum(coef * phase, axis=1))

    def evaluate(self, X: np.ndarray, first=(), second=()) -> Jets:
        """Field and derivatives at ``(x, t)`` rows; dim 0 is x, dim 1 is t."""
        X = np.asarray(X, dtype=np.float64).reshape(-1, 2)
        first, second = tuple(first), tuple(second)
        if 1 in second:
            raise ValueError("second time derivatives are not provided")
        u_rows, ut_rows = self._time_combine(X[:, 1])
        x = X[:, 0]
        cols = [self._space_eval(u_rows, x, 0)]
        for k in first:
            cols.append(self._space_eval(u_rows, x, 1) if k == 0 else self._space_eval(ut_rows, x, 0))
        for _ in second:
            cols.append(self._space_eval(u_rows, x, 2))
        return Jets(np.stack(cols)[:, :, None], first, second)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.evaluate(X).out(0)

    def to_csv(self, path, x_stride: int = 1, t_stride: int = 1) -> None:
        """Long-format CSV ``x, t, u``; strides thin the grid before export."""
        path = Path(path)
        xs = self.x[::x_stride]
        ts = self.t[::t_stride]
        vals = self.values[::t_stride, ::x_stride]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "t", "u"])
            for i, tv in enumerate(ts):
                for j, xv in enumerate(xs):
                    w.writerow([format(xv, ".17g"), format(tv, ".17g"), format(vals[i, j], ".17g")])

    @classmethod
    def from_csv(cls, path, provenance: str = "splitting-oracle") -> "ReferenceField":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"reference file not found: {path}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        xs = np.unique(data[:, 0])
        ts = np.unique(data[:, 1])
        if len(xs) * len(ts) != len(data):
            raise ValueError(f"{path}: rows do not form a full x-t grid")
        order = np.lexsort((data[:, 0], data[:, 1]))
        return cls(xs, ts, data[order, 2].reshape(len(ts), len(xs)), provenance)


def reference_reaction_diffusion(nx: int = 512, nt: int = 10000, nu: float = NU, rho: float = RHO,
                                 initial=gaussian_bump, t_end: float = 1.0) -> ReferenceField:
    """Strang splitting: half reaction, full diffusion, half reaction per step."""
    if nx < 256 or nx & (nx - 1):
        raise ValueError(f"nx must be a power of two >= 256, got {nx}")
    if nt < 1000:
        raise ValueError(f"nt must be >= 1000, got {nt}")
    x = np.arange(nx) * (TWO_PI / nx)
    t = np.linspace(0.0, t_end, nt + 1)
    dt = t_end / nt
    m = np.fft.rfftfreq(nx, d=1.0 / nx)
    decay = np.exp(-nu * m**2 * dt)
    g = np.exp(0.5 * rho * dt)

    def react(u):
        return u * g / (u * g + 1.0 - u)

    out = np.empty((nt + 1, nx))
    u = np.asarray(initial(x), dtype=np.float64)
    out[0] = u
    for i in range(1, nt + 1):
        u = react(u)
        u = np.fft.irfft(np.fft.rfft(u) * decay, n=nx)
        u = react(u)
        out[i] = u
    return ReferenceField(x, t, out, "splitting-oracle", nu, rho)


@lru_cache(maxsize=2)
def _default_reference(nx: int, nt: int) -> ReferenceField:
    return reference_reaction_diffusion(nx, nt)


class ReactionDiffusion(ProblemSpec):
    name = "reaction_diffusion"
    outputs = ("u",)
    family_regions = {"F": "interior", "B": "periodic_lo", "N": "periodic_lo", "I": "initial"}

    def __init__(self, nu: float = NU, rho: float = RHO, ref_nx: int = 512, ref_nt: int = 10000) -> None:
        self.nu = float(nu)
        self.rho = float(rho)
        self.bounds = np.array([[0.0, TWO_PI], [0.0, 1.0]])
        self.network = NetworkConfig(2, 1, 4, 50, "tanh")
        self.epochs = 500
        self.mu_max = 1e4
        self.counts = {"interior": 1024, "periodic": 128, "initial": 128}
        self.ref_nx = ref_nx
        self.ref_nt = ref_nt
        self._reference: ReferenceField | None = None

    def initial(self, x):
        return gaussian_bump(x)

    @property
    def reference(self) -> ReferenceField:
        if self._reference is None:
            if (self.nu, self.rho) == (NU, RHO):
                self._reference = _default_reference(self.ref_nx, self.ref_nt)
            else:
                self._reference = reference_reaction_diffusion(self.ref_nx, self.ref_nt, self.nu, self.rho)
        return self._reference

    def sample(self, seed=None) -> CollocationSet:
        n_b = self.counts["periodic"]
        n_i = self.counts["initial"]
        tb = sobol(n_b, 1, seed=seed)[:, 0]
        xi = TWO_PI * sobol(n_i, 1, seed=None if seed is None else seed + 1)[:, 0]
        lo = np.column_stack([np.zeros(n_b), tb])
        hi = np.column_stack([np.full(n_b, TWO_PI), tb])
        init = np.column_stack([xi, np.zeros(n_i)])
        return CollocationSet({
            "interior": Region(interior_points(self.bounds, self.counts["interior"], seed)),
            "periodic_lo": Region(lo),
            "periodic_hi": Region(hi),
            "initial": Region(init, self.initial(xi)),
        })

    def residuals(self, evaluate, points) -> Residuals:
        X = points["interior"].points
        j = evaluate(X, (0, 1), (0,))
        u = j.out(0)
        F = j.d(0, 1) - self.nu * j.dd(0, 0) - self.rho * u * (1.0 - u)
        lo = points["periodic_lo"].points
        hi = points["periodic_hi"].points
        n = len(lo)
        jb = evaluate(np.vstack([lo, hi]), (0,), ())
        ub = jb.out(0)
        uxb = jb.d(0, 0)
        B = ub[:n] - ub[n:]
        N = uxb[:n] - uxb[n:]
        ini = points["initial"]
        I = evaluate(ini.points, (), ()).out(0) - ini.targets  # noqa: E741
        return Residuals(F=F, B=B, N=N, I=I)

    def exact(self, X):
        return {"u": self.reference(X)}

    def exact_jets(self, X, first=(), second=()):
        return self.reference.evaluate(X, first, second)

    def eval_grid(self) -> np.ndarray:
        """256 x 101 grid, x varying fastest."""
        x = np.linspace(0.0, TWO_PI, 256, endpoint=False)
        t = np.linspace(0.0, 1.0, 101)
        T, Xg = np.meshgrid(t, x, indexing="ij")
        return np.column_stack([Xg.ravel(), T.ravel()])


def reaction_diffusion_spec() -> ReactionDiffusion:
    return ReactionDiffusion()
