"""Augmented Lagrangian objective and the primal-dual training loop.

For residual ``D`` and constraint families ``F, B, N, I`` with pointwise
multipliers ``lambda`` and penalty ``mu``:

    L = sum D^2
        + sum lambda_F phi(F) + 1/2 sum phi(F)^2
        + sum_{c in B, N, I} [ sum lambda_c phi(c) + mu/2 sum phi(c)^2 ]

where ``phi`` is the Huber distance.  Each epoch takes one L-BFGS step on
``L``, doubles ``mu`` up to ``mu_max``, then raises the multipliers:
``lambda_F += phi(F)`` and ``lambda_c += mu phi(c)`` for the others.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .autodiff.tape import Tensor, backward
from .autodiff.tape import huber as _huber
from .metrics import RunRecord, error_metrics
from .network import flatten, forward_jets, init_xavier, param_leaves, predict
from .optim import LbfgsOptions, LbfgsState, lbfgs_step
from .problems.base import FAMILIES, ProblemSpec

__all__ = ["MultiplierSet", "HuberConfig", "TrainConfig", "ObjectiveResult", "NonFiniteResidualError",
           "huber", "objective", "update_multipliers", "update_penalty", "train", "predict_fields",
           "default_config"]

log = logging.getLogger(__name__)


class NonFiniteResidualError(FloatingPointError):
    """A residual or constraint evaluated to inf/nan at a collocation point."""

    def __init__(self, family: str, index: int, point: np.ndarray) -> None:
        self.family = family
        self.index = index
        self.point = np.asarray(point)
        super().__init__(f"non-finite {family} residual at point {index}: {self.point.tolist()}")


@dataclass(frozen=True)
class HuberConfig:
    delta: float = 1.0

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ValueError(f"Huber delta must be positive, got {self.delta}")


def huber(r, cfg: HuberConfig | float = HuberConfig()):
    """Huber distance of a scalar or array."""
    delta = cfg.delta if isinstance(cfg, HuberConfig) else float(cfg)
    if not delta > 0:
        raise ValueError(f"Huber delta must be positive, got {delta}")
    out = _huber(np.asarray(r, dtype=np.float64), delta)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class MultiplierSet:
    """Pointwise multipliers per constraint family plus the penalty ``mu``."""

    lambdas: dict[str, np.ndarray] = field(default_factory=dict)
    mu: float = 1.0
    mu_max: float = 1e4

    @classmethod
    def zeros(cls, sizes: dict[str, int], mu_max: float = 1e4, mu: float = 1.0) -> "MultiplierSet":
        return cls({f: np.zeros(n) for f, n in sizes.items() if f in FAMILIES}, float(mu), float(mu_max))

    def __getattr__(self, name: str):
        if name.startswith("lambda_") and name[7:] in FAMILIES:
            return self.lambdas.get(name[7:], np.zeros(0))
        raise AttributeError(name)

    def copy(self) -> "MultiplierSet":
        return MultiplierSet({k: v.copy() for k, v in self.lambdas.items()}, self.mu, self.mu_max)

    def max_per_family(self) -> dict[str, float]:
        return {f: float(v.max()) if v.size else 0.0 for f, v in self.lambdas.items()}


def update_penalty(m: MultiplierSet) -> MultiplierSet:
    """``mu <- min(2 mu, mu_max)``."""
    if m.mu < 1.0:
        raise ValueError(f"penalty must be >= 1 before doubling, got {m.mu}")
    out = m.copy()
    out.mu = min(2.0 * m.mu, m.mu_max)
    return out


def update_multipliers(m: MultiplierSet, phis: dict[str, np.ndarray]) -> MultiplierSet:
    """Dual ascent on every family present in ``phis``; flux multipliers skip the ``mu`` factor."""
    out = m.copy()
    for fam, phi in phis.items():
        if fam not in FAMILIES:
            continue
        phi = np.asarray(phi, dtype=np.float64)
        if np.any(phi < 0) or not np.all(np.isfinite(phi)):
            raise ValueError(f"distance values for family {fam} must be finite and non-negative")
        lam = out.lambdas.get(fam)
        if lam is None:
            lam = np.zeros_like(phi)
        if lam.shape != phi.shape:
            raise ValueError(f"family {fam}: {phi.size} distances for {lam.size} multipliers")
        out.lambdas[fam] = lam + (phi if fam == "F" else out.mu * phi)
    return out


@dataclass
class ObjectiveResult:
    loss: float
    grad: np.ndarray
    components: dict[str, float]
    phis: dict[str, np.ndarray]


def _region_of(spec: ProblemSpec, family: str) -> str:
    return "interior" if family == "D" else spec.family_regions[family]


def objective(theta: np.ndarray, multipliers: MultiplierSet, spec: ProblemSpec, points,
              delta: float = 1.0, with_grad: bool = True) -> ObjectiveResult:
    """Augmented Lagrangian value, its gradient in ``theta`` and its pieces."""
    config = spec.network
    layers = param_leaves(config, theta) if with_grad else None

    def evaluate(X, first=(), second=()):
        return forward_jets(config, layers if with_grad else theta, X, first, second)

    res = spec.residuals(evaluate, points)
    total = None
    components: dict[str, float] = {}
    phis: dict[str, np.ndarray] = {}
    for fam, r in res.items():
        rv = r.value if isinstance(r, Tensor) else np.asarray(r)
        bad = np.flatnonzero(~np.isfinite(rv))
        if bad.size:
            i = int(bad[0])
            raise NonFiniteResidualError(fam, i, points[_region_of(spec, fam)].points[i])
        if fam == "D":
            term = (r * r).sum() if isinstance(r, Tensor) else np.sum(rv * rv)
        else:
            phi = _huber(r, delta)
            phis[fam] = (phi.value if isinstance(phi, Tensor) else phi).copy()
            lam = multipliers.lambdas.get(fam)
            if lam is None:
                lam = np.zeros(rv.shape)
            weight = 0.5 if fam == "F" else 0.5 * multipliers.mu
            term = (phi * lam).sum() + (phi * phi).sum() * weight
        components[fam] = float(term.value if isinstance(term, Tensor) else term)
        total = term if total is None else total + term
    if total is None:
        raise ValueError(f"problem {spec.name} produced no residuals")
    loss = float(total.value if isinstance(total, Tensor) else total)
    if with_grad and isinstance(total, Tensor):
        wrt = [t for pair in layers for t in pair]
        grad = flatten([(gw, gb) for gw, gb in zip(*[iter(backward(total, wrt))] * 2)])
    else:
        grad = np.zeros(config.n_params) if with_grad else np.zeros(0)
    return ObjectiveResult(loss, grad, components, phis)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    seed: int = 0
    mu_max: float = 1e4
    huber_delta: float = 1.0
    sample_seed: int | None = None
    metrics_every: int = 1
    lbfgs: LbfgsOptions = field(default_factory=LbfgsOptions)

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "seed": self.seed, "mu_max": self.mu_max,
                "huber_delta": self.huber_delta, "sample_seed": self.sample_seed,
                "metrics_every": self.metrics_every, "history_size": self.lbfgs.history_size,
                "max_iter": self.lbfgs.max_iter}


def default_config(spec: ProblemSpec, **overrides) -> TrainConfig:
    cfg = TrainConfig(epochs=spec.epochs, mu_max=spec.mu_max)
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


def predict_fields(spec: ProblemSpec, theta: np.ndarray, X: np.ndarray) -> dict[str, np.ndarray]:
    out = predict(spec.network, theta, X)
    return {name: out[:, i] for i, name in enumerate(spec.outputs)}


EpochHook = Callable[[dict], None]


def train(spec: ProblemSpec, config: TrainConfig | None = None,
          hooks: EpochHook | list[EpochHook] | None = None, theta0: np.ndarray | None = None) -> RunRecord:
    """Primal-dual training; see the module docstring for the epoch structure.

    Each hook receives a dict snapshot after every epoch.  Errors raised by
    the objective stop training and return a record flagged ``failed``.
    """
    config = config or default_config(spec)
    if config.epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {config.epochs}")
    hooks = [] if hooks is None else ([hooks] if callable(hooks) else list(hooks))
    points = spec.sample(config.sample_seed)
    theta = init_xavier(spec.network, config.seed) if theta0 is None else np.array(theta0, dtype=np.float64)
    mult = MultiplierSet.zeros(spec.family_sizes(points), config.mu_max)
    state = LbfgsState(capacity=config.lbfgs.history_size)
    grid = spec.eval_grid()
    exact = spec.exact(grid)

    record = RunRecord(problem=spec.name, seed=config.seed, config=config.to_dict(), network=spec.network,
                       theta=theta.copy(), started=time.strftime("%Y-%m-%dT%H:%M:%S"))
    # evaluations at the current multipliers, keyed by parameter bytes
    cache: dict[bytes, ObjectiveResult] = {}

    def closure(x):
        r = objective(x, mult, spec, points, config.huber_delta)
        if len(cache) > 64:
            cache.clear()
        cache[x.tobytes()] = r
        return r.loss, r.grad

    metrics: dict[str, float] = {}
    for epoch in range(1, config.epochs + 1):
        mu_used = mult.mu
        cache.clear()
        try:
            theta, _ = lbfgs_step(closure, theta, state, config.lbfgs)
            at = cache.get(theta.tobytes()) or objective(theta, mult, spec, points, config.huber_delta)
        except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
            record.failed = True
            record.failure = f"epoch {epoch}: {exc}"
            log.error("training stopped: %s", record.failure)
            break
        if not math.isfinite(at.loss):
            record.failed = True
            record.failure = f"epoch {epoch}: non-finite loss"
            break
        mult = update_multipliers(update_penalty(mult), at.phis)
        if epoch % config.metrics_every == 0 or epoch == config.epochs:
            metrics = error_metrics(predict_fields(spec, theta, grid), exact)
        row = {"epoch": epoch, "loss": at.loss}
        for fam in ("D",) + FAMILIES:
            row[f"loss_{fam}"] = at.components.get(fam, 0.0)
        row["mu"] = mu_used
        for fam, v in mult.max_per_family().items():
            row[f"max_lambda_{fam}"] = v
        for name in spec.outputs:
            for key in ("rel_l2", "linf", "mae", "mse"):
                row[f"{key}_{name}"] = metrics.get(f"{key}_{name}", math.nan)
        record.history.append(row)
        for h in hooks:
            h(dict(row))

    record.theta = theta.copy()
    record.multipliers = {k: v.copy() for k, v in mult.lambdas.items()}
    record.mu = mult.mu
    if record.history:
        record.metrics = {k: v for k, v in record.history[-1].items()
                          if k.split("_")[0] in ("rel", "linf", "mae", "mse")}
    pred = predict_fields(spec, theta, grid)
    sol = {f"x{i}": grid[:, i] for i in range(grid.shape[1])}
    for name in spec.outputs:
        sol[f"{name}_pred"] = pred[name]
        if name in exact:
            sol[f"{name}_exact"] = exact[name]
    record.solution = sol
    record.finished = time.strftime("%Y-%m-%dT%H:%M:%S")
    return record
