"""Limited-memory BFGS with a strong Wolfe line search.

The closure maps a parameter vector to ``(loss, grad)``.  One call to
:func:`lbfgs_step` runs up to ``max_iter`` quasi-Newton iterations and is
what the trainer counts as one epoch.  Curvature history lives in
:class:`LbfgsState` and persists between calls.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "LbfgsOptions",
    "LbfgsState",
    "WolfeParams",
    "LineSearchResult",
    "two_loop_direction",
    "strong_wolfe_search",
    "lbfgs_step",
    "cubic_interpolate",
]

log = logging.getLogger(__name__)

CURVATURE_EPS = 1e-8

Closure = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class WolfeParams:
    c1: float = 1e-4
    c2: float = 0.9
    max_line_evals: int = 25
    tolerance_change: float = 1e-9

    def __post_init__(self) -> None:
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ValueError(f"need 0 < c1 < c2 < 1, got c1={self.c1}, c2={self.c2}")
        if self.max_line_evals < 1:
            raise ValueError("max_line_evals must be >= 1")


@dataclass(frozen=True)
class LbfgsOptions:
    history_size: int = 100
    max_iter: int = 20
    max_eval: int | None = None  # defaults to max_iter * 5 // 4
    lr: float = 1.0
    tolerance_grad: float = 1e-7
    tolerance_change: float = 1e-9
    wolfe: WolfeParams = field(default_factory=WolfeParams)

    @property
    def eval_budget(self) -> int:
        return self.max_eval if self.max_eval is not None else self.max_iter * 5 // 4


def _curvature_ok(s: np.ndarray, y: np.ndarray) -> bool:
    # scale-free test: tiny steps in stiff directions still carry curvature
    sy = float(s @ y)
    return sy > CURVATURE_EPS * float(np.linalg.norm(s)) * float(np.linalg.norm(y)) and sy > 0.0


@dataclass
class LbfgsState:
    capacity: int = 100
    history: deque = field(default_factory=deque)
    last_grad: np.ndarray | None = None
    last_loss: float | None = None
    last_direction: np.ndarray | None = None
    last_step: float = 1.0
    eval_count: int = 0
    iter_count: int = 0
    resets: int = 0

    def push(self, s: np.ndarray, y: np.ndarray) -> bool:
        """Store a curvature pair unless ``s.y`` is not safely positive."""
        if not _curvature_ok(s, y):
            return False
        if len(self.history) == self.capacity:
            self.history.popleft()
        self.history.append((s, y))
        return True

    def reset(self) -> None:
        self.history.clear()
        self.last_grad = None
        self.last_loss = None
        self.last_direction = None
        self.last_step = 1.0
        self.iter_count = 0
        self.resets += 1


class LineSearchResult(NamedTuple):
    step: float
    loss: float
    grad: np.ndarray
    n_evals: int


def two_loop_direction(state: LbfgsState, grad: np.ndarray) -> np.ndarray:
    """Quasi-Newton direction ``-H grad`` from the stored pairs.

    The initial inverse Hessian is ``gamma * I`` with ``gamma = s.y / y.y`` of
    the newest pair, or the identity with no history.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient")
    q = -grad.copy()
    pairs = [(s, y) for s, y in state.history if _curvature_ok(s, y)]
    if not pairs:
        return q
    rho = [1.0 / float(y @ s) for s, y in pairs]
    alpha = [0.0] * len(pairs)
    for i in range(len(pairs) - 1, -1, -1):
        s, y = pairs[i]
        alpha[i] = rho[i] * float(s @ q)
        q -= alpha[i] * y
    s, y = pairs[-1]
    q *= float(s @ y) / float(y @ y)
    for i, (s, y) in enumerate(pairs):
        beta = rho[i] * float(y @ q)
        q += (alpha[i] - beta) * s
    return q


def cubic_interpolate(x1, f1, g1, x2, f2, g2, bounds=None) -> float:
    """Minimiser of the cubic through two points with slopes, clipped to ``bounds``."""
    lo, hi = bounds if bounds is not None else (min(x1, x2), max(x1, x2))
    vals = (x1, f1, g1, x2, f2, g2)
    if x1 == x2 or not all(math.isfinite(v) for v in vals):
        return 0.5 * (lo + hi)
    d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2)
    d2_sq = d1 * d1 - g1 * g2
    if d2_sq >= 0.0:
        d2 = math.sqrt(d2_sq)
        if x1 <= x2:
            den = g2 - g1 + 2.0 * d2
            t = x2 - (x2 - x1) * ((g2 + d2 - d1) / den) if den != 0 else 0.5 * (lo + hi)
        else:
            den = g1 - g2 + 2.0 * d2
            t = x1 - (x1 - x2) * ((g1 + d2 - d1) / den) if den != 0 else 0.5 * (lo + hi)
        if not math.isfinite(t):
            return 0.5 * (lo + hi)
        return min(max(t, lo), hi)
    return 0.5 * (lo + hi)


def strong_wolfe_search(closure: Closure, x: np.ndarray, direction: np.ndarray,
                        params: WolfeParams = WolfeParams(), step: float = 1.0,
                        loss: float | None = None, grad: np.ndarray | None = None) -> LineSearchResult:
    """Bracketing/zoom search for a step satisfying the strong Wolfe conditions.

    Returns the best bracketed step when ``max_line_evals`` runs out before
    both conditions hold.
    """
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    n_evals = 0
    if loss is None or grad is None:
        loss, grad = closure(x)
        n_evals += 1
    gtd = float(grad @ d)
    if not gtd < 0.0:
        raise ValueError(f"direction is not a descent direction (g.d = {gtd})")
    c1, c2, max_ls, tol = params.c1, params.c2, params.max_line_evals, params.tolerance_change
    d_norm = float(np.max(np.abs(d)))

    def phi(t):
        f, g = closure(x + t * d)
        return float(f), g, float(g @ d)

    t = float(step)
    f_new, g_new, gtd_new = phi(t)
    n_evals += 1
    t_prev, f_prev, g_prev, gtd_prev = 0.0, loss, grad, gtd
    done = False
    ls_iter = 0
    bracket = bracket_f = bracket_g = bracket_gtd = None
    while ls_iter < max_ls:
        if not math.isfinite(f_new) or f_new > loss + c1 * t * gtd or (ls_iter > 1 and f_new >= f_prev):
            bracket, bracket_f = [t_prev, t], [f_prev, f_new]
            bracket_g, bracket_gtd = [g_prev, g_new], [gtd_prev, gtd_new]
            break
        if abs(gtd_new) <= -c2 * gtd:
            bracket, bracket_f, bracket_g, bracket_gtd = [t], [f_new], [g_new], [gtd_new]
            done = True
            break
        if gtd_new >= 0:
            bracket, bracket_f = [t_prev, t], [f_prev, f_new]
            bracket_g, bracket_gtd = [g_prev, g_new], [gtd_prev, gtd_new]
            break
        # extrapolate
        min_step = t + 0.01 * (t - t_prev)
        max_step = t * 10.0
        t_next = cubic_interpolate(t_prev, f_prev, gtd_prev, t, f_new, gtd_new, (min_step, max_step))
        t_prev, f_prev, g_prev, gtd_prev = t, f_new, g_new, gtd_new
        t = t_next
        f_new, g_new, gtd_new = phi(t)
        n_evals += 1
        ls_iter += 1
    if bracket is None:
        bracket, bracket_f = [0.0, t], [loss, f_new]
        bracket_g, bracket_gtd = [grad, g_new], [gtd, gtd_new]

    insuf_progress = False
    if len(bracket) == 2:
        low, high = (0, 1) if _le(bracket_f[0], bracket_f[-1]) else (1, 0)
    while not done and ls_iter < max_ls and len(bracket) == 2:
        if abs(bracket[1] - bracket[0]) * d_norm < tol:
            break
        t = cubic_interpolate(bracket[0], bracket_f[0], bracket_gtd[0],
                              bracket[1], bracket_f[1], bracket_gtd[1])
        hi_t, lo_t = max(bracket), min(bracket)
        eps = 0.1 * (hi_t - lo_t)
        if min(hi_t - t, t - lo_t) < eps:
            if insuf_progress or t >= hi_t or t <= lo_t:
                t = hi_t - eps if abs(t - hi_t) < abs(t - lo_t) else lo_t + eps
                insuf_progress = False
            else:
                insuf_progress = True
        else:
            insuf_progress = False
        f_new, g_new, gtd_new = phi(t)
        n_evals += 1
        ls_iter += 1
        if not math.isfinite(f_new) or f_new > loss + c1 * t * gtd or f_new >= bracket_f[low]:
            bracket[high], bracket_f[high], bracket_g[high], bracket_gtd[high] = t, f_new, g_new, gtd_new
            low, high = (0, 1) if _le(bracket_f[0], bracket_f[1]) else (1, 0)
        else:
            if abs(gtd_new) <= -c2 * gtd:
                done = True
            elif gtd_new * (bracket[high] - bracket[low]) >= 0:
                bracket[high], bracket_f[high] = bracket[low], bracket_f[low]
                bracket_g[high], bracket_gtd[high] = bracket_g[low], bracket_gtd[low]
            bracket[low], bracket_f[low], bracket_g[low], bracket_gtd[low] = t, f_new, g_new, gtd_new

    i = 0 if len(bracket) == 1 else low
    return LineSearchResult(float(bracket[i]), float(bracket_f[i]), bracket_g[i], n_evals)


def _le(a: float, b: float) -> bool:
    if not math.isfinite(a):
        return False
    if not math.isfinite(b):
        return True
    return a <= b


def lbfgs_step(closure: Closure, theta: np.ndarray, state: LbfgsState,
               options: LbfgsOptions = LbfgsOptions()) -> tuple[np.ndarray, float]:
    """Run one outer step (up to ``max_iter`` iterations) from ``theta``.

    Returns the new parameters and the loss there; ``state`` is updated in
    place.  A non-finite loss at any accepted point rejects the whole step:
    ``theta`` is returned unchanged and the curvature history is cleared.
    """
    x0 = np.asarray(theta, dtype=np.float64)
    x = x0.copy()
    seen_nonfinite = False
    user_closure = closure

    def closure(z):
        nonlocal seen_nonfinite
        f, gz = user_closure(z)
        if not math.isfinite(float(f)):
            seen_nonfinite = True
        return f, gz

    loss, g = closure(x)
    loss = float(loss)
    evals = 1
    state.eval_count += 1
    if not (math.isfinite(loss) and np.all(np.isfinite(g))):
        log.warning("non-finite loss at step start; clearing history")
        state.reset()
        return x0, loss
    if np.max(np.abs(g)) <= options.tolerance_grad:
        state.last_loss = loss
        return x, loss

    n_iter = 0
    d = state.last_direction
    t = state.last_step
    prev_g = state.last_grad
    start_loss = loss
    while n_iter < options.max_iter:
        n_iter += 1
        state.iter_count += 1
        if state.iter_count == 1:
            d = -g
            state.history.clear()
        else:
            if d is not None and prev_g is not None:
                state.push(d * t, g - prev_g)
            d = two_loop_direction(state, g)
        prev_g = g
        if state.iter_count == 1:
            t = min(1.0, 1.0 / float(np.sum(np.abs(g)))) * options.lr
        else:
            t = options.lr
        gtd = float(g @ d)
        if not gtd < 0.0:
            # stale curvature pairs (the objective may have changed between
            # calls); restart from steepest descent
            state.history.clear()
            d = -g
        res = strong_wolfe_search(closure, x, d, options.wolfe, step=t, loss=loss, grad=g)
        t = res.step
        if t == 0.0:
            if seen_nonfinite:
                # every trial along d blew up: reject and forget the curvature model
                log.warning("line search hit only non-finite losses; clearing history")
                state.reset()
                return x, loss
            break
        x = x + t * d
        loss, g = res.loss, res.grad
        evals += res.n_evals
        state.eval_count += res.n_evals
        if not math.isfinite(loss):
            break
        if n_iter == options.max_iter or evals >= options.eval_budget:
            break
        if np.max(np.abs(g)) <= options.tolerance_grad:
            break
        if np.max(np.abs(d * t)) <= options.tolerance_change:
            break

    if not (math.isfinite(loss) and np.all(np.isfinite(g))):
        log.warning("non-finite loss inside step; rejecting step and clearing history")
        state.reset()
        return x0, start_loss
    if t > 0.0 and d is not None and prev_g is not None:
        # close the last pair with this objective's gradients; the caller may
        # change the objective (multiplier updates) before the next call
        state.push(d * t, g - prev_g)
    state.last_direction = None
    state.last_step = t
    state.last_grad = None
    state.last_loss = loss
    return x, loss
