"""Quasi-Newton minimisation with a strong-Wolfe line search.

Objectives may return ``+inf`` to signal an infeasible point; the line
search treats such trial steps as overshoots and contracts.
"""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class OptimizerSettings:
    """Stopping rules and line-search constants.

    ``grad_tol`` applies to the max-norm of the gradient; ``step_tol`` to the
    max-norm of the accepted step relative to ``1 + |x|``.
    """

    method: str = "bfgs"
    max_iters: int = 500
    grad_tol: float = 1e-6
    step_tol: float = 1e-10
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    fallback_descent_iters: int = 50

    def __post_init__(self):
        if self.method not in ("bfgs", "gradient_descent_fallback"):
            raise ValueError(f"unknown optimizer method {self.method!r}")
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("line search constants must satisfy 0 < c1 < c2 < 1")
        if self.grad_tol <= 0 or self.step_tol <= 0 or self.max_iters < 1:
            raise ValueError("tolerances must be positive and max_iters >= 1")


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    converged: bool
    iterations: int
    message: str
    history: list = field(default_factory=list)

    @property
    def gradient_norm(self):
        return float(np.max(np.abs(self.grad))) if self.grad.size else 0.0


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimiser of the cubic interpolating (a, fa, ga) and (b, fb, gb)."""
    a, fa, ga, b, fb, gb = (float(v) for v in (a, fa, ga, b, fb, gb))
    if a == b:
        return None
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if not math.isfinite(disc) or disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return None
    trial = b - (b - a) * (gb + d2 - d1) / denom
    return trial if math.isfinite(trial) else None


def _zoom(phi, lo, hi, f0, g0, c1, c2, max_evals=40):
    # lo/hi are (step, f, slope, state); lo always satisfies sufficient decrease
    for _ in range(max_evals):
        a_lo, f_lo, g_lo, _ = lo
        a_hi, f_hi, g_hi, _ = hi
        trial = None
        if math.isfinite(f_hi) and g_hi is not None:
            trial = _cubic_min(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
        lo_b, hi_b = min(a_lo, a_hi), max(a_lo, a_hi)
        margin = 0.1 * (hi_b - lo_b)
        if trial is None or not (lo_b + margin <= trial <= hi_b - margin):
            trial = 0.5 * (a_lo + a_hi)
        f_t, g_t, state = phi(trial)
        if not math.isfinite(f_t) or f_t > f0 + c1 * trial * g0 or f_t >= f_lo:
            hi = (trial, f_t, g_t, state)
            continue
        if abs(g_t) <= -c2 * g0:
            return trial, f_t, state
        if g_t * (a_hi - a_lo) >= 0:
            hi = lo
        lo = (trial, f_t, g_t, state)
        if abs(hi[0] - lo[0]) < 1e-16 * max(1.0, lo[0]):
            break
    a_lo, f_lo, _, state = lo
    if a_lo > 0 and f_lo < f0:
        # best point with sufficient decrease, curvature unmet
        return a_lo, f_lo, state
    return None


def line_search_wolfe(fun_grad, x, f0, g0_vec, direction, c1=1e-4, c2=0.9, step0=1.0, max_evals=40):
    """Strong-Wolfe line search along ``direction``.

    Returns ``(step, f, grad)`` or ``None`` if no acceptable step was found.
    """
    g0 = float(g0_vec @ direction)
    if not g0 < 0:
        return None

    def phi(step):
        f, g = fun_grad(x + step * direction)
        slope = float(g @ direction) if math.isfinite(f) else None
        return f, slope, (f, g)

    prev = (0.0, f0, g0, None)
    step = step0
    for i in range(max_evals):
        f_t, g_t, state = phi(step)
        if not math.isfinite(f_t):
            # infeasible: contract towards the last good point
            return _zoom(phi, prev, (step, f_t, None, state), f0, g0, c1, c2)
        if f_t > f0 + c1 * step * g0 or (i > 0 and f_t >= prev[1]):
            return _zoom(phi, prev, (step, f_t, g_t, state), f0, g0, c1, c2)
        if abs(g_t) <= -c2 * g0:
            return step, f_t, state
        if g_t >= 0:
            return _zoom(phi, (step, f_t, g_t, state), prev, f0, g0, c1, c2)
        prev = (step, f_t, g_t, state)
        step *= 2.0
    return None


def _unpack(found):
    step, f, state = found
    return step, state[0], state[1]


def minimize_bfgs(fun_grad, x0, settings=OptimizerSettings(), history=None):
    """Minimise ``f`` given ``fun_grad(x) -> (f, grad)``.

    ``history`` (a list) receives the objective value after every accepted
    iteration, starting with the value at ``x0``.
    """
    x = np.array(x0, dtype=float)
    f, g = fun_grad(x)
    history = [] if history is None else history
    history.append(f)
    if not math.isfinite(f):
        return OptimizeResult(x, f, g, False, 0, "objective infeasible at start", history)
    k = x.size
    h_inv = np.eye(k)
    scaled = False
    for it in range(1, settings.max_iters + 1):
        if np.max(np.abs(g)) <= settings.grad_tol:
            return OptimizeResult(x, f, g, True, it - 1, "gradient tolerance reached", history)
        direction = -h_inv @ g
        if not float(g @ direction) < 0:
            h_inv = np.eye(k)
            scaled = False
            direction = -g
        step0 = 1.0 if scaled else min(1.0, 1.0 / max(np.max(np.abs(g)), 1e-300))
        found = line_search_wolfe(
            fun_grad, x, f, g, direction, settings.wolfe_c1, settings.wolfe_c2, step0
        )
        if found is None:
            if scaled:
                h_inv = np.eye(k)
                scaled = False
                continue
            return OptimizeResult(x, f, g, False, it - 1, "line search failed", history)
        step, f_new, g_new = _unpack(found)
        s = step * direction
        y = g_new - g
        x = x + s
        f, g = f_new, g_new
        history.append(f)
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            if not scaled:
                h_inv = np.eye(k) * (sy / float(y @ y))
                scaled = True
            rho = 1.0 / sy
            hy = h_inv @ y
            h_inv = (
                h_inv
                - rho * (np.outer(s, hy) + np.outer(hy, s))
                + (rho * rho * float(y @ hy) + rho) * np.outer(s, s)
            )
        if np.max(np.abs(s)) <= settings.step_tol * (1.0 + np.max(np.abs(x))):
            converged = bool(np.max(np.abs(g)) <= settings.grad_tol)
            return OptimizeResult(x, f, g, converged, it, "step tolerance reached", history)
    converged = bool(np.max(np.abs(g)) <= settings.grad_tol)
    return OptimizeResult(x, f, g, converged, settings.max_iters, "iteration limit", history)


def steepest_descent(fun_grad, x0, iterations, settings=OptimizerSettings(), history=None):
    """Plain gradient descent with the same line search; used to reposition restarts."""
    x = np.array(x0, dtype=float)
    f, g = fun_grad(x)
    history = [] if history is None else history
    history.append(f)
    it = 0
    for it in range(1, iterations + 1):
        if not math.isfinite(f) or np.max(np.abs(g)) <= settings.grad_tol:
            break
        direction = -g / max(np.max(np.abs(g)), 1e-300)
        found = line_search_wolfe(fun_grad, x, f, g, direction, settings.wolfe_c1, settings.wolfe_c2)
        if found is None:
            break
        step, f, g = _unpack(found)
        x = x + step * direction
        history.append(f)
    converged = bool(math.isfinite(f) and np.max(np.abs(g)) <= settings.grad_tol)
    return OptimizeResult(x, f, g, converged, it, "descent finished", history)
