"""Reference first-order optimizers for benchmark comparisons.

All three share the solver trace schema and oracle-call accounting so their
curves are directly comparable with the multisecant methods.  The M column
holds the method's running smoothness estimate (inverse accepted step size).
"""
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .oracles import ObjectiveOracle
from .trace import IterationTrace, TraceRow


class LineSearchFailError(RuntimeError):
    """The weak-Wolfe bisection rejected the step; caller falls back."""


@dataclass
class BaselineConfig:
    method: str = "gd"               # gd | nesterov | lbfgs
    memory: int = 25                 # l-BFGS history length
    armijo_c: float = 1e-4
    wolfe_c2: float = 0.9
    init_step: float = 1.0
    grad_tol: float = 1e-8
    max_outer: int = 10 ** 5
    max_oracle_calls: int = 10 ** 9

    def validate(self):
        if self.memory < 1 or self.init_step <= 0 or self.grad_tol < 0:
            raise ValueError("invalid baseline configuration")
        if not 0 < self.armijo_c < self.wolfe_c2 < 1:
            raise ValueError("need 0 < armijo_c < wolfe_c2 < 1")


def _terminal_row(trace, t, calls, fx, gn, m, tic):
    trace.append(TraceRow(t, calls, fx, gn, m, 0.0, 0,
                          (time.perf_counter() - tic) * 1e3))


def run_gd(oracle: ObjectiveOracle, config: BaselineConfig, x0=None):
    """Gradient descent with halving Armijo backtracking (monotone f)."""
    config.validate()
    x = np.asarray(x0, dtype=float).copy() if x0 is not None \
        else oracle.grad(np.zeros(oracle.dim))
    step = config.init_step
    trace = IterationTrace()
    start_calls = oracle.grad_calls
    for t in range(config.max_outer):
        if oracle.grad_calls - start_calls >= config.max_oracle_calls:
            break
        tic = time.perf_counter()
        g = oracle.grad(x)
        gn = float(np.linalg.norm(g))
        calls = oracle.grad_calls - start_calls
        if gn <= config.grad_tol:
            _terminal_row(trace, t, calls, oracle.f(x), gn, 1.0 / step, tic)
            break
        fx = oracle.f(x)
        step = step * 2.0
        halvings = 0
        while oracle.f(x - step * g) > fx - config.armijo_c * step * gn * gn:
            step *= 0.5
            halvings += 1
            if halvings > 100:
                break
        x = x - step * g
        trace.append(TraceRow(t, oracle.grad_calls - start_calls, fx, gn,
                              1.0 / step, step * gn, halvings,
                              (time.perf_counter() - tic) * 1e3))
    return x, trace


def run_nesterov(oracle: ObjectiveOracle, config: BaselineConfig, x0=None):
    """Accelerated gradient with a backtracked smoothness estimate.

    Restarts the momentum whenever the function value increases, so f is
    monotone within each restart segment.
    """
    config.validate()
    x = np.asarray(x0, dtype=float).copy() if x0 is not None \
        else oracle.grad(np.zeros(oracle.dim))
    y = x.copy()
    lips = 1.0 / config.init_step
    theta = 1.0
    f_prev = None
    trace = IterationTrace()
    start_calls = oracle.grad_calls
    for t in range(config.max_outer):
        if oracle.grad_calls - start_calls >= config.max_oracle_calls:
            break
        tic = time.perf_counter()
        g = oracle.grad(y)
        gn = float(np.linalg.norm(g))
        calls = oracle.grad_calls - start_calls
        if gn <= config.grad_tol:
            _terminal_row(trace, t, calls, oracle.f(x), gn, lips, tic)
            break
        f_y = oracle.f(y)
        lips *= 0.5  # allow the estimate to shrink again
        halvings = 0
        while oracle.f(y - g / lips) > f_y - gn * gn / (2.0 * lips):
            lips *= 2.0
            halvings += 1
            if halvings > 100:
                break
        x_new = y - g / lips
        f_new = oracle.f(x_new)
        if f_prev is not None and f_new > f_prev:
            # function-value restart: drop momentum, re-center on x
            theta = 1.0
            y = x.copy()
            f_prev = None
            trace.append(TraceRow(t, oracle.grad_calls - start_calls, f_new, gn,
                                  lips, 0.0, halvings,
                                  (time.perf_counter() - tic) * 1e3))
            continue
        theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta ** 2))
        y = x_new + ((theta - 1.0) / theta_next) * (x_new - x)
        step_norm = float(np.linalg.norm(x_new - x))
        x, theta, f_prev = x_new, theta_next, f_new
        trace.append(TraceRow(t, oracle.grad_calls - start_calls, f_new, gn,
                              lips, step_norm, halvings,
                              (time.perf_counter() - tic) * 1e3))
    return x, trace


def _two_loop(g, pairs):
    """Classic two-loop recursion with s^T y / y^T y scaling."""
    q = g.copy()
    alphas = []
    for s, y_vec, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y_vec
    if pairs:
        s, y_vec, _ = pairs[-1]
        q *= (s @ y_vec) / (y_vec @ y_vec)
    for (s, y_vec, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y_vec @ q)
        q += (a - b) * s
    return q


def _weak_wolfe(oracle, x, fx, g, direction, c1, c2, max_iters=60):
    """Bisection line search for the weak Wolfe conditions.

    Returns (step, f_new, g_new); raises LineSearchFailError when the bracket
    collapses without an acceptable point.
    """
    slope = float(g @ direction)
    lo, hi = 0.0, float("inf")
    t = 1.0
    for _ in range(max_iters):
        x_t = x + t * direction
        f_t = oracle.f(x_t)
        if not np.isfinite(f_t) or f_t > fx + c1 * t * slope:
            hi = t
            t = 0.5 * (lo + hi)
            continue
        g_t = oracle.grad(x_t)
        if g_t @ direction < c2 * slope:
            lo = t
            t = 2.0 * lo if hi == float("inf") else 0.5 * (lo + hi)
            continue
        return t, f_t, g_t
    raise LineSearchFailError("weak Wolfe bracket collapsed")


def run_lbfgs(oracle: ObjectiveOracle, config: BaselineConfig, x0=None):
    """Two-loop l-BFGS with weak-Wolfe bisection line search.

    Curvature pairs with s^T y <= 1e-12 are skipped.  A failed line search
    falls back to the steepest-descent direction once; if that also fails the
    run stops.
    """
    config.validate()
    x = np.asarray(x0, dtype=float).copy() if x0 is not None \
        else oracle.grad(np.zeros(oracle.dim))
    pairs = deque(maxlen=config.memory)
    trace = IterationTrace()
    start_calls = oracle.grad_calls
    g = None
    for t in range(config.max_outer):
        if oracle.grad_calls - start_calls >= config.max_oracle_calls:
            break
        tic = time.perf_counter()
        if g is None:
            g = oracle.grad(x)
        gn = float(np.linalg.norm(g))
        calls = oracle.grad_calls - start_calls
        if gn <= config.grad_tol:
            _terminal_row(trace, t, calls, oracle.f(x), gn, 0.0, tic)
            break
        fx = oracle.f(x)
        direction = -_two_loop(g, list(pairs))
        if g @ direction >= 0:
            direction = -g
        try:
            step, f_new, g_new = _weak_wolfe(oracle, x, fx, g, direction,
                                             config.armijo_c, config.wolfe_c2)
        except LineSearchFailError:
            direction = -g
            try:
                step, f_new, g_new = _weak_wolfe(oracle, x, fx, g, direction,
                                                 config.armijo_c, config.wolfe_c2)
            except LineSearchFailError:
                _terminal_row(trace, t, oracle.grad_calls - start_calls, fx, gn,
                              0.0, tic)
                break
        s = step * direction
        y_vec = g_new - g
        curvature = float(s @ y_vec)
        if curvature > 1e-12:
            pairs.append((s, y_vec, 1.0 / curvature))
        x = x + s
        g = g_new
        trace.append(TraceRow(t, oracle.grad_calls - start_calls, fx, gn,
                              1.0 / step, float(np.linalg.norm(s)), 0,
                              (time.perf_counter() - tic) * 1e3))
    return x, trace
