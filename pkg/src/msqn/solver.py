"""Outer iterations: adaptive Type-I and Type-II multisecant methods.

Each outer iteration refreshes the direction memory at the current iterate and
then backtracks on the smoothness parameter M: the trial step minimizes the
cubic subspace model (Type I) or the gradient-norm bound (Type II) and M is
doubled until the respective bound verifies at the trial point, warm-starting
the next iteration at half the accepted value.  Acceptance of a Type-I step
implies the guaranteed decrease

    f(x_next) <= f(x) - (M/12) ||x_next - x||^3

which is asserted at runtime on every accepted step.
"""
import time
from dataclasses import dataclass

import numpy as np

from .cubic import build_cubic_model, solve_cubic_subproblem
from .linalg import NonFiniteError
from .memory import (DegenerateDirectionError, DirectionMemory, apply_rule,
                     recenter)
from .oracles import ObjectiveOracle, ZeroGradientError, estimate_initial_smoothness
from .trace import IterationTrace, TraceRow
from .type2 import NoConvergenceError, Type2Problem, solve_type2_small, type2_objective

M_OVERFLOW = 1e30
ACCEPT_SLACK = 1e-12
DECREASE_SLACK = 1e-10


class BacktrackOverflowError(RuntimeError):
    """M exceeded 1e30 while backtracking: the oracle is inconsistent."""


@dataclass
class SolverConfig:
    rule: str = "forward"
    n: int = 25                      # memory size
    h: float = 1e-9                  # forward-estimate step
    kappa_max: float = 1e9           # pruning cap for iterates/greedy
    grad_tol: float = 1e-8
    max_outer: int = 500
    max_oracle_calls: int = 10 ** 9  # gradient-call budget
    m0: float | None = None          # initial smoothness; estimated when None
    m_floor: float = 1e-12
    tau: float = 10.0                # probe ratio for the m0 estimator
    seed: int = 0

    def validate(self):
        if self.n < 1 or self.h <= 0 or self.kappa_max < 1 or self.grad_tol < 0:
            raise ValueError("invalid solver configuration")
        if self.max_outer < 0 or self.max_oracle_calls < 0:
            raise ValueError("budgets must be nonnegative")
        if self.m_floor <= 0 or self.tau <= 1:
            raise ValueError("m_floor must be positive and tau > 1")


@dataclass
class Type1Step:
    x_plus: np.ndarray
    m_final: float
    alpha: np.ndarray
    solution: object          # SubproblemSolution or None for a stationary point
    f_before: float
    f_after: float
    trials: int


@dataclass
class StepInfo:
    """Per-iteration diagnostics passed to the optional solver callback."""

    t: int
    x_before: np.ndarray
    x_after: np.ndarray
    grad: np.ndarray
    memory: DirectionMemory
    m_final: float
    alpha: np.ndarray
    solution: object
    f_before: float
    f_after: float
    trials: int


def type1_backtrack_step(oracle: ObjectiveOracle, mem: DirectionMemory,
                         x: np.ndarray, m_init: float, *, grad_x=None,
                         f_x=None) -> Type1Step:
    """One adaptive Type-I step: double M until the cubic bound verifies.

    The first trial uses M = m_init.  On exit the model upper bound holds at
    the trial point, which together with the subproblem optimality conditions
    forces the (M/12)-cubed-step decrease (asserted).  A zero gradient returns
    immediately with a null step.
    """
    if m_init <= 0:
        raise ValueError("m_init must be positive")
    x = np.asarray(x, dtype=float)
    g = oracle.grad(x) if grad_x is None else np.asarray(grad_x, dtype=float)
    if np.linalg.norm(g) == 0.0:
        fx = oracle.f(x) if f_x is None else f_x
        return Type1Step(x.copy(), m_init, np.zeros(mem.k), None, fx, fx, 0)
    fx = oracle.f(x) if f_x is None else f_x
    m = m_init / 2.0
    trials = 0
    while True:
        m *= 2.0
        if m > M_OVERFLOW:
            raise BacktrackOverflowError("smoothness parameter exceeded 1e30")
        trials += 1
        try:
            sol = solve_cubic_subproblem(build_cubic_model(mem, g, m))
        except NonFiniteError:
            continue
        x_plus = x + mem.directions @ sol.alpha
        f_plus = oracle.f(x_plus)
        if f_plus <= fx + sol.model_value + ACCEPT_SLACK * max(1.0, abs(fx)):
            break
    assert f_plus <= fx - (m / 12.0) * sol.r ** 3 \
        + DECREASE_SLACK * max(1.0, abs(fx)), "per-step decrease violated"
    return Type1Step(x_plus, m, sol.alpha, sol, fx, f_plus, trials)


def _prepare_run(oracle, config, x0):
    config.validate()
    d = oracle.dim
    if config.n > d:
        raise ValueError("memory size n cannot exceed the problem dimension")
    x = np.asarray(x0, dtype=float).copy() if x0 is not None \
        else oracle.grad(np.zeros(d))
    if config.m0 is not None:
        m = float(config.m0)
    else:
        try:
            # auto probe length: the algorithm's h is far below the estimator's
            # round-off floor, see estimate_initial_smoothness
            m = estimate_initial_smoothness(oracle, x, None, config.tau)
        except ZeroGradientError:
            m = config.m_floor
    mem = DirectionMemory.empty(d, config.n, config.rule)
    rng = np.random.default_rng(config.seed)
    return x, max(m, config.m_floor), mem, rng


def _update_memory(config, mem, oracle, x, rng):
    """One rule update; a spanned gradient reuses the memory at the new center."""
    try:
        return apply_rule(config.rule, mem, oracle, x, config.h, config.n,
                          config.kappa_max, rng)
    except DegenerateDirectionError as exc:
        return recenter(mem, x), exc.grad


def type1_iterate(oracle: ObjectiveOracle, config: SolverConfig, x0=None,
                  callback=None):
    """Iterative Type-I method; returns (x_final, trace).

    x0 defaults to grad f(0), the benchmark protocol's starting point.  Stops
    on the gradient tolerance, the outer-iteration cap, or the gradient-call
    budget.  The trace has one row per iteration recording the pre-step state
    and the accepted step, plus a terminal row when the tolerance triggers.
    """
    x, m, mem, rng = _prepare_run(oracle, config, x0)
    trace = IterationTrace()
    start_calls = oracle.grad_calls
    for t in range(config.max_outer):
        if oracle.grad_calls - start_calls >= config.max_oracle_calls:
            break
        tic = time.perf_counter()
        mem, g = _update_memory(config, mem, oracle, x, rng)
        grad_norm = float(np.linalg.norm(g))
        calls = oracle.grad_calls - start_calls
        if grad_norm <= config.grad_tol:
            trace.append(TraceRow(t, calls, oracle.f(x), grad_norm, m, 0.0, 0,
                                  (time.perf_counter() - tic) * 1e3))
            break
        step = type1_backtrack_step(oracle, mem, x, max(m / 2.0, config.m_floor),
                                    grad_x=g)
        m = step.m_final
        wall_ms = (time.perf_counter() - tic) * 1e3
        trace.append(TraceRow(t, oracle.grad_calls - start_calls, step.f_before,
                              grad_norm, m, step.solution.r if step.solution else 0.0,
                              step.trials - 1, wall_ms))
        if callback is not None:
            callback(StepInfo(t, x, step.x_plus, g, mem, m, step.alpha,
                              step.solution, step.f_before, step.f_after,
                              step.trials))
        x = step.x_plus
    return x, trace


def type2_iterate(oracle: ObjectiveOracle, config: SolverConfig, x0=None,
                  callback=None):
    """Iterative Type-II method: backtracks on the gradient-norm bound.

    The trial coefficients minimize ||grad + G a|| + (M/2)(|a|^T eps + ||D a||^2)
    and are accepted once the new gradient norm is below that bound, so the
    recorded gradient norms never increase.  A subproblem that fails to
    converge degrades to a null step with M doubled.
    """
    x, m, mem, rng = _prepare_run(oracle, config, x0)
    trace = IterationTrace()
    start_calls = oracle.grad_calls
    for t in range(config.max_outer):
        if oracle.grad_calls - start_calls >= config.max_oracle_calls:
            break
        tic = time.perf_counter()
        mem, g = _update_memory(config, mem, oracle, x, rng)
        grad_norm = float(np.linalg.norm(g))
        calls = oracle.grad_calls - start_calls
        if grad_norm <= config.grad_tol:
            trace.append(TraceRow(t, calls, oracle.f(x), grad_norm, m, 0.0, 0,
                                  (time.perf_counter() - tic) * 1e3))
            break
        fx = oracle.f(x)
        m_trial = max(m / 2.0, config.m_floor) / 2.0
        trials = 0
        warm = None
        while True:
            m_trial *= 2.0
            if m_trial > M_OVERFLOW:
                raise BacktrackOverflowError("smoothness parameter exceeded 1e30")
            trials += 1
            problem = Type2Problem(grad=g, grad_diffs=mem.grad_diffs,
                                   directions=mem.directions, errors=mem.errors,
                                   reg=m_trial)
            try:
                alpha = solve_type2_small(problem, warm_start=warm)
                warm = alpha
            except NoConvergenceError:
                alpha = np.zeros(mem.k)
            bound = type2_objective(problem, alpha)
            x_plus = x + mem.directions @ alpha
            g_plus = oracle.grad(x_plus)
            if np.linalg.norm(g_plus) <= bound + ACCEPT_SLACK * max(1.0, grad_norm):
                break
        m = m_trial
        step_norm = float(np.linalg.norm(mem.directions @ alpha))
        wall_ms = (time.perf_counter() - tic) * 1e3
        trace.append(TraceRow(t, oracle.grad_calls - start_calls, fx, grad_norm,
                              m, step_norm, trials - 1, wall_ms))
        if callback is not None:
            callback(StepInfo(t, x, x_plus, g, mem, m, alpha, None, fx,
                              float("nan"), trials))
        x = x_plus
    return x, trace
