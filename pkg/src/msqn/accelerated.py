"""Accelerated Type-I method driven by an estimate sequence.

The method maintains a running lower model

    phi_t(v) = l0 + l1^T v + (lambda1/2) ||v - x0||^2 + (lambda2/6) ||v - x0||^3

whose minimum dominates B_t f(x_t), where the integer weights follow the cubic
schedule b_t = (t+1)(t+2)/2, B_t = t(t+1)(t+2)/6.  Each iteration blends the
model minimizer with the current iterate, takes an adaptive subspace step from
the blend, and accepts only if the extended model still lower-bounds the new
weighted function value; otherwise the penalty weight selected by the step's
exit certificate is raised and the iteration retried.

The step subroutine doubles M until one of two certificates holds at the trial
point: a cubic-Newton-like "large step" certificate or a regularization-
dominated "small step" certificate.  Which one fired decides whether the cubic
or the quadratic penalty weight is adjusted on failure.
"""
import time
from dataclasses import dataclass, replace

import numpy as np

from .cubic import build_gamma_model, minimize_estimate_function, solve_cubic_subproblem
from .linalg import NonFiniteError, projector_matrix, spectral_norm
from .memory import DirectionMemory, compute_error_vector
from .oracles import ObjectiveOracle
from .solver import (M_OVERFLOW, BacktrackOverflowError, SolverConfig,
                     _prepare_run, _update_memory, type1_backtrack_step)
from .trace import IterationTrace, TraceRow

LARGE_STEP = "LargeStep"
SMALL_STEP = "SmallStep"
EXIT_SLACK = 1e-12
LOWER_BOUND_SLACK = 1e-8
LAMBDA_OVERFLOW = 1e30


class LambdaOverflowError(RuntimeError):
    """Penalty weights exploded; the problem is most likely nonconvex."""


@dataclass
class EstimateSequenceState:
    """Accumulated lower-model coefficients, anchored at the starting point."""

    l0: float
    l1: np.ndarray
    lambda1: float
    lambda2: float
    t: int
    x0: np.ndarray


@dataclass
class AccelStepResult:
    x_plus: np.ndarray
    alpha: np.ndarray
    m_final: float
    gamma: float
    exit_flag: str
    grad_plus: np.ndarray
    step_norm: float
    trials: int


def schedule_b(t: int) -> int:
    return (t + 1) * (t + 2) // 2


def schedule_big_b(t: int) -> int:
    return t * (t + 1) * (t + 2) // 6


def off_span_grad_diff_norm(mem: DirectionMemory) -> float:
    """|| (I - P) G ||, the gradient-difference mass outside span(D)."""
    p = projector_matrix(mem.directions)
    return spectral_norm(mem.grad_diffs - p @ mem.grad_diffs)


def gamma_coefficient(mem: DirectionMemory, m: float, off_span: float | None = None) -> float:
    """gamma_M = (kappa/||D||) (1.5 ||eps|| + 2 ||(I-P)G|| / M)."""
    if off_span is None:
        off_span = off_span_grad_diff_norm(mem)
    return (mem.kappa / mem.norm_directions) * (
        1.5 * float(np.linalg.norm(mem.errors)) + 2.0 * off_span / m)


def accel_subroutine(oracle: ObjectiveOracle, mem: DirectionMemory,
                     y: np.ndarray, m_init: float, *, grad_y=None) -> AccelStepResult:
    """Adaptive step from y, doubling M until an exit certificate holds.

    LargeStep: (2/3^{3/4}) ||grad(x+)||^{3/2} / sqrt(M) <= -grad(x+)^T D a.
    SmallStep: ||grad(x+)||^2 / (M (gamma + ||D a||)) <= -grad(x+)^T D a
               and ||D a|| <= (sqrt(3) - 1) gamma.
    When both hold LargeStep is reported.  Termination is guaranteed once M
    reaches twice the Hessian-Lipschitz constant.
    """
    if m_init <= 0:
        raise ValueError("m_init must be positive")
    y = np.asarray(y, dtype=float)
    g = oracle.grad(y) if grad_y is None else np.asarray(grad_y, dtype=float)
    off_span = off_span_grad_diff_norm(mem)
    m = m_init / 2.0
    trials = 0
    while True:
        m *= 2.0
        if m > M_OVERFLOW:
            raise BacktrackOverflowError("smoothness parameter exceeded 1e30")
        trials += 1
        gamma = gamma_coefficient(mem, m, off_span)
        try:
            sol = solve_cubic_subproblem(build_gamma_model(mem, g, m, gamma))
        except NonFiniteError:
            continue
        step = mem.directions @ sol.alpha
        x_plus = y + step
        g_plus = oracle.grad(x_plus)
        descent = -float(g_plus @ step)
        gp_norm = float(np.linalg.norm(g_plus))
        large = (2.0 / 3.0 ** 0.75) * gp_norm ** 1.5 / np.sqrt(m) <= descent + EXIT_SLACK
        small = (gp_norm ** 2 / (m * (gamma + sol.r)) <= descent + EXIT_SLACK
                 and sol.r <= (np.sqrt(3.0) - 1.0) * gamma + EXIT_SLACK)
        if large or small:
            flag = LARGE_STEP if large else SMALL_STEP
            return AccelStepResult(x_plus=x_plus, alpha=sol.alpha, m_final=m,
                                   gamma=gamma, exit_flag=flag, grad_plus=g_plus,
                                   step_norm=sol.r, trials=trials)


def accel_outer(oracle: ObjectiveOracle, config: SolverConfig, x0=None,
                callback=None):
    """Accelerated outer loop; returns (x_final, trace).

    Bootstraps with one plain Type-I backtracking step, then maintains the
    estimate sequence.  Failed lower-bound checks double (or initialize) the
    penalty weight selected by the step's exit flag and retry the iteration.
    Expects a convex objective (not enforced); LambdaOverflowError signals
    that the weights exploded, which indicates nonconvexity.

    trace.extras["accel"] records per-iteration penalty weights, thresholds,
    and lower-model values for diagnostic checks.
    """
    x_start, m, mem, rng = _prepare_run(oracle, config, x0)
    trace = IterationTrace()
    log = []
    trace.extras["accel"] = log
    start_calls = oracle.grad_calls
    if config.max_outer == 0:
        return x_start, trace

    # bootstrap: one plain adaptive step from the anchor
    tic = time.perf_counter()
    mem, g0 = _update_memory(config, mem, oracle, x_start, rng)
    g0_norm = float(np.linalg.norm(g0))
    if g0_norm <= config.grad_tol:
        trace.append(TraceRow(0, oracle.grad_calls - start_calls, oracle.f(x_start),
                              g0_norm, m, 0.0, 0, (time.perf_counter() - tic) * 1e3))
        return x_start, trace
    boot = type1_backtrack_step(oracle, mem, x_start, max(m, config.m_floor),
                                grad_x=g0)
    x = boot.x_plus
    m = boot.m_final
    state = EstimateSequenceState(l0=boot.f_after, l1=np.zeros(oracle.dim),
                                  lambda1=0.0, lambda2=0.0, t=1, x0=x_start)
    trace.append(TraceRow(0, oracle.grad_calls - start_calls, boot.f_before,
                          g0_norm, m, boot.solution.r if boot.solution else 0.0,
                          boot.trials - 1, (time.perf_counter() - tic) * 1e3))

    for t in range(1, config.max_outer):
        if oracle.grad_calls - start_calls >= config.max_oracle_calls:
            break
        tic = time.perf_counter()
        mem, g = _update_memory(config, mem, oracle, x, rng)
        grad_norm = float(np.linalg.norm(g))
        if grad_norm <= config.grad_tol:
            trace.append(TraceRow(t, oracle.grad_calls - start_calls, oracle.f(x),
                                  grad_norm, m, 0.0, 0,
                                  (time.perf_counter() - tic) * 1e3))
            break
        f_x = oracle.f(x)
        b_t = schedule_b(t)
        b_next = schedule_b(t + 1)
        big_b = schedule_big_b(t)
        big_b_next = schedule_big_b(t + 1)
        beta = 3.0 / (t + 3.0)
        retries = 0
        while True:
            v_t, _, phi_v = minimize_estimate_function(
                state.l0, state.l1, state.lambda1, state.lambda2, state.x0)
            y_t = beta * v_t + (1.0 - beta) * x
            mem_y = replace(mem, errors=compute_error_vector(mem, y_t))
            res = accel_subroutine(oracle, mem_y, y_t, max(m / 2.0, config.m_floor))
            f_plus = oracle.f(res.x_plus)
            l0_trial = state.l0 + b_t * (f_plus - float(res.grad_plus @ res.x_plus))
            l1_trial = state.l1 + b_t * res.grad_plus
            _, _, phi_plus = minimize_estimate_function(
                l0_trial, l1_trial, state.lambda1, state.lambda2, state.x0)
            lam1_threshold = b_next ** 2 / big_b * res.m_final * (res.gamma + res.step_norm)
            lam2_threshold = 4.0 / np.sqrt(3.0) * b_next ** 3 / big_b ** 2 * res.m_final
            if phi_plus >= big_b_next * f_plus - LOWER_BOUND_SLACK * max(1.0, abs(phi_plus)):
                state = EstimateSequenceState(l0=l0_trial, l1=l1_trial,
                                              lambda1=state.lambda1,
                                              lambda2=state.lambda2,
                                              t=t + 1, x0=state.x0)
                x = res.x_plus
                m = res.m_final
                break
            # lower bound broken: raise the weight picked by the exit flag
            if res.exit_flag == LARGE_STEP:
                new_lam2 = lam2_threshold if state.lambda2 == 0.0 else 2.0 * state.lambda2
                state = replace(state, lambda2=new_lam2)
            else:
                new_lam1 = lam1_threshold if state.lambda1 == 0.0 else 2.0 * state.lambda1
                state = replace(state, lambda1=new_lam1)
            if max(state.lambda1, state.lambda2) > LAMBDA_OVERFLOW:
                raise LambdaOverflowError("penalty weights exceeded 1e30")
            retries += 1
        wall_ms = (time.perf_counter() - tic) * 1e3
        trace.append(TraceRow(t, oracle.grad_calls - start_calls, f_x, grad_norm,
                              m, res.step_norm, res.trials - 1, wall_ms))
        log.append({
            "t": t + 1, "f": f_plus, "phi_min": phi_plus,
            "weighted_f": big_b_next * f_plus, "big_b": big_b_next,
            "lambda1": state.lambda1, "lambda2": state.lambda2,
            "lam1_threshold": lam1_threshold, "lam2_threshold": lam2_threshold,
            "m": res.m_final, "gamma": res.gamma, "step_norm": res.step_norm,
            "exit_flag": res.exit_flag, "retries": retries,
            "grad_plus_norm": float(np.linalg.norm(res.grad_plus)),
        })
        if callback is not None:
            callback(log[-1])
    return x, trace
