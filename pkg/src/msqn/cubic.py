"""Cubic-regularized subspace model and its exact small-dimension solver.

The model lives in the coefficient space of the direction block: minimize

    lin^T a + 0.5 a^T C a + (reg/6) ||D a||^3,        ||D a||^2 = a^T gram a,

where C is the symmetrized curvature estimate from the gradient differences.
The solver diagonalizes gram^{-1/2} C gram^{-1/2} and runs a bisection on the
step norm r = ||D a||: for each r the transformed system is diagonal, and the
mapped norm is nonincreasing in r, so the fixed point r = ||a~(r)|| is found by
bracketing.  When the linear term has no mass on the bottom eigenspace the
fixed point can sit at the left end (hard case); the pseudo-inverse solution is
then completed along the lowest eigenvector, nonnegative coefficient by
convention.
"""
from dataclasses import dataclass

import numpy as np

from .linalg import NonFiniteError, sym_eig
from .memory import DirectionMemory

BISECT_TOL = 1e-10
FO_RESIDUAL_GUARD = 1e-3  # hard failure threshold on the relative residual


@dataclass
class CubicModel:
    curvature: np.ndarray   # k x k symmetric model Hessian
    lin: np.ndarray         # k, direction block applied to the gradient
    gram: np.ndarray        # k x k Gram matrix of the direction block
    reg: float              # cubic regularization weight


@dataclass
class SubproblemSolution:
    alpha: np.ndarray
    r: float                # ||D alpha||
    model_value: float
    first_order_residual: float
    second_order_min_eig: float


def build_cubic_model(mem: DirectionMemory, grad: np.ndarray, reg: float) -> CubicModel:
    """Model with the scalar secant-error regularizer on the diagonal:

    C = (G^T D + D^T G)/2 + I (reg ||D|| ||eps||)/2.
    """
    if reg <= 0:
        raise ValueError("reg must be positive")
    if mem.k == 0:
        raise ValueError("memory is empty")
    d, g = mem.directions, mem.grad_diffs
    cross = g.T @ d
    curvature = 0.5 * (cross + cross.T)
    curvature = curvature + 0.5 * reg * mem.norm_directions * \
        np.linalg.norm(mem.errors) * np.eye(mem.k)
    return CubicModel(curvature=curvature, lin=d.T @ np.asarray(grad, dtype=float),
                      gram=d.T @ d, reg=float(reg))


def build_gamma_model(mem: DirectionMemory, grad: np.ndarray, reg: float,
                      gamma: float) -> CubicModel:
    """Model variant used by the accelerated subroutine:

    C = (G^T D + D^T G)/2 + gram (reg * gamma)/2.
    """
    if reg <= 0:
        raise ValueError("reg must be positive")
    d, g = mem.directions, mem.grad_diffs
    cross = g.T @ d
    gram = d.T @ d
    curvature = 0.5 * (cross + cross.T) + 0.5 * reg * gamma * gram
    return CubicModel(curvature=curvature, lin=d.T @ np.asarray(grad, dtype=float),
                      gram=gram, reg=float(reg))


def _gram_transforms(gram: np.ndarray):
    """gram^{1/2} and gram^{-1/2}; identity short-circuit for orthonormal blocks."""
    k = gram.shape[0]
    if np.max(np.abs(gram - np.eye(k))) <= 1e-10:
        eye = np.eye(k)
        return eye, eye
    eig = sym_eig(gram)
    s = np.maximum(eig.eigenvalues, eig.eigenvalues[-1] * 1e-16)
    v = eig.eigenvectors
    return (v * np.sqrt(s)) @ v.T, (v / np.sqrt(s)) @ v.T


def solve_cubic_subproblem(model: CubicModel) -> SubproblemSolution:
    """Global minimizer of  lin^T a + 0.5 a^T C a + (reg/6) ||D a||^3.

    Raises NonFiniteError when the computation overflows (regularization far
    too small for an indefinite model); callers respond by doubling reg.
    """
    m = model.reg
    _, inv_sqrt = _gram_transforms(model.gram)
    mid = inv_sqrt @ model.curvature @ inv_sqrt
    eig = sym_eig(0.5 * (mid + mid.T))
    lam, v = eig.eigenvalues, eig.eigenvectors
    g_t = v.T @ (inv_sqrt @ model.lin)

    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(g_t))):
        raise NonFiniteError("cubic model is not finite")

    def alpha_tilde(r):
        return -g_t / (lam + 0.5 * m * r)

    def psi(r):
        denom = lam + 0.5 * m * r
        if np.any(denom <= 0):
            return float("inf")
        return float(np.linalg.norm(g_t / denom))

    r_min = max(0.0, -2.0 * lam[0] / m)
    if not np.isfinite(r_min):
        raise NonFiniteError("regularization too small for the negative curvature")

    solved = None
    if r_min == 0.0 and psi(0.0) == 0.0:
        solved = (0.0, np.zeros_like(g_t))
    if solved is None and r_min > 0.0:
        # Mass of the linear term on the bottom eigenspace decides the hard case.
        scale = max(abs(lam[0]), abs(lam[-1]), 0.5 * m * r_min, 1e-300)
        bottom = lam - lam[0] <= 1e-12 * scale
        if np.linalg.norm(g_t[bottom]) <= 1e-12 * max(np.linalg.norm(g_t), 1.0):
            denom = lam + 0.5 * m * r_min
            a_pinv = np.where(bottom, 0.0, -g_t / np.where(bottom, 1.0, denom))
            pinv_norm = np.linalg.norm(a_pinv)
            if pinv_norm <= r_min:
                a_hard = a_pinv.copy()
                a_hard[np.argmax(bottom)] += np.sqrt(max(r_min ** 2 - pinv_norm ** 2, 0.0))
                solved = (r_min, a_hard)

    if solved is None:
        r_max = max(2.0 * r_min, 1.0)
        trace = []
        while psi(r_max) >= r_max:
            r_max *= 2.0
            if r_max > 1e150:
                raise NonFiniteError("step-norm bracket overflow")
        lo, hi = r_min, r_max
        for _ in range(300):
            midpt = 0.5 * (lo + hi)
            val = psi(midpt)
            trace.append((midpt, val))
            if abs(midpt - val) <= BISECT_TOL * max(1.0, midpt):
                lo = hi = midpt
                break
            if val > midpt:
                lo = midpt
            else:
                hi = midpt
        r_star = 0.5 * (lo + hi)
        # The bracketing map must be nonincreasing in r along the visited points.
        trace.sort(key=lambda p: p[0])
        finite = [p for p in trace if np.isfinite(p[1])]
        assert all(a[1] >= b[1] - 1e-9 * max(1.0, a[1])
                   for a, b in zip(finite, finite[1:])), "psi(r) not monotone"
        solved = (r_star, alpha_tilde(r_star))

    r_star, a_t = solved
    alpha = inv_sqrt @ (v @ a_t)
    r_out = float(np.sqrt(max(alpha @ (model.gram @ alpha), 0.0)))
    value = float(model.lin @ alpha + 0.5 * alpha @ (model.curvature @ alpha)
                  + m * r_out ** 3 / 6.0)
    residual = model.lin + model.curvature @ alpha + 0.5 * m * r_out * (model.gram @ alpha)
    fo = float(np.linalg.norm(residual))
    so_matrix = model.curvature + 0.5 * m * r_out * model.gram
    so_min = float(sym_eig(so_matrix).eigenvalues[0])
    if not np.isfinite(value):
        raise NonFiniteError("cubic model value overflowed")
    if fo > FO_RESIDUAL_GUARD * max(np.linalg.norm(model.lin), 1.0):
        raise NonFiniteError("subproblem solve lost accuracy")
    return SubproblemSolution(alpha=alpha, r=r_out, model_value=value,
                              first_order_residual=fo, second_order_min_eig=so_min)


def minimize_estimate_function(l0: float, l1: np.ndarray, lambda1: float,
                               lambda2: float, x0: np.ndarray):
    """Closed-form minimizer of  l0 + l1^T v + (l1_pen/2)||v-x0||^2 + (l2_pen/6)||v-x0||^3.

    Returns (v, r, value) with r = ||v - x0|| given by the three-case formula:
    0 when both penalties vanish, ||l1||/lambda1 when only the quadratic one is
    active, and the positive root of the quadratic stationarity condition when
    the cubic one is active.
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("penalty weights must be nonnegative")
    l1 = np.asarray(l1, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    norm_l1 = float(np.linalg.norm(l1))
    if lambda1 == 0.0 and lambda2 == 0.0:
        r = 0.0
    elif lambda2 == 0.0:
        r = norm_l1 / lambda1
    else:
        r = (-lambda1 + np.sqrt(lambda1 ** 2 + 2.0 * lambda2 * norm_l1)) / lambda2
    if norm_l1 == 0.0:
        v = x0.copy()
        r = 0.0
    else:
        v = x0 - r * l1 / norm_l1
    value = float(l0 + l1 @ v + 0.5 * lambda1 * r ** 2 + lambda2 * r ** 3 / 6.0)
    return v, float(r), value
