"""Objective-function oracles, built-in test problems, and dataset ingestion.

An oracle exposes f(x) and grad(x) behind call counters so solver runs can be
compared on gradient-oracle calls. Test problems additionally expose the exact
Hessian and a Hessian-Lipschitz constant where one is known, which the test
suite uses for secant-error bounds; the solvers themselves never read either.
"""
import threading
from dataclasses import dataclass

import numpy as np


class InvalidLabelError(ValueError):
    """Labels for a classification loss must be +1 / -1."""


class ZeroGradientError(ValueError):
    """Smoothness estimation needs a nonzero gradient at the probe point."""


class ParseError(ValueError):
    def __init__(self, msg, line_no=None):
        super().__init__(msg)
        self.line_no = line_no


class ObjectiveOracle:
    """First-order oracle with gradient/function call accounting.

    The gradient counter increases by exactly one per grad() call; counter
    updates are lock-protected so concurrent property tests stay exact.
    """

    def __init__(self, dim, f, grad, hessian=None, hessian_lipschitz=None):
        self.dim = int(dim)
        self._f = f
        self._grad = grad
        self._hessian = hessian
        self.hessian_lipschitz = hessian_lipschitz
        self.grad_calls = 0
        self.f_calls = 0
        self._lock = threading.Lock()

    def f(self, x) -> float:
        with self._lock:
            self.f_calls += 1
        return float(self._f(np.asarray(x, dtype=float)))

    def grad(self, x) -> np.ndarray:
        with self._lock:
            self.grad_calls += 1
        return np.asarray(self._grad(np.asarray(x, dtype=float)), dtype=float)

    @property
    def has_hessian(self) -> bool:
        return self._hessian is not None

    def hessian(self, x) -> np.ndarray:
        if self._hessian is None:
            raise NotImplementedError("this oracle does not expose a Hessian")
        return np.asarray(self._hessian(np.asarray(x, dtype=float)), dtype=float)


@dataclass
class Dataset:
    """Dense feature matrix plus labels (+-1 for classification, reals else)."""

    features: np.ndarray
    labels: np.ndarray


def make_quadratic(a: np.ndarray, b: np.ndarray) -> ObjectiveOracle:
    """Least-squares objective f(x) = 0.5 ||A x - b||^2 (zero Hessian-Lipschitz)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.shape != (a.shape[0],):
        raise ValueError("A must be n x d and b length n")
    gram = a.T @ a

    def f(x):
        r = a @ x - b
        return 0.5 * float(r @ r)

    def grad(x):
        return a.T @ (a @ x - b)

    return ObjectiveOracle(a.shape[1], f, grad, hessian=lambda x: gram,
                           hessian_lipschitz=0.0)


def _log1pexp(z):
    # log(1 + exp(z)) without overflow
    out = np.empty_like(z)
    pos = z > 0
    out[pos] = z[pos] + np.log1p(np.exp(-z[pos]))
    out[~pos] = np.log1p(np.exp(z[~pos]))
    return out


def make_logistic(data: Dataset, reg: float) -> ObjectiveOracle:
    """Logistic loss with quadratic regularization.

    f(x) = sum_i log(1 + exp(-b_i a_i^T x)) + (reg/2) ||x||^2.

    The Hessian-Lipschitz constant uses the sharp bound 1/(6 sqrt(3)) on the
    third derivative of the log-sigmoid: L <= (1/(6 sqrt 3)) sum_i ||a_i||^3.
    """
    a = np.asarray(data.features, dtype=float)
    b = np.asarray(data.labels, dtype=float)
    if reg < 0:
        raise ValueError("reg must be nonnegative")
    if not np.all(np.isin(b, (-1.0, 1.0))):
        raise InvalidLabelError("labels must be in {-1, +1}")
    lip = float(np.sum(np.linalg.norm(a, axis=1) ** 3) / (6.0 * np.sqrt(3.0)))

    def f(x):
        margins = b * (a @ x)
        return float(np.sum(_log1pexp(-margins)) + 0.5 * reg * (x @ x))

    def sigmoid(z):
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def grad(x):
        margins = b * (a @ x)
        w = -b * sigmoid(-margins)
        return a.T @ w + reg * x

    def hessian(x):
        margins = b * (a @ x)
        s = sigmoid(margins)
        w = s * (1.0 - s)
        return (a.T * w) @ a + reg * np.eye(a.shape[1])

    return ObjectiveOracle(a.shape[1], f, grad, hessian=hessian,
                           hessian_lipschitz=lip)


def make_rosenbrock(d: int) -> ObjectiveOracle:
    """Generalized Rosenbrock f(x) = sum 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2.

    hessian_lipschitz = 1200 is a unit-box diagnostic figure only.
    """
    if d < 2:
        raise ValueError("d must be at least 2")

    def f(x):
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2
                            + (1.0 - x[:-1]) ** 2))

    def grad(x):
        g = np.zeros_like(x)
        g[:-1] = -400.0 * x[:-1] * (x[1:] - x[:-1] ** 2) - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * (x[1:] - x[:-1] ** 2)
        return g

    def hessian(x):
        h = np.zeros((d, d))
        idx = np.arange(d - 1)
        h[idx, idx] += 1200.0 * x[:-1] ** 2 - 400.0 * x[1:] + 2.0
        h[idx + 1, idx + 1] += 200.0
        h[idx, idx + 1] += -400.0 * x[:-1]
        h[idx + 1, idx] += -400.0 * x[:-1]
        return h

    return ObjectiveOracle(d, f, grad, hessian=hessian, hessian_lipschitz=1200.0)


def make_cubic_regularized_ls(a: np.ndarray, b: np.ndarray, c: float) -> ObjectiveOracle:
    """f(x) = 0.5 ||A x - b||^2 + (c/3) ||x||^3, Hessian-Lipschitz 2c.

    grad = A^T (A x - b) + c ||x|| x; the cubic term's Hessian is
    c (||x|| I + x x^T / ||x||), which is 2c-Lipschitz.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if c < 0:
        raise ValueError("c must be nonnegative")
    gram = a.T @ a

    def f(x):
        r = a @ x - b
        return 0.5 * float(r @ r) + (c / 3.0) * float(np.linalg.norm(x) ** 3)

    def grad(x):
        return a.T @ (a @ x - b) + c * np.linalg.norm(x) * x

    def hessian(x):
        nx = np.linalg.norm(x)
        h = gram.copy()
        if nx > 0:
            h += c * (nx * np.eye(a.shape[1]) + np.outer(x, x) / nx)
        return h

    return ObjectiveOracle(a.shape[1], f, grad, hessian=hessian,
                           hessian_lipschitz=2.0 * c)


def parse_libsvm(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a LIBSVM text file ("label idx:val ...", 1-based) into dense arrays.

    Returns the raw feature matrix and label vector, before any preprocessing.
    """
    rows = []
    labels = []
    max_idx = 0
    try:
        with open(path, "r") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError as exc:
            raise ParseError(f"bad label on line {line_no}", line_no) from exc
        entries = {}
        for tok in parts[1:]:
            try:
                idx_s, val_s = tok.split(":")
                idx = int(idx_s)
                val = float(val_s)
            except ValueError as exc:
                raise ParseError(f"bad feature token {tok!r} on line {line_no}",
                                 line_no) from exc
            if idx < 1:
                raise ParseError(f"indices are 1-based, got {idx} on line {line_no}",
                                 line_no)
            entries[idx] = val
        max_idx = max(max_idx, max(entries, default=0))
        rows.append(entries)
        labels.append(label)
    if not rows:
        raise ParseError("no data lines in file", None)
    a = np.zeros((len(rows), max_idx))
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            a[i, idx - 1] = val
    return a, np.asarray(labels)


def estimate_spectral_norm(a: np.ndarray, iters: int = 30) -> float:
    """Power iteration on A^T A with a deterministic start vector."""
    a = np.asarray(a, dtype=float)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        w = a.T @ (a @ v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        sigma = np.sqrt(norm_w)
    return float(sigma)


def preprocess_dataset(a: np.ndarray, labels: np.ndarray) -> Dataset:
    """Scale features to unit spectral norm, then append an all-ones column."""
    a = np.asarray(a, dtype=float)
    sigma = estimate_spectral_norm(a)
    if sigma > 0:
        a = a / sigma
    a = np.hstack([a, np.ones((a.shape[0], 1))])
    return Dataset(features=a, labels=np.asarray(labels, dtype=float))


def load_libsvm(path) -> Dataset:
    """Parse a LIBSVM file and apply the standard preprocessing."""
    a, labels = parse_libsvm(path)
    return preprocess_dataset(a, labels)


def estimate_initial_smoothness(oracle: ObjectiveOracle, x0: np.ndarray,
                                h: float | None = None, tau: float = 10.0) -> float:
    """Finite-difference seed for the Hessian-Lipschitz backtracking parameter.

    Probes the gradient at x0 + h grad and x0 + tau h grad; the linear parts of
    the two differences cancel, leaving the second-order deviation.  The raw
    difference quotient carries a (1 - 1/tau) factor on a pure cubic, so it is
    rescaled by tau/(tau - 1) to be exact there.  Clamped below at 1e-12 so a
    quadratic objective still yields a usable positive seed.

    When h is None the probe length is chosen automatically so the estimate is
    not swamped by gradient round-off (a fixed tiny h makes the second-order
    signal ~ L h^2 ||g||^2 fall below the ~ eps ||g|| evaluation noise).
    """
    if h is not None and h <= 0:
        raise ValueError("h must be positive")
    if tau <= 1:
        raise ValueError("tau must exceed 1")
    x0 = np.asarray(x0, dtype=float)
    g0 = oracle.grad(x0)
    if np.linalg.norm(g0) < 1e-14:
        raise ZeroGradientError("gradient at x0 is (numerically) zero")
    if h is None:
        probe = 1e-3 * max(1.0, float(np.linalg.norm(x0)))
        h = probe / (tau * float(np.linalg.norm(g0)))
    s_small = h * g0
    s_big = tau * h * g0
    g_small = oracle.grad(x0 + s_small)
    g_big = oracle.grad(x0 + s_big)
    deviation = g_big - g0 - tau * (g_small - g0)
    raw = 2.0 * np.linalg.norm(deviation) / float(s_big @ s_big)
    m0 = raw * tau / (tau - 1.0)
    return max(float(m0), 1e-12)
