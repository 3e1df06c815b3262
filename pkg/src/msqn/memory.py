"""Secant-pair memory: the direction block, gradient differences, and error vector.

Each column of the memory is one secant pair (y_i, z_i).  The direction block
stores (y_i - z_i)/||y_i - z_i|| and the gradient-difference block stores
(grad(y_i) - grad(z_i))/||y_i - z_i||, so the latter approximates the Hessian
applied to the former.  The per-column error

    e_i = ||y_i - z_i|| + 2 ||z_i - x||

bounds how stale that approximation is relative to the current center x and is
recomputed at every new center.

Update rules
------------
forward      one unit direction per step, orthogonal to the retained block, along
             the projected-out part of the gradient; keeps the block orthonormal
             and the gradient inside its span (2 gradient calls per update).
random       a fresh batch of random orthonormal directions probed around the
             center (N + 1 gradient calls).
iterates     history of iterate differences plus the newest steepest forward
             estimate (2 calls); condition number uncontrolled, prune after.
greedy       like ``iterates`` but also keeps every past forward estimate
             (2 calls); prune after.
ortho-batch  orthonormalized recent step/forward differences, padded with random
             orthonormal directions to full capacity, probed around the center
             (N + 1 calls).
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import RankDeficientError, condition_number, qr_orthonormalize, spectral_norm

DEGENERATE_REL_TOL = 1e-12  # residual gradient mass below this skips the append


class DegenerateDirectionError(ValueError):
    """The current gradient already lies in the span of the retained block.

    Carries the gradient so the caller can proceed with the existing memory
    without a second oracle call.
    """

    def __init__(self, msg, grad=None):
        super().__init__(msg)
        self.grad = grad


@dataclass
class DirectionMemory:
    """The tuple (Y, Z, D, G, eps) plus cached norms and online-rule state."""

    y_points: np.ndarray       # d x k, newer point of each pair
    z_points: np.ndarray       # d x k, base point of each pair
    directions: np.ndarray     # d x k, unit (y - z) columns
    grad_diffs: np.ndarray     # d x k, (grad y - grad z) / ||y - z||
    errors: np.ndarray         # k, secant error at the current center
    pair_norms: np.ndarray     # k, ||y_i - z_i||
    capacity: int
    rule: str = ""
    norm_directions: float = 0.0   # spectral norm of the direction block
    kappa: float = float("inf")
    # caches used by the online rules
    prev_center: np.ndarray | None = None
    prev_center_grad: np.ndarray | None = None
    prev_forward: np.ndarray | None = None
    prev_forward_grad: np.ndarray | None = None
    raw_diffs: list = field(default_factory=list)  # recent raw step differences

    @property
    def k(self) -> int:
        return self.directions.shape[1]

    @property
    def dim(self) -> int:
        return self.directions.shape[0]

    @staticmethod
    def empty(dim: int, capacity: int, rule: str = "") -> "DirectionMemory":
        z = np.zeros((dim, 0))
        return DirectionMemory(
            y_points=z.copy(), z_points=z.copy(), directions=z.copy(),
            grad_diffs=z.copy(), errors=np.zeros(0), pair_norms=np.zeros(0),
            capacity=int(capacity), rule=rule,
        )


def compute_error_vector(mem: DirectionMemory, x: np.ndarray) -> np.ndarray:
    """Per-column error  e_i = ||y_i - z_i|| + 2 ||z_i - x||  at center x."""
    if mem.k == 0:
        return np.zeros(0)
    x = np.asarray(x, dtype=float)
    center_dist = np.linalg.norm(mem.z_points - x[:, None], axis=0)
    return mem.pair_norms + 2.0 * center_dist


def _refresh(mem: DirectionMemory, x: np.ndarray) -> DirectionMemory:
    """Recompute the error vector and cached norms at center x."""
    if mem.k == 0:
        return replace(mem, errors=np.zeros(0), norm_directions=0.0,
                       kappa=float("inf"))
    return replace(
        mem,
        errors=compute_error_vector(mem, x),
        norm_directions=spectral_norm(mem.directions),
        kappa=condition_number(mem.directions),
    )


def recenter(mem: DirectionMemory, x: np.ndarray) -> DirectionMemory:
    """Re-anchor the error vector (and cached norms) at a new center."""
    return _refresh(mem, np.asarray(x, dtype=float))


def _append_pair(mem: DirectionMemory, y, z, grad_y, grad_z):
    """Append one secant pair; returns None for a zero-length pair."""
    diff = y - z
    norm = float(np.linalg.norm(diff))
    if norm == 0.0:
        return None
    return replace(
        mem,
        y_points=np.column_stack([mem.y_points, y]),
        z_points=np.column_stack([mem.z_points, z]),
        directions=np.column_stack([mem.directions, diff / norm]),
        grad_diffs=np.column_stack([mem.grad_diffs, (grad_y - grad_z) / norm]),
        pair_norms=np.append(mem.pair_norms, norm),
        errors=np.append(mem.errors, norm),  # placeholder until _refresh
    )


def _drop_oldest(mem: DirectionMemory, count: int = 1) -> DirectionMemory:
    return replace(
        mem,
        y_points=mem.y_points[:, count:], z_points=mem.z_points[:, count:],
        directions=mem.directions[:, count:], grad_diffs=mem.grad_diffs[:, count:],
        pair_norms=mem.pair_norms[count:], errors=mem.errors[count:],
    )


def update_forward_estimate(mem: DirectionMemory, oracle, x: np.ndarray,
                            h: float) -> tuple[DirectionMemory, np.ndarray]:
    """Orthogonal-forward-estimate update: 2 gradient calls, orthonormal block.

    Drops the oldest column when at capacity, then appends the unit direction
    along the part of grad(x) orthogonal to the retained block, probing the
    gradient at x + h d.  Keeps the block orthonormal and grad(x) in its span.
    Returns the updated memory together with grad(x) for reuse by the caller.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    g = oracle.grad(x)
    work = _drop_oldest(mem) if mem.k >= mem.capacity else mem
    d_block = work.directions
    if work.k:
        residual = g - d_block @ (d_block.T @ g)
        # second projection pass: one pass leaves O(eps ||g|| / ||residual||)
        # contamination when the gradient is nearly spanned
        residual = residual - d_block @ (d_block.T @ residual)
    else:
        residual = g.copy()
    res_norm = np.linalg.norm(residual)
    g_norm = np.linalg.norm(g)
    if g_norm == 0.0 or res_norm < DEGENERATE_REL_TOL * g_norm:
        raise DegenerateDirectionError(
            "gradient already spanned by the direction block", grad=g)
    d_new = -residual / res_norm
    x_half = x + h * d_new
    g_half = oracle.grad(x_half)
    # store the intended unit direction and length h directly: recomputing
    # (x + h d) - x at small h loses ~eps ||x|| / h of the direction accuracy
    work = replace(
        work,
        y_points=np.column_stack([work.y_points, x_half]),
        z_points=np.column_stack([work.z_points, x]),
        directions=np.column_stack([work.directions, d_new]),
        grad_diffs=np.column_stack([work.grad_diffs, (g_half - g) / h]),
        pair_norms=np.append(work.pair_norms, h),
        errors=np.append(work.errors, h),
        prev_center=x, prev_center_grad=g,
        prev_forward=x_half, prev_forward_grad=g_half,
    )
    return _refresh(work, x), g


def update_random_orthogonal(mem: DirectionMemory, oracle, x: np.ndarray,
                             h: float, n: int, rng) -> tuple[DirectionMemory, np.ndarray]:
    """Fresh batch of n random orthonormal directions probed around x.

    Consumes n + 1 gradient calls; deterministic given the rng (seed or
    Generator).  Retries the Gaussian draw up to 5 times on rank deficiency.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    if n > d:
        raise ValueError("memory size cannot exceed the dimension")
    rng = np.random.default_rng(rng)
    q = None
    for _ in range(5):
        try:
            q = qr_orthonormalize(rng.standard_normal((d, n)))
            break
        except RankDeficientError:
            continue
    if q is None:
        raise RankDeficientError("could not draw a full-rank random block")
    g = oracle.grad(x)
    z = np.tile(x[:, None], (1, n))
    y = z + h * q
    grad_diffs = np.empty((d, n))
    for i in range(n):
        grad_diffs[:, i] = (oracle.grad(y[:, i]) - g) / h
    out = DirectionMemory(
        y_points=y, z_points=z, directions=q, grad_diffs=grad_diffs,
        errors=np.full(n, h), pair_norms=np.full(n, h),
        capacity=mem.capacity, rule=mem.rule,
        norm_directions=spectral_norm(q), kappa=condition_number(q),
        prev_center=x, prev_center_grad=g,
    )
    return out, g


def _online_update(mem, oracle, x, h, keep_old_forward):
    """Shared body of the iterates-only and greedy updates (2 gradient calls)."""
    x = np.asarray(x, dtype=float)
    g = oracle.grad(x)
    x_half = x - h * g
    g_half = oracle.grad(x_half)

    work = mem
    if not keep_old_forward and work.k and work.prev_forward is not None:
        work = replace(work, y_points=work.y_points[:, :-1],
                       z_points=work.z_points[:, :-1],
                       directions=work.directions[:, :-1],
                       grad_diffs=work.grad_diffs[:, :-1],
                       pair_norms=work.pair_norms[:-1], errors=work.errors[:-1])

    new_pairs = []
    if keep_old_forward and mem.prev_forward is not None:
        new_pairs.append((x, mem.prev_forward, g, mem.prev_forward_grad))
    if not keep_old_forward and mem.prev_center is not None:
        new_pairs.append((x, mem.prev_center, g, mem.prev_center_grad))
    new_pairs.append((x_half, x, g_half, g))

    for y, z, gy, gz in new_pairs:
        appended = _append_pair(work, y, z, gy, gz)
        if appended is None:
            continue  # coincident pair: column skipped, k unchanged
        work = appended
        if work.k > work.capacity:
            work = _drop_oldest(work, work.k - work.capacity)

    work = replace(work, prev_center=x, prev_center_grad=g,
                   prev_forward=x_half, prev_forward_grad=g_half)
    return _refresh(work, x), g


def update_iterates_only(mem: DirectionMemory, oracle, x: np.ndarray,
                         h: float) -> tuple[DirectionMemory, np.ndarray]:
    """Iterate-difference history plus the newest steepest forward estimate.

    The previous forward column is replaced each step; the iterate pair
    (x, x_prev) is appended when the two points are distinct (a coincident
    pair is skipped).  2 gradient calls.
    """
    return _online_update(mem, oracle, x, h, keep_old_forward=False)


def update_greedy(mem: DirectionMemory, oracle, x: np.ndarray,
                  h: float) -> tuple[DirectionMemory, np.ndarray]:
    """Greedy history: keeps past forward estimates and iterate gaps alike.

    Appends the gap pair (x, x_prev_forward) and the fresh forward pair, so
    each outer iteration adds two columns (oldest evicted at capacity).
    """
    return _online_update(mem, oracle, x, h, keep_old_forward=True)


def prune(mem: DirectionMemory, kappa_max: float) -> DirectionMemory:
    """Drop oldest columns until the condition number is at most kappa_max.

    Never drops the newest column; at least one column survives.
    """
    if kappa_max < 1:
        raise ValueError("kappa_max must be at least 1")
    work = mem
    while work.k > 1 and condition_number(work.directions) > kappa_max:
        work = _drop_oldest(work)
    return replace(work, norm_directions=spectral_norm(work.directions),
                   kappa=condition_number(work.directions))


def _orthonormal_with_drop(cols: np.ndarray):
    """QR with dependent columns removed; returns (q, kept_indices)."""
    kept = list(range(cols.shape[1]))
    while kept:
        try:
            q = qr_orthonormalize(cols[:, kept])
            return q, kept
        except RankDeficientError as exc:
            if exc.column is None:
                raise
            kept.pop(exc.column)
    return np.zeros((cols.shape[0], 0)), []


def _probe_batch(oracle, x, g, dirs, h, capacity, rule):
    """Build a batch memory by finite-differencing along unit directions."""
    n = dirs.shape[1]
    z = np.tile(x[:, None], (1, n))
    y = z + h * dirs
    grad_diffs = np.empty_like(dirs)
    for i in range(n):
        grad_diffs[:, i] = (oracle.grad(y[:, i]) - g) / h
    return DirectionMemory(
        y_points=y, z_points=z, directions=dirs, grad_diffs=grad_diffs,
        errors=np.full(n, h), pair_norms=np.full(n, h),
        capacity=capacity, rule=rule,
        norm_directions=spectral_norm(dirs), kappa=condition_number(dirs),
        prev_center=x, prev_center_grad=g,
    )


def orthogonalize_batch(mem: DirectionMemory, oracle, x: np.ndarray,
                        h: float) -> tuple[DirectionMemory, np.ndarray]:
    """Re-center the memory on orthonormalized pair differences.

    The direction block becomes an orthonormal basis of the current y - z
    differences (each column oriented to positive inner product with its
    source; dependent columns are dropped), and the gradient differences are
    re-probed at x: k + 1 gradient calls, errors all equal to h.
    """
    if mem.k == 0:
        raise ValueError("cannot orthogonalize an empty memory")
    x = np.asarray(x, dtype=float)
    diffs = mem.y_points - mem.z_points
    q, kept = _orthonormal_with_drop(diffs)
    if not kept:
        raise RankDeficientError("no independent pair differences")
    for j, src in enumerate(kept):
        if q[:, j] @ diffs[:, src] < 0:
            q[:, j] = -q[:, j]
    g = oracle.grad(x)
    out = _probe_batch(oracle, x, g, q, h, mem.capacity, mem.rule)
    out = replace(out, prev_forward=mem.prev_forward,
                  prev_forward_grad=mem.prev_forward_grad,
                  raw_diffs=mem.raw_diffs)
    return out, g


def update_ortho_batch_rule(mem: DirectionMemory, oracle, x: np.ndarray,
                            h: float, n: int, rng) -> tuple[DirectionMemory, np.ndarray]:
    """Batch rule driven by recent step history instead of random directions.

    Maintains the raw differences a greedy history would produce (forward
    estimate and gap to the previous forward point), orthonormalizes them
    newest-first so the current gradient direction always survives, and pads
    with random orthonormal directions up to min(n, d) columns before probing.
    n + 1 gradient calls.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    n = min(n, d)
    rng = np.random.default_rng(rng)
    g = oracle.grad(x)

    raw = list(mem.raw_diffs)
    if mem.prev_forward is not None:
        raw.append(x - mem.prev_forward)
    raw.append(-h * g)
    raw = raw[-n:]

    cols = np.column_stack(list(reversed(raw)))  # newest first
    q, kept = _orthonormal_with_drop(cols)
    for j, src in enumerate(kept):
        if q[:, j] @ cols[:, src] < 0:
            q[:, j] = -q[:, j]
    while q.shape[1] < n:
        cand = rng.standard_normal(d)
        cand -= q @ (q.T @ cand)
        norm = np.linalg.norm(cand)
        if norm < 1e-8:
            continue
        q = np.column_stack([q, cand / norm])

    out = _probe_batch(oracle, x, g, q, h, mem.capacity, mem.rule)
    out = replace(out, prev_forward=x - h * g, raw_diffs=raw)
    return out, g


UPDATE_RULES = ("forward", "random", "iterates", "greedy", "ortho-batch")


def apply_rule(rule: str, mem: DirectionMemory, oracle, x: np.ndarray,
               h: float, n: int, kappa_max: float, rng) -> tuple[DirectionMemory, np.ndarray]:
    """Dispatch one memory update; iterates/greedy are pruned to kappa_max."""
    if rule == "forward":
        return update_forward_estimate(mem, oracle, x, h)
    if rule == "random":
        return update_random_orthogonal(mem, oracle, x, h, n, rng)
    if rule == "iterates":
        out, g = update_iterates_only(mem, oracle, x, h)
        return prune(out, kappa_max), g
    if rule == "greedy":
        out, g = update_greedy(mem, oracle, x, h)
        return prune(out, kappa_max), g
    if rule == "ortho-batch":
        return update_ortho_batch_rule(mem, oracle, x, h, n, rng)
    raise ValueError(f"unknown update rule {rule!r}")


def memory_from_pairs(y_points: np.ndarray, z_points: np.ndarray, oracle,
                      center: np.ndarray, capacity: int | None = None) -> DirectionMemory:
    """Build a memory directly from explicit secant pairs (2k gradient calls)."""
    y_points = np.atleast_2d(np.asarray(y_points, dtype=float))
    z_points = np.atleast_2d(np.asarray(z_points, dtype=float))
    k = y_points.shape[1]
    mem = DirectionMemory.empty(y_points.shape[0], capacity or k)
    for i in range(k):
        grad_y = oracle.grad(y_points[:, i])
        grad_z = oracle.grad(z_points[:, i])
        appended = _append_pair(mem, y_points[:, i], z_points[:, i], grad_y, grad_z)
        if appended is None:
            raise ValueError(f"pair {i} has zero length")
        mem = appended
    return _refresh(mem, np.asarray(center, dtype=float))
