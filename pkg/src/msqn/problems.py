"""Synthetic benchmark problem constructors and descriptor parsing.

Problem descriptors are compact strings, e.g.

    quadratic:d=10:seed=1
    logistic:n=200:d=20:reg=1e-3:seed=0
    cubicls:d=15:c=1.0:seed=0
    rosenbrock:d=100
    libsvm:path=data.txt:loss=logistic:reg=1e-3

Synthesis derives per-component seeds from the master seed with a counter so
problem data never depends on which method consumes it.  Synthetic design
matrices use controlled singular spectra (condition 10 by default) and mirror
the dataset preprocessing: unit spectral norm plus an appended all-ones column.
For libsvm square loss the cubic coefficient is reg times the spectral norm of
the Hessian of the data term (norm choice recorded here, not hard-coded
elsewhere).
"""
import numpy as np

from .oracles import (Dataset, ObjectiveOracle, load_libsvm, make_cubic_regularized_ls,
                      make_logistic, make_quadratic, make_rosenbrock)

SQUARE_LOSS_REG_NORM = "spectral"  # norm used for the data-term Hessian


def _component_rng(seed: int, component: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=[int(seed), component]))


def _design_matrix(rng, n, d, cond=10.0):
    """n x d matrix with geometric singular spectrum, largest value 1."""
    a = rng.standard_normal((n, d))
    u, _, vt = np.linalg.svd(a, full_matrices=False)
    s = np.geomspace(1.0 / cond, 1.0, min(n, d))
    return (u * s) @ vt


def synth_quadratic(d: int, seed: int = 0, n: int | None = None) -> ObjectiveOracle:
    rng = _component_rng(seed, 0)
    n = n or 2 * d
    a = _design_matrix(rng, n, d)
    b = rng.standard_normal(n)
    return make_quadratic(a, b)


def synth_cubic_ls(d: int, c: float = 1.0, seed: int = 0,
                   n: int | None = None) -> ObjectiveOracle:
    rng = _component_rng(seed, 0)
    n = n or 2 * d
    a = _design_matrix(rng, n, d)
    b = rng.standard_normal(n)
    return make_cubic_regularized_ls(a, b, c)


def synth_logistic_dataset(n: int, d: int, seed: int = 0) -> Dataset:
    """Separator-plus-noise labels; final dimension d includes the ones column."""
    if d < 2:
        raise ValueError("d must be at least 2 (ones column included)")
    rng = _component_rng(seed, 0)
    raw = rng.standard_normal((n, d - 1))
    raw /= np.linalg.svd(raw, compute_uv=False)[0]
    w_true = rng.standard_normal(d - 1)
    margins = raw @ w_true + 0.1 * rng.standard_normal(n)
    labels = np.where(margins >= 0, 1.0, -1.0)
    features = np.hstack([raw, np.ones((n, 1))])
    return Dataset(features=features, labels=labels)


def synth_logistic(n: int, d: int, reg: float = 1e-3, seed: int = 0) -> ObjectiveOracle:
    return make_logistic(synth_logistic_dataset(n, d, seed), reg)


def _parse_fields(parts):
    out = {}
    for part in parts:
        if "=" not in part:
            raise ValueError(f"malformed problem field {part!r}")
        key, value = part.split("=", 1)
        out[key] = value
    return out


def build_problem(spec: str) -> ObjectiveOracle:
    """Construct an oracle from a problem descriptor string."""
    name, *rest = spec.split(":")
    fields = _parse_fields(rest)
    if name == "quadratic":
        return synth_quadratic(int(fields.get("d", 10)),
                               seed=int(fields.get("seed", 0)),
                               n=int(fields["n"]) if "n" in fields else None)
    if name == "cubicls":
        return synth_cubic_ls(int(fields.get("d", 10)),
                              c=float(fields.get("c", 1.0)),
                              seed=int(fields.get("seed", 0)),
                              n=int(fields["n"]) if "n" in fields else None)
    if name == "logistic":
        return synth_logistic(int(fields.get("n", 200)), int(fields.get("d", 20)),
                              reg=float(fields.get("reg", 1e-3)),
                              seed=int(fields.get("seed", 0)))
    if name == "rosenbrock":
        return make_rosenbrock(int(fields.get("d", 10)))
    if name == "libsvm":
        if "path" not in fields:
            raise ValueError("libsvm problems need path=...")
        data = load_libsvm(fields["path"])
        loss = fields.get("loss", "logistic")
        reg = float(fields.get("reg", 1e-3))
        if loss == "logistic":
            return make_logistic(data, reg)
        if loss == "square":
            hess_norm = float(np.linalg.svd(data.features, compute_uv=False)[0] ** 2)
            return make_cubic_regularized_ls(data.features, data.labels,
                                             reg * hess_norm)
        raise ValueError(f"unknown loss {loss!r}")
    raise ValueError(f"unknown problem {name!r}")
