import numpy as np
import pytest

from msqn.memory import memory_from_pairs
from msqn.oracles import make_quadratic
from msqn.type2 import (SocpStandardForm, Type2Problem, build_socp, format_socp,
                        socp_objective_at, solve_type2_small,
                        stationarity_residual, type2_objective)


def scalar_problem(eps, reg=2.0):
    return Type2Problem(grad=np.array([1.0]), grad_diffs=np.array([[-1.0]]),
                        directions=np.array([[1.0]]), errors=np.array([eps]),
                        reg=reg)


def grid_solve_1d(p, lo=-10.0, hi=10.0, res=1e-4):
    grid = np.arange(lo, hi, res)
    vals = [type2_objective(p, np.array([a])) for a in grid]
    i = int(np.argmin(vals))
    return grid[i], vals[i]


class TestObjective:
    def test_zero_step_is_grad_norm(self, rng):
        p = Type2Problem(grad=rng.standard_normal(5),
                         grad_diffs=rng.standard_normal((5, 2)),
                         directions=rng.standard_normal((5, 2)),
                         errors=np.abs(rng.standard_normal(2)), reg=1.0)
        assert type2_objective(p, np.zeros(2)) == pytest.approx(
            np.linalg.norm(p.grad))

    def test_scalar_arithmetic(self):
        assert type2_objective(scalar_problem(0.0), np.array([0.5])) \
            == pytest.approx(0.75)
        assert type2_objective(scalar_problem(1.0), np.array([0.0])) \
            == pytest.approx(1.0)


class TestSocp:
    def test_zero_grad_diffs_edge(self):
        p = Type2Problem(grad=np.array([2.0, 0.0]), grad_diffs=np.zeros((2, 1)),
                         directions=np.array([[1.0], [0.0]]),
                         errors=np.array([0.0]), reg=1.0)
        form = build_socp(p)
        assert np.allclose(form.b[:1], 0.0)           # projector onto G is zero
        assert form.b[1] == pytest.approx(2.0)        # full gradient off-span

    def test_scalar_roundtrip(self, rng):
        p = scalar_problem(0.3, reg=1.7)
        form = build_socp(p)
        for _ in range(100):
            alpha = rng.standard_normal(1)
            assert socp_objective_at(form, alpha) == pytest.approx(
                type2_objective(p, alpha), abs=1e-10)

    def test_random_roundtrip(self, rng):
        for _ in range(30):
            d, k = 7, 3
            p = Type2Problem(grad=rng.standard_normal(d),
                             grad_diffs=rng.standard_normal((d, k)),
                             directions=rng.standard_normal((d, k)),
                             errors=np.abs(rng.standard_normal(k)),
                             reg=abs(rng.standard_normal()) + 0.1)
            form = build_socp(p)
            alpha = rng.standard_normal(k)
            assert socp_objective_at(form, alpha) == pytest.approx(
                type2_objective(p, alpha), rel=1e-10, abs=1e-10)

    def test_block_shapes_match_display(self, rng):
        # equality rows: k (norm link) + 1 (off-span) + 1 (rotated) + k = 2k + 2
        k = 3
        p = Type2Problem(grad=rng.standard_normal(6),
                         grad_diffs=rng.standard_normal((6, k)),
                         directions=rng.standard_normal((6, k)),
                         errors=np.abs(rng.standard_normal(k)), reg=1.0)
        form = build_socp(p)
        rows = 2 * k + 2
        assert form.a0.shape == (rows, 2 * k)
        assert form.a1.shape == (rows, k + 2)
        assert form.a2.shape == (rows, k + 2)
        assert form.b.shape == (rows,)
        assert form.c0.shape == (2 * k,)
        assert form.c1.shape == (k + 2,)
        assert form.c2.shape == (k + 2,)

    def test_text_export(self):
        form = build_socp(scalar_problem(0.5))
        text = format_socp(form)
        assert text.startswith("# c0 1x2")
        assert "# b" in text
        # every labeled block is present
        for name in ("c0", "c1", "c2", "a0", "a1", "a2", "b"):
            assert f"# {name} " in text


class TestSolveSmall:
    def test_zero_gradient(self):
        p = Type2Problem(grad=np.zeros(3), grad_diffs=np.eye(3),
                         directions=np.eye(3), errors=np.zeros(3), reg=1.0)
        assert np.allclose(solve_type2_small(p), 0.0)

    def test_scalar_instances_match_grid(self):
        for eps in (0.0, 1.0):
            p = scalar_problem(eps)
            alpha = solve_type2_small(p)
            grid_arg, grid_val = grid_solve_1d(p)
            assert type2_objective(p, alpha) <= grid_val + 1e-3
            assert alpha[0] == pytest.approx(grid_arg, abs=2e-3)

    def test_never_worse_than_null_step(self, rng):
        for _ in range(20):
            d, k = 6, 3
            p = Type2Problem(grad=rng.standard_normal(d),
                             grad_diffs=rng.standard_normal((d, k)),
                             directions=rng.standard_normal((d, k)),
                             errors=np.abs(rng.standard_normal(k)),
                             reg=abs(rng.standard_normal()) + 0.1)
            alpha = solve_type2_small(p)
            assert type2_objective(p, alpha) \
                <= np.linalg.norm(p.grad) + 1e-10

    def test_stationarity_certificate(self, rng):
        for _ in range(10):
            d, k = 8, 4
            p = Type2Problem(grad=rng.standard_normal(d),
                             grad_diffs=rng.standard_normal((d, k)),
                             directions=rng.standard_normal((d, k)),
                             errors=np.abs(rng.standard_normal(k)), reg=0.7)
            alpha = solve_type2_small(p)
            assert stationarity_residual(p, alpha) \
                <= 1e-5 * max(1.0, np.linalg.norm(p.grad))

    def test_size_limit(self):
        p = Type2Problem(grad=np.zeros(30), grad_diffs=np.zeros((30, 26)),
                         directions=np.zeros((30, 26)), errors=np.zeros(26),
                         reg=1.0)
        with pytest.raises(ValueError):
            solve_type2_small(p)

    def test_broyden_type2_equivalence_on_quadratic(self, rng):
        # with reg ~ 0 and tiny errors the step is - D (G^T G)^{-1} G^T grad
        o = make_quadratic(rng.standard_normal((10, 6)), rng.standard_normal(10))
        x = rng.standard_normal(6)
        y = x[:, None] + 1e-6 * rng.standard_normal((6, 3))
        mem = memory_from_pairs(y, np.tile(x[:, None], (1, 3)), o, center=x)
        g = o.grad(x)
        p = Type2Problem(grad=g, grad_diffs=mem.grad_diffs,
                         directions=mem.directions, errors=np.zeros(3),
                         reg=1e-16)
        alpha = solve_type2_small(p)
        gg = mem.grad_diffs
        expected = -np.linalg.solve(gg.T @ gg, gg.T @ g)
        step = mem.directions @ alpha
        closed = mem.directions @ expected
        assert np.linalg.norm(step - closed) <= 1e-6 * max(1, np.linalg.norm(closed))
