import numpy as np
import pytest

from conftest import central_diff_grad
from msqn.oracles import (Dataset, InvalidLabelError, ObjectiveOracle, ParseError,
                          ZeroGradientError, estimate_initial_smoothness,
                          estimate_spectral_norm, load_libsvm, make_cubic_regularized_ls,
                          make_logistic, make_quadratic, make_rosenbrock,
                          parse_libsvm, preprocess_dataset)


class TestQuadratic:
    def test_identity_instance(self):
        o = make_quadratic(np.eye(2), np.zeros(2))
        x = np.ones(2)
        assert o.f(x) == pytest.approx(1.0)
        assert np.allclose(o.grad(x), [1.0, 1.0])

    def test_least_squares_optimum(self, rng):
        a = rng.standard_normal((8, 4))
        b = rng.standard_normal(8)
        o = make_quadratic(a, b)
        x_star = np.linalg.lstsq(a, b, rcond=None)[0]
        assert np.linalg.norm(o.grad(x_star)) < 1e-10

    def test_gradient_finite_differences(self, rng):
        a = rng.standard_normal((10, 5))
        b = rng.standard_normal(10)
        o = make_quadratic(a, b)
        x = rng.standard_normal(5)
        fd = central_diff_grad(o._f, x)
        assert np.linalg.norm(o.grad(x) - fd) <= 1e-6 * max(1, np.linalg.norm(fd))

    def test_zero_hessian_lipschitz(self):
        assert make_quadratic(np.eye(2), np.zeros(2)).hessian_lipschitz == 0.0

    def test_call_counter(self):
        o = make_quadratic(np.eye(2), np.zeros(2))
        for i in range(3):
            o.grad(np.zeros(2))
        assert o.grad_calls == 3


class TestLogistic:
    def _data(self, rng, n=200, d=20):
        a = rng.standard_normal((n, d))
        labels = np.where(rng.standard_normal(n) >= 0, 1.0, -1.0)
        return Dataset(features=a, labels=labels)

    def test_value_and_grad_at_zero(self, rng):
        data = self._data(rng)
        o = make_logistic(data, reg=0.0)
        n = data.features.shape[0]
        assert o.f(np.zeros(20)) == pytest.approx(n * np.log(2.0))
        expected = -0.5 * data.features.T @ data.labels
        assert np.allclose(o.grad(np.zeros(20)), expected, atol=1e-12)

    def test_gradient_finite_differences(self, rng):
        o = make_logistic(self._data(rng), reg=1e-3)
        x = 0.1 * rng.standard_normal(20)
        fd = central_diff_grad(o._f, x, h=1e-5)
        assert np.linalg.norm(o.grad(x) - fd) <= 1e-5 * max(1, np.linalg.norm(fd))

    def test_hessian_matches_gradient_differences(self, rng):
        o = make_logistic(self._data(rng, n=50, d=6), reg=1e-2)
        x = 0.2 * rng.standard_normal(6)
        h = o.hessian(x)
        for _ in range(3):
            v = rng.standard_normal(6)
            fd = (o.grad(x + 1e-6 * v) - o.grad(x - 1e-6 * v)) / 2e-6
            assert np.linalg.norm(h @ v - fd) <= 1e-4 * max(1, np.linalg.norm(fd))

    def test_lipschitz_constant_formula(self, rng):
        data = self._data(rng, n=30, d=4)
        o = make_logistic(data, reg=0.0)
        expected = np.sum(np.linalg.norm(data.features, axis=1) ** 3) / (6 * np.sqrt(3))
        assert o.hessian_lipschitz == pytest.approx(expected)

    def test_bad_labels(self, rng):
        data = self._data(rng, n=10, d=3)
        data.labels[0] = 2.0
        with pytest.raises(InvalidLabelError):
            make_logistic(data, reg=0.0)

    def test_separable_has_no_finite_minimizer(self):
        # 1-D separable data: the gradient stays strictly negative along +x
        data = Dataset(features=np.array([[1.0], [2.0]]), labels=np.array([1.0, 1.0]))
        o = make_logistic(data, reg=0.0)
        for scale in (1.0, 10.0, 100.0):
            assert o.grad(np.array([scale]))[0] < 0.0


class TestRosenbrock:
    def test_global_minimum(self):
        o = make_rosenbrock(6)
        x = np.ones(6)
        assert o.f(x) == 0.0
        assert np.allclose(o.grad(x), 0.0)

    def test_value_at_origin_d2(self):
        o = make_rosenbrock(2)
        assert o.f(np.zeros(2)) == pytest.approx(1.0)
        assert np.allclose(o.grad(np.zeros(2)), [-2.0, 0.0])

    def test_gradient_finite_differences(self, rng):
        o = make_rosenbrock(7)
        x = rng.standard_normal(7)
        fd = central_diff_grad(o._f, x, h=1e-6)
        assert np.linalg.norm(o.grad(x) - fd) <= 1e-4 * max(1, np.linalg.norm(fd))

    def test_hessian_finite_differences(self, rng):
        o = make_rosenbrock(5)
        x = rng.standard_normal(5)
        h = o.hessian(x)
        for _ in range(3):
            v = rng.standard_normal(5)
            fd = (o.grad(x + 1e-6 * v) - o.grad(x - 1e-6 * v)) / 2e-6
            assert np.linalg.norm(h @ v - fd) <= 1e-4 * max(1, np.linalg.norm(fd))


class TestCubicRegularizedLs:
    def test_reduces_to_quadratic_when_c_zero(self, rng):
        a = rng.standard_normal((6, 3))
        b = rng.standard_normal(6)
        o1 = make_cubic_regularized_ls(a, b, 0.0)
        o2 = make_quadratic(a, b)
        x = rng.standard_normal(3)
        assert o1.f(x) == pytest.approx(o2.f(x))
        assert np.allclose(o1.grad(x), o2.grad(x))

    def test_unit_vector_instance(self):
        # f = 1/2 + 1 = 3/2 and grad = (1 + c ||x||) x = 4 e1 for c = 3
        o = make_cubic_regularized_ls(np.eye(2), np.zeros(2), 3.0)
        e1 = np.array([1.0, 0.0])
        assert o.f(e1) == pytest.approx(1.5)
        assert np.allclose(o.grad(e1), 4.0 * e1)

    def test_gradient_finite_differences(self, rng):
        a = rng.standard_normal((8, 4))
        o = make_cubic_regularized_ls(a, rng.standard_normal(8), 1.0)
        x = rng.standard_normal(4) + 0.5
        fd = central_diff_grad(o._f, x, h=1e-6)
        assert np.linalg.norm(o.grad(x) - fd) <= 1e-6 * max(1, np.linalg.norm(fd))

    def test_lipschitz_is_two_c(self):
        o = make_cubic_regularized_ls(np.eye(2), np.zeros(2), 1.5)
        assert o.hessian_lipschitz == 3.0


class TestLibsvm:
    def test_two_line_parse(self, tmp_path):
        path = tmp_path / "tiny.txt"
        path.write_text("+1 1:2.0\n-1 2:1.0\n")
        a, labels = parse_libsvm(path)
        assert np.allclose(a, [[2.0, 0.0], [0.0, 1.0]])
        assert np.allclose(labels, [1.0, -1.0])

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        with pytest.raises(ParseError):
            parse_libsvm(path)

    def test_bad_token(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("+1 junk\n")
        with pytest.raises(ParseError) as err:
            parse_libsvm(path)
        assert err.value.line_no == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(IOError):
            parse_libsvm(tmp_path / "nope.txt")

    def test_preprocessing_norm_and_ones(self, tmp_path, rng):
        lines = []
        for i in range(12):
            feats = rng.standard_normal(5)
            toks = " ".join(f"{j + 1}:{feats[j]:.6f}" for j in range(5))
            label = "+1" if rng.random() > 0.5 else "-1"
            lines.append(f"{label} {toks}")
        path = tmp_path / "rand.txt"
        path.write_text("\n".join(lines) + "\n")
        data = load_libsvm(path)
        assert np.allclose(data.features[:, -1], 1.0)
        # oracle: dense SVD of the scaled block
        block = data.features[:, :-1]
        assert np.linalg.svd(block, compute_uv=False)[0] == pytest.approx(1.0, abs=1e-6)

    def test_power_iteration_matches_svd(self, rng):
        a = rng.standard_normal((15, 6))
        exact = np.linalg.svd(a, compute_uv=False)[0]
        assert estimate_spectral_norm(a) == pytest.approx(exact, rel=1e-6)


class TestInitialSmoothness:
    def test_pure_cubic_recovers_unit_constant(self):
        # f = x^3/6 has constant third derivative 1; direct evaluation oracle
        o = ObjectiveOracle(1, lambda x: float(x[0] ** 3) / 6.0,
                            lambda x: np.array([x[0] ** 2 / 2.0]))
        m0 = estimate_initial_smoothness(o, np.array([1.0]), h=1e-4, tau=10.0)
        assert m0 == pytest.approx(1.0, abs=1e-2)

    def test_quadratic_clamps(self):
        # identity quadratic with power-of-two probe: cancellation is exact in fp
        o = make_quadratic(np.eye(3), np.zeros(3))
        m0 = estimate_initial_smoothness(o, np.ones(3), h=2.0 ** -20, tau=10.0)
        assert m0 == 1e-12

    def test_cubic_ls_bounded_by_lipschitz(self, rng):
        a = rng.standard_normal((8, 4))
        o = make_cubic_regularized_ls(a, rng.standard_normal(8), 1.0)
        x0 = rng.standard_normal(4)
        m0 = estimate_initial_smoothness(o, x0, h=1e-5, tau=10.0)
        assert 0.0 < m0 <= o.hessian_lipschitz * (1 + 1e-3)

    def test_zero_gradient_rejected(self):
        o = make_quadratic(np.eye(2), np.zeros(2))
        with pytest.raises(ZeroGradientError):
            estimate_initial_smoothness(o, np.zeros(2), h=1e-4)

    def test_auto_probe_small_on_quadratic(self, rng):
        a = rng.standard_normal((6, 3))
        o = make_quadratic(a, rng.standard_normal(6))
        m0 = estimate_initial_smoothness(o, rng.standard_normal(3), h=None)
        assert m0 <= 1e-6  # round-off floor only
