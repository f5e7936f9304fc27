import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from trithp.tensor import (
    InvalidMaskError,
    ShapeError,
    Tensor,
    concat_cols,
    dropout,
    gather_rows,
    grad_check,
    layer_norm,
    softmax_rows,
    take_per_row,
)


def fd_grad(f, x, h=1e-5):
    """Central-difference gradient of scalar f(x) w.r.t. numpy array x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return g


class TestMatmul:
    def test_identity(self):
        b = Tensor([[1.0, 2.0], [3.0, 4.0]])
        out = Tensor(np.eye(2)) @ b
        np.testing.assert_array_equal(out.data, b.data)

    def test_row_sums(self):
        out = Tensor([[1.0, 2.0], [3.0, 4.0]]) @ Tensor([[1.0], [1.0]])
        np.testing.assert_array_equal(out.data, [[3.0], [7.0]])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            Tensor(np.zeros((2, 3))) @ Tensor(np.zeros((2, 2)))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        w = rng.normal(size=(3, 2))  # fixed projection to a scalar

        loss = ((a @ b) * w).sum()
        loss.backward()
        fd_a = fd_grad(lambda: float(((a.data @ b.data) * w).sum()), a.data)
        fd_b = fd_grad(lambda: float(((a.data @ b.data) * w).sum()), b.data)
        np.testing.assert_allclose(a.grad, fd_a, rtol=1e-6)
        np.testing.assert_allclose(b.grad, fd_b, rtol=1e-6)


class TestSoftmaxRows:
    def test_uniform_on_equal_inputs(self):
        out = softmax_rows(Tensor([[0.0, 0.0, 0.0]]))
        np.testing.assert_allclose(out.data, [[1 / 3, 1 / 3, 1 / 3]], atol=1e-15)

    def test_masked_entry_exactly_zero(self):
        out = softmax_rows(Tensor([[5.0, 5.0, 5.0]]),
                           mask=np.array([[True, True, False]]))
        np.testing.assert_array_equal(out.data, [[0.5, 0.5, 0.0]])

    def test_direct_evaluation(self):
        x = np.array([1.0, 2.0, 3.0])
        expected = np.exp(x) / np.exp(x).sum()
        out = softmax_rows(Tensor(x[None, :]))
        np.testing.assert_allclose(out.data[0], expected, rtol=1e-12)
        np.testing.assert_allclose(
            out.data[0], [0.09003057, 0.24472847, 0.66524096], atol=1e-8)

    def test_fully_masked_row_rejected(self):
        with pytest.raises(InvalidMaskError):
            softmax_rows(Tensor(np.zeros((2, 2))),
                         mask=np.array([[True, True], [False, False]]))

    @given(arrays(np.float64, (3, 4), elements=st.floats(-30, 30)))
    @settings(max_examples=50, deadline=None)
    def test_rows_sum_to_one(self, x):
        out = softmax_rows(Tensor(x)).data
        assert np.all(out >= 0)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)

    def test_gradient(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
        mask = np.array([[True, True, True, False]] * 2)
        w = rng.normal(size=(2, 4))
        loss = (softmax_rows(x, mask) * w).sum()
        loss.backward()
        fd = fd_grad(lambda: float((softmax_rows(Tensor(x.data), mask).data * w).sum()),
                     x.data)
        np.testing.assert_allclose(x.grad, fd, atol=1e-8)


class TestLayerNorm:
    def test_constant_row_maps_to_bias(self):
        out = layer_norm(Tensor([[4.0, 4.0, 4.0]]), Tensor(np.ones(3)),
                         Tensor(np.zeros(3)), eps=1e-6)
        np.testing.assert_allclose(out.data, 0.0, atol=1e-12)

    def test_symmetric_standardization(self):
        out = layer_norm(Tensor([[1.0, 3.0]]), Tensor(np.ones(2)),
                         Tensor(np.zeros(2)), eps=0.0)
        np.testing.assert_allclose(out.data, [[-1.0, 1.0]], atol=1e-12)

    def test_unit_statistics(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(4, 16))
        out = layer_norm(Tensor(x), Tensor(np.ones(16)), Tensor(np.zeros(16)),
                         eps=1e-12).data
        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.var(axis=1), 1.0, atol=1e-9)

    def test_gradient(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.normal(size=(2, 5)), requires_grad=True)
        g = Tensor(rng.normal(size=5), requires_grad=True)
        b = Tensor(rng.normal(size=5), requires_grad=True)
        w = rng.normal(size=(2, 5))

        def value():
            return float((layer_norm(Tensor(x.data), Tensor(g.data),
                                     Tensor(b.data)).data * w).sum())

        loss = (layer_norm(x, g, b) * w).sum()
        loss.backward()
        np.testing.assert_allclose(x.grad, fd_grad(value, x.data), atol=1e-5)
        np.testing.assert_allclose(g.grad, fd_grad(value, g.data), atol=1e-6)
        np.testing.assert_allclose(b.grad, fd_grad(value, b.data), atol=1e-6)


class TestSoftplus:
    def test_at_zero(self):
        assert Tensor(0.0).softplus().item() == pytest.approx(np.log(2.0), abs=1e-15)

    def test_large_positive_asymptote(self):
        assert Tensor(100.0).softplus().item() == pytest.approx(100.0, abs=1e-10)

    def test_large_negative_positive_and_tiny(self):
        v = Tensor(-100.0).softplus().item()
        assert v > 0
        assert v == pytest.approx(np.exp(-100.0), rel=1e-6)


class TestRelu:
    def test_basic(self):
        np.testing.assert_array_equal(
            Tensor([-1.0, 0.0, 2.0]).relu().data, [0.0, 0.0, 2.0])

    def test_all_negative(self):
        np.testing.assert_array_equal(
            Tensor([[-3.0, -0.5]]).relu().data, [[0.0, 0.0]])

    def test_gradient_mask(self):
        x = Tensor(np.array([-2.0, -0.3, 0.4, 1.7]), requires_grad=True)
        x.relu().sum().backward()
        np.testing.assert_array_equal(x.grad, (x.data > 0).astype(float))


class TestDropout:
    def test_rate_zero_identity(self):
        x = Tensor(np.ones((3, 3)))
        out = dropout(x, 0.0, np.random.default_rng(0), training=True)
        np.testing.assert_array_equal(out.data, x.data)

    def test_inference_identity(self):
        x = Tensor(np.ones((3, 3)))
        out = dropout(x, 0.9, np.random.default_rng(0), training=False)
        np.testing.assert_array_equal(out.data, x.data)

    def test_mean_preserved(self):
        x = Tensor(np.ones(100_000))
        out = dropout(x, 0.5, np.random.default_rng(7), training=True)
        assert 0.97 <= out.data.mean() <= 1.03

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            dropout(Tensor(np.ones(2)), 1.0, np.random.default_rng(0), True)


class TestBackward:
    def test_sum_gives_ones(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        x.sum().backward()
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_product_rule(self):
        x = Tensor(3.0, requires_grad=True)
        y = Tensor(4.0, requires_grad=True)
        (x * y).backward()
        assert x.grad == 4.0 and y.grad == 3.0

    def test_non_scalar_rejected(self):
        with pytest.raises(ValueError, match="scalar"):
            Tensor(np.ones(3), requires_grad=True).backward()

    def test_reuse_accumulates(self):
        x = Tensor(2.0, requires_grad=True)
        (x * x + x).backward()
        assert x.grad == pytest.approx(5.0)


class TestStructuredOps:
    def test_concat_cols_and_grad(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        b = Tensor(np.full((2, 3), 2.0), requires_grad=True)
        out = concat_cols([a, b])
        assert out.shape == (2, 5)
        (out * np.arange(10.0).reshape(2, 5)).sum().backward()
        np.testing.assert_array_equal(a.grad, [[0, 1], [5, 6]])
        np.testing.assert_array_equal(b.grad, [[2, 3, 4], [7, 8, 9]])

    def test_gather_rows_accumulates_repeats(self):
        x = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
        out = gather_rows(x, [0, 0, 2])
        np.testing.assert_array_equal(out.data, [[0, 1], [0, 1], [4, 5]])
        out.sum().backward()
        np.testing.assert_array_equal(x.grad, [[2, 2], [0, 0], [1, 1]])

    def test_take_per_row(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        out = take_per_row(x, [2, 0])
        np.testing.assert_array_equal(out.data, [2.0, 3.0])
        out.sum().backward()
        np.testing.assert_array_equal(x.grad, [[0, 0, 1], [1, 0, 0]])


class TestGradCheck:
    def test_square(self):
        x = Tensor(3.0, requires_grad=True)
        passed, report = grad_check(lambda: x * x, {"x": x})
        assert passed
        assert report["x"] < 1e-7

    def test_softmax_cross_entropy_composite(self):
        rng = np.random.default_rng(5)
        x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)

        def f():
            p = softmax_rows(x)
            return -take_per_row(p, [0, 2, 1]).log().sum()

        passed, report = grad_check(f, {"x": x}, tol=1e-6)
        assert passed

    def test_nonfinite_objective_rejected(self):
        x = Tensor(0.0, requires_grad=True)
        with pytest.raises(FloatingPointError):
            grad_check(lambda: x.log(), {"x": x})


def test_seeded_runs_bitwise_identical():
    def run():
        rng = np.random.default_rng(42)
        x = Tensor(rng.normal(size=(4, 4)), requires_grad=True)
        y = softmax_rows(x @ x.T)
        z = dropout(y, 0.3, np.random.default_rng(1), training=True).sum()
        z.backward()
        return z.data.copy(), x.grad.copy()

    v1, g1 = run()
    v2, g2 = run()
    assert np.array_equal(v1, v2)
    assert np.array_equal(g1, g2)
