"""Unit tests for the reverse-mode tape: shapes, values, and gradients."""

import numpy as np
import pytest

from seirfit import autodiff as ad
from seirfit.autodiff import ShapeError, Tensor


def rand(rng, *shape):
    return Tensor(rng.uniform(-1.0, 1.0, size=shape), requires_grad=True)


class TestTensorBasics:
    def test_scalars_and_vectors_become_2d(self):
        assert Tensor(3.0).shape == (1, 1)
        assert Tensor([1.0, 2.0, 3.0]).shape == (3, 1)

    def test_higher_rank_input_rejected(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((2, 2, 2)))

    def test_non_finite_input_rejected(self):
        with pytest.raises(ValueError):
            Tensor([np.nan, 1.0])

    def test_item_requires_scalar(self):
        with pytest.raises(ShapeError):
            Tensor([[1.0, 2.0]]).item()


class TestForwardValues:
    def test_add_matches_numpy(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        np.testing.assert_allclose(ad.add(Tensor(a), Tensor(b)).data, a + b)

    def test_matmul_matches_numpy(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
        np.testing.assert_allclose(ad.matmul(Tensor(a), Tensor(b)).data, a @ b)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ShapeError):
            ad.add(Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 2))))
        with pytest.raises(ShapeError):
            ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(2)
        out = ad.softmax_rows(Tensor(rng.normal(size=(5, 7)))).data
        np.testing.assert_allclose(out.sum(axis=1), np.ones(5), atol=1e-12)

    def test_concat_and_slice_roundtrip(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=(2, 3)), rng.normal(size=(2, 4))
        cat = ad.concat_cols([Tensor(a), Tensor(b)])
        np.testing.assert_allclose(ad.slice_cols(cat, 3, 7).data, b)

    def test_cross_entropy_uniform_logits(self):
        logits = Tensor(np.zeros((4, 8)))
        loss = ad.cross_entropy(logits, np.array([0, 3, 5, 7]))
        assert loss.item() == pytest.approx(np.log(8.0))


class TestBackward:
    def test_backward_requires_scalar(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ShapeError):
            ad.backward(ad.add(x, x))

    def test_gradient_accumulates_over_reuse(self):
        x = Tensor([[2.0]], requires_grad=True)
        ad.backward(ad.add(ad.mul(x, x), x))  # d/dx (x^2 + x) = 2x + 1
        assert x.grad[0, 0] == pytest.approx(5.0)

    def test_gradients_reset_between_calls(self):
        x = Tensor([[1.0]], requires_grad=True)
        for _ in range(3):
            ad.backward(ad.mul(x, x))
        assert x.grad[0, 0] == pytest.approx(2.0)

    def test_deep_chain_does_not_recurse(self):
        x = Tensor([[1.0]], requires_grad=True)
        y = x
        for _ in range(5000):
            y = ad.scale(y, 1.0)
        ad.backward(y)
        assert x.grad[0, 0] == pytest.approx(1.0)


class TestGradCheck:
    """Central finite differences against the tape, primitive by primitive."""

    TOL = 1e-5

    def test_elementwise_binary_ops(self):
        rng = np.random.default_rng(10)
        for op in (ad.add, ad.sub, ad.mul):
            a, b = rand(rng, 3, 4), rand(rng, 3, 4)
            err = ad.grad_check(lambda x, y: ad.tsum(op(x, y)), [a, b])
            assert err < self.TOL, op.__name__

    def test_scale_and_transpose(self):
        rng = np.random.default_rng(11)
        a = rand(rng, 3, 4)
        assert ad.grad_check(lambda x: ad.tsum(ad.scale(x, -1.7)), [a]) < self.TOL
        assert ad.grad_check(
            lambda x: ad.tsum(ad.mul(ad.transpose(x), ad.transpose(x))), [a]) < self.TOL

    def test_matmul_and_add_bias(self):
        rng = np.random.default_rng(12)
        a, b = rand(rng, 3, 4), rand(rng, 4, 2)
        assert ad.grad_check(lambda x, y: ad.tsum(ad.matmul(x, y)), [a, b]) < self.TOL
        x, bias = rand(rng, 3, 4), rand(rng, 1, 4)
        assert ad.grad_check(lambda u, v: ad.tsum(ad.add_bias(u, v)), [x, bias]) < self.TOL

    def test_smooth_nonlinearities(self):
        rng = np.random.default_rng(13)
        a = rand(rng, 3, 4)
        for op in (ad.sigmoid, ad.tanh):
            assert ad.grad_check(lambda x: ad.tsum(op(x)), [a]) < self.TOL, op.__name__

    def test_relu_away_from_kink(self):
        rng = np.random.default_rng(14)
        data = rng.uniform(-1.0, 1.0, size=(3, 4))
        data[np.abs(data) < 0.05] = 0.5  # keep the finite-difference stencil one-sided
        a = Tensor(data, requires_grad=True)
        assert ad.grad_check(lambda x: ad.tsum(ad.relu(x)), [a]) < self.TOL

    def test_log_and_power(self):
        rng = np.random.default_rng(15)
        a = Tensor(rng.uniform(0.5, 2.0, size=(3, 4)), requires_grad=True)
        assert ad.grad_check(lambda x: ad.tsum(ad.log(x)), [a]) < self.TOL
        assert ad.grad_check(lambda x: ad.tsum(ad.power(x, -0.5)), [a]) < self.TOL

    def test_softmax_rows(self):
        rng = np.random.default_rng(16)
        a = rand(rng, 4, 5)
        w = Tensor(rng.normal(size=(4, 5)))
        err = ad.grad_check(lambda x: ad.tsum(ad.mul(ad.softmax_rows(x), w)), [a])
        assert err < self.TOL

    def test_concat_and_slice(self):
        rng = np.random.default_rng(17)
        a, b = rand(rng, 2, 3), rand(rng, 2, 3)
        err = ad.grad_check(
            lambda x, y: ad.tsum(ad.slice_cols(ad.concat_cols([x, y]), 2, 5)), [a, b])
        assert err < self.TOL
        err = ad.grad_check(
            lambda x, y: ad.tsum(ad.slice_rows(ad.concat_rows([x, y]), 1, 3)), [a, b])
        assert err < self.TOL

    def test_losses(self):
        rng = np.random.default_rng(18)
        pred, target = rand(rng, 3, 4), Tensor(rng.normal(size=(3, 4)))
        assert ad.grad_check(lambda p: ad.mse(p, target), [pred]) < self.TOL
        logits = rand(rng, 4, 6)
        labels = np.array([0, 2, 4, 5])
        assert ad.grad_check(lambda z: ad.cross_entropy(z, labels), [logits]) < self.TOL
