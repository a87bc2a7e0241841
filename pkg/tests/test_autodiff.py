import numpy as np
import pytest

from rpd import autodiff as ad
from rpd.autodiff import Tensor


def finite_diff(f, params, h=1e-6):
    """Central-difference gradients of scalar f() wrt a list of Tensors."""
    grads = []
    for p in params:
        g = np.zeros_like(p.value)
        flat = p.value.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f()
            flat[i] = orig - h
            down = f()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def test_sum_of_squares_gradient():
    p = Tensor([1.0, -2.0, 3.0], requires_grad=True)
    loss = ad.sum_along(ad.square(p))
    ad.backward(loss)
    np.testing.assert_allclose(p.grad, 2 * p.value)


def test_constant_loss_has_zero_gradient():
    p = Tensor([1.0, 2.0], requires_grad=True)
    loss = ad.mean_all(Tensor([5.0, 7.0]))
    ad.backward(loss)
    np.testing.assert_array_equal(p.grad, np.zeros(2))


def test_backward_accumulates_without_zeroing():
    p = Tensor([2.0], requires_grad=True)
    for _ in range(2):
        ad.backward(ad.sum_along(ad.square(p)))
    np.testing.assert_allclose(p.grad, 2 * 2 * p.value)


def test_two_layer_net_matches_finite_differences():
    rng = np.random.default_rng(7)
    w1 = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
    b1 = Tensor(rng.standard_normal(4), requires_grad=True)
    w2 = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
    b2 = Tensor(rng.standard_normal(2), requires_grad=True)
    x = rng.standard_normal((6, 5))
    params = [w1, b1, w2, b2]

    def loss_value():
        h = np.tanh(x @ w1.value + b1.value)
        out = h @ w2.value + b2.value
        return float((out ** 2).mean())

    h = ad.tanh(ad.add(ad.matmul(Tensor(x), w1), b1))
    out = ad.add(ad.matmul(h, w2), b2)
    loss = ad.mean_all(ad.square(out))
    ad.backward(loss)

    expected = finite_diff(loss_value, params)
    for p, e in zip(params, expected):
        err = np.abs(p.grad - e) / np.maximum(np.abs(e), 1e-6)
        assert err.max() <= 1e-4


def test_bias_broadcast_gradient_sums_over_rows():
    b = Tensor(np.zeros(3), requires_grad=True)
    x = Tensor(np.ones((4, 3)))
    loss = ad.sum_along(ad.add(x, b))
    ad.backward(loss)
    np.testing.assert_allclose(b.grad, 4 * np.ones(3))


def test_minimum_routes_gradient_to_smaller_branch():
    a = Tensor([1.0, 5.0], requires_grad=True)
    b = Tensor([2.0, 3.0], requires_grad=True)
    ad.backward(ad.sum_along(ad.minimum(a, b)))
    np.testing.assert_array_equal(a.grad, [1.0, 0.0])
    np.testing.assert_array_equal(b.grad, [0.0, 1.0])


def test_clip_gradient_zero_outside_bounds():
    a = Tensor([-2.0, 0.5, 2.0], requires_grad=True)
    ad.backward(ad.sum_along(ad.clip(a, -1.0, 1.0)))
    np.testing.assert_array_equal(a.grad, [0.0, 1.0, 0.0])


def test_div_and_exp_and_log_gradients():
    rng = np.random.default_rng(3)
    a = Tensor(rng.uniform(0.5, 2.0, 5), requires_grad=True)
    b = Tensor(rng.uniform(0.5, 2.0, 5), requires_grad=True)

    def loss_value():
        return float(np.sum(np.exp(a.value) / b.value + np.log(b.value)))

    loss = ad.sum_along(ad.add(ad.div(ad.exp(a), b), ad.log(b)))
    ad.backward(loss)
    for p, e in zip([a, b], finite_diff(loss_value, [a, b])):
        np.testing.assert_allclose(p.grad, e, rtol=1e-6, atol=1e-8)


def test_backward_requires_scalar():
    p = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ValueError):
        ad.backward(ad.square(p))


def test_shared_subexpression_gradient():
    # z = x*x used twice: d/dx (z + z) = 4x
    x = Tensor([3.0], requires_grad=True)
    z = ad.square(x)
    ad.backward(ad.sum_along(ad.add(z, z)))
    np.testing.assert_allclose(x.grad, [12.0])
