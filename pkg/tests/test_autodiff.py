"""Gradient checks for the reverse-mode autodiff engine."""

import numpy as np
import pytest

from tacbench.rl.autodiff import Tensor

EPS = 1e-6
TOL = 1e-4      # max relative error against central differences


def numeric_grad(f, x: np.ndarray) -> np.ndarray:
    g = np.zeros_like(x, dtype=float)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        i = it.multi_index
        old = x[i]
        x[i] = old + EPS
        hi = f(x)
        x[i] = old - EPS
        lo = f(x)
        x[i] = old
        g[i] = (hi - lo) / (2 * EPS)
        it.iternext()
    return g


def check(build, x: np.ndarray):
    """Compare autodiff and central-difference gradients of a scalar loss."""
    t = Tensor(x.copy(), requires_grad=True)
    build(t).backward()
    num = numeric_grad(lambda arr: float(build(Tensor(arr)).data), x.copy())
    denom = np.maximum(np.abs(num), 1.0)
    rel = np.max(np.abs(t.grad - num) / denom)
    assert rel < TOL, f"max relative error {rel:.2e}"


RNG = np.random.default_rng(0)


def test_grad_add():
    y = RNG.normal(size=(3, 4))
    check(lambda t: (t + y).sum(), RNG.normal(size=(3, 4)))


def test_grad_add_broadcast():
    y = RNG.normal(size=(1, 4))
    check(lambda t: (Tensor(y) + t * 2.0).sum(), RNG.normal(size=(3, 4)))


def test_grad_mul():
    y = RNG.normal(size=(3, 4))
    check(lambda t: (t * y).sum(), RNG.normal(size=(3, 4)))


def test_grad_sub_div():
    y = RNG.uniform(0.5, 2.0, size=(3, 4))
    check(lambda t: (t - y).sum(), RNG.normal(size=(3, 4)))
    check(lambda t: (t / y).sum(), RNG.normal(size=(3, 4)))
    check(lambda t: (1.0 / t).sum(), RNG.uniform(0.5, 2.0, size=(3, 4)))


def test_grad_pow():
    check(lambda t: (t ** 3.0).sum(), RNG.uniform(0.5, 2.0, size=(3, 4)))
    with pytest.raises(TypeError):
        Tensor(np.ones(2)) ** np.ones(2)


def test_grad_matmul():
    b = RNG.normal(size=(4, 5))
    check(lambda t: (t @ b).sum(), RNG.normal(size=(3, 4)))
    a = RNG.normal(size=(3, 4))
    check(lambda t: (Tensor(a) @ t).sum(), RNG.normal(size=(4, 5)))


def test_grad_tanh_relu_exp_log():
    check(lambda t: t.tanh().sum(), RNG.normal(size=(3, 4)))
    check(lambda t: t.relu().sum(), RNG.normal(size=(3, 4)) + 0.1)
    check(lambda t: t.exp().sum(), RNG.normal(size=(3, 4)))
    check(lambda t: t.log().sum(), RNG.uniform(0.5, 2.0, size=(3, 4)))


def test_grad_maximum_minimum():
    y = RNG.normal(size=(3, 4))
    check(lambda t: t.maximum(y).sum(), RNG.normal(size=(3, 4)) + 0.05)
    check(lambda t: t.minimum(y).sum(), RNG.normal(size=(3, 4)) + 0.05)
    check(lambda t: t.maximum(0.0).sum(), RNG.normal(size=(3, 4)) + 0.05)


def test_grad_sum_mean_axes():
    check(lambda t: (t.sum(axis=0) ** 2.0).sum(), RNG.normal(size=(3, 4)))
    check(lambda t: (t.mean(axis=1) ** 2.0).sum(), RNG.normal(size=(3, 4)))
    check(lambda t: t.mean(), RNG.normal(size=(3, 4)))


def test_grad_reshape_transpose():
    check(lambda t: (t.reshape(12) ** 2.0).sum(), RNG.normal(size=(3, 4)))
    check(lambda t: (t.transpose(1, 0) @ np.ones((3, 1))).sum(),
          RNG.normal(size=(3, 4)))


def test_grad_concat():
    b = RNG.normal(size=(2, 4))
    check(lambda t: (Tensor.concat([t, Tensor(b)], axis=0) ** 2.0).sum(),
          RNG.normal(size=(3, 4)))


def test_grad_conv2d_input_weight_bias():
    x0 = RNG.normal(size=(2, 3, 8, 8))
    w0 = RNG.normal(size=(4, 3, 3, 3)) * 0.3
    b0 = RNG.normal(size=(4,)) * 0.1
    for stride in (1, 2):
        check(lambda t: (t.conv2d(Tensor(w0), Tensor(b0), stride=stride)
                         ** 2.0).sum(), x0.copy())
        check(lambda t: (Tensor(x0).conv2d(t, Tensor(b0), stride=stride)
                         ** 2.0).sum(), w0.copy())
        check(lambda t: (Tensor(x0).conv2d(Tensor(w0), t, stride=stride)
                         ** 2.0).sum(), b0.copy())


def test_conv2d_channel_mismatch():
    with pytest.raises(ValueError):
        Tensor(np.zeros((1, 2, 8, 8))).conv2d(Tensor(np.zeros((4, 3, 3, 3))))


def test_grad_accumulates_on_reuse():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = x * x + x * 3.0
    y.sum().backward()
    assert x.grad[0] == pytest.approx(2 * 2.0 + 3.0)


def test_backward_requires_scalar():
    t = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError):
        (t * 2.0).backward()


def test_no_grad_tracking_without_flag():
    t = Tensor(np.ones(3))
    out = (t * 2.0).sum()
    out.backward()
    assert t.grad is None


def test_zero_grad():
    t = Tensor(np.ones(3), requires_grad=True)
    (t * 2.0).sum().backward()
    assert t.grad is not None
    t.zero_grad()
    assert t.grad is None
