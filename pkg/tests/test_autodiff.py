from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdwfpinn.autodiff import Var, affine, as_var, tanh, value_of


def numeric_grad(fn, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (fn(xp) - fn(xm)) / (2 * h)
    return g


def check(build, *shapes, seed=0, positive=False):
    """Compare reverse-mode gradients of ``sum(build(*vars) * weights)`` to FD."""
    rng = np.random.default_rng(seed)
    arrays = [rng.uniform(0.5, 1.5, s) if positive else rng.standard_normal(s) for s in shapes]
    out_shape = np.shape(value_of(build(*arrays)))
    weights = rng.standard_normal(out_shape)

    vs = [Var(a, requires_grad=True) for a in arrays]
    (build(*vs) * weights).sum().backward()
    for i, (v, a) in enumerate(zip(vs, arrays)):
        def f(x, i=i):
            args = list(arrays)
            args[i] = x
            return float((value_of(build(*args)) * weights).sum())
        np.testing.assert_allclose(v.grad, numeric_grad(f, a.copy()), rtol=1e-6, atol=1e-8)


OPS = {
    "add": (lambda a, b: a + b, [(3, 4), (1, 4)]),
    "sub": (lambda a, b: a - b, [(3, 1), (3, 4)]),
    "mul": (lambda a, b: a * b, [(3, 4), (4,)]),
    "div": (lambda a, b: a / b, [(3, 4), (3, 4)]),
    "matmul": (lambda a, b: a @ b, [(3, 4), (4, 2)]),
    "pow2": (lambda a: a**2, [(5,)]),
    "pow3": (lambda a: a**3.0, [(2, 3)]),
    "neg": (lambda a: -a, [(4,)]),
    "sum0": (lambda a: a.sum(axis=0), [(3, 4)]),
    "sum1": (lambda a: a.sum(axis=1), [(3, 4)]),
    "mean": (lambda a: a.mean(), [(3, 4)]),
    "reshape": (lambda a: a.reshape(4, 3), [(3, 4)]),
    "slice": (lambda a: a[1:, None, :2], [(3, 4)]),
    "fancy": (lambda a: a[np.array([0, 2, 0])], [(3, 4)]),
    "tanh": (lambda a: tanh(a), [(3, 4)]),
    "affine": (lambda a, w, b: affine(a, w, b), [(5, 3), (3, 2), (1, 2)]),
    "rsub": (lambda a: 2.0 - a, [(3,)]),
    "rdiv": (lambda a: 1.0 / a, [(3,)]),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients(name):
    fn, shapes = OPS[name]
    check(fn, *shapes, positive=name in ("div", "rdiv", "pow3"))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_composite_expression(seed):
    def build(a, b):
        return tanh(a @ b) * (a[:, :1] ** 2) - (a.sum(axis=1).reshape(3, 1) / 3.0)

    check(build, (3, 2), (2, 4), seed=seed)


def test_shared_subexpression_accumulates():
    x = Var(np.array([1.5, -2.0]), requires_grad=True)
    y = x * x + x
    (y * y).sum().backward()
    xv = x.value
    np.testing.assert_allclose(x.grad, 2 * (xv**2 + xv) * (2 * xv + 1))


def test_numpy_operands_defer_to_var():
    x = Var(np.arange(3.0), requires_grad=True)
    y = np.ones(3) * x + np.full(3, 2.0)
    assert isinstance(y, Var)
    y.sum().backward()
    np.testing.assert_array_equal(x.grad, np.ones(3))


def test_constants_do_not_require_grad():
    c = as_var(np.ones(2))
    assert not c.requires_grad
    y = c * 3.0
    assert not y.requires_grad


def test_nonscalar_backward_needs_seed():
    x = Var(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        (x * 2.0).backward()
    (x * 2.0).backward(np.array([1.0, 0.0, 2.0]))
    np.testing.assert_array_equal(x.grad, [2.0, 0.0, 4.0])


def test_power_rejects_var_exponent():
    x = Var(np.ones(2), requires_grad=True)
    with pytest.raises(TypeError):
        x ** Var(2.0)


def test_matmul_needs_matrices():
    with pytest.raises(ValueError):
        Var(np.ones(3)) @ Var(np.ones(3))


def test_affine_without_vars_is_plain():
    a, w, b = np.ones((2, 3)), np.ones((3, 1)), np.ones((1, 1))
    out = affine(a, w, b)
    assert isinstance(out, np.ndarray)
    np.testing.assert_array_equal(out, np.full((2, 1), 4.0))


def test_deep_chain_has_no_recursion_limit():
    x = Var(np.array(0.5), requires_grad=True)
    y = x
    for _ in range(5000):
        y = y * 1.0001
    y.backward()
    assert x.grad == pytest.approx(1.0001**5000)
