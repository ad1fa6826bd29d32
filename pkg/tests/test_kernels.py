import math

import numpy as np
import pytest

from ctxbo.domain import InputPoint
from ctxbo.kernels import (
    JITTER_SCALE,
    LinearContextSum,
    Matern32,
    Matern52,
    PreferenceKernel,
    ProductContext,
    SquaredExponential,
    gram,
    kernel_eval,
    kernel_grad_x,
    make_stationary,
)

ALL_STATIONARY = [
    SquaredExponential(lengthscales=[0.5, 1.2], variance=1.7),
    Matern32(lengthscales=[0.8, 0.3], variance=0.9),
    Matern52(lengthscales=[1.1, 0.6], variance=2.2),
]


def _fd_grad(spec, p, q, eps=1e-5):
    g = np.zeros(len(p))
    for d in range(len(p)):
        e = np.zeros(len(p))
        e[d] = eps
        g[d] = (kernel_eval(spec, p + e, q) - kernel_eval(spec, p - e, q)) / (2 * eps)
    return g


def test_se_zero_distance_is_variance():
    k = SquaredExponential(lengthscales=[1.0, 1.0], variance=1.0)
    assert kernel_eval(k, [0.3, -0.2], [0.3, -0.2]) == pytest.approx(1.0)


def test_product_context_vanishes_at_zero_context():
    k = ProductContext(base=SquaredExponential(lengthscales=[1.0], variance=1.0))
    assert kernel_eval(k, [0.0, 0.4], [0.8, 0.9]) == 0.0


def test_matern32_closed_form_at_unit_distance():
    # independent closed-form evaluation: (1 + sqrt(3) r) exp(-sqrt(3) r) at r = 1
    k = Matern32(lengthscales=[1.0], variance=1.0)
    expected = (1.0 + math.sqrt(3.0)) * math.exp(-math.sqrt(3.0))
    assert kernel_eval(k, [0.0], [1.0]) == pytest.approx(expected, rel=1e-12)


def test_matern52_closed_form_at_unit_distance():
    k = Matern52(lengthscales=[2.0], variance=1.5)
    r = 0.5
    expected = 1.5 * (1 + math.sqrt(5) * r + 5 * r**2 / 3) * math.exp(-math.sqrt(5) * r)
    assert kernel_eval(k, [0.0], [1.0]) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("spec", ALL_STATIONARY)
def test_symmetry_and_finiteness(spec, rng):
    for _ in range(20):
        p, q = rng.normal(size=2), rng.normal(size=2)
        a = kernel_eval(spec, p, q)
        b = kernel_eval(spec, q, p)
        assert np.isfinite(a)
        assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("spec", ALL_STATIONARY)
def test_stationary_gradient_matches_finite_differences(spec, rng):
    for _ in range(10):
        p = rng.uniform(-1, 1, size=2)
        q = rng.uniform(-1, 1, size=2)
        g = kernel_grad_x(spec, p, q)
        fd = _fd_grad(spec, p, q)
        assert np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12) < 1e-6


def test_gradient_zero_at_coincident_points():
    for spec in ALL_STATIONARY:
        g = kernel_grad_x(spec, [0.4, 0.1], [0.4, 0.1])
        assert np.allclose(g, 0.0, atol=1e-12)


def test_product_context_gradient_wrt_s_vanishes_when_other_s_zero(rng):
    k = ProductContext(base=SquaredExponential(lengthscales=[1.0], variance=1.0))
    g = kernel_grad_x(k, [0.7, 0.2], [0.0, 0.5])
    assert g[0] == pytest.approx(0.0, abs=1e-15)


def test_contextual_gradients_match_finite_differences(rng):
    specs = [
        ProductContext(base=SquaredExponential(lengthscales=[0.7, 0.4], variance=1.3)),
        LinearContextSum(
            base=SquaredExponential(lengthscales=[0.7, 0.4], variance=1.3), theta=2.5
        ),
    ]
    for spec in specs:
        for _ in range(8):
            p = rng.uniform(0.1, 1, size=3)
            q = rng.uniform(0.1, 1, size=3)
            g = kernel_grad_x(spec, p, q)
            fd = _fd_grad(spec, p, q)
            assert np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12) < 1e-6


def test_preference_kernel_four_term_structure(rng):
    base = SquaredExponential(lengthscales=[0.6], variance=1.1)
    ctx = ProductContext(base=base)
    pref = PreferenceKernel(base=ctx)
    for _ in range(10):
        s, sp = rng.uniform(0.1, 1, size=2)
        xi, xj, xk, xl = rng.uniform(0, 1, size=4)
        got = kernel_eval(pref, [s, xi, xj], [sp, xk, xl])
        b = lambda x, y: kernel_eval(ctx, [s, x], [sp, y])
        expected = b(xi, xk) - b(xi, xl) - b(xj, xk) + b(xj, xl)
        assert got == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_preference_kernel_antisymmetry(rng):
    pref = PreferenceKernel(
        base=ProductContext(base=Matern52(lengthscales=[0.5], variance=0.8))
    )
    for _ in range(20):
        s, sp = rng.uniform(0.1, 1, size=2)
        xi, xj, xk, xl = rng.uniform(0, 1, size=4)
        a = kernel_eval(pref, [s, xi, xj], [sp, xk, xl])
        b = kernel_eval(pref, [s, xj, xi], [sp, xk, xl])
        assert a == pytest.approx(-b, rel=1e-10, abs=1e-12)


def test_preference_gradient_matches_finite_differences(rng):
    pref = PreferenceKernel(
        base=ProductContext(base=SquaredExponential(lengthscales=[0.5], variance=1.0))
    )
    for _ in range(8):
        p = rng.uniform(0.1, 1, size=3)
        q = rng.uniform(0.1, 1, size=3)
        g = kernel_grad_x(pref, p, q)
        fd = _fd_grad(pref, p, q)
        assert np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-9) < 1e-5


def test_gram_matrices_nearly_psd(rng):
    # minimum eigenvalue stays above -10x the jitter for every family
    base = SquaredExponential(lengthscales=[0.3, 0.3], variance=1.0)
    specs = ALL_STATIONARY + [
        ProductContext(base=SquaredExponential(lengthscales=[0.4], variance=1.0)),
        LinearContextSum(base=SquaredExponential(lengthscales=[0.4], variance=1.0), theta=1.5),
        PreferenceKernel(base=ProductContext(base=SquaredExponential(lengthscales=[0.4], variance=1.0))),
    ]
    for spec in specs:
        for trial in range(3):
            n = int(rng.integers(5, 41))
            P = rng.uniform(0.05, 1.0, size=(n, spec.input_dim))
            K = gram(spec, P)
            min_eig = float(np.min(np.linalg.eigvalsh(K)))
            assert min_eig > -10.0 * JITTER_SCALE * spec.signal_variance


def test_dimension_mismatch_rejected():
    k = SquaredExponential(lengthscales=[1.0, 1.0], variance=1.0)
    with pytest.raises(ValueError):
        kernel_eval(k, [0.0], [1.0])


def test_nonpositive_hyperparameters_rejected():
    with pytest.raises(ValueError):
        SquaredExponential(lengthscales=[0.0], variance=1.0)
    with pytest.raises(ValueError):
        SquaredExponential(lengthscales=[1.0], variance=-1.0)
    with pytest.raises(ValueError):
        LinearContextSum(base=SquaredExponential(lengthscales=[1.0]), theta=0.0)
    with pytest.raises(ValueError):
        make_stationary("unknown-family", [1.0])


def test_input_point_packing_round_trip():
    p = InputPoint(s=[0.5], x=[1.0, 2.0], x2=[3.0, 4.0])
    z = p.packed
    assert z.tolist() == [0.5, 1.0, 2.0, 3.0, 4.0]
    q = InputPoint.from_packed(z, context_dim=1, search_dim=2, duel=True)
    assert np.allclose(q.x2, [3.0, 4.0])
