import numpy as np
import pytest

from ctxbo.kernels import ProductContext, SquaredExponential
from ctxbo.laplace import fit_laplace


@pytest.fixture
def rng():
    return np.random.default_rng(202406)


def make_binary_state(
    n=8,
    dim=1,
    lengthscale=0.4,
    variance=1.0,
    seed=0,
    contextual=False,
    box_lo=0.0,
    box_hi=1.0,
):
    """Small fitted classification state on random data."""
    r = np.random.default_rng(seed)
    if contextual:
        base = SquaredExponential(lengthscales=np.full(dim, lengthscale), variance=variance)
        kernel = ProductContext(base=base, context_dim=1)
        S = r.uniform(0.2, 1.0, size=(n, 1))
        X = r.uniform(box_lo, box_hi, size=(n, dim))
        P = np.concatenate([S, X], axis=1)
    else:
        kernel = SquaredExponential(
            lengthscales=np.full(dim, lengthscale), variance=variance
        )
        P = r.uniform(box_lo, box_hi, size=(n, dim))
    c = r.integers(0, 2, size=n).astype(float)
    return fit_laplace(P, c, kernel)
