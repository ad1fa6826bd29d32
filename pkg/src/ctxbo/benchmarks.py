"""Synthetic objective functions and the contextual binary/duel oracles.

Formulas follow the published definitions from the standard virtual library
of optimization test functions. Every function is stored in its minimization
form together with a known global minimizer; the optimization stack consumes
the negated ("oriented") value so that higher is always better, standardized
to zero mean and unit variance over its box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import Box
from .kernels import ProductContext, make_stationary
from .probit import norm_cdf

STANDARDIZE_SEED = 20210409
STANDARDIZE_SAMPLES = 10_000


def _rows(x, dim) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != dim:
        raise ValueError(f"expected {dim}-dimensional input")
    return x


# --- raw formulas (minimization form), vectorized over rows -----------------


def _ackley(X):
    d = X.shape[1]
    return (
        -20.0 * np.exp(-0.2 * np.sqrt(np.sum(X**2, axis=1) / d))
        - np.exp(np.sum(np.cos(2 * np.pi * X), axis=1) / d)
        + 20.0
        + np.e
    )


def _beale(X):
    x, y = X[:, 0], X[:, 1]
    return (
        (1.5 - x + x * y) ** 2
        + (2.25 - x + x * y**2) ** 2
        + (2.625 - x + x * y**3) ** 2
    )


def _bohachevsky(X):
    x, y = X[:, 0], X[:, 1]
    return x**2 + 2 * y**2 - 0.3 * np.cos(3 * np.pi * x) - 0.4 * np.cos(4 * np.pi * y) + 0.7


def _three_hump_camel(X):
    x, y = X[:, 0], X[:, 1]
    return 2 * x**2 - 1.05 * x**4 + x**6 / 6.0 + x * y + y**2


def _six_hump_camel(X):
    x, y = X[:, 0], X[:, 1]
    return (4 - 2.1 * x**2 + x**4 / 3.0) * x**2 + x * y + (-4 + 4 * y**2) * y**2


def _colville(X):
    x1, x2, x3, x4 = X.T
    return (
        100 * (x1**2 - x2) ** 2
        + (x1 - 1) ** 2
        + (x3 - 1) ** 2
        + 90 * (x3**2 - x4) ** 2
        + 10.1 * ((x2 - 1) ** 2 + (x4 - 1) ** 2)
        + 19.8 * (x2 - 1) * (x4 - 1)
    )


def _cross_in_tray(X):
    x, y = X[:, 0], X[:, 1]
    inner = np.abs(np.sin(x) * np.sin(y) * np.exp(np.abs(100 - np.sqrt(x**2 + y**2) / np.pi)))
    return -0.0001 * (inner + 1) ** 0.1


def _dixon_price(X):
    d = X.shape[1]
    i = np.arange(2, d + 1)
    return (X[:, 0] - 1) ** 2 + np.sum(i * (2 * X[:, 1:] ** 2 - X[:, :-1]) ** 2, axis=1)


def _drop_wave(X):
    r2 = np.sum(X**2, axis=1)
    return -(1 + np.cos(12 * np.sqrt(r2))) / (0.5 * r2 + 2)


def _eggholder(X):
    x, y = X[:, 0], X[:, 1]
    return -(y + 47) * np.sin(np.sqrt(np.abs(y + x / 2 + 47))) - x * np.sin(
        np.sqrt(np.abs(x - (y + 47)))
    )


def _forrester(X):
    x = X[:, 0]
    return (6 * x - 2) ** 2 * np.sin(12 * x - 4)


def _goldstein_price(X):
    x, y = X[:, 0], X[:, 1]
    a = 1 + (x + y + 1) ** 2 * (19 - 14 * x + 3 * x**2 - 14 * y + 6 * x * y + 3 * y**2)
    b = 30 + (2 * x - 3 * y) ** 2 * (18 - 32 * x + 12 * x**2 + 48 * y - 36 * x * y + 27 * y**2)
    return a * b


def _griewank(X):
    i = np.arange(1, X.shape[1] + 1)
    return np.sum(X**2, axis=1) / 4000.0 - np.prod(np.cos(X / np.sqrt(i)), axis=1) + 1


def _gramacy_lee(X):
    x = X[:, 0]
    return np.sin(10 * np.pi * x) / (2 * x) + (x - 1) ** 4


_HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN3_A = np.array([[3, 10, 30], [0.1, 10, 35], [3, 10, 30], [0.1, 10, 35]], dtype=float)
_HARTMANN3_P = 1e-4 * np.array(
    [[3689, 1170, 2673], [4699, 4387, 7470], [1091, 8732, 5547], [381, 5743, 8828]], dtype=float
)
_HARTMANN6_A = np.array(
    [
        [10, 3, 17, 3.5, 1.7, 8],
        [0.05, 10, 17, 0.1, 8, 14],
        [3, 3.5, 1.7, 10, 17, 8],
        [17, 8, 0.05, 10, 0.1, 14],
    ],
    dtype=float,
)
_HARTMANN6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ],
    dtype=float,
)


def _hartmann(X, A, P):
    inner = np.sum(A[None, :, :] * (X[:, None, :] - P[None, :, :]) ** 2, axis=2)
    return -np.sum(_HARTMANN_ALPHA * np.exp(-inner), axis=1)


def _hartmann3(X):
    return _hartmann(X, _HARTMANN3_A, _HARTMANN3_P)


def _hartmann4(X):
    # 4-D variant: first four columns of the 6-D matrices, rescaled
    inner = np.sum(
        _HARTMANN6_A[None, :, :4] * (X[:, None, :] - _HARTMANN6_P[None, :, :4]) ** 2, axis=2
    )
    return (1.1 - np.sum(_HARTMANN_ALPHA * np.exp(-inner), axis=1)) / 0.839


def _hartmann6(X):
    return _hartmann(X, _HARTMANN6_A, _HARTMANN6_P)


def _holder(X):
    x, y = X[:, 0], X[:, 1]
    return -np.abs(np.sin(x) * np.cos(y) * np.exp(np.abs(1 - np.sqrt(x**2 + y**2) / np.pi)))


_LANGERMANN_C = np.array([1.0, 2.0, 5.0, 2.0, 3.0])
_LANGERMANN_A = np.array([[3, 5], [5, 2], [2, 1], [1, 4], [7, 9]], dtype=float)


def _langermann(X):
    # sign convention chosen so the documented optimum pair (location, value)
    # is self-consistent: the minimum sits at the published point
    d2 = np.sum((X[:, None, :] - _LANGERMANN_A[None, :, :]) ** 2, axis=2)
    return -np.sum(_LANGERMANN_C * np.exp(-d2 / np.pi) * np.cos(np.pi * d2), axis=1)


def _levy(X):
    w = 1 + (X - 1) / 4.0
    head = np.sin(np.pi * w[:, 0]) ** 2
    mid = np.sum(
        (w[:, :-1] - 1) ** 2 * (1 + 10 * np.sin(np.pi * w[:, :-1] + 1) ** 2), axis=1
    )
    tail = (w[:, -1] - 1) ** 2 * (1 + np.sin(2 * np.pi * w[:, -1]) ** 2)
    return head + mid + tail


def _levy13(X):
    x, y = X[:, 0], X[:, 1]
    return (
        np.sin(3 * np.pi * x) ** 2
        + (x - 1) ** 2 * (1 + np.sin(3 * np.pi * y) ** 2)
        + (y - 1) ** 2 * (1 + np.sin(2 * np.pi * y) ** 2)
    )


def _perm0(X, beta=10.0):
    d = X.shape[1]
    j = np.arange(1, d + 1)
    total = np.zeros(X.shape[0])
    for i in range(1, d + 1):
        total += np.sum((j + beta) * (X**i - (1.0 / j) ** i), axis=1) ** 2
    return total


def _perm(X, beta=0.5):
    d = X.shape[1]
    j = np.arange(1, d + 1)
    total = np.zeros(X.shape[0])
    for i in range(1, d + 1):
        total += np.sum((j**i + beta) * ((X / j) ** i - 1), axis=1) ** 2
    return total


def _powell(X):
    x1, x2, x3, x4 = X.T
    return (x1 + 10 * x2) ** 2 + 5 * (x3 - x4) ** 2 + (x2 - 2 * x3) ** 4 + 10 * (x1 - x4) ** 4


def _rosenbrock(X):
    return np.sum(
        100 * (X[:, 1:] - X[:, :-1] ** 2) ** 2 + (X[:, :-1] - 1) ** 2, axis=1
    )


def _rotated_hyper_ellipsoid(X):
    return np.sum(np.cumsum(X**2, axis=1), axis=1)


def _schaffer4(X):
    x, y = X[:, 0], X[:, 1]
    num = np.cos(np.sin(np.abs(x**2 - y**2))) ** 2 - 0.5
    den = (1 + 0.001 * (x**2 + y**2)) ** 2
    return 0.5 + num / den


def _schwefel(X):
    d = X.shape[1]
    return 418.9829 * d - np.sum(X * np.sin(np.sqrt(np.abs(X))), axis=1)


_SHEKEL_BETA = 0.1 * np.array([1, 2, 2, 4, 4, 6, 3, 7, 5, 5], dtype=float)
_SHEKEL_C = np.array(
    [
        [4, 1, 8, 6, 3, 2, 5, 8, 6, 7],
        [4, 1, 8, 6, 7, 9, 3, 1, 2, 3.6],
        [4, 1, 8, 6, 3, 2, 5, 8, 6, 7],
        [4, 1, 8, 6, 7, 9, 3, 1, 2, 3.6],
    ],
    dtype=float,
)


def _shekel(X):
    d2 = np.sum((X[:, :, None] - _SHEKEL_C[None, :, :]) ** 2, axis=1)
    return -np.sum(1.0 / (d2 + _SHEKEL_BETA), axis=1)


def _shubert(X):
    j = np.arange(1, 6)
    terms = np.sum(
        j[None, None, :] * np.cos((j[None, None, :] + 1) * X[:, :, None] + j[None, None, :]),
        axis=2,
    )
    return np.prod(terms, axis=1)


def _sphere(X):
    return np.sum(X**2, axis=1)


def _sum_squares(X):
    i = np.arange(1, X.shape[1] + 1)
    return np.sum(i * X**2, axis=1)


def _trid(X):
    return np.sum((X - 1) ** 2, axis=1) - np.sum(X[:, 1:] * X[:, :-1], axis=1)


def _ursem_waves(X):
    x, y = X[:, 0], X[:, 1]
    return (
        -0.9 * x**2
        + (y**2 - 4.5 * y**2) * x * y
        + 4.7 * np.cos(3 * x - y**2 * (2 + x)) * np.sin(2.5 * np.pi * x)
    )


@dataclass(frozen=True)
class BenchmarkSpec:
    """One synthetic objective: formula, box, designated kernel family."""

    name: str
    dim: int
    box: Box
    kernel_family: str
    raw: Callable[[np.ndarray], np.ndarray]
    argmin: np.ndarray
    fmin: float

    def raw_values(self, x) -> np.ndarray:
        X = _rows(x, self.dim)
        return self.raw(X)

    def oriented(self, x) -> np.ndarray:
        """Negated raw value: the quantity the optimizer maximizes."""
        return -self.raw_values(x)


def _spec(name, bounds, family, fn, argmin, fmin):
    lo, hi = zip(*bounds)
    box = Box(np.array(lo, dtype=float), np.array(hi, dtype=float))
    return BenchmarkSpec(
        name=name,
        dim=box.dim,
        box=box,
        kernel_family=family,
        raw=fn,
        argmin=np.array(argmin, dtype=float),
        fmin=float(fmin),
    )


_SQ2 = 1.0 / math.sqrt(2.0)

REGISTRY: dict[str, BenchmarkSpec] = {
    spec.name: spec
    for spec in [
        _spec("ackley", [(-32.768, 32.768)] * 2, "matern32", _ackley, [0, 0], 0.0),
        _spec("beale", [(-4.5, 4.5)] * 2, "se-ard", _beale, [3, 0.5], 0.0),
        _spec("bohachevsky", [(-100, 100)] * 2, "se-ard", _bohachevsky, [0, 0], 0.0),
        _spec("three-hump-camel", [(-5, 5)] * 2, "matern52", _three_hump_camel, [0, 0], 0.0),
        _spec(
            "six-hump-camel",
            [(-3, 3), (-2, 2)],
            "se-ard",
            _six_hump_camel,
            [0.0898, -0.7126],
            -1.031628453489877,
        ),
        _spec("colville", [(-10, 10)] * 4, "matern52", _colville, [1, 1, 1, 1], 0.0),
        _spec(
            "cross-in-tray",
            [(-10, 10)] * 2,
            "matern52",
            _cross_in_tray,
            [1.349406575769872, 1.349406575769872],
            -2.062611870822739,
        ),
        _spec("dixon-price", [(-5, 5)] * 2, "matern52", _dixon_price, [1.0, _SQ2], 0.0),
        _spec("drop-wave", [(-5.12, 5.12)] * 2, "matern32", _drop_wave, [0, 0], -1.0),
        _spec(
            "eggholder",
            [(-512, 512)] * 2,
            "se-ard",
            _eggholder,
            [512.0, 404.2318058008512],
            -959.6406627208506,
        ),
        _spec("forrester", [(0, 1)], "se-ard", _forrester, [0.7572477193989655], -6.020740055767083),
        _spec("goldstein-price", [(-2, 2)] * 2, "se-ard", _goldstein_price, [0, -1], 3.0),
        _spec("griewank", [(-600, 600)] * 2, "se-ard", _griewank, [0, 0], 0.0),
        _spec(
            "gramacy-lee",
            [(0.5, 2.5)],
            "se-ard",
            _gramacy_lee,
            [0.5485634190742155], -0.8690111349894997,
        ),
        _spec(
            "hartmann-3d",
            [(0, 1)] * 3,
            "se-ard",
            _hartmann3,
            [0.114588882309, 0.555648894143, 0.852546985649],
            -3.862779787332663,
        ),
        _spec(
            "hartmann-4d",
            [(0, 1)] * 4,
            "se-ard",
            _hartmann4,
            [0.187395270667, 0.194151526799, 0.55791777817, 0.264779622833],
            -3.134494141222399,
        ),
        _spec(
            "hartmann-6d",
            [(0, 1)] * 6,
            "se-ard",
            _hartmann6,
            [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573],
            -3.322368011391339,
        ),
        _spec(
            "holder",
            [(-10, 10)] * 2,
            "se-ard",
            _holder,
            [8.05502, 9.66459],
            -19.208502567886747,
        ),
        _spec(
            "langer",
            [(0, 10)] * 2,
            "matern32",
            _langermann,
            [2.002992120762, 1.0060959408],
            -5.162126159963984,
        ),
        _spec("levy", [(-10, 10)] * 2, "se-ard", _levy, [1, 1], 0.0),
        _spec("levy-n13", [(-10, 10)] * 2, "matern52", _levy13, [1, 1], 0.0),
        _spec("perm-0-d-beta", [(-2, 2)] * 2, "se-ard", _perm0, [1.0, 0.5], 0.0),
        _spec("perm-d-beta", [(-2, 2)] * 2, "se-ard", _perm, [1.0, 2.0], 0.0),
        _spec("powell", [(-4, 5)] * 4, "se-ard", _powell, [0, 0, 0, 0], 0.0),
        _spec("rosenbrock", [(-2.048, 2.048)] * 2, "se-ard", _rosenbrock, [1, 1], 0.0),
        _spec(
            "rotated-hyper-ellipsoid",
            [(-65.536, 65.536)] * 2,
            "matern32",
            _rotated_hyper_ellipsoid,
            [0, 0],
            0.0,
        ),
        _spec(
            "schaffer-n4",
            [(-100, 100)] * 2,
            "matern32",
            _schaffer4,
            [0.0, 1.253131828792882],
            0.29257863203598045,
        ),
        _spec(
            "schwefel",
            [(-500, 500)] * 2,
            "se-ard",
            _schwefel,
            [420.968746, 420.968746],
            2.545567497236334e-05,
        ),
        _spec(
            "shekel",
            [(0, 10)] * 4,
            "se-ard",
            _shekel,
            [4.000746866246, 3.999509480718, 4.000746865523, 3.999509480801],
            -10.536443153483528,
        ),
        _spec(
            "schubert",
            [(0, 10)] * 2,
            "matern32",
            _shubert,
            [4.858057, 5.482864],
            -186.73090883102378,
        ),
        _spec("sphere", [(-5.12, 5.12)] * 2, "se-ard", _sphere, [0, 0], 0.0),
        _spec("sum-squares", [(-10, 10)] * 2, "se-ard", _sum_squares, [0, 0], 0.0),
        _spec("trid", [(-4, 4)] * 2, "se-ard", _trid, [2, 2], -2.0),
        _spec(
            "ursem-waves",
            [(-1.2, 1.2), (-0.9, 1.2)],
            "se-ard",
            _ursem_waves,
            [1.2, 1.2],
            -8.553599999999996,
        ),
    ]
}


def benchmark_names() -> list[str]:
    return sorted(REGISTRY.keys())


def get_benchmark(name: str) -> BenchmarkSpec:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}") from None


def eval_benchmark(name: str, x) -> np.ndarray | float:
    """Oriented (maximization) objective value; errors on out-of-box input."""
    spec = get_benchmark(name)
    X = _rows(x, spec.dim)
    if not all(spec.box.contains(row) for row in X):
        raise ValueError(f"input outside the {name} box")
    vals = spec.oriented(X)
    return float(vals[0]) if np.asarray(x).ndim == 1 else vals


_STANDARDIZATION_CACHE: dict[tuple[str, int, int], tuple[float, float]] = {}


def standardize(
    spec: BenchmarkSpec,
    n: int = STANDARDIZE_SAMPLES,
    seed: int = STANDARDIZE_SEED,
) -> tuple[float, float]:
    """Mean/std of the oriented objective over uniform box samples.

    Deterministic given the seed; every run shares the same constants. Raises
    for degenerate (constant) functions.
    """
    if n < 10_000:
        raise ValueError("standardization needs at least 10000 samples")
    key = (spec.name, n, seed)
    if key not in _STANDARDIZATION_CACHE:
        rng = np.random.default_rng(seed)
        X = spec.box.sample(rng, size=n)
        vals = spec.oriented(X)
        m_hat = float(np.mean(vals))
        s_hat = float(np.std(vals))
        if s_hat < 1e-12:
            raise ValueError(f"benchmark {spec.name} is constant over its box")
        _STANDARDIZATION_CACHE[key] = (m_hat, s_hat)
    return _STANDARDIZATION_CACHE[key]


@dataclass
class ContextualOracle:
    """Binary or duel feedback from a standardized benchmark at context s."""

    spec: BenchmarkSpec
    rng: np.random.Generator
    mode: str = "binary"  # "binary" | "preferential"
    context_box: Box = None

    def __post_init__(self):
        if self.mode not in ("binary", "preferential"):
            raise ValueError(f"unknown oracle mode {self.mode!r}")
        if self.context_box is None:
            self.context_box = Box(np.zeros(1), np.ones(1))
        self.m_hat, self.s_hat = standardize(self.spec)

    def standardized(self, x) -> np.ndarray:
        return (self.spec.oriented(x) - self.m_hat) / self.s_hat

    @property
    def standardized_max(self) -> float:
        return float((-self.spec.fmin - self.m_hat) / self.s_hat)

    def _check(self, s, x):
        s = float(np.atleast_1d(np.asarray(s, dtype=float))[0])
        if not self.context_box.contains([s]):
            raise ValueError("context outside the context box")
        if not self.spec.box.contains(x):
            raise ValueError("parameters outside the search box")
        return s

    def success_probability(self, s, x) -> float:
        s = self._check(s, x)
        return float(norm_cdf(s * self.standardized(np.asarray(x, dtype=float))[0]))

    def duel_probability(self, s, x, x2) -> float:
        s = self._check(s, x)
        self._check(s, x2)
        g = self.standardized(np.asarray(x, dtype=float))[0]
        g2 = self.standardized(np.asarray(x2, dtype=float))[0]
        return float(norm_cdf(s * (g - g2)))

    def binary_query(self, s, x) -> int:
        if self.mode != "binary":
            raise ValueError("oracle is not in binary mode")
        return int(self.rng.random() < self.success_probability(s, x))

    def duel_query(self, s, x, x2) -> int:
        if self.mode != "preferential":
            raise ValueError("oracle is not in preferential mode")
        return int(self.rng.random() < self.duel_probability(s, x, x2))


def binary_query(oracle: ContextualOracle, s, x) -> int:
    return oracle.binary_query(s, x)


def duel_query(oracle: ContextualOracle, s, x, x2) -> int:
    return oracle.duel_query(s, x, x2)


def contextual_kernel(family: str, lengthscales, variance: float = 1.0) -> ProductContext:
    """The benchmark surrogate kernel: linear in s times a stationary base."""
    return ProductContext(
        base=make_stationary(family, lengthscales, variance), context_dim=1
    )
