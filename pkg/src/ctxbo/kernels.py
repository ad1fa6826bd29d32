"""Covariance functions over packed input points.

Families:

* stationary bases: squared exponential with ARD lengthscales, Matérn 3/2,
  Matérn 5/2;
* ``ProductContext`` — linear context factor times a stationary base over the
  parameters, ``(s·s') k(x, x')``;
* ``LinearContextSum`` — ``θ s·s' + k(x, x')``, the psychometric surrogate
  structure;
* ``PreferenceKernel`` — wraps a contextual kernel into a covariance between
  duels, ``k(zi, zk) − k(zi, zl) − k(zj, zk) + k(zj, zl)``.

Kernels evaluate on 2-D arrays of packed points (one row per point) so Gram
and cross-covariance matrices are built without Python-level loops.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .domain import as_packed

JITTER_SCALE = 1e-9  # relative diagonal jitter for Gram conditioning


def _rows(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[None, :]
    return P


def _check_positive(name, value):
    if np.any(np.asarray(value) <= 0):
        raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class StationaryKernel:
    """ARD stationary kernel; subclasses define the radial profile."""

    lengthscales: np.ndarray
    variance: float = 1.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        _check_positive("lengthscale", ls)
        _check_positive("signal variance", self.variance)
        object.__setattr__(self, "lengthscales", ls)

    @property
    def input_dim(self) -> int:
        return self.lengthscales.size

    @property
    def signal_variance(self) -> float:
        return float(self.variance)

    def _scaled_sqdist(self, P, Q) -> np.ndarray:
        P = _rows(P)
        Q = _rows(Q)
        if P.shape[1] != self.input_dim or Q.shape[1] != self.input_dim:
            raise ValueError("kernel input dimension mismatch")
        P = P / self.lengthscales
        Q = Q / self.lengthscales
        d2 = (
            np.sum(P**2, axis=1)[:, None]
            + np.sum(Q**2, axis=1)[None, :]
            - 2.0 * P @ Q.T
        )
        return np.maximum(d2, 0.0)

    def eval_matrix(self, P, Q) -> np.ndarray:
        raise NotImplementedError

    def diag(self, P) -> np.ndarray:
        return np.full(_rows(P).shape[0], self.variance)

    def grad_wrt_first(self, p, Q) -> np.ndarray:
        """d k(p, q_j) / dp for each row q_j of Q; returns (m, dim)."""
        raise NotImplementedError

    def grad_diag(self, p) -> np.ndarray:
        """d k(p, p) / dp; zero for stationary kernels."""
        return np.zeros(self.input_dim)

    def spectral_density(self, omega) -> np.ndarray:
        """Power spectral density at angular frequency rows ``omega``."""
        raise NotImplementedError

    def with_params(self, lengthscales=None, variance=None):
        return replace(
            self,
            lengthscales=self.lengthscales if lengthscales is None else lengthscales,
            variance=self.variance if variance is None else variance,
        )


class SquaredExponential(StationaryKernel):
    def eval_matrix(self, P, Q):
        return self.variance * np.exp(-0.5 * self._scaled_sqdist(P, Q))

    def grad_wrt_first(self, p, Q):
        p = as_packed(p)
        Q = _rows(Q)
        k = self.eval_matrix(p, Q)[0]  # (m,)
        diff = (p[None, :] - Q) / self.lengthscales**2
        return -k[:, None] * diff

    def spectral_density(self, omega):
        omega = _rows(omega)
        d = self.input_dim
        ls = self.lengthscales
        c = self.variance * (2.0 * np.pi) ** (d / 2.0) * np.prod(ls)
        return c * np.exp(-0.5 * np.sum((omega * ls) ** 2, axis=1))


class _Matern(StationaryKernel):
    nu: float = 1.5

    def _r(self, P, Q):
        return np.sqrt(self._scaled_sqdist(P, Q))

    def spectral_density(self, omega):
        # ARD Matérn: product of lengthscales times the isotropic unit-scale
        # density evaluated at the scaled frequencies.
        omega = _rows(omega)
        d = self.input_dim
        nu = self.nu
        ls = self.lengthscales
        w2 = np.sum((omega * ls) ** 2, axis=1)
        logc = (
            d * np.log(2.0)
            + (d / 2.0) * np.log(np.pi)
            + gammaln(nu + d / 2.0)
            - gammaln(nu)
            + nu * np.log(2.0 * nu)
        )
        dens = np.exp(logc) * (2.0 * nu + w2) ** (-(nu + d / 2.0))
        return self.variance * np.prod(ls) * dens


class Matern32(_Matern):
    nu = 1.5

    def eval_matrix(self, P, Q):
        r = self._r(P, Q)
        sq3r = np.sqrt(3.0) * r
        return self.variance * (1.0 + sq3r) * np.exp(-sq3r)

    def grad_wrt_first(self, p, Q):
        p = as_packed(p)
        Q = _rows(Q)
        r = self._r(p, Q)[0]
        coef = -3.0 * self.variance * np.exp(-np.sqrt(3.0) * r)
        diff = (p[None, :] - Q) / self.lengthscales**2
        return coef[:, None] * diff


class Matern52(_Matern):
    nu = 2.5

    def eval_matrix(self, P, Q):
        r = self._r(P, Q)
        sq5r = np.sqrt(5.0) * r
        return self.variance * (1.0 + sq5r + sq5r**2 / 3.0) * np.exp(-sq5r)

    def grad_wrt_first(self, p, Q):
        p = as_packed(p)
        Q = _rows(Q)
        r = self._r(p, Q)[0]
        coef = -(5.0 / 3.0) * self.variance * (1.0 + np.sqrt(5.0) * r) * np.exp(-np.sqrt(5.0) * r)
        diff = (p[None, :] - Q) / self.lengthscales**2
        return coef[:, None] * diff


@dataclass(frozen=True)
class ProductContext:
    """``(s·s') · base(x, x')`` on packed ``[s, x]`` points."""

    base: StationaryKernel
    context_dim: int = 1

    @property
    def input_dim(self) -> int:
        return self.context_dim + self.base.input_dim

    @property
    def search_dim(self) -> int:
        return self.base.input_dim

    @property
    def signal_variance(self) -> float:
        return self.base.signal_variance

    def _split(self, P):
        P = _rows(P)
        if P.shape[1] != self.input_dim:
            raise ValueError("kernel input dimension mismatch")
        return P[:, : self.context_dim], P[:, self.context_dim:]

    def eval_matrix(self, P, Q):
        Sp, Xp = self._split(P)
        Sq, Xq = self._split(Q)
        return (Sp @ Sq.T) * self.base.eval_matrix(Xp, Xq)

    def diag(self, P):
        S, X = self._split(P)
        return np.sum(S**2, axis=1) * self.base.diag(X)

    def grad_wrt_first(self, p, Q):
        p = as_packed(p)
        Sq, Xq = self._split(Q)
        sp, xp = p[: self.context_dim], p[self.context_dim:]
        kb = self.base.eval_matrix(xp, Xq)[0]  # (m,)
        dot = Sq @ sp  # (m,)
        grad = np.empty((Sq.shape[0], self.input_dim))
        grad[:, : self.context_dim] = kb[:, None] * Sq
        grad[:, self.context_dim:] = dot[:, None] * self.base.grad_wrt_first(xp, Xq)
        return grad

    def grad_diag(self, p):
        p = as_packed(p)
        g = np.zeros(self.input_dim)
        g[: self.context_dim] = 2.0 * p[: self.context_dim] * self.base.signal_variance
        return g


@dataclass(frozen=True)
class LinearContextSum:
    """``θ s·s' + base(x, x')`` on packed ``[s, x]`` points."""

    base: StationaryKernel
    theta: float
    context_dim: int = 1

    def __post_init__(self):
        _check_positive("theta", self.theta)

    @property
    def input_dim(self) -> int:
        return self.context_dim + self.base.input_dim

    @property
    def search_dim(self) -> int:
        return self.base.input_dim

    @property
    def signal_variance(self) -> float:
        return self.base.signal_variance

    def _split(self, P):
        P = _rows(P)
        if P.shape[1] != self.input_dim:
            raise ValueError("kernel input dimension mismatch")
        return P[:, : self.context_dim], P[:, self.context_dim:]

    def eval_matrix(self, P, Q):
        Sp, Xp = self._split(P)
        Sq, Xq = self._split(Q)
        return self.theta * (Sp @ Sq.T) + self.base.eval_matrix(Xp, Xq)

    def diag(self, P):
        S, X = self._split(P)
        return self.theta * np.sum(S**2, axis=1) + self.base.diag(X)

    def grad_wrt_first(self, p, Q):
        p = as_packed(p)
        Sq, Xq = self._split(Q)
        xp = p[self.context_dim:]
        grad = np.empty((Sq.shape[0], self.input_dim))
        grad[:, : self.context_dim] = self.theta * Sq
        grad[:, self.context_dim:] = self.base.grad_wrt_first(xp, Xq)
        return grad

    def grad_diag(self, p):
        p = as_packed(p)
        g = np.zeros(self.input_dim)
        g[: self.context_dim] = 2.0 * self.theta * p[: self.context_dim]
        return g


@dataclass(frozen=True)
class PreferenceKernel:
    """Covariance between duels induced by a latent value-function kernel.

    A duel point packs ``[s, x, x2]``; the latent duel outcome is
    ``f(s, x) − f(s, x2)`` where ``f`` has the wrapped contextual kernel, so
    the duel covariance is the four-term difference of value covariances.
    """

    base: ProductContext | LinearContextSum | StationaryKernel
    context_dim: int = 1

    @property
    def search_dim(self) -> int:
        return self.base.input_dim - self.context_dim

    @property
    def input_dim(self) -> int:
        return self.context_dim + 2 * self.search_dim

    @property
    def signal_variance(self) -> float:
        return 2.0 * self.base.signal_variance

    def _halves(self, P):
        P = _rows(P)
        if P.shape[1] != self.input_dim:
            raise ValueError("kernel input dimension mismatch")
        ds, dx = self.context_dim, self.search_dim
        first = np.concatenate([P[:, :ds], P[:, ds:ds + dx]], axis=1)
        second = np.concatenate([P[:, :ds], P[:, ds + dx:]], axis=1)
        return first, second

    def eval_matrix(self, P, Q):
        Pi, Pj = self._halves(P)
        Qk, Ql = self._halves(Q)
        b = self.base.eval_matrix
        return b(Pi, Qk) - b(Pi, Ql) - b(Pj, Qk) + b(Pj, Ql)

    def diag(self, P):
        Pi, Pj = self._halves(P)
        b = self.base.eval_matrix
        cross = np.array([b(Pi[i], Pj[i])[0, 0] for i in range(Pi.shape[0])])
        return self.base.diag(Pi) + self.base.diag(Pj) - 2.0 * cross

    def cross_value_matrix(self, V, Q):
        """Covariance between value points ``[s, x]`` and duel points."""
        Qk, Ql = self._halves(Q)
        return self.base.eval_matrix(V, Qk) - self.base.eval_matrix(V, Ql)

    def grad_value_wrt_first(self, v, Q):
        """d/dv of ``cross_value_matrix(v, Q)`` for a single value point."""
        Qk, Ql = self._halves(Q)
        return self.base.grad_wrt_first(v, Qk) - self.base.grad_wrt_first(v, Ql)

    def grad_wrt_first(self, p, Q):
        p = as_packed(p)
        ds, dx = self.context_dim, self.search_dim
        pi = np.concatenate([p[:ds], p[ds:ds + dx]])
        pj = np.concatenate([p[:ds], p[ds + dx:]])
        Qk, Ql = self._halves(Q)
        gi = self.base.grad_wrt_first(pi, Qk) - self.base.grad_wrt_first(pi, Ql)
        gj = self.base.grad_wrt_first(pj, Qk) - self.base.grad_wrt_first(pj, Ql)
        grad = np.empty((gi.shape[0], self.input_dim))
        grad[:, :ds] = gi[:, :ds] - gj[:, :ds]
        grad[:, ds:ds + dx] = gi[:, ds:]
        grad[:, ds + dx:] = -gj[:, ds:]
        return grad


Kernel = StationaryKernel | ProductContext | LinearContextSum | PreferenceKernel

STATIONARY_FAMILIES = {
    "se-ard": SquaredExponential,
    "matern32": Matern32,
    "matern52": Matern52,
}


def make_stationary(family: str, lengthscales, variance: float = 1.0) -> StationaryKernel:
    try:
        cls = STATIONARY_FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown kernel family {family!r}") from None
    return cls(lengthscales=np.atleast_1d(lengthscales), variance=variance)


def kernel_eval(spec: Kernel, p, q) -> float:
    return float(spec.eval_matrix(as_packed(p), as_packed(q))[0, 0])


def kernel_grad_x(spec: Kernel, p, q) -> np.ndarray:
    """Gradient of ``kernel_eval(spec, p, q)`` with respect to ``p``."""
    return spec.grad_wrt_first(as_packed(p), as_packed(q))[0]


def gram(spec: Kernel, P, jitter_scale: float = JITTER_SCALE) -> np.ndarray:
    """Training covariance with relative diagonal jitter."""
    P = _rows(P)
    K = spec.eval_matrix(P, P)
    K = 0.5 * (K + K.T)
    return K + jitter_scale * spec.signal_variance * np.eye(P.shape[0])
