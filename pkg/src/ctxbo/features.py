"""Finite-rank feature maps approximating the toolkit's kernels.

Stationary bases use the Laplace-operator eigenbasis on a rectangle: the
j-th feature is ``sqrt(S(sqrt(lambda_j)))`` times a product of sines, where
``S`` is the kernel's spectral density. Contextual structure is carried
exactly: a linear context factor multiplies the parameter features by ``s``,
an additive linear context term contributes the explicit feature
``sqrt(theta) * s``, and duels use differences of value features, which makes
every sampled preference function anti-symmetric by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .domain import Box, as_packed
from .kernels import (
    Kernel,
    LinearContextSum,
    PreferenceKernel,
    ProductContext,
    StationaryKernel,
)

DEFAULT_RANK_PER_DIM = 128
MAX_TOTAL_RANK = 1024
BOUNDARY_FACTOR = 1.25
BOUNDARY_LENGTHSCALE_MULTIPLE = 4.5  # domain must extend past the kernel support


@dataclass(frozen=True)
class StationaryFeatureMap:
    """Laplace-eigenfunction features for one stationary kernel."""

    center: np.ndarray       # (d,) box centre
    half_width: np.ndarray   # (d,) inflated half-widths L_i
    indices: np.ndarray      # (rank, d) integer frequency multi-indices
    weights: np.ndarray      # (rank,) sqrt spectral weights
    kernel: StationaryKernel

    @property
    def rank(self) -> int:
        return self.indices.shape[0]

    @property
    def dim(self) -> int:
        return self.center.size

    def _angles(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        Z = X - self.center
        freq = np.pi * self.indices / (2.0 * self.half_width)  # (rank, d)
        return Z, freq

    def phi(self, X) -> np.ndarray:
        """Feature matrix, one row per input point: (m, rank)."""
        Z, freq = self._angles(X)
        args = freq[None, :, :] * (Z[:, None, :] + self.half_width)
        basis = np.prod(np.sin(args), axis=2) / np.sqrt(np.prod(self.half_width))
        return self.weights * basis

    def phi_grad(self, x) -> np.ndarray:
        """d phi / dx at a single point: (rank, d)."""
        Z, freq = self._angles(as_packed(x))
        args = freq * (Z[0] + self.half_width)   # (rank, d)
        sin_a = np.sin(args)
        cos_a = np.cos(args)
        norm = np.sqrt(np.prod(self.half_width))
        grad = np.empty_like(args)
        for d in range(self.dim):
            parts = sin_a.copy()
            parts[:, d] = cos_a[:, d] * freq[:, d]
            grad[:, d] = np.prod(parts, axis=1)
        return (self.weights[:, None] * grad) / norm


def _build_stationary_map(kernel: StationaryKernel, box: Box, rank: int | None) -> StationaryFeatureMap:
    d = box.dim
    if kernel.input_dim != d:
        raise ValueError("kernel/box dimension mismatch")
    if rank is None:
        per_dim = DEFAULT_RANK_PER_DIM
    else:
        per_dim = max(1, int(round(rank ** (1.0 / d))))
    while per_dim**d > MAX_TOTAL_RANK and per_dim > 1:
        per_dim -= 1
    if rank is not None and d == 1:
        per_dim = rank

    center = box.center
    # widen the rectangle to at least 1.25x the data half-range, and to a few
    # lengthscales when the kernel is smooth relative to the box: the
    # Dirichlet boundary forces features to zero at +-L, which poisons
    # covariances within a few lengthscales of it regardless of rank
    half_range = np.maximum(box.half_range, 1e-12)
    ls = np.broadcast_to(kernel.lengthscales, (d,))
    half_width = np.maximum(
        BOUNDARY_FACTOR * half_range, BOUNDARY_LENGTHSCALE_MULTIPLE * ls
    )
    grids = [np.arange(1, per_dim + 1)] * d
    indices = np.array(list(product(*grids)), dtype=float)
    freq = np.pi * indices / (2.0 * half_width)
    weights = np.sqrt(np.maximum(kernel.spectral_density(freq), 0.0))
    return StationaryFeatureMap(
        center=center,
        half_width=half_width,
        indices=indices,
        weights=weights,
        kernel=kernel,
    )


@dataclass(frozen=True)
class FeatureMap:
    """Feature map for a full (possibly contextual, possibly duel) kernel.

    ``phi`` consumes packed observation points (duel-packed for preference
    kernels); ``phi_value`` consumes value points ``[s, x]`` and is what
    sampled functions are evaluated through.
    """

    base: StationaryFeatureMap
    context_mode: str          # "none" | "product" | "linear-sum"
    context_dim: int
    theta: float = 1.0
    preference: bool = False

    @property
    def rank(self) -> int:
        r = self.base.rank
        if self.context_mode == "product":
            r *= self.context_dim
        elif self.context_mode == "linear-sum":
            r += self.context_dim
        return r

    def _split_value(self, P):
        P = np.asarray(P, dtype=float)
        if P.ndim == 1:
            P = P[None, :]
        return P[:, : self.context_dim], P[:, self.context_dim:]

    def phi_value(self, P) -> np.ndarray:
        """Features of value points ``[s, x]``: (m, rank)."""
        S, X = self._split_value(P)
        if self.context_mode == "none":
            return self.base.phi(np.concatenate([S, X], axis=1))
        B = self.base.phi(X)
        if self.context_mode == "product":
            # k1(s,s') = s·s'  =>  features are s_d * phi(x) stacked over d
            cols = [S[:, d:d + 1] * B for d in range(self.context_dim)]
            return np.concatenate(cols, axis=1)
        if self.context_mode == "linear-sum":
            return np.concatenate([np.sqrt(self.theta) * S, B], axis=1)
        raise ValueError(f"unknown context mode {self.context_mode!r}")

    def phi_value_grad_x(self, p) -> np.ndarray:
        """d phi_value / dx at a single value point: (rank, search_dim)."""
        p = as_packed(p)
        s, x = p[: self.context_dim], p[self.context_dim:]
        if self.context_mode == "none":
            return self.base.phi_grad(p)
        G = self.base.phi_grad(x)
        if self.context_mode == "product":
            return np.concatenate([s[d] * G for d in range(self.context_dim)], axis=0)
        if self.context_mode == "linear-sum":
            zeros = np.zeros((self.context_dim, G.shape[1]))
            return np.concatenate([zeros, G], axis=0)
        raise ValueError(f"unknown context mode {self.context_mode!r}")

    def phi(self, P) -> np.ndarray:
        """Features of packed observation points (duel-aware)."""
        if not self.preference:
            return self.phi_value(P)
        P = np.asarray(P, dtype=float)
        if P.ndim == 1:
            P = P[None, :]
        ds = self.context_dim
        dx = (P.shape[1] - ds) // 2
        first = np.concatenate([P[:, :ds], P[:, ds:ds + dx]], axis=1)
        second = np.concatenate([P[:, :ds], P[:, ds + dx:]], axis=1)
        return self.phi_value(first) - self.phi_value(second)


def preference_features(fmap: FeatureMap, x_i, x_j, s=None) -> np.ndarray:
    """Duel features phi(x_i) − phi(x_j) at context ``s`` (default zeros-free).

    Anti-symmetric in the two arguments by construction.
    """
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    x_j = np.atleast_1d(np.asarray(x_j, dtype=float))
    if s is None:
        s = np.ones(fmap.context_dim)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    pi = np.concatenate([s, x_i])
    pj = np.concatenate([s, x_j])
    return fmap.phi_value(pi)[0] - fmap.phi_value(pj)[0]


def build_feature_map(kernel: Kernel, box: Box, rank: int | None = None) -> FeatureMap:
    """Construct a feature map for ``kernel`` over the packed-point ``box``.

    For preference kernels the box may be the duel-packed box; only the
    leading value-point block is used.
    """
    if isinstance(kernel, PreferenceKernel):
        ds = kernel.context_dim
        dx = kernel.search_dim
        value_box = Box(box.lo[: ds + dx], box.hi[: ds + dx])
        inner = build_feature_map(kernel.base, value_box, rank)
        return FeatureMap(
            base=inner.base,
            context_mode=inner.context_mode,
            context_dim=inner.context_dim,
            theta=inner.theta,
            preference=True,
        )
    if isinstance(kernel, ProductContext):
        ds = kernel.context_dim
        x_box = Box(box.lo[ds:], box.hi[ds:])
        base = _build_stationary_map(kernel.base, x_box, rank)
        return FeatureMap(base=base, context_mode="product", context_dim=ds)
    if isinstance(kernel, LinearContextSum):
        ds = kernel.context_dim
        x_box = Box(box.lo[ds:], box.hi[ds:])
        base = _build_stationary_map(kernel.base, x_box, rank)
        return FeatureMap(
            base=base, context_mode="linear-sum", context_dim=ds, theta=kernel.theta
        )
    if isinstance(kernel, StationaryKernel):
        base = _build_stationary_map(kernel, box, rank)
        return FeatureMap(base=base, context_mode="none", context_dim=0)
    raise ValueError(f"unsupported kernel family for feature maps: {type(kernel).__name__}")
