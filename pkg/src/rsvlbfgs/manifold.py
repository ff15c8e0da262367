"""Manifold interface consumed generically by the optimizers.

Points and tangent vectors are plain ndarrays. A manifold object owns
the metric and every map between them, so the same array can be read
as a point or a tangent vector depending on which slot it is passed in.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Callable

import numpy as np

MEMBERSHIP_TOL = 1e-10


class ManifoldError(Exception):
    """Base class for geometry failures."""


class DomainError(ManifoldError, ValueError):
    """Input outside the domain of a map (cut locus, non-PD matrix, ...)."""


class BaseMismatchError(ManifoldError, ValueError):
    """Tangent vectors combined at different base points."""


class Manifold(ABC):
    """Riemannian manifold with exact exponential map and parallel transport.

    Subclasses implement ``inner``, ``retract``, ``log``, ``transporter``
    and the membership predicates; ``dist``, ``norm`` and ``transport``
    derive from them.
    """

    #: intrinsic dimension of the tangent spaces
    dim: int
    #: shape of the arrays that represent points and tangent vectors
    shape: tuple[int, ...]

    @abstractmethod
    def inner(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> float | np.ndarray:
        """Metric at ``x``. Leading axes of ``u``/``v`` broadcast."""

    @abstractmethod
    def retract(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Exponential map ``Exp_x(v)``."""

    @abstractmethod
    def log(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Inverse exponential map ``Log_x(y)``."""

    @abstractmethod
    def transporter(self, x: np.ndarray, y: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        """Parallel transport ``T_x -> T_y`` along the minimizing geodesic.

        The returned callable can be applied to many vectors; the geodesic
        is only resolved once.
        """

    @abstractmethod
    def project(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Orthogonal projection of an ambient array onto ``T_x``."""

    @abstractmethod
    def belongs(self, x: np.ndarray, atol: float = MEMBERSHIP_TOL) -> bool: ...

    @abstractmethod
    def is_tangent(self, x: np.ndarray, v: np.ndarray, atol: float = MEMBERSHIP_TOL) -> bool: ...

    @abstractmethod
    def random_point(self, rng: np.random.Generator) -> np.ndarray: ...

    @abstractmethod
    def tangent_basis(self, x: np.ndarray) -> np.ndarray:
        """A (not necessarily orthonormal) basis of ``T_x``, stacked on axis 0."""

    def random_tangent(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Tangent vector at ``x`` with unit norm in the metric."""
        v = self.project(x, rng.standard_normal(self.shape))
        return v / self.norm(x, v)

    def zero_tangent(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(self.shape)

    def norm(self, x: np.ndarray, v: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(x, v, v), 0.0)))

    def dist(self, x: np.ndarray, y: np.ndarray) -> float:
        return self.norm(x, self.log(x, y))

    def transport(self, x: np.ndarray, y: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.transporter(x, y)(u)

    def gram(self, x: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """Gram matrix ``G[i, j] = inner(x, vs[i], vs[j])``."""
        k = len(vs)
        G = np.empty((k, k))
        for i in range(k):
            G[i, :] = self.inner(x, vs[i], vs)
        return 0.5 * (G + G.T)


class Euclidean(Manifold):
    """Flat space R^d: identity transports, straight-line exponential map.

    Used as the flat reference geometry in tests and in sanity problems
    where the exact answer is known in closed form.
    """

    def __init__(self, d: int):
        self.dim = d
        self.shape = (d,)

    def __repr__(self):
        return f"Euclidean({self.dim})"

    def inner(self, x, u, v):
        return np.sum(u * v, axis=-1)

    def retract(self, x, v):
        return x + v

    def log(self, x, y):
        return y - x

    def transporter(self, x, y):
        return lambda u: np.array(u, dtype=float, copy=True)

    def project(self, x, g):
        return np.asarray(g, dtype=float)

    def belongs(self, x, atol=MEMBERSHIP_TOL):
        return x.shape == self.shape and bool(np.all(np.isfinite(x)))

    def is_tangent(self, x, v, atol=MEMBERSHIP_TOL):
        return v.shape == self.shape

    def random_point(self, rng):
        return rng.standard_normal(self.shape)

    def tangent_basis(self, x):
        return np.eye(self.dim)

    def gram(self, x, vs):
        return vs @ vs.T
