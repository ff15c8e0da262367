"""Unit sphere S^{d-1} embedded in R^d with the induced metric."""
from __future__ import annotations

import warnings

import numpy as np

from .manifold import MEMBERSHIP_TOL, DomainError, Manifold

ANTIPODAL_TOL = 1e-12
NEAR_ANTIPODAL = -0.999


class NearCutLocusWarning(RuntimeWarning):
    pass


class Sphere(Manifold):
    """Unit sphere in R^d; tangent space at x is the hyperplane x^T v = 0."""

    def __init__(self, d: int):
        if d < 2:
            raise ValueError("sphere needs ambient dimension >= 2")
        self.d = d
        self.dim = d - 1
        self.shape = (d,)

    def __repr__(self):
        return f"Sphere({self.d})"

    def inner(self, x, u, v):
        return np.sum(u * v, axis=-1)

    def retract(self, x, v):
        t = np.linalg.norm(v)
        if t == 0.0:
            return x.copy()
        y = np.cos(t) * x + np.sin(t) * (v / t)
        return y / np.linalg.norm(y)

    def log(self, x, y):
        c = float(x @ y)
        if c <= -1.0 + ANTIPODAL_TOL:
            raise DomainError("log on the sphere is undefined at the antipode")
        if c < NEAR_ANTIPODAL:
            warnings.warn(f"x^T y = {c:.6f} is close to the cut locus", NearCutLocusWarning, stacklevel=2)
        w = y - c * x
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return np.zeros_like(x)
        # atan2(sin, cos) keeps full relative accuracy for small angles, where arccos(c) does not
        theta = np.arctan2(nw, c)
        return theta * (w / nw)

    def transporter(self, x, y):
        v = self.log(x, y)
        theta = np.linalg.norm(v)
        if theta == 0.0:
            return lambda u: np.array(u, dtype=float, copy=True)
        w = v / theta
        cm1, s = np.cos(theta) - 1.0, np.sin(theta)

        def transport(u):
            a = np.asarray(u) @ w
            return u + np.multiply.outer(cm1 * a, w) - np.multiply.outer(s * a, x)

        return transport

    def project(self, x, g):
        g = np.asarray(g, dtype=float)
        return g - np.multiply.outer(g @ x, x)

    def belongs(self, x, atol=MEMBERSHIP_TOL):
        return x.shape == self.shape and abs(np.linalg.norm(x) - 1.0) <= atol

    def is_tangent(self, x, v, atol=MEMBERSHIP_TOL):
        return v.shape == self.shape and abs(x @ v) <= atol * np.linalg.norm(v)

    def random_point(self, rng):
        x = rng.standard_normal(self.d)
        return x / np.linalg.norm(x)

    def tangent_basis(self, x):
        # drop the coordinate axis most aligned with x so the rest stay independent
        keep = np.delete(np.arange(self.d), np.argmax(np.abs(x)))
        return self.project(x, np.eye(self.d)[keep])

    def gram(self, x, vs):
        return vs @ vs.T
