"""Symmetric positive-definite matrices with the affine-invariant metric.

All matrix functions go through the symmetric eigendecomposition, and every
kernel output is re-symmetrized. Point/tangent arguments may carry leading
batch axes wherever that is noted.
"""
from __future__ import annotations

import numpy as np

from .manifold import MEMBERSHIP_TOL, DomainError, Manifold

_FUNCS = {
    "expm": (np.exp, False),
    "logm": (np.log, True),
    "sqrtm": (np.sqrt, True),
    "invsqrtm": (lambda w: 1.0 / np.sqrt(w), True),
}


def sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _apply(Q, f):
    # Q diag(f) Q^T, batched
    return sym((Q * f[..., None, :]) @ np.swapaxes(Q, -1, -2))


def sym_funcs(A: np.ndarray, which: str) -> np.ndarray:
    """Matrix function of a symmetric matrix via ``Q f(Lambda) Q^T``.

    Parameters
    ----------
    A : ndarray, shape (..., n, n)
        Symmetric matrix or stack of them.
    which : {"expm", "logm", "sqrtm", "invsqrtm"}

    Raises
    ------
    DomainError
        If ``which`` needs a positive-definite argument and ``A`` is not.
    """
    try:
        f, needs_pd = _FUNCS[which]
    except KeyError:
        raise ValueError(f"unknown matrix function {which!r}") from None
    w, Q = np.linalg.eigh(sym(A))
    if needs_pd and np.any(w <= 0):
        raise DomainError(f"{which} needs a positive-definite matrix (min eigenvalue {w.min():.3e})")
    return _apply(Q, f(w))


def expm(A):
    return sym_funcs(A, "expm")


def logm(A):
    return sym_funcs(A, "logm")


def sqrtm(A):
    return sym_funcs(A, "sqrtm")


def invsqrtm(A):
    return sym_funcs(A, "invsqrtm")


def sqrt_and_invsqrt(x):
    """``(x^{1/2}, x^{-1/2})`` from one eigendecomposition."""
    w, Q = np.linalg.eigh(sym(x))
    if np.any(w <= 0):
        raise DomainError("matrix is not positive definite")
    r = np.sqrt(w)
    return _apply(Q, r), _apply(Q, 1.0 / r)


class SPD(Manifold):
    """n x n SPD matrices, metric ``<u, v>_x = tr(x^{-1} u x^{-1} v)``."""

    def __init__(self, n: int):
        self.n = n
        self.dim = n * (n + 1) // 2
        self.shape = (n, n)

    def __repr__(self):
        return f"SPD({self.n})"

    def inner(self, x, u, v):
        a = np.linalg.solve(x, u)
        b = np.linalg.solve(x, v)
        return np.einsum("...ij,...ji->...", a, b)

    def retract(self, x, v):
        s, si = sqrt_and_invsqrt(x)
        return sym(s @ expm(si @ v @ si) @ s)

    def log(self, x, y):
        """``Log_x(y)``; ``y`` may be a stack of points."""
        s, si = sqrt_and_invsqrt(x)
        return sym(s @ logm(si @ y @ si) @ s)

    def dist(self, x, y):
        _, si = sqrt_and_invsqrt(x)
        w = np.linalg.eigvalsh(sym(si @ y @ si))
        return float(np.sqrt(np.sum(np.log(w) ** 2)))

    def transporter(self, x, y):
        s, si = sqrt_and_invsqrt(x)
        half = expm(0.5 * logm(si @ y @ si))
        E = s @ half @ si

        def transport(u):
            return sym(E @ u @ E.T)

        return transport

    def project(self, x, g):
        return sym(np.asarray(g, dtype=float))

    def belongs(self, x, atol=MEMBERSHIP_TOL):
        if x.shape != self.shape or not np.all(np.isfinite(x)):
            return False
        if np.linalg.norm(x - x.T) > atol * np.linalg.norm(x):
            return False
        return bool(np.linalg.eigvalsh(sym(x))[0] > 0)

    def is_tangent(self, x, v, atol=MEMBERSHIP_TOL):
        return v.shape == self.shape and np.linalg.norm(v - v.T) <= atol * max(np.linalg.norm(v), 1e-300)

    def random_point(self, rng, spread=1.0):
        """Random orthogonal frame with log-normal eigenvalues."""
        Q, _ = np.linalg.qr(rng.standard_normal(self.shape))
        return _apply(Q, np.exp(spread * rng.standard_normal(self.n)))

    def tangent_basis(self, x):
        n = self.n
        out = np.zeros((self.dim, n, n))
        k = 0
        for i in range(n):
            out[k, i, i] = 1.0
            k += 1
            for j in range(i + 1, n):
                out[k, i, j] = out[k, j, i] = 1.0 / np.sqrt(2.0)
                k += 1
        return out

    def gram(self, x, vs):
        a = np.linalg.solve(x, vs)
        k = len(vs)
        G = a.reshape(k, -1) @ np.swapaxes(a, -1, -2).reshape(k, -1).T
        return sym(G)
