"""Finite-sum objectives, synthetic data generators and ground-truth oracles.

Two benchmark problems live here:

* Karcher mean of SPD matrices, ``f(W) = (1/N) sum_i d(W, X_i)^2`` on SPD(n).
* Leading eigenvector, ``f(z) = -(1/N) ||D^T z||^2`` on the unit sphere.

Component gradients are Riemannian gradients. ``grad(x, idx)`` returns the
mean over ``idx`` so that minibatch, component and full gradients share one
code path.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .manifold import Euclidean, Manifold
from .sphere import Sphere
from .spd import SPD, logm, sqrt_and_invsqrt, sym

KARCHER_KIND = "karcher"
EIG_KIND = "eig"


class OracleError(RuntimeError):
    """Ground-truth computation did not certify its answer."""


class FiniteSumProblem(ABC):
    """``f(x) = (1/N) sum_i f_i(x)`` over a manifold."""

    manifold: Manifold
    n_components: int

    def _check_idx(self, idx):
        if idx is None:
            return slice(None), self.n_components
        idx = np.atleast_1d(np.asarray(idx))
        if idx.size == 0:
            raise ValueError("empty index set")
        if idx.min() < 0 or idx.max() >= self.n_components:
            raise IndexError(f"component index out of range [0, {self.n_components})")
        return idx, idx.size

    @abstractmethod
    def value(self, x, idx=None) -> float:
        """Mean of component values over ``idx`` (all components if None)."""

    @abstractmethod
    def grad(self, x, idx=None) -> np.ndarray:
        """Mean of component Riemannian gradients over ``idx``."""

    def component_grad(self, x, i: int) -> np.ndarray:
        return self.grad(x, [i])

    def component_value(self, x, i: int) -> float:
        return self.value(x, [i])

    @abstractmethod
    def initial_point(self, rng: np.random.Generator | None = None) -> np.ndarray: ...


# ---------------------------------------------------------------------------
# Karcher mean on SPD


@dataclass(frozen=True, eq=False)
class KarcherData:
    matrices: np.ndarray  # (N, n, n)
    cond: float
    seed: int

    @property
    def n(self):
        return self.matrices.shape[1]

    @property
    def count(self):
        return self.matrices.shape[0]

    kind = KARCHER_KIND

    def params(self):
        return {"kind": self.kind, "n": self.n, "count": self.count, "cond": self.cond, "seed": self.seed}


def gen_spd_data(n: int, count: int, cond: float, seed: int) -> KarcherData:
    """Random SPD matrices ``Q_i diag(lam_i) Q_i^T`` with condition number ``cond``.

    The eigenvalues are log-uniform on ``[1, cond]`` with the two endpoints
    pinned, so every matrix hits the requested condition number exactly.
    """
    if cond < 1:
        raise ValueError("condition number must be >= 1")
    if n < 1 or count < 1:
        raise ValueError("n and count must be positive")
    rng = np.random.default_rng(seed)
    out = np.empty((count, n, n))
    logc = np.log(cond)
    for k in range(count):
        Q, R = np.linalg.qr(rng.standard_normal((n, n)))
        Q = Q * np.sign(np.diag(R))
        t = rng.uniform(0.0, 1.0, size=n)
        if n >= 2:
            t[0], t[1] = 0.0, 1.0
        lam = np.exp(logc * t)
        out[k] = sym((Q * lam) @ Q.T)
    return KarcherData(out, float(cond), int(seed))


class KarcherProblem(FiniteSumProblem):
    """Mean squared affine-invariant distance to a set of SPD matrices."""

    def __init__(self, data: KarcherData):
        self.data = data
        self.manifold = SPD(data.n)
        self.n_components = data.count

    def _whitened(self, W, idx):
        s, si = sqrt_and_invsqrt(W)
        return s, sym(si @ self.data.matrices[idx] @ si)

    def value(self, W, idx=None):
        idx, k = self._check_idx(idx)
        _, C = self._whitened(W, idx)
        w = np.linalg.eigvalsh(C)
        return float(np.sum(np.log(w) ** 2) / k)

    def grad(self, W, idx=None):
        idx, k = self._check_idx(idx)
        s, C = self._whitened(W, idx)
        mean_log = np.sum(logm(C), axis=0) / k
        return sym(-2.0 * (s @ mean_log @ s))

    def initial_point(self, rng=None):
        return np.eye(self.data.n)


def karcher_value(W, data: KarcherData) -> float:
    return KarcherProblem(data).value(W)


def karcher_grad_component(W, i: int, data: KarcherData) -> np.ndarray:
    return KarcherProblem(data).component_grad(W, i)


def karcher_oracle(data: KarcherData, tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """Karcher mean by the batch fixed point ``W <- Exp_W(mean_i Log_W X_i)``.

    Starts from the arithmetic mean and stops once the metric norm of the
    mean log is at most ``tol``; that norm is half the full gradient norm,
    so the returned point certifies itself.
    """
    X = data.matrices
    if len(X) == 0:
        raise OracleError("empty data set")
    M = SPD(data.n)
    W = sym(np.mean(X, axis=0))
    best = np.inf
    stall = 0
    for _ in range(max_iter):
        V = np.mean(M.log(W, X), axis=0)
        nv = M.norm(W, V)
        if nv <= tol:
            return W
        # rounding floor: no progress for many iterations means tol is unreachable
        if nv < best * (1 - 1e-3):
            best, stall = nv, 0
        else:
            stall += 1
            if stall > 50:
                break
        W = M.retract(W, V)
    raise OracleError(f"Karcher fixed point did not reach tol={tol:g} (last mean-log norm {nv:.3e})")


def karcher_error(W, W_star) -> float:
    """Squared Frobenius error ``||W - W*||_F^2``."""
    W, W_star = np.asarray(W), np.asarray(W_star)
    if W.shape != W_star.shape:
        raise ValueError("shape mismatch")
    return float(np.sum((W - W_star) ** 2))


# ---------------------------------------------------------------------------
# Leading eigenvector on the sphere


@dataclass(frozen=True, eq=False)
class EigData:
    D: np.ndarray  # (d, N), columns are samples
    gap: float
    seed: int
    spectrum: np.ndarray | None = field(default=None, repr=False)

    kind = EIG_KIND

    @property
    def d(self):
        return self.D.shape[0]

    @property
    def N(self):
        return self.D.shape[1]

    def params(self):
        return {"kind": self.kind, "d": self.d, "N": self.N, "gap": self.gap, "seed": self.seed}

    def covariance(self):
        return self.D @ self.D.T / self.N


def eig_spectrum(d: int, gap: float) -> np.ndarray:
    mu = np.empty(d)
    mu[0] = 1.0
    if d > 1:
        mu[1:] = (1.0 - gap) * 0.9 ** np.arange(d - 1)
    return mu


def gen_eig_data(d: int, N: int, gap: float, seed: int) -> EigData:
    """``D = sqrt(N) U diag(sqrt(mu)) V^T`` whose covariance has spectrum ``mu``.

    ``mu = (1, 1-gap, (1-gap)*0.9, (1-gap)*0.9^2, ...)``, ``U`` random
    orthogonal (d x d) and ``V`` (N x d) with orthonormal columns.
    """
    if not 0 < gap < 1:
        raise ValueError("eigengap must lie in (0, 1)")
    if N < d:
        raise ValueError("need N >= d for an exact spectrum")
    rng = np.random.default_rng(seed)
    U, R = np.linalg.qr(rng.standard_normal((d, d)))
    U = U * np.sign(np.diag(R))
    V, R = np.linalg.qr(rng.standard_normal((N, d)))
    V = V * np.sign(np.diag(R))
    mu = eig_spectrum(d, gap)
    D = np.sqrt(N) * ((U * np.sqrt(mu)) @ V.T)
    return EigData(np.ascontiguousarray(D), float(gap), int(seed), mu)


class RayleighProblem(FiniteSumProblem):
    """``f(z) = -(1/N) sum_i (d_i^T z)^2`` on the unit sphere."""

    def __init__(self, data: EigData):
        self.data = data
        self.manifold = Sphere(data.d)
        self.n_components = data.N

    def value(self, z, idx=None):
        idx, k = self._check_idx(idx)
        p = self.data.D[:, idx].T @ z
        return float(-(p @ p) / k)

    def grad(self, z, idx=None):
        idx, k = self._check_idx(idx)
        Di = self.data.D[:, idx]
        g = (-2.0 / k) * (Di @ (Di.T @ z))
        return self.manifold.project(z, g)

    def initial_point(self, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        return self.manifold.random_point(rng)


def rayleigh_value(z, data: EigData) -> float:
    return RayleighProblem(data).value(z)


def rayleigh_grad_component(z, i: int, data: EigData) -> np.ndarray:
    return RayleighProblem(data).component_grad(z, i)


def top_eig_oracle(data: EigData) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of ``(1/N) D D^T`` by dense symmetric eigensolver."""
    w, Q = np.linalg.eigh(data.covariance())
    z = Q[:, -1]
    # deterministic sign
    z = z if z[np.argmax(np.abs(z))] > 0 else -z
    return float(w[-1]), z


def eig_error(z, data: EigData, e_star: float) -> float:
    """``1 - ||D^T z||^2 / (N e*)``, floored at zero against rounding."""
    p = data.D.T @ z
    return max(0.0, float(1.0 - (p @ p) / (data.N * e_star)))


# ---------------------------------------------------------------------------
# Flat reference problem


class QuadraticProblem(FiniteSumProblem):
    """``f_i(w) = 0.5 w^T A_i w - b_i^T w`` on flat R^d.

    The minimizer and Hessian are known in closed form, which makes this
    the reference case for quasi-Newton and descent tests.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.A = np.asarray(A, dtype=float)  # (N, d, d)
        self.b = np.asarray(b, dtype=float)  # (N, d)
        self.n_components, d = self.b.shape
        self.manifold = Euclidean(d)

    @classmethod
    def random(cls, d: int, N: int, seed: int = 0, cond: float = 10.0):
        rng = np.random.default_rng(seed)
        A = np.empty((N, d, d))
        for i in range(N):
            Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
            A[i] = sym((Q * np.exp(np.log(cond) * rng.uniform(size=d))) @ Q.T)
        return cls(A, rng.standard_normal((N, d)))

    @property
    def hessian(self):
        return self.A.mean(axis=0)

    def minimizer(self):
        return np.linalg.solve(self.hessian, self.b.mean(axis=0))

    def value(self, w, idx=None):
        idx, k = self._check_idx(idx)
        A, b = self.A[idx], self.b[idx]
        return float((0.5 * np.einsum("i,kij,j->", w, A, w) - np.sum(b @ w)) / k)

    def grad(self, w, idx=None):
        idx, k = self._check_idx(idx)
        return (np.sum(self.A[idx] @ w, axis=0) - np.sum(self.b[idx], axis=0)) / k

    def initial_point(self, rng=None):
        return np.zeros(self.manifold.dim)
