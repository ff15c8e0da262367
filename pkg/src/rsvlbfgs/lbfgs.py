"""Limited-memory BFGS on a manifold: correction pairs, memory, two-loop.

Every stored pair lives in the tangent space of the current iterate. When the
iterate moves, the whole memory is parallel-transported along the connecting
geodesic, so the two-loop recursion never mixes tangent spaces.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .manifold import BaseMismatchError, Manifold

CURVATURE_EPS = 1e-8

OPTION1 = 1
OPTION2 = 2


class EmptyMemoryError(ValueError):
    pass


@dataclass(frozen=True)
class CorrectionPair:
    z: np.ndarray
    y: np.ndarray
    base: np.ndarray
    yz: float
    yy: float

    @classmethod
    def build(cls, manifold: Manifold, base, z, y):
        yz = float(manifold.inner(base, y, z))
        yy = float(manifold.inner(base, y, y))
        return cls(z, y, base, yz, yy)

    def moved(self, manifold, new_base, transport):
        # transport is an isometry; recompute anyway so cached values match the base
        return CorrectionPair.build(manifold, new_base, transport(self.z), transport(self.y))


def _same_point(a, b):
    return a is b or (a.shape == b.shape and np.array_equal(a, b))


class LbfgsMemory:
    """Ring of at most ``depth`` correction pairs sharing one base point."""

    def __init__(self, manifold: Manifold, depth: int, curvature_eps: float = CURVATURE_EPS):
        if depth < 1:
            raise ValueError("memory depth must be >= 1")
        self.manifold = manifold
        self.depth = depth
        self.curvature_eps = curvature_eps
        self.pairs: deque[CorrectionPair] = deque(maxlen=depth)
        self.base = None
        self.accepted = 0
        self.rejected = 0

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def offer(self, x, z, y) -> bool:
        """Append ``(z, y)`` at ``x`` if it passes the curvature test.

        Rejects when ``<y, z> <= eps ||y|| ||z||``; the oldest pair is
        evicted once the ring is full.
        """
        if self.base is not None and len(self.pairs) and not _same_point(self.base, x):
            raise BaseMismatchError("memory is based at a different point than the new pair")
        pair = CorrectionPair.build(self.manifold, x, z, y)
        zz = float(self.manifold.inner(x, z, z))
        if not pair.yz > self.curvature_eps * np.sqrt(max(pair.yy, 0.0) * max(zz, 0.0)) or zz == 0.0:
            self.rejected += 1
            return False
        self.pairs.append(pair)
        self.base = x
        self.accepted += 1
        return True

    def transport_to(self, y, transport=None):
        """Move every stored pair to ``T_y``."""
        if not self.pairs:
            self.base = y
            return
        if transport is None:
            transport = self.manifold.transporter(self.base, y)
        self.pairs = deque((p.moved(self.manifold, y, transport) for p in self.pairs), maxlen=self.depth)
        self.base = y

    def snapshot(self):
        """Copy of the current pairs (oldest first)."""
        return list(self.pairs)


def two_loop(memory: LbfgsMemory, v: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Descent direction ``-H v`` from the two-loop recursion.

    ``H_0`` is the scaled identity ``(y^T z / y^T y) I`` of the newest pair.
    The sign is already applied, so the caller steps along ``+eta * result``.
    """
    if not memory.pairs:
        raise EmptyMemoryError("two-loop recursion needs at least one correction pair")
    if not _same_point(memory.base, x):
        raise BaseMismatchError("correction pairs are not based at x")
    inner = memory.manifold.inner
    pairs = memory.pairs
    q = np.array(v, dtype=float, copy=True)
    alphas = []
    for p in reversed(pairs):
        a = inner(x, p.z, q) / p.yz
        q = q - a * p.y
        alphas.append(a)
    last = pairs[-1]
    q = (last.yz / last.yy) * q
    for p, a in zip(pairs, reversed(alphas)):
        b = inner(x, p.y, q) / p.yz
        q = q + (a - b) * p.z
    return -q


@dataclass
class PairContext:
    """What a correction-pair event needs besides the new iterate.

    ``u_prev``/``nu_prev`` are the iterate and VR gradient recorded at the
    previous pair event; ``step_base``/``step`` the most recent step taken.
    ``grad_new`` is the minibatch gradient at the new iterate on ``batch``.
    """

    u_prev: np.ndarray
    nu_prev: np.ndarray
    step_base: np.ndarray
    step: np.ndarray
    batch: np.ndarray
    grad_new: np.ndarray
    eta1: float


def correction_pair(problem, option: int, x_new, ctx: PairContext):
    """``(z_r, y_r)`` in ``T_{x_new}``.

    Option 1 transports the last step taken, option 2 transports
    ``-eta1 * nu_prev``; ``y_r`` differences minibatch gradients at ``x_new``
    and ``u_prev`` on the same batch.
    """
    M = problem.manifold
    to_new = M.transporter(ctx.u_prev, x_new)
    if option == OPTION1:
        z = M.transport(ctx.step_base, x_new, ctx.step)
    elif option == OPTION2:
        z = to_new(-ctx.eta1 * ctx.nu_prev)
    else:
        raise ValueError(f"unknown correction option {option!r}")
    y = ctx.grad_new - to_new(problem.grad(ctx.u_prev, ctx.batch))
    return z, y


def update_memory(memory: LbfgsMemory, problem, option: int, x_new, ctx: PairContext) -> bool:
    """Compute the pair for ``x_new`` and offer it to ``memory``."""
    z, y = correction_pair(problem, option, x_new, ctx)
    return memory.offer(x_new, z, y)
