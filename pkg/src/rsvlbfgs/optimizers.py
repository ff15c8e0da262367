"""Variance-reduced stochastic optimizers on manifolds.

``run_rsv_lbfgs`` is the quasi-Newton method; ``run_rsvrg`` (first-order
Riemannian SVRG) and ``run_vr_pca`` (Euclidean VR-PCA) are the baselines.
All three share the epoch structure: full gradient at an anchor, then ``m``
minibatch steps, and the last inner iterate becomes the next anchor. Each
epoch is booked as two passes over the data.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .lbfgs import OPTION1, OPTION2, LbfgsMemory, PairContext, correction_pair, two_loop
from .manifold import ManifoldError
from .problems import EigData, FiniteSumProblem, rayleigh_value

PASSES_PER_EPOCH = 2.0
DIVERGENCE_FACTOR = 1e6


class DivergenceError(RuntimeError):
    """Objective blew up; ``trace`` holds everything recorded so far."""

    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass(frozen=True)
class OptimizerConfig:
    eta1: float = 1e-3
    eta2: float = 0.1
    R: int = 1
    M: int = 2
    mb: int = 1
    m: int | None = None  # inner iterations per epoch; None -> ceil(N / mb)
    T: int = 50
    option: int = OPTION1
    seed: int = 0
    tol: float | None = None  # stop once error <= tol
    curvature_eps: float = 1e-8  # pair kept iff <y, z> > curvature_eps ||y|| ||z||

    def validate(self, N: int):
        if not (self.eta1 > 0 and self.eta2 > 0):
            raise ValueError("step sizes must be positive")
        if self.R < 1 or self.M < 1:
            raise ValueError("R and M must be >= 1")
        if not 1 <= self.mb <= N:
            raise ValueError(f"minibatch size must lie in [1, {N}]")
        if self.m is not None and self.m < 1:
            raise ValueError("m must be >= 1")
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if self.option not in (OPTION1, OPTION2):
            raise ValueError("option must be 1 or 2")

    def inner_count(self, N: int) -> int:
        return self.m if self.m is not None else math.ceil(N / self.mb)

    def with_(self, **kw) -> "OptimizerConfig":
        return replace(self, **kw)


@dataclass
class RunTrace:
    algorithm: str
    config: OptimizerConfig
    passes: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    error: list[float] = field(default_factory=list)
    epochs: list[dict] = field(default_factory=list)
    pairs_accepted: int = 0
    pairs_rejected: int = 0
    status: str = "ok"
    x: np.ndarray | None = None

    def record(self, passes, objective, error):
        self.passes.append(float(passes))
        self.objective.append(float(objective))
        self.error.append(float(error))

    def __len__(self):
        return len(self.passes)

    def passes_to(self, threshold: float) -> float:
        """First recorded pass count with error <= threshold (inf if never)."""
        for p, e in zip(self.passes, self.error):
            if e <= threshold:
                return p
        return math.inf

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["passes", "objective", "error"])
        for row in zip(self.passes, self.objective, self.error):
            w.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()

    def sidecar(self) -> str:
        lines = [f"algorithm={self.algorithm}", f"status={self.status}"]
        lines += [f"{k}={v}" for k, v in asdict(self.config).items()]
        lines += [f"pairs_accepted={self.pairs_accepted}", f"pairs_rejected={self.pairs_rejected}"]
        lines.append(f"epochs={len(self.epochs)}")
        return "\n".join(lines) + "\n"


def _sample(rng, N, mb):
    if mb == N:
        return rng.permutation(N)
    return rng.choice(N, size=mb, replace=False)


def vr_gradient(problem: FiniteSumProblem, x_cur, x_anchor, full_grad_anchor, batch, grad_cur=None, transport=None):
    """``grad_I(x) - Gamma(grad_I(anchor) - full_grad(anchor))``.

    ``grad_cur`` and ``transport`` (anchor -> x) may be passed in when the
    caller already has them.
    """
    if grad_cur is None:
        grad_cur = problem.grad(x_cur, batch)
    correction = problem.grad(x_anchor, batch) - full_grad_anchor
    if transport is None:
        transport = problem.manifold.transporter(x_anchor, x_cur)
    return grad_cur - transport(correction)


class _Run:
    """Bookkeeping shared by the manifold optimizers."""

    def __init__(self, name, problem, config, x0, error_fn):
        config.validate(problem.n_components)
        self.problem = problem
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.error_fn = error_fn or (lambda x: math.nan)
        self.x = np.array(problem.initial_point(np.random.default_rng(config.seed)) if x0 is None else x0, dtype=float)
        self.trace = RunTrace(name, config)
        self.f0 = problem.value(self.x)
        self.trace.record(0.0, self.f0, self.error_fn(self.x))

    def abort(self, msg):
        self.trace.status = "diverged"
        self.trace.x = self.x
        raise DivergenceError(msg, self.trace)

    def measure(self, epoch):
        f = self.problem.value(self.x)
        err = self.error_fn(self.x)
        self.trace.record(PASSES_PER_EPOCH * (epoch + 1), f, err)
        if not np.all(np.isfinite(self.x)) or not math.isfinite(f) or abs(f) > DIVERGENCE_FACTOR * max(abs(self.f0), 1.0):
            self.abort(f"objective {f:.3e} exceeded the divergence guard at epoch {epoch}")
        tol = self.config.tol
        return tol is not None and err <= tol

    def finish(self):
        self.trace.x = self.x
        return self.trace


def run_rsvrg(problem: FiniteSumProblem, config: OptimizerConfig, x0=None, error_fn=None, callback=None) -> RunTrace:
    """Minibatch Riemannian SVRG with constant step ``eta1``."""
    run = _Run("rsvrg", problem, config, x0, error_fn)
    M = problem.manifold
    N, mb = problem.n_components, config.mb
    m = config.inner_count(N)
    for epoch in range(config.T):
        anchor = run.x
        g_full = problem.grad(anchor)
        x = anchor
        try:
            for i in range(m):
                batch = _sample(run.rng, N, mb)
                nu = vr_gradient(problem, x, anchor, g_full, batch)
                if callback is not None:
                    callback({"epoch": epoch, "i": i, "x": x, "nu": nu, "batch": batch})
                x = M.retract(x, -config.eta1 * nu)
        except ManifoldError as exc:
            run.abort(f"geometry failure at epoch {epoch}: {exc}")
        run.x = x
        if run.measure(epoch):
            break
    return run.finish()


def run_rsv_lbfgs(problem: FiniteSumProblem, config: OptimizerConfig, x0=None, error_fn=None, callback=None) -> RunTrace:
    """Riemannian stochastic variance-reduced L-BFGS.

    First-order steps ``Exp_x(-eta1 nu)`` for the first ``2R`` iterations,
    then ``Exp_x(eta2 rho)`` with ``rho = -H nu`` from the two-loop
    recursion. A correction pair is formed every ``R`` iterations once two
    pair events have happened. The iteration counter is global across epochs.

    ``callback`` receives a dict per inner iteration (iterate, VR gradient,
    memory, whether a pair event happened) before the step is taken.
    """
    run = _Run("rsv-lbfgs", problem, config, x0, error_fn)
    M = problem.manifold
    N, mb, R = problem.n_components, config.mb, config.R
    m = config.inner_count(N)
    memory = LbfgsMemory(M, config.M, config.curvature_eps)
    memory.base = run.x
    c, r = 1, 0
    u_prev = nu_prev = None
    step_base = step = None

    for epoch in range(config.T):
        anchor = run.x
        g_full = problem.grad(anchor)
        x = anchor
        norms, gaps = [], []
        acc0, rej0 = memory.accepted, memory.rejected
        try:
            for i in range(m):
                batch = _sample(run.rng, N, mb)
                g_cur = problem.grad(x, batch)
                nu = vr_gradient(problem, x, anchor, g_full, batch, grad_cur=g_cur)
                pair_event = c % R == 0
                if pair_event:
                    r += 1
                    if r >= 2:
                        ctx = PairContext(u_prev, nu_prev, step_base, step, batch, g_cur, config.eta1)
                        z, y = correction_pair(problem, config.option, x, ctx)
                        memory.offer(x, z, y)
                        if R > 1:
                            # z spans one step while y spans R of them; log the mismatch
                            gaps.append(M.norm(x, z + M.log(x, u_prev)))
                    u_prev, nu_prev = x, nu
                if callback is not None:
                    callback({"epoch": epoch, "i": i, "c": c, "x": x, "nu": nu, "batch": batch,
                              "memory": memory, "pair_event": pair_event and r >= 2})
                if c < 2 * R or not len(memory):
                    # no usable pair yet (warm-up, or every pair so far was rejected)
                    step = -config.eta1 * nu
                else:
                    step = config.eta2 * two_loop(memory, nu, x)
                    norms.append(M.norm(x, step))
                step_base = x
                x_next = M.retract(x, step)
                memory.transport_to(x_next)
                x = x_next
                c += 1
        except ManifoldError as exc:
            run.abort(f"geometry failure at epoch {epoch}: {exc}")
        run.x = x
        run.trace.epochs.append({
            "epoch": epoch,
            "pairs_accepted": memory.accepted - acc0,
            "pairs_rejected": memory.rejected - rej0,
            "step_norm_mean": float(np.mean(norms)) if norms else 0.0,
            "step_norm_max": float(np.max(norms)) if norms else 0.0,
            "z_displacement_gap": float(np.max(gaps)) if gaps else 0.0,
        })
        run.trace.pairs_accepted, run.trace.pairs_rejected = memory.accepted, memory.rejected
        if run.measure(epoch):
            break
    return run.finish()


def run_vr_pca(data: EigData, config: OptimizerConfig, x0=None, error_fn=None, callback=None) -> RunTrace:
    """Euclidean VR-PCA with minibatched rank-one corrections.

    Epoch: ``u = (1/N) D D^T w_anchor``. Inner step on batch ``I``:
    ``w <- w + eta1 * (mean_I d_i d_i^T (w - w_anchor) + u)``, then ``w /= ||w||``.
    """
    D = data.D
    d, N = D.shape
    config.validate(N)
    rng = np.random.default_rng(config.seed)
    if x0 is None:
        from .sphere import Sphere

        x0 = Sphere(d).random_point(np.random.default_rng(config.seed))
    w = np.array(x0, dtype=float)
    w /= np.linalg.norm(w)
    error_fn = error_fn or (lambda z: math.nan)
    trace = RunTrace("vr-pca", config)
    f0 = rayleigh_value(w, data)
    trace.record(0.0, f0, error_fn(w))
    m = config.inner_count(N)
    for epoch in range(config.T):
        anchor = w
        u = D @ (D.T @ anchor) / N
        for i in range(m):
            batch = _sample(rng, N, config.mb)
            Di = D[:, batch]
            if callback is not None:
                callback({"epoch": epoch, "i": i, "x": w, "batch": batch})
            w = w + config.eta1 * (Di @ (Di.T @ (w - anchor)) / len(batch) + u)
            w = w / np.linalg.norm(w)
        f = rayleigh_value(w, data)
        err = error_fn(w)
        trace.record(PASSES_PER_EPOCH * (epoch + 1), f, err)
        if not np.all(np.isfinite(w)) or abs(f) > DIVERGENCE_FACTOR * max(abs(f0), 1.0):
            trace.status = "diverged"
            trace.x = w
            raise DivergenceError(f"VR-PCA diverged at epoch {epoch}", trace)
        if config.tol is not None and err <= config.tol:
            break
    trace.x = w
    return trace
