"""Executable diagnostics for the theory behind the optimizers.

Each check returns a :class:`DiagnosticReport`, a flat list of named rows
``(check, name, measured, bound, passed)`` that renders as a text table or
CSV. Quantities that are only informative (empirical constants, rejection
counts) are reported with ``bound = nan`` and always pass.

Dense reconstructions work in an orthonormal basis of the tangent space,
built from the manifold's spanning basis by a Cholesky factor of its Gram
matrix (equivalent to Gram-Schmidt under the metric).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .lbfgs import CorrectionPair, LbfgsMemory, two_loop
from .manifold import Manifold
from .problems import FiniteSumProblem

FD_STEP = 1e-6
FD_TOL = 1e-4
TWO_LOOP_TOL = 1e-10
TRIANGLE_TOL = 1e-9
HESSIAN_BOUND_RTOL = 1e-9

SPD_CURVATURE_LOWER = -0.5
SPHERE_CURVATURE_LOWER = 0.0


# ---------------------------------------------------------------------------
# report plumbing


@dataclass
class CheckResult:
    check: str
    name: str
    measured: float
    bound: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.bound - self.measured


@dataclass
class DiagnosticReport:
    """Named check results plus where their inputs came from."""

    results: list[CheckResult] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def add(self, check, name, measured, bound=math.nan, passed=None):
        """Record a row; by default it passes iff ``measured <= bound`` (nan bound: informational)."""
        measured, bound = float(measured), float(bound)
        if passed is None:
            passed = math.isnan(bound) or measured <= bound
        self.results.append(CheckResult(check, name, measured, bound, bool(passed)))
        return self

    def extend(self, other: "DiagnosticReport"):
        self.results.extend(other.results)
        for k, v in other.provenance.items():
            self.provenance.setdefault(k, v)
        return self

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if not r.passed]

    def get(self, check, name) -> CheckResult:
        for r in self.results:
            if r.check == check and r.name == name:
                return r
        raise KeyError((check, name))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "name", "measured", "bound", "pass"])
        for r in self.results:
            w.writerow([r.check, r.name, f"{r.measured:.17g}", f"{r.bound:.17g}", int(r.passed)])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"# {k}={v}" for k, v in self.provenance.items()]
        lines.append(f"{'check':<22} {'name':<28} {'measured':>14} {'bound':>14}  status")
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            lines.append(f"{r.check:<22} {r.name:<28} {r.measured:>14.6g} {r.bound:>14.6g}  {status}")
        return "\n".join(lines) + "\n"


@dataclass
class ConvergenceConstants:
    """Constants appearing in the convergence analysis.

    Any field may be left as ``None`` when it is not known; the rate report
    only reads ``L``, ``S``, ``kappa``, ``gamma_lo`` and ``Gamma_hi``.
    """

    L: float | None = None
    S: float | None = None
    kappa: float | None = None
    gamma_lo: float | None = None
    Gamma_hi: float | None = None
    lambda_lo: float | None = None
    Lambda_hi: float | None = None
    c_delta: float | None = None
    d_diam: float | None = None
    zeta: float | None = None
    beta_rate: float | None = None
    p_const: float | None = None
    q_prime: float | None = None
    mu0: float | None = None
    alpha1: float | None = None
    alpha2: float | None = None
    eps: float | None = None


# ---------------------------------------------------------------------------
# tangent-space linear algebra


def orthonormal_basis(manifold: Manifold, x) -> np.ndarray:
    """Orthonormal basis of ``T_x`` under the manifold metric, shape ``(dim, *shape)``."""
    B = manifold.tangent_basis(x)
    G = manifold.gram(x, B)
    Lc = np.linalg.cholesky(G)
    flat = B.reshape(len(B), -1)
    Q = np.linalg.solve(Lc, flat)  # L^{-1} B has Gram matrix I
    return Q.reshape(B.shape)


def coords(manifold: Manifold, x, basis, v) -> np.ndarray:
    """Coordinates of tangent vector ``v`` in an orthonormal ``basis``."""
    return np.asarray(manifold.inner(x, basis, v), dtype=float)


def dense_inverse_bfgs(Z, Y, h0: float) -> np.ndarray:
    """Inverse BFGS matrix from pairs (rows of ``Z``, ``Y``), oldest first.

    ``H <- (I - r z y^T) H (I - r y z^T) + r z z^T`` with ``r = 1 / y^T z``,
    starting from ``H_0 = h0 I``.
    """
    k = Z.shape[1]
    H = h0 * np.eye(k)
    I = np.eye(k)
    for z, y in zip(Z, Y):
        r = 1.0 / (y @ z)
        V = I - r * np.outer(y, z)
        H = V.T @ H @ V + r * np.outer(z, z)
    return H


def dense_bfgs(Z, Y, b0: float) -> np.ndarray:
    """Direct BFGS matrix ``B <- B - B z z^T B / z^T B z + y y^T / y^T z`` from ``B_0 = b0 I``."""
    k = Z.shape[1]
    B = b0 * np.eye(k)
    for z, y in zip(Z, Y):
        Bz = B @ z
        B = B - np.outer(Bz, Bz) / (z @ Bz) + np.outer(y, y) / (y @ z)
    return B


def _pair_coords(manifold, pairs, basis):
    base = pairs[0].base
    Z = np.array([coords(manifold, base, basis, p.z) for p in pairs])
    Y = np.array([coords(manifold, base, basis, p.y) for p in pairs])
    return Z, Y


# ---------------------------------------------------------------------------
# checks


def fd_gradient_check(problem: FiniteSumProblem, x, trials: int, rng=None, t: float = FD_STEP,
                      tol: float = FD_TOL, components: bool = True) -> DiagnosticReport:
    """Directional finite differences through the retraction against ``<grad, v>``.

    With ``components=True`` each trial draws a random component; otherwise
    the full objective is checked. A trial passes when
    ``|fd - <grad, v>| <= tol * (1 + |<grad, v>|)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    M = problem.manifold
    rep = DiagnosticReport(provenance={"fd_step": t})
    worst = 0.0
    for _ in range(trials):
        idx = [int(rng.integers(problem.n_components))] if components else None
        v = M.random_tangent(x, rng)
        fd = (problem.value(M.retract(x, t * v), idx) - problem.value(x, idx)) / t
        an = float(M.inner(x, problem.grad(x, idx), v))
        worst = max(worst, abs(fd - an) / (1.0 + abs(an)))
    rep.add("fd_gradient", "max_scaled_error", worst, tol)
    rep.add("fd_gradient", "trials", trials)
    return rep


def empirical_ratios(manifold: Manifold, pairs) -> tuple[float, float]:
    """``(min yz / |z|^2, max |y|^2 / yz)`` over pairs with positive curvature."""
    lo, hi = math.inf, 0.0
    for p in pairs:
        if p.yz <= 0:
            continue
        zz = float(manifold.inner(p.base, p.z, p.z))
        lo = min(lo, p.yz / zz)
        hi = max(hi, p.yy / p.yz)
    return lo, hi


def hessian_bounds_check(manifold: Manifold, pairs, M: int, basis=None) -> DiagnosticReport:
    """Trace/determinant bounds on the dense BFGS matrix built from ``pairs``.

    Uses the last ``M`` pairs with positive curvature, ``B_0 = (yy/yz) I``
    of the newest pair (the inverse of the two-loop's ``H_0``), and the
    empirical ratios ``lam = min yz/|z|^2``, ``Lam = max |y|^2/yz``:

    * ``tr(B) <= tr(B_0) + M Lam``
    * ``log det(B) >= log det(B_0) + M log(lam) - M log(tr(B_0) + M Lam)``
    * ``H = B^{-1}`` positive definite; its extreme eigenvalues are reported.
    """
    pairs = list(pairs)
    rep = DiagnosticReport()
    good = [p for p in pairs if p.yz > 0]
    rep.add("hessian_bounds", "filtered_pairs", len(pairs) - len(good))
    good = good[-M:]
    if not good:
        rep.add("hessian_bounds", "pairs_used", 0)
        return rep
    base = good[0].base
    if any(not np.array_equal(p.base, base) for p in good):
        raise ValueError("pairs must share one base point")
    if basis is None:
        basis = orthonormal_basis(manifold, base)
    Z, Y = _pair_coords(manifold, good, basis)
    k = Z.shape[1]
    m = len(good)
    lam, Lam = empirical_ratios(manifold, good)
    b0 = good[-1].yy / good[-1].yz
    B = dense_bfgs(Z, Y, b0)
    tr0 = k * b0
    tr_bound = tr0 + m * Lam
    rep.add("hessian_bounds", "pairs_used", m)
    rep.add("hessian_bounds", "lambda_hat", lam)
    rep.add("hessian_bounds", "Lambda_hat", Lam)
    rep.add("hessian_bounds", "lambda_le_Lambda", lam, Lam * (1 + HESSIAN_BOUND_RTOL))
    rep.add("hessian_bounds", "trace", np.trace(B), tr_bound * (1 + HESSIAN_BOUND_RTOL))
    sign, logdet = np.linalg.slogdet(B)
    logdet_bound = k * math.log(b0) + m * math.log(lam) - m * math.log(tr_bound)
    # stated as -logdet <= -bound so the default "measured <= bound" rule applies
    rep.add("hessian_bounds", "neg_logdet", -logdet if sign > 0 else math.inf,
            -logdet_bound + HESSIAN_BOUND_RTOL * max(1.0, abs(logdet_bound)))
    w = np.linalg.eigvalsh(0.5 * (B + B.T))
    rep.add("hessian_bounds", "H_positive_definite", -1.0 / w[-1] if w[0] > 0 else 1.0, 0.0, passed=bool(w[0] > 0))
    if w[0] > 0:
        rep.add("hessian_bounds", "gamma_hat", 1.0 / w[-1])
        rep.add("hessian_bounds", "Gamma_hat", 1.0 / w[0])
    return rep


def two_loop_vs_dense(memory: LbfgsMemory, v, tol: float = TWO_LOOP_TOL, basis=None) -> DiagnosticReport:
    """Compare the two-loop recursion against the dense inverse-BFGS matrix.

    An empty memory compares the identity fallback ``-v`` on both sides.
    """
    M = memory.manifold
    x = memory.base
    if basis is None:
        basis = orthonormal_basis(M, x)
    cv = coords(M, x, basis, v)
    pairs = memory.snapshot()
    if pairs:
        Z, Y = _pair_coords(M, pairs, basis)
        H = dense_inverse_bfgs(Z, Y, pairs[-1].yz / pairs[-1].yy)
        got = coords(M, x, basis, two_loop(memory, v, x))
    else:
        H = np.eye(len(cv))
        got = -cv
    want = -(H @ cv)
    err = np.linalg.norm(got - want) / max(np.linalg.norm(want), np.finfo(float).tiny)
    rep = DiagnosticReport(provenance={"memory_size": len(pairs), "tangent_dim": len(cv)})
    rep.add("two_loop_vs_dense", "relative_error", err, tol)
    return rep


def zeta_of(c_delta: float, d_diam: float) -> float:
    """``x / tanh(x)`` with ``x = d sqrt(|c_delta|)`` for negative curvature, else 1."""
    if d_diam < 0:
        raise ValueError("diameter must be nonnegative")
    if c_delta >= 0:
        return 1.0
    s = d_diam * math.sqrt(-c_delta)
    if s < 1e-8:
        return 1.0 + s * s / 3.0
    return s / math.tanh(s)


def triangle_terms(manifold: Manifold, x, y, z, c_delta: float):
    """Both sides of the comparison inequality for the triangle with apex ``x``.

    ``a = d(y, z)``, ``b = d(x, y)``, ``c = d(x, z)``, ``A`` the angle at
    ``x``; returns ``(a^2, zeta(c) b^2 + c^2 - 2 b c cos A)``.
    """
    u, w = manifold.log(x, y), manifold.log(x, z)
    b, c = manifold.norm(x, u), manifold.norm(x, w)
    a = manifold.dist(y, z)
    bc_cos = float(manifold.inner(x, u, w))  # = b c cos A
    return a * a, zeta_of(c_delta, c) * b * b + c * c - 2.0 * bc_cos


def triangle_check(manifold: Manifold, c_delta: float, trials: int, rng=None, radius: float = 1.0,
                   tol: float = TRIANGLE_TOL) -> DiagnosticReport:
    """Geodesic triangle inequality on random triangles inside a ball of ``radius``.

    Vertices are ``Exp_p(t v)`` around a random center ``p`` with
    ``t <= radius``, so the diameter is at most ``2 radius``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    worst = -math.inf
    violations = 0
    for _ in range(trials):
        p = manifold.random_point(rng)
        x, y, z = (manifold.retract(p, radius * rng.uniform() * manifold.random_tangent(p, rng)) for _ in range(3))
        lhs, rhs = triangle_terms(manifold, x, y, z, c_delta)
        excess = (lhs - rhs) / max(1.0, lhs, abs(rhs))
        worst = max(worst, excess)
        violations += excess > tol
    rep = DiagnosticReport(provenance={"manifold": repr(manifold), "c_delta": c_delta})
    rep.add("triangle", "max_scaled_excess", worst, tol)
    rep.add("triangle", "violations", violations, 0)
    return rep


def smoothness_convexity_probe(problem: FiniteSumProblem, trials: int, rng=None, center=None,
                               radius: float = 1.0) -> ConvergenceConstants:
    """Empirical ``L`` and ``S`` from random point pairs (not certified bounds).

    ``L = max |grad f(x) - Gamma_{y->x} grad f(y)| / d(x, y)`` and
    ``S = min 2 (f(y) - f(x) - <grad f(x), Log_x y>) / d(x, y)^2`` over pairs
    drawn within ``radius`` of ``center`` (default: the problem's initial
    point). ``kappa`` is set to ``S``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    M = problem.manifold
    center = problem.initial_point(rng) if center is None else center
    L, S = 0.0, math.inf
    for _ in range(trials):
        x = M.retract(center, radius * rng.uniform() * M.random_tangent(center, rng))
        y = M.retract(center, radius * rng.uniform() * M.random_tangent(center, rng))
        v = M.log(x, y)
        d = M.norm(x, v)
        if d == 0.0:
            continue
        gx, gy = problem.grad(x), problem.grad(y)
        L = max(L, M.norm(x, gx - M.transport(y, x, gy)) / d)
        S = min(S, 2.0 * (problem.value(y) - problem.value(x) - float(M.inner(x, gx, v))) / d ** 2)
    return ConvergenceConstants(L=L, S=S, kappa=S)


@dataclass
class RateReport:
    p: float
    q_prime: float
    beta: float | None
    applicable: bool
    T: int
    eta2: float

    @property
    def linear(self) -> bool:
        return self.applicable and self.beta is not None and self.beta < 1.0

    def describe(self) -> str:
        if not self.applicable:
            return f"rate formula inapplicable (p = {self.p:.6g} >= 1)"
        return f"p = {self.p:.6g}, q' = {self.q_prime:.6g}, beta = {self.beta:.6g} ({'<' if self.linear else '>='} 1)"


def linear_rate_report(consts: ConvergenceConstants, eta2: float, T: int) -> RateReport:
    """Linear-rate constants for the strongly convex case.

    ``p = L/S + (2 eta2 / S) (2 eta2 L^3 Gamma^2 - S kappa gamma)``,
    ``q' = 6 eta2^2 L^3 Gamma^2 / S`` and
    ``beta = (q' + p^T (1 - p - q')) / (1 - p)``. When ``p >= 1`` the
    formula does not apply and ``beta`` is ``None``.
    """
    need = {k: getattr(consts, k) for k in ("L", "S", "kappa", "gamma_lo", "Gamma_hi")}
    missing = [k for k, v in need.items() if v is None]
    if missing:
        raise ValueError(f"constants missing: {', '.join(missing)}")
    L, S, kappa, gam, Gam = need.values()
    if S <= 0:
        raise ValueError("S must be positive")
    p = L / S + (2.0 * eta2 / S) * (2.0 * eta2 * L ** 3 * Gam ** 2 - S * kappa * gam)
    q = 6.0 * eta2 ** 2 * L ** 3 * Gam ** 2 / S
    if p >= 1.0:
        return RateReport(p, q, None, False, T, eta2)
    beta = (q + p ** T * (1.0 - p - q)) / (1.0 - p)
    return RateReport(p, q, beta, True, T, eta2)


def rate_report_rows(rep: RateReport, observed_ratio: float | None = None) -> DiagnosticReport:
    """Informational rows for a rate report (never fail)."""
    out = DiagnosticReport(provenance={"T": rep.T, "eta2": rep.eta2})
    out.add("linear_rate", "p", rep.p)
    out.add("linear_rate", "q_prime", rep.q_prime)
    out.add("linear_rate", "beta", rep.beta if rep.applicable else math.nan)
    out.add("linear_rate", "applicable", float(rep.applicable))
    if observed_ratio is not None:
        out.add("linear_rate", "observed_epoch_ratio", observed_ratio)
    return out


def geometric_rate(errors) -> float:
    """Per-measurement contraction factor from a log-linear least-squares fit."""
    e = np.asarray([v for v in errors if v > 0], dtype=float)
    if len(e) < 2:
        return math.nan
    slope = np.polyfit(np.arange(len(e)), np.log(e), 1)[0]
    return float(np.exp(slope))


def harvest_pairs(memory: LbfgsMemory) -> list[CorrectionPair]:
    """Snapshot helper for run callbacks."""
    return memory.snapshot()
