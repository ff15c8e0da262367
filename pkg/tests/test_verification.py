import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rsvlbfgs import SPD, Euclidean, KarcherProblem, QuadraticProblem, RayleighProblem, Sphere, gen_spd_data
from rsvlbfgs import karcher_oracle, top_eig_oracle
from rsvlbfgs.lbfgs import CorrectionPair, LbfgsMemory
from rsvlbfgs import verification as V

from conftest import MANIFOLDS

seeds = st.integers(0, 2**32 - 1)


def _memory(M, x, depth, rng):
    mem = LbfgsMemory(M, depth)
    mem.base = x
    while len(mem) < depth:
        z = M.random_tangent(x, rng)
        mem.offer(x, z, z + 0.5 * M.random_tangent(x, rng))
    return mem


# -- report plumbing ---------------------------------------------------------


def test_report_pass_fail_and_serialization():
    rep = V.DiagnosticReport(provenance={"seed": 3})
    rep.add("a", "ok", 0.5, 1.0)
    rep.add("a", "info", 7.0)
    assert rep.passed
    rep.add("b", "bad", 2.0, 1.0)
    assert not rep.passed and [r.name for r in rep.failures()] == ["bad"]
    assert rep.get("b", "bad").margin == -1.0
    csv_lines = rep.to_csv().splitlines()
    assert csv_lines[0] == "check,name,measured,bound,pass"
    assert csv_lines[3] == "b,bad,2,1,0"
    text = rep.to_text()
    assert "# seed=3" in text and "FAIL" in text
    with pytest.raises(KeyError):
        rep.get("z", "z")


@given(st.sampled_from(sorted(MANIFOLDS)), seeds)
def test_orthonormal_basis(name, seed):
    M = MANIFOLDS[name]()
    x = M.random_point(np.random.default_rng(seed))
    Q = V.orthonormal_basis(M, x)
    np.testing.assert_allclose(M.gram(x, Q), np.eye(M.dim), atol=1e-10)


def test_dense_bfgs_and_inverse_agree(rng):
    k = 5
    Z = rng.standard_normal((3, k))
    Y = Z + 0.3 * rng.standard_normal((3, k))
    assert np.all(np.einsum("ij,ij->i", Z, Y) > 0)
    H = V.dense_inverse_bfgs(Z, Y, 0.7)
    B = V.dense_bfgs(Z, Y, 1 / 0.7)
    np.testing.assert_allclose(H @ B, np.eye(k), atol=1e-10)
    np.testing.assert_allclose(H @ Y[-1], Z[-1], atol=1e-12)  # secant condition


# -- fd check ----------------------------------------------------------------


def test_fd_check_at_optima(small_karcher, small_eig, rng):
    for P, x in ((KarcherProblem(small_karcher), karcher_oracle(small_karcher)),
                 (RayleighProblem(small_eig), top_eig_oracle(small_eig)[1])):
        rep = V.fd_gradient_check(P, x, 20, rng, components=False)
        assert rep.passed
        for _ in range(5):
            v = P.manifold.random_tangent(x, rng)
            assert abs(P.manifold.inner(x, P.grad(x), v)) <= 1e-10


def test_fd_check_random_trials(small_karcher, small_eig, rng):
    for P in (KarcherProblem(small_karcher), RayleighProblem(small_eig)):
        assert V.fd_gradient_check(P, P.manifold.random_point(rng), 100, rng).passed


def test_fd_check_catches_wrong_gradient(small_eig, rng):
    class Broken(RayleighProblem):
        def grad(self, z, idx=None):
            return 2.0 * super().grad(z, idx)

    P = Broken(small_eig)
    assert not V.fd_gradient_check(P, P.manifold.random_point(rng), 10, rng).passed
    with pytest.raises(ValueError):
        V.fd_gradient_check(P, P.manifold.random_point(rng), 0)


# -- inverse-Hessian eigenvalue bounds ---------------------------------------


def test_hessian_bounds_single_identity_pair():
    M = Euclidean(4)
    x = np.zeros(4)
    z = np.array([1.0, 2.0, 0.0, -1.0])
    rep = V.hessian_bounds_check(M, [CorrectionPair.build(M, x, z, z.copy())], 1)
    assert rep.passed
    # b0 = yy/yz = 1, and the update adds |y|^2/yz - |B0 z|^2/z^T B0 z = 0
    assert rep.get("hessian_bounds", "trace").measured == pytest.approx(4.0, abs=1e-12)
    assert rep.get("hessian_bounds", "lambda_hat").measured == pytest.approx(1.0)
    assert rep.get("hessian_bounds", "Lambda_hat").measured == pytest.approx(1.0)


def test_hessian_bounds_trace_increment_matches_formula(rng):
    M = Euclidean(5)
    x = np.zeros(5)
    pairs = []
    for _ in range(2):
        z = rng.standard_normal(5)
        pairs.append(CorrectionPair.build(M, x, z, z + 0.4 * rng.standard_normal(5)))
    b0 = pairs[-1].yy / pairs[-1].yz
    B = b0 * np.eye(5)
    expected = 5 * b0
    for p in pairs:
        Bz = B @ p.z
        expected += p.yy / p.yz - (Bz @ Bz) / (p.z @ Bz)
        B = B - np.outer(Bz, Bz) / (p.z @ Bz) + np.outer(p.y, p.y) / p.yz
    rep = V.hessian_bounds_check(M, pairs, 2)
    assert rep.get("hessian_bounds", "trace").measured == pytest.approx(expected, rel=1e-12)


@given(st.sampled_from(sorted(MANIFOLDS)), seeds, st.integers(1, 6))
def test_hessian_bounds_bounds_hold_on_random_memories(name, seed, depth):
    M = MANIFOLDS[name]()
    rng = np.random.default_rng(seed)
    x = M.random_point(rng)
    rep = V.hessian_bounds_check(M, _memory(M, x, depth, rng).snapshot(), depth)
    assert rep.passed
    assert rep.get("hessian_bounds", "lambda_hat").measured <= rep.get("hessian_bounds", "Lambda_hat").measured * (1 + 1e-12)
    assert 0 < rep.get("hessian_bounds", "gamma_hat").measured <= rep.get("hessian_bounds", "Gamma_hat").measured


def test_hessian_bounds_reports_filtered_pairs():
    M = Euclidean(2)
    x = np.zeros(2)
    good = CorrectionPair.build(M, x, np.array([1.0, 0.0]), np.array([1.0, 0.2]))
    bad = CorrectionPair.build(M, x, np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
    rep = V.hessian_bounds_check(M, [good, bad], 2)
    assert rep.passed
    assert rep.get("hessian_bounds", "filtered_pairs").measured == 1
    assert rep.get("hessian_bounds", "pairs_used").measured == 1
    empty = V.hessian_bounds_check(M, [bad], 2)
    assert empty.get("hessian_bounds", "pairs_used").measured == 0


def test_hessian_bounds_rejects_mixed_bases():
    M = Euclidean(2)
    a = CorrectionPair.build(M, np.zeros(2), np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    b = CorrectionPair.build(M, np.ones(2), np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        V.hessian_bounds_check(M, [a, b], 2)


# -- two-loop vs dense -------------------------------------------------------


@pytest.mark.parametrize("depth", [0, 1, 2, 5, 10])
@pytest.mark.parametrize("name", ["sphere10", "spd4"])
def test_two_loop_vs_dense(depth, name, rng):
    M = MANIFOLDS[name]()
    x = M.random_point(rng)
    mem = _memory(M, x, depth, rng) if depth else LbfgsMemory(M, 1)
    mem.base = x
    rep = V.two_loop_vs_dense(mem, M.random_tangent(x, rng))
    assert rep.passed
    assert rep.get("two_loop_vs_dense", "relative_error").measured <= (1e-12 if depth <= 1 else 1e-10)


# -- triangle inequality ------------------------------------------------------


def test_triangle_degenerate(rng):
    M = SPD(3)
    x, y = M.random_point(rng), M.random_point(rng)
    lhs, rhs = V.triangle_terms(M, x, y, y, -0.5)
    assert lhs == pytest.approx(0.0, abs=1e-12)
    assert lhs <= rhs + 1e-9


def test_triangle_flat_diagonal_section_is_equality(rng):
    M = SPD(3)
    x, y, z = (np.diag(np.exp(rng.standard_normal(3))) for _ in range(3))
    lhs, rhs = V.triangle_terms(M, x, y, z, 0.0)
    assert lhs == pytest.approx(rhs, rel=1e-10)


@pytest.mark.parametrize("M, c", [(SPD(3), V.SPD_CURVATURE_LOWER), (Sphere(4), V.SPHERE_CURVATURE_LOWER)])
def test_triangle_check_random(M, c, rng):
    rep = V.triangle_check(M, c, 200, rng)
    assert rep.passed and rep.get("triangle", "violations").measured == 0


def test_zeta_examples():
    assert V.zeta_of(-1.0, 0.0) == 1.0
    assert V.zeta_of(-1.0, 1.0) == pytest.approx(1.0 / math.tanh(1.0), rel=1e-15)
    assert V.zeta_of(-1.0, 1.0) == pytest.approx(1.3130352854993315)
    assert V.zeta_of(0.0, 5.0) == 1.0 and V.zeta_of(0.3, 5.0) == 1.0
    assert V.zeta_of(-1.0, 1e-9) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        V.zeta_of(-1.0, -1.0)


@given(st.floats(0.0, 10.0), st.floats(0.01, 10.0), st.floats(0.01, 5.0), st.floats(0.01, 5.0))
def test_zeta_monotone(d, c, dd, dc):
    base = V.zeta_of(-c, d)
    assert base >= 1.0
    assert V.zeta_of(-c, d + dd) >= base
    assert V.zeta_of(-(c + dc), d) >= base


# -- smoothness / convexity probe ---------------------------------------------


def test_probe_unit_quadratic():
    P = QuadraticProblem(np.eye(3)[None].repeat(2, axis=0), np.zeros((2, 3)))
    c = V.smoothness_convexity_probe(P, 20)
    assert c.L == pytest.approx(1.0, abs=1e-9)
    assert c.S == pytest.approx(1.0, abs=1e-9)
    assert c.kappa == c.S


def test_probe_rayleigh_is_nonconvex(small_eig):
    c = V.smoothness_convexity_probe(RayleighProblem(small_eig), 200, np.random.default_rng(1), radius=math.pi / 2)
    assert c.S < 0 < c.L


def test_probe_karcher_tight_cluster_is_convex():
    data = gen_spd_data(3, 10, 2.0, seed=4)
    P = KarcherProblem(data)
    c = V.smoothness_convexity_probe(P, 50, center=karcher_oracle(data), radius=0.2)
    assert c.S > 0 and c.L >= c.S


# -- rate report -------------------------------------------------------------


def test_rate_report_eta_zero_limit():
    c = V.ConvergenceConstants(L=2.0, S=4.0, kappa=4.0, gamma_lo=0.1, Gamma_hi=3.0)
    r = V.linear_rate_report(c, 0.0, 10)
    assert r.p == 0.5 and r.q_prime == 0.0
    assert r.beta == pytest.approx((0.5 ** 10 * 0.5) / 0.5)


def test_rate_report_small_ratio_converges():
    c = V.ConvergenceConstants(L=1.0, S=2.0, kappa=2.0, gamma_lo=0.5, Gamma_hi=1.0)
    r = V.linear_rate_report(c, 1e-3, 20)
    assert r.applicable and r.linear and r.beta < 1
    p = 0.5 + 2e-3 / 2.0 * (2e-3 * 1.0 - 2.0 * 2.0 * 0.5)
    assert r.p == pytest.approx(p, rel=1e-15)
    assert r.q_prime == pytest.approx(6e-6 / 2.0, rel=1e-15)
    assert "beta" in r.describe()


def test_rate_report_inapplicable():
    c = V.ConvergenceConstants(L=3.0, S=1.0, kappa=1.0, gamma_lo=0.5, Gamma_hi=1.0)
    r = V.linear_rate_report(c, 1e-3, 5)
    assert not r.applicable and r.beta is None and not r.linear
    assert "inapplicable" in r.describe()
    rows = V.rate_report_rows(r, 0.3)
    assert rows.passed and math.isnan(rows.get("linear_rate", "beta").measured)


def test_rate_report_missing_constants():
    with pytest.raises(ValueError):
        V.linear_rate_report(V.ConvergenceConstants(L=1.0), 0.1, 3)
    with pytest.raises(ValueError):
        V.linear_rate_report(V.ConvergenceConstants(L=1.0, S=0.0, kappa=0.0, gamma_lo=1.0, Gamma_hi=1.0), 0.1, 3)


def test_geometric_rate():
    assert V.geometric_rate([1.0, 0.1, 0.01, 0.001]) == pytest.approx(0.1)
    assert math.isnan(V.geometric_rate([1.0]))
