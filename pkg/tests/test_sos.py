import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import polynomials
from sfpoly.io import load_fixture
from sfpoly.moment import enumerate_basis
from sfpoly.poly import Polynomial, parse_polynomial
from sfpoly.problem import SfpProblem
from sfpoly.sdp import SdpStatus
from sfpoly.sos import (archimedean_probe, gram_polynomial, gram_residual, hessian_form,
                        sos_check, sos_concavity_check, sos_convexity_check)


def P(text, n):
    return parse_polynomial(text, n)


def test_square_of_sum_certified():
    p = P("(x1 + x2)^2", 2)
    c = sos_check(p)
    assert c.certified and c.recheck()
    # any Gram matrix matching the coefficients is fine; check the identity directly
    assert gram_residual(p, c.basis, c.G) <= 1e-9


def test_reference_gram_for_square_of_sum():
    basis = ((0, 0), (1, 0), (0, 1))
    G = np.array([[0, 0, 0], [0, 1, 1], [0, 1, 1.0]])
    assert gram_polynomial(2, basis, G) == P("(x1 + x2)^2", 2)


def test_indefinite_product_not_certified():
    r = sos_check(P("x1*x2", 2))
    assert not r.certified
    # it takes both signs
    assert P("x1*x2", 2).eval([1, 1]) > 0 > P("x1*x2", 2).eval([1, -1])


@pytest.mark.parametrize("n", [1, 2, 4])
def test_squared_norm_has_identity_gram(n):
    p = Polynomial.constant(n, 1.0)
    for i in range(n):
        p = p + Polynomial.variable(n, i) ** 2
    c = sos_check(p)
    assert c.certified
    assert c.basis == enumerate_basis(n, 1).exponents
    np.testing.assert_allclose(c.G, np.eye(n + 1), atol=1e-7)


def test_odd_degree_rejected_immediately():
    r = sos_check(P("x1^3 + 1", 1))
    assert not r.certified and r.proven and r.status is None


def test_motzkin_is_not_sos():
    # nonnegative but famously not a sum of squares
    m = P("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1", 2)
    r = sos_check(m)
    assert not r.certified
    assert r.status is SdpStatus.INFEASIBLE and r.proven


def test_negative_constant_not_sos():
    r = sos_check(Polynomial.constant(2, -1.0))
    assert not r.certified and r.proven


@settings(max_examples=25)
@given(st.lists(polynomials(n=2, max_deg=2, max_terms=4), min_size=1, max_size=3))
def test_sums_of_squares_are_certified(qs):
    p = Polynomial.zero(2)
    for q in qs:
        p = p + q * q
    if p.is_zero():
        return
    c = sos_check(p)
    assert c.certified and c.recheck()


def test_certified_implies_nonnegative_at_random_points():
    rng = np.random.default_rng(0)
    for text in ["(x1 - 2*x2)^2 + (x1*x2 - 1)^2", "x1^4 + x2^4 + 1", "(x1 + x2 + 1)^2"]:
        p = P(text, 2)
        c = sos_check(p)
        assert c.certified
        for u in rng.standard_normal((100, 2)) * 2:
            low = enumerate_basis(2, 1).monomials(u)
            assert p.eval(u) >= -1e-6 * (1 + low @ low)


def test_quartic_norm_sos_convex():
    p = P("(x1^2 + x2^2 + x3^2)^2", 3)
    c = sos_convexity_check(p)
    assert c.certified and c.recheck()


def test_ex43_negated_constraint_sos_convex():
    f1 = load_fixture("ex43").f[0]
    c = sos_convexity_check(-f1)
    assert c.certified and c.recheck()
    assert sos_concavity_check(f1).certified


def test_nonconvex_quartic_has_hessian_witness():
    f = P("x1^4 - x1^2*x2^2", 2)
    r = sos_convexity_check(f)
    assert not r.certified and r.proven
    H = f.hessian()
    u = r.witness
    M = np.array([[H[i][j].eval(u) for j in range(2)] for i in range(2)])
    assert np.linalg.eigvalsh(M)[0] < 0
    # independent direct check at (1, 1)
    M11 = np.array([[H[i][j].eval([1.0, 1.0]) for j in range(2)] for i in range(2)])
    assert np.linalg.eigvalsh(M11)[0] < 0


def test_linear_is_trivially_sos_convex():
    assert sos_convexity_check(P("3*x1 - x2 + 1", 2)).certified


def test_hessian_form_matches_quadratic_form():
    f = P("x1^4 + 3*x1*x2^2 + x2^2", 2)
    w = hessian_form(f)
    rng = np.random.default_rng(1)
    H = f.hessian()
    for _ in range(5):
        x, z = rng.standard_normal(2), rng.standard_normal(2)
        M = np.array([[H[i][j].eval(x) for j in range(2)] for i in range(2)])
        assert w.eval(np.concatenate([x, z])) == pytest.approx(z @ M @ z, rel=1e-10)


def disk_problem():
    f = P("1 - x1^2 - x2^2", 2)
    return SfpProblem(2, 0, np.zeros((0, 2)), (f,), ())


def test_archimedean_disk_certified():
    c = archimedean_probe(disk_problem(), 2.0)
    assert c.certified and c.recheck()


def test_archimedean_halfline_not_certified():
    prob = SfpProblem(1, 0, np.zeros((0, 1)), (P("x1", 1),), ())
    for R in [1.0, 10.0, 1e3]:
        assert not archimedean_probe(prob, R).certified


def test_archimedean_ex43_with_ball_constraint():
    prob = load_fixture("ex43", R=4)
    found = None
    for R in [10.0, 100.0, 1000.0]:
        c = archimedean_probe(prob, R)
        if c.certified:
            assert c.recheck()
            found = R
            break
    assert found is not None


def test_archimedean_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        archimedean_probe(disk_problem(), 0.0)
