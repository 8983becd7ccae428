from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import points, polynomials
from sfpoly.io import load_fixture
from sfpoly.moment import (TruncatedMomentVector, build_relaxation, enumerate_basis,
                           localizing_operator, moment_operator, objective_vector, riesz)
from sfpoly.poly import Polynomial, parse_polynomial
from sfpoly.problem import half_degree


def test_basis_hand_enumeration():
    b = enumerate_basis(2, 2)
    assert list(b.exponents) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert len(b) == comb(4, 2)


@pytest.mark.parametrize("n,d", [(3, 1), (5, 4), (1, 0), (4, 3)])
def test_basis_size_is_binomial(n, d):
    b = enumerate_basis(n, d)
    assert len(b) == comb(n + d, n)
    assert len(set(b.exponents)) == len(b)
    assert b[0] == (0,) * n
    for i in range(min(n, len(b) - 1)):
        e = [0] * n
        e[i] = 1
        assert b.position(tuple(e)) == i + 1


def test_basis_errors():
    with pytest.raises(ValueError):
        enumerate_basis(0, 2)
    with pytest.raises(ValueError):
        enumerate_basis(2, -1)
    with pytest.raises(ValueError):
        enumerate_basis(30, 12)


def test_moment_matrix_entries():
    n, k = 2, 2
    op = moment_operator(n, k)
    rng = np.random.default_rng(0)
    y = rng.standard_normal(len(op.moment_basis))
    M = op.assemble(y)
    side = op.side_basis
    for p, b in enumerate(side.exponents):
        for q, g in enumerate(side.exponents):
            alpha = tuple(i + j for i, j in zip(b, g))
            assert M[p, q] == y[op.moment_basis.position(alpha)]


def test_moment_matrix_of_dirac_at_origin():
    op = moment_operator(3, 2)
    y = np.zeros(len(op.moment_basis))
    y[0] = 1.0
    M = op.assemble(y)
    E = np.zeros_like(M)
    E[0, 0] = 1.0
    assert np.array_equal(M, E)


def test_side_degree_uses_ceiling_of_half_degree():
    f = parse_polynomial("x1^3 - x2", 2)  # odd degree
    op = localizing_operator(f, 3)
    assert op.s == 3 - 2
    for alpha, _ in op.coeff_mats:
        assert sum(alpha) <= 6


def test_degree_exceeding_2k_rejected():
    with pytest.raises(ValueError):
        localizing_operator(parse_polynomial("x1^5", 1), 2)
    with pytest.raises(ValueError):
        localizing_operator(Polynomial.zero(2), 2)


@given(polynomials(n=3, max_deg=4, max_terms=5).filter(lambda p: not p.is_zero()),
       points(3, -1.5, 1.5), st.integers(2, 3))
def test_defining_identity_rank_one(f, u, k):
    op = localizing_operator(f, k)
    y = TruncatedMomentVector.from_point(u, 2 * k)
    L = op.assemble(y)
    m = op.side_basis.monomials(u)
    ref = f.eval(u) * np.outer(m, m)
    np.testing.assert_allclose(L, ref, rtol=1e-10, atol=1e-10 * max(1.0, np.abs(ref).max()))


@given(polynomials(n=2, max_deg=4, max_terms=5).filter(lambda p: not p.is_zero()))
def test_coefficient_matrices_symmetric_and_sum_to_identity(f):
    k = max(2, half_degree(f))
    op = localizing_operator(f, k)
    rng = np.random.default_rng(1)
    u = rng.uniform(-1, 1, 2)
    total = sum(np.prod(u ** np.array(a)) * F for a, F in op.coeff_mats)
    m = op.side_basis.monomials(u)
    for _, F in op.coeff_mats:
        assert np.array_equal(F, F.T)
    np.testing.assert_allclose(total, f.eval(u) * np.outer(m, m), atol=1e-10)


def test_assemble_is_linear():
    f = parse_polynomial("1 - x1^2 - x2^2 + 0.3*x1*x2", 2)
    op = localizing_operator(f, 2)
    rng = np.random.default_rng(4)
    y1, y2 = rng.standard_normal((2, len(op.moment_basis)))
    a, b = 1.7, -0.4
    np.testing.assert_allclose(op.assemble(a * y1 + b * y2),
                               a * op.assemble(y1) + b * op.assemble(y2), atol=1e-12)


def test_assemble_basis_mismatch():
    op = moment_operator(2, 2)
    with pytest.raises(ValueError):
        op.assemble(TruncatedMomentVector.from_point([1.0, 2.0], 2))
    with pytest.raises(ValueError):
        op.assemble(np.zeros(3))


def test_fact_psd_for_point_moments():
    f = parse_polynomial("1 - x1^2 - x2^2", 2)
    u = np.array([0.3, -0.5])
    L = localizing_operator(f, 3).assemble(TruncatedMomentVector.from_point(u, 6))
    assert np.linalg.eigvalsh(L)[0] >= -1e-12


def test_riesz():
    y = TruncatedMomentVector.from_point([0.5, -1.0], 4)
    assert riesz(y, Polynomial.constant(2, 1.0)) == y[(0, 0)]
    p = parse_polynomial("3*x1^2*x2 - x2^4 + 2", 2)
    assert riesz(y, p) == pytest.approx(p.eval([0.5, -1.0]), rel=1e-12)
    with pytest.raises(ValueError):
        riesz(y, parse_polynomial("x1^5", 2))


@given(polynomials(n=2, max_deg=4, max_terms=5).filter(lambda p: not p.is_zero()))
def test_riesz_is_corner_of_localizing_matrix(f):
    rng = np.random.default_rng(2)
    k = max(2, half_degree(f))
    y = TruncatedMomentVector(enumerate_basis(2, 2 * k),
                              rng.standard_normal(len(enumerate_basis(2, 2 * k))))
    L = localizing_operator(f, k).assemble(y)
    assert L[0, 0] == pytest.approx(riesz(y, f), abs=1e-12)


def test_symbolic_entries_keyed_by_exponent():
    op = moment_operator(1, 1)
    sym = op.symbolic()
    assert sym[0][0] == {(0,): 1.0}
    assert sym[0][1] == {(1,): 1.0} == sym[1][0]
    assert sym[1][1] == {(2,): 1.0}


def test_ex43_relaxation_shape():
    prob = load_fixture("ex43", R=4)
    inst = build_relaxation(prob, 2)
    assert prob.d == 2
    assert len(inst.basis) == comb(7, 4) == 35
    assert [op.side for op in inst.blocks] == [10, 1, 4]
    assert inst.labels == ("moment", "c1", "q1")


def test_ex41_first_order_is_one():
    assert load_fixture("ex41").d == 1
    inst = build_relaxation(load_fixture("ex41"), 1)
    assert len(inst.blocks) == 3


def test_relaxation_order_below_d():
    with pytest.raises(ValueError):
        build_relaxation(load_fixture("ex43"), 1)


def test_relaxation_rejects_large_xi():
    prob = load_fixture("ex47")
    xi = np.full(len(enumerate_basis(2, 2)), 1.0)
    with pytest.raises(ValueError):
        build_relaxation(prob, 1, xi)


def test_objective_without_xi_is_squared_norm():
    n, d, k = 2, 1, 2
    c = objective_vector(n, d, k, None)
    basis = enumerate_basis(n, 2 * k)
    expect = np.zeros(len(basis))
    for a in [(0, 0), (2, 0), (0, 2)]:
        expect[basis.position(a)] = 1
    assert np.array_equal(c, expect)


@given(points(3, -1, 1), st.integers(0, 50))
def test_objective_at_point_moments_is_coercive_function(u, seed):
    prob = load_fixture("ex43")
    d, k = prob.d, prob.d + 1
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(len(enumerate_basis(3, 2 * d)))
    xi *= 0.25 / np.linalg.norm(xi)
    inst = build_relaxation(prob, k, xi)
    y = TruncatedMomentVector.from_point(u, 2 * k)
    low = enumerate_basis(3, d).monomials(u)
    expect = low @ low + xi @ enumerate_basis(3, 2 * d).monomials(u)
    assert inst.objective_value(y) == pytest.approx(expect, rel=1e-12, abs=1e-12)
