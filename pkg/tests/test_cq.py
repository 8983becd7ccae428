import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import points
from sfpoly.cq import (Converged, DegenerateCut, MaxIter, NonConvexError, halfspace_project,
                       relaxed_cq_solve, spectral_radius)
from sfpoly.io import load_fixture

X0 = (-50.0, 50.0, 50.0)


def test_halfspace_projection_examples():
    # {x : x1 - 1 <= 0} written as c_val + <grad, x - u> with u = (3, 2)
    u = np.array([3.0, 2.0])
    np.testing.assert_allclose(halfspace_project(u, 2.0, [1.0, 0.0]), [1.0, 2.0])
    # already inside: unchanged
    v = np.array([0.0, 5.0])
    assert halfspace_project(v, -1.0, [1.0, 0.0]) is v


@given(points(3, -5, 5), st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3),
       st.floats(-4, 4, allow_nan=False))
def test_halfspace_projection_distance(u, a, b):
    a = np.array(a)
    if a @ a < 1e-6:
        return
    # halfspace a.x <= b in the form c_val + <a, x - u> <= 0 with c_val = a.u - b
    p = halfspace_project(u, float(a @ u - b), a)
    viol = max(0.0, a @ u - b)
    assert np.linalg.norm(p - u) == pytest.approx(viol / np.linalg.norm(a), abs=1e-9)
    assert a @ p - b <= 1e-9 * (1 + abs(b))


def test_degenerate_cut_raises():
    with pytest.raises(DegenerateCut):
        halfspace_project([1.0, 1.0], 1.0, [0.0, 0.0])


@pytest.mark.parametrize("seed", range(5))
def test_spectral_radius_matches_eigensolver(seed):
    A = np.random.default_rng(seed).standard_normal((4, 6))
    expect = np.linalg.eigvalsh(A.T @ A)[-1]
    assert spectral_radius(A) == pytest.approx(expect, rel=1e-8)


def test_spectral_radius_of_zero():
    assert spectral_radius(np.zeros((2, 3))) == 0.0


def test_feasible_start_converges_immediately():
    out = relaxed_cq_solve(load_fixture("ex41", a=5), [1.0, 1.0, 1.0])
    assert isinstance(out, Converged) and out.iterations <= 1


def test_fejer_monotone_towards_feasible_point():
    prob = load_fixture("ex41", a=5)
    z = np.ones(3)
    dists = [np.linalg.norm(np.array(X0) - z)]
    out = relaxed_cq_solve(prob, X0, callback=lambda k, x: dists.append(np.linalg.norm(x - z)))
    assert isinstance(out, Converged)
    assert all(b <= a + 1e-9 for a, b in zip(dists, dists[1:]))


def test_halfspaces_contain_the_set():
    # the linearization of a concave constraint is an outer approximation:
    # sampled feasible points stay inside every cut taken along the run
    prob = load_fixture("ex41", a=5)
    f = prob.f[0]
    grad = f.gradient()
    rng = np.random.default_rng(0)
    S = rng.uniform(-6, 6, (20000, 3))
    inside = S[np.array([f.eval(s) >= 0 for s in S])]
    assert len(inside) > 10
    cuts = []
    relaxed_cq_solve(prob, X0, kmax=40, callback=lambda k, x: cuts.append(x.copy()))
    for x in cuts[:-1]:
        v, gvec = -f.eval(x), -np.array([g.eval(x) for g in grad])
        if v <= 0:
            continue
        assert np.all(v + (inside - x) @ gvec <= 1e-9)


def test_converges_and_satisfies_stopping_rule():
    prob = load_fixture("ex41", a=5)
    out = relaxed_cq_solve(prob, X0, eps=1e-5)
    assert isinstance(out, Converged)
    x = out.x
    worst = max(-prob.f[0].eval(x), -prob.g[0].eval(prob.A @ x))
    assert worst < 1e-5
    assert out.state.residuals[-1] < 1e-5


def test_iteration_cap():
    out = relaxed_cq_solve(load_fixture("ex41", a=5), X0, kmax=3)
    assert isinstance(out, MaxIter) and out.iterations == 3 and out.residual > 0


def test_nonconvex_input_refused():
    with pytest.raises(NonConvexError):
        relaxed_cq_solve(load_fixture("ex42"), np.zeros(5))


def test_gamma_range_enforced():
    prob = load_fixture("ex41", a=5)
    rho = np.linalg.eigvalsh(prob.A.T @ prob.A)[-1]
    with pytest.raises(ValueError):
        relaxed_cq_solve(prob, X0, gamma=2.0 / rho * 1.01)
    with pytest.raises(ValueError):
        relaxed_cq_solve(prob, X0, gamma=0.0)
    out = relaxed_cq_solve(prob, X0, kmax=1)
    assert out.state.gamma == pytest.approx(1.8 / rho, rel=1e-8)


def test_start_length_checked():
    with pytest.raises(ValueError):
        relaxed_cq_solve(load_fixture("ex41", a=5), [1.0, 2.0])
