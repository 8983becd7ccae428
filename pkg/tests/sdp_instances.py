"""Random LMI instances with a known answer, plus a cvxpy cross-check."""

import numpy as np

from sfpoly.sdp import SdpBlock, SdpProblem


def _sym(rng, side):
    M = rng.standard_normal((side, side))
    return (M + M.T) / 2


def _problem(mats_per_block, c):
    blocks = [SdpBlock.from_dense(mats, f"b{i}") for i, mats in enumerate(mats_per_block)]
    return SdpProblem(len(c), tuple(blocks), np.asarray(c, float))


def feasible_instance(rng):
    """Strictly feasible at a planted ``x0``; a box keeps it bounded."""
    p = int(rng.integers(2, 6))
    x0 = rng.uniform(-0.5, 0.5, p)
    mats = []
    for _ in range(int(rng.integers(1, 4))):
        side = int(rng.integers(2, 5))
        F = [_sym(rng, side) for _ in range(p)]
        A = rng.standard_normal((side, side))
        S0 = A @ A.T + 0.1 * np.eye(side)
        F0 = S0 - sum(xi * Fi for xi, Fi in zip(x0, F))
        mats.append([F0] + F)
    # box |x_i| <= 2 as two diagonal blocks
    lo = [2 * np.eye(p)] + [np.diag(np.eye(p)[i]) for i in range(p)]
    hi = [2 * np.eye(p)] + [-np.diag(np.eye(p)[i]) for i in range(p)]
    mats += [lo, hi]
    c = np.concatenate([[0.0], rng.standard_normal(p)])
    return _problem(mats, c), "optimal"


def infeasible_instance(rng):
    """A planted Farkas certificate ``Z`` makes the LMI system empty."""
    p = int(rng.integers(1, 5))
    sides = [int(rng.integers(2, 5)) for _ in range(int(rng.integers(1, 4)))]
    Z = []
    for s in sides:
        A = rng.standard_normal((s, s))
        Z.append(A @ A.T + 0.1 * np.eye(s))
    zz = sum(np.sum(Zb * Zb) for Zb in Z)
    cols = []
    for _ in range(p + 1):
        F = [_sym(rng, s) for s in sides]
        t = sum(np.sum(Fb * Zb) for Fb, Zb in zip(F, Z)) / zz
        cols.append([Fb - t * Zb for Fb, Zb in zip(F, Z)])  # now sum <F_b, Z_b> = 0
    # constant term with sum <F0_b, Z_b> = -1
    cols[0] = [Fb - Zb / zz for Fb, Zb in zip(cols[0], Z)]
    mats = [[cols[j][b] for j in range(p + 1)] for b in range(len(sides))]
    c = np.concatenate([[0.0], rng.standard_normal(p)])
    return _problem(mats, c), "infeasible"


def suite(n=50, seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        out.append(feasible_instance(rng) if i % 2 == 0 else infeasible_instance(rng))
    return out


def cvxpy_reference(prob: SdpProblem):
    """(status, objective) from an external conic solver."""
    import cvxpy as cp

    p = prob.dim - 1
    x = cp.Variable(p)
    cons = []
    for b in prob.blocks:
        F = [b.coeff_matrix(j) for j in range(prob.dim)]
        expr = F[0] + sum(x[i] * F[i + 1] for i in range(p))
        expr = (expr + expr.T) / 2
        cons.append(expr >> 0)
    obj = cp.Minimize(prob.c[0] + prob.c[1:] @ x)
    pr = cp.Problem(obj, cons)
    pr.solve(solver=cp.CLARABEL)
    if pr.status in ("optimal", "optimal_inaccurate"):
        return "optimal", float(pr.value)
    if pr.status in ("infeasible", "infeasible_inaccurate"):
        return "infeasible", None
    return pr.status, None
