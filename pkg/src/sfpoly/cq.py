"""Relaxed CQ projection method, a baseline for convex instances.

The iteration is ``x <- P_Ck(x - gamma A^T (I - P_Qk) A x)`` where ``C_k``
and ``Q_k`` are halfspaces obtained by linearizing the most violated
constraint of each side at the current iterate.  Only halfspace projections
are needed, so it is cheap per step but requires convex sets.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .poly import Polynomial
from .problem import SfpProblem


class NonConvexError(ValueError):
    """The relaxed CQ method only applies to convex ``C`` and ``Q``."""


class DegenerateCut(ArithmeticError):
    """A violated constraint has a vanishing gradient, so no halfspace exists."""


def halfspace_project(u, c_val: float, grad, ref=None) -> np.ndarray:
    """Project ``u`` onto ``{x : c_val + <grad, x - ref> <= 0}`` (``ref`` defaults to ``u``)."""
    u = np.asarray(u, dtype=float)
    grad = np.asarray(grad, dtype=float)
    ref = u if ref is None else np.asarray(ref, dtype=float)
    v = c_val + float(grad @ (u - ref))
    if v <= 0:
        return u
    gg = float(grad @ grad)
    if gg == 0.0:
        raise DegenerateCut(f"constraint value {v:.3e} > 0 with zero gradient")
    return u - (v / gg) * grad


def spectral_radius(A, rtol: float = 1e-10, max_iter: int = 100_000, seed: int = 0) -> float:
    """Largest eigenvalue of ``A^T A`` by power iteration."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    if n == 0 or not np.any(A):
        return 0.0
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - lam) <= rtol * new:
            return new
        lam = new
    return lam


class _Compiled:
    """Values and gradients of ``-p`` for a list of polynomials in one evaluation."""

    def __init__(self, polys: Sequence[Polynomial], n: int):
        self.count = len(polys)
        self.n = n
        outputs = []
        for p in polys:
            q = -p
            outputs.append(q)
            outputs.extend(q.gradient())
        index: dict[tuple, int] = {}
        for q in outputs:
            for a, _ in q.items():
                index.setdefault(a, len(index))
        self.E = np.zeros((max(len(index), 1), n), dtype=np.int64)
        for a, t in index.items():
            self.E[t] = a
        self.C = np.zeros((self.E.shape[0], len(outputs)))
        for col, q in enumerate(outputs):
            for a, c in q.items():
                self.C[index[a], col] = c

    def __call__(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out = np.prod(u[None, :] ** self.E, axis=1) @ self.C
        out = out.reshape(self.count, self.n + 1)
        return out[:, 0], out[:, 1:]


def _most_violated(vals: np.ndarray) -> int:
    # argmax picks the lowest index among ties
    return int(np.argmax(vals)) if vals.size else -1


@dataclass
class CqState:
    x: np.ndarray
    iterations: int
    gamma: float
    residuals: list[float] = field(default_factory=list)


@dataclass
class Converged:
    x: np.ndarray
    iterations: int
    time: float
    state: CqState

    converged = True


@dataclass
class MaxIter:
    x: np.ndarray
    iterations: int
    time: float
    residual: float
    state: CqState

    converged = False


def check_convex(prob: SfpProblem) -> None:
    """Raise :class:`NonConvexError` unless every constraint is certified sos-concave."""
    from .sos import sos_concavity_check

    for side, polys, labels in (("C", prob.f, prob.f_labels), ("Q", prob.g, prob.g_labels)):
        for p, lab in zip(polys, labels):
            if p.degree <= 1:
                continue
            if not sos_concavity_check(p).certified:
                raise NonConvexError(
                    f"constraint {side}/{lab} is not certified concave, so the set may be "
                    "nonconvex and the relaxed CQ method does not apply")


def relaxed_cq_solve(prob: SfpProblem, x0, gamma: float | None = None, eps: float = 1e-5,
                     kmax: int = 1_000_000, assume_convex: bool = False,
                     callback: Callable[[int, np.ndarray], None] | None = None,
                     keep_trace: bool = True) -> Converged | MaxIter:
    """Run relaxed CQ until ``max(-f_i(x), -g_j(Ax)) < eps`` or ``kmax`` iterations.

    ``gamma`` defaults to ``1.8 / rho(A^T A)``.  Unless ``assume_convex`` is
    set, convexity is checked first by sos-concavity of every constraint.
    """
    if not assume_convex:
        check_convex(prob)
    A = prob.A
    rho = spectral_radius(A)
    if gamma is None:
        gamma = 1.8 / rho if rho > 0 else 1.0
    elif rho > 0 and not 0 < gamma < 2.0 / rho:
        raise ValueError(f"gamma must lie in (0, {2.0 / rho:.6g}), got {gamma}")
    x = np.array(x0, dtype=float).ravel()
    if x.shape != (prob.n,):
        raise ValueError(f"x0 has length {x.size}, expected {prob.n}")
    fc = _Compiled(prob.f, prob.n)
    gc = _Compiled(prob.g, prob.m)
    state = CqState(x, 0, float(gamma))
    t0 = time.perf_counter()
    AT = A.T

    for k in range(kmax + 1):
        fv, fg = fc(x)
        Ax = A @ x
        gv, gg = gc(Ax)
        worst = max(fv.max() if fv.size else -np.inf, gv.max() if gv.size else -np.inf)
        if keep_trace:
            state.residuals.append(float(worst))
        state.x, state.iterations = x, k
        if worst < eps:
            return Converged(x, k, time.perf_counter() - t0, state)
        if k == kmax:
            break
        z = x
        j = _most_violated(gv)
        if j >= 0 and gv[j] > 0:
            # (I - P_Qk) A x for the halfspace through A x
            z = x - gamma * (AT @ (Ax - halfspace_project(Ax, gv[j], gg[j])))
        i = _most_violated(fv)
        if i >= 0 and fv[i] > 0:
            z = halfspace_project(z, fv[i], fg[i], ref=x)
        x = z
        if callback is not None:
            callback(k + 1, x)
    return MaxIter(x, kmax, time.perf_counter() - t0, float(worst), state)
