"""The order-increasing relaxation loop for the split feasibility problem.

At each order ``k`` the perturbed moment relaxation is solved.  An
infeasible relaxation proves ``C ∩ H`` is empty (the relaxations are outer
approximations); an optimal one yields the candidate point
``u = (y_{e_1}, ..., y_{e_n})``, which is accepted only after a direct
evaluation of the original constraints.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .moment import TruncatedMomentVector, build_relaxation, enumerate_basis
from .problem import SfpProblem
from .sdp import (CertificateReport, FarkasCertificate, SdpStatus, SolverOptions,
                  check_certificate, solve)

log = logging.getLogger(__name__)

BALL_ADVICE = ("the relaxation is unbounded, so the Archimedean-type condition likely fails; "
               "add a redundant ball constraint R - ||[x]_d||^2 >= 0")


@dataclass(frozen=True)
class XiPerturbation:
    seed: int
    n: int
    d: int
    vector: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def sample_xi(seed: int, n: int, d: int, norm: float = 0.25) -> XiPerturbation:
    """Uniform direction on the sphere of ``R^{|N^n_{2d}|}``, scaled to ``norm``."""
    if not 0 < norm <= 0.5:
        raise ValueError(f"xi norm must lie in (0, 1/2], got {norm}")
    size = len(enumerate_basis(n, 2 * d))
    v = np.random.default_rng(seed).standard_normal(size)
    v *= norm / np.linalg.norm(v)
    v.setflags(write=False)
    return XiPerturbation(int(seed), n, d, v)


def extract_point(y: TruncatedMomentVector) -> np.ndarray:
    """The degree-one moments ``(y_{e_1}, ..., y_{e_n})``."""
    n = y.basis.n
    out = np.empty(n)
    for i in range(n):
        e = [0] * n
        e[i] = 1
        out[i] = y[tuple(e)]
    return out


@dataclass
class PointReport:
    """Constraint values at a point; ``ok`` iff every value is at least ``-tol``."""

    ok: bool
    point: np.ndarray
    f_values: np.ndarray
    g_values: np.ndarray
    h_values: np.ndarray
    min_residual: float
    tol: float
    f_labels: tuple[str, ...] = ()
    g_labels: tuple[str, ...] = ()

    @property
    def min_f(self) -> float:
        return float(self.f_values.min()) if self.f_values.size else np.inf

    @property
    def min_g(self) -> float:
        return float(self.g_values.min()) if self.g_values.size else np.inf

    def rows(self) -> list[tuple[str, str, float]]:
        out = [("C", lab, float(v)) for lab, v in zip(self.f_labels, self.f_values)]
        out += [("Q", lab, float(v)) for lab, v in zip(self.g_labels, self.g_values)]
        return out


def verify_point(prob: SfpProblem, u, tol: float = 1e-6) -> PointReport:
    """Evaluate every ``f_i(u)`` and ``g_j(Au)``.

    ``h_j(u)`` is computed as well and must agree with ``g_j(Au)``; a
    disagreement means the composed constraints are corrupt and raises.
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.shape != (prob.n,):
        raise ValueError(f"point has length {u.size}, expected {prob.n}")
    fv = np.array([p.eval(u) for p in prob.f], dtype=float)
    Au = prob.A @ u
    gv = np.array([p.eval(Au) for p in prob.g], dtype=float)
    hv = np.array([p.eval(u) for p in prob.h], dtype=float)
    if gv.size:
        scale = 1.0 + np.abs(gv).max()
        if np.max(np.abs(gv - hv)) > 1e-8 * scale:
            raise RuntimeError(f"g(Au) and h(u) disagree by {np.max(np.abs(gv - hv)):.3e}")
    vals = np.concatenate([fv, gv])
    worst = float(vals.min()) if vals.size else np.inf
    ok = bool(np.all(np.isfinite(vals)) and worst >= -tol)
    return PointReport(ok, u, fv, gv, hv, worst, tol, prob.f_labels, prob.g_labels)


@dataclass
class SfpOptions:
    k_max: int | None = None        # default d + 4
    start_order: int | None = None  # default d
    seed: int = 0
    xi_norm: float = 0.25
    feas_tol: float = 1e-6
    sdp: SolverOptions = field(default_factory=SolverOptions)
    retry_reg: float = 1e-9
    polish: bool = True
    tighten: bool = True
    tighten_window: float = 1e4
    tighten_factor: float = 10.0
    diagnose_exactness: bool = True


@dataclass
class OrderRecord:
    k: int
    status: str
    time: float
    iterations: int
    objective: float | None = None
    point: np.ndarray | None = None
    point_ok: bool | None = None
    message: str = ""


@dataclass
class _Common:
    trace: list[OrderRecord]
    xi: XiPerturbation
    notes: list[str]

    @property
    def total_time(self) -> float:
        return sum(r.time for r in self.trace)


@dataclass
class Feasible(_Common):
    point: np.ndarray
    k: int
    report: PointReport
    objective: float

    verdict = "feasible"

    @property
    def residuals(self) -> tuple[float, float]:
        """``(min_i f_i(x), min_j h_j(x))``."""
        return self.report.min_f, (float(self.report.h_values.min())
                                   if self.report.h_values.size else np.inf)


@dataclass
class Infeasible(_Common):
    k: int
    certificate: FarkasCertificate
    check: CertificateReport

    verdict = "infeasible"


@dataclass
class Inconclusive(_Common):
    k_max: int
    objective: float | None
    point: np.ndarray | None
    reason: str

    verdict = "inconclusive"


SfpOutcome = Feasible | Infeasible | Inconclusive


def _tightened(prob: SfpProblem, delta: float) -> SfpProblem:
    """Every constraint ``p >= 0`` replaced by ``p - delta >= 0``."""
    return SfpProblem(prob.n, prob.m, prob.A, tuple(p - delta for p in prob.f),
                      tuple(q - delta for q in prob.g), prob.name, prob.f_labels, prob.g_labels)


def _tightened_point(prob, k, xi, basis, opts, delta):
    """Solve the order-``k`` relaxation of the ``delta``-tightened problem.

    Only a point that verifies against the original problem is returned, so
    the result is sound whatever the tightened relaxation does.
    """
    tight = solve(build_relaxation(_tightened(prob, delta), k, xi.vector).to_sdp(), opts.sdp)
    if tight.status is not SdpStatus.OPTIMAL:
        return None
    u = extract_point(TruncatedMomentVector(basis, tight.y))
    rep = verify_point(prob, u, opts.feas_tol)
    return (tight, u, rep) if rep.ok else None


def exactness_note(prob: SfpProblem, opts: SolverOptions | None = None) -> str | None:
    """Annotation when every constraint is sos-concave (the first order is then exact)."""
    from .sos import sos_concavity_check

    for p in prob.constraints:
        if p.degree <= 1:
            continue
        if not sos_concavity_check(p, opts).certified:
            return None
    return "first-order exact: every constraint is sos-concave"


def solve_sfp(prob: SfpProblem, opts: SfpOptions | None = None) -> SfpOutcome:
    opts = opts or SfpOptions()
    k0 = prob.d if opts.start_order is None else opts.start_order
    if k0 < prob.d:
        raise ValueError(f"start order {k0} is below d = {prob.d}")
    k_max = prob.d + 4 if opts.k_max is None else opts.k_max
    xi = sample_xi(opts.seed, prob.n, prob.d, opts.xi_norm)
    trace: list[OrderRecord] = []
    notes: list[str] = []
    if opts.diagnose_exactness:
        note = exactness_note(prob)
        if note:
            notes.append(note)
    common = dict(trace=trace, xi=xi, notes=notes)
    last_obj, last_point = None, None
    last_stall = ""

    for k in range(k0, k_max + 1):
        t0 = time.perf_counter()
        sdp = build_relaxation(prob, k, xi.vector).to_sdp()
        out = solve(sdp, opts.sdp)
        if out.status is SdpStatus.STALLED:
            log.info("order %d stalled (%s); retrying with regularization %.1e",
                     k, out.message, opts.retry_reg)
            first = out.message
            out = solve(sdp, replace(opts.sdp, reg=opts.retry_reg))
            out.message = f"{first}; retry: {out.message}"
        rec = OrderRecord(k, out.status.value, time.perf_counter() - t0, out.iterations,
                          out.objective, message=out.message)
        trace.append(rec)
        if out.status is SdpStatus.INFEASIBLE:
            rep = check_certificate(sdp, out.certificate)
            if rep.valid:
                return Infeasible(k=k, certificate=out.certificate, check=rep, **common)
            return Inconclusive(k_max=k, objective=last_obj, point=last_point,
                                reason="certificate failed its recheck", **common)
        if out.status is SdpStatus.UNBOUNDED:
            return Inconclusive(k_max=k, objective=None, point=last_point,
                                reason=BALL_ADVICE, **common)
        basis = enumerate_basis(prob.n, 2 * k)
        if out.status is SdpStatus.STALLED:
            # a stall proves nothing; a verified point of a slightly tightened
            # problem still settles feasibility, otherwise move up an order
            delta = opts.tighten_factor * opts.feas_tol
            got = _tightened_point(prob, k, xi, basis, opts, delta) if opts.tighten else None
            rec.time = time.perf_counter() - t0
            if got is None:
                last_stall = f"SDP solver stalled at order {k}: {out.message}"
                continue
            out, u, rep = got
            rec.message += f"; tightened by {delta:.1e}"
        else:
            u = extract_point(TruncatedMomentVector(basis, out.y))
            rep = verify_point(prob, u, opts.feas_tol)
        if not rep.ok and opts.polish:
            # a near miss is often solver accuracy on badly scaled data
            polished = solve(sdp, replace(opts.sdp, polish=True))
            if polished.status is SdpStatus.OPTIMAL:
                u2 = extract_point(TruncatedMomentVector(basis, polished.y))
                rep2 = verify_point(prob, u2, opts.feas_tol)
                if rep2.min_residual > rep.min_residual:
                    out, u, rep = polished, u2, rep2
                    rec.message += "; polished"
            rec.time = time.perf_counter() - t0
        if not rep.ok and opts.tighten and rep.min_residual >= -opts.tighten_window * opts.feas_tol:
            # a point of the tightened set is a point of the original one, so
            # only a verified success is kept; its infeasibility proves nothing
            delta = opts.tighten_factor * max(opts.feas_tol, -rep.min_residual)
            got = _tightened_point(prob, k, xi, basis, opts, delta)
            if got is not None:
                out, u, rep = got
                rec.message += f"; tightened by {delta:.1e}"
            rec.time = time.perf_counter() - t0
        rec.point, rec.point_ok = u, rep.ok
        last_obj, last_point = out.objective, u
        log.info("order %d: objective %.6g, min residual %.3e", k, out.objective, rep.min_residual)
        if rep.ok:
            return Feasible(point=u, k=k, report=rep, objective=out.objective, **common)

    reason = f"no verified point up to order {k_max}"
    if last_stall and trace and trace[-1].status == SdpStatus.STALLED.value:
        reason = last_stall
    return Inconclusive(k_max=k_max, objective=last_obj, point=last_point, reason=reason, **common)
