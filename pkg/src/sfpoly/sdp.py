"""Block-diagonal LMI solver.

Problems have the form::

    minimize    c^T y
    subject to  sum_alpha y_alpha F_alpha^(b)  >= 0   for every block b
                y_0 = 1

The pinned coordinate is substituted out, leaving the standard LMI form
``S = F_0 + sum_i x_i F_i >= 0`` over the free coordinates ``x``.  The
solver is a primal-dual interior-point method on the homogeneous
self-dual embedding, with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step.  An infeasible problem yields a Farkas
certificate ``Z >= 0`` with ``<F_i, Z> = 0`` for the free coordinates and
``<F_0, Z> < 0``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)


class SdpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    STALLED = "stalled"


@dataclass(frozen=True, eq=False)
class SdpBlock:
    """One LMI block.

    ``svec_map`` has shape ``(side*(side+1)/2, dim)``; column ``alpha`` holds
    the upper triangle of ``F_alpha`` in row-major order.
    """

    side: int
    svec_map: sp.csc_matrix
    label: str = ""

    def __post_init__(self):
        if self.side < 1:
            raise ValueError("block side must be at least 1")
        A = sp.csc_matrix(self.svec_map, dtype=float)
        tri = self.side * (self.side + 1) // 2
        if A.shape[0] != tri:
            raise ValueError(f"block of side {self.side} needs {tri} rows, got {A.shape[0]}")
        if A.nnz and not np.all(np.isfinite(A.data)):
            raise ValueError("non-finite coefficient in block")
        object.__setattr__(self, "svec_map", A)

    @classmethod
    def from_dense(cls, mats: Sequence[np.ndarray], label: str = "") -> "SdpBlock":
        """Build from a list of symmetric matrices, one per coordinate."""
        mats = [np.asarray(F, dtype=float) for F in mats]
        side = mats[0].shape[0]
        iu = np.triu_indices(side)
        for F in mats:
            if F.shape != (side, side):
                raise ValueError("coefficient matrices must share one square shape")
            if not np.allclose(F, F.T, atol=1e-12 * (1 + np.abs(F).max())):
                raise ValueError("coefficient matrices must be symmetric")
        cols = np.column_stack([F[iu] for F in mats])
        return cls(side, sp.csc_matrix(cols), label)

    @property
    def dim(self) -> int:
        return self.svec_map.shape[1]

    def assemble(self, y: np.ndarray) -> np.ndarray:
        return unsvec(self.svec_map @ y, self.side)

    def coeff_matrix(self, j: int) -> np.ndarray:
        return unsvec(self.svec_map[:, j].toarray().ravel(), self.side)


def block_scale(b: SdpBlock) -> float:
    """Largest coefficient magnitude of a block (1 for an all-zero block)."""
    return float(abs(b.svec_map).max()) or 1.0


def unsvec(v: np.ndarray, side: int) -> np.ndarray:
    M = np.zeros((side, side))
    M[np.triu_indices(side)] = v
    return M + np.triu(M, 1).T


def _tri_weights(side: int) -> np.ndarray:
    r, c = np.triu_indices(side)
    return np.where(r == c, 1.0, 2.0)


@dataclass(frozen=True, eq=False)
class SdpProblem:
    dim: int
    blocks: tuple[SdpBlock, ...]
    c: np.ndarray
    norm_index: int = 0
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        blocks = tuple(self.blocks)
        for b in blocks:
            if b.dim != self.dim:
                raise ValueError(f"block '{b.label}' has {b.dim} columns, expected {self.dim}")
        c = np.asarray(self.c, dtype=float)
        if c.shape != (self.dim,) or not np.all(np.isfinite(c)):
            raise ValueError("objective must be a finite vector of length dim")
        if not 0 <= self.norm_index < self.dim:
            raise ValueError("normalization index out of range")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "c", c)

    def assemble(self, y: np.ndarray) -> list[np.ndarray]:
        return [b.assemble(y) for b in self.blocks]

    def adjoint(self, Z: Sequence[np.ndarray]) -> np.ndarray:
        """``sum_b <F_alpha^(b), Z_b>`` for every coordinate alpha."""
        out = np.zeros(self.dim)
        for b, Zb in zip(self.blocks, Z):
            iu = np.triu_indices(b.side)
            out += b.svec_map.T @ (_tri_weights(b.side) * Zb[iu])
        return out


@dataclass
class SolverOptions:
    feastol: float = 1e-8
    gaptol: float = 1e-8
    max_iter: int = 200
    reg: float = 1e-12
    step: float = 0.99
    psd_tol: float = 1e-8
    linsolve: str = "auto"
    # accepted when full accuracy is out of reach
    reduced_tol: float = 1e-6
    patience: int = 8
    # iterate past convergence to drive the primal residual down
    polish: bool = False
    verbose: bool = False


@dataclass
class FarkasCertificate:
    """Dual multipliers proving the LMI system is empty."""

    Z: list[np.ndarray]
    violation: float
    residual: float
    min_eigs: list[float]

    @property
    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(Zb * Zb) for Zb in self.Z)))

    def summary(self) -> dict:
        return {"block_sizes": [int(Zb.shape[0]) for Zb in self.Z],
                "violation": self.violation, "residual": self.residual,
                "min_eig": min(self.min_eigs) if self.min_eigs else 0.0}


@dataclass
class CertificateReport:
    valid: bool
    violation: float
    residual: float
    min_eig: float
    norm: float


def check_certificate(prob: SdpProblem, cert: FarkasCertificate, psd_tol: float = 1e-8,
                      lin_tol: float = 1e-7, gap_tol: float = 1e-7) -> CertificateReport:
    """Recompute the certificate quantities from scratch and test them.

    Thresholds scale with ``||Z||`` so that the test does not depend on how
    the certificate is normalized.
    """
    if len(cert.Z) != len(prob.blocks):
        raise ValueError(f"certificate has {len(cert.Z)} blocks, problem has {len(prob.blocks)}")
    for b, Zb in zip(prob.blocks, cert.Z):
        if np.shape(Zb) != (b.side, b.side):
            raise ValueError(f"block '{b.label}': expected {b.side}x{b.side}, got {np.shape(Zb)}")
    Z = [0.5 * (np.asarray(Zb, dtype=float) + np.asarray(Zb, dtype=float).T) for Zb in cert.Z]
    nrm = float(np.sqrt(sum(np.sum(Zb * Zb) for Zb in Z)))
    g = prob.adjoint(Z)
    v = float(g[prob.norm_index])
    free = np.delete(g, prob.norm_index)
    rho = float(np.max(np.abs(free))) if free.size else 0.0
    min_eig = min(float(np.linalg.eigvalsh(Zb)[0]) for Zb in Z)
    valid = (nrm > 0 and min_eig >= -psd_tol * nrm and rho <= lin_tol * nrm
             and v <= -gap_tol * nrm)
    return CertificateReport(bool(valid), v, rho, min_eig, nrm)


@dataclass
class SdpOutcome:
    status: SdpStatus
    y: np.ndarray | None = None
    objective: float | None = None
    dual_objective: float | None = None
    Z: list[np.ndarray] | None = None
    certificate: FarkasCertificate | None = None
    ray: np.ndarray | None = None
    iterations: int = 0
    residuals: dict = field(default_factory=dict)
    history: list[dict] = field(default_factory=list)
    message: str = ""
    solve_time: float = 0.0


@dataclass
class OptimalityReport:
    valid: bool
    min_eig: float
    gap: float
    dual_residual: float
    normalized: bool


def check_optimal(prob: SdpProblem, y: np.ndarray, Z: Sequence[np.ndarray] | None = None,
                  psd_tol: float = 1e-8, gap_tol: float = 1e-7, dual_tol: float = 1e-6
                  ) -> OptimalityReport:
    """Independent feasibility (and, given ``Z``, optimality) recheck of ``y``."""
    y = np.asarray(y, dtype=float)
    normalized = abs(y[prob.norm_index] - 1.0) <= 1e-12
    worst = _psd_margin(prob.assemble(y), [block_scale(b) for b in prob.blocks])
    ok = normalized and worst >= -psd_tol
    gap = 0.0
    dres = 0.0
    if Z is not None:
        g = prob.adjoint(Z)
        resid = np.delete(g - prob.c, prob.norm_index)
        dres = float(np.linalg.norm(resid)) / (1 + np.linalg.norm(prob.c))
        pobj = float(prob.c @ y)
        dobj = float(prob.c[prob.norm_index] - g[prob.norm_index])
        gap = abs(pobj - dobj) / (1 + abs(pobj))
        zmin = min(float(np.linalg.eigvalsh(Zb)[0]) / max(1.0, np.linalg.norm(Zb, 2)) for Zb in Z)
        ok = ok and gap <= gap_tol and dres <= dual_tol and zmin >= -psd_tol
    return OptimalityReport(bool(ok), worst, gap, dres, normalized)


# ---------------------------------------------------------------------------
# interior-point machinery


class _Block:
    """Per-block data over the free coordinates."""

    def __init__(self, blk: SdpBlock, free: np.ndarray, norm_index: int, scale: float = 1.0):
        self.side = blk.side
        self.scale = scale
        blk = SdpBlock(blk.side, blk.svec_map / scale, blk.label)
        self.rows, self.cols = np.triu_indices(blk.side)
        self.w = np.where(self.rows == self.cols, 1.0, 2.0)
        self.F0 = unsvec(blk.svec_map[:, norm_index].toarray().ravel(), blk.side)
        Ax = blk.svec_map[:, free].tocsr()
        self.used = np.unique(Ax.tocoo().row)
        self.Ax = Ax
        self.sub = Ax[self.used, :].tocsc()
        self.sw = np.sqrt(self.w)
        self._stack = None

    def lin(self, x: np.ndarray) -> np.ndarray:
        return unsvec(self.Ax @ x, self.side)

    def adj(self, U: np.ndarray) -> np.ndarray:
        return self.Ax.T @ (self.w * U[self.rows, self.cols])

    def schur(self, V: np.ndarray, out: np.ndarray, chunk: int = 1500) -> None:
        """Add ``<F_i, V F_j V>`` to ``out``."""
        if self.used.size == 0:
            return
        r = self.rows[self.used]
        q = self.cols[self.used]
        w = self.w[self.used]
        sub = self.sub
        subT = sub.T.tocsr()
        half = 0.5 * w
        for lo in range(0, r.size, chunk):
            hi = min(lo + chunk, r.size)
            ri, qi = r[lo:hi], q[lo:hi]
            E = V[np.ix_(ri, r)] * V[np.ix_(qi, q)] + V[np.ix_(ri, q)] * V[np.ix_(qi, r)]
            E *= w[lo:hi, None]
            E *= half[None, :]
            # (E @ sub) computed as (sub^T @ E^T)^T
            Esub = (subT @ E.T).T
            out += subT[:, lo:hi] @ Esub


    def scaled_columns(self, Rinv: np.ndarray) -> np.ndarray:
        """Columns ``svec(Rinv F_i Rinv^T)`` with sqrt(2) on off-diagonal entries."""
        p = self.Ax.shape[1]
        if self._stack is None:
            coo = self.Ax.tocoo()
            r, q = self.rows[coo.row], self.cols[coo.row]
            off = r != q
            ii = np.concatenate([coo.col * self.side + r, (coo.col * self.side + q)[off]])
            jj = np.concatenate([q, r[off]])
            vv = np.concatenate([coo.data, coo.data[off]])
            self._stack = sp.csr_matrix((vv, (ii, jj)), shape=(p * self.side, self.side))
        T = (self._stack @ Rinv.T).reshape(p, self.side, self.side)
        T = np.matmul(Rinv[None, :, :], T)
        return (T[:, self.rows, self.cols] * self.sw).T


class _QrSystem:
    """``F^* Q F`` solves through a QR factorization of the scaled operator.

    ``solve(Bt, r)`` returns ``dx`` with ``(F^* Q F) dx = Gt^*(Bt) + r`` and
    the scaled residual ``Bt - Gt(dx)``, where ``Gt(v) = Rinv F(v) Rinv^T``.
    """

    def __init__(self, blocks, Rinvs, p, reg):
        self.blocks = blocks
        self.Rinvs = Rinvs
        self.A = np.vstack([b.scaled_columns(Rinv) for b, Rinv in zip(blocks, Rinvs)])
        scale = max(1.0, float(np.max(np.sum(self.A * self.A, axis=0))))
        aug = np.vstack([self.A, np.sqrt(reg * scale) * np.eye(p)])
        self.Qm, self.R = sla.qr(aug, mode="economic", check_finite=False)
        if not np.all(np.isfinite(self.R)):
            raise _Stall("Schur complement not positive definite")
        self.m = self.A.shape[0]

    def solve(self, Bt, r):
        b = np.concatenate([blk.sw * Bb[blk.rows, blk.cols] for blk, Bb in zip(self.blocks, Bt)])
        t = self.Qm[: self.m].T @ b + sla.solve_triangular(self.R, r, trans="T", check_finite=False)
        dx = sla.solve_triangular(self.R, t, check_finite=False)
        # one step of refinement on the normal equations
        res = b - self.A @ dx
        e = self.A.T @ res + r
        dx = dx + sla.solve_triangular(
            self.R, sla.solve_triangular(self.R, e, trans="T", check_finite=False), check_finite=False)
        res = b - self.A @ dx
        out, lo = [], 0
        for blk in self.blocks:
            hi = lo + blk.rows.size
            out.append(_unsvec_scaled(res[lo:hi], blk))
            lo = hi
        return dx, out


class _NormalSystem:
    """Same interface as :class:`_QrSystem`, via a Cholesky-factored Schur matrix."""

    def __init__(self, blocks, Rinvs, p, reg, lin, adj):
        self.Rinvs = Rinvs
        self.lin = lin
        self.adj = adj
        M = np.zeros((p, p))
        for b, Rinv in zip(blocks, Rinvs):
            b.schur(Rinv.T @ Rinv, M)
        M = _sym(M)
        diag_scale = max(1.0, float(np.max(np.abs(np.diag(M)))))
        self.factor = None
        for eps in (reg, 1e-10, 1e-8, 1e-6):
            try:
                self.factor = sla.cho_factor(M + eps * diag_scale * np.eye(p), lower=True,
                                             check_finite=False)
                break
            except (np.linalg.LinAlgError, ValueError):
                continue
        if self.factor is None:
            raise _Stall("Schur complement not positive definite")

    def solve(self, Bt, r):
        rhs = self.adj([Rinv.T @ Bb @ Rinv for Rinv, Bb in zip(self.Rinvs, Bt)]) + r
        dx = sla.cho_solve(self.factor, rhs, check_finite=False)
        Fdx = self.lin(dx)
        return dx, [Bb - Rinv @ a @ Rinv.T for Rinv, Bb, a in zip(self.Rinvs, Bt, Fdx)]


def _unsvec_scaled(v: np.ndarray, blk: "_Block") -> np.ndarray:
    M = np.zeros((blk.side, blk.side))
    M[blk.rows, blk.cols] = v / blk.sw
    return M + np.triu(M, 1).T


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _inner(U: Sequence[np.ndarray], V: Sequence[np.ndarray]) -> float:
    return float(sum(np.sum(a * b) for a, b in zip(U, V)))


def _fro(U: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(np.sum(a * a) for a in U)))


def _psd_margin(mats: Sequence[np.ndarray], data_scales: Sequence[float] | None = None) -> float:
    """Smallest eigenvalue relative to ``max(1, ||M||, largest block coefficient)``."""
    data_scales = data_scales or [1.0] * len(mats)
    return min(float(np.linalg.eigvalsh(M)[0]) / max(1.0, np.linalg.norm(M, 2), s)
               for M, s in zip(mats, data_scales))


def _max_step(lam: np.ndarray, D: np.ndarray) -> float:
    """Largest ``a`` with ``diag(lam) + a D >= 0``."""
    s = 1.0 / np.sqrt(lam)
    e = np.linalg.eigvalsh(_sym(D * s[:, None] * s[None, :]))[0]
    return np.inf if e >= 0 else -1.0 / e


def _is_pd(M: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return True


class _Stall(Exception):
    pass


def _nt_scaling(S: np.ndarray, Z: np.ndarray):
    try:
        Ls = np.linalg.cholesky(S)
        Lz = np.linalg.cholesky(Z)
    except np.linalg.LinAlgError:
        raise _Stall("iterate left the cone") from None
    U, lam, Vt = np.linalg.svd(Lz.T @ Ls)
    if lam[-1] <= 0 or not np.all(np.isfinite(lam)):
        raise _Stall("degenerate scaling")
    sq = np.sqrt(lam)
    R = (Ls @ Vt.T) / sq[None, :]
    Lsinv = sla.solve_triangular(Ls, np.eye(S.shape[0]), lower=True)
    Rinv = sq[:, None] * (Vt @ Lsinv)
    return R, Rinv, lam


def _trivial_solve(prob: SdpProblem, opts: SolverOptions) -> SdpOutcome:
    """All coordinates pinned: just test ``F_0 >= 0``."""
    y = np.zeros(prob.dim)
    y[prob.norm_index] = 1.0
    mats = prob.assemble(y)
    worst, where = np.inf, None
    for i, S in enumerate(mats):
        vals, vecs = np.linalg.eigh(S)
        if vals[0] < worst:
            worst, where = vals[0], (i, vecs[:, 0])
    scale = max(1.0, max(np.linalg.norm(S, 2) for S in mats))
    if worst >= -opts.psd_tol * scale:
        obj = float(prob.c @ y)
        Z = [np.zeros_like(S) for S in mats]
        return SdpOutcome(SdpStatus.OPTIMAL, y, obj, obj, Z, message="no free coordinates")
    i, v = where
    Z = [np.zeros_like(S) for S in mats]
    Z[i] = np.outer(v, v)
    cert = FarkasCertificate(Z, float(worst), 0.0, [float(np.linalg.eigvalsh(Zb)[0]) for Zb in Z])
    return SdpOutcome(SdpStatus.INFEASIBLE, certificate=cert, message="no free coordinates")


def solve(prob: SdpProblem, opts: SolverOptions | None = None) -> SdpOutcome:
    """Solve ``prob``; see the module docstring for the problem form."""
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    out = _solve(prob, opts)
    if out.status is SdpStatus.UNBOUNDED and out.y is None:
        # an improving ray alone does not show the feasible set is nonempty
        phase1 = solve(SdpProblem(prob.dim, prob.blocks, np.zeros(prob.dim), prob.norm_index,
                                  prob.labels), opts)
        if phase1.status is SdpStatus.OPTIMAL:
            out.y = phase1.y
            out.message += "; feasible point from a phase-one solve"
        else:
            phase1.iterations += out.iterations
            phase1.message = f"improving ray found; phase-one solve: {phase1.message}"
            out = phase1
    if out.status is SdpStatus.OPTIMAL:
        if out.message.startswith("converged"):
            rep = check_optimal(prob, out.y, out.Z, psd_tol=opts.psd_tol)
        else:
            tol = opts.reduced_tol
            rep = check_optimal(prob, out.y, out.Z, psd_tol=tol, gap_tol=tol, dual_tol=tol)
        if not rep.valid:
            out = SdpOutcome(SdpStatus.STALLED, iterations=out.iterations, history=out.history,
                             residuals=out.residuals,
                             message=f"optimality recheck failed (min eig {rep.min_eig:.2e}, "
                                     f"gap {rep.gap:.2e}, dual residual {rep.dual_residual:.2e})")
    elif out.status is SdpStatus.INFEASIBLE:
        rep = check_certificate(prob, out.certificate)
        if not rep.valid:
            out = SdpOutcome(SdpStatus.STALLED, iterations=out.iterations, history=out.history,
                             residuals=out.residuals,
                             message=f"certificate recheck failed (violation {rep.violation:.2e}, "
                                     f"residual {rep.residual:.2e}, min eig {rep.min_eig:.2e})")
    out.solve_time = time.perf_counter() - t0
    return out


def _solve(prob: SdpProblem, opts: SolverOptions) -> SdpOutcome:
    free = np.array([i for i in range(prob.dim) if i != prob.norm_index], dtype=np.int64)
    if free.size == 0:
        return _trivial_solve(prob, opts)
    # each block is divided by its largest coefficient; dual blocks are mapped back on exit
    scales = [block_scale(b) for b in prob.blocks]
    blocks = [_Block(b, free, prob.norm_index, sc) for b, sc in zip(prob.blocks, scales)]
    c0 = float(prob.c[prob.norm_index])
    c = prob.c[free]
    p = free.size
    nu = sum(b.side for b in blocks)
    F0 = [b.F0 for b in blocks]
    nF0 = _fro(F0)
    nc = float(np.linalg.norm(c))

    def lin(v):
        return [b.lin(v) for b in blocks]

    def adj(U):
        g = np.zeros(p)
        for b, Ub in zip(blocks, U):
            g += b.adj(Ub)
        return g

    # Gram matrix of the constraint map, used to keep dual steps on the dual equation
    G0 = np.zeros((p, p))
    for b in blocks:
        G0 += (b.Ax.T @ sp.diags(b.w) @ b.Ax).toarray()
    try:
        g0_factor = sla.cho_factor(G0 + 1e-14 * max(1.0, float(np.max(np.diag(G0)))) * np.eye(p),
                                   lower=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        g0_factor = None

    def dual_fix(dZ, target):
        """Least-norm correction making ``F^*(dZ) = target``."""
        if g0_factor is None:
            return dZ
        e = adj(dZ) - target
        return [a - b for a, b in zip(dZ, lin(sla.cho_solve(g0_factor, e, check_finite=False)))]

    x = np.zeros(p)
    S = [np.eye(b.side) for b in blocks]
    Z = [np.eye(b.side) for b in blocks]
    tau = kappa = 1.0
    history: list[dict] = []
    status, message = SdpStatus.STALLED, "iteration limit reached"
    small_steps = 0
    best = None
    it = 0

    def result(status, message, **kw):
        return SdpOutcome(status, iterations=it, history=history, message=message, **kw)

    for it in range(opts.max_iter + 1):
        Fx = lin(x)
        rp = [Sb - tau * F0b - Fxb for Sb, F0b, Fxb in zip(S, F0, Fx)]
        FZ = adj(Z)
        rd = FZ - tau * c
        hz = _inner(F0, Z)
        cx = float(c @ x)
        rg = kappa + cx + hz
        sz = _inner(S, Z)
        mu = (sz + tau * kappa) / (nu + 1)

        pobj = cx / tau + c0
        dobj = -hz / tau + c0
        pres = _fro(rp) / tau / (1 + nF0)
        dres = float(np.linalg.norm(rd)) / tau / (1 + nc)
        gap = sz / tau**2
        relgap = abs(pobj - dobj) / (1 + abs(pobj))
        history.append({"iter": it, "pobj": pobj, "dobj": dobj, "pres": pres,
                        "dres": dres, "gap": gap, "tau": tau, "kappa": kappa, "mu": mu})
        if opts.verbose:
            log.info("%3d pobj % .8e dobj % .8e pres %.2e dres %.2e gap %.2e tau %.2e kappa %.2e",
                     it, pobj, dobj, pres, dres, gap, tau, kappa)

        def snapshot():
            y = np.empty(prob.dim)
            y[prob.norm_index] = 1.0
            y[free] = x / tau
            return dict(y=y, objective=pobj, dual_objective=dobj, Z=[_sym(Zb) / (tau * sc) for Zb, sc in zip(Z, scales)],
                        residuals={"primal": pres, "dual": dres, "gap": gap})

        score = max(pres / opts.feastol, dres / opts.feastol, min(gap, relgap) / opts.gaptol)
        rscore = max(pres, dres, min(gap, relgap)) / opts.reduced_tol
        if rscore <= 1.0:
            margin = _psd_margin([(F0b + Fxb / tau) * sc for F0b, Fxb, sc in zip(F0, Fx, scales)],
                                 scales)
            full = score <= 1.0 and margin >= -0.1 * opts.psd_tol
            if full and not opts.polish:
                return result(SdpStatus.OPTIMAL, "converged", **snapshot())
            # polishing keeps iterating and ranks candidates by their worst residual
            key = rscore if opts.polish else score
            if margin >= -0.1 * opts.reduced_tol and (best is None or key < best[0]):
                best = (key, it, snapshot(), full)
        if best is not None and it - best[1] >= opts.patience:
            status, message = SdpStatus.STALLED, "no progress"
            break
        if hz < 0:
            ratio = float(np.linalg.norm(FZ)) / (-hz)
            if ratio <= opts.feastol:
                Zc = [_sym(Zb) / sc for Zb, sc in zip(Z, scales)]
                nz = _fro(Zc)
                Zc = [Zb / nz for Zb in Zc]
                g = prob.adjoint(Zc)
                cert = FarkasCertificate(
                    Zc, float(g[prob.norm_index]),
                    float(np.max(np.abs(np.delete(g, prob.norm_index)))),
                    [float(np.linalg.eigvalsh(Zb)[0]) for Zb in Zc])
                return result(SdpStatus.INFEASIBLE, "primal infeasible", certificate=cert,
                              residuals={"primal": pres, "dual": dres, "gap": gap, "farkas": ratio})
        if cx < 0:
            ray_res = _fro([Sb - Fxb for Sb, Fxb in zip(S, Fx)]) / (-cx)
            if ray_res <= opts.feastol:
                ray = np.zeros(prob.dim)
                ray[free] = x / (-cx)
                y = None
                if pres <= opts.feastol:
                    y = np.empty(prob.dim)
                    y[prob.norm_index] = 1.0
                    y[free] = x / tau
                return result(SdpStatus.UNBOUNDED, "objective unbounded below", y=y, ray=ray,
                              residuals={"primal": pres, "dual": dres, "ray": ray_res})
        if it == opts.max_iter:
            break

        try:
            step = _newton_step(blocks, S, Z, x, tau, kappa, rp, rd, rg, mu, F0, c, p, lin, adj,
                                dual_fix, opts)
        except _Stall as exc:
            status, message = SdpStatus.STALLED, str(exc)
            break
        alpha, dx, dS, dZ, dtau, dkappa = step
        # roundoff can still push a nearly singular block out; back off until both are definite
        for _ in range(40):
            S_new = [_sym(Sb + alpha * d) for Sb, d in zip(S, dS)]
            Z_new = [_sym(Zb + alpha * d) for Zb, d in zip(Z, dZ)]
            if all(_is_pd(M) for M in S_new + Z_new):
                break
            alpha *= 0.5
        x = x + alpha * dx
        S, Z = S_new, Z_new
        tau += alpha * dtau
        kappa += alpha * dkappa
        if tau <= 0 or kappa <= 0:
            status, message = SdpStatus.STALLED, "homogenizing variables left the cone"
            break
        small_steps = small_steps + 1 if alpha < 1e-8 else 0
        if small_steps >= 5:
            status, message = SdpStatus.STALLED, "step length collapsed"
            break
        # rescale the embedding; it is invariant under positive scaling
        scale = 1.0 / max(tau, kappa) if max(tau, kappa) > 1e8 or max(tau, kappa) < 1e-8 else 1.0
        if scale != 1.0:
            x *= scale
            S = [Sb * scale for Sb in S]
            Z = [Zb * scale for Zb in Z]
            tau *= scale
            kappa *= scale

    if best is not None:
        msg = "converged (polished)" if best[3] else f"reduced accuracy ({message})"
        return result(SdpStatus.OPTIMAL, msg, **best[2])
    last = history[-1] if history else {}
    return result(status, message, residuals={k: last.get(k) for k in ("pres", "dres", "gap")})


def _newton_step(blocks, S, Z, x, tau, kappa, rp, rd, rg, mu, F0, c, p, lin, adj, dual_fix, opts):
    scal = [_nt_scaling(Sb, Zb) for Sb, Zb in zip(S, Z)]
    Rs = [R for R, _, _ in scal]
    Rinvs = [Rinv for _, Rinv, _ in scal]
    size = sum(b.rows.size for b in blocks)
    if opts.linsolve == "qr" or (opts.linsolve == "auto" and size * p * p <= 4e9):
        solver = _QrSystem(blocks, Rinvs, p, opts.reg)
    else:
        solver = _NormalSystem(blocks, Rinvs, p, opts.reg, lin, adj)

    # everything below works with scaled dual matrices Zt = R^T dZ R
    F0t = [Rinv @ F0b @ Rinv.T for Rinv, F0b in zip(Rinvs, F0)]
    dx2, dZ2t = solver.solve([-a for a in F0t], -c)
    denom = float(c @ dx2) + _inner(F0t, dZ2t) - kappa / tau
    if not np.isfinite(denom) or denom >= 0:
        raise _Stall("embedding system is singular")

    def direction(eta, Ds, dt):
        Bt = []
        for (_, Rinv, lam), D, rpb in zip(scal, Ds, rp):
            T = 2.0 * D / (lam[:, None] + lam[None, :])
            Bt.append(T + eta * (Rinv @ rpb @ Rinv.T))
        dx1, dZ1t = solver.solve(Bt, eta * rd)
        dtau = (-eta * rg - dt / tau - float(c @ dx1) - _inner(F0t, dZ1t)) / denom
        dx = dx1 + dtau * dx2
        dZt = [_sym(a + dtau * b) for a, b in zip(dZ1t, dZ2t)]
        dkappa = (dt - kappa * dtau) / tau
        dZ = [_sym(Rinv.T @ a @ Rinv) for Rinv, a in zip(Rinvs, dZt)]
        # like dS below, dZ is made to satisfy its linear equation to working precision
        dZ = dual_fix(dZ, dtau * c - eta * rd)
        dZt = [_sym(R.T @ a @ R) for R, a in zip(Rs, dZ)]
        # the primal residual equation is enforced exactly
        dS = [_sym(-eta * rpb + a + dtau * F0b) for rpb, a, F0b in zip(rp, lin(dx), F0)]
        dSt = [_sym(Rinv @ dSb @ Rinv.T) for Rinv, dSb in zip(Rinvs, dS)]
        return dx, dS, dZ, dtau, dkappa, dSt, dZt

    def max_alpha(dSt, dZt, dtau, dkappa):
        a = np.inf
        for (_, _, lam), ds, dz in zip(scal, dSt, dZt):
            a = min(a, _max_step(lam, ds), _max_step(lam, dz))
        if dtau < 0:
            a = min(a, -tau / dtau)
        if dkappa < 0:
            a = min(a, -kappa / dkappa)
        return a

    # predictor
    Ds_aff = [-np.diag(lam**2) for _, _, lam in scal]
    aff = direction(1.0, Ds_aff, -tau * kappa)
    a_aff = min(1.0, max_alpha(aff[5], aff[6], aff[3], aff[4]))
    sigma = (1.0 - a_aff) ** 3
    # corrector
    Ds = []
    for (_, _, lam), ds, dz in zip(scal, aff[5], aff[6]):
        corr = 0.5 * (ds @ dz + dz @ ds)
        Ds.append(-np.diag(lam**2) - corr + sigma * mu * np.eye(lam.size))
    dt = -tau * kappa - aff[3] * aff[4] + sigma * mu
    dx, dS, dZ, dtau, dkappa, dSt, dZt = direction(1.0 - sigma, Ds, dt)
    a_max = max_alpha(dSt, dZt, dtau, dkappa)
    alpha = min(1.0, opts.step * a_max)
    if not np.isfinite(alpha) or alpha <= 0:
        raise _Stall("no admissible step")
    return alpha, dx, dS, dZ, dtau, dkappa


# ---------------------------------------------------------------------------
# plain-text dump for cross-checking against external solvers


def dump_problem(prob: SdpProblem, fh: IO[str]) -> None:
    """Write ``prob`` as a plain-text block listing.

    Layout::

        sfpoly-sdp 1
        dim <N> norm_index <i> blocks <B>
        objective <c_0> ... <c_{N-1}>
        block <b> side <s> nnz <K> label <text>
        <alpha> <row> <col> <value>      (K lines, 0-based, row <= col)
    """
    fh.write("sfpoly-sdp 1\n")
    fh.write(f"dim {prob.dim} norm_index {prob.norm_index} blocks {len(prob.blocks)}\n")
    fh.write("objective " + " ".join(repr(float(v)) for v in prob.c) + "\n")
    for bi, b in enumerate(prob.blocks):
        coo = b.svec_map.tocoo()
        rows, cols = np.triu_indices(b.side)
        fh.write(f"block {bi} side {b.side} nnz {coo.nnz} label {b.label or '-'}\n")
        for t, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{j} {rows[t]} {cols[t]} {float(v)!r}\n")


def load_problem(fh: IO[str]) -> SdpProblem:
    lines = iter(fh.read().splitlines())
    if next(lines).split() != ["sfpoly-sdp", "1"]:
        raise ValueError("not an sfpoly-sdp dump")
    head = next(lines).split()
    dim, norm_index, nblocks = int(head[1]), int(head[3]), int(head[5])
    c = np.array([float(v) for v in next(lines).split()[1:]])
    blocks = []
    for _ in range(nblocks):
        h = next(lines).split()
        side, nnz, label = int(h[3]), int(h[5]), " ".join(h[7:])
        tri = {(r, q): t for t, (r, q) in enumerate(zip(*np.triu_indices(side)))}
        ri, ci, vi = [], [], []
        for _ in range(nnz):
            j, r, q, v = next(lines).split()
            ri.append(tri[(int(r), int(q))])
            ci.append(int(j))
            vi.append(float(v))
        A = sp.csc_matrix((vi, (ri, ci)), shape=(side * (side + 1) // 2, dim))
        blocks.append(SdpBlock(side, A, "" if label == "-" else label))
    return SdpProblem(dim, tuple(blocks), c, norm_index)
