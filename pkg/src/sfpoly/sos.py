"""Sum-of-squares membership, sos-convexity and multiplier searches.

Every search is a Gram-matrix feasibility problem: the Gram entries are
written as a particular solution of the coefficient-matching equations plus
a null-space combination, which puts the problem in the pinned LMI form the
:mod:`sfpoly.sdp` solver accepts.  Certificates are rechecked by rebuilding
the polynomial identity coefficient by coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .moment import enumerate_basis
from .poly import Polynomial, grlex_key
from .problem import SfpProblem, half_degree
from .sdp import SdpBlock, SdpProblem, SdpStatus, SolverOptions, check_certificate, solve

IDENTITY_TOL = 1e-6
PSD_TOL = 1e-8


@dataclass
class GramCertificate:
    """``p = m^T G m`` with ``m`` the monomials in ``basis`` and ``G >= 0``."""

    poly: Polynomial
    basis: tuple[tuple[int, ...], ...]
    G: np.ndarray
    min_eig: float
    residual: float

    certified = True

    def recheck(self, tol: float = IDENTITY_TOL) -> bool:
        res = gram_residual(self.poly, self.basis, self.G)
        scale = max(1.0, float(np.linalg.norm(self.G, 2)))
        return res <= tol and float(np.linalg.eigvalsh(self.G)[0]) >= -PSD_TOL * scale


@dataclass
class MultiplierCertificate:
    """``target = sigma_0 + sum_i a_i f_i`` with every ``a_i`` a Gram-certified SOS."""

    target: Polynomial
    multipliers: list[tuple[str, Polynomial, GramCertificate]]
    residual: float
    min_eig: float

    certified = True

    def recheck(self, tol: float = IDENTITY_TOL) -> bool:
        rhs = Polynomial.zero(self.target.n)
        for _, f, cert in self.multipliers:
            if not cert.recheck(tol):
                return False
            rhs = rhs + f * cert.poly
        return self.target.max_coeff_diff(rhs) <= tol


@dataclass
class NotCertified:
    """No certificate found.

    ``proven`` is true only when the Gram program was shown infeasible by a
    rechecked Farkas certificate, or a point with a negative value (or a
    negative Hessian eigenvalue) was found.
    """

    reason: str
    status: SdpStatus | None = None
    proven: bool = False
    witness: np.ndarray | None = None

    certified = False


def gram_polynomial(n: int, basis, G: np.ndarray) -> Polynomial:
    """Expand ``m^T G m``."""
    acc: dict[tuple[int, ...], float] = {}
    P = len(basis)
    for i in range(P):
        for j in range(P):
            if G[i, j] != 0.0:
                a = tuple(x + y for x, y in zip(basis[i], basis[j]))
                acc[a] = acc.get(a, 0.0) + float(G[i, j])
    return Polynomial(n, acc)


def gram_residual(p: Polynomial, basis, G: np.ndarray) -> float:
    """Largest coefficient mismatch of ``p - m^T G m``."""
    return p.max_coeff_diff(gram_polynomial(p.n, basis, np.asarray(G, dtype=float)))


# ---------------------------------------------------------------------------
# the shared Gram program


@dataclass
class _GramBlock:
    label: str
    multiplier: Polynomial
    basis: tuple[tuple[int, ...], ...]
    rows: np.ndarray = field(init=False)
    cols: np.ndarray = field(init=False)

    def __post_init__(self):
        self.rows, self.cols = np.triu_indices(len(self.basis))


def _solve_gram(target: Polynomial, blocks: list[_GramBlock], opts: SolverOptions | None):
    """Find PSD Gram matrices with ``target = sum_b multiplier_b * m_b^T G_b m_b``.

    Returns ``(status, [G_b], message)``.
    """
    # coefficient-matching equations over the upper triangles of all G_b
    index: dict[tuple[int, ...], int] = {}
    for alpha in target.terms:
        index.setdefault(alpha, len(index))
    ri, ci, vi = [], [], []
    offset = 0
    for blk in blocks:
        mterms = blk.multiplier.terms
        for t, (r, q) in enumerate(zip(blk.rows, blk.cols)):
            w = 1.0 if r == q else 2.0
            base = tuple(a + b for a, b in zip(blk.basis[r], blk.basis[q]))
            for delta, c in mterms.items():
                alpha = tuple(a + b for a, b in zip(base, delta))
                row = index.setdefault(alpha, len(index))
                ri.append(row)
                ci.append(offset + t)
                vi.append(w * c)
        offset += blk.rows.size
    L = sp.csr_matrix((vi, (ri, ci)), shape=(len(index), offset)).toarray()
    rhs = np.zeros(len(index))
    for alpha, c in target.terms.items():
        rhs[index[alpha]] = c
    g0, *_ = np.linalg.lstsq(L, rhs, rcond=None)
    mismatch = float(np.max(np.abs(L @ g0 - rhs))) if rhs.size else 0.0
    if mismatch > 1e-9 * max(1.0, float(np.max(np.abs(rhs)))):
        return SdpStatus.INFEASIBLE, None, "coefficients outside the span of the Gram basis"
    N = sla.null_space(L)
    cols = np.column_stack([g0, N]) if N.size else g0[:, None]
    sdp_blocks = []
    offset = 0
    for blk in blocks:
        part = cols[offset:offset + blk.rows.size]
        part = np.where(np.abs(part) > 1e-15, part, 0.0)
        sdp_blocks.append(SdpBlock(len(blk.basis), sp.csc_matrix(part), blk.label))
        offset += blk.rows.size
    prob = SdpProblem(cols.shape[1], tuple(sdp_blocks), np.zeros(cols.shape[1]))
    out = solve(prob, opts)
    if out.status is SdpStatus.OPTIMAL:
        Gs = prob.assemble(out.y)
        return out.status, Gs, out.message
    if out.status is SdpStatus.INFEASIBLE and check_certificate(prob, out.certificate).valid:
        return out.status, None, "Gram program infeasible (Farkas certificate)"
    return SdpStatus.STALLED, None, out.message


def _gram_certificate(p: Polynomial, basis, G: np.ndarray) -> GramCertificate:
    G = 0.5 * (G + G.T)
    return GramCertificate(p, tuple(basis), G, float(np.linalg.eigvalsh(G)[0]),
                           gram_residual(p, basis, G))


def _accept(cert: GramCertificate) -> bool:
    scale = max(1.0, float(np.linalg.norm(cert.G, 2)))
    return cert.residual <= min(IDENTITY_TOL, 1e-7 * scale) and cert.min_eig >= -PSD_TOL * scale


# ---------------------------------------------------------------------------
# public checks


def _half_basis(p: Polynomial) -> tuple[tuple[int, ...], ...]:
    """Monomials allowed in a Gram basis of ``p`` by simple Newton-polytope bounds."""
    exps = np.array(list(p.terms), dtype=np.int64)
    top = exps.max(axis=0) // 2
    lo = int(np.ceil(exps.sum(axis=1).min() / 2))
    hi = int(p.degree) // 2
    keep = [a for a in enumerate_basis(p.n, hi).exponents
            if sum(a) >= lo and all(ai <= ti for ai, ti in zip(a, top))]
    return tuple(keep)


def sos_check(p: Polynomial, opts: SolverOptions | None = None) -> GramCertificate | NotCertified:
    """Decide (numerically) whether ``p`` is a sum of squares."""
    if p.is_zero():
        return GramCertificate(p, ((0,) * p.n,), np.zeros((1, 1)), 0.0, 0.0)
    if p.degree % 2:
        return NotCertified("odd degree", proven=True)
    basis = _half_basis(p)
    if not basis:
        return NotCertified("empty Gram basis", proven=True)
    status, Gs, msg = _solve_gram(p, [_GramBlock("gram", Polynomial.constant(p.n, 1.0), basis)], opts)
    if status is SdpStatus.OPTIMAL:
        cert = _gram_certificate(p, basis, Gs[0])
        if _accept(cert):
            return cert
        return NotCertified(f"Gram recheck failed (residual {cert.residual:.2e}, "
                            f"min eig {cert.min_eig:.2e})", status)
    return NotCertified(msg, status, proven=status is SdpStatus.INFEASIBLE)


def _hessian_witness(f: Polynomial, samples: int = 64, seed: int = 0) -> np.ndarray | None:
    """A point where the Hessian of ``f`` has a clearly negative eigenvalue, if one is found."""
    H = f.hessian()
    rng = np.random.default_rng(seed)
    pts = np.vstack([np.ones((1, f.n)), -np.ones((1, f.n)),
                     rng.standard_normal((samples, f.n)), 3 * rng.standard_normal((samples, f.n))])
    for u in pts:
        M = np.array([[H[i][j].eval(u) for j in range(f.n)] for i in range(f.n)])
        vals = np.linalg.eigvalsh(M)
        if vals[0] < -1e-8 * max(1.0, float(np.abs(vals).max())):
            return u
    return None


def hessian_form(f: Polynomial) -> Polynomial:
    """``w(x, z) = z^T H_f(x) z`` in ``2n`` variables (``x`` first, then ``z``)."""
    n = f.n
    H = f.hessian()
    w = Polynomial.zero(2 * n)
    xs = list(range(n))
    for i in range(n):
        for j in range(n):
            if H[i][j].is_zero():
                continue
            zz = [0] * (2 * n)
            zz[n + i] += 1
            zz[n + j] += 1
            w = w + H[i][j].rename(2 * n, xs) * Polynomial(2 * n, {tuple(zz): 1.0})
    return w


def sos_convexity_check(f: Polynomial, opts: SolverOptions | None = None
                        ) -> GramCertificate | NotCertified:
    """Decide (numerically) whether ``f`` is sos-convex.

    The certificate is the Gram matrix of ``z^T H_f(x) z`` on the monomials
    ``z_i x^beta``.
    """
    n = f.n
    if f.degree <= 1:
        # the Hessian vanishes
        return GramCertificate(Polynomial.zero(2 * n), ((0,) * (2 * n),), np.zeros((1, 1)), 0.0, 0.0)
    if f.degree % 2:
        return NotCertified("odd degree", proven=True)
    u = _hessian_witness(f)
    if u is not None:
        return NotCertified("Hessian has a negative eigenvalue", proven=True, witness=u)
    w = hessian_form(f)
    if w.is_zero():
        return GramCertificate(w, ((0,) * (2 * n),), np.zeros((1, 1)), 0.0, 0.0)
    hi = (int(f.degree) - 2) // 2
    xmax = np.array(list(w.terms), dtype=np.int64)[:, :n].max(axis=0) // 2
    basis = []
    for beta in enumerate_basis(n, hi).exponents:
        if any(b > t for b, t in zip(beta, xmax)):
            continue
        for i in range(n):
            e = [0] * n
            e[i] = 1
            basis.append(tuple(beta) + tuple(e))
    basis.sort(key=grlex_key)
    status, Gs, msg = _solve_gram(w, [_GramBlock("hessian", Polynomial.constant(2 * n, 1.0),
                                                 tuple(basis))], opts)
    if status is SdpStatus.OPTIMAL:
        cert = _gram_certificate(w, basis, Gs[0])
        if _accept(cert):
            return cert
        return NotCertified(f"Gram recheck failed (residual {cert.residual:.2e}, "
                            f"min eig {cert.min_eig:.2e})", status)
    return NotCertified(msg, status, proven=status is SdpStatus.INFEASIBLE)


def sos_concavity_check(f: Polynomial, opts: SolverOptions | None = None):
    return sos_convexity_check(-f, opts)


def ball_polynomial(n: int, d: int, R: float) -> Polynomial:
    """``R - ||[x]_d||^2``."""
    ball = Polynomial.constant(n, R)
    for alpha in enumerate_basis(n, d).exponents:
        ball = ball - Polynomial(n, {tuple(2 * a for a in alpha): 1.0})
    return ball


def archimedean_probe(prob: SfpProblem, R: float, opts: SolverOptions | None = None
                      ) -> MultiplierCertificate | NotCertified:
    """Search ``R - ||[x]_d||^2 = a_0 + sum a_i f_i + sum b_j h_j`` with SOS multipliers.

    Multiplier degrees are bounded by ``deg(a_i f_i) <= 2d``.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    n, d = prob.n, prob.d
    target = ball_polynomial(n, d, R)
    one = Polynomial.constant(n, 1.0)
    blocks = [_GramBlock("a0", one, enumerate_basis(n, d).exponents)]
    labels = list(prob.f_labels) + list(prob.g_labels)
    for label, p in zip(labels, prob.constraints):
        if p.is_zero():
            continue
        s = d - half_degree(p)
        if s < 0:
            continue
        blocks.append(_GramBlock(label, p, enumerate_basis(n, s).exponents))
    status, Gs, msg = _solve_gram(target, blocks, opts)
    if status is not SdpStatus.OPTIMAL:
        return NotCertified(msg, status)
    mults = []
    worst = np.inf
    rhs = Polynomial.zero(n)
    for blk, G in zip(blocks, Gs):
        G = 0.5 * (G + G.T)
        sig = gram_polynomial(n, blk.basis, G)
        cert = GramCertificate(sig, blk.basis, G, float(np.linalg.eigvalsh(G)[0]), 0.0)
        worst = min(worst, cert.min_eig / max(1.0, float(np.linalg.norm(G, 2))))
        mults.append((blk.label, blk.multiplier, cert))
        rhs = rhs + blk.multiplier * sig
    out = MultiplierCertificate(target, mults, target.max_coeff_diff(rhs), worst)
    if out.residual <= IDENTITY_TOL and worst >= -PSD_TOL:
        return out
    return NotCertified(f"multiplier recheck failed (residual {out.residual:.2e}, "
                        f"min eig {worst:.2e})", status)


__all__ = [
    "GramCertificate", "MultiplierCertificate", "NotCertified", "sos_check",
    "sos_convexity_check", "sos_concavity_check", "archimedean_probe", "gram_residual",
    "gram_polynomial", "hessian_form", "ball_polynomial",
]
