"""The Hermitian family ``Q`` and the structural operators built from it.

``Q_k(z, zbar) = zbar^T J_k z`` for Hermitian ``n x n`` matrices
``J_1, ..., J_d``.  The operators act on ``BigradedSeries``:

* ``K f = Q(f, zbar)`` and ``Kbar fbar = Q(z, fbar)``,
* ``K* P = sum_k J_k d_zbar P_k`` divided by ``m + 1`` on the part of
  ``z``-degree ``m``,
* ``Delta phi = sum_j d_{u_j} phi * Q_j`` and its adjoint
  ``Delta* phi = sum_j u_j Q_j^*(d_z, d_zbar) phi``,
* the trace ``T = sum conj(J_pq) d_zbar_p d_z_q`` for ``d = 1``.

``Q_j^*`` uses the conjugated coefficients of ``J_j``; for real ``J`` this
is the literal substitution ``Q_j(d_z, d_zbar)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from gmpy2 import mpq

from . import fischer, linalg
from .coeffs import ONE, ZERO, GaussRat
from .gseries import BigradedSeries, HoloSeries, SeriesError, _Series

__all__ = [
    "FamilyError",
    "FamilyReport",
    "HermitianFamily",
    "validate_family",
    "require_valid",
    "eval_Q",
    "K_apply",
    "Kbar_apply",
    "Kstar_apply",
    "delta_apply",
    "deltastar_apply",
    "cm_trace",
    "sigma_min_K",
    "K_block",
]


class FamilyError(ValueError):
    """The Hermitian family violates a nondegeneracy clause."""

    def __init__(self, message, condition=""):
        super().__init__(message)
        self.condition = condition


class HermitianFamily:
    """``d`` Hermitian ``n x n`` matrices with ``GaussRat`` entries."""

    __slots__ = ("n", "d", "J", "_key")

    def __init__(self, J):
        J = [[[GaussRat.coerce(x) for x in row] for row in M] for M in J]
        if not J:
            raise FamilyError("empty family", "shape")
        n = len(J[0])
        for M in J:
            if len(M) != n or any(len(row) != n for row in M):
                raise FamilyError("matrices must all be square of the same size", "shape")
        self.n = n
        self.d = len(J)
        self.J = J
        self._key = tuple(tuple(tuple((x.re, x.im) for x in row) for row in M) for M in J)

    @classmethod
    def diagonal(cls, *diags):
        """Family of diagonal matrices, one tuple of entries per matrix."""
        out = []
        for dg in diags:
            n = len(dg)
            out.append([[dg[i] if i == j else 0 for j in range(n)] for i in range(n)])
        return cls(out)

    def key(self):
        return self._key

    def __eq__(self, other):
        return isinstance(other, HermitianFamily) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"HermitianFamily(n={self.n}, d={self.d})"

    def to_json(self):
        from .coeffs import format_rat
        return [[[{"re": format_rat(x.re), "im": format_rat(x.im)} for x in row] for row in M]
                for M in self.J]

    @classmethod
    def from_json(cls, data):
        def ent(x):
            if isinstance(x, dict):
                return GaussRat.parse(str(x.get("re", "0")), str(x.get("im", "0")))
            if isinstance(x, str):
                return GaussRat.parse(x, "0")
            if isinstance(x, int):
                return GaussRat(x)
            raise FamilyError(f"bad matrix entry {x!r}", "shape")
        return cls([[[ent(x) for x in row] for row in M] for M in data])

    def Q(self, cap=8) -> BigradedSeries:
        """The C^d-valued series ``Q(z, zbar)``."""
        n, d = self.n, self.d
        return eval_Q(_zvec(n, d, cap), _zbarvec(n, d, cap), self)

    def is_real(self) -> bool:
        return all(not x.im for M in self.J for row in M for x in row)


def _zvec(n, d, cap):
    terms = {}
    for i in range(n):
        key = tuple(1 if t == i else 0 for t in range(n)) + (0,) * (n + d)
        vec = [ZERO] * n
        vec[i] = ONE
        terms[key] = tuple(vec)
    return BigradedSeries(n, d, n, cap, terms)


def _zbarvec(n, d, cap):
    return _zvec(n, d, cap).conjugate()


@dataclass
class FamilyReport:
    hermitian: bool
    kernel_dim: int
    independent: bool
    ok: bool
    message: str

    def to_json(self):
        return {"hermitian": self.hermitian, "kernel_dim": self.kernel_dim,
                "independent": self.independent, "ok": self.ok, "message": self.message}


def validate_family(family: HermitianFamily) -> FamilyReport:
    """Hermitian symmetry, trivial common kernel and real independence."""
    n, d, J = family.n, family.d, family.J
    herm = all(J[k][p][q] == J[k][q][p].conj()
               for k in range(d) for p in range(n) for q in range(n))
    # common kernel: realify the stacked (d n) x n complex matrix
    rows = []
    for k in range(d):
        for p in range(n):
            re_row, im_row = [], []
            for q in range(n):
                x = J[k][p][q]
                re_row += [x.re, -x.im]
                im_row += [x.im, x.re]
            rows += [re_row, im_row]
    rk = linalg.rank(linalg.from_rows(rows, 2 * n))
    kernel_dim = n - rk // 2
    vecs = [[c for row in J[k] for x in row for c in (x.re, x.im)] for k in range(d)]
    independent = linalg.rank(linalg.from_rows(vecs, 2 * n * n)) == d
    problems = []
    if not herm:
        problems.append("matrices are not Hermitian")
    if kernel_dim:
        problems.append(f"nondegeneracy: common kernel of the J_k has dimension {kernel_dim}")
    if not independent:
        problems.append("full rank: the J_k are linearly dependent over the reals")
    ok = not problems
    return FamilyReport(herm, kernel_dim, independent, ok, "ok" if ok else "; ".join(problems))


def require_valid(family: HermitianFamily) -> FamilyReport:
    rep = validate_family(family)
    if not rep.ok:
        cond = ("hermitian" if not rep.hermitian else
                "nondegenerate" if rep.kernel_dim else "independent")
        raise FamilyError(rep.message, cond)
    return rep


def _check_family(series: _Series, family: HermitianFamily):
    if (series.n, series.d) != (family.n, family.d):
        raise SeriesError("series dimensions do not match the family")


def eval_Q(a: BigradedSeries, b: BigradedSeries, family: HermitianFamily) -> BigradedSeries:
    """``Q(a, b)`` with component ``k`` equal to ``b^T J_k a``.

    ``b`` sits in the conjugated slot, so ``Q(z, zbar)`` is
    ``eval_Q(z, zbar)``.
    """
    n, d = family.n, family.d
    if a.s != n or b.s != n:
        raise SeriesError("eval_Q needs C^n-valued arguments")
    _check_family(a, family)
    _check_family(b, family)
    cap = min(a.cap, b.cap)
    acomp = [a.component_series(q) for q in range(n)]
    bcomp = [b.component_series(p) for p in range(n)]
    prods = {}
    out = [BigradedSeries(n, d, 1, cap) for _ in range(d)]
    for k in range(d):
        acc = BigradedSeries(n, d, 1, cap)
        for p in range(n):
            for q in range(n):
                c = family.J[k][p][q]
                if not c:
                    continue
                pr = prods.get((p, q))
                if pr is None:
                    pr = bcomp[p] * acomp[q]
                    prods[(p, q)] = pr
                acc = acc + pr.scale(c)
        out[k] = acc
    return BigradedSeries.from_components(n, d, [o.component(0) for o in out], cap)


def _as_bigraded(f) -> BigradedSeries:
    if isinstance(f, HoloSeries):
        return f.to_bigraded()
    if isinstance(f, BigradedSeries):
        return f
    raise SeriesError("expected a series")


def K_apply(f, family: HermitianFamily, conjugated: bool = False) -> BigradedSeries:
    """``Q(f, zbar)``, or ``Q(z, fbar)`` when ``conjugated``.

    ``f`` is a C^n-valued holomorphic series in ``(z, w)`` (``w`` read as
    ``u``) or a zbar-free bigraded series.
    """
    F = _as_bigraded(f)
    if F.s != family.n:
        raise SeriesError("K needs a C^n-valued argument")
    if any(any(k[F.n:2 * F.n]) for k in F.terms):
        raise SeriesError("K needs a series free of zbar")
    cap = F.cap + 1
    F = F.with_cap(cap)
    if conjugated:
        return eval_Q(_zvec(F.n, F.d, cap), F.conjugate(), family)
    return eval_Q(F, _zbarvec(F.n, F.d, cap), family)


def Kbar_apply(phi: BigradedSeries, family: HermitianFamily) -> BigradedSeries:
    """Complex-linear ``phi(zbar, u) -> Q(z, phi)`` for z-free ``phi``."""
    if any(any(k[:phi.n]) for k in phi.terms):
        raise SeriesError("Kbar needs a series free of z")
    cap = phi.cap + 1
    return eval_Q(_zvec(phi.n, phi.d, cap), phi.with_cap(cap), family)


def Kstar_apply(P: BigradedSeries, family: HermitianFamily, conjugated: bool = False) -> BigradedSeries:
    """``(1/(m+1)) sum_k J_k d_zbar P_k`` on the part of z-degree ``m``.

    Every term of ``P`` must be linear in ``zbar``.  The result is a
    C^n-valued series free of ``zbar``.  With ``conjugated`` the roles of
    ``z`` and ``zbar`` are swapped: ``Kbar* P = conj(K* conj P)``.
    """
    if conjugated:
        return Kstar_apply(P.conjugate(), family).conjugate()
    n, d = family.n, family.d
    _check_family(P, family)
    if P.s != d:
        raise SeriesError("K* needs a C^d-valued argument")
    acc = {}
    for key, v in P.terms.items():
        beta = key[n:2 * n]
        if sum(beta) != 1:
            raise SeriesError("K* needs a series linear in zbar")
        p = beta.index(1)
        m = sum(key[:n])
        nk = key[:n] + (0,) * n + key[2 * n:]
        slot = acc.setdefault(nk, [ZERO] * n)
        scale = GaussRat(mpq(1, m + 1))
        for k in range(d):
            c = v[k]
            if not c:
                continue
            ck = c * scale
            for q in range(n):
                jq = family.J[k][q][p]
                if jq:
                    slot[q] = slot[q] + jq * ck
    return BigradedSeries(n, d, n, P.cap, {k: tuple(v) for k, v in acc.items()})


def delta_apply(phi: BigradedSeries, family: HermitianFamily) -> BigradedSeries:
    """``sum_j (d phi / d u_j) Q_j``: bidegree (+1, +1), quasidegree kept."""
    _check_family(phi, family)
    Q = family.Q(phi.cap)
    out = BigradedSeries(phi.n, phi.d, phi.s, phi.cap)
    for j in range(phi.d):
        dj = phi.du(j)
        if dj:
            out = out + dj * Q.component_series(j)
    return out


def _qstar(phi: BigradedSeries, M) -> BigradedSeries:
    """``sum_{p,q} conj(M_pq) d_zbar_p d_z_q phi``."""
    n = phi.n
    out = BigradedSeries(phi.n, phi.d, phi.s, phi.cap)
    for q in range(n):
        dq = phi.dz(q)
        if not dq:
            continue
        for p in range(n):
            c = M[p][q]
            if c:
                out = out + dq.dzbar(p).scale(c.conj())
    return out


def deltastar_apply(phi: BigradedSeries, family: HermitianFamily) -> BigradedSeries:
    """``sum_j u_j Q_j^*(d_z, d_zbar) phi``: bidegree (-1, -1)."""
    _check_family(phi, family)
    n, d = phi.n, phi.d
    out = BigradedSeries(n, d, phi.s, phi.cap)
    for j in range(d):
        t = _qstar(phi, family.J[j])
        if t:
            out = out + t.mul_monomial((0,) * (2 * n) + tuple(1 if i == j else 0 for i in range(d)))
    return out


def cm_trace(phi: BigradedSeries, family: HermitianFamily, power: int = 1) -> BigradedSeries:
    """``T^power phi`` with ``T = sum conj(J_pq) d_zbar_p d_z_q`` (d = 1)."""
    if family.d != 1:
        raise SeriesError("the trace operator is defined for d = 1 only")
    _check_family(phi, family)
    out = phi
    for _ in range(power):
        out = _qstar(out, family.J[0])
    return out


def K_block(family: HermitianFamily, m: int, wdeg: int = 0):
    """Exact block of ``K`` from ``H_m`` (C^n-valued) to ``R_{m,1}`` (C^d-valued)."""
    n, d = family.n, family.d
    src = fischer.GradedPiece.holo(n, d, n, m, wdeg)
    dst = fischer.GradedPiece.bigraded(n, d, d, m, 1, wdeg)
    return fischer.assemble_block("K", src, dst, family)


def sigma_min_K(family: HermitianFamily, m: int):
    """Smallest singular value of ``K_m`` for normalized Fischer norms.

    Returns ``(sigma_min, sqrt(m + 1) * sigma_min)`` in double precision.
    """
    require_valid(family)
    block = K_block(family, m)
    A = np.array([[float(x) for x in (block.real[i, j] for j in range(block.real.ncols()))]
                  for i in range(block.real.nrows())], dtype=float)
    wd = np.sqrt(np.array([float(w) for w in block.domain.weights(True)]))
    wc = np.sqrt(np.array([float(w) for w in block.codomain.weights(True)]))
    B = (wc[:, None] * A) / wd[None, :]
    sv = np.linalg.svd(B, compute_uv=False)
    if B.shape[0] < B.shape[1]:
        sig = 0.0
    else:
        sig = float(sv.min())
    return sig, float(np.sqrt(m + 1) * sig)


fischer.register_operator("K", lambda fam: (lambda f: K_apply(f, fam)))
fischer.register_operator("Kbar", lambda fam: (lambda f: Kbar_apply(f, fam)))
fischer.register_operator("Kstar", lambda fam: (lambda P: Kstar_apply(P, fam)))
fischer.register_operator("Kbarstar", lambda fam: (lambda P: Kstar_apply(P, fam, True)))
fischer.register_operator("Delta", lambda fam: (lambda f: delta_apply(f, fam)))
fischer.register_operator("Deltastar", lambda fam: (lambda f: deltastar_apply(f, fam)))
fischer.register_operator("CM-trace", lambda fam: (lambda f: cm_trace(f, fam)))
