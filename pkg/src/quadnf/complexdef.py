"""The complex defining equation ``w = theta(z, zbar, wbar)``.

Series here live in the bigraded layout with ``chi`` in the ``zbar`` slot
and ``tau`` in the ``u`` slot.  ``theta = tau + 2iQ(z, chi) + S`` and the
reality relation reads ``tau = theta(z, chi, thetabar(chi, z, tau))``.

A prime on ``S_{j,k}`` denotes ``D_tau`` contracted with the d-vector that
follows it: ``S' . X = sum_j dS/dtau_j X_j``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .coeffs import GaussRat, I
from .gseries import BigradedSeries, compose
from .conjugacy import ManifoldSpec

__all__ = [
    "ComplexDefining",
    "real_to_complex",
    "reality_check",
    "phi_from_S",
    "is_normal_coordinates",
    "prime",
    "prime2",
]

TWO_I = GaussRat(0, 2)
INV_2I = GaussRat(0, -1) / 2
INV_4I = GaussRat(0, -1) / 4
INV_8I = GaussRat(0, -1) / 8
INV_16I = GaussRat(0, -1) / 16


@dataclass(frozen=True)
class ComplexDefining:
    """``theta = tau + 2iQ + S`` for a quadric family."""

    family: object
    theta: BigradedSeries

    @property
    def cap(self):
        return self.theta.cap

    @property
    def S(self) -> BigradedSeries:
        fam = self.family
        n, d, cap = fam.n, fam.d, self.cap
        tau = BigradedSeries.from_components(
            n, d, [BigradedSeries.u(n, d, j, cap).component(0) for j in range(d)], cap)
        return self.theta - tau - fam.Q(cap).scale(TWO_I)

    def S_jk(self, j, k) -> BigradedSeries:
        return self.S.extract_pq(j, k)

    def thetabar(self) -> BigradedSeries:
        """``thetabar(chi, z, tau)`` as a series in ``(z, chi, tau)``."""
        return self.theta.conjugate()

    def dumps(self):
        return self.theta.dumps()


def _vars(n, d, cap):
    z = [BigradedSeries.z(n, d, i, cap) for i in range(n)]
    chi = [BigradedSeries.zbar(n, d, i, cap) for i in range(n)]
    tau = [BigradedSeries.u(n, d, j, cap) for j in range(d)]
    return z, chi, tau


def real_to_complex(spec: ManifoldSpec) -> ComplexDefining:
    """Solve ``S = 2i Phi~(z, chi, tau + iQ + S/2)`` degree by degree."""
    fam = spec.family
    n, d, cap = fam.n, fam.d, spec.cap
    z, chi, tau = _vars(n, d, cap)
    Q = fam.Q(cap)
    phi = spec.perturbation
    S = BigradedSeries(n, d, d, cap)
    if phi.terms:
        base = Q.scale(I)
        for _ in range(cap):
            arg = base + S.scale(GaussRat(1, 0) / 2)
            subs = z + chi + [tau[j] + arg.component_series(j) for j in range(d)]
            new = compose(phi, subs, cap).scale(TWO_I)
            if new == S:
                break
            S = new
    theta = BigradedSeries.from_components(n, d, [t.component(0) for t in tau], cap)
    theta = theta + Q.scale(TWO_I) + S
    return ComplexDefining(fam, theta)


def prime(S: BigradedSeries, X: BigradedSeries) -> BigradedSeries:
    """``S' . X = sum_j D_{u_j} S * X_j`` for a d-vector ``X``."""
    out = BigradedSeries(S.n, S.d, S.s, min(S.cap, X.cap))
    for j in range(S.d):
        dj = S.du(j)
        xj = X.component_series(j)
        if dj and xj:
            out = out + dj * xj
    return out


def prime2(S: BigradedSeries, X: BigradedSeries, Y: BigradedSeries) -> BigradedSeries:
    """``S''(X, Y) = sum_{j,k} D_{u_j} D_{u_k} S * X_j * Y_k``."""
    out = BigradedSeries(S.n, S.d, S.s, min(S.cap, X.cap, Y.cap))
    for j in range(S.d):
        xj = X.component_series(j)
        if not xj:
            continue
        for k in range(S.d):
            yk = Y.component_series(k)
            djk = S.du(j).du(k)
            if djk and yk:
                out = out + djk * (xj * yk)
    return out


def reality_check(cd: ComplexDefining, named=True):
    """Residual ``tau - theta(z, chi, thetabar(chi, z, tau))``.

    With ``named`` the return value is ``(residual, relations)`` where
    ``relations`` maps a label to the low-bidegree consequences of the
    reality relation that hold in normal coordinates.
    """
    fam = cd.family
    n, d, cap = fam.n, fam.d, cd.cap
    z, chi, tau = _vars(n, d, cap)
    tb = cd.thetabar()
    subs = z + chi + [tb.component_series(j) for j in range(d)]
    tvec = BigradedSeries.from_components(n, d, [t.component(0) for t in tau], cap)
    residual = tvec - compose(cd.theta, subs, cap)
    if not named:
        return residual
    return residual, reality_relations(cd)


def reality_relations(cd: ComplexDefining):
    fam = cd.family
    cap = cd.cap
    S = cd.S
    Sb = S.conjugate()
    Q2 = fam.Q(cap).scale(TWO_I)
    s = S.extract_pq
    sb = Sb.extract_pq
    rel = {}
    for l in range(1, cap + 1):
        rel[f"S[1,{l}]"] = s(1, l) + sb(1, l)
        if l > 1:
            rel[f"S[{l},1]"] = s(l, 1) + sb(l, 1)
    rel["S[2,2]"] = s(2, 2) - prime(s(1, 1), Q2 - sb(1, 1)) + sb(2, 2)
    rel["S[2,3]"] = (s(2, 3) - prime(s(1, 2), Q2 - sb(1, 1))
                     + prime(s(1, 1), sb(1, 2)) + sb(2, 3))
    rel["S[3,2]"] = (s(3, 2) - prime(s(2, 1), Q2 - sb(1, 1))
                     + prime(s(1, 1), sb(2, 1)) + sb(3, 2))
    return rel


def is_normal_coordinates(cd: ComplexDefining) -> bool:
    """``theta(z, 0, tau) = theta(0, chi, tau) = tau``."""
    n = cd.family.n
    return not any(not any(k[:n]) or not any(k[n:2 * n]) for k in cd.S.terms)


def phi_from_S(cd: ComplexDefining, alt_sign=False) -> BigradedSeries:
    """``Phi_{p,q}`` for ``1 <= p, q <= 3`` from the components of ``S``.

    Valid in normal coordinates (then every ``Phi_{p,0}``, ``Phi_{0,q}``
    vanishes).  ``alt_sign`` flips the sign of the ``S'11(S'11 Y)`` term in
    ``Phi_{3,3}``; that variant does not invert :func:`real_to_complex`
    and is kept only so the discrepancy can be exhibited.
    """
    fam = cd.family
    cap = cd.cap
    S = cd.S
    s = S.extract_pq
    Y = fam.Q(cap).scale(TWO_I) + s(1, 1)
    out = BigradedSeries(fam.n, fam.d, fam.d, cap)
    for l in (1, 2, 3):
        out = out + s(1, l).scale(INV_2I)
        if l > 1:
            out = out + s(l, 1).scale(INV_2I)
    out = out + s(2, 2).scale(INV_2I) - prime(s(1, 1), Y).scale(INV_4I)
    out = out + (s(2, 3).scale(INV_2I) - prime(s(1, 1), s(1, 2)).scale(INV_4I)
                 - prime(s(1, 2), Y).scale(INV_4I))
    out = out + (s(3, 2).scale(INV_2I) - prime(s(1, 1), s(2, 1)).scale(INV_4I)
                 - prime(s(2, 1), Y).scale(INV_4I))
    t = prime(s(1, 1), prime(s(1, 1), Y)).scale(INV_8I)
    p33 = (s(3, 3).scale(INV_2I) - prime(s(2, 2), Y).scale(INV_4I)
           - prime(s(1, 1), s(2, 2)).scale(INV_4I)
           + (-t if alt_sign else t)
           + prime2(s(1, 1), Y, Y).scale(INV_16I)
           - prime(s(1, 2), s(2, 1)).scale(INV_4I)
           - prime(s(2, 1), s(1, 2)).scale(INV_4I))
    out = out + p33
    return out
