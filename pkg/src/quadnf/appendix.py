"""Low-bidegree closed forms of the expansions entering the conjugacy equation.

Three series are expanded, with ``V = Q + Phi``:

* ``E_g  = g_nl(z, u + iV) - g_nl(z, u + iQ)``
* ``E_f  = Q(f_nl(z, u + iV) - f_nl(z, u + iQ), zbar)``
* ``Qff  = Q(F, conj F)`` with ``F = f_nl(z, u + iV)``

The generic value uses series composition.  The closed form is built from
Taylor coefficients in ``u``, the components ``f_l``, ``g_l`` of fixed
z-degree and the bidegree components ``{V^m}_{a,b}``, convolved by
bidegree.  Both need ``Phi_{p,0} = Phi_{0,p} = 0``.
"""

from __future__ import annotations

from math import factorial

from .coeffs import I
from .gseries import BigradedSeries, HoloSeries, SeriesError, multi_indices, substitute_w
from .quadric import eval_Q

__all__ = ["SUPPORTED", "appendix_crosscheck", "generic_expansions", "closed_expansions", "is_supported"]

SUPPORTED = "(p,0), (p,1), (2,2), (3,3), (3,2), (3,1)"


def is_supported(pq) -> bool:
    p, q = pq
    if p < 0 or q < 0:
        return False
    return q in (0, 1) or (p, q) in {(2, 2), (3, 3), (3, 2), (3, 1)}


def _check_phi(phi: BigradedSeries):
    n = phi.n
    if any(not any(k[:n]) or not any(k[n:2 * n]) for k in phi.terms):
        raise SeriesError("phi must satisfy Phi_{p,0} = Phi_{0,p} = 0")


def _zbar_vec(n, d, cap):
    comps = [BigradedSeries.zbar(n, d, i, cap).component(0) for i in range(n)]
    return BigradedSeries.from_components(n, d, comps, cap)


def generic_expansions(spec, t, phi, pq):
    """``(E_g, E_f, Qff)`` at bidegree ``pq`` via composition."""
    fam = spec.family
    cap = spec.cap
    Q = fam.Q(cap)
    V = Q + phi.with_cap(cap)
    gn = t.g_nl.with_cap(cap)
    fn = t.f_nl.with_cap(cap)
    Eg = substitute_w(gn, V) - substitute_w(gn, Q)
    FV = substitute_w(fn, V)
    Ef = eval_Q(FV - substitute_w(fn, Q), _zbar_vec(fam.n, fam.d, cap), fam)
    Qff = eval_Q(FV, FV.conjugate(), fam)
    p, q = pq
    return Eg.extract_pq(p, q), Ef.extract_pq(p, q), Qff.extract_pq(p, q)


class _Pieces:
    """Bidegree components of ``V^m`` and ``Q^m`` for monomials ``m`` in ``u``."""

    def __init__(self, V: BigradedSeries, Q: BigradedSeries):
        self.V = [V.component_series(j) for j in range(V.s)]
        self.Q = [Q.component_series(j) for j in range(Q.s)]
        self.n, self.d, self.cap = V.n, V.d, V.cap
        self._cache = {}

    def power(self, which, m):
        key = (which, m)
        if key not in self._cache:
            base = self.V if which == "V" else self.Q
            out = BigradedSeries.const(self.n, self.d, cap=self.cap)
            for j, e in enumerate(m):
                for _ in range(e):
                    out = out * base[j]
            self._cache[key] = out
        return self._cache[key]

    def comp(self, which, m, a, b):
        if a < 0 or b < 0:
            return None
        return self.power(which, m).extract_pq(a, b)


def _taylor_component(h_l, pieces, p, q, diff, kmin):
    """``{sum_{k>=kmin} i^k/m! D^m h . (V^m [- Q^m])}_{p,q}``.

    ``h_l`` maps a z-degree ``l`` to the bigraded component ``h_l(z, u)``.
    """
    n, d, cap = pieces.n, pieces.d, pieces.cap
    s = next(iter(h_l.values())).s if h_l else 1
    out = BigradedSeries(n, d, s, cap)
    k = kmin
    while 2 * k <= cap:
        coef_k = I ** k
        for m in multi_indices(d, k):
            mfact = 1
            for e in m:
                mfact *= factorial(e)
            coef = coef_k / mfact
            for l, hl in h_l.items():
                if l > p:
                    continue
                deriv = hl
                for j, e in enumerate(m):
                    for _ in range(e):
                        deriv = deriv.du(j)
                if not deriv:
                    continue
                vm = pieces.comp("V", m, p - l, q)
                if diff and vm is not None:
                    qm = pieces.comp("Q", m, p - l, q)
                    vm = vm - qm
                if vm:
                    out = out + (deriv * vm).scale(coef)
        k += 1
    return out


def _zdeg_parts(h: HoloSeries, cap):
    hb = h.with_cap(cap).to_bigraded()
    n = h.n
    parts = {}
    for k, v in hb.terms.items():
        parts.setdefault(sum(k[:n]), {})[k] = v
    return {l: hb._like(tms) for l, tms in parts.items()}


def closed_expansions(spec, t, phi, pq):
    """``(E_g, E_f, Qff)`` at bidegree ``pq`` from bidegree convolutions."""
    fam = spec.family
    n, d, cap = fam.n, fam.d, spec.cap
    Q = fam.Q(cap)
    V = Q + phi.with_cap(cap)
    pieces = _Pieces(V, Q)
    p, q = pq
    g_l = _zdeg_parts(t.g_nl, cap)
    f_l = _zdeg_parts(t.f_nl, cap)

    Eg = _taylor_component(g_l, pieces, p, q, True, 1) if g_l else BigradedSeries(n, d, d, cap)
    if q >= 1 and f_l:
        X = _taylor_component(f_l, pieces, p, q - 1, True, 1)
        Ef = eval_Q(X, _zbar_vec(n, d, cap), fam)
    else:
        Ef = BigradedSeries(n, d, d, cap)

    Qff = BigradedSeries(n, d, d, cap)
    if f_l:
        F = {}

        def Fc(a, b):
            if (a, b) not in F:
                F[(a, b)] = _taylor_component(f_l, pieces, a, b, False, 0)
            return F[(a, b)]

        for a in range(p + 1):
            for b in range(q + 1):
                left = Fc(a, b)
                if not left:
                    continue
                # {conj F}_{p-a, q-b} is the conjugate of F_{q-b, p-a}
                right = Fc(q - b, p - a).conjugate()
                if right:
                    Qff = Qff + eval_Q(left, right, fam)
    return Eg.extract_pq(p, q), Ef.extract_pq(p, q), Qff.extract_pq(p, q)


def _low_closed(spec, t, phi, pq):
    """Direct closed forms for the ``(p,0)`` and ``(p,1)`` rows."""
    fam = spec.family
    n, d, cap = fam.n, fam.d, spec.cap
    p, q = pq
    f_l = _zdeg_parts(t.f_nl, cap)
    g_l = _zdeg_parts(t.g_nl, cap)
    zero = BigradedSeries(n, d, d, cap)
    fz = lambda l: f_l.get(l, BigradedSeries(n, d, n, cap))  # noqa: E731
    if q == 0:
        return zero, zero, eval_Q(fz(p), fz(0).conjugate(), fam).extract_pq(p, 0)
    V = fam.Q(cap) + phi.with_cap(cap)
    V1 = {c: V.extract_pq(c, 1) for c in range(1, p + 1)}

    def contract(h, X):
        out = BigradedSeries(n, d, h.s, cap)
        for j in range(d):
            dj = h.du(j)
            xj = X.component_series(j)
            if dj and xj:
                out = out + dj * xj
        return out

    Eg = zero
    for l in range(p):
        if l in g_l:
            Eg = Eg + contract(g_l[l], phi.extract_pq(p - l, 1)).scale(I)
    Qff = eval_Q(fz(p), fz(1).conjugate(), fam)
    f0b = fz(0).conjugate()
    for l in range(p):
        Qff = Qff + eval_Q(contract(fz(l), V1[p - l]).scale(I), f0b, fam)
    for c in range(1, p + 1):
        Qff = Qff + eval_Q(fz(p - c), contract(f0b, V1[c]).scale(-I), fam)
    return Eg.extract_pq(p, 1), zero, Qff.extract_pq(p, 1)


def appendix_crosscheck(spec, t, phi, pq):
    """Return ``(generic, closed)``, each the stack ``(E_g, E_f, Qff)`` at ``pq``.

    The stacked series have ``3d`` value components.
    """
    pq = tuple(pq)
    if len(pq) != 2 or not is_supported(pq):
        raise SeriesError(f"unsupported bidegree {pq}; supported: {SUPPORTED}")
    _check_phi(phi)
    gen = generic_expansions(spec, t, phi, pq)
    if pq[1] <= 1:
        clo = _low_closed(spec, t, phi, pq)
    else:
        clo = closed_expansions(spec, t, phi, pq)
    return gen[0].stack(gen[1]).stack(gen[2]), clo[0].stack(clo[1]).stack(clo[2])
