"""The conjugacy equation between two perturbed quadrics.

A manifold is ``v = Q(z, zbar) + Phi(z, zbar, u)`` with ``Phi`` real-valued
and of quasiorder at least 3.  A map ``(z, w) -> (f, g)`` with
``f = z + f_nl`` and ``g = w + g_nl`` carries ``v = Q + Phi`` into
``v' = Q + Phi~`` exactly when the residual

    (1/2i)(G - conj G) - Q(F, conj F) - Phi~(F, conj F, Re G)

vanishes, where ``F = f(z, u + i v)``, ``G = g(z, u + i v)`` and
``v = Q + Phi``.  In quasidegree ``k`` the residual is
``A_k + L(f_{k-1}, g_k) + Phi_k`` where ``A_k`` only depends on lower
order data and ``L`` is the linear operator of the model quadric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .coeffs import ZERO, GaussRat, format_rat
from .gseries import BigradedSeries, HoloSeries, SeriesError, compose, substitute_w
from .quadric import FamilyError, HermitianFamily, eval_Q, require_valid

__all__ = [
    "SpecError",
    "ManifoldSpec",
    "Transform",
    "linear_operator",
    "lhs_apply",
    "conjugacy_residual",
    "verify_conjugacy",
    "rhs_degree_k",
    "pullback",
]

SPEC_VERSION = "quadnf-spec/1"
HALF = GaussRat(1, 0) / 2
INV_2I = GaussRat(0, -1) / 2  # 1/(2i)


class SpecError(ValueError):
    """A manifold spec violates its invariants."""

    def __init__(self, message, condition=""):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class ManifoldSpec:
    """``v = Q(z, zbar) + Phi~(z, zbar, u)`` truncated at quasidegree ``cap``."""

    family: HermitianFamily
    perturbation: BigradedSeries
    cap: int

    @property
    def n(self):
        return self.family.n

    @property
    def d(self):
        return self.family.d

    @classmethod
    def build(cls, family, perturbation=None, cap=8, check=True):
        if perturbation is None:
            perturbation = BigradedSeries(family.n, family.d, family.d, cap)
        spec = cls(family, perturbation.with_cap(cap) if perturbation.cap != cap else perturbation, cap)
        if check:
            spec.validate()
        return spec

    def validate(self):
        try:
            require_valid(self.family)
        except FamilyError as exc:
            raise SpecError(str(exc), exc.condition) from None
        p = self.perturbation
        if (p.n, p.d, p.s) != (self.n, self.d, self.d):
            raise SpecError("perturbation must be a C^d-valued series in (z, zbar, u)", "shape")
        if self.cap < 3:
            raise SpecError("cap must be at least 3", "cap")
        if not p.is_real_valued():
            raise SpecError("perturbation is not real-valued", "reality")
        if p.terms and p.min_wt() < 3:
            raise SpecError("perturbation has terms of quasidegree < 3", "quasiorder")
        if p.terms and p.max_wt() > self.cap:
            raise SpecError("perturbation has terms above the cap", "cap")
        return self

    def with_perturbation(self, phi):
        return ManifoldSpec(self.family, phi.with_cap(self.cap), self.cap)

    def with_cap(self, cap):
        return ManifoldSpec(self.family, self.perturbation.with_cap(cap), cap)

    def Q(self, cap=None):
        return self.family.Q(self.cap if cap is None else cap)

    # -- JSON spec files -------------------------------------------------------

    def to_json(self):
        terms = []
        n = self.n
        for key, v in self.perturbation.sorted_items():
            for j, c in enumerate(v):
                if c:
                    terms.append({"j": j, "alpha": list(key[:n]), "beta": list(key[n:2 * n]),
                                  "gamma": list(key[2 * n:]), "re": format_rat(c.re),
                                  "im": format_rat(c.im)})
        return {"version": SPEC_VERSION, "n": self.n, "d": self.d, "cap": self.cap,
                "J": self.family.to_json(), "perturbation": terms}

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, data, cap=None, check=True):
        if not isinstance(data, dict):
            raise SpecError("spec must be a JSON object", "shape")
        try:
            n = int(data["n"])
            d = int(data["d"])
            family = HermitianFamily.from_json(data["J"])
        except KeyError as exc:
            raise SpecError(f"missing field {exc}", "shape") from None
        if (family.n, family.d) != (n, d):
            raise SpecError("J matrices do not match n, d", "shape")
        if cap is None:
            cap = int(data.get("cap", 8))
        terms = {}
        for t in data.get("perturbation", []):
            alpha, beta, gamma = tuple(t["alpha"]), tuple(t["beta"]), tuple(t["gamma"])
            if len(alpha) != n or len(beta) != n or len(gamma) != d:
                raise SpecError("exponent vector of the wrong length", "shape")
            if min(alpha + beta + gamma, default=0) < 0:
                raise SpecError("negative exponent", "shape")
            j = int(t.get("j", 0))
            if not 0 <= j < d:
                raise SpecError("component index out of range", "shape")
            key = alpha + beta + gamma
            c = GaussRat.parse(str(t.get("re", "0")), str(t.get("im", "0")))
            vec = list(terms.get(key, (ZERO,) * d))
            vec[j] = vec[j] + c
            terms[key] = tuple(vec)
        wt = max([sum(k) + sum(k[2 * n:]) for k in terms] or [0])
        if wt > cap:
            raise SpecError(f"perturbation has a term of quasidegree {wt} above cap {cap}", "cap")
        phi = BigradedSeries(n, d, d, cap, terms)
        spec = cls(family, phi, cap)
        if check:
            spec.validate()
        return spec

    @classmethod
    def loads(cls, text, cap=None, check=True):
        return cls.from_json(json.loads(text), cap, check)


class Transform:
    """``(z, w) -> (f, g)`` with ``f = z + f_nl`` and ``g = w + g_nl``."""

    __slots__ = ("f", "g")

    def __init__(self, f: HoloSeries, g: HoloSeries):
        if f.s != f.n or g.s != g.d or (f.n, f.d) != (g.n, g.d):
            raise SeriesError("f must be C^n-valued and g C^d-valued")
        self.f = f
        self.g = g

    @property
    def n(self):
        return self.f.n

    @property
    def d(self):
        return self.f.d

    @property
    def cap(self):
        return min(self.f.cap, self.g.cap)

    @classmethod
    def identity(cls, n, d, cap=8):
        return cls(HoloSeries.identity_z(n, d, cap), HoloSeries.identity_w(n, d, cap))

    @classmethod
    def from_nonlinear(cls, f_nl: HoloSeries, g_nl: HoloSeries, cap=None):
        cap = min(f_nl.cap, g_nl.cap) if cap is None else cap
        n, d = f_nl.n, f_nl.d
        return cls(HoloSeries.identity_z(n, d, cap) + f_nl.with_cap(cap),
                   HoloSeries.identity_w(n, d, cap) + g_nl.with_cap(cap))

    @property
    def f_nl(self):
        return self.f - HoloSeries.identity_z(self.n, self.d, self.f.cap)

    @property
    def g_nl(self):
        return self.g - HoloSeries.identity_w(self.n, self.d, self.g.cap)

    def validate(self):
        fn, gn = self.f_nl, self.g_nl
        if fn.terms and fn.min_wt() < 2:
            raise SeriesError("f must be z + terms of quasidegree >= 2")
        if gn.terms and gn.min_wt() < 3:
            raise SeriesError("g must be w + terms of quasidegree >= 3")
        return self

    def is_identity(self):
        return not self.f_nl and not self.g_nl

    def with_cap(self, cap):
        return Transform(self.f.with_cap(cap), self.g.with_cap(cap))

    def __eq__(self, other):
        return isinstance(other, Transform) and self.f == other.f and self.g == other.g

    def __repr__(self):
        return f"Transform(n={self.n}, d={self.d}, cap={self.cap})"

    def dumps(self):
        return "# transform f\n" + self.f.dumps() + "# transform g\n" + self.g.dumps()

    @classmethod
    def loads(cls, text):
        parts = text.split("# transform g\n")
        if len(parts) != 2 or not parts[0].startswith("# transform f\n"):
            raise SeriesError("malformed transform text")
        f = HoloSeries.loads(parts[0][len("# transform f\n"):])
        g = HoloSeries.loads(parts[1])
        return cls(f, g)


# ---------------------------------------------------------------------------
# the conjugacy residual


def _shift(h: HoloSeries, v: BigradedSeries) -> BigradedSeries:
    """``h(z, u + i v)``; ``v = 0`` just renames ``w`` to ``u``."""
    if not v.terms:
        return h.to_bigraded().with_cap(min(h.cap, v.cap))
    return substitute_w(h, v, 1)


def linear_operator(f_nl: HoloSeries, g_nl: HoloSeries, family: HermitianFamily, cap: int) -> BigradedSeries:
    """``L(f, g) = (1/2i)(g(z,u+iQ) - conj) - Q(f(z,u+iQ), zbar) - Q(z, conj f)``."""
    n, d = family.n, family.d
    Q = family.Q(cap)
    out = BigradedSeries(n, d, d, cap)
    if g_nl.terms:
        G = _shift(g_nl.with_cap(cap), Q)
        out = out + (G - G.conjugate()).scale(INV_2I)
    if f_nl.terms:
        F = _shift(f_nl.with_cap(cap), Q)
        Z = HoloSeries.identity_z(n, d, cap).to_bigraded()
        KF = eval_Q(F, Z.conjugate(), family)
        out = out - KF - KF.conjugate()
    return out


def lhs_apply(t: Transform, k: int, spec: ManifoldSpec) -> BigradedSeries:
    """Quasidegree-``k`` part of ``L(f_{k-1}, g_k)`` for the transform ``t``."""
    if k < 3:
        raise SeriesError("lhs_apply needs k >= 3")
    f1 = t.f_nl.extract_wt(k - 1)
    g1 = t.g_nl.extract_wt(k)
    return linear_operator(f1, g1, spec.family, k).extract_wt(k)


def conjugacy_residual(spec: ManifoldSpec, t: Transform, phi: BigradedSeries, cap=None) -> BigradedSeries:
    """The full residual series, truncated at ``cap`` (default: spec cap)."""
    fam = spec.family
    n, d = fam.n, fam.d
    cap = spec.cap if cap is None else cap
    Q = fam.Q(cap)
    v = Q + phi.with_cap(cap)
    F = _shift(t.f.with_cap(cap), v)
    G = _shift(t.g.with_cap(cap), v)
    Fb = F.conjugate()
    res = (G - G.conjugate()).scale(INV_2I) - eval_Q(F, Fb, fam)
    pt = spec.perturbation.with_cap(cap)
    if pt.terms:
        U = G.real_part()
        subs = [F.component_series(i) for i in range(n)]
        subs += [Fb.component_series(i) for i in range(n)]
        subs += [U.component_series(j) for j in range(d)]
        res = res - compose(pt, subs, cap)
    return res


def verify_conjugacy(spec: ManifoldSpec, t: Transform, phi: BigradedSeries) -> BigradedSeries:
    """Residual of the conjugacy equation; zero iff ``t`` maps
    ``v = Q + phi`` into ``v' = Q + Phi~`` through the cap."""
    if not phi.is_real_valued():
        raise SeriesError("phi must be real-valued")
    if phi.terms and phi.min_wt() < 3:
        raise SeriesError("phi must have quasiorder >= 3")
    return conjugacy_residual(spec, t, phi)


def truncate_unknowns(t: Transform, phi: BigradedSeries, k: int):
    """Drop every datum that is an unknown in quasidegree ``k``."""
    fn = t.f_nl.below_wt(k - 1)
    gn = t.g_nl.below_wt(k)
    return Transform.from_nonlinear(fn, gn, k), phi.below_wt(k).with_cap(k)


def rhs_degree_k(spec: ManifoldSpec, t_partial: Transform, phi_partial: BigradedSeries, k: int) -> BigradedSeries:
    """``{T}_k``: the right-hand side with ``L(f_{k-1}, g_k) = {T}_k - Phi_k``.

    Only ``f`` below quasidegree ``k - 1``, ``g`` below ``k`` and ``Phi``
    below ``k`` are read; anything else in the arguments is ignored.
    """
    if k < 3:
        raise SeriesError("rhs_degree_k needs k >= 3")
    if k > spec.cap:
        raise SeriesError("k exceeds the spec cap")
    if phi_partial.terms and phi_partial.min_wt() < 3:
        raise SeriesError("phi_partial must have quasiorder >= 3")
    if (t_partial.n, t_partial.d) != (spec.n, spec.d):
        raise SeriesError("transform dimensions do not match the spec")
    t0, p0 = truncate_unknowns(t_partial, phi_partial, k)
    res = conjugacy_residual(spec.with_cap(k), t0, p0, k)
    return -res.extract_wt(k).with_cap(spec.cap)


def pullback(spec: ManifoldSpec, t: Transform) -> ManifoldSpec:
    """The manifold ``v = Q + Phi`` that ``t`` maps into ``spec``.

    ``Phi`` is solved degree by degree from the conjugacy equation: its
    degree-``k`` part enters the residual with coefficient one.
    """
    t.validate()
    phi = BigradedSeries(spec.n, spec.d, spec.d, spec.cap)
    for k in range(3, spec.cap + 1):
        res = conjugacy_residual(spec.with_cap(k), t.with_cap(k), phi.with_cap(k), k)
        low = res.below_wt(k)
        if low:
            raise SeriesError("pullback lost exactness below the current degree")
        phi = phi - res.extract_wt(k).with_cap(spec.cap)
    return ManifoldSpec(spec.family, phi, spec.cap)


def compose_transforms(outer: Transform, inner: Transform, cap=None) -> Transform:
    """``outer o inner`` as maps ``(z, w) -> ...``."""
    cap = min(outer.cap, inner.cap) if cap is None else cap
    n, d = outer.n, outer.d
    subs = [inner.f.component_series(i).with_cap(cap) for i in range(n)]
    subs += [inner.g.component_series(j).with_cap(cap) for j in range(d)]
    return Transform(compose(outer.f, subs, cap), compose(outer.g, subs, cap))


def random_transform(rng, n, d, cap, density=0.3, max_weight=None, height=3):
    """A random tangent-to-identity polynomial map (for tests and probes)."""
    from .gseries import multi_indices
    top = cap if max_weight is None else max_weight
    fterms, gterms = {}, {}
    for wt in range(2, top + 1):
        for m in range(wt + 1):
            if (wt - m) % 2:
                continue
            for a in multi_indices(n, m):
                for dl in multi_indices(d, (wt - m) // 2):
                    key = a + dl
                    for q in range(n):
                        if rng.random() < density:
                            vec = list(fterms.get(key, (ZERO,) * n))
                            vec[q] = GaussRat(rng.randint(-height, height), rng.randint(-height, height))
                            fterms[key] = tuple(vec)
                    if wt >= 3:
                        for j in range(d):
                            if rng.random() < density:
                                vec = list(gterms.get(key, (ZERO,) * d))
                                vec[j] = GaussRat(rng.randint(-height, height), rng.randint(-height, height))
                                gterms[key] = tuple(vec)
    return Transform.from_nonlinear(HoloSeries(n, d, n, cap, fterms), HoloSeries(n, d, d, cap, gterms), cap)


def random_perturbation(rng, n, d, cap, lo=3, hi=None, density=0.2, height=3, normal=False):
    """A random real-valued perturbation with quasidegrees in ``[lo, hi]``."""
    from .gseries import multi_indices
    hi = cap if hi is None else hi
    terms = {}
    for wt in range(lo, hi + 1):
        for m in range(wt + 1):
            if (wt - m) % 2:
                continue
            for p in range(m + 1):
                q = m - p
                if p > q:
                    continue
                if normal and (p == 0 or q == 0):
                    continue
                for a in multi_indices(n, p):
                    for b in multi_indices(n, q):
                        for c in multi_indices(d, (wt - m) // 2):
                            if p == q and a > b:
                                continue
                            for j in range(d):
                                if rng.random() >= density:
                                    continue
                                re = rng.randint(-height, height)
                                im = rng.randint(-height, height) if a != b else 0
                                if not re and not im:
                                    continue
                                x = GaussRat(re, im)
                                k1 = a + b + c
                                k2 = b + a + c
                                v1 = list(terms.get(k1, (ZERO,) * d))
                                v1[j] = x
                                terms[k1] = tuple(v1)
                                v2 = list(terms.get(k2, (ZERO,) * d))
                                v2[j] = x.conj()
                                terms[k2] = tuple(v2)
    return BigradedSeries(n, d, d, cap, terms)
