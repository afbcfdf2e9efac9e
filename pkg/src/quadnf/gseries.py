"""Sparse truncated series with exact Gaussian-rational coefficients.

Two layouts share one implementation.  A ``BigradedSeries`` lives in the
variables ``(z, zbar, u)`` with ``z, zbar`` in C^n and ``u`` in R^d; a
``HoloSeries`` lives in ``(z, w)``.  Keys are flat exponent tuples
(``alpha + beta + gamma`` resp. ``alpha + delta``).  The quasidegree gives
weight 1 to every ``z``/``zbar`` slot and weight 2 to every ``u``/``w``
slot, so ``wt(key) = sum(key) + sum(key[-d:])``.

Values are vectors of length ``s``.  Zero coefficients are never stored
and every stored term satisfies ``wt <= cap``.  Series are treated as
immutable once built.

The same bigraded layout doubles as the ring of holomorphic series in
``(z, chi, tau)`` used for complex defining functions: composition is
purely algebraic, so renaming ``zbar -> chi`` and ``u -> tau`` is harmless.
"""

from __future__ import annotations

from math import factorial
from operator import add

from .coeffs import ONE, ZERO, GaussRat, I, format_rat, parse_rat

__all__ = [
    "SeriesError",
    "BigradedSeries",
    "HoloSeries",
    "series_arith",
    "conjugate",
    "extract_pq",
    "is_real_valued",
    "substitute_w",
    "substitute_full",
    "compose",
]


class SeriesError(ValueError):
    """Dimension mismatch, bad precondition or malformed series text."""


# ---------------------------------------------------------------------------
# scalar kernels on raw dicts {key: GaussRat}


def _wt(key, d):
    return sum(key) + sum(key[len(key) - d:])


def _mul_raw(a, b, d, cap):
    if not a or not b:
        return {}
    if len(a) > len(b):
        a, b = b, a
    bl = sorted((_wt(k, d), k, c.re, c.im) for k, c in b.items())
    acc = {}
    for ka, ca in a.items():
        wa = _wt(ka, d)
        lim = cap - wa
        if lim < 0:
            continue
        ar, ai = ca.re, ca.im
        for wb, kb, br, bi in bl:
            if wb > lim:
                break
            k = tuple(map(add, ka, kb))
            re = ar * br - ai * bi
            im = ar * bi + ai * br
            cur = acc.get(k)
            if cur is None:
                acc[k] = [re, im]
            else:
                cur[0] += re
                cur[1] += im
    return {k: GaussRat(r, i) for k, (r, i) in acc.items() if r or i}


def _axpy_raw(acc, c, b):
    """acc += c * b, in place on a dict of [re, im] lists."""
    cr, ci = c.re, c.im
    for k, v in b.items():
        re = cr * v.re - ci * v.im
        im = cr * v.im + ci * v.re
        cur = acc.get(k)
        if cur is None:
            acc[k] = [re, im]
        else:
            cur[0] += re
            cur[1] += im


def _finish(acc):
    return {k: GaussRat(r, i) for k, (r, i) in acc.items() if r or i}


def _compose_raw(a, subs, d, cap, width):
    """Substitute ``subs[i]`` for the i-th variable of every key of ``a``.

    ``subs`` are raw dicts in a common output layout with ``d`` heavy slots
    and key length ``width``.  Monomial products are memoised by building
    each exponent from its predecessor with one less factor.
    """
    one = {(0,) * width: ONE}
    memo = {}

    def prod(key):
        got = memo.get(key)
        if got is not None:
            return got
        if not any(key):
            memo[key] = one
            return one
        i = max(j for j, e in enumerate(key) if e)
        prev = key[:i] + (key[i] - 1,) + key[i + 1:]
        got = _mul_raw(prod(prev), subs[i], d, cap)
        memo[key] = got
        return got

    acc = {}
    for key in sorted(a, key=sum):
        _axpy_raw(acc, a[key], prod(key))
    return _finish(acc)


# ---------------------------------------------------------------------------
# series classes


class _Series:
    """Shared machinery; subclasses fix the key layout."""

    __slots__ = ("n", "d", "s", "cap", "terms")
    kind = ""

    def __init__(self, n, d, s=1, cap=8, terms=None):
        self.n, self.d, self.s, self.cap = int(n), int(d), int(s), int(cap)
        if self.n < 0 or self.d < 1 or self.s < 1 or self.cap < 0:
            raise SeriesError("dimensions must satisfy n >= 0, d >= 1, s >= 1, cap >= 0")
        width = self.width
        clean = {}
        for key, vec in (terms or {}).items():
            key = tuple(int(e) for e in key)
            if len(key) != width or min(key, default=0) < 0:
                raise SeriesError(f"bad exponent key {key} for {self.kind} layout")
            if _wt(key, self.d) > self.cap:
                continue
            vec = tuple(GaussRat.coerce(c) for c in vec)
            if len(vec) != self.s:
                raise SeriesError(f"coefficient vector of length {len(vec)}, expected {self.s}")
            if any(vec):
                clean[key] = vec
        self.terms = clean

    # -- layout ------------------------------------------------------------

    @property
    def width(self):
        raise NotImplementedError

    def wt(self, key):
        return _wt(key, self.d)

    def _like(self, terms, s=None, cap=None):
        return type(self)(self.n, self.d, self.s if s is None else s,
                          self.cap if cap is None else cap, terms)

    @classmethod
    def zero(cls, n, d, s=1, cap=8):
        return cls(n, d, s, cap)

    @classmethod
    def from_components(cls, n, d, comps, cap):
        s = len(comps)
        terms = {}
        for j, comp in enumerate(comps):
            for k, c in comp.items():
                vec = terms.setdefault(k, [ZERO] * s)
                vec[j] = c
        return cls(n, d, s, cap, {k: tuple(v) for k, v in terms.items()})

    def component(self, j):
        """Raw dict of the j-th value component."""
        return {k: v[j] for k, v in self.terms.items() if v[j]}

    def components(self):
        return [self.component(j) for j in range(self.s)]

    def component_series(self, j):
        return self._like({k: (c,) for k, c in self.component(j).items()}, s=1)

    # -- queries -----------------------------------------------------------

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self):
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if not isinstance(other, _Series) or type(self) is not type(other):
            return NotImplemented
        return (self.n, self.d, self.s) == (other.n, other.d, other.s) and self.terms == other.terms

    def __hash__(self):
        return hash((self.kind, self.n, self.d, self.s, frozenset(self.terms.items())))

    def min_wt(self):
        return min((self.wt(k) for k in self.terms), default=None)

    def max_wt(self):
        return max((self.wt(k) for k in self.terms), default=None)

    def coeff(self, key, j=0):
        vec = self.terms.get(tuple(key))
        return vec[j] if vec else ZERO

    def sorted_items(self):
        return sorted(self.terms.items(), key=lambda kv: self._order(kv[0]))

    # -- arithmetic ----------------------------------------------------------

    def _check_same(self, other):
        if not isinstance(other, type(self)):
            raise SeriesError(f"cannot combine {self.kind} with {type(other).__name__}")
        if (self.n, self.d) != (other.n, other.d):
            raise SeriesError(f"dimension mismatch: (n,d)=({self.n},{self.d}) vs ({other.n},{other.d})")

    def __add__(self, other):
        self._check_same(other)
        if self.s != other.s:
            raise SeriesError(f"value dimension mismatch: {self.s} vs {other.s}")
        cap = min(self.cap, other.cap)
        out = dict(self.terms)
        for k, v in other.terms.items():
            cur = out.get(k)
            out[k] = v if cur is None else tuple(map(add, cur, v))
        return self._like(out, cap=cap)

    def __neg__(self):
        return self._like({k: tuple(-c for c in v) for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = GaussRat.coerce(c)
        if not c:
            return self._like({})
        return self._like({k: tuple(c * x for x in v) for k, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, _Series):
            return self.scale(other)
        self._check_same(other)
        cap = min(self.cap, other.cap)
        if self.s == 1 and other.s == 1:
            return self._like({k: (c,) for k, c in
                               _mul_raw(self.component(0), other.component(0), self.d, cap).items()},
                              cap=cap)
        if self.s == 1 or other.s == 1:
            scal, vec = (self, other) if self.s == 1 else (other, self)
            a = scal.component(0)
            comps = [_mul_raw(a, c, self.d, cap) for c in vec.components()]
            return type(self).from_components(self.n, self.d, comps, cap)
        raise SeriesError("product needs a scalar (s=1) factor")

    def __rmul__(self, other):
        return self.scale(other)

    def truncate(self, cap):
        return self._like(self.terms, cap=min(cap, self.cap))

    def with_cap(self, cap):
        """Same terms, cap replaced (terms above the new cap are dropped)."""
        return self._like(self.terms, cap=cap)

    def extract_wt(self, k):
        return self._like({key: v for key, v in self.terms.items() if self.wt(key) == k})

    def below_wt(self, k):
        return self._like({key: v for key, v in self.terms.items() if self.wt(key) < k})

    def map_coeffs(self, fn):
        return self._like({k: tuple(fn(c) for c in v) for k, v in self.terms.items()})

    def stack(self, other):
        """Concatenate value vectors (same key layout)."""
        self._check_same(other)
        comps = self.components() + other.components()
        return type(self).from_components(self.n, self.d, comps, min(self.cap, other.cap))

    def select(self, idx):
        comps = self.components()
        return type(self).from_components(self.n, self.d, [comps[j] for j in idx], self.cap)

    # -- calculus ------------------------------------------------------------

    def diff(self, slot):
        """Partial derivative in the flat variable ``slot``."""
        out = {}
        for k, v in self.terms.items():
            e = k[slot]
            if e:
                nk = k[:slot] + (e - 1,) + k[slot + 1:]
                out[nk] = tuple(c * e for c in v)
        return self._like(out)

    def mul_monomial(self, key, c=ONE):
        c = GaussRat.coerce(c)
        return self._like({tuple(map(add, k, key)): tuple(c * x for x in v)
                           for k, v in self.terms.items()})

    # -- serialization ---------------------------------------------------------

    def _order(self, key):
        raise NotImplementedError

    def _fields(self, key):
        raise NotImplementedError

    def header(self):
        return f"# {self.kind} n={self.n} d={self.d} s={self.s} cap={self.cap}"

    def dumps(self) -> str:
        lines = [self.header()]
        for key, vec in self.sorted_items():
            parts = " | ".join(",".join(map(str, f)) for f in self._fields(key))
            for j, c in enumerate(vec):
                if c:
                    lines.append(f"{j} | {parts} | {format_rat(c.re)} | {format_rat(c.im)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise SeriesError("missing series header line")
        head = lines[0][1:].split()
        if not head or head[0] != cls.kind:
            raise SeriesError(f"expected a {cls.kind} series, got header {lines[0]!r}")
        try:
            meta = dict(item.split("=", 1) for item in head[1:])
            n, d, s, cap = (int(meta[x]) for x in ("n", "d", "s", "cap"))
        except (ValueError, KeyError):
            raise SeriesError(f"malformed header {lines[0]!r}") from None
        nfields = cls._nfields()
        terms = {}
        for lineno, ln in enumerate(lines[1:], start=2):
            cells = [c.strip() for c in ln.split("|")]
            if len(cells) != nfields + 3:
                raise SeriesError(f"line {lineno}: expected {nfields + 3} fields")
            try:
                j = int(cells[0])
                key = tuple(int(e) for cell in cells[1:1 + nfields] for e in cell.split(",") if e != "")
            except ValueError:
                raise SeriesError(f"line {lineno}: bad integer field") from None
            if not 0 <= j < s:
                raise SeriesError(f"line {lineno}: component {j} out of range")
            c = GaussRat(parse_rat(cells[-2]), parse_rat(cells[-1]))
            vec = terms.setdefault(key, [ZERO] * s)
            if vec[j]:
                raise SeriesError(f"line {lineno}: duplicate term")
            vec[j] = c
        return cls(n, d, s, cap, {k: tuple(v) for k, v in terms.items()})

    def __repr__(self):
        return f"<{type(self).__name__} n={self.n} d={self.d} s={self.s} cap={self.cap} terms={len(self.terms)}>"


class BigradedSeries(_Series):
    """Series in ``(z, zbar, u)``; key = ``alpha + beta + gamma``."""

    __slots__ = ()
    kind = "bigraded"

    @property
    def width(self):
        return 2 * self.n + self.d

    def split(self, key):
        n = self.n
        return key[:n], key[n:2 * n], key[2 * n:]

    def bidegree(self, key):
        n = self.n
        return sum(key[:n]), sum(key[n:2 * n])

    def _order(self, key):
        a, b, g = self.split(key)
        return (self.wt(key), a, b, g)

    def _fields(self, key):
        return self.split(key)

    @staticmethod
    def _nfields():
        return 3

    def key(self, alpha=None, beta=None, gamma=None):
        n, d = self.n, self.d
        return tuple(alpha or (0,) * n) + tuple(beta or (0,) * n) + tuple(gamma or (0,) * d)

    @classmethod
    def monomial(cls, n, d, alpha=None, beta=None, gamma=None, c=ONE, cap=8, s=1, j=0):
        key = tuple(alpha or (0,) * n) + tuple(beta or (0,) * n) + tuple(gamma or (0,) * d)
        vec = [ZERO] * s
        vec[j] = GaussRat.coerce(c)
        return cls(n, d, s, cap, {key: tuple(vec)})

    @classmethod
    def z(cls, n, d, i, cap=8):
        a = [0] * n
        a[i] = 1
        return cls.monomial(n, d, alpha=a, cap=cap)

    @classmethod
    def zbar(cls, n, d, i, cap=8):
        b = [0] * n
        b[i] = 1
        return cls.monomial(n, d, beta=b, cap=cap)

    @classmethod
    def u(cls, n, d, j, cap=8):
        g = [0] * d
        g[j] = 1
        return cls.monomial(n, d, gamma=g, cap=cap)

    @classmethod
    def const(cls, n, d, c=ONE, cap=8, s=1, j=0):
        return cls.monomial(n, d, c=c, cap=cap, s=s, j=j)

    def conjugate(self):
        n = self.n
        out = {}
        for k, v in self.terms.items():
            out[k[n:2 * n] + k[:n] + k[2 * n:]] = tuple(c.conj() for c in v)
        return self._like(out)

    def extract_pq(self, p, q):
        n = self.n
        return self._like({k: v for k, v in self.terms.items()
                           if sum(k[:n]) == p and sum(k[n:2 * n]) == q})

    def bidegrees(self):
        return sorted({self.bidegree(k) for k in self.terms})

    def real_part(self):
        return (self + self.conjugate()).scale(GaussRat(1, 0) / 2)

    def is_real_valued(self):
        return self == self.conjugate()

    def dz(self, i):
        return self.diff(i)

    def dzbar(self, i):
        return self.diff(self.n + i)

    def du(self, j):
        return self.diff(2 * self.n + j)

    def holomorphic_part(self):
        """Terms free of zbar (as a series in the same layout)."""
        n = self.n
        return self._like({k: v for k, v in self.terms.items() if not any(k[n:2 * n])})


class HoloSeries(_Series):
    """Series in ``(z, w)``; key = ``alpha + delta``."""

    __slots__ = ()
    kind = "holo"

    @property
    def width(self):
        return self.n + self.d

    def split(self, key):
        return key[:self.n], key[self.n:]

    def zdeg(self, key):
        return sum(key[:self.n])

    def _order(self, key):
        a, dl = self.split(key)
        return (self.wt(key), a, dl)

    def _fields(self, key):
        return self.split(key)

    @staticmethod
    def _nfields():
        return 2

    @classmethod
    def monomial(cls, n, d, alpha=None, delta=None, c=ONE, cap=8, s=1, j=0):
        key = tuple(alpha or (0,) * n) + tuple(delta or (0,) * d)
        vec = [ZERO] * s
        vec[j] = GaussRat.coerce(c)
        return cls(n, d, s, cap, {key: tuple(vec)})

    @classmethod
    def identity_z(cls, n, d, cap=8):
        """The map ``z`` as a C^n-valued series."""
        terms = {}
        for i in range(n):
            key = tuple(1 if t == i else 0 for t in range(n)) + (0,) * d
            vec = [ZERO] * n
            vec[i] = ONE
            terms[key] = tuple(vec)
        return cls(n, d, n, cap, terms)

    @classmethod
    def identity_w(cls, n, d, cap=8):
        terms = {}
        for j in range(d):
            key = (0,) * n + tuple(1 if t == j else 0 for t in range(d))
            vec = [ZERO] * d
            vec[j] = ONE
            terms[key] = tuple(vec)
        return cls(n, d, d, cap, terms)

    def extract_zdeg(self, p):
        return self._like({k: v for k, v in self.terms.items() if self.zdeg(k) == p})

    def to_bigraded(self):
        """Embed as a zbar-free bigraded series (w renamed to u)."""
        n = self.n
        out = {k[:n] + (0,) * n + k[n:]: v for k, v in self.terms.items()}
        return BigradedSeries(self.n, self.d, self.s, self.cap, out)

    @classmethod
    def from_bigraded(cls, a: BigradedSeries):
        n = a.n
        out = {}
        for k, v in a.terms.items():
            if any(k[n:2 * n]):
                raise SeriesError("series depends on zbar; not holomorphic")
            out[k[:n] + k[2 * n:]] = v
        return cls(a.n, a.d, a.s, a.cap, out)

    def dw(self, j):
        return self.diff(self.n + j)


# ---------------------------------------------------------------------------
# module-level operations


def series_arith(a, b, op):
    """Dispatch ``op`` in {"add", "sub", "mul", "scale"} on two series.

    For ``scale`` the second argument is a coefficient.
    """
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "scale":
        return a.scale(b)
    raise SeriesError(f"unknown operation {op!r}")


def conjugate(a: BigradedSeries) -> BigradedSeries:
    return a.conjugate()


def extract_pq(a: BigradedSeries, p: int, q: int) -> BigradedSeries:
    if p < 0 or q < 0:
        raise SeriesError("bidegree must be nonnegative")
    return a.extract_pq(p, q)


def is_real_valued(a: BigradedSeries) -> bool:
    return a.is_real_valued()


def compose(a: _Series, subs, cap=None):
    """Substitute one scalar series per variable slot of ``a``.

    ``subs`` is a list of s=1 series (all of one layout), one for each
    flat slot of ``a``'s keys.  Every substitute must have positive
    minimal weight unless ``a`` is polynomial, otherwise truncation would
    not terminate.  Returns a series in the layout of ``subs``.
    """
    if len(subs) != a.width:
        raise SeriesError(f"need {a.width} substitutes, got {len(subs)}")
    ref = subs[0]
    for sb in subs:
        if type(sb) is not type(ref) or (sb.n, sb.d) != (ref.n, ref.d) or sb.s != 1:
            raise SeriesError("substitutes must be scalar series of one layout")
        if sb.terms and sb.min_wt() < 1:
            raise SeriesError("substitute with a weight-0 term")
    if cap is None:
        cap = min([a.cap] + [sb.cap for sb in subs])
    raw = [sb.component(0) for sb in subs]
    comps = [_compose_raw(a.component(j), raw, ref.d, cap, ref.width) for j in range(a.s)]
    return type(ref).from_components(ref.n, ref.d, comps, cap)


def _check_v(v: BigradedSeries, d):
    if v.s != d:
        raise SeriesError(f"v must be R^{d}-valued, got s={v.s}")
    if not v.is_real_valued():
        raise SeriesError("v must be real-valued")
    if v.terms and v.min_wt() < 2:
        raise SeriesError("v has terms of quasidegree < 2")


def substitute_w(g: HoloSeries, v: BigradedSeries, sign: int = 1) -> BigradedSeries:
    """Return ``g(z, u + i*sign*v)`` as a bigraded series.

    Expands each ``w^delta`` as a product of powers of ``u_j + i*sign*v_j``;
    this equals the Taylor sum of ``(i*sign)^k / k! * D_u^k g . v^k`` with
    the symmetric multilinear contraction.
    """
    if sign not in (1, -1):
        raise SeriesError("sign must be +1 or -1")
    if (g.n, g.d) != (v.n, v.d):
        raise SeriesError("dimension mismatch between g and v")
    _check_v(v, g.d)
    n, d = g.n, g.d
    cap = min(g.cap, v.cap)
    isg = I if sign > 0 else -I
    subs = [BigradedSeries.z(n, d, i, cap) for i in range(n)]
    for j in range(d):
        subs.append(BigradedSeries.u(n, d, j, cap) + v.component_series(j).scale(isg))
    return compose(g, subs, cap)


def substitute_full(phi: BigradedSeries, f: HoloSeries, g: HoloSeries, v: BigradedSeries) -> BigradedSeries:
    """``phi(f, conj f, (g + conj g)/2)`` with ``f, g`` evaluated at ``u + i v``."""
    n, d = phi.n, phi.d
    if f.s != n or g.s != d:
        raise SeriesError("f must be C^n-valued and g C^d-valued")
    cap = min(phi.cap, f.cap, g.cap, v.cap)
    if not phi.terms:
        return BigradedSeries(n, d, phi.s, cap)
    F = substitute_w(f, v, 1)
    Fb = F.conjugate()
    G = substitute_w(g, v, 1)
    U = G.real_part()
    subs = [F.component_series(i) for i in range(n)]
    subs += [Fb.component_series(i) for i in range(n)]
    subs += [U.component_series(j) for j in range(d)]
    return compose(phi, subs, cap)


def taylor_substitute_w(g: HoloSeries, v: BigradedSeries, sign: int = 1) -> BigradedSeries:
    """Reference form of :func:`substitute_w` via explicit u-derivatives.

    Sums ``(i*sign)^k/k! * sum_{|m|=k} k!/m! * d^m g/du^m * v^m`` over
    multi-indices ``m``; used as an independent check.
    """
    _check_v(v, g.d)
    n, d = g.n, g.d
    cap = min(g.cap, v.cap)
    gb = g.to_bigraded().with_cap(cap)
    vcomps = [v.component_series(j) for j in range(d)]
    out = BigradedSeries(n, d, g.s, cap)
    isg = I if sign > 0 else -I
    k = 0
    while 2 * k <= cap:
        for m in _multi_indices(d, k):
            deriv = gb
            for j, e in enumerate(m):
                for _ in range(e):
                    deriv = deriv.du(j)
            if not deriv:
                continue
            vm = BigradedSeries.const(n, d, cap=cap)
            for j, e in enumerate(m):
                for _ in range(e):
                    vm = vm * vcomps[j]
            mfact = 1
            for e in m:
                mfact *= factorial(e)
            coef = (isg ** k) / mfact
            out = out + (deriv * vm).scale(coef)
        k += 1
    return out


def _multi_indices(d, k):
    if d == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in _multi_indices(d - 1, k - first):
            yield (first,) + rest


def multi_indices(d, k):
    """All exponent tuples of length ``d`` and total degree ``k`` (lex descending)."""
    return list(_multi_indices(d, k))
