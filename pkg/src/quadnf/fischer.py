"""Fischer inner products, graded blocks and minimal-norm solves.

Monomials are orthogonal.  The standard weight of ``z^a zbar^b u^c`` is
``a! b! c!``; the normalized weight divides by ``(|a|+|b|+|c|)!``.  Vector
components are orthogonal to each other.  Holomorphic series in ``(z, w)``
use ``a! d!`` and ``a! d! / (|a|+|d|)!``.

Linear maps between finite blocks are stored in realified form: every
complex coordinate contributes a real and an imaginary coordinate, and
the real inner product is the real part of the Hermitian one.  This lets
the same code handle complex-linear operators such as ``K`` and merely
real-linear ones such as the linearised conjugacy operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

from gmpy2 import mpq

from . import linalg
from .coeffs import ZERO, GaussRat
from .gseries import BigradedSeries, HoloSeries, SeriesError, _Series, multi_indices

__all__ = [
    "FischerError",
    "fischer_weight",
    "fischer_inner",
    "fischer_inner_split",
    "fischer_norm2",
    "derivative_multiplication_adjoint_check",
    "GradedPiece",
    "LinearBlockMap",
    "assemble_block",
    "probe_block",
    "minimal_norm_solve",
]


class FischerError(ValueError):
    """Incompatible gradings or malformed block data."""


def _fact_prod(es):
    out = 1
    for e in es:
        out *= factorial(e)
    return out


def fischer_weight(key, normalized=False) -> mpq:
    """Weight of the flat monomial ``key`` (either layout)."""
    w = _fact_prod(key)
    if normalized:
        return mpq(w, factorial(sum(key)))
    return mpq(w)


def split_weight(key, n, d) -> mpq:
    """Normalized in ``(z, zbar)``, standard in ``u``."""
    zpart = key[:len(key) - d]
    upart = key[len(key) - d:]
    return mpq(_fact_prod(zpart), factorial(sum(zpart))) * _fact_prod(upart)


def _inner(a: _Series, b: _Series, weight) -> GaussRat:
    if not isinstance(b, _Series) or not isinstance(a, _Series):
        raise FischerError("inner product needs two series")
    if type(a) is not type(b) or (a.n, a.d, a.s) != (b.n, b.d, b.s):
        raise FischerError("inner product of series with different layouts")
    re = mpq(0)
    im = mpq(0)
    small, other = (a, b) if len(a.terms) <= len(b.terms) else (b, a)
    for key, va in small.terms.items():
        vb = other.terms.get(key)
        if vb is None:
            continue
        x, y = (va, vb) if small is a else (vb, va)
        w = weight(key)
        for p, q in zip(x, y):
            # p * conj(q)
            re += w * (p.re * q.re + p.im * q.im)
            im += w * (p.im * q.re - p.re * q.im)
    return GaussRat(re, im)


def fischer_inner(a: _Series, b: _Series, normalized: bool = False) -> GaussRat:
    """``<a, b>``, linear in ``a`` and conjugate-linear in ``b``."""
    return _inner(a, b, lambda k: fischer_weight(k, normalized))


def fischer_inner_split(a: _Series, b: _Series) -> GaussRat:
    """Product normalized in the ``z``/``zbar`` block and standard in ``u``.

    ``K`` and its per-homogeneity adjoint with the ``1/(m+1)`` factor are
    exact adjoints for this product.
    """
    return _inner(a, b, lambda k: split_weight(k, a.n, a.d))


def fischer_norm2(a: _Series, normalized: bool = False) -> mpq:
    return fischer_inner(a, a, normalized).re


def _dgamma(f: BigradedSeries, gamma):
    out = f
    for j, e in enumerate(gamma):
        for _ in range(e):
            out = out.du(j)
    return out


def derivative_multiplication_adjoint_check(gamma, f: BigradedSeries, g: BigradedSeries):
    """Return ``(<D_gamma f, g>, <f, u^gamma g>)`` for the standard product."""
    gamma = tuple(gamma)
    if len(gamma) != f.d:
        raise FischerError("gamma must have length d")
    key = (0,) * (2 * f.n) + gamma
    lhs = fischer_inner(_dgamma(f, gamma), g)
    rhs = fischer_inner(f, g.mul_monomial(key).with_cap(max(g.cap, g.max_wt() + f.wt(key))))
    return lhs, rhs


# ---------------------------------------------------------------------------
# graded blocks


@dataclass(frozen=True)
class GradedPiece:
    """An ordered monomial basis of one finite block.

    ``basis`` lists ``(component, key)`` pairs.  Components in
    ``real_components`` carry real coefficients only, so they contribute a
    single real coordinate; every other entry contributes two.
    """

    kind: str
    n: int
    d: int
    s: int
    basis: tuple
    real_components: frozenset = field(default_factory=frozenset)
    label: str = ""

    def __post_init__(self):
        if len(set(self.basis)) != len(self.basis):
            raise FischerError("basis entries must be distinct")
        if self.kind not in ("bigraded", "holo"):
            raise FischerError(f"unknown layout {self.kind!r}")

    # -- constructors ----------------------------------------------------------

    @classmethod
    def bigraded(cls, n, d, s, p, q, udeg, components=None, real=False, label=""):
        """All ``z^a zbar^b u^c`` with ``|a|=p, |b|=q, |c|=udeg``."""
        comps = range(s) if components is None else components
        keys = [a + b + c for a in multi_indices(n, p) for b in multi_indices(n, q)
                for c in multi_indices(d, udeg)]
        basis = tuple((j, k) for j in comps for k in keys)
        rc = frozenset(comps) if real else frozenset()
        return cls("bigraded", n, d, s, basis, rc, label or f"R[{p},{q}]u^{udeg}")

    @classmethod
    def holo(cls, n, d, s, m, wdeg, components=None, real=False, label=""):
        """All ``z^a w^c`` with ``|a|=m, |c|=wdeg``."""
        comps = range(s) if components is None else components
        keys = [a + c for a in multi_indices(n, m) for c in multi_indices(d, wdeg)]
        basis = tuple((j, k) for j in comps for k in keys)
        rc = frozenset(comps) if real else frozenset()
        return cls("holo", n, d, s, basis, rc, label or f"H[{m}]w^{wdeg}")

    @classmethod
    def from_keys(cls, kind, n, d, s, entries, real_components=(), label=""):
        return cls(kind, n, d, s, tuple(entries), frozenset(real_components), label)

    def union(self, other: "GradedPiece") -> "GradedPiece":
        if (self.kind, self.n, self.d, self.s) != (other.kind, other.n, other.d, other.s):
            raise FischerError("cannot join pieces of different layouts")
        extra = tuple(e for e in other.basis if e not in set(self.basis))
        return GradedPiece(self.kind, self.n, self.d, self.s, self.basis + extra,
                           self.real_components | other.real_components,
                           f"{self.label}+{other.label}")

    # -- coordinates -----------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.basis)

    def coords(self):
        """Real coordinates as ``(basis index, part)`` with part 0=re, 1=im."""
        out = []
        for i, (j, _) in enumerate(self.basis):
            out.append((i, 0))
            if j not in self.real_components:
                out.append((i, 1))
        return out

    @property
    def rdim(self) -> int:
        return sum(1 if j in self.real_components else 2 for j, _ in self.basis)

    def index(self):
        return {e: i for i, e in enumerate(self.basis)}

    def weights(self, normalized=False):
        """Real-coordinate Gram diagonal."""
        out = []
        for i, part in self.coords():
            _, key = self.basis[i]
            out.append(fischer_weight(key, normalized))
        return out

    def series_class(self):
        return BigradedSeries if self.kind == "bigraded" else HoloSeries

    def basis_series(self, i, c=GaussRat(1, 0), cap=None):
        j, key = self.basis[i]
        cls = self.series_class()
        vec = [ZERO] * self.s
        vec[j] = c
        w = sum(key) + sum(key[len(key) - self.d:])
        return cls(self.n, self.d, self.s, w if cap is None else cap, {key: tuple(vec)})

    def real_basis_series(self, cap=None):
        """One series per real coordinate (unit or imaginary unit)."""
        out = []
        for i, part in self.coords():
            out.append(self.basis_series(i, GaussRat(1, 0) if part == 0 else GaussRat(0, 1), cap))
        return out

    def to_real(self, series: _Series, strict=True):
        """Real coordinate vector of ``series`` (mpq list)."""
        if series.s != self.s or (series.n, series.d) != (self.n, self.d):
            raise FischerError("series layout does not match the piece")
        idx = self.index()
        vec = {}
        for key, v in series.terms.items():
            for j, c in enumerate(v):
                if not c:
                    continue
                i = idx.get((j, key))
                if i is None:
                    if strict:
                        raise FischerError(f"term {key} (component {j}) outside {self.label}")
                    continue
                vec[i] = c
        out = []
        for i, part in self.coords():
            c = vec.get(i)
            if c is None:
                out.append(mpq(0))
            else:
                out.append(c.re if part == 0 else c.im)
        return out

    def from_real(self, x, cap=None) -> _Series:
        acc = {}
        for (i, part), val in zip(self.coords(), x):
            if not val:
                continue
            val = val if type(val) is mpq else linalg.to_mpq(val)
            re, im = acc.get(i, (mpq(0), mpq(0)))
            acc[i] = (re + val, im) if part == 0 else (re, im + val)
        terms = {}
        for i, (re, im) in acc.items():
            j, key = self.basis[i]
            vec = list(terms.get(key, (ZERO,) * self.s))
            vec[j] = GaussRat(re, im)
            terms[key] = tuple(vec)
        if cap is None:
            cap = max([sum(k) + sum(k[len(k) - self.d:]) for _, k in self.basis] or [0])
        return self.series_class()(self.n, self.d, self.s, cap, terms)

    def to_complex(self, series: _Series):
        idx = self.index()
        out = [ZERO] * self.dim
        for key, v in series.terms.items():
            for j, c in enumerate(v):
                if c:
                    i = idx.get((j, key))
                    if i is None:
                        raise FischerError(f"term {key} (component {j}) outside {self.label}")
                    out[i] = c
        return out

    def from_complex(self, vec, cap=None):
        terms = {}
        for (j, key), c in zip(self.basis, vec):
            if c:
                v = list(terms.get(key, (ZERO,) * self.s))
                v[j] = GaussRat.coerce(c)
                terms[key] = tuple(v)
        if cap is None:
            cap = max([sum(k) + sum(k[len(k) - self.d:]) for _, k in self.basis] or [0])
        return self.series_class()(self.n, self.d, self.s, cap, terms)


class LinearBlockMap:
    """A real-linear map between two pieces, stored as a realified matrix."""

    def __init__(self, domain: GradedPiece, codomain: GradedPiece, real_matrix, label=""):
        if real_matrix.nrows() != codomain.rdim or real_matrix.ncols() != domain.rdim:
            raise FischerError("matrix shape does not match the pieces")
        self.domain = domain
        self.codomain = codomain
        self.real = real_matrix
        self.label = label

    def __repr__(self):
        return (f"LinearBlockMap({self.label or '?'}: {self.domain.label} -> "
                f"{self.codomain.label}, {self.real.nrows()}x{self.real.ncols()})")

    def apply(self, series: _Series) -> _Series:
        x = linalg.column(self.domain.to_real(series))
        y = self.real * x
        return self.codomain.from_real(linalg.col_to_list(y))

    def __matmul__(self, other: "LinearBlockMap") -> "LinearBlockMap":
        if other.codomain != self.domain:
            raise FischerError("composition of blocks with mismatched pieces")
        return LinearBlockMap(other.domain, self.codomain, self.real * other.real,
                              f"{self.label}*{other.label}")

    def __eq__(self, other):
        return (isinstance(other, LinearBlockMap) and self.domain == other.domain
                and self.codomain == other.codomain and self.real == other.real)

    def is_complex_linear(self) -> bool:
        if self.domain.real_components or self.codomain.real_components:
            return False
        A = self.real
        for r in range(0, A.nrows(), 2):
            for c in range(0, A.ncols(), 2):
                if A[r, c] != A[r + 1, c + 1] or A[r, c + 1] != -A[r + 1, c]:
                    return False
        return True

    @property
    def matrix(self):
        """Complex matrix (codomain dim x domain dim) of GaussRat entries."""
        if not self.is_complex_linear():
            raise FischerError("block is not complex-linear")
        A = self.real
        return [[GaussRat(linalg.to_mpq(A[2 * r, 2 * c]), linalg.to_mpq(A[2 * r + 1, 2 * c]))
                 for c in range(self.domain.dim)] for r in range(self.codomain.dim)]

    def adjoint(self, normalized=False) -> "LinearBlockMap":
        """Adjoint for the diagonal Fischer Gram matrices of the two pieces."""
        gd = self.domain.weights(normalized)
        gc = self.codomain.weights(normalized)
        inv = linalg.diag([1 / w for w in gd])
        M = inv * self.real.transpose() * linalg.diag(gc)
        return LinearBlockMap(self.codomain, self.domain, M, f"{self.label}^*")

    def rank(self) -> int:
        return linalg.rank(self.real)

    def kernel(self):
        return linalg.nullspace(self.real)


def probe_block(fn, src: GradedPiece, dst: GradedPiece, label="", cap=None) -> LinearBlockMap:
    """Assemble the block of the real-linear map ``fn`` by probing basis vectors."""
    if cap is None:
        cap = max([sum(k) + sum(k[len(k) - dst.d:]) for _, k in dst.basis] or [0])
        cap = max([cap] + [sum(k) + sum(k[len(k) - src.d:]) for _, k in src.basis])
    cols = []
    for b in src.real_basis_series(cap):
        img = fn(b)
        if img.s != dst.s or img.kind != dst.kind:
            img = _convert(img, dst)
        cols.append(dst.to_real(img))
    M = linalg.zeros(dst.rdim, src.rdim)
    for c, col in enumerate(cols):
        for r, x in enumerate(col):
            if x:
                M[r, c] = linalg.to_fmpq(x)
    return LinearBlockMap(src, dst, M, label)


def _convert(img, dst: GradedPiece):
    if img.kind == dst.kind:
        if img.s != dst.s:
            raise FischerError("value dimension mismatch")
        return img
    if dst.kind == "holo":
        try:
            return HoloSeries.from_bigraded(img)
        except SeriesError as exc:
            raise FischerError(str(exc)) from None
    return img.to_bigraded()


_OPERATORS = {}


def register_operator(name, factory):
    """``factory(family)`` must return a callable series -> series."""
    _OPERATORS[name] = factory


def assemble_block(op_id, src: GradedPiece, dst: GradedPiece, context=None) -> LinearBlockMap:
    """Exact block of a named operator, a callable or a composition.

    ``op_id`` is a registered name (``"K"``, ``"Kbar"``, ``"Kstar"``,
    ``"Kbarstar"``, ``"Delta"``, ``"Deltastar"``, ``"CM-trace"``,
    ``"L1"``, ``"L2"``, ``"L1tilde"``), a callable, or a list of those
    applied left to right.
    """
    from . import quadric  # noqa: F401  registers the operators
    if op_id in ("L1", "L2", "L1tilde"):
        from . import diagnostics  # noqa: F401

    fn = _resolve(op_id, context)
    label = op_id if isinstance(op_id, str) else getattr(op_id, "__name__", "custom")
    return _cached_probe(fn, src, dst, str(label), op_id, context)


def _resolve(op_id, context):
    if callable(op_id):
        return op_id
    if isinstance(op_id, (list, tuple)):
        fns = [_resolve(o, context) for o in op_id]

        def chain(x):
            for f in fns:
                x = f(x)
            return x
        return chain
    if op_id not in _OPERATORS:
        raise FischerError(f"unknown operator {op_id!r}")
    if context is None:
        raise FischerError(f"operator {op_id!r} needs a Hermitian family")
    return _OPERATORS[op_id](context)


_BLOCK_CACHE = {}


def _cached_probe(fn, src, dst, label, op_id, context):
    try:
        key = (op_id if isinstance(op_id, (str, tuple)) else None, src, dst,
               None if context is None else context.key())
        hash(key)
    except TypeError:
        key = None
    if key is not None and key[0] is not None and key in _BLOCK_CACHE:
        return _BLOCK_CACHE[key]
    try:
        block = probe_block(fn, src, dst, label)
    except FischerError as exc:
        raise FischerError(f"incompatible gradings for {label}: {exc}") from None
    if key is not None and key[0] is not None:
        _BLOCK_CACHE[key] = block
    return block


def minimal_norm_solve(L: LinearBlockMap, rhs):
    """Split ``rhs`` into ``L x`` plus a residual orthogonal to the image.

    ``rhs`` is a series on the codomain piece (or a real coordinate list).
    Uses the standard Fischer Gram matrices.  Returns ``(x, residual)`` as
    series with ``x`` orthogonal to ``ker L`` (so ``x`` is in the image of
    the adjoint) and ``L x + residual = rhs``.
    """
    if isinstance(rhs, _Series):
        b = L.codomain.to_real(rhs)
    else:
        b = list(rhs)
        if len(b) != L.codomain.rdim:
            raise FischerError("rhs has the wrong length")
    x, r = linalg.solve_weighted_min_norm(L.real, linalg.column(b),
                                          L.codomain.weights(), L.domain.weights())
    return L.domain.from_real(linalg.col_to_list(x)), L.codomain.from_real(linalg.col_to_list(r))
