"""Convergence diagnostics.

* ``crucial_residual`` evaluates ``Phi'_{1,1} Phi_{1,2} - Phi'_{1,2} (Q + Phi_{1,1})``
  exactly.
* ``norm_growth`` profiles normalized Fischer norms per quasidegree.
* ``bigdenom_probe`` measures, degree by degree, the operator norm of the
  minimal-norm right inverse of a graded linear operator and rescales it by
  ``(i + m_j + q) ... (i + q + 1)``.
* ``regularity_probe`` compares vanishing orders of the partial derivatives
  of a nonlinear jet map ``W(x, u_{j,alpha})`` with
  ``p_{j,|alpha|} = max(0, |alpha| + q + 1 - m_j)``.

Floating point appears only in the probes and in ``norm_growth``; every
float is derived from an exact block or series.  All verdicts here are
advisory.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from math import factorial

import numpy as np
import sympy
from sympy import QQ, QQ_I
from sympy.polys.rings import ring

from . import fischer
from .complexdef import prime
from .conjugacy import ManifoldSpec, Transform, linear_operator
from .fischer import GradedPiece, fischer_weight, probe_block
from .gseries import BigradedSeries, HoloSeries, multi_indices
from .quadric import HermitianFamily, delta_apply, eval_Q, require_valid

__all__ = [
    "crucial_residual",
    "GrowthProfile",
    "norm_growth",
    "geometric_ratio",
    "ProbeConfig",
    "ProbeOperator",
    "BigDenomTable",
    "bigdenom_probe",
    "delta_cubed_operator",
    "l1_tilde_operator",
    "l1_apply",
    "l1_tilde_apply",
    "l2_apply",
    "JetMap",
    "jet_symbol",
    "x_symbols",
    "sample_jet",
    "step2_jet_map",
    "RegularityReport",
    "regularity_probe",
]

BOUND_FACTOR = 10.0


# ---------------------------------------------------------------------------
# convergence criterion


def crucial_residual(phi: BigradedSeries, family: HermitianFamily) -> BigradedSeries:
    """``Phi'_{1,1} . Phi_{1,2} - Phi'_{1,2} . (Q + Phi_{1,1})``.

    A prime is ``D_u`` contracted with the d-vector that follows it.  The
    criterion holds through ``phi.cap`` iff the result is the zero series.
    """
    p11 = phi.extract_pq(1, 1)
    p12 = phi.extract_pq(1, 2)
    Q = family.Q(phi.cap)
    return prime(p11, p12) - prime(p12, Q + p11)


# ---------------------------------------------------------------------------
# norm growth


def _norm_by_wt(series):
    acc = {}
    for key, vec in series.terms.items():
        w = float(fischer_weight(key, normalized=True))
        s = sum(float(c.re) ** 2 + float(c.im) ** 2 for c in vec)
        k = series.wt(key)
        acc[k] = acc.get(k, 0.0) + w * s
    return acc


def geometric_ratio(norms):
    """Least-squares ``rho`` with ``norm_k ~ c rho^k`` over nonzero entries."""
    pts = [(k, math.log(v)) for k, v in sorted(norms.items()) if v > 0]
    if len(pts) < 2:
        return None
    ks = np.array([p[0] for p in pts], dtype=float)
    ys = np.array([p[1] for p in pts], dtype=float)
    slope = np.polyfit(ks, ys, 1)[0]
    return float(math.exp(slope))


@dataclass
class GrowthProfile:
    """Normalized Fischer norms per quasidegree and their geometric ratios."""

    phi_norms: dict
    transform_norms: dict
    phi_ratio: object = None
    transform_ratio: object = None

    def to_json(self):
        return {
            "phi_norms": {str(k): v for k, v in sorted(self.phi_norms.items())},
            "transform_norms": {str(k): v for k, v in sorted(self.transform_norms.items())},
            "phi_ratio": self.phi_ratio,
            "transform_ratio": self.transform_ratio,
            "advisory": True,
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def to_text(self):
        ks = sorted(set(self.phi_norms) | set(self.transform_norms))
        lines = [f"{'wt':>4}  {'|phi_k|':>14}  {'|transform_k|':>14}"]
        for k in ks:
            lines.append(f"{k:>4}  {self.phi_norms.get(k, 0.0):>14.6e}  "
                         f"{self.transform_norms.get(k, 0.0):>14.6e}")
        fmt = lambda r: "n/a" if r is None else f"{r:.6g}"  # noqa: E731
        lines.append(f"ratio phi: {fmt(self.phi_ratio)}  transform: {fmt(self.transform_ratio)}")
        return "\n".join(lines) + "\n"


def norm_growth(phi: BigradedSeries, t: Transform = None) -> GrowthProfile:
    """Per-quasidegree normalized Fischer norms of ``phi`` and of ``t``."""
    pn = {k: math.sqrt(v) for k, v in _norm_by_wt(phi).items()}
    tn = {}
    if t is not None:
        acc = _norm_by_wt(t.f_nl)
        for k, v in _norm_by_wt(t.g_nl).items():
            acc[k] = acc.get(k, 0.0) + v
        tn = {k: math.sqrt(v) for k, v in acc.items()}
    return GrowthProfile(pn, tn, geometric_ratio(pn), geometric_ratio(tn))


# ---------------------------------------------------------------------------
# linear operators of the (1,1), (2,2), (3,3) system


def _split_unknowns(H: HoloSeries, n, d):
    f = H.select(list(range(n)))
    g = H.select(list(range(n, n + d)))
    return f, g


def l1_apply(H: HoloSeries, family: HermitianFamily) -> BigradedSeries:
    """``(f_1, Re g_0) -> ((1,1), (2,2), (3,3))`` parts of the linear operator.

    ``H`` stacks ``f_1`` (components ``0..n-1``, linear in ``z``) and
    ``g_0`` (components ``n..n+d-1``, real coefficients, free of ``z``).
    The output stacks three ``d``-vectors.
    """
    n, d = family.n, family.d
    f, g = _split_unknowns(H, n, d)
    cap = H.cap + 6
    L = linear_operator(f.with_cap(cap), g.with_cap(cap), family, cap)
    return L.extract_pq(1, 1).stack(L.extract_pq(2, 2)).stack(L.extract_pq(3, 3))


def l1_tilde_apply(H: HoloSeries, family: HermitianFamily) -> BigradedSeries:
    """``l1_apply`` followed by ``Delta^2`` on the first row and ``Delta`` on the second."""
    d = family.d
    out = l1_apply(H, family)
    r1 = out.select(list(range(d)))
    r2 = out.select(list(range(d, 2 * d)))
    r3 = out.select(list(range(2 * d, 3 * d)))
    r1 = delta_apply(delta_apply(r1, family), family)
    r2 = delta_apply(r2, family)
    return r1.stack(r2).stack(r3)


def l2_apply(H: HoloSeries, family: HermitianFamily) -> BigradedSeries:
    """``(f_2, f_3) -> (-Q(f_2, zbar), -Q(f_3, zbar))``."""
    n, d = family.n, family.d
    cap = H.cap + 2
    zb = BigradedSeries.from_components(
        n, d, [BigradedSeries.zbar(n, d, i, cap).component(0) for i in range(n)], cap)
    out = []
    for part in (H.select(list(range(n))), H.select(list(range(n, 2 * n)))):
        out.append(eval_Q(part.with_cap(cap).to_bigraded(), zb, family).scale(-1))
    return out[0].stack(out[1])


fischer.register_operator("L1", lambda fam: (lambda H: l1_apply(H, fam)))
fischer.register_operator("L1tilde", lambda fam: (lambda H: l1_tilde_apply(H, fam)))
fischer.register_operator("L2", lambda fam: (lambda H: l2_apply(H, fam)))


# ---------------------------------------------------------------------------
# big denominators probe


@dataclass(frozen=True)
class ProbeConfig:
    """Order multiindex ``m``, shift ``q`` and the degrees ``i`` to probe.

    An empty ``m`` means the operator's own orders.
    """

    m: tuple = ()
    q: int = 0
    degree_range: tuple = (1, 12)

    def __post_init__(self):
        lo, hi = self.degree_range
        if self.q < 0 or lo < 0 or hi < lo or any(x < 0 for x in self.m):
            raise ValueError("probe configuration entries must be nonnegative and lo <= hi")

    @property
    def degrees(self):
        lo, hi = self.degree_range
        return range(lo, hi + 1)

    @classmethod
    def parse(cls, text):
        """``"m=2,3;q=0;i=1..12"`` (every part optional)."""
        m, q, rng = (), 0, (1, 12)
        for part in filter(None, (p.strip() for p in text.split(";"))):
            name, _, val = part.partition("=")
            name = name.strip()
            if name == "m":
                m = tuple(int(x) for x in val.split(",") if x.strip())
            elif name == "q":
                q = int(val)
            elif name == "i":
                lo, _, hi = val.partition("..")
                rng = (int(lo), int(hi or lo))
            else:
                raise ValueError(f"unknown probe option {name!r}")
        return cls(m, q, rng)


@dataclass
class ProbeOperator:
    """A graded operator given degree by degree.

    ``domain(i)`` and ``codomain(i)`` return the exact pieces of the
    degree-``i`` block, ``apply`` is the series map and ``unknown(e)`` maps
    a domain basis entry ``(component, key)`` to the unknown index ``j``.
    """

    name: str
    m: tuple
    q: int
    domain: object
    codomain: object
    apply: object
    unknown: object
    n: int
    d: int


def _probe_weight(key, d):
    """Normalized Fischer weight in ``u`` (or ``w``) times normalized weight in ``z``."""
    zp, up = key[:len(key) - d], key[len(key) - d:]

    def nw(es):
        out = 1
        for e in es:
            out *= factorial(e)
        return out / factorial(sum(es))
    return nw(zp) * nw(up)


def delta_cubed_operator(family: HermitianFamily, q: int = 0) -> ProbeOperator:
    """``psi -> Delta^3 psi`` on real ``R^d``-valued functions of ``u``."""
    n, d = family.n, family.d

    def domain(i):
        return GradedPiece.holo(n, d, d, 0, i + 3, real=True, label=f"psi^({i + 3})")

    def codomain(i):
        return GradedPiece.bigraded(n, d, d, 3, 3, i, label=f"R[3,3]u^{i}")

    def apply(psi):
        x = psi.to_bigraded()
        for _ in range(3):
            x = delta_apply(x, family)
        return x

    return ProbeOperator("Delta-cubed", (3,), q, domain, codomain, apply,
                         lambda e: 0, n, d)


def l1_tilde_operator(family: HermitianFamily, q: int = 0) -> ProbeOperator:
    """The homogenized operator on ``(f_1, Re g_0)`` of orders ``(2, 3)``."""
    n, d = family.n, family.d
    s = n + d

    def domain(i):
        entries = []
        for a in range(n):
            for key in (al + c for al in multi_indices(n, 1) for c in multi_indices(d, i + 2)):
                entries.append((a, key))
        for k in range(d):
            for c in multi_indices(d, i + 3):
                entries.append((n + k, (0,) * n + c))
        return GradedPiece.from_keys("holo", n, d, s, entries, range(n, s), f"(f1,g0)^({i})")

    def codomain(i):
        keys = [a + b + c for a in multi_indices(n, 3) for b in multi_indices(n, 3)
                for c in multi_indices(d, i)]
        entries = [(j, k) for j in range(3 * d) for k in keys]
        return GradedPiece.from_keys("bigraded", n, d, 3 * d, entries, (), f"R[3,3]^3 u^{i}")

    return ProbeOperator("L1-tilde", (2, 3), q, domain, codomain,
                         lambda H: l1_tilde_apply(H, family),
                         lambda e: 0 if e[0] < n else 1, n, d)


_BUILTIN = {"Delta-cubed": delta_cubed_operator, "L1-tilde": l1_tilde_operator}


@dataclass
class BigDenomTable:
    """One row per probed degree: norms and rescaled norms per unknown."""

    operator: str
    m: tuple
    q: int
    rows: list = field(default_factory=list)

    def rescaled(self, j):
        return [r["rescaled"][j] for r in self.rows if r["rescaled"][j] is not None]

    def verdicts(self):
        """Advisory: ``sup_i rescaled_i <= 10 * rescaled_{i_min}`` per unknown."""
        out = []
        for j in range(len(self.m)):
            vals = self.rescaled(j)
            if not vals:
                out.append(True)
                continue
            first = vals[0]
            out.append(max(vals) <= BOUND_FACTOR * first if first > 0 else max(vals) == 0)
        return out

    @property
    def bounded(self):
        return all(self.verdicts())

    def to_json(self):
        return {"operator": self.operator, "m": list(self.m), "q": self.q,
                "rows": self.rows, "bounded": self.verdicts(),
                "threshold": f"sup <= {BOUND_FACTOR:g} x value at i_min (advisory)"}

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def to_text(self):
        r = len(self.m)
        head = f"{'i':>3}  {'rank':>5}  {'sigma_min':>12}"
        for j in range(r):
            head += f"  {'norm[' + str(j) + ']':>12}  {'rescaled[' + str(j) + ']':>14}"
        lines = [f"# {self.operator} m={self.m} q={self.q}", head]
        for row in self.rows:
            s = f"{row['i']:>3}  {row['rank']:>5}  {row['sigma_min']:>12.6e}"
            for j in range(r):
                nv, rv = row["norm"][j], row["rescaled"][j]
                s += f"  {'-' if nv is None else f'{nv:.6e}':>12}"
                s += f"  {'-' if rv is None else f'{rv:.6e}':>14}"
            if row["note"]:
                s += f"  # {row['note']}"
            lines.append(s)
        lines.append("bounded (advisory): " + " ".join(
            f"[{j}]={'yes' if v else 'no'}" for j, v in enumerate(self.verdicts())))
        return "\n".join(lines) + "\n"


def _float_block(op: ProbeOperator, i):
    src, dst = op.domain(i), op.codomain(i)
    blk = probe_block(op.apply, src, dst, op.name)
    A = blk.real
    M = np.array([[float(A[r, c].p) / float(A[r, c].q) for c in range(A.ncols())]
                  for r in range(A.nrows())], dtype=float).reshape(A.nrows(), A.ncols())
    wd = np.sqrt([_probe_weight(src.basis[b][1], op.d) for b, _ in src.coords()])
    wc = np.sqrt([_probe_weight(dst.basis[b][1], op.d) for b, _ in dst.coords()])
    B = (wc[:, None] * M) / wd[None, :]
    owner = [op.unknown(src.basis[b]) for b, _ in src.coords()]
    return B, owner


def _probe_degree(op: ProbeOperator, m, q, i):
    B, owner = _float_block(op, i)
    row = {"i": i, "rank": 0, "sigma_min": 0.0, "norm": [None] * len(m),
           "rescaled": [None] * len(m), "note": ""}
    if B.size == 0:
        row["note"] = "empty block"
        return row
    try:
        U, sv, Vt = np.linalg.svd(B, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        row["note"] = f"svd failed: {exc}"
        return row
    tol = max(B.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    keep = sv > tol
    rank = int(keep.sum())
    row["rank"] = rank
    if rank == 0:
        row["note"] = "zero block"
        return row
    row["sigma_min"] = float(sv[keep].min())
    if sv[0] / sv[keep].min() > 1e12:
        row["note"] = "ill-conditioned Gram"
    pinv = (Vt[keep].T / sv[keep]) @ U[:, keep].T
    owner = np.array(owner)
    for j in range(len(m)):
        rows = pinv[owner == j]
        if rows.size == 0:
            continue
        nv = float(np.linalg.norm(rows, 2))
        fac = 1.0
        for t in range(1, m[j] + 1):
            fac *= i + q + t
        row["norm"][j] = nv
        row["rescaled"][j] = nv * fac
    return row


def bigdenom_probe(family: HermitianFamily, op_id, cfg: ProbeConfig = ProbeConfig()) -> BigDenomTable:
    """Probe ``S^{-1} pi`` degree by degree for ``op_id``.

    ``op_id`` is ``"L1-tilde"``, ``"Delta-cubed"`` or a custom
    :class:`ProbeOperator`.  ``S^{-1} pi`` is the Moore-Penrose inverse in
    the normalized Fischer norms, i.e. the minimal-norm right inverse
    composed with the orthogonal projection onto the image.
    """
    require_valid(family)
    if isinstance(op_id, ProbeOperator):
        op = op_id
    elif op_id in _BUILTIN:
        op = _BUILTIN[op_id](family, cfg.q)
    else:
        raise ValueError(f"unknown probe operator {op_id!r}")
    m = tuple(cfg.m) or tuple(op.m)
    if len(m) != len(op.m):
        raise ValueError(f"operator {op.name} has {len(op.m)} unknowns, got m={m}")
    table = BigDenomTable(op.name, m, cfg.q)
    for i in cfg.degrees:
        table.rows.append(_probe_degree(op, m, cfg.q, i))
    return table


# ---------------------------------------------------------------------------
# regularity of nonlinear jet maps


def jet_symbol(j, alpha):
    """The jet coordinate ``u_{j, alpha}`` (derivative ``alpha`` of unknown ``j``)."""
    return sympy.Symbol("u_%d_%s" % (j, "_".join(map(str, alpha))), real=True)


def x_symbols(nx):
    return tuple(sympy.Symbol(f"x{l}", real=True) for l in range(nx))


class JetMap:
    """``W(x, u_{j,alpha})`` with polynomial components over ``Q``.

    ``m[j]`` is the highest derivative order of unknown ``j``; ``nx`` is
    the number of independent variables.  Components may be given as sympy
    expressions in :func:`x_symbols` and :func:`jet_symbol` or as elements
    of ``self.R``.
    """

    def __init__(self, nx, m, components, labels=None):
        self.nx = nx
        self.m = tuple(m)
        self.slots = [(j, a) for j in range(len(self.m)) for k in range(self.m[j] + 1)
                      for a in multi_indices(nx, k)]
        self.slot_index = {s: nx + t for t, s in enumerate(self.slots)}
        names = [s.name for s in x_symbols(nx)] + [jet_symbol(j, a).name for j, a in self.slots]
        self.R = ring(",".join(names), QQ)[0]
        self.Rx = ring(",".join(names[:nx]), QQ)[0]
        self.symbols = list(x_symbols(nx)) + [jet_symbol(j, a) for j, a in self.slots]
        self.components = [self._coerce(c) for c in components]
        self.labels = labels or [f"W{i}" for i in range(len(self.components))]

    def _coerce(self, c):
        if getattr(c, "ring", None) == self.R:
            return c
        e = sympy.sympify(c)
        extra = e.free_symbols - set(self.symbols)
        if extra:
            raise ValueError(f"symbols {sorted(map(str, extra))} are not jet coordinates "
                             f"within the orders {self.m}")
        return self.R.from_dict(dict(sympy.Poly(e, *self.symbols).terms())) if e != 0 else self.R.zero

    def slot_gen(self, j, a):
        return self.R.gens[self.slot_index[(j, a)]]

    def as_expr(self, i):
        return self.components[i].as_expr(*self.symbols)

    def jet_values(self, jet):
        """``dF`` as elements of ``Q[x]`` for unknowns ``F_j`` given as sympy expressions."""
        xs = x_symbols(self.nx)
        base = []
        for F in jet:
            e = sympy.sympify(F)
            base.append(self.Rx.from_dict(dict(sympy.Poly(e, *xs).terms())) if e != 0 else self.Rx.zero)
        vals = list(self.Rx.gens)
        for j, a in self.slots:
            v = base[j]
            for l, k in enumerate(a):
                for _ in range(k):
                    v = v.diff(self.Rx.gens[l])
            vals.append(v)
        return vals

    def substitute(self, p, vals):
        out = self.Rx.zero
        cache = {}
        for mon, c in p.items():
            t = self.Rx.one * c
            for g, e in enumerate(mon):
                if e:
                    key = (g, e)
                    if key not in cache:
                        cache[key] = vals[g] ** e
                    t = t * cache[key]
            out += t
        return out

    def evaluate(self, jet):
        """``T(F)(x) = W(x, dF(x))`` as elements of ``Q[x]``."""
        vals = self.jet_values(jet)
        return [self.substitute(c, vals) for c in self.components]


def _order(p):
    """Vanishing order at ``x = 0`` (``inf`` for the zero polynomial)."""
    if not p:
        return math.inf
    return min(sum(mon) for mon in p.keys())


def sample_jet(nx, m, seed=0, extra=2, height=5):
    """Random unknowns ``F_j`` with rational coefficients and ``ord_0 F_j >= m_j``."""
    rng = random.Random(seed)
    xs = x_symbols(nx)
    out = []
    for mj in m:
        e = sympy.Integer(0)
        for k in range(mj, mj + extra + 1):
            for a in multi_indices(nx, k):
                c = sympy.Rational(rng.randint(-height, height), rng.randint(1, height))
                mon = sympy.Integer(1)
                for l, p in enumerate(a):
                    mon *= xs[l] ** p
                e += c * mon
        out.append(e)
    return out


def _enc(v):
    return "inf" if v == math.inf else v


@dataclass
class RegularityReport:
    """Per-slot vanishing orders against ``p_{j,|alpha|}``."""

    q: int
    m: tuple
    slots: list
    strict_increase: dict

    @property
    def regular(self):
        return all(s["passed"] for s in self.slots)

    @property
    def passed(self):
        return self.regular and self.strict_increase.get("passed", True)

    def orders(self):
        return [s["actual"] for s in self.slots]

    def to_json(self):
        return {
            "q": self.q, "m": list(self.m), "regular": self.regular, "passed": self.passed,
            "slots": [{**s, "alpha": list(s["alpha"]), "actual": _enc(s["actual"])}
                      for s in self.slots],
            "strict_increase": {k: _enc(v) for k, v in self.strict_increase.items()},
            "advisory": True,
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def to_text(self):
        lines = [f"# regularity q={self.q} m={self.m}",
                 f"{'j':>3}  {'alpha':<12}  {'required':>8}  {'actual':>7}  verdict"]
        for s in self.slots:
            lines.append(f"{s['j']:>3}  {','.join(map(str, s['alpha'])):<12}  "
                         f"{s['required']:>8}  {str(_enc(s['actual'])):>7}  "
                         f"{'pass' if s['passed'] else 'FAIL'}")
        si = self.strict_increase
        lines.append(f"strict increase: ord(T F - T G) = {_enc(si['order_T'])}, "
                     f"ord_m(F - G) = {_enc(si['order_H'])}: "
                     f"{'pass' if si['passed'] else 'FAIL'}")
        lines.append(f"regular: {'yes' if self.regular else 'no'}")
        return "\n".join(lines) + "\n"


def regularity_probe(target, cfg: ProbeConfig = ProbeConfig(degree_range=(0, 0)),
                     jet=None, other=None, seed=0) -> RegularityReport:
    """Vanishing orders of ``dW_i/du_{j,alpha}`` along a sampled jet.

    ``target`` is a :class:`JetMap` or a :class:`ManifoldSpec` (then the
    jet map of :func:`step2_jet_map` with orders ``cfg.m`` is used).
    ``other`` is a second jet for the strict-increase comparison; by
    default it differs from ``jet`` by ``x_0^(m_j + 1)`` in every unknown.
    The order of ``F - G`` is ``min_j (ord_0(F_j - G_j) - m_j)``.
    """
    W = step2_jet_map(target, cfg.m) if isinstance(target, ManifoldSpec) else target
    q = cfg.q
    if jet is None:
        jet = sample_jet(W.nx, W.m, seed)
    if len(jet) != len(W.m):
        raise ValueError(f"jet has {len(jet)} unknowns, the map needs {len(W.m)}")
    vals = W.jet_values(jet)
    slots = []
    for j, a in W.slots:
        g = W.slot_gen(j, a)
        required = max(0, sum(a) + q + 1 - W.m[j])
        actual = math.inf
        for c in W.components:
            dc = c.diff(g)
            if dc:
                actual = min(actual, _order(W.substitute(dc, vals)))
        slots.append({"j": j, "alpha": a, "required": required, "actual": actual,
                      "passed": actual >= required})
    x0 = x_symbols(W.nx)[0]
    if other is None:
        other = [sympy.sympify(F) + x0 ** (mj + 1) for F, mj in zip(jet, W.m)]
    TF, TG = W.evaluate(jet), W.evaluate(other)
    oT = min([_order(a - b) for a, b in zip(TF, TG)] or [math.inf])
    dv = W.jet_values([sympy.sympify(F) - sympy.sympify(G) for F, G in zip(jet, other)])
    oH = min(_order(dv[W.slot_index[(j, (0,) * W.nx)]]) - mj for j, mj in enumerate(W.m))
    strict = {"order_T": oT, "order_H": oH, "passed": oT > oH + q}
    return RegularityReport(q, W.m, slots, strict)


# -- the nonlinear part of the (1,1), (2,2), (3,3) equations --------------------


class _JetRing:
    """Polynomials over ``Q(i)`` in ``z, zbar, x`` and jet coordinates."""

    def __init__(self, n, d, r, top):
        self.n, self.d, self.r = n, d, r
        self.jets = [(j, a) for j in range(r) for k in range(top + 1) for a in multi_indices(d, k)]
        self.jet_index = {}
        names = [f"z{i}" for i in range(n)] + [f"zb{i}" for i in range(n)]
        names += [f"x{l}" for l in range(d)]
        base = len(names)
        for t, (j, a) in enumerate(self.jets):
            self.jet_index[(j, a)] = base + t
            names.append(jet_symbol(j, a).name)
        self.R, *self.gens = ring(",".join(names), QQ_I)
        self.z = self.gens[:n]
        self.zb = self.gens[n:2 * n]
        self.x = self.gens[2 * n:2 * n + d]
        self.top = top

    def jet(self, j, a):
        return self.gens[self.jet_index[(j, a)]]

    def truncate(self, p, top=3):
        n = self.n
        return self.R.from_dict({mon: c for mon, c in p.items()
                                 if sum(mon[:n]) <= top and sum(mon[n:2 * n]) <= top})

    def bidegree_part(self, p, k):
        n = self.n
        return self.R.from_dict({mon: c for mon, c in p.items()
                                 if sum(mon[:n]) == k and sum(mon[n:2 * n]) == k})

    def conj(self, p):
        n = self.n
        return self.R.from_dict({mon[n:2 * n] + mon[:n] + mon[2 * n:]: QQ_I(c.x, -c.y)
                                 for mon, c in p.items()})

    def total_diff(self, p, l):
        """``d/dx_l`` with ``u_{j,alpha} -> u_{j,alpha + e_l}``."""
        xi = 2 * self.n + l
        acc = {}

        def add(mon, c):
            acc[mon] = acc.get(mon, QQ_I.zero) + c
        for mon, c in p.items():
            e = mon[xi]
            if e:
                add(mon[:xi] + (e - 1,) + mon[xi + 1:], c * e)
            for (j, a), gi in self.jet_index.items():
                e = mon[gi]
                if not e:
                    continue
                b = tuple(v + (1 if t == l else 0) for t, v in enumerate(a))
                if sum(b) > self.top:
                    raise ValueError("jet order exceeds the prepared range")
                mm = list(mon)
                mm[gi] -= 1
                mm[self.jet_index[(j, b)]] += 1
                add(tuple(mm), c * e)
        return self.R.from_dict({k: v for k, v in acc.items() if v})

    def split_coefficients(self, p, monos, W: JetMap):
        """Real and imaginary parts of the ``z^a zbar^b`` coefficients in ``W.R``."""
        n, d = self.n, self.d
        target = list(range(d)) + [W.slot_index.get(s) for s in self.jets]
        groups = {}
        for mon, c in p.items():
            groups.setdefault(mon[:2 * n], []).append((mon[2 * n:], c))
        out = []
        for ab in monos:
            re, im = {}, {}
            for rest, c in groups.get(ab, []):
                key = [0] * W.R.ngens
                for t, e in enumerate(rest):
                    if e:
                        if target[t] is None:
                            raise ValueError(f"jet {self.jets[t - d]} exceeds the orders {W.m}")
                        key[target[t]] += e
                key = tuple(key)
                if c.x:
                    re[key] = re.get(key, QQ.zero) + QQ(c.x)
                if c.y:
                    im[key] = im.get(key, QQ.zero) + QQ(c.y)
            out.append((W.R.from_dict({k: v for k, v in re.items() if v}),
                        W.R.from_dict({k: v for k, v in im.items() if v})))
        return out


def _qi(c):
    return QQ_I(c.re, c.im)


def step2_jet_map(spec: ManifoldSpec, m=()) -> JetMap:
    """Nonlinear right-hand side of the ``(1,1), (2,2), (3,3)`` equations.

    Unknowns are the real and imaginary parts of ``f_1(z, w) = A(w) z``
    (``2n^2`` functions, order ``m_f``) and ``Re g_0(w)`` (``d`` functions,
    order ``m_g``), as functions of ``x = u``.  With ``F = z + f_1`` and
    ``G = w + g_0`` evaluated at ``w = u + iQ`` the residual of the model
    problem is ``L(f_1, g_0) - N`` with
    ``N = Q(f_1, conj f_1) + Phi~(F, conj F, Re G)``.  The returned map is
    ``(Delta^2 N_{1,1}, Delta N_{2,2}, N_{3,3})`` split into real and
    imaginary parts of its ``z^a zbar^b`` coefficients.
    """
    fam = spec.family
    n, d = fam.n, fam.d
    m = tuple(m) or (2, 3)
    if len(m) != 2:
        raise ValueError("m must be (m_f, m_g)")
    mf, mg = m
    m_full = tuple([mf] * (2 * n * n) + [mg] * d)
    W = JetMap(d, m_full, [])
    J = _JetRing(n, d, len(m_full), max(mf, mg, 3) + 1)
    z, zb, xs = J.z, J.zb, J.x
    Qv = [sum((_qi(fam.J[k][p][q]) * zb[p] * z[q] for p in range(n) for q in range(n)), J.R.zero)
          for k in range(d)]
    I = QQ_I(0, 1)

    def taylor(j, top=3):
        """``h_j(u + iQ)`` for a real unknown ``h_j`` through ``|gamma| <= top``."""
        out = J.R.zero
        for k in range(top + 1):
            for gam in multi_indices(d, k):
                term = J.jet(j, gam) * I ** k
                for l, e in enumerate(gam):
                    if e:
                        term = term * Qv[l] ** e * QQ_I(QQ(1, factorial(e)), 0)
                out += term
        return out

    def fidx(a, b):
        return 2 * (a * n + b)

    f1 = []
    for a in range(n):
        e = J.R.zero
        for b in range(n):
            e += (taylor(fidx(a, b)) + I * taylor(fidx(a, b) + 1)) * z[b]
        f1.append(J.truncate(e))
    f1b = [J.conj(e) for e in f1]
    gidx = 2 * n * n
    G = [taylor(gidx + k) for k in range(d)]
    ReG = [(G[k] + J.conj(G[k])) * QQ_I(QQ(1, 2), 0) for k in range(d)]

    F = [z[a] + f1[a] for a in range(n)]
    Fb = [zb[a] + f1b[a] for a in range(n)]
    N = []
    for k in range(d):
        e = J.R.zero
        for p in range(n):
            for q in range(n):
                c = fam.J[k][p][q]
                if c:
                    e += _qi(c) * f1b[p] * f1[q]
        N.append(J.truncate(e))
    powers = {}

    def power(base, tag, e):
        if (tag, e) not in powers:
            powers[(tag, e)] = J.truncate(base ** e) if e else J.R.one
        return powers[(tag, e)]

    for key, vec in spec.perturbation.terms.items():
        al, be, ga = key[:n], key[n:2 * n], key[2 * n:]
        if sum(al) > 3 or sum(be) > 3:
            continue
        mon = J.R.one
        for a in range(n):
            mon = J.truncate(mon * power(F[a], ("F", a), al[a]))
            mon = J.truncate(mon * power(Fb[a], ("Fb", a), be[a]))
        for l in range(d):
            mon = J.truncate(mon * power(xs[l] + ReG[l], ("G", l), ga[l]))
        for k, c in enumerate(vec):
            if c:
                N[k] = N[k] + _qi(c) * mon

    def delta(vec):
        return [J.truncate(sum((J.total_diff(vec[k], l) * Qv[l] for l in range(d)), J.R.zero))
                for k in range(d)]

    rows = ([J.bidegree_part(e, 1) for e in N], [J.bidegree_part(e, 2) for e in N],
            [J.bidegree_part(e, 3) for e in N])
    rows = (delta(delta(rows[0])), delta(rows[1]), rows[2])
    monos = [a + b for a in multi_indices(n, 3) for b in multi_indices(n, 3)]
    comps, labels = [], []
    for ri, row in enumerate(rows):
        for k, e in enumerate(row):
            for ab, (re, im) in zip(monos, J.split_coefficients(e, monos, W)):
                tag = f"row{ri + 1}[{k}] z^{ab[:n]} zb^{ab[n:]}"
                comps += [re, im]
                labels += [f"Re {tag}", f"Im {tag}"]
    W.components = comps
    W.labels = labels
    return W
