"""Degree-by-degree normalization.

In quasidegree ``k`` the conjugacy equation reads
``L(f_{k-1}, g_k) + Phi_k = T_k`` with ``T_k`` known from lower orders.
The real-valued series of quasidegree ``k`` split into blocks by
``s = p - q``; for ``s > 0`` the block of ``-s`` is its conjugate, so only
``s >= 0`` is solved.  Unknowns feed one block each:

    g_a -> s = a,   f_a -> s = a - 1 (a >= 1),   f_0 -> s = 1 (through conj).

For each block the normal-form conditions ``C`` are probed as a real
matrix and ``x`` solves ``C L x = C T`` with ``x`` orthogonal to ``ker L``
in the standard Fischer metric.  Then ``Phi = T - L x`` lies in the normal
space.  The map ``T -> x`` is precomputed once per family, degree, block
and mode.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from flint import fmpq_mat

from . import linalg
from .coeffs import I
from .conditions import ConditionReport, check_space, nd_residuals, noff_residuals
from .conjugacy import (
    ManifoldSpec,
    Transform,
    conjugacy_residual,
    linear_operator,
    pullback,
)
from .complexdef import real_to_complex
from .fischer import GradedPiece, minimal_norm_solve
from .gseries import BigradedSeries, HoloSeries, SeriesError, compose, multi_indices
from .quadric import K_block, Kstar_apply, cm_trace

__all__ = [
    "EngineError",
    "NormalFormReport",
    "prepare_normal_coordinates",
    "normalize_formal",
    "normalize_weak",
    "normalize_p1_high",
    "cm_normalize",
    "MODES",
]

MODES = ("full", "weak", "cm")


class EngineError(RuntimeError):
    """An internal consistency check failed."""


def _workers():
    try:
        return max(1, int(os.environ.get("QUADNF_WORKERS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# condition maps on arbitrary (not necessarily real) block series


def _low_terms(phi: BigradedSeries, qmax):
    n = phi.n
    return phi._like({k: v for k, v in phi.terms.items()
                      if min(sum(k[:n]), sum(k[n:2 * n])) <= qmax})


def condition_outputs(phi: BigradedSeries, family, mode):
    """List of series that all vanish iff ``phi`` is in the normal space."""
    if mode == "cm":
        out = [_low_terms(phi, 1)]
        for (p, q), power in (((2, 2), 1), ((2, 3), 2), ((3, 2), 2), ((3, 3), 3)):
            out.append(cm_trace(phi.extract_pq(p, q), family, power))
        return out
    out = [_low_terms(phi, 0)]
    for p in range(2, phi.cap + 1):
        out.append(Kstar_apply(phi.extract_pq(p, 1), family))
        out.append(Kstar_apply(phi.extract_pq(1, p), family, conjugated=True))
    out.extend(nd_residuals(phi, family))
    if mode == "full":
        out.extend(noff_residuals(phi, family))
    return out


# ---------------------------------------------------------------------------
# blocks


@dataclass
class Block:
    k: int
    s: int
    mode: str
    f_piece: GradedPiece
    g_piece: GradedPiece
    phi_piece: GradedPiece
    L: fmpq_mat
    X: fmpq_mat
    kernel_dim: int
    rank_L: int
    rank_CL: int
    rank_C: int

    @property
    def complementary(self):
        return self.rank_CL == self.rank_L == self.rank_C

    def note(self):
        return {"kernel_dim": self.kernel_dim, "rank_L": self.rank_L,
                "rank_CL": self.rank_CL, "codim_normal_space": self.rank_C,
                "unknowns_real_dim": self.f_piece.rdim + self.g_piece.rdim,
                "complementary": self.complementary}


def _holo_piece(n, d, s, m, wt):
    rest = wt - m
    if m < 0 or rest < 0 or rest % 2:
        return GradedPiece.from_keys("holo", n, d, s, ())
    return GradedPiece.holo(n, d, s, m, rest // 2)


def _phi_piece(n, d, k, s):
    entries = []
    for q in range(k + 1):
        p = q + s
        rest = k - p - q
        if rest < 0:
            break
        if rest % 2:
            continue
        for a in multi_indices(n, p):
            for b in multi_indices(n, q):
                for c in multi_indices(d, rest // 2):
                    for j in range(d):
                        entries.append((j, a + b + c))
    return GradedPiece.from_keys("bigraded", n, d, d, entries, label=f"Phi[k={k},s={s}]")


def _block_part(phi: BigradedSeries, s):
    n = phi.n
    return phi._like({k: v for k, v in phi.terms.items() if sum(k[:n]) - sum(k[n:2 * n]) == s})


def _hermitian_basis(piece: GradedPiece):
    """Real coordinate vectors of a basis of the real-valued series in a
    ``s = 0`` block."""
    n = piece.n
    idx = {e: i for i, e in enumerate(piece.basis)}
    coords = {c: r for r, c in enumerate(piece.coords())}
    cols = []
    seen = set()
    for i, (j, key) in enumerate(piece.basis):
        if (j, key) in seen:
            continue
        mirror = key[n:2 * n] + key[:n] + key[2 * n:]
        m = idx[(j, mirror)]
        seen.add((j, key))
        seen.add((j, mirror))
        if m == i:
            cols.append({coords[(i, 0)]: 1})
        else:
            cols.append({coords[(i, 0)]: 1, coords[(m, 0)]: 1})
            cols.append({coords[(i, 1)]: 1, coords[(m, 1)]: -1})
    H = fmpq_mat(piece.rdim, len(cols))
    for c, col in enumerate(cols):
        for r, x in col.items():
            H[r, c] = x
    return H


def _realify_outputs(outputs_per_probe):
    """Stack probe outputs (lists of series) into a real matrix (rows = output coords)."""
    index = {}
    cols = []
    for outs in outputs_per_probe:
        col = {}
        for t, ser in enumerate(outs):
            for key, v in ser.terms.items():
                for j, c in enumerate(v):
                    if not c:
                        continue
                    for part, x in ((0, c.re), (1, c.im)):
                        if x:
                            r = index.setdefault((t, ser.s, key, j, part), len(index))
                            col[r] = x
        cols.append(col)
    order = sorted(index, key=lambda e: e)
    remap = {index[e]: r for r, e in enumerate(order)}
    M = fmpq_mat(len(order), len(cols))
    for c, col in enumerate(cols):
        for r, x in col.items():
            M[remap[r], c] = linalg.to_fmpq(x)
    return M


def _build_block(family, k, s, mode):
    n, d = family.n, family.d
    g_piece = _holo_piece(n, d, d, s, k)
    f_piece = _holo_piece(n, d, n, s + 1, k - 1)
    if s == 1 and mode != "weak" and k > 3:
        # the w-linear part of f_0 (k = 3) is pinned to zero
        f_piece = f_piece.union(_holo_piece(n, d, n, 0, k - 1))
    phi_piece = _phi_piece(n, d, k, s)

    # L on the unknowns, restricted to block s
    cols = []
    zero_f = HoloSeries(n, d, n, k)
    zero_g = HoloSeries(n, d, d, k)
    for b in f_piece.real_basis_series(k):
        cols.append(phi_piece.to_real(_block_part(linear_operator(b, zero_g, family, k), s)))
    for b in g_piece.real_basis_series(k):
        cols.append(phi_piece.to_real(_block_part(linear_operator(zero_f, b, family, k), s)))
    L = fmpq_mat(phi_piece.rdim, len(cols))
    for c, col in enumerate(cols):
        for r, x in enumerate(col):
            if x:
                L[r, c] = linalg.to_fmpq(x)

    # conditions on the block
    probes = [condition_outputs(b, family, mode) for b in phi_piece.real_basis_series(k)]
    C = _realify_outputs(probes)
    if C.nrows() == 0:
        C = fmpq_mat(1, phi_piece.rdim)

    weights = f_piece.weights() + g_piece.weights()
    nunk = len(weights)
    rank_L = linalg.rank(L)
    if s == 0:
        rank_C = linalg.rank(C * _hermitian_basis(phi_piece))
    else:
        rank_C = linalg.rank(C)
    X = fmpq_mat(nunk, phi_piece.rdim)
    rank_CL = 0
    K = linalg.nullspace(L) if nunk else fmpq_mat(0, 0)
    if nunk:
        B = C * L
        rows = linalg.independent_rows(B)
        rank_CL = len(rows)
        if rows:
            BR = linalg.submatrix(B, rows, list(range(nunk)))
            _, rk, piv = linalg.rref(BR)
            BRP = linalg.submatrix(BR, list(range(rk)), piv)
            CR = linalg.submatrix(C, rows, list(range(phi_piece.rdim)))
            Y = BRP.solve(CR)  # rk x rdim
            X0 = fmpq_mat(nunk, phi_piece.rdim)
            for i, j in enumerate(piv):
                for c in range(phi_piece.rdim):
                    x = Y[i, c]
                    if x:
                        X0[j, c] = x
            X = linalg.kernel_projector(K, weights) * X0
    return Block(k, s, mode, f_piece, g_piece, phi_piece, L, X,
                 K.ncols() if nunk else 0, rank_L, rank_CL, rank_C)


_BLOCKS = {}


def get_block(family, k, s, mode):
    key = (family.key(), k, s, mode)
    blk = _BLOCKS.get(key)
    if blk is None:
        blk = _build_block(family, k, s, mode)
        _BLOCKS[key] = blk
    return blk


def clear_block_cache():
    _BLOCKS.clear()


def _solve_block(blk: Block, T: BigradedSeries):
    n, d, k = blk.phi_piece.n, blk.phi_piece.d, blk.k
    t = linalg.column(blk.phi_piece.to_real(_block_part(T, blk.s)))
    x = blk.X * t
    phi = t - blk.L * x
    xs = linalg.col_to_list(x)
    nf = blk.f_piece.rdim
    f = blk.f_piece.from_real(xs[:nf], k) if nf else HoloSeries(n, d, n, k)
    g = blk.g_piece.from_real(xs[nf:], k) if blk.g_piece.rdim else HoloSeries(n, d, d, k)
    return f, g, blk.phi_piece.from_real(linalg.col_to_list(phi), k)


# ---------------------------------------------------------------------------
# reports


@dataclass
class NormalFormReport:
    """Result of a normalization run."""

    phi: BigradedSeries
    transform: Transform
    conditions: ConditionReport
    kernel_note: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    mode: str = "full"
    conjugacy_residual_terms: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.conditions.passed and self.conjugacy_residual_terms == 0

    def to_json(self):
        return {
            "mode": self.mode,
            "ok": self.ok,
            "conjugacy_residual_terms": self.conjugacy_residual_terms,
            "conditions": self.conditions.to_json(),
            "kernel_note": {str(k): {str(s): v for s, v in sorted(blocks.items())}
                            for k, blocks in sorted(self.kernel_note.items())},
            "flags": list(self.flags),
            "extra": self.extra,
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# the degree loop


def _normalize(spec: ManifoldSpec, mode: str, f0: HoloSeries = None):
    fam = spec.family
    n, d, cap = fam.n, fam.d, spec.cap
    fn = HoloSeries(n, d, n, cap) if f0 is None else f0.with_cap(cap)
    gn = HoloSeries(n, d, d, cap)
    phi = BigradedSeries(n, d, d, cap)
    notes = {}
    workers = _workers()
    for k in range(3, cap + 1):
        t = Transform.from_nonlinear(fn, gn, cap)
        res = conjugacy_residual(spec.with_cap(k), t.with_cap(k), phi.with_cap(k), k)
        if res.below_wt(k):
            raise EngineError(f"residual below quasidegree {k} does not vanish")
        T = -res.extract_wt(k)
        svals = [s for s in range(0, k + 1)]
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                blocks = list(ex.map(lambda s: get_block(fam, k, s, mode), svals))
        else:
            blocks = [get_block(fam, k, s, mode) for s in svals]
        notes[k] = {}
        phik = BigradedSeries(n, d, d, cap)
        for blk in blocks:
            f, g, ph = _solve_block(blk, T)
            fn = fn + f.with_cap(cap)
            gn = gn + g.with_cap(cap)
            ph = ph.with_cap(cap)
            phik = phik + (ph if blk.s == 0 else ph + ph.conjugate())
            notes[k][blk.s] = blk.note()
        phi = phi + phik
    return Transform.from_nonlinear(fn, gn, cap), phi, notes


def _finish(spec, mode, t, phi, notes, flags, space):
    res = conjugacy_residual(spec, t, phi)
    conds = check_space(phi, spec.family, space, spec.cap)
    flags = list(flags)
    bad = [f"k={k} s={s}" for k, blocks in notes.items() for s, v in blocks.items()
           if not v["complementary"]]
    if bad:
        flags.append("non-complementary blocks: " + ", ".join(bad))
    return NormalFormReport(phi, t, conds, notes, flags, mode, len(res))


def normalize_formal(spec: ManifoldSpec) -> NormalFormReport:
    """Full formal normal form with unknowns orthogonal to ``ker L``."""
    spec.validate()
    t, phi, notes = _normalize(spec, "full")
    return _finish(spec, "full", t, phi, notes, [], "full")


def _check_f0(f0: HoloSeries, n, d):
    if f0.s != n or (f0.n, f0.d) != (n, d):
        raise SeriesError("f0 must be a C^n-valued series in w")
    if any(any(k[:n]) for k in f0.terms):
        raise SeriesError("f0 must not depend on z")
    if f0.terms and f0.min_wt() < 2:
        raise SeriesError("f0 must vanish at 0")


def normalize_weak(spec: ManifoldSpec, f0: HoloSeries = None) -> NormalFormReport:
    """Normal form with ``f(0, w) = f0(w)`` prescribed; off-diagonal
    conditions are dropped."""
    spec.validate()
    n, d = spec.n, spec.d
    if f0 is None:
        f0 = HoloSeries(n, d, n, spec.cap)
    _check_f0(f0, n, d)
    t, phi, notes = _normalize(spec, "weak", f0)
    return _finish(spec, "weak", t, phi, notes, ["f0 prescribed"], "weak")


def cm_normalize(spec: ManifoldSpec) -> NormalFormReport:
    """Chern-Moser normal form (``d = 1``)."""
    if spec.d != 1:
        raise SeriesError("cm_normalize needs d = 1")
    spec.validate()
    t, phi, notes = _normalize(spec, "cm")
    flags = ["unitary factor pinned: linear part is the identity and unknowns are orthogonal to ker L"]
    return _finish(spec, "cm", t, phi, notes, flags, "cm")


# ---------------------------------------------------------------------------
# normal coordinates and the (p,1) rows


def prepare_normal_coordinates(spec: ManifoldSpec, f0: HoloSeries = None):
    """Return ``(spec', t0)`` with ``spec'`` in normal coordinates.

    ``t0 = (z + f0(w), w + iG(z, w))`` where
    ``G(0, w) = phi(f0, conj f0, w)`` with ``phi = Q + Phi~`` and
    ``w + iG = theta(z + f0, conj f0, w - iG(0, w))``.
    """
    spec.validate()
    fam = spec.family
    n, d, cap = fam.n, fam.d, spec.cap
    if f0 is None:
        f0 = HoloSeries(n, d, n, cap)
    _check_f0(f0, n, d)
    f0 = f0.with_cap(cap)
    zs = [HoloSeries.identity_z(n, d, cap).component_series(i) for i in range(n)]
    ws = [HoloSeries.identity_w(n, d, cap).component_series(j) for j in range(d)]
    f0c = [f0.component_series(i) for i in range(n)]
    f0b = [c.map_coeffs(lambda x: x.conj()) for c in f0c]
    phit = fam.Q(cap) + spec.perturbation
    G0 = compose(phit, f0c + f0b + ws, cap)
    theta = real_to_complex(spec).theta
    subs = [zs[i] + f0c[i] for i in range(n)] + f0b
    subs += [ws[j] - G0.component_series(j).scale(I) for j in range(d)]
    th = compose(theta, subs, cap)
    G = (th - HoloSeries.identity_w(n, d, cap)).scale(-I)
    gn = G.scale(I)
    t0 = Transform.from_nonlinear(f0, gn, cap)
    if t0.is_identity():
        return spec, t0
    new = pullback(spec, t0)
    if any(not any(k[:n]) or not any(k[n:2 * n]) for k in new.perturbation.terms):
        raise EngineError("normal-coordinate preparation left (p,0) terms")
    return new, t0


def normalize_p1_high(spec: ManifoldSpec):
    """Kill the ``K``-image part of every ``Phi_{p,1}`` with ``p >= 4``.

    Only ``f`` components of z-degree ``p >= 4`` are used; they are found
    degree by degree as minimal-norm solutions of ``K f_p = -T_{p,1}``.
    Returns ``(t, Phi)``.
    """
    spec.validate()
    fam = spec.family
    n, d, cap = fam.n, fam.d, spec.cap
    fn = HoloSeries(n, d, n, cap)
    gn = HoloSeries(n, d, d, cap)
    phi = BigradedSeries(n, d, d, cap)
    for k in range(5, cap + 1):
        t = Transform.from_nonlinear(fn, gn, cap)
        cur = pullback(spec.with_cap(k), t.with_cap(k)).perturbation
        for p in range(4, k):
            rest = k - p - 1
            if rest < 0 or rest % 2:
                continue
            blk = K_block(fam, p, rest // 2)
            T = cur.extract_pq(p, 1).extract_wt(k)
            if not T:
                continue
            x, _ = minimal_norm_solve(blk, T)
            fn = fn - x.with_cap(cap)
    t = Transform.from_nonlinear(fn, gn, cap)
    phi = pullback(spec, t).perturbation
    return t, phi
