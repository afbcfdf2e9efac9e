import random

import pytest
from hypothesis import settings, strategies as st

from quadnf.coeffs import ZERO, GaussRat
from quadnf.gseries import BigradedSeries, HoloSeries, multi_indices
from quadnf.quadric import HermitianFamily

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

FAMILIES = {
    "sphere": HermitianFamily.diagonal([1]),
    "n2d1": HermitianFamily.diagonal([1, -1]),
    "n2d2": HermitianFamily.diagonal([1, 1], [1, -1]),
}


def g(re, im=0):
    return GaussRat(re, im)


def bmono(n, d, alpha, beta, gamma, c=1, cap=8, s=1, j=0):
    return BigradedSeries.monomial(n, d, alpha, beta, gamma, c=GaussRat.coerce(c), cap=cap, s=s, j=j)


def hmono(n, d, alpha, delta, c=1, cap=8, s=1, j=0):
    return HoloSeries.monomial(n, d, alpha, delta, c=GaussRat.coerce(c), cap=cap, s=s, j=j)


def random_bigraded(rng, n, d, s=1, cap=6, nterms=5, height=3, min_wt=0):
    terms = {}
    keys = []
    for wt in range(min_wt, cap + 1):
        for m in range(wt + 1):
            if (wt - m) % 2:
                continue
            for p in range(m + 1):
                for a in multi_indices(n, p):
                    for b in multi_indices(n, m - p):
                        for c in multi_indices(d, (wt - m) // 2):
                            keys.append(a + b + c)
    for key in rng.sample(keys, min(nterms, len(keys))):
        terms[key] = tuple(GaussRat(rng.randint(-height, height), rng.randint(-height, height))
                           for _ in range(s))
    return BigradedSeries(n, d, s, cap, terms)


def random_holo(rng, n, d, s=1, cap=6, nterms=5, height=3, min_wt=0):
    keys = []
    for wt in range(min_wt, cap + 1):
        for m in range(wt + 1):
            if (wt - m) % 2:
                continue
            for a in multi_indices(n, m):
                for dl in multi_indices(d, (wt - m) // 2):
                    keys.append(a + dl)
    terms = {}
    for key in rng.sample(keys, min(nterms, len(keys))):
        terms[key] = tuple(GaussRat(rng.randint(-height, height), rng.randint(-height, height))
                           for _ in range(s))
    return HoloSeries(n, d, s, cap, terms)


seeds = st.integers(min_value=0, max_value=10 ** 6)
dims = st.sampled_from([(1, 1), (2, 1), (1, 2), (2, 2)])


@pytest.fixture
def rng():
    return random.Random(12345)


def real_basis(n, d, keys, s=1, j=0, cap=8):
    """Real-valued series spanning the given keys (closed under mirroring)."""
    out, seen = [], set()
    for key in keys:
        if key in seen:
            continue
        mirror = key[n:2 * n] + key[:n] + key[2 * n:]
        seen.update((key, mirror))
        if mirror == key:
            out.append(bmono(n, d, key[:n], key[n:2 * n], key[2 * n:], cap=cap, s=s, j=j))
        else:
            a = bmono(n, d, key[:n], key[n:2 * n], key[2 * n:], cap=cap, s=s, j=j)
            out.append(a + a.conjugate())
            ia = a.scale(GaussRat(0, 1))
            out.append(ia + ia.conjugate())
    return out


def null_combinations(basis, fn):
    """Nonzero real combinations of ``basis`` annihilated by ``fn`` (a list of series)."""
    from flint import fmpq_mat
    from quadnf import linalg
    images = [fn(b) for b in basis]
    index = {}
    cols = []
    for outs in images:
        col = {}
        for t, ser in enumerate(outs):
            for key, v in ser.terms.items():
                for jj, c in enumerate(v):
                    for part, x in ((0, c.re), (1, c.im)):
                        if x:
                            col[index.setdefault((t, key, jj, part), len(index))] = x
        cols.append(col)
    M = fmpq_mat(max(len(index), 1), len(basis))
    for c, col in enumerate(cols):
        for r, x in col.items():
            M[r, c] = linalg.to_fmpq(x)
    N = linalg.nullspace(M)
    out = []
    for c in range(N.ncols()):
        acc = basis[0].scale(0)
        for i, b in enumerate(basis):
            x = linalg.to_mpq(N[i, c])
            if x:
                acc = acc + b.scale(GaussRat(x))
        out.append(acc)
    return out


def keys_of(n, d, p, q, udeg):
    return [a + b + c for a in multi_indices(n, p) for b in multi_indices(n, q)
            for c in multi_indices(d, udeg)]


def crucial_oracle(phi, fam):
    # term-by-term expansion of S11' X12 - S12' (Q + S11) on raw key dicts
    n, d, cap = fam.n, fam.d, phi.cap

    def part(p, q):
        return {k: v for k, v in phi.terms.items() if (sum(k[:n]), sum(k[n:2 * n])) == (p, q)}

    s11, s12 = part(1, 1), part(1, 2)
    qx = dict(fam.Q(cap).terms)
    for k, v in s11.items():
        old = qx.get(k, (ZERO,) * d)
        qx[k] = tuple(a + b for a, b in zip(old, v))
    out = {}

    def acc(S, X, sign):
        for ks, vs in S.items():
            for l in range(d):
                e = ks[2 * n + l]
                if not e:
                    continue
                kd = ks[:2 * n + l] + (e - 1,) + ks[2 * n + l + 1:]
                for kx, vx in X.items():
                    if not vx[l]:
                        continue
                    key = tuple(a + b for a, b in zip(kd, kx))
                    if sum(key) + sum(key[2 * n:]) > cap:
                        continue
                    cur = list(out.get(key, (ZERO,) * d))
                    for j in range(d):
                        cur[j] = cur[j] + GaussRat(sign * e) * vs[j] * vx[l]
                    out[key] = tuple(cur)

    acc(s11, part(1, 2), 1)
    acc(s12, qx, -1)
    return {k: v for k, v in out.items() if any(v)}
