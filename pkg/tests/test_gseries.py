import random

import pytest
from hypothesis import given

from conftest import bmono, dims, g, hmono, random_bigraded, random_holo, seeds
from quadnf.coeffs import CoefficientError, GaussRat, format_rat, parse_rat
from quadnf.gseries import (
    BigradedSeries,
    HoloSeries,
    SeriesError,
    conjugate,
    extract_pq,
    is_real_valued,
    series_arith,
    substitute_full,
    substitute_w,
    taylor_substitute_w,
)


def zzb(cap=8):
    return bmono(1, 1, (1,), (1,), (0,), cap=cap)


# -- coefficients -------------------------------------------------------------

def test_rational_canonical():
    assert format_rat(parse_rat("6/-4")) == "-3/2"
    assert format_rat(parse_rat("0/7")) == "0/1"
    with pytest.raises(CoefficientError):
        parse_rat("1/0")
    with pytest.raises(CoefficientError):
        parse_rat("1.5")


def test_gaussrat_conj_involution():
    x = GaussRat(parse_rat("2/3"), parse_rat("-5/7"))
    assert x.conj().conj() == x
    assert x * x.conj() == GaussRat(x.abs2())


# -- arithmetic ---------------------------------------------------------------

def test_add_identity(rng):
    phi = random_bigraded(rng, 2, 1)
    assert series_arith(BigradedSeries(2, 1, 1, 6), phi, "add") == phi


def test_monomial_product():
    a = bmono(2, 1, (1, 0), (1, 0), (0,))
    assert a * a == bmono(2, 1, (2, 0), (2, 0), (0,))


def test_truncation_cap_one():
    x = bmono(1, 1, (1,), (0,), (0,), cap=1) + bmono(1, 1, (0,), (1,), (0,), cap=1)
    assert (x * x).is_zero()


def test_dimension_mismatch():
    with pytest.raises(SeriesError):
        bmono(1, 1, (1,), (0,), (0,)) + bmono(2, 1, (1, 0), (0, 0), (0,))
    with pytest.raises(SeriesError):
        BigradedSeries(1, 1, 2, 4) * BigradedSeries(1, 1, 2, 4)


def test_cap_is_min():
    a = bmono(1, 1, (1,), (0,), (0,), cap=5)
    b = bmono(1, 1, (0,), (1,), (0,), cap=3)
    assert (a + b).cap == 3 and (a * b).cap == 3


# -- conjugation and reality --------------------------------------------------

def test_conjugate_example():
    a = bmono(2, 1, (1, 0), (0, 1), (0,), c=g(0, 1))
    assert conjugate(a) == bmono(2, 1, (0, 1), (1, 0), (0,), c=g(0, -1))


def test_conjugate_real_fixed():
    a = zzb() + bmono(1, 1, (2,), (1,), (0,)) + bmono(1, 1, (1,), (2,), (0,))
    assert conjugate(a) == a
    assert is_real_valued(a)


def test_is_real_valued_examples():
    assert is_real_valued(zzb())
    assert not is_real_valued(zzb().scale(g(0, 1)))


# -- bigraded extraction ------------------------------------------------------

def test_extract_pq_examples():
    Q = zzb()
    a = Q + bmono(1, 1, (2,), (1,), (1,))
    assert extract_pq(a, 1, 1) == Q
    assert extract_pq(a, 4, 0).is_zero()


# -- substitution -------------------------------------------------------------

def test_substitute_w_linear():
    gw = hmono(1, 1, (0,), (1,))
    u = bmono(1, 1, (0,), (0,), (1,))
    assert substitute_w(gw, zzb()) == u + zzb().scale(g(0, 1))


def test_substitute_w_square():
    # (u + i zz)^2 expanded by hand
    gw = hmono(1, 1, (0,), (2,))
    expect = (bmono(1, 1, (0,), (0,), (2,)) + bmono(1, 1, (1,), (1,), (1,), c=g(0, 2))
              - bmono(1, 1, (2,), (2,), (0,)))
    assert substitute_w(gw, zzb()) == expect


def test_substitute_w_zero_renames():
    rng = random.Random(3)
    h = random_holo(rng, 2, 2, s=2)
    out = substitute_w(h, BigradedSeries(2, 2, 2, h.cap))
    assert out == h.to_bigraded()


def test_substitute_w_rejects():
    gw = hmono(1, 1, (0,), (1,))
    with pytest.raises(SeriesError):
        substitute_w(gw, zzb().scale(g(0, 1)))
    with pytest.raises(SeriesError):
        substitute_w(gw, bmono(1, 1, (1,), (0,), (0,)) + bmono(1, 1, (0,), (1,), (0,)))


def test_substitute_full_zero_phi():
    f = HoloSeries.identity_z(1, 1)
    gw = HoloSeries.identity_w(1, 1)
    assert substitute_full(BigradedSeries(1, 1, 1, 8), f, gw, zzb()).is_zero()


def test_substitute_full_identity_leading_term():
    rng = random.Random(5)
    phi = random_bigraded(rng, 1, 1, cap=6, min_wt=3)
    f = HoloSeries.identity_z(1, 1, cap=6)
    gw = HoloSeries.identity_w(1, 1, cap=6)
    out = substitute_full(phi, f, gw, zzb(6))
    k = phi.min_wt()
    assert out.extract_wt(k) == phi.extract_wt(k)


def test_substitute_full_hand_expansion():
    phi = bmono(1, 1, (0,), (0,), (1,))
    f = HoloSeries.identity_z(1, 1)
    gw = HoloSeries.identity_w(1, 1) + hmono(1, 1, (0,), (2,))
    expect = phi + bmono(1, 1, (0,), (0,), (2,)) - bmono(1, 1, (2,), (2,), (0,))
    assert substitute_full(phi, f, gw, zzb()) == expect


# -- serialization ------------------------------------------------------------

def test_serialization_round_trip(rng):
    for cls, maker in ((BigradedSeries, random_bigraded), (HoloSeries, random_holo)):
        a = maker(rng, 2, 2, s=2, nterms=12)
        text = a.dumps()
        b = cls.loads(text)
        assert b == a and b.dumps() == text


def test_serialization_rejects_garbage():
    with pytest.raises((SeriesError, CoefficientError)):
        BigradedSeries.loads("# bigraded n=1 d=1 s=1 cap=4\n0 | 1 | 0 | 0 | 1/0 | 0/1\n")


# -- properties ---------------------------------------------------------------

@given(seeds, dims)
def test_grading_of_products(seed, nd):
    rng = random.Random(seed)
    n, d = nd
    a = random_bigraded(rng, n, d, nterms=1)
    b = random_bigraded(rng, n, d, nterms=1)
    p = a * b
    if a and b:
        ka, kb = next(iter(a.terms)), next(iter(b.terms))
        for k in p.terms:
            assert p.wt(k) == a.wt(ka) + b.wt(kb)


@given(seeds, dims)
def test_conjugation_is_involutive_anti_automorphism(seed, nd):
    rng = random.Random(seed)
    n, d = nd
    a = random_bigraded(rng, n, d)
    b = random_bigraded(rng, n, d)
    assert a.conjugate().conjugate() == a
    assert (a * b).conjugate() == a.conjugate() * b.conjugate()
    assert (a + b).conjugate() == a.conjugate() + b.conjugate()
    assert (a + a.conjugate()).is_real_valued()


@given(seeds, dims)
def test_extract_pq_partitions(seed, nd):
    rng = random.Random(seed)
    n, d = nd
    a = random_bigraded(rng, n, d, nterms=10)
    total = BigradedSeries(n, d, 1, a.cap)
    for p in range(a.cap + 1):
        for q in range(a.cap + 1 - p):
            total = total + extract_pq(a, p, q)
    assert total == a


@given(seeds, dims)
def test_substitute_w_matches_taylor_and_is_additive(seed, nd):
    rng = random.Random(seed)
    n, d = nd
    g1 = random_holo(rng, n, d, s=d, cap=6)
    g2 = random_holo(rng, n, d, s=d, cap=6)
    v = random_bigraded(rng, n, d, s=d, cap=6, min_wt=2, nterms=3)
    v = v + v.conjugate()
    assert substitute_w(g1, v) == taylor_substitute_w(g1, v)
    assert substitute_w(g1, v, -1) == taylor_substitute_w(g1, v, -1)
    assert substitute_w(g1 + g2, v) == substitute_w(g1, v) + substitute_w(g2, v)
