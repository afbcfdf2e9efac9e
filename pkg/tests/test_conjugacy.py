import json
import random

import pytest
from hypothesis import given, settings

from conftest import FAMILIES, bmono, g, hmono, random_holo, seeds
from quadnf.appendix import SUPPORTED, appendix_crosscheck, is_supported
from quadnf.coeffs import GaussRat
from quadnf.complexdef import (
    ComplexDefining,
    is_normal_coordinates,
    phi_from_S,
    real_to_complex,
    reality_check,
)
from quadnf.conjugacy import (
    ManifoldSpec,
    SpecError,
    Transform,
    conjugacy_residual,
    lhs_apply,
    pullback,
    random_perturbation,
    random_transform,
    rhs_degree_k,
    verify_conjugacy,
)
from quadnf.gseries import BigradedSeries, HoloSeries, SeriesError
from quadnf.quadric import HermitianFamily, eval_Q

SPHERE = FAMILIES["sphere"]


def sphere_spec(phi=None, cap=8):
    return ManifoldSpec.build(SPHERE, phi, cap)


def random_spec(rng, fam, cap=8, **kw):
    return ManifoldSpec.build(fam, random_perturbation(rng, fam.n, fam.d, cap, **kw), cap)


# -- specs ---------------------------------------------------------------------

def test_spec_rejections():
    with pytest.raises(SpecError) as exc:
        sphere_spec(bmono(1, 1, (1,), (1,), (1,), c=g(0, 1)))
    assert exc.value.condition == "reality"
    with pytest.raises(SpecError) as exc:
        sphere_spec(bmono(1, 1, (1,), (1,), (0,)))
    assert exc.value.condition == "quasiorder"
    with pytest.raises(SpecError) as exc:
        ManifoldSpec.build(HermitianFamily.diagonal([1], [1]), None, 8)
    assert exc.value.condition == "independent"


def test_spec_json_round_trip():
    spec = random_spec(random.Random(1), FAMILIES["n2d2"], cap=6)
    text = spec.dumps()
    again = ManifoldSpec.loads(text)
    assert again == spec and again.dumps() == text


def test_spec_json_errors():
    data = json.loads(sphere_spec().dumps())
    data["perturbation"] = [{"j": 0, "alpha": [5], "beta": [5], "gamma": [0], "re": "1", "im": "0"}]
    with pytest.raises(SpecError) as exc:
        ManifoldSpec.from_json(data)
    assert exc.value.condition == "cap"
    with pytest.raises(SpecError) as exc:
        ManifoldSpec.from_json({"n": 1})
    assert exc.value.condition == "shape"


def test_transform_round_trip():
    t = random_transform(random.Random(2), 2, 2, 6)
    assert Transform.loads(t.dumps()) == t
    with pytest.raises(SeriesError):
        Transform.loads("garbage")


# -- linear part and right-hand side -------------------------------------------

def test_lhs_identity_is_zero():
    spec = sphere_spec()
    t = Transform.identity(1, 1)
    assert all(lhs_apply(t, k, spec).is_zero() for k in range(3, 9))


def test_lhs_g_quadratic():
    # (1/2i)((u + i zz)^2 - (u - i zz)^2) = 2u zz
    spec = sphere_spec()
    t = Transform.from_nonlinear(HoloSeries(1, 1, 1, 8), hmono(1, 1, (0,), (2,)))
    out = lhs_apply(t, 4, spec)
    assert out == bmono(1, 1, (1,), (1,), (1,), c=2, cap=4)
    assert out.extract_pq(0, 0).is_zero()


def test_lhs_f_quadratic():
    eps = g(2, -1)
    spec = sphere_spec()
    t = Transform.from_nonlinear(hmono(1, 1, (2,), (0,), c=eps), HoloSeries(1, 1, 1, 8))
    out = lhs_apply(t, 3, spec)
    assert out.extract_pq(2, 1) == bmono(1, 1, (2,), (1,), (0,), c=-eps, cap=3)


def test_rhs_examples():
    rng = random.Random(4)
    spec = random_spec(rng, SPHERE)
    t = Transform.identity(1, 1)
    zero = BigradedSeries(1, 1, 1, 8)
    assert rhs_degree_k(spec, t, zero, 3) == spec.perturbation.extract_wt(3)
    flat = sphere_spec()
    assert all(rhs_degree_k(flat, t, zero, k).is_zero() for k in range(3, 9))
    f2 = Transform.from_nonlinear(hmono(1, 1, (2,), (0,)), HoloSeries(1, 1, 1, 8))
    assert rhs_degree_k(flat, f2, zero, 4) == bmono(1, 1, (2,), (2,), (0,))


def test_rhs_ignores_unknowns():
    rng = random.Random(5)
    fam = FAMILIES["n2d1"]
    spec = random_spec(rng, fam)
    t = random_transform(rng, 2, 1, 8, density=0.3)
    phi = pullback(spec, t).perturbation
    for k in range(3, 9):
        base = rhs_degree_k(spec, t, phi, k)
        junk_f = random_holo(rng, 2, 1, s=2, cap=8, min_wt=k - 1, nterms=6)
        junk_g = random_holo(rng, 2, 1, s=1, cap=8, min_wt=k, nterms=4)
        junk_p = random_perturbation(rng, 2, 1, 8, lo=k, density=0.3)
        t2 = Transform.from_nonlinear(t.f_nl + junk_f, t.g_nl + junk_g, 8)
        assert rhs_degree_k(spec, t2, phi + junk_p, k) == base
        # the degree-k equation
        assert lhs_apply(t, k, spec) == (base - phi.extract_wt(k)).with_cap(k)


def test_verify_examples():
    rng = random.Random(6)
    spec = random_spec(rng, FAMILIES["n2d2"], cap=6)
    t = Transform.identity(2, 2, 6)
    assert verify_conjugacy(spec, t, spec.perturbation).is_zero()
    extra = bmono(2, 2, (1, 1), (1, 1), (0, 1), s=2, j=1, cap=6)
    extra = extra + extra.conjugate()
    res = verify_conjugacy(spec, t, spec.perturbation + extra)
    assert res == extra
    with pytest.raises(SeriesError):
        verify_conjugacy(spec, t, extra.scale(g(0, 1)))


@settings(max_examples=10)
@given(seeds)
def test_pullback_satisfies_conjugacy(seed):
    rng = random.Random(seed)
    fam = list(FAMILIES.values())[seed % 3]
    spec = random_spec(rng, fam, cap=6)
    t = random_transform(rng, fam.n, fam.d, 6, density=0.2)
    assert verify_conjugacy(spec, t, pullback(spec, t).perturbation).is_zero()


@given(seeds)
def test_identity_residual_vanishes(seed):
    rng = random.Random(seed)
    fam = list(FAMILIES.values())[seed % 3]
    spec = random_spec(rng, fam, cap=6)
    assert conjugacy_residual(spec, Transform.identity(fam.n, fam.d, 6), spec.perturbation).is_zero()


# -- appendix closed forms -----------------------------------------------------

def test_appendix_examples():
    rng = random.Random(7)
    spec = random_spec(rng, SPHERE, normal=True)
    t = random_transform(rng, 1, 1, 8, density=0.3)
    for p in range(0, 6):
        gen, clo = appendix_crosscheck(spec, t, spec.perturbation, (p, 0))
        assert gen == clo
        # the Im g and E_f rows vanish in bidegree (p, 0)
        assert gen.select([0]).is_zero() and gen.select([1]).is_zero()
    f2 = hmono(1, 1, (2,), (0,), c=g(1, 2))
    t2 = Transform.from_nonlinear(f2, HoloSeries(1, 1, 1, 8))
    gen, clo = appendix_crosscheck(sphere_spec(), t2, BigradedSeries(1, 1, 1, 8), (2, 2))
    assert gen == clo
    assert gen.select([2]) == eval_Q(f2.to_bigraded(), f2.to_bigraded().conjugate(), SPHERE)
    gen, clo = appendix_crosscheck(spec, t, spec.perturbation, (3, 2))
    assert gen == clo


def test_appendix_rejections():
    spec = sphere_spec()
    t = Transform.identity(1, 1)
    zero = BigradedSeries(1, 1, 1, 8)
    assert not is_supported((2, 3)) and SUPPORTED
    with pytest.raises(SeriesError):
        appendix_crosscheck(spec, t, zero, (2, 3))
    bad = bmono(1, 1, (3,), (0,), (0,))
    with pytest.raises(SeriesError):
        appendix_crosscheck(spec, t, bad + bad.conjugate(), (2, 2))


# -- complex defining equation -------------------------------------------------

def test_real_to_complex_model():
    cd = real_to_complex(sphere_spec())
    assert cd.S.is_zero()
    tau = bmono(1, 1, (0,), (0,), (1,))
    assert cd.theta == tau + bmono(1, 1, (1,), (1,), (0,), c=g(0, 2))


def test_real_to_complex_S1l():
    rng = random.Random(9)
    spec = random_spec(rng, FAMILIES["n2d1"], normal=True, hi=7)
    cd = real_to_complex(spec)
    for l in range(1, 7):
        assert cd.S_jk(1, l) == spec.perturbation.extract_pq(1, l).scale(g(0, 2))
    res, rel = reality_check(cd)
    assert res.is_zero()
    assert all(r.is_zero() for r in rel.values())


def test_reality_relation_detects_unpaired_term():
    fam = SPHERE
    tau = bmono(1, 1, (0,), (0,), (1,))
    Q2 = bmono(1, 1, (1,), (1,), (0,), c=g(0, 2))
    cd = ComplexDefining(fam, tau + Q2 + bmono(1, 1, (2,), (1,), (0,)))
    res, rel = reality_check(cd)
    assert not res.is_zero()
    assert rel["S[2,1]"] == bmono(1, 1, (2,), (1,), (0,))
    paired = ComplexDefining(fam, tau + Q2 + bmono(1, 1, (2,), (1,), (0,)) - bmono(1, 1, (1,), (2,), (0,)))
    assert reality_check(paired)[1]["S[2,1]"].is_zero()
    cd2 = ComplexDefining(fam, tau)
    assert reality_check(cd2, named=False).is_zero()


def test_phi_from_S_examples():
    assert phi_from_S(real_to_complex(sphere_spec())).is_zero()
    tau = bmono(1, 1, (0,), (0,), (1,))
    Q2 = bmono(1, 1, (1,), (1,), (0,), c=g(0, 2))
    s22 = bmono(1, 1, (2,), (2,), (1,), c=g(3, 1))
    cd = ComplexDefining(SPHERE, tau + Q2 + s22)
    assert phi_from_S(cd).extract_pq(2, 2) == s22.scale(GaussRat(0, -1) / 2)


@pytest.mark.parametrize("normal", [True, False])
def test_normal_coordinates_both_directions(normal):
    rng = random.Random(10)
    spec = random_spec(rng, FAMILIES["n2d2"], cap=6, normal=normal, density=0.3)
    cd = real_to_complex(spec)
    phi_normal = all(any(k[:2]) and any(k[2:4]) for k in spec.perturbation.terms)
    assert is_normal_coordinates(cd) == phi_normal == normal


@settings(max_examples=10)
@given(seeds)
def test_complex_round_trip(seed):
    rng = random.Random(seed)
    fam = list(FAMILIES.values())[seed % 3]
    spec = random_spec(rng, fam, cap=8, hi=6, density=0.15, normal=True)
    cd = real_to_complex(spec)
    assert reality_check(cd, named=False).is_zero()
    n = fam.n
    ref = spec.perturbation._like({k: v for k, v in spec.perturbation.terms.items()
                                   if sum(k[:n]) <= 3 and sum(k[n:2 * n]) <= 3})
    assert phi_from_S(cd) == ref


def test_phi33_alternative_sign_fails_round_trip():
    # a u-dependent Phi11 makes the S'11(S'11 Y) term visible in bidegree (3, 3)
    p11 = bmono(1, 1, (1,), (1,), (1,))
    spec = sphere_spec(p11)
    cd = real_to_complex(spec)
    assert phi_from_S(cd) == p11
    alt = phi_from_S(cd, alt_sign=True)
    assert alt != p11 and alt.extract_pq(3, 3)
