import random

import pytest
from gmpy2 import mpq
from hypothesis import given

from conftest import FAMILIES, bmono, hmono, keys_of, null_combinations, random_bigraded, real_basis, seeds
from quadnf.coeffs import GaussRat
from quadnf.conditions import (
    check_CM,
    check_N0,
    check_N1,
    check_Nd,
    check_Noff,
    check_space,
    nd_residuals,
    noff_residuals,
)
from quadnf.gseries import BigradedSeries, SeriesError
from quadnf.quadric import Kstar_apply, cm_trace

SPHERE = FAMILIES["sphere"]


def zero(n=1, d=1):
    return BigradedSeries(n, d, d, 8)


def test_N0_examples():
    assert check_N0(bmono(1, 1, (1,), (1,), (1,))).passed
    z2 = bmono(1, 1, (2,), (0,), (0,))
    harm = z2 * bmono(1, 1, (0,), (0,), (1,))
    harm = harm + harm.conjugate()
    rep = check_N0(harm)
    assert not rep.passed and rep.residuals["N0"] == harm


def test_N0_residual_of_z_squared():
    # z^2 alone is not real-valued; the residual of its real part is itself
    z2 = bmono(1, 1, (2,), (0,), (0,))
    with pytest.raises(SeriesError):
        check_N0(z2)
    rep = check_N0(z2 + z2.conjugate())
    assert rep.residuals["N0"] == z2 + z2.conjugate()


def test_N1_examples():
    assert check_N1(zero(), SPHERE, 8).passed
    phi = bmono(1, 1, (2,), (1,), (0,)) + bmono(1, 1, (1,), (2,), (0,))
    rep = check_N1(phi, SPHERE, 8)
    assert not rep.passed
    assert rep.residuals["N1 K*Phi[2,1]"] == hmono(1, 1, (2,), (0,), c=GaussRat(mpq(1, 3))).to_bigraded()


def test_N1_kernel_element_passes():
    fam = FAMILIES["n2d2"]
    basis = []
    for j in range(2):
        basis += real_basis(2, 2, keys_of(2, 2, 2, 1, 0), s=2, j=j)
    good = null_combinations(basis, lambda b: [Kstar_apply(b.extract_pq(2, 1), fam)])
    assert good
    for phi in good:
        assert phi.extract_pq(2, 1)
        assert check_N1(phi, fam, 8).passed


def test_N1_respects_k_max():
    phi = bmono(1, 1, (3,), (1,), (0,)) + bmono(1, 1, (1,), (3,), (0,))
    assert check_N1(phi, SPHERE, 2).passed
    assert not check_N1(phi, SPHERE, 3).passed


def test_Nd_examples():
    assert check_Nd(zero(), SPHERE).passed
    rep = check_Nd(bmono(1, 1, (1,), (1,), (1,)), SPHERE)
    assert not rep.passed
    assert rep.residuals["Nd trace"] == bmono(1, 1, (0,), (0,), (2,), c=-6)


def test_Nd_solution_of_the_linear_conditions_passes():
    fam = FAMILIES["n2d1"]
    basis = (real_basis(2, 1, keys_of(2, 1, 1, 1, 2)) + real_basis(2, 1, keys_of(2, 1, 2, 2, 1))
             + real_basis(2, 1, keys_of(2, 1, 3, 3, 0)))
    good = null_combinations(basis, lambda b: list(nd_residuals(b, fam)))
    with_p11 = [phi for phi in good if phi.extract_pq(1, 1) and phi.extract_pq(3, 3)]
    assert with_p11
    for phi in good:
        assert check_Nd(phi, fam).passed


def test_Noff_examples():
    assert check_Noff(zero(), SPHERE).passed
    phi = bmono(1, 1, (2,), (2,), (1,)) + bmono(1, 1, (4,), (1,), (0,)) + bmono(1, 1, (1,), (4,), (0,))
    assert check_Noff(phi, SPHERE).passed


def test_Noff_random_generic_failure():
    rng = random.Random(3)
    fails = 0
    for _ in range(10):
        p = random_bigraded(rng, 1, 1, cap=9, nterms=40, min_wt=7)
        p = p.extract_pq(2, 3)
        phi = p + p.conjugate()
        if any(sum(k[2:]) for k in p.terms):
            fails += not check_Noff(phi, SPHERE).passed
    assert fails >= 5


def test_Noff_kernel_element_passes():
    fam = FAMILIES["n2d1"]
    basis = real_basis(2, 1, keys_of(2, 1, 2, 3, 2)) + real_basis(2, 1, keys_of(2, 1, 1, 2, 3))
    good = null_combinations(basis, lambda b: list(noff_residuals(b, fam)))
    assert good
    assert all(check_Noff(phi, fam).passed for phi in good)


def test_CM_examples():
    assert check_CM(zero(), SPHERE).passed
    phi = bmono(1, 1, (2,), (2,), (1,), c=3)
    rep = check_CM(phi, SPHERE)
    assert not rep.passed
    assert rep.residuals["CM T Phi22"] == bmono(1, 1, (1,), (1,), (1,), c=12)
    with pytest.raises(SeriesError):
        check_CM(zero(2, 2), FAMILIES["n2d2"])


def test_CM_traceless_passes():
    fam = FAMILIES["n2d1"]
    basis = real_basis(2, 1, keys_of(2, 1, 2, 2, 1))
    good = null_combinations(basis, lambda b: [cm_trace(b, fam)])
    assert good
    assert all(check_CM(phi, fam).passed for phi in good)


def test_CM_sphere_trace_is_isomorphism_on_22():
    # ker T on R_{2,2} is trivial for n = 1 in every u-degree
    for udeg in range(3):
        basis = real_basis(1, 1, keys_of(1, 1, 2, 2, udeg))
        assert null_combinations(basis, lambda b: [cm_trace(b, SPHERE)]) == []


def test_space_dispatch():
    phi = bmono(1, 1, (2,), (3,), (1,)) + bmono(1, 1, (3,), (2,), (1,))
    weak = check_space(phi, SPHERE, "weak")
    full = check_space(phi, SPHERE, "full")
    assert weak.passed and not full.passed
    with pytest.raises(ValueError):
        check_space(phi, SPHERE, "other")


def test_report_json():
    rep = check_space(bmono(1, 1, (1,), (1,), (1,)), SPHERE, "full", 8)
    js = rep.to_json()
    assert js["passed"] is False
    assert "Nd trace" in rep.failures()


@given(seeds)
def test_pass_iff_residuals_zero(seed):
    rng = random.Random(seed)
    p = random_bigraded(rng, 1, 1, cap=8, nterms=4)
    phi = p + p.conjugate()
    rep = check_space(phi, SPHERE, "full", 8)
    assert rep.passed == all(r.is_zero() for r in rep.residuals.values())
