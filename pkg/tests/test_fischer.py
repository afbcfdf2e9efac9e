import random

import pytest
from gmpy2 import mpq
from hypothesis import given

from conftest import FAMILIES, bmono, g, hmono, random_bigraded, random_holo, seeds
from quadnf import linalg
from quadnf.coeffs import GaussRat
from quadnf.fischer import (
    FischerError,
    GradedPiece,
    assemble_block,
    derivative_multiplication_adjoint_check,
    fischer_inner,
    fischer_inner_split,
    fischer_norm2,
    minimal_norm_solve,
    probe_block,
)
from quadnf.gseries import BigradedSeries
from quadnf.quadric import Kstar_apply, K_apply, delta_apply, deltastar_apply


# -- inner products -----------------------------------------------------------

def test_normalized_product_of_z1z2():
    a = hmono(2, 1, (1, 1), (0,))
    assert fischer_inner(a, a, normalized=True) == GaussRat(mpq(1, 2))


def test_distinct_monomials_orthogonal():
    assert fischer_inner(hmono(2, 1, (2, 0), (0,)), hmono(2, 1, (0, 2), (0,))) == 0


def test_standard_weight_is_alpha_factorial():
    a = hmono(3, 1, (3, 2, 0), (0,))
    assert fischer_inner(a, a) == GaussRat(12)


def test_inner_is_sesquilinear():
    a = bmono(1, 1, (1,), (1,), (0,), c=g(0, 1))
    b = bmono(1, 1, (1,), (1,), (0,))
    assert fischer_inner(a, b) == g(0, 1)
    assert fischer_inner(b, a) == g(0, -1)


def test_components_orthogonal():
    a = bmono(1, 2, (1,), (0,), (0, 0), s=2, j=0)
    b = bmono(1, 2, (1,), (0,), (0, 0), s=2, j=1)
    assert fischer_inner(a, b) == 0


def test_layout_mismatch():
    with pytest.raises(FischerError):
        fischer_inner(bmono(1, 1, (1,), (0,), (0,)), hmono(1, 1, (1,), (0,)))


# -- D_gamma versus multiplication by u^gamma ------------------------------------

def test_dgamma_examples():
    u = bmono(1, 1, (0,), (0,), (1,))
    one = bmono(1, 1, (0,), (0,), (0,))
    assert derivative_multiplication_adjoint_check((1,), u, one) == (1, 1)
    u2 = bmono(1, 1, (0,), (0,), (2,))
    assert derivative_multiplication_adjoint_check((2,), u2, one) == (2, 2)
    assert derivative_multiplication_adjoint_check((1,), one, u2 + one) == (0, 0)


# -- blocks -------------------------------------------------------------------

def test_K_block_sphere():
    fam = FAMILIES["sphere"]
    src = GradedPiece.holo(1, 1, 1, 1, 0)
    dst = GradedPiece.bigraded(1, 1, 1, 1, 1, 0)
    blk = assemble_block("K", src, dst, fam)
    assert blk.matrix == [[GaussRat(1)]]


def test_delta_on_constants_is_zero():
    fam = FAMILIES["n2d2"]
    src = GradedPiece.bigraded(2, 2, 1, 1, 1, 0)
    dst = GradedPiece.bigraded(2, 2, 1, 2, 2, 0)
    blk = assemble_block("Delta", src, dst, fam)
    assert linalg.is_zero(blk.real)


def test_composition_is_functorial():
    fam = FAMILIES["n2d2"]
    a = GradedPiece.bigraded(2, 2, 1, 2, 2, 1)
    b = GradedPiece.bigraded(2, 2, 1, 1, 1, 2)
    ds = assemble_block("Deltastar", a, b, fam)
    dl = assemble_block("Delta", b, a, fam)
    assert assemble_block(["Deltastar", "Delta"], a, a, fam) == dl @ ds


def test_incompatible_grading():
    fam = FAMILIES["sphere"]
    src = GradedPiece.holo(1, 1, 1, 1, 0)
    dst = GradedPiece.bigraded(1, 1, 1, 2, 1, 0)
    with pytest.raises(FischerError):
        assemble_block("K", src, dst, fam)


def test_unknown_operator():
    src = GradedPiece.holo(1, 1, 1, 1, 0)
    with pytest.raises(FischerError):
        assemble_block("nope", src, src, FAMILIES["sphere"])


# -- minimal-norm solve -------------------------------------------------------

def test_solve_invertible():
    fam = FAMILIES["sphere"]
    blk = assemble_block("K", GradedPiece.holo(1, 1, 1, 2, 1), GradedPiece.bigraded(1, 1, 1, 2, 1, 1), fam)
    rhs = bmono(1, 1, (2,), (1,), (1,), c=g(3, -2))
    x, r = minimal_norm_solve(blk, rhs)
    assert r.is_zero()
    assert x == hmono(1, 1, (2,), (1,), c=g(3, -2), cap=x.cap)


def test_solve_zero_map():
    src = GradedPiece.bigraded(1, 1, 1, 1, 1, 0)
    dst = GradedPiece.bigraded(1, 1, 1, 2, 2, 0)
    blk = probe_block(lambda f: BigradedSeries(1, 1, 1, 4), src, dst)
    rhs = bmono(1, 1, (2,), (2,), (0,), c=g(1, 1))
    x, r = minimal_norm_solve(blk, rhs)
    assert x.is_zero() and r == rhs


@pytest.mark.parametrize("m", [1, 2, 3])
def test_K_residual_spans_kernel_of_adjoint(m):
    fam = FAMILIES["n2d2"]
    src = GradedPiece.holo(2, 2, 2, m, 0)
    dst = GradedPiece.bigraded(2, 2, 2, m, 1, 0)
    blk = assemble_block("K", src, dst, fam)
    assert blk.rank() == 2 * src.dim
    adj = blk.adjoint()
    assert linalg.nullspace(adj.real).ncols() == 2 * (dst.dim - src.dim)
    rng = random.Random(m)
    rhs = dst.from_complex([GaussRat(rng.randint(-4, 4), rng.randint(-4, 4)) for _ in range(dst.dim)])
    x, r = minimal_norm_solve(blk, rhs)
    assert blk.apply(x) + r == rhs
    assert Kstar_apply(r, fam).is_zero()


def test_solution_orthogonal_to_kernel():
    fam = FAMILIES["n2d1"]
    src = GradedPiece.bigraded(2, 1, 1, 2, 2, 0)
    dst = GradedPiece.bigraded(2, 1, 1, 1, 1, 1)
    blk = assemble_block("Deltastar", src, dst, fam)
    rng = random.Random(4)
    rhs = dst.from_complex([GaussRat(rng.randint(-4, 4), rng.randint(-4, 4)) for _ in range(dst.dim)])
    x, r = minimal_norm_solve(blk, rhs)
    K = blk.kernel()
    xs = src.to_real(x)
    w = src.weights()
    for c in range(K.ncols()):
        assert sum(linalg.to_mpq(K[i, c]) * w[i] * xs[i] for i in range(len(xs))) == 0
    img = [blk.apply(b) for b in src.real_basis_series()]
    for y in img:
        assert fischer_inner(r, y).re == 0


# -- properties ---------------------------------------------------------------

@given(seeds)
def test_adjoint_identities(seed):
    rng = random.Random(seed)
    fam = list(FAMILIES.values())[seed % 3]
    n, d = fam.n, fam.d
    f = random_holo(rng, n, d, s=n, cap=5)
    P = random_bigraded(rng, n, d, s=d, cap=6, nterms=30)
    P = P._like({k: v for k, v in P.terms.items() if sum(k[n:2 * n]) == 1})
    assert fischer_inner_split(K_apply(f, fam), P) == fischer_inner_split(f.to_bigraded().with_cap(6),
                                                                          Kstar_apply(P, fam))
    phi = random_bigraded(rng, n, d, cap=6, nterms=15)
    psi = random_bigraded(rng, n, d, cap=6, nterms=15)
    assert fischer_inner(delta_apply(phi, fam), psi) == fischer_inner(phi, deltastar_apply(psi, fam))


@given(seeds)
def test_positive_definite(seed):
    rng = random.Random(seed)
    a = random_bigraded(rng, 2, 2, s=2, nterms=6)
    if a:
        assert fischer_norm2(a) > 0 and fischer_norm2(a, True) > 0


@given(seeds)
def test_adjoint_kernels_agree_for_both_products(seed):
    rng = random.Random(seed)
    fam = list(FAMILIES.values())[seed % 3]
    n, d = fam.n, fam.d
    p, q, c = rng.randint(1, 2), rng.randint(1, 2), rng.randint(0, 1)
    src = GradedPiece.bigraded(n, d, 1, p, q, c + 1)
    dst = GradedPiece.bigraded(n, d, 1, p + 1, q + 1, c)
    blk = assemble_block("Delta", src, dst, fam)
    k1 = blk.adjoint(False).kernel()
    k2 = blk.adjoint(True).kernel()
    assert k1.ncols() == k2.ncols()
    if k1.ncols():
        both = linalg.from_rows([[k1[i, j] for j in range(k1.ncols())] + [k2[i, j] for j in range(k2.ncols())]
                                 for i in range(k1.nrows())])
        assert linalg.rank(both) == k1.ncols()
