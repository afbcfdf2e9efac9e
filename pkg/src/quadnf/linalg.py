"""Exact dense linear algebra over Q on top of python-flint.

Complex-linear problems are handled by their realification, so everything
here works with rational matrices only.
"""

from __future__ import annotations

from flint import fmpq, fmpq_mat
from gmpy2 import mpq


def to_fmpq(x) -> fmpq:
    if isinstance(x, fmpq):
        return x
    if type(x) is mpq:
        return fmpq(int(x.numerator), int(x.denominator))
    if isinstance(x, int):
        return fmpq(x)
    return fmpq(int(x.numerator), int(x.denominator))


def to_mpq(x: fmpq) -> mpq:
    return mpq(int(x.p), int(x.q))


def zeros(m: int, n: int) -> fmpq_mat:
    return fmpq_mat(m, n)


def identity(n: int) -> fmpq_mat:
    out = fmpq_mat(n, n)
    for i in range(n):
        out[i, i] = 1
    return out


def from_rows(rows, ncols=None) -> fmpq_mat:
    rows = list(rows)
    m = len(rows)
    n = ncols if ncols is not None else (len(rows[0]) if rows else 0)
    out = fmpq_mat(m, n)
    for i, r in enumerate(rows):
        for j, x in enumerate(r):
            if x:
                out[i, j] = to_fmpq(x)
    return out


def from_sparse(m: int, n: int, entries) -> fmpq_mat:
    """Build from ``{(i, j): value}`` (or an iterable of triples)."""
    out = fmpq_mat(m, n)
    items = entries.items() if hasattr(entries, "items") else ((ij[:2], ij[2]) for ij in entries)
    for (i, j), x in items:
        if x:
            out[i, j] = out[i, j] + to_fmpq(x)
    return out


def column(vec) -> fmpq_mat:
    vec = list(vec)
    out = fmpq_mat(len(vec), 1)
    for i, x in enumerate(vec):
        if x:
            out[i, 0] = to_fmpq(x)
    return out


def col_to_list(v: fmpq_mat):
    return [v[i, 0] for i in range(v.nrows())]


def is_zero(A: fmpq_mat) -> bool:
    return all(not A[i, j] for i in range(A.nrows()) for j in range(A.ncols()))


def submatrix(A: fmpq_mat, rows, cols) -> fmpq_mat:
    out = fmpq_mat(len(rows), len(cols))
    for a, i in enumerate(rows):
        for b, j in enumerate(cols):
            x = A[i, j]
            if x:
                out[a, b] = x
    return out


def vstack(blocks, ncols: int) -> fmpq_mat:
    m = sum(B.nrows() for B in blocks)
    out = fmpq_mat(m, ncols)
    r = 0
    for B in blocks:
        for i in range(B.nrows()):
            for j in range(ncols):
                x = B[i, j]
                if x:
                    out[r + i, j] = x
        r += B.nrows()
    return out


def rref(A: fmpq_mat):
    """Return ``(R, rank, pivot_columns)``."""
    if A.nrows() == 0 or A.ncols() == 0:
        return A, 0, []
    R, rk = A.rref()
    piv = []
    j = 0
    for i in range(rk):
        while not R[i, j]:
            j += 1
        piv.append(j)
        j += 1
    return R, rk, piv


def rank(A: fmpq_mat) -> int:
    if A.nrows() == 0 or A.ncols() == 0:
        return 0
    return A.rank()


def nullspace(A: fmpq_mat) -> fmpq_mat:
    """Columns spanning the right null space of ``A`` (n x k)."""
    n = A.ncols()
    R, rk, piv = rref(A)
    free = [j for j in range(n) if j not in set(piv)]
    K = fmpq_mat(n, len(free))
    for c, fj in enumerate(free):
        K[fj, c] = 1
        for i, pj in enumerate(piv):
            x = R[i, fj]
            if x:
                K[pj, c] = -x
    return K


def independent_rows(A: fmpq_mat):
    """Indices of a maximal set of linearly independent rows (first-found)."""
    if A.nrows() == 0 or A.ncols() == 0:
        return []
    _, _, piv = rref(A.transpose())
    return piv


def solve_weighted_min_norm(A: fmpq_mat, b: fmpq_mat, row_w, col_w):
    """Weighted least squares with minimal weighted norm.

    Minimises ``|A x - b|`` in the diagonal metric ``row_w`` and, among the
    minimisers, ``|x|`` in the metric ``col_w``.  Returns ``(x, r)`` with
    ``r = b - A x``.  The minimiser is characterised by ``A x = P b`` where
    ``P`` is the ``row_w``-orthogonal projection on the range of ``A``, and
    ``x`` is ``col_w``-orthogonal to ``ker A``.
    """
    m, n = A.nrows(), A.ncols()
    if n == 0 or m == 0:
        return fmpq_mat(n, b.ncols()), b
    Wr = diag(row_w)
    At_W = A.transpose() * Wr
    N = At_W * A
    rhs = At_W * b
    x0 = particular_solution(N, rhs)
    x = project_out_kernel(x0, nullspace(A), col_w)
    return x, b - A * x


def diag(w) -> fmpq_mat:
    w = list(w)
    out = fmpq_mat(len(w), len(w))
    for i, x in enumerate(w):
        out[i, i] = to_fmpq(x)
    return out


def particular_solution(A: fmpq_mat, b: fmpq_mat) -> fmpq_mat:
    """Some solution of a consistent system ``A x = b`` (free variables 0)."""
    n = A.ncols()
    rows = independent_rows(A)
    x = fmpq_mat(n, b.ncols())
    if not rows:
        return x
    sub = submatrix(A, rows, list(range(n)))
    _, rk, piv = rref(sub)
    B = submatrix(sub, list(range(rk)), piv)
    y = B.solve(submatrix(b, rows, list(range(b.ncols()))))
    for i, j in enumerate(piv):
        for c in range(b.ncols()):
            x[j, c] = y[i, c]
    return x


def kernel_projector(K: fmpq_mat, w) -> fmpq_mat:
    """``I - K (K^T W K)^{-1} K^T W``: ``w``-orthogonal projection off ``span K``."""
    n = K.nrows()
    if K.ncols() == 0:
        return identity(n)
    W = diag(w)
    KtW = K.transpose() * W
    return identity(n) - K * ((KtW * K).inv() * KtW)


def project_out_kernel(x: fmpq_mat, K: fmpq_mat, w) -> fmpq_mat:
    if K.ncols() == 0:
        return x
    W = diag(w)
    KtW = K.transpose() * W
    return x - K * (KtW * K).solve(KtW * x)
