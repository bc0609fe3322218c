"""Exact dense linear algebra over the scalar field objects.

Matrices are plain lists of lists of raw field elements; the field object
is passed alongside.  Everything is fraction-free only in the sense of
being exact; Gaussian elimination divides freely since all our fields do.
"""

from __future__ import annotations

from .errors import MeroconnError
from .polynomials import Poly


def identity(F, n):
    return [[F.one if i == j else F.zero for j in range(n)] for i in range(n)]


def zeros(F, n, m=None):
    m = n if m is None else m
    return [[F.zero for _ in range(m)] for _ in range(n)]


def add(F, A, B):
    return [[F.add(a, b) for a, b in zip(r1, r2)] for r1, r2 in zip(A, B)]


def sub(F, A, B):
    return [[F.sub(a, b) for a, b in zip(r1, r2)] for r1, r2 in zip(A, B)]


def scale(F, c, A):
    return [[F.mul(c, a) for a in row] for row in A]


def mul(F, A, B):
    n, k, m = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = F.zero
            for l in range(k):
                acc = F.add(acc, F.mul(A[i][l], B[l][j]))
            row.append(acc)
        out.append(row)
    return out


def mat_vec(F, A, v):
    return [
        _dot(F, row, v)
        for row in A
    ]


def _dot(F, row, v):
    acc = F.zero
    for a, b in zip(row, v):
        acc = F.add(acc, F.mul(a, b))
    return acc


def transpose(A):
    return [list(col) for col in zip(*A)]


def trace(F, A):
    acc = F.zero
    for i in range(len(A)):
        acc = F.add(acc, A[i][i])
    return acc


def solve(F, A, B):
    """Solve A X = B exactly; B is a matrix of column vectors."""
    n = len(A)
    M = [list(row) + list(brow) for row, brow in zip(A, B)]
    w = len(B[0])
    for col in range(n):
        piv = None
        for r in range(col, n):
            if not F.is_zero(M[r][col]):
                piv = r
                break
        if piv is None:
            raise MeroconnError("singular matrix in exact solve")
        M[col], M[piv] = M[piv], M[col]
        inv = F.inv(M[col][col])
        M[col] = [F.mul(inv, a) for a in M[col]]
        for r in range(n):
            if r == col or F.is_zero(M[r][col]):
                continue
            f = M[r][col]
            M[r] = [F.sub(a, F.mul(f, b)) for a, b in zip(M[r], M[col])]
    return [row[n : n + w] for row in M]


def inv(F, A):
    return solve(F, A, identity(F, len(A)))


def det(F, A):
    n = len(A)
    M = [list(row) for row in A]
    out = F.one
    for col in range(n):
        piv = None
        for r in range(col, n):
            if not F.is_zero(M[r][col]):
                piv = r
                break
        if piv is None:
            return F.zero
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            out = F.neg(out)
        out = F.mul(out, M[col][col])
        inv_p = F.inv(M[col][col])
        for r in range(col + 1, n):
            if F.is_zero(M[r][col]):
                continue
            f = F.mul(M[r][col], inv_p)
            M[r] = [F.sub(a, F.mul(f, b)) for a, b in zip(M[r], M[col])]
    return out


def rank(F, A):
    if not A:
        return 0
    M = [list(row) for row in A]
    n, m = len(M), len(M[0])
    r = 0
    for col in range(m):
        piv = None
        for i in range(r, n):
            if not F.is_zero(M[i][col]):
                piv = i
                break
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv_p = F.inv(M[r][col])
        for i in range(n):
            if i == r or F.is_zero(M[i][col]):
                continue
            f = F.mul(M[i][col], inv_p)
            M[i] = [F.sub(a, F.mul(f, b)) for a, b in zip(M[i], M[r])]
        r += 1
        if r == n:
            break
    return r


def kernel_vector(F, A):
    """One nonzero vector of the right kernel, or None if A is injective."""
    n = len(A)
    m = len(A[0]) if A else 0
    M = [list(row) for row in A]
    pivots = {}
    r = 0
    for col in range(m):
        piv = None
        for i in range(r, n):
            if not F.is_zero(M[i][col]):
                piv = i
                break
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv_p = F.inv(M[r][col])
        M[r] = [F.mul(inv_p, a) for a in M[r]]
        for i in range(n):
            if i == r or F.is_zero(M[i][col]):
                continue
            f = M[i][col]
            M[i] = [F.sub(a, F.mul(f, b)) for a, b in zip(M[i], M[r])]
        pivots[col] = r
        r += 1
    free = [c for c in range(m) if c not in pivots]
    if not free:
        return None
    c0 = free[0]
    v = [F.zero] * m
    v[c0] = F.one
    for col, row in pivots.items():
        v[col] = F.neg(M[row][c0])
    return v


def independent_columns(F, A, want=None):
    """Indices of a maximal (or size-`want`) independent column set."""
    n = len(A)
    m = len(A[0]) if A else 0
    M = [list(row) for row in A]
    chosen = []
    r = 0
    for col in range(m):
        piv = None
        for i in range(r, n):
            if not F.is_zero(M[i][col]):
                piv = i
                break
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv_p = F.inv(M[r][col])
        for i in range(r + 1, n):
            if F.is_zero(M[i][col]):
                continue
            f = F.mul(M[i][col], inv_p)
            M[i] = [F.sub(a, F.mul(f, b)) for a, b in zip(M[i], M[r])]
        chosen.append(col)
        r += 1
        if want is not None and r == want:
            break
    return chosen


def charpoly(F, A) -> Poly:
    """Monic characteristic polynomial det(T I - A), Faddeev-LeVerrier."""
    n = len(A)
    coeffs = [F.zero] * n + [F.one]
    M = [list(row) for row in A]
    for k in range(1, n + 1):
        c = F.neg(F.div(trace(F, M), F.from_fraction(k)))
        coeffs[n - k] = c
        if k < n:
            for i in range(n):
                M[i][i] = F.add(M[i][i], c)
            M = mul(F, A, M)
    return Poly(F, coeffs)


def eval_poly(F, p: Poly, A):
    """p(A) by Horner."""
    n = len(A)
    out = zeros(F, n)
    for c in reversed(p.coeffs):
        out = mul(F, A, out)
        for i in range(n):
            out[i][i] = F.add(out[i][i], c)
    return out
