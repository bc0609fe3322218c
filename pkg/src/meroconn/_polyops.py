"""Dense univariate polynomial arithmetic over an arbitrary coefficient field.

Polynomials are tuples of field elements, constant term first, with no trailing
zeros (the zero polynomial is the empty tuple).  All functions take the field
object ``F`` explicitly; nothing here mutates its arguments.  This module is
the shared engine under both the rational-function fields and the public
polynomial API.
"""

from __future__ import annotations


def trim(F, cs):
    cs = list(cs)
    while cs and F.is_zero(cs[-1]):
        cs.pop()
    return tuple(cs)


def deg(cs) -> int:
    """Degree; -1 for the zero polynomial."""
    return len(cs) - 1


def const(F, c):
    return () if F.is_zero(c) else (c,)


def add(F, a, b):
    n = max(len(a), len(b))
    out = []
    for i in range(n):
        x = a[i] if i < len(a) else F.zero
        y = b[i] if i < len(b) else F.zero
        out.append(F.add(x, y))
    return trim(F, out)


def neg(F, a):
    return tuple(F.neg(c) for c in a)


def sub(F, a, b):
    return add(F, a, neg(F, b))


def mul(F, a, b):
    if not a or not b:
        return ()
    out = [F.zero] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if F.is_zero(x):
            continue
        for j, y in enumerate(b):
            out[i + j] = F.add(out[i + j], F.mul(x, y))
    return trim(F, out)


def scale(F, a, c):
    if F.is_zero(c):
        return ()
    return trim(F, [F.mul(x, c) for x in a])


def shift(F, a, k: int):
    """Multiply by the k-th power of the variable (k >= 0)."""
    if not a:
        return ()
    return (F.zero,) * k + tuple(a)


def divmod_(F, a, b):
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    q = [F.zero] * max(0, len(a) - len(b) + 1)
    r = list(a)
    inv_lead = F.inv(b[-1])
    while len(r) >= len(b) and r:
        if F.is_zero(r[-1]):
            r.pop()
            continue
        k = len(r) - len(b)
        c = F.mul(r[-1], inv_lead)
        q[k] = c
        for i, bc in enumerate(b):
            r[k + i] = F.sub(r[k + i], F.mul(c, bc))
        r.pop()
    return trim(F, q), trim(F, r)


def pmod(F, a, b):
    return divmod_(F, a, b)[1]


def monic(F, a):
    if not a:
        return ()
    lead = a[-1]
    if F.eq(lead, F.one):
        return tuple(a)
    inv = F.inv(lead)
    return tuple(F.mul(c, inv) for c in a)


def gcd(F, a, b):
    """Monic gcd via the Euclidean algorithm."""
    while b:
        a, b = b, pmod(F, a, b)
    return monic(F, a)


def xgcd(F, a, b):
    """Extended gcd: returns (g, s, t) monic g with s*a + t*b = g."""
    r0, r1 = tuple(a), tuple(b)
    s0, s1 = (F.one,), ()
    t0, t1 = (), (F.one,)
    while r1:
        q, r = divmod_(F, r0, r1)
        r0, r1 = r1, r
        s0, s1 = s1, sub(F, s0, mul(F, q, s1))
        t0, t1 = t1, sub(F, t0, mul(F, q, t1))
    if not r0:
        return (), s0, t0
    inv = F.inv(r0[-1])
    return monic(F, r0), scale(F, s0, inv), scale(F, t0, inv)


def deriv(F, a):
    return trim(F, [F.mul(F.from_int(i), a[i]) for i in range(1, len(a))])


def evaluate(F, a, x):
    acc = F.zero
    for c in reversed(a):
        acc = F.add(F.mul(acc, x), c)
    return acc


def pow_(F, a, n: int):
    out = (F.one,)
    base = tuple(a)
    while n:
        if n & 1:
            out = mul(F, out, base)
        base = mul(F, base, base)
        n >>= 1
    return out


def compose(F, a, b):
    """a(b(x))."""
    acc = ()
    for c in reversed(a):
        acc = add(F, mul(F, acc, b), const(F, c))
    return acc


def resultant(F, a, b):
    """Resultant via the Euclidean remainder sequence (exact over a field)."""
    if not a or not b:
        return F.zero
    res = F.one
    sign_flip = False
    while True:
        da, db = deg(a), deg(b)
        if db == 0:
            res = F.mul(res, F.pow(b[0], da))
            break
        _, r = divmod_(F, a, b)
        if not r:
            return F.zero
        # res(a, b) = (-1)^(da*db) * lc(b)^(da - dr) * res(b, r)
        if (da * db) % 2 == 1:
            sign_flip = not sign_flip
        res = F.mul(res, F.pow(b[-1], da - deg(r)))
        a, b = b, r
    if sign_flip:
        res = F.neg(res)
    return res


def discriminant(F, a):
    n = deg(a)
    if n < 1:
        return F.zero
    r = resultant(F, a, deriv(F, a))
    r = F.div(r, a[-1])
    if (n * (n - 1) // 2) % 2 == 1:
        r = F.neg(r)
    return r


def squarefree_part(F, a):
    if deg(a) <= 0:
        return monic(F, a)
    g = gcd(F, a, deriv(F, a))
    q, _ = divmod_(F, a, g)
    return monic(F, q)


def yun_squarefree(F, a):
    """Yun's squarefree decomposition: list of (factor, multiplicity).

    Characteristic zero only.  Factors are monic, pairwise coprime, and
    ``prod f_i^{m_i}`` differs from the input by the leading unit.
    """
    if deg(a) <= 0:
        return []
    a = monic(F, a)
    da = deriv(F, a)
    g = gcd(F, a, da)
    c, _ = divmod_(F, a, g)
    d = sub(F, divmod_(F, da, g)[0], deriv(F, c))
    out = []
    i = 1
    while deg(c) > 0:
        p = gcd(F, c, d)
        if deg(p) > 0:
            out.append((p, i))
        c, _ = divmod_(F, c, p)
        d = sub(F, divmod_(F, d, p)[0], deriv(F, c))
        i += 1
    return out
