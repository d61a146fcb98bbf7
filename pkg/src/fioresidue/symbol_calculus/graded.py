"""Graded containers shared by classical and parametric symbols.

An entry ``(e, deg) -> M`` stands for ``M(x, p) * E**e`` where
``E = (h_m + mu**m)**-1`` and ``M`` is a fiber matrix (row-major tuple) of
``RadialRational`` functions homogeneous of degree ``deg``. The joint degree
in ``(x, p, mu)`` is ``deg - e*m``. Classical symbols only use ``e == 0``.
"""

from __future__ import annotations

from math import factorial

from .rational import IMAG, ONE, RadialRational, exact


def mat_zero(nvars, f):
    return tuple(RadialRational.zero(nvars) for _ in range(f * f))


def mat_is_zero(m):
    return all(r.is_zero() for r in m)


def mat_add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def mat_scale(a, c):
    c = exact(c)
    return tuple(x.scale(c) for x in a)


def mat_mul(a, b, f):
    if f == 1:
        return (a[0] * b[0],)
    out = []
    for i in range(f):
        for j in range(f):
            acc = RadialRational.zero(a[0].nvars)
            for k in range(f):
                x, y = a[i * f + k], b[k * f + j]
                if not x.is_zero() and not y.is_zero():
                    acc = acc + x * y
            out.append(acc)
    return tuple(out)


def mat_map(a, fn):
    return tuple(fn(x) for x in a)


class Graded:
    """Sparse sum of ``M * E**e`` terms, truncated below a joint degree."""

    __slots__ = ("nvars", "f", "m", "principal", "entries")

    def __init__(self, nvars, f, m, principal, entries):
        self.nvars = nvars
        self.f = f
        self.m = m
        self.principal = principal
        self.entries = {k: v for k, v in entries.items() if not mat_is_zero(v)}

    def _like(self, entries):
        return Graded(self.nvars, self.f, self.m, self.principal, entries)

    def jdeg(self, key):
        e, d = key
        return d - e * self.m

    def top(self):
        return max((self.jdeg(k) for k in self.entries), default=None)

    def truncate(self, floor):
        if floor is None:
            return self
        return self._like({k: v for k, v in self.entries.items() if self.jdeg(k) >= floor})

    def __add__(self, other):
        out = dict(self.entries)
        for k, v in other.entries.items():
            out[k] = mat_add(out[k], v) if k in out else v
        return self._like(out)

    def __neg__(self):
        return self._like({k: mat_scale(v, -1) for k, v in self.entries.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return self._like({k: mat_scale(v, c) for k, v in self.entries.items()})

    def mul(self, other, floor=None):
        out = {}
        for (e1, d1), a in self.entries.items():
            for (e2, d2), b in other.entries.items():
                key = (e1 + e2, d1 + d2)
                if floor is not None and self.jdeg(key) < floor:
                    continue
                prod = mat_mul(a, b, self.f)
                out[key] = mat_add(out[key], prod) if key in out else prod
        return self._like(out)

    def diff(self, i):
        out = {}

        def put(key, val):
            out[key] = mat_add(out[key], val) if key in out else val

        dh = None
        for (e, d), a in self.entries.items():
            put((e, d - 1), mat_map(a, lambda r: r.diff(i)))
            if e != 0:
                if dh is None:
                    dh = self.principal.diff(i)
                put((e + 1, d + self.m - 1), mat_map(a, lambda r: (r * dh).scale(-e)))
        return self._like(out)

    def derivatives(self, variables, max_order):
        """All mixed derivatives over ``variables`` up to ``max_order``.

        Returns a dict keyed by multi-indices (tuples aligned with
        ``variables``).
        """
        k = len(variables)
        table = {(0,) * k: self}
        for total in range(1, max_order + 1):
            for alpha in _multi_indices(k, total):
                # differentiate a lower entry along the first nonzero slot
                j = next(t for t in range(k) if alpha[t])
                lower = list(alpha)
                lower[j] -= 1
                table[alpha] = table[tuple(lower)].diff(variables[j])
        return table


def _multi_indices(k, total):
    if k == 0:
        if total == 0:
            yield ()
        return
    if k == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _multi_indices(k - 1, total - first):
            yield (first,) + rest


def multi_indices(k, max_total):
    for total in range(max_total + 1):
        yield from _multi_indices(k, total)


def alpha_factorial(alpha):
    out = 1
    for a in alpha:
        out *= factorial(a)
    return out


def compose_left(a: Graded, b: Graded, n: int, floor: int) -> Graded:
    """Left-quantization composition sum_alpha (1/alpha!) d_p^alpha a * D_x^alpha b."""
    ta, tb = a.top(), b.top()
    if ta is None or tb is None:
        return a._like({})
    max_order = ta + tb - floor
    if max_order < 0:
        return a._like({})
    xs = list(range(n))
    ps = list(range(n, 2 * n))
    da = a.derivatives(ps, max_order)
    db = b.derivatives(xs, max_order)
    out = a._like({})
    minus_i = -IMAG
    for alpha in multi_indices(n, max_order):
        order = sum(alpha)
        c = minus_i**order / alpha_factorial(alpha) if order else ONE
        term = da[alpha].mul(db[alpha], floor)
        if term.entries:
            out = out + term.scale(c)
    return out


def exp_mixed(a: Graded, n: int, c, floor: int) -> Graded:
    """Apply exp(c * sum_j d_{x_j} d_{p_j}) truncated at the joint degree ``floor``."""
    top = a.top()
    if top is None:
        return a
    max_order = (top - floor) // 2
    c = exact(c)
    out = a._like({})
    for alpha in multi_indices(n, max(max_order, 0)):
        term = a
        for j, k in enumerate(alpha):
            for _ in range(k):
                term = term.diff(j).diff(n + j)
        order = sum(alpha)
        coeff = c**order / alpha_factorial(alpha) if order else ONE
        out = out + term.truncate(floor).scale(coeff)
    return out.truncate(floor)
