"""Exact polynomials and radial rational functions on phase space.

Phase-space variables are ordered ``(x_1..x_n, p_1..p_n)``. A
``RadialRational`` is ``P / rho**R`` with ``rho = |x|^2 + |p|^2`` and ``P``
a polynomial; it is kept reduced, i.e. ``rho`` does not divide ``P`` unless
``R == 0``. Reduced forms are unique, so equality and zero tests are exact.

Coefficients are Gaussian rationals. Floats are converted exactly through
their binary expansion, so no rounding ever happens inside the calculus.
"""

from __future__ import annotations

import numbers
from fractions import Fraction
from math import factorial

import numpy as np
from sympy.polys.domains import QQ, QQ_I

GaussQ = type(QQ_I(0, 0))
ZERO = QQ_I(0, 0)
ONE = QQ_I(1, 0)
IMAG = QQ_I(0, 1)

__all__ = [
    "exact",
    "to_complex",
    "Poly",
    "RadialRational",
]


def _q(x):
    if isinstance(x, QQ.dtype):
        return x
    if isinstance(x, numbers.Integral):
        return QQ(int(x))
    f = Fraction(float(x)) if not isinstance(x, Fraction) else x
    return QQ(f.numerator, f.denominator)


def exact(z) -> GaussQ:
    """Convert a Python/numpy number to an exact Gaussian rational."""
    if isinstance(z, GaussQ):
        return z
    if isinstance(z, (complex, np.complexfloating)):
        if not (np.isfinite(z.real) and np.isfinite(z.imag)):
            raise ValueError(f"non-finite coefficient {z!r}")
        return QQ_I(_q(z.real), _q(z.imag))
    if isinstance(z, float) and not np.isfinite(z):
        raise ValueError(f"non-finite coefficient {z!r}")
    return QQ_I(_q(z), QQ(0))


def to_complex(c) -> complex:
    c = exact(c)
    return complex(float(c.x), float(c.y))


def _add_exp(a, b):
    return tuple(i + j for i, j in zip(a, b))


class Poly:
    """Sparse polynomial in ``nvars`` variables with exact coefficients."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        clean = {}
        if terms:
            for e, c in terms.items():
                c = exact(c)
                if c != ZERO:
                    if len(e) != nvars:
                        raise ValueError("exponent length does not match nvars")
                    clean[tuple(int(k) for k in e)] = c
        self.terms = clean

    @classmethod
    def constant(cls, nvars, c=1):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars, i):
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): 1})

    @classmethod
    def rho(cls, nvars):
        out = {}
        for i in range(nvars):
            e = [0] * nvars
            e[i] = 2
            out[tuple(e)] = 1
        return cls(nvars, out)

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "Poly(0)"
        parts = [f"({c})*{e}" for e, c in sorted(self.terms.items())]
        return "Poly(" + " + ".join(parts) + ")"

    def degrees(self):
        return {sum(e) for e in self.terms}

    def __add__(self, other):
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, ZERO) + c
        return Poly(self.nvars, out)

    def __neg__(self):
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = exact(c)
        if c == ZERO:
            return Poly(self.nvars)
        return Poly(self.nvars, {e: c * v for e, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return self.scale(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = _add_exp(e1, e2)
                out[e] = out.get(e, ZERO) + c1 * c2
        return Poly(self.nvars, out)

    def diff(self, i: int):
        out = {}
        for e, c in self.terms.items():
            k = e[i]
            if k:
                e2 = list(e)
                e2[i] = k - 1
                out[tuple(e2)] = c * k
        return Poly(self.nvars, out)

    def homogeneous_parts(self):
        parts = {}
        for e, c in self.terms.items():
            parts.setdefault(sum(e), {})[e] = c
        return {d: Poly(self.nvars, t) for d, t in parts.items()}

    def substitute_linear(self, forms):
        """Replace variable ``i`` by the polynomial ``forms[i]`` (any polys)."""
        nv = forms[0].nvars if forms else self.nvars
        cache = {}

        def power(i, k):
            key = (i, k)
            if key not in cache:
                cache[key] = Poly.constant(nv) if k == 0 else power(i, k - 1) * forms[i]
            return cache[key]

        out = Poly(nv)
        for e, c in self.terms.items():
            term = Poly.constant(nv, c)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            out = out + term
        return out

    def drop_variables(self, keep):
        """Set every variable not in ``keep`` to zero; renumber the rest."""
        keep = list(keep)
        out = {}
        for e, c in self.terms.items():
            if any(e[i] for i in range(self.nvars) if i not in keep):
                continue
            out[tuple(e[i] for i in keep)] = c
        return Poly(len(keep), out)

    def divide_by_rho(self):
        """Exact quotient by rho, or ``None`` when rho does not divide."""
        if not self.terms:
            return Poly(self.nvars)
        nv = self.nvars
        rest = {}
        for i in range(1, nv):
            e = [0] * nv
            e[i] = 2
            rest[tuple(e)] = ONE
        rest = Poly(nv, rest)
        # group by the power of the first variable
        cols = {}
        for e, c in self.terms.items():
            cols.setdefault(e[0], {})[(0,) + e[1:]] = c
        cols = {k: Poly(nv, v) for k, v in cols.items()}
        top = max(cols)
        quotient = {}
        for k in range(top, 1, -1):
            ck = cols.get(k)
            if ck is None or ck.is_zero():
                continue
            quotient[k - 2] = ck
            cols[k - 2] = cols.get(k - 2, Poly(nv)) - rest * ck
        for k in (0, 1):
            if k in cols and not cols[k].is_zero():
                return None
        out = {}
        for k, q in quotient.items():
            for e, c in q.terms.items():
                out[(k,) + e[1:]] = c
        return Poly(nv, out)

    def evaluate(self, points):
        """Evaluate at ``points`` of shape (..., nvars)."""
        points = np.asarray(points, dtype=complex)
        out = np.zeros(points.shape[:-1], dtype=complex)
        for e, c in self.terms.items():
            term = np.full(points.shape[:-1], to_complex(c))
            for i, k in enumerate(e):
                if k:
                    term = term * points[..., i] ** k
            out += term
        return out


class RadialRational:
    """Reduced quotient ``num / rho**radpow``."""

    __slots__ = ("num", "radpow")

    def __init__(self, num: Poly, radpow: int = 0, reduce: bool = True):
        if radpow < 0:
            num = num * _rho_power(num.nvars, -radpow)
            radpow = 0
        if reduce:
            while radpow > 0 and num.terms:
                q = num.divide_by_rho()
                if q is None:
                    break
                num, radpow = q, radpow - 1
            if not num.terms:
                radpow = 0
        self.num = num
        self.radpow = radpow

    @property
    def nvars(self):
        return self.num.nvars

    @classmethod
    def zero(cls, nvars):
        return cls(Poly(nvars))

    @classmethod
    def constant(cls, nvars, c=1):
        return cls(Poly.constant(nvars, c))

    def is_zero(self):
        return self.num.is_zero()

    def is_polynomial(self):
        return self.radpow == 0

    def __eq__(self, other):
        return (
            isinstance(other, RadialRational)
            and self.radpow == other.radpow
            and self.num == other.num
        )

    def __hash__(self):
        return hash((self.num, self.radpow))

    def __repr__(self):
        return f"RadialRational({self.num!r} / rho^{self.radpow})"

    def degrees(self):
        return {d - 2 * self.radpow for d in self.num.degrees()}

    def _lift(self, radpow):
        return self.num * _rho_power(self.nvars, radpow - self.radpow)

    def __add__(self, other):
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        r = max(self.radpow, other.radpow)
        return RadialRational(self._lift(r) + other._lift(r), r)

    def __neg__(self):
        return RadialRational(-self.num, self.radpow, reduce=False)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return RadialRational(self.num.scale(c), self.radpow, reduce=False)

    def __mul__(self, other):
        if not isinstance(other, RadialRational):
            return self.scale(other)
        if self.is_zero() or other.is_zero():
            return RadialRational.zero(self.nvars)
        return RadialRational(self.num * other.num, self.radpow + other.radpow)

    def diff(self, i: int):
        # d(P rho^-R) = (dP rho - 2 R z_i P) / rho^(R+1)
        if self.radpow == 0:
            return RadialRational(self.num.diff(i), 0, reduce=False)
        nv = self.nvars
        rho = Poly.rho(nv)
        zi = Poly.variable(nv, i)
        num = self.num.diff(i) * rho - (zi * self.num).scale(2 * self.radpow)
        return RadialRational(num, self.radpow + 1)

    def homogeneous_parts(self):
        return {
            d - 2 * self.radpow: RadialRational(p, self.radpow)
            for d, p in self.num.homogeneous_parts().items()
        }

    def substitute_orthogonal(self, forms):
        """Compose with a linear change of variables preserving rho."""
        return RadialRational(self.num.substitute_linear(forms), self.radpow)

    def drop_variables(self, keep):
        return RadialRational(self.num.drop_variables(keep), self.radpow)

    def evaluate(self, points):
        points = np.asarray(points, dtype=complex)
        val = self.num.evaluate(points)
        if self.radpow:
            rho = np.sum(points**2, axis=-1)
            val = val / rho**self.radpow
        return val


def _rho_power(nvars, k):
    out = Poly.constant(nvars)
    rho = Poly.rho(nvars)
    for _ in range(k):
        out = out * rho
    return out


def multi_factorial(alpha):
    out = 1
    for a in alpha:
        out *= factorial(a)
    return out
