"""Classical Shubin symbols with radial rational layers.

A ``ClassicalSymbol`` stores homogeneous layers ``a_{order-j}`` keyed by
degree. Layers with denominators are understood with the fixed excision
``chi`` (see :func:`excision`), i.e. they are only meaningful for
``|(x, p)| >= 1``. ``floor`` is the lowest degree that is known exactly;
``None`` means the symbol is exact (a polynomial, or an exact finite sum).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graded import Graded, alpha_factorial, compose_left, exp_mixed, mat_is_zero, mat_map
from .rational import IMAG, ONE, Poly, RadialRational, exact, to_complex

QUANTIZATIONS = ("standard", "weyl", "right")

# exponent c of exp(c d_x.d_p) taking a symbol from one quantization to another
_CONVERSION = {
    ("weyl", "standard"): -IMAG / 2,
    ("standard", "weyl"): IMAG / 2,
    ("weyl", "right"): IMAG / 2,
    ("right", "weyl"): -IMAG / 2,
    ("standard", "right"): IMAG,
    ("right", "standard"): -IMAG,
}


@dataclass(frozen=True)
class HomogeneousTerm:
    """``coeff * x**xpow * p**ppow / (|x|^2 + |p|^2)**radpow``."""

    coeff: complex
    xpow: tuple
    ppow: tuple
    radpow: int = 0

    @property
    def degree(self):
        return sum(self.xpow) + sum(self.ppow) - 2 * self.radpow

    def to_rational(self):
        n = len(self.xpow)
        if len(self.ppow) != n:
            raise ValueError("xpow and ppow must have the same length")
        if self.radpow < 0 or min(self.xpow + self.ppow, default=0) < 0:
            raise ValueError("negative exponent in term")
        num = Poly(2 * n, {tuple(self.xpow) + tuple(self.ppow): self.coeff})
        return RadialRational(num, self.radpow)


def excision(r):
    """C^2 cutoff: 0 for r <= 1/2, 1 for r >= 1 (quintic smoothstep)."""
    s = np.clip((np.asarray(r, dtype=float) - 0.5) / 0.5, 0.0, 1.0)
    return s**3 * (10 - 15 * s + 6 * s**2)


def _check_quantization(q):
    if q not in QUANTIZATIONS:
        raise ValueError(f"unknown quantization {q!r}; expected one of {QUANTIZATIONS}")


@dataclass(frozen=True)
class ClassicalSymbol:
    n: int
    order: int
    layers: dict = field(compare=False)
    floor: int | None = None
    fiberdim: int = 1
    quantization: str = "weyl"

    def __post_init__(self):
        _check_quantization(self.quantization)
        clean = {}
        for d, mat in self.layers.items():
            if len(mat) != self.fiberdim**2:
                raise ValueError("layer matrix has the wrong size")
            if self.floor is not None and d < self.floor:
                continue
            if mat_is_zero(mat):
                continue
            if d > self.order:
                raise ValueError(f"layer of degree {d} exceeds order {self.order}")
            for r in mat:
                if not r.is_zero() and r.degrees() != {d}:
                    raise ValueError(f"layer {d} is not homogeneous of that degree")
            clean[d] = tuple(mat)
        object.__setattr__(self, "layers", clean)

    # construction -----------------------------------------------------
    @classmethod
    def from_rational(cls, n, rr, quantization="weyl", order=None, floor=None):
        layers = {d: (r,) for d, r in rr.homogeneous_parts().items()}
        if order is None:
            order = max(layers, default=0)
        return cls(n, order, layers, floor, 1, quantization)

    @classmethod
    def from_terms(cls, n, terms, quantization="weyl", order=None, floor=None):
        rr = RadialRational.zero(2 * n)
        for t in terms:
            if not isinstance(t, HomogeneousTerm):
                t = HomogeneousTerm(*t)
            rr = rr + t.to_rational()
        return cls.from_rational(n, rr, quantization, order, floor)

    @classmethod
    def from_matrix(cls, n, entries, quantization="weyl", order=None, floor=None):
        """``entries``: square nested list of ClassicalSymbol/RadialRational/terms lists."""
        f = len(entries)
        layers = {}
        for i, row in enumerate(entries):
            if len(row) != f:
                raise ValueError("fiber matrix must be square")
            for j, ent in enumerate(row):
                if isinstance(ent, ClassicalSymbol):
                    parts = {d: m[0] for d, m in ent.layers.items()}
                elif isinstance(ent, RadialRational):
                    parts = ent.homogeneous_parts()
                else:
                    parts = cls.from_terms(n, ent).scalar_layers()
                for d, r in parts.items():
                    mat = list(layers.get(d, [RadialRational.zero(2 * n)] * (f * f)))
                    mat[i * f + j] = mat[i * f + j] + r
                    layers[d] = tuple(mat)
        if order is None:
            order = max(layers, default=0)
        return cls(n, order, layers, floor, f, quantization)

    @classmethod
    def constant(cls, n, c=1, quantization="weyl", fiberdim=1):
        if fiberdim == 1:
            return cls.from_rational(n, RadialRational.constant(2 * n, c), quantization, order=0)
        mat = []
        for i in range(fiberdim):
            for j in range(fiberdim):
                mat.append(RadialRational.constant(2 * n, c if i == j else 0))
        return cls(n, 0, {0: tuple(mat)}, None, fiberdim, quantization)

    @classmethod
    def coordinate(cls, n, which, j, quantization="weyl"):
        idx = j if which == "x" else n + j
        return cls.from_rational(n, RadialRational(Poly.variable(2 * n, idx)), quantization)

    @classmethod
    def oscillator(cls, n, quantization="weyl"):
        """h_2 = (|x|^2 + |p|^2)/2."""
        return cls.from_rational(n, RadialRational(Poly.rho(2 * n).scale(exact(1) / 2)), quantization)

    # inspection --------------------------------------------------------
    @property
    def jmax(self):
        return None if self.floor is None else self.order - self.floor

    @property
    def nvars(self):
        return 2 * self.n

    def layer(self, degree):
        if degree in self.layers:
            return self.layers[degree]
        if self.floor is not None and degree < self.floor:
            raise ValueError(f"degree {degree} is below the known floor {self.floor}")
        return tuple(RadialRational.zero(self.nvars) for _ in range(self.fiberdim**2))

    def scalar_layers(self):
        if self.fiberdim != 1:
            raise ValueError("symbol is matrix valued")
        return {d: m[0] for d, m in self.layers.items()}

    @property
    def components(self):
        """Layers in the order a_order, a_order-1, ... (down to the floor)."""
        low = self.floor if self.floor is not None else min(self.layers, default=self.order)
        return [(d, self.layer(d)) for d in range(self.order, low - 1, -1)]

    def degrees(self):
        return sorted(self.layers, reverse=True)

    def is_zero(self):
        return not self.layers

    def is_polynomial(self):
        return all(r.is_polynomial() for m in self.layers.values() for r in m)

    def polynomial_degree(self):
        return max(self.layers, default=0)

    def terms(self, entry=(0, 0)):
        """Expanded HomogeneousTerm list of one fiber entry (reduced form)."""
        i, j = entry
        out = []
        for d in self.degrees():
            r = self.layers[d][i * self.fiberdim + j]
            for e, c in sorted(r.num.terms.items()):
                out.append(HomogeneousTerm(to_complex(c), e[: self.n], e[self.n:], r.radpow))
        return out

    def equals(self, other, down_to=None):
        """Exact equality of all layers of degree >= ``down_to``."""
        if self.n != other.n or self.fiberdim != other.fiberdim:
            return False
        keys = set(self.layers) | set(other.layers)
        for d in keys:
            if down_to is not None and d < down_to:
                continue
            if self.layer(d) != other.layer(d):
                return False
        return True

    def evaluate(self, x, p, cutoff=True):
        """Evaluate the (scalar, fiber entry 0,0 or tr_E) symbol at points."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p = np.atleast_2d(np.asarray(p, dtype=float))
        pts = np.concatenate([x, p], axis=-1)
        out = np.zeros(pts.shape[:-1], dtype=complex)
        tr = self.trace_fiber()
        for d, m in tr.layers.items():
            r = m[0]
            val = r.evaluate(pts)
            if cutoff and not r.is_polynomial():
                val = val * excision(np.linalg.norm(pts, axis=-1))
            out += val
        return out

    # algebra -----------------------------------------------------------
    def _graded(self):
        return Graded(self.nvars, self.fiberdim, 1, None, {(0, d): m for d, m in self.layers.items()})

    def _rebuild(self, graded, order=None, floor="keep", quantization=None):
        layers = {}
        for (e, d), m in graded.entries.items():
            if e != 0:
                raise ValueError("classical symbol cannot carry parameter powers")
            layers[d] = m
        return ClassicalSymbol(
            self.n,
            self.order if order is None else order,
            layers,
            self.floor if floor == "keep" else floor,
            self.fiberdim,
            self.quantization if quantization is None else quantization,
        )

    def _check_compatible(self, other):
        if self.n != other.n:
            raise ValueError(f"mode counts differ: {self.n} vs {other.n}")
        if self.fiberdim != other.fiberdim:
            raise ValueError(f"fiber dimensions differ: {self.fiberdim} vs {other.fiberdim}")

    def __add__(self, other):
        self._check_compatible(other)
        if self.quantization != other.quantization:
            raise ValueError("cannot add symbols of different quantizations")
        floor = _max_floor(self.floor, other.floor)
        order = max(self.order, other.order)
        return self._rebuild(self._graded() + other._graded(), order, floor).truncate(floor)

    def __neg__(self):
        return self._rebuild(-self._graded())

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return self._rebuild(self._graded().scale(c))

    def __mul__(self, c):
        if isinstance(c, ClassicalSymbol):
            return self.pointwise(c)
        return self.scale(c)

    __rmul__ = __mul__

    def pointwise(self, other):
        """Pointwise (matrix) product of symbols, no quantization correction."""
        self._check_compatible(other)
        floor = _product_floor(self, other)
        out = self._graded().mul(other._graded(), floor)
        return self._rebuild(out, self.order + other.order, floor)

    def truncate(self, floor):
        if floor is None:
            return self
        new_floor = _max_floor(self.floor, floor)
        if self.floor is None and self.layers and min(self.layers) >= floor:
            new_floor = None
        return ClassicalSymbol(self.n, self.order, self.layers, new_floor, self.fiberdim, self.quantization)

    def diff(self, var):
        """Derivative in phase-space variable ``var`` (0..n-1 = x, n..2n-1 = p)."""
        return self._rebuild(
            self._graded().diff(var),
            self.order - 1,
            None if self.floor is None else self.floor - 1,
        )

    def trace_fiber(self):
        if self.fiberdim == 1:
            return self
        f = self.fiberdim
        layers = {}
        for d, m in self.layers.items():
            acc = RadialRational.zero(self.nvars)
            for i in range(f):
                acc = acc + m[i * f + i]
            layers[d] = (acc,)
        return ClassicalSymbol(self.n, self.order, layers, self.floor, 1, self.quantization)

    def with_quantization(self, q):
        """Relabel without converting (use convert_quantization to convert)."""
        return ClassicalSymbol(self.n, self.order, self.layers, self.floor, self.fiberdim, q)

    def map_rationals(self, fn, nvars_out=None, n_out=None):
        layers = {d: mat_map(m, fn) for d, m in self.layers.items()}
        return ClassicalSymbol(
            self.n if n_out is None else n_out,
            self.order,
            layers,
            self.floor,
            self.fiberdim,
            self.quantization,
        )

    def permute_modes(self, perm):
        """New symbol b with b(y) = a(x) where mode ``perm[i]`` of y is mode i of x."""
        n = self.n
        forms = [None] * (2 * n)
        for i, target in enumerate(perm):
            forms[i] = Poly.variable(2 * n, target)
            forms[n + i] = Poly.variable(2 * n, n + target)
        return self.map_rationals(lambda r: r.substitute_orthogonal(forms))

    def restrict_modes(self, keep):
        """Set the variables of modes outside ``keep`` to zero."""
        keep = list(keep)
        n = self.n
        idx = keep + [n + k for k in keep]
        return self.map_rationals(lambda r: r.drop_variables(idx), n_out=len(keep))


def _max_floor(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


def _product_floor(a, b):
    floors = []
    if a.floor is not None:
        floors.append(a.floor + b.order)
    if b.floor is not None:
        floors.append(a.order + b.floor)
    return max(floors) if floors else None


def _require_same(a, b):
    a._check_compatible(b)


# operations ----------------------------------------------------------------
def compose(a: ClassicalSymbol, b: ClassicalSymbol, j_max: int) -> ClassicalSymbol:
    """Left-quantization composition, layers down to degree ord a + ord b - j_max."""
    _require_same(a, b)
    if a.quantization != "standard" or b.quantization != "standard":
        raise ValueError("compose expects symbols in standard (left) quantization")
    target = a.order + b.order - j_max
    floor = _max_floor(_product_floor(a, b), target)
    out = compose_left(a._graded(), b._graded(), a.n, floor)
    exact_result = (
        a.floor is None and b.floor is None and a.is_polynomial() and b.is_polynomial() and target <= 0
    )
    return a._rebuild(out, a.order + b.order, None if exact_result else floor)


def convert_quantization(a: ClassicalSymbol, target: str, j_max: int | None = None) -> ClassicalSymbol:
    """Translate between weyl, standard (left) and right symbols.

    The series exp(c d_x.d_p) is truncated at the symbol's own floor, or at
    ``order - j_max`` if given. Polynomial input converts exactly.
    """
    _check_quantization(target)
    if target == a.quantization:
        raise ValueError("source and target quantizations are the same")
    c = _CONVERSION[(a.quantization, target)]
    floor = a.floor
    if j_max is not None:
        floor = _max_floor(floor, a.order - j_max)
    if floor is None:
        if not a.is_polynomial():
            raise ValueError("exact rational symbol needs j_max for conversion")
        floor_eval = min(a.layers, default=0) - 2 * a.order - 2
        out = exp_mixed(a._graded(), a.n, c, floor_eval)
        return a._rebuild(out, floor=None, quantization=target)
    out = exp_mixed(a._graded(), a.n, c, floor)
    return a._rebuild(out, floor=floor, quantization=target)


def _convert_for(a, target, j_max):
    if a.quantization == target:
        return a
    if a.floor is None and a.is_polynomial():
        return convert_quantization(a, target)
    return convert_quantization(a, target, j_max)


def weyl_product(a: ClassicalSymbol, b: ClassicalSymbol, j_max: int) -> ClassicalSymbol:
    """Symbol of op^w(a) op^w(b) in weyl form (through the left calculus)."""
    if a.quantization != "weyl" or b.quantization != "weyl":
        raise ValueError("weyl_product expects weyl symbols")
    c = compose(_convert_for(a, "standard", j_max), _convert_for(b, "standard", j_max), j_max)
    return _convert_for(c, "weyl", j_max)


def shift_symbol(a: ClassicalSymbol, b0, N: int):
    """Taylor expansion w -> sum_{|alpha| < N} b0^alpha/alpha! d^alpha a(w).

    Returns ``(symbol, remainder_degree)``; the remainder degree is ``None``
    when the expansion is exact (polynomial of degree < N).
    """
    b0 = [exact(v) for v in np.asarray(b0, dtype=float).ravel()]
    if len(b0) != a.nvars:
        raise ValueError(f"shift vector must have length {a.nvars}")
    support = [i for i, v in enumerate(b0) if v != 0]
    if not support or N <= 0:
        if N <= 0:
            return ClassicalSymbol(a.n, a.order, {}, a.order - N + 1, a.fiberdim, a.quantization), a.order - N
        return a, None
    g = a._graded()
    table = g.derivatives(support, N - 1)
    out = g._like({})
    for alpha, der in table.items():
        coeff = ONE
        for i, k in zip(support, alpha):
            coeff = coeff * b0[i] ** k
        coeff = coeff / alpha_factorial(alpha)
        out = out + der.scale(coeff)
    polynomial_exact = a.floor is None and a.is_polynomial() and a.polynomial_degree() < N
    if polynomial_exact:
        return a._rebuild(out, floor=None), None
    floor = _max_floor(a.floor, a.order - N + 1)
    return a._rebuild(out, floor=floor).truncate(floor), a.order - N


def oscillator_power_symbol(n: int, s: int, j_max: int) -> ClassicalSymbol:
    """Weyl symbol of H_0^{-s} (s >= 1) down to degree -2s - j_max.

    From the Weyl symbol of the oscillator semigroup,
    sech(t/2)^n exp(-2 h tanh(t/2)), integrated against t^{s-1}/Gamma(s);
    with u = tanh(t/2) the large-h expansion is
    sum_k g_k Gamma(s+k)/Gamma(s) (2h)^{-s-k}, where
    2 (2 artanh u)^{s-1} (1-u^2)^{n/2-1} = sum_k g_k u^{s-1+k}.
    """
    if s < 1:
        raise ValueError("s must be a positive integer")
    from fractions import Fraction

    kmax = j_max // 2 + 1
    size = 2 * kmax + 2
    # artanh(u)/u = sum u^{2j}/(2j+1)
    base = [Fraction(0)] * size
    for j in range(0, size, 2):
        base[j] = Fraction(1, j + 1)
    series = [Fraction(0)] * size
    series[0] = Fraction(1)
    for _ in range(s - 1):
        series = _series_mul(series, base)
    # (1-u^2)^{n/2-1}
    half = Fraction(n, 2) - 1
    binom = [Fraction(0)] * size
    coeff = Fraction(1)
    for j in range(0, size // 2):
        binom[2 * j] = coeff * (-1) ** j
        coeff = coeff * (half - j) / (j + 1)
    series = _series_mul(series, binom)
    layers = {}
    rho = Poly.rho(2 * n)
    for k in range(0, size):
        gk = 2 * Fraction(2) ** (s - 1) * series[k]
        degree = -2 * (s + k)
        if gk == 0 or degree < -2 * s - j_max:
            continue
        # Gamma(s+k)/Gamma(s) * (2h)^{-s-k}, and 2h = rho
        ratio = 1
        for t in range(s, s + k):
            ratio *= t
        c = gk * ratio
        layers[degree] = (RadialRational(Poly.constant(2 * n, c), s + k),)
    return ClassicalSymbol(n, -2 * s, layers, -2 * s - j_max, 1, "weyl")


def _series_mul(a, b):
    size = len(a)
    out = [0] * size
    for i, x in enumerate(a):
        if x:
            for j in range(size - i):
                out[i + j] += x * b[j]
    return out


__all__ = [
    "HomogeneousTerm",
    "ClassicalSymbol",
    "QUANTIZATIONS",
    "compose",
    "convert_quantization",
    "weyl_product",
    "shift_symbol",
    "oscillator_power_symbol",
    "excision",
]
