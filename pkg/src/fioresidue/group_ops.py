"""Group elements (g, w) and finite sums of R_g T_w op^w(a).

Conventions used throughout:
  * w = a - ik, with a the position shift and k the frequency shift;
    T_w = exp(i(k.X - a.P)).
  * R_g for g = diag(e^{i phi_j}) acts per mode as e^{i phi (1/2 - H_1)},
    so R_g c_j R_g^{-1} = e^{i phi_j} c_j and R_g T_w R_g^{-1} = T_{gw}.
  * R_g^{-1} op^w(a) R_g = op^w(a'), where
    a'(x, p) = a(x cos phi + p sin phi, -x sin phi + p cos phi)
    per mode; a = x at phi = pi/2 becomes p.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import pi

import numpy as np
import scipy.linalg

from .symbol_calculus import ClassicalSymbol, Poly, exact, oscillator_power_symbol, shift_symbol, weyl_product
from .symbol_calculus.symbols import _convert_for

ANGLE_TOL = 1e-12
# canonical block order: generic, pi/2, -pi/2, pi, 0
_BLOCK_OF = {pi / 2: 2, -pi / 2: 3, pi: 4, 0.0: 5}


def reduce_angle(phi):
    """Representative of phi mod 2 pi in (-pi, pi], snapped to special values."""
    phi = float(phi)
    r = phi - 2 * pi * np.ceil((phi - pi) / (2 * pi))
    if r <= -pi:
        r += 2 * pi
    for special in (0.0, pi / 2, -pi / 2, pi):
        if abs(r - special) < ANGLE_TOL:
            return special
    if abs(r + pi) < ANGLE_TOL:
        return pi
    return r


def angle_block(phi):
    """Block index 1..5 of an angle: generic, pi/2, -pi/2, pi, 0."""
    return _BLOCK_OF.get(reduce_angle(phi), 1)


@dataclass(frozen=True)
class DiagonalUnitary:
    angles: tuple

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(reduce_angle(a) for a in np.atleast_1d(self.angles)))

    @classmethod
    def identity(cls, n):
        return cls((0.0,) * n)

    @property
    def n(self):
        return len(self.angles)

    @property
    def profile(self):
        """(m1, m2, m3, m4, m5)."""
        counts = [0] * 5
        for a in self.angles:
            counts[angle_block(a) - 1] += 1
        return tuple(counts)

    @property
    def m5(self):
        return self.profile[4]

    def eigenvalues(self):
        return np.exp(1j * np.asarray(self.angles))

    def canonical_order(self):
        """Permutation listing modes block by block (generic ones sorted by angle)."""
        return sorted(range(self.n), key=lambda j: (angle_block(self.angles[j]), self.angles[j], j))

    def is_canonical(self):
        return self.canonical_order() == list(range(self.n))

    def permuted(self, perm):
        return DiagonalUnitary(tuple(self.angles[j] for j in perm))

    def inverse(self):
        return DiagonalUnitary(tuple(-a for a in self.angles))

    def __matmul__(self, other):
        if self.n != other.n:
            raise ValueError("dimension mismatch")
        return DiagonalUnitary(tuple(a + b for a, b in zip(self.angles, other.angles)))

    def apply(self, w):
        return self.eigenvalues() * np.asarray(w, dtype=complex)

    def close_to(self, other, tol=1e-10):
        d = np.angle(np.exp(1j * (np.asarray(self.angles) - np.asarray(other.angles))))
        return self.n == other.n and bool(np.all(np.abs(d) <= tol))


@dataclass(frozen=True)
class GroupElement:
    g: DiagonalUnitary
    w: np.ndarray = field(compare=False)
    conjugator: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w, dtype=complex)).copy()
        if w.shape != (self.g.n,):
            raise ValueError(f"w must have {self.g.n} components")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def identity(cls, n):
        return cls(DiagonalUnitary.identity(n), np.zeros(n))

    @classmethod
    def from_config(cls, angles, w_re, w_im):
        return cls(DiagonalUnitary(tuple(angles)), np.asarray(w_re, float) + 1j * np.asarray(w_im, float))

    @property
    def n(self):
        return self.g.n

    @property
    def a(self):
        return self.w.real.copy()

    @property
    def k(self):
        return -self.w.imag

    def close_to(self, other, tol=1e-10):
        return self.g.close_to(other.g, tol) and bool(np.all(np.abs(self.w - other.w) <= tol))

    def permuted(self, perm):
        return GroupElement(self.g.permuted(perm), self.w[list(perm)])


def weyl_phase(v, w):
    """e^{-i Im(sum v_j conj(w_j)) / 2}, the factor in T_v T_w = phase T_{v+w}."""
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if v.shape != w.shape:
        raise ValueError("dimension mismatch")
    return complex(np.exp(-0.5j * np.imag(np.sum(v * np.conj(w)))))


def conjugate_weyl(g: DiagonalUnitary, w):
    """g w, the vector with R_g T_w R_g^{-1} = T_{gw}."""
    return g.apply(w)


def translate_symbol(b: ClassicalSymbol, w, j_max=None):
    """Symbol of T_{-w} op(b) T_w, i.e. b(x + a, p + k).

    Exact for polynomials; rational symbols are Taylor expanded and kept
    down to degree ord b - j_max.
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if w.shape != (b.n,):
        raise ValueError(f"w must have {b.n} components")
    if not np.any(w):
        return b
    b0 = np.concatenate([w.real, -w.imag])
    if b.floor is None and b.is_polynomial():
        return shift_symbol(b, b0, b.polynomial_degree() + 1)[0]
    if j_max is None:
        raise ValueError("translating a non-polynomial symbol needs j_max")
    return shift_symbol(b, b0, j_max + 1)[0]


def _cos_sin(phi):
    exact_values = {0.0: (1, 0), pi / 2: (0, 1), -pi / 2: (0, -1), pi: (-1, 0)}
    if phi in exact_values:
        c, s = exact_values[phi]
        return exact(c), exact(s)
    return exact(np.cos(phi)), exact(np.sin(phi))


def rotate_symbol(g: DiagonalUnitary, a: ClassicalSymbol) -> ClassicalSymbol:
    """Weyl symbol of R_g^{-1} op^w(a) R_g."""
    if a.quantization != "weyl":
        raise ValueError("rotate_symbol needs a weyl symbol")
    if g.n != a.n:
        raise ValueError("dimension mismatch")
    if all(phi == 0.0 for phi in g.angles):
        return a
    n = a.n
    forms = [None] * (2 * n)
    for j, phi in enumerate(g.angles):
        c, s = _cos_sin(phi)
        xj, pj = Poly.variable(2 * n, j), Poly.variable(2 * n, n + j)
        forms[j] = xj.scale(c) + pj.scale(s)
        forms[n + j] = xj.scale(-s) + pj.scale(c)
    return a.map_rationals(lambda r: r.substitute_orthogonal(forms))


@dataclass(frozen=True)
class Summand:
    """scale * R_g T_w op^w(sym) H_0^{-osc_power}."""

    scale: complex
    elem: GroupElement
    sym: ClassicalSymbol
    osc_power: int = 0

    def __post_init__(self):
        if self.sym.n != self.elem.n:
            raise ValueError("symbol and group element disagree on n")
        if self.osc_power < 0:
            raise ValueError("osc_power must be nonnegative")

    @property
    def order(self):
        return self.sym.order - 2 * self.osc_power

    def folded(self, j_max):
        """Same operator with H_0^{-s} absorbed into the weyl symbol."""
        if self.osc_power == 0:
            return self
        sym = self.sym if self.sym.quantization == "weyl" else _to_weyl(self.sym, j_max)
        osc = oscillator_power_symbol(self.elem.n, self.osc_power, j_max + sym.order + 2 * self.osc_power)
        return Summand(self.scale, self.elem, weyl_product(sym, osc, j_max), 0)


def _to_weyl(sym, j_max):
    return _convert_for(sym, "weyl", j_max)


@dataclass(frozen=True)
class AlgebraElement:
    summands: tuple

    def __post_init__(self):
        s = tuple(self.summands)
        if s:
            n, f = s[0].elem.n, s[0].sym.fiberdim
            if any(t.elem.n != n or t.sym.fiberdim != f for t in s):
                raise ValueError("all summands must share n and fiber dimension")
        object.__setattr__(self, "summands", s)

    @classmethod
    def single(cls, sym, elem=None, scale=1.0, osc_power=0):
        elem = GroupElement.identity(sym.n) if elem is None else elem
        return cls((Summand(complex(scale), elem, sym, osc_power),))

    @classmethod
    def identity(cls, n, fiberdim=1):
        return cls.single(ClassicalSymbol.constant(n, 1, fiberdim=fiberdim))

    @property
    def n(self):
        return self.summands[0].elem.n if self.summands else None

    def __add__(self, other):
        return AlgebraElement(self.summands + other.summands)

    def scale(self, c):
        return AlgebraElement(tuple(Summand(c * s.scale, s.elem, s.sym, s.osc_power) for s in self.summands))

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def __len__(self):
        return len(self.summands)


def multiply(D1: AlgebraElement, D2: AlgebraElement, j_max: int) -> AlgebraElement:
    """Product D1 D2, symbols kept down to joint order minus j_max.

    (R_{g1} T_{w1} A1)(R_{g2} T_{w2} A2)
      = phase * R_{g1 g2} T_{g2^{-1} w1 + w2} op^w(a1'' # a2),
    with a1'' the rotated then translated a1.
    """
    out = []
    for s1 in D1.summands:
        s1 = s1.folded(j_max)
        for s2 in D2.summands:
            s2 = s2.folded(j_max)
            g2 = s2.elem.g
            v = g2.inverse().apply(s1.elem.w)
            elem = GroupElement(s1.elem.g @ g2, v + s2.elem.w)
            scale = s1.scale * s2.scale * weyl_phase(v, s2.elem.w)
            rotated = rotate_symbol(g2, s1.sym)
            moved = translate_symbol(rotated, s2.elem.w, j_max)
            sym = weyl_product(moved, s2.sym, j_max)
            out.append(Summand(scale, elem, sym))
    return AlgebraElement(tuple(out))


def commutator(D1, D2, j_max):
    return multiply(D1, D2, j_max) - multiply(D2, D1, j_max)


def normalize(g_raw, w, tol=1e-12):
    """Diagonal normal form of (g_raw, w).

    Returns ``(GroupElement, u)`` with g_raw = u diag(e^{i phi}) u^* and the
    new translation u^* w. Modes are listed in canonical block order.
    """
    g_raw = np.atleast_2d(np.asarray(g_raw, dtype=complex))
    n = g_raw.shape[0]
    if g_raw.shape != (n, n):
        raise ValueError("g must be square")
    if np.abs(g_raw.conj().T @ g_raw - np.eye(n)).max() > tol:
        raise ValueError("g is not unitary")
    T, Z = scipy.linalg.schur(g_raw, output="complex")
    angles = [reduce_angle(np.angle(T[j, j])) for j in range(n)]
    perm = DiagonalUnitary(tuple(angles)).canonical_order()
    u = Z[:, perm]
    g = DiagonalUnitary(tuple(angles[j] for j in perm))
    w_new = u.conj().T @ np.asarray(w, dtype=complex)
    return GroupElement(g, w_new, conjugator=u), u


def fixed_point_data(e: GroupElement, tol=1e-12):
    """(m5, whether v -> g v + w has a fixed point)."""
    fixed = [j for j, phi in enumerate(e.g.angles) if phi == 0.0]
    return len(fixed), bool(all(abs(e.w[j]) <= tol for j in fixed))


__all__ = [
    "AlgebraElement",
    "DiagonalUnitary",
    "GroupElement",
    "Summand",
    "angle_block",
    "commutator",
    "conjugate_weyl",
    "fixed_point_data",
    "multiply",
    "normalize",
    "reduce_angle",
    "rotate_symbol",
    "translate_symbol",
    "weyl_phase",
]
