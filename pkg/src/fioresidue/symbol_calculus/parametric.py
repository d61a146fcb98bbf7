"""Weakly parametric symbols built from powers of (h_m + mu^m)^{-1}.

Terms are ``d(x, p) * (h_m + mu^m)^{-K-l}`` with ``d`` homogeneous. The
parametrix of ``(H + mu^m)^{-K}`` is built in the left calculus with the
resolvent power treated as a formal variable E, whose derivatives follow
``dE = -E^2 dh_m``. Two terms with different powers of E never combine,
so cancellation checks are exact per power.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .graded import Graded, compose_left, exp_mixed, mat_is_zero
from .rational import ONE, RadialRational, exact
from .symbols import ClassicalSymbol, convert_quantization


@dataclass(frozen=True)
class ParametricSymbol:
    """Sum of ``entries[(e, deg)] * (h_m + mu^m)^{-e}``; ``l = e - K``.

    ``floor`` is the lowest joint degree (in x, p, mu) that is exact; the
    dropped tail lies in ``S^{floor-1, -K m}``.
    """

    n: int
    m: int
    K: int
    principal: RadialRational = field(compare=False)
    entries: dict = field(compare=False)
    floor: int = 0
    fiberdim: int = 1
    quantization: str = "standard"

    def __post_init__(self):
        clean = {k: tuple(v) for k, v in self.entries.items() if not mat_is_zero(v)}
        object.__setattr__(self, "entries", clean)

    @property
    def remainder_order(self):
        return (self.floor - 1, -self.K * self.m)

    def joint_degree(self, key):
        e, d = key
        return d - e * self.m

    def _graded(self):
        return Graded(2 * self.n, self.fiberdim, self.m, self.principal, self.entries)

    def _from_graded(self, g, floor=None, quantization=None, K=None):
        return ParametricSymbol(
            self.n,
            self.m,
            self.K if K is None else K,
            self.principal,
            g.entries,
            self.floor if floor is None else floor,
            self.fiberdim,
            self.quantization if quantization is None else quantization,
        )

    def terms(self):
        """List of ``(d, l)`` with ``d`` a single-layer ClassicalSymbol."""
        out = []
        for (e, d), mat in sorted(self.entries.items(), key=lambda kv: (kv[0][0], -kv[0][1])):
            sym = ClassicalSymbol(self.n, d, {d: mat}, None, self.fiberdim, self.quantization)
            out.append((sym, e - self.K))
        return out

    def joint_degrees(self):
        return sorted({self.joint_degree(k) for k in self.entries}, reverse=True)

    def part(self, joint_degree):
        return {k: v for k, v in self.entries.items() if self.joint_degree(k) == joint_degree}

    def is_zero(self):
        return not self.entries

    def evaluate(self, x, p, mu):
        """Numerical value of the (fiber-traced) symbol, no excision."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p = np.atleast_2d(np.asarray(p, dtype=float))
        pts = np.concatenate([x, p], axis=-1)
        h = self.principal.evaluate(pts)
        out = np.zeros(pts.shape[:-1], dtype=complex)
        f = self.fiberdim
        for (e, _), mat in self.entries.items():
            val = sum(mat[i * f + i].evaluate(pts) for i in range(f))
            out += val * (h + mu**self.m) ** (-e)
        return out

    def __sub__(self, other):
        return self._from_graded(self._graded() - other._graded(), min(self.floor, other.floor))


def _principal_of(h: ClassicalSymbol):
    if h.order <= 0:
        raise ValueError("h must have positive order")
    if h.fiberdim != 1:
        raise ValueError("only scalar h is supported (principal symbol must be scalar)")
    principal = h.layer(h.order)[0]
    if principal.is_zero():
        raise ValueError("principal layer of h vanishes")
    # positivity on a deterministic sample of the unit sphere
    rng = np.random.default_rng(12345)
    pts = rng.normal(size=(256, 2 * h.n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    vals = principal.evaluate(pts)
    if np.max(np.abs(vals.imag)) > 1e-12 or np.min(vals.real) <= 0:
        raise ValueError("principal symbol of h must be real and positive on the unit sphere")
    return principal


def _standard(h, j_max):
    if h.quantization == "standard":
        return h
    if h.floor is None and h.is_polynomial():
        return convert_quantization(h, "standard")
    return convert_quantization(h, "standard", j_max)


def _operator_graded(h: ClassicalSymbol, principal):
    """h + mu^m written as E^{-1} + (h - h_m)."""
    nv = 2 * h.n
    entries = {(-1, 0): (RadialRational.constant(nv, 1),)}
    for d, mat in h.layers.items():
        if d != h.order:
            entries[(0, d)] = mat
    return Graded(nv, 1, h.order, principal, entries)


def parametrix(h: ClassicalSymbol, K: int, j_max: int) -> ParametricSymbol:
    """Left symbol of (H + mu^m)^{-K} down to joint degree -K m - j_max."""
    if K < 1:
        raise ValueError("K must be a positive integer")
    principal = _principal_of(h)
    h = _standard(h, j_max)
    m = h.order
    nv = 2 * h.n
    A = _operator_graded(h, principal)
    P = Graded(nv, 1, m, principal, {(1, 0): (RadialRational.constant(nv, 1),)})
    for j in range(1, j_max + 1):
        S = compose_left(P, A, h.n, -j)
        level = {k: v for k, v in S.entries.items() if S.jdeg(k) == -j}
        new = {(e + 1, d): tuple(r.scale(-1) for r in mat) for (e, d), mat in level.items()}
        P = P + Graded(nv, 1, m, principal, new)
    floor = -K * m - j_max
    out = P
    for _ in range(K - 1):
        out = compose_left(out, P, h.n, floor)
    return ParametricSymbol(h.n, m, K, principal, out.entries, floor, 1, "standard")


def compose_with_operator(p: ParametricSymbol, h: ClassicalSymbol, extra: int = 2) -> ParametricSymbol:
    """p o (h + mu^m) in the left calculus, computed ``extra`` degrees past p's floor."""
    if p.quantization != "standard":
        raise ValueError("expected a left (standard) parametric symbol")
    principal = _principal_of(h)
    h = _standard(h, h.order - p.floor + extra)
    A = _operator_graded(h, principal)
    floor = p.floor + h.order - extra
    out = compose_left(p._graded(), A, p.n, floor)
    return ParametricSymbol(p.n, p.m, 0, principal, out.entries, floor, p.fiberdim, "standard")


def product_with_resolvent(a: ClassicalSymbol, h: ClassicalSymbol, K: int, j_max: int, form: str = "right"):
    """Symbol q(y, p; mu) of A (H + mu^m)^{-K}, down to joint degree ord a - K m - j_max.

    ``form='right'`` returns the right (y-form) symbol; its l = 0 terms are
    the layers of the right symbol of A. ``form='standard'`` skips the last
    conversion, and then the l = 0 terms are exactly the layers of ``a``.
    """
    if form not in ("right", "standard"):
        raise ValueError("form must be 'right' or 'standard'")
    a = _standard(a, j_max)
    P = parametrix(h, K, j_max)
    floor = a.order - K * P.m - j_max
    if a.floor is not None:
        floor = max(floor, a.floor - K * P.m)
    ag = Graded(2 * a.n, a.fiberdim, P.m, P.principal, {(0, d): mat for d, mat in a.layers.items()})
    if a.fiberdim != 1:
        Pg = Graded(2 * a.n, a.fiberdim, P.m, P.principal, {k: _scalar_to_fiber(v, a.fiberdim) for k, v in P.entries.items()})
    else:
        Pg = P._graded()
    q = compose_left(ag, Pg, a.n, floor)
    quant = "standard"
    if form == "right":
        q = exp_mixed(q, a.n, exact(1j), floor)
        quant = "right"
    return ParametricSymbol(a.n, P.m, K, P.principal, q.entries, floor, a.fiberdim, quant)


def _scalar_to_fiber(mat, f):
    zero = RadialRational.zero(mat[0].nvars)
    return tuple(mat[0] if i == j else zero for i in range(f) for j in range(f))


def grubb_seeley_coeffs(p: ParametricSymbol, N: int, d: int = 0):
    """Taylor coefficients of t^d p(x, xi, 1/t) at t = 0 for k < N.

    A term D E^e contributes t^{d + m e} (1 + t^m h_m)^{-e}, i.e.
    C(-e, r) h_m^r D at k = d + m (e + r). Returns ``[(k, ClassicalSymbol)]``.
    Coefficient k is exact for degrees >= floor + k - d.
    """
    m = p.m
    nv = 2 * p.n
    f = p.fiberdim
    out = []
    hp = {0: RadialRational.constant(nv, 1)}
    for k in range(N):
        layers = {}
        for (e, deg), mat in p.entries.items():
            if e < 0:
                raise ValueError("terms with positive powers of (h + mu^m) are not supported")
            rem = k - d - m * e
            if rem < 0 or rem % m:
                continue
            r = rem // m
            if r not in hp:
                for t in range(1, r + 1):
                    if t not in hp:
                        hp[t] = hp[t - 1] * p.principal
            c = exact((-1) ** r * comb(e + r - 1, r)) if e > 0 else (ONE if r == 0 else exact(0))
            if c == 0:
                continue
            deg_out = deg + m * r
            contrib = tuple(x * hp[r] * c for x in mat)
            prev = layers.get(deg_out)
            layers[deg_out] = contrib if prev is None else tuple(a + b for a, b in zip(prev, contrib))
        order = max(layers, default=0)
        out.append((k, ClassicalSymbol(p.n, order, layers, p.floor + k - d, f, p.quantization)))
    return out


__all__ = [
    "ParametricSymbol",
    "parametrix",
    "compose_with_operator",
    "product_with_resolvent",
    "grubb_seeley_coeffs",
]
