"""Closed-form localized residue of R_g T_w op(a) H_0^{-s} sums.

Per summand the element is put in canonical order (generic angles, pi/2,
-pi/2, pi, then fixed modes) and the symbol is converted to right form.
The transverse (non-fixed) variables are removed by exact quadratic
stationary phase; what remains is a homogeneous function of degree -2 m5
on the fixed subspace, integrated over its unit sphere by monomial moments.

Transverse directions and phase entries per mode (ell . grad, Q):
  generic:  (dx - dp)/sqrt2 with -2 lam^-,  (dx + dp)/sqrt2 with -2 lam^+
  pi/2:     dx + dp with -2
  -pi/2:    dx - dp with +2
  pi:       (dx - dp)/sqrt2 with +2,      (dx + dp)/sqrt2 with -2
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from itertools import product as iproduct

import numpy as np
from scipy.special import gammaln

from .group_ops import AlgebraElement, GroupElement, Summand, angle_block, fixed_point_data, normalize
from .symbol_calculus import ClassicalSymbol, Poly, RadialRational, exact, to_complex
from .symbol_calculus.graded import alpha_factorial
from .symbol_calculus.symbols import _convert_for

SPECIAL_TOL = 1e-10


def _ctg_half(phi):
    return 0.0 if phi == math.pi else 1.0 / math.tan(phi / 2)


def phase_eigenvalues(g) -> list:
    """[(lam+, lam-)] for the generic angles of g, in canonical order."""
    out = []
    for phi in g.angles:
        if angle_block(phi) != 1:
            continue
        c = math.cos(phi)
        if abs(c) < SPECIAL_TOL or abs(math.sin(phi)) < SPECIAL_TOL:
            raise ValueError(f"angle {phi} is a multiple of pi/2")
        s = math.sin(phi)
        out.append((0.5 * (s - (1 - c)) / c, 0.5 * (s + (1 - c)) / c))
    return out


def _single_phase_eigenvalues(phi):
    c, s = math.cos(phi), math.sin(phi)
    if abs(c) < SPECIAL_TOL or abs(s) < SPECIAL_TOL:
        raise ValueError(f"angle {phi} is a multiple of pi/2")
    return 0.5 * (s - (1 - c)) / c, 0.5 * (s + (1 - c)) / c


@dataclass(frozen=True)
class QuadraticPhase:
    Q: tuple
    detQ_abs: float
    sgnQ: int

    @classmethod
    def from_diagonal(cls, Q):
        Q = tuple(float(q) for q in Q)
        if any(q == 0 for q in Q):
            raise ValueError("singular quadratic form")
        return cls(Q, float(np.prod(np.abs(Q))), int(sum(np.sign(Q))))

    def expected_invariants(self, g):
        """|det Q| and sgn Q from the closed formulas in the angles."""
        m1, m2, m3, m4, _ = g.profile
        det = 2.0 ** (2 * m1 + m2 + m3 + 2 * m4)
        sig = m3 - m2
        for phi in g.angles:
            if angle_block(phi) == 1:
                det *= math.sin(phi / 2) ** 2 / abs(math.cos(phi))
                sig -= 2 * int(np.sign(phi)) if abs(phi) < math.pi / 2 else 0
        return det, sig


@dataclass(frozen=True)
class ReducedIntegralData:
    n_prime: int
    C_res: complex
    lambdas: tuple
    B_blocks: tuple
    b0: np.ndarray
    phase: QuadraticPhase
    directions: tuple


def _canonical(elem: GroupElement):
    order = elem.g.canonical_order()
    return order, elem.permuted(order)


def _transverse_data(e: GroupElement):
    """Directions (as dicts over variable indices), Q entries and B blocks for a canonical element."""
    n = e.n
    dirs, Q, blocks, lambdas = [], [], [], []
    r = 1 / math.sqrt(2)
    for j, phi in enumerate(e.g.angles):
        block = angle_block(phi)
        xj, pj = j, n + j
        if block == 5:
            continue
        if block == 1:
            lp, lm = _single_phase_eigenvalues(phi)
            lambdas.append((lp, lm))
            dirs += [{xj: r, pj: -r}, {xj: r, pj: r}]
            Q += [-2 * lm, -2 * lp]
            blocks.append("rot45")
        elif block == 2:
            dirs.append({xj: 1.0, pj: 1.0})
            Q.append(-2.0)
            blocks.append("identity")
        elif block == 3:
            dirs.append({xj: 1.0, pj: -1.0})
            Q.append(2.0)
            blocks.append("identity")
        else:
            dirs += [{xj: r, pj: -r}, {xj: r, pj: r}]
            Q += [2.0, -2.0]
            blocks.append("rot45")
    return dirs, Q, blocks, lambdas


def _b0(e: GroupElement):
    """Shift vector in (x, p) coordinates: ((a - k ctg)/2, (a ctg + k)/2) per non-fixed mode."""
    n = e.n
    out = np.zeros(2 * n)
    for j, phi in enumerate(e.g.angles):
        if phi == 0.0:
            continue
        c = _ctg_half(phi)
        a, k = e.a[j], e.k[j]
        out[j] = (a - k * c) / 2
        out[n + j] = (a * c + k) / 2
    return out


def reduce_trace_integral(e: GroupElement) -> ReducedIntegralData:
    """Constants of the reduced trace integral for an element in any order (canonicalised here)."""
    _, e = _canonical(e)
    m1, m2, m3, m4, m5 = e.g.profile
    n = e.n
    dirs, Q, blocks, lambdas = _transverse_data(e)
    C = (2 * math.pi) ** (-n + (m2 + m3) / 2)
    for j, phi in enumerate(e.g.angles):
        block = angle_block(phi)
        if block == 1:
            root = cmath.sqrt(1 + 1j * math.tan(phi))
            assert root.real > 0
            C *= root
        if block in (1, 2, 3):
            C *= cmath.exp(0.25j * _ctg_half(phi) * (e.k[j] ** 2 + e.a[j] ** 2))
    phase = QuadraticPhase.from_diagonal(Q)
    det, sig = phase.expected_invariants(e.g)
    if abs(det - phase.detQ_abs) > 1e-9 * det or sig != phase.sgnQ:
        raise AssertionError("quadratic phase invariants disagree")
    return ReducedIntegralData(2 * n - m2 - m3, complex(C), tuple(lambdas), tuple(blocks), _b0(e), phase, tuple(dirs))


def prefactor_Cncr(e: GroupElement) -> complex:
    """2^{-n} pi^{-m5} prod e^{(i/4) ctg(phi/2)(k^2 + a^2)} (1 - i ctg(phi/2)) over non-fixed modes."""
    m5, has_fp = fixed_point_data(e)
    if not has_fp:
        raise ValueError("no affine fixed point: the residue vanishes")
    out = 2.0 ** (-e.n) * math.pi ** (-m5)
    for j, phi in enumerate(e.g.angles):
        if phi == 0.0:
            continue
        c = _ctg_half(phi)
        out *= cmath.exp(0.25j * c * (e.k[j] ** 2 + e.a[j] ** 2)) * (1 - 1j * c)
    return complex(out)


def chained_prefactor(e: GroupElement) -> complex:
    """C_res (2 pi)^{(n' - 2 m5)/2} e^{i pi sgnQ/4} / |det Q|^{1/2}; equals prefactor_Cncr."""
    data = reduce_trace_integral(e)
    m5 = e.g.m5
    ph = data.phase
    return complex(
        data.C_res
        * (2 * math.pi) ** ((data.n_prime - 2 * m5) / 2)
        * cmath.exp(0.25j * math.pi * ph.sgnQ)
        / math.sqrt(ph.detQ_abs)
    )


# sphere integrals -----------------------------------------------------------------
def sphere_moment(beta):
    """Integral of theta^beta over the unit sphere in R^len(beta)."""
    if any(b % 2 for b in beta):
        return 0.0
    d = len(beta)
    logv = math.log(2) + sum(gammaln((b + 1) / 2) for b in beta) - gammaln((sum(beta) + d) / 2)
    return math.exp(logv)


def sphere_integral(layer, m5: int) -> complex:
    """Integral over S^{2 m5 - 1} of a layer homogeneous of degree -2 m5 in 2 m5 variables."""
    if isinstance(layer, ClassicalSymbol):
        sym = layer.trace_fiber() if layer.fiberdim > 1 else layer
        parts = sym.scalar_layers()
        if set(parts) - {-2 * m5}:
            raise ValueError("degree mismatch")
        layer = parts.get(-2 * m5, RadialRational.zero(2 * m5))
    if layer.nvars != 2 * m5:
        raise ValueError(f"layer must live in {2 * m5} variables")
    if layer.is_zero():
        return 0j
    if layer.degrees() != {-2 * m5}:
        raise ValueError("degree mismatch")
    total = 0j
    for expo, c in layer.num.terms.items():
        total += to_complex(c) * sphere_moment(expo)
    return complex(total)


# stationary phase ---------------------------------------------------------------
def _directional(r: RadialRational, direction):
    out = RadialRational.zero(r.nvars)
    for i, c in direction.items():
        out = out + r.diff(i).scale(exact(c))
    return out


def _apply_quadratic(r: RadialRational, directions, Q):
    """(<Q^{-1} D, D> / 2i) r with D = -i d, i.e. -(1/2i) sum_t Q_t^{-1} (l_t . grad)^2 r."""
    out = RadialRational.zero(r.nvars)
    for direction, q in zip(directions, Q):
        second = _directional(_directional(r, direction), direction)
        out = out + second.scale(exact(-1.0 / q) / exact(2j))
    return out


def stationary_phase_quadratic(d, Q, J_max, directions=None, keep=None):
    """Terms (J, (1/J!) (<Q^{-1} D, D>/2i)^J d at the transverse origin).

    ``d`` is a Poly or RadialRational; ``Q`` a QuadraticPhase or list of
    diagonal entries; directions default to the first len(Q) variables.
    ``keep`` lists variables that are not transverse (left symbolic); with
    the default every variable is transverse and the values are numbers.
    """
    if isinstance(d, Poly):
        d = RadialRational(d)
    Qd = Q.Q if isinstance(Q, QuadraticPhase) else tuple(float(q) for q in Q)
    if any(q == 0 for q in Qd):
        raise ValueError("singular quadratic form")
    if directions is None:
        directions = [{i: 1.0} for i in range(len(Qd))]
    keep = [] if keep is None else list(keep)
    out = []
    cur = d
    for J in range(J_max + 1):
        restricted = cur.scale(exact(1) / math.factorial(J)).drop_variables(keep)
        if keep:
            out.append((J, restricted))
        elif restricted.radpow and not restricted.is_zero():
            raise ValueError("singular at the transverse origin")
        else:
            out.append((J, to_complex(restricted.num.terms.get((), 0))))
        cur = _apply_quadratic(cur, directions, Qd)
    return out


# residue -------------------------------------------------------------------------
def _prepare(summand: Summand):
    """Canonical element and the weyl symbol of op(a) H_0^{-s} (degree floor -2 m5)."""
    order, elem = _canonical(summand.elem)
    perm = [0] * len(order)
    for new, old in enumerate(order):
        perm[old] = new
    m5 = elem.g.m5
    total_order = summand.order
    depth = max(total_order + 2 * m5, 0)
    folded = summand.folded(depth)
    sym = folded.sym.permute_modes(perm)
    if sym.fiberdim > 1:
        sym = sym.trace_fiber()
    return elem, sym, depth


def summand_residue(summand: Summand, details=False):
    """m * c0' of one summand (the H-independent normalisation)."""
    m5, has_fp = fixed_point_data(summand.elem)
    info = {"m5": m5, "has_fixed_point": has_fp}
    if not has_fp or m5 == 0 or summand.order < -2 * m5:
        info["reason"] = "no fixed point" if not has_fp else ("m5 = 0" if m5 == 0 else "order below -2 m5")
        return (0j, info) if details else 0j
    elem, sym, depth = _prepare(summand)
    if sym.order < -2 * m5:
        return (0j, info) if details else 0j
    n = elem.n
    aR = _convert_for(sym, "right", depth)
    dirs, Q, _, _ = _transverse_data(elem)
    b0 = _b0(elem)
    support = [i for i in range(2 * n) if b0[i] != 0]
    fixed = [j for j in range(n) if elem.g.angles[j] == 0.0]
    keep = fixed + [n + j for j in fixed]
    b0_exact = {i: exact(-b0[i]) for i in support}
    total = 0j
    for deg, mat in sorted(aR.layers.items(), reverse=True):
        if deg < -2 * m5:
            continue
        excess = deg + 2 * m5
        r = mat[0]
        for k in range(excess + 1):
            if (excess - k) % 2:
                continue
            J = (excess - k) // 2
            for alpha in _indices_of_total(len(support), k):
                d = r
                coeff = exact(1)
                for i, a_i in zip(support, alpha):
                    for _ in range(a_i):
                        d = d.diff(i)
                    coeff = coeff * b0_exact[i] ** a_i
                if d.is_zero():
                    continue
                d = d.scale(coeff / alpha_factorial(alpha))
                for _ in range(J):
                    d = _apply_quadratic(d, dirs, Q)
                d = d.scale(exact(1) / math.factorial(J))
                layer = d.drop_variables(keep)
                total += sphere_integral(layer, m5)
    C = prefactor_Cncr(elem)
    value = complex(summand.scale * C * total)
    info.update({"C_ncr": C, "sphere_sum": total, "profile": elem.g.profile})
    return (value, info) if details else value


def _indices_of_total(k, total):
    if k == 0:
        return [()] if total == 0 else []
    return [a for a in iproduct(range(total + 1), repeat=k) if sum(a) == total]


def residue_closed_form(D: AlgebraElement) -> complex:
    """Sum over summands of the closed-form residue (m c0', independent of H)."""
    return complex(sum(summand_residue(s) for s in D.summands))


def residue_report(D: AlgebraElement):
    rows = []
    for idx, s in enumerate(D.summands):
        value, info = summand_residue(s, details=True)
        row = {"summand": idx, "value_re": value.real, "value_im": value.imag, "m5": info["m5"]}
        if "C_ncr" in info:
            data = reduce_trace_integral(s.elem)
            row.update(
                {
                    "C_ncr_re": info["C_ncr"].real,
                    "C_ncr_im": info["C_ncr"].imag,
                    "C_res_re": data.C_res.real,
                    "C_res_im": data.C_res.imag,
                    "detQ": data.phase.detQ_abs,
                    "sgnQ": data.phase.sgnQ,
                    "quadrature_error": 0.0,
                }
            )
        else:
            row["reason"] = info.get("reason")
        rows.append(row)
    return rows


def same_class(e1: GroupElement, e2: GroupElement, tol=1e-10):
    """Equality of normal forms: sorted angles and the matching translations."""
    _, c1 = _canonical(e1)
    _, c2 = _canonical(e2)
    return c1.close_to(c2, tol)


def localized_trace(D: AlgebraElement, conj_class) -> complex:
    """Residue restricted to the summands whose (g, w) lies in ``conj_class``."""
    members = list(conj_class)
    total = 0j
    for s in D.summands:
        if any(same_class(s.elem, c) for c in members):
            total += summand_residue(s)
    return complex(total)


def normalize_summand(g_raw, w, sym, scale=1.0, osc_power=0):
    """Summand for a general unitary g: diagonalise and conjugate the symbol by the permutation part.

    Only permutation-type conjugators (real orthogonal with entries 0, +-1)
    are supported, since then op(a) transforms by a linear change of modes.
    """
    elem, u = normalize(g_raw, w)
    ur = np.real_if_close(u)
    if np.iscomplexobj(ur) or not np.allclose(np.abs(ur), np.round(np.abs(ur))):
        raise ValueError("only permutation-type conjugators are supported")
    perm = [int(np.argmax(np.abs(ur[:, j]))) for j in range(u.shape[1])]
    signs = [float(np.sign(ur[perm[j], j])) for j in range(u.shape[1])]
    n = len(perm)
    forms = [None] * (2 * n)
    for new, old in enumerate(perm):
        forms[old] = Poly.variable(2 * n, new).scale(exact(signs[new]))
        forms[n + old] = Poly.variable(2 * n, n + new).scale(exact(signs[new]))
    moved = sym.map_rationals(lambda r: r.substitute_orthogonal(forms))
    return Summand(complex(scale), elem, moved, osc_power)


__all__ = [
    "QuadraticPhase",
    "ReducedIntegralData",
    "chained_prefactor",
    "localized_trace",
    "normalize_summand",
    "phase_eigenvalues",
    "prefactor_Cncr",
    "reduce_trace_integral",
    "residue_closed_form",
    "residue_report",
    "same_class",
    "sphere_integral",
    "sphere_moment",
    "stationary_phase_quadratic",
    "summand_residue",
]
