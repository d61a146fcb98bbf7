"""Acceptance checks shared by ``fioresidue verify`` and the test suite.

Each check returns a Criterion with the measured quantity next to its
threshold. Random inputs come from fixed seeds so reruns are identical.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from mpmath import mp, psi

from .group_ops import (
    AlgebraElement,
    DiagonalUnitary,
    GroupElement,
    Summand,
    commutator,
    conjugate_weyl,
    multiply,
    rotate_symbol,
    translate_symbol,
    weyl_phase,
)
from .quantization import displacement, metaplectic, quantize
from .residue import localized_trace, prefactor_Cncr, residue_closed_form
from .symbol_calculus import (
    ClassicalSymbol,
    RadialRational,
    compose_with_operator,
    grubb_seeley_coeffs,
    parametrix,
)
from .trace_engine import (
    Oscillator,
    SectorSpec,
    convert_coefficients,
    fit_expansion,
    geometric_grid,
    heat_ladder,
    heat_trace,
    leading_exponent,
    numeric_residue_at_zero,
    resolvent_ladder,
    resolvent_trace,
)


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] {self.number:2d} {self.name}: {parts} ({self.seconds:.1f}s)"


def _fmt(v):
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, complex):
        return f"{v.real:.10g}{v.imag:+.10g}j"
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def _interior_norm(A, n, N):
    half = N // 2
    idx = np.arange(N**n).reshape([N] * n)[tuple(slice(0, half) for _ in range(n))].ravel()
    return float(np.linalg.norm(A[np.ix_(idx, idx)], 2))


def _random_w(rng, size, radius=1.0):
    r = radius * np.sqrt(rng.uniform(0, 1, size))
    return r * np.exp(2j * np.pi * rng.uniform(0, 1, size))


def _random_poly_symbol(rng, n, degree):
    """Weyl polynomial with small gaussian-rational coefficients."""
    terms = []
    for total in range(degree + 1):
        for _ in range(2):
            expo = rng.multinomial(total, [1 / (2 * n)] * (2 * n))
            c = complex(Fraction(int(rng.integers(-4, 5)), 4), Fraction(int(rng.integers(-4, 5)), 4))
            terms.append((c, tuple(expo[:n]), tuple(expo[n:]), 0))
    return ClassicalSymbol.from_terms(n, terms)


# 1 --------------------------------------------------------------------------
def group_law(pairs=100, N=64, seed=1):
    rng = np.random.default_rng(seed)
    worst_law = worst_conj = worst_shift = 0.0
    for _ in range(pairs):
        v, w = _random_w(rng, 1), _random_w(rng, 1)
        Tv, Tw, Tvw = (displacement(z, 1, N).data for z in (v, w, v + w))
        worst_law = max(worst_law, _interior_norm(Tv @ Tw - weyl_phase(v, w) * Tvw, 1, N))
        g = DiagonalUnitary((float(rng.uniform(-np.pi, np.pi)),))
        R = metaplectic(g, 1, N).data
        lhs = R @ Tw @ R.conj().T
        worst_conj = max(worst_conj, _interior_norm(lhs - displacement(conjugate_weyl(g, w), 1, N).data, 1, N))
    for _ in range(20):
        w = _random_w(rng, 1)
        b = _random_poly_symbol(rng, 1, 3)
        Tw = displacement(w, 1, N).data
        lhs = Tw.conj().T @ quantize(b, 1, N).data @ Tw
        rhs = quantize(translate_symbol(b, w), 1, N).data
        worst_shift = max(worst_shift, _interior_norm(lhs - rhs, 1, N) / max(1.0, np.abs(rhs).max()))
    tol = 1e-8
    return {
        "passed": max(worst_law, worst_conj, worst_shift) <= tol,
        "measured": {"law": worst_law, "conjugation": worst_conj, "translation": worst_shift, "tol": tol},
    }


# 2 --------------------------------------------------------------------------
def egorov(count=20, n=2, N=24, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        g = DiagonalUnitary(tuple(float(x) for x in rng.uniform(-np.pi, np.pi, n)))
        a = _random_poly_symbol(rng, n, 4)
        R = metaplectic(g, n, N).data
        lhs = R.conj().T @ quantize(a, n, N).data @ R
        rhs = quantize(rotate_symbol(g, a), n, N).data
        worst = max(worst, _interior_norm(lhs - rhs, n, N) / max(1.0, np.abs(rhs).max()))
    return {"passed": worst <= 1e-8, "measured": {"error": worst, "tol": 1e-8}}


# 3 --------------------------------------------------------------------------
def heat_oracles(N=400):
    t = np.linspace(0.2, 2.0, 19)
    plain = heat_trace(AlgebraElement.identity(1), t_grid=t, N=N).values
    err_plain = float(np.abs(plain - np.exp(-t / 2) / (1 - np.exp(-t))).max())
    err_rot = 0.0
    for phi in (2 * np.pi / 3, np.pi / 3, 1.0):
        e = GroupElement.from_config([phi], [0.0], [0.0])
        D = AlgebraElement.single(ClassicalSymbol.constant(1), e)
        vals = heat_trace(D, t_grid=t, N=N).values
        err_rot = max(err_rot, float(np.abs(vals - np.exp(-t / 2) / (1 - np.exp(-1j * phi - t))).max()))
    return {
        "passed": err_plain <= 1e-10 and err_rot <= 1e-9,
        "measured": {"plain": err_plain, "plain_tol": 1e-10, "rotated": err_rot, "rotated_tol": 1e-9},
    }


# 4 --------------------------------------------------------------------------
def expansion_exponents():
    t = geometric_grid(0.001, 0.05, 40)
    cases = {}
    for n in (1, 2):
        samples = heat_trace(AlgebraElement.identity(n), t_grid=t)
        cases[f"identity_n{n}"] = (leading_exponent(samples, 2), -float(n))
    e = GroupElement.from_config([1.0], [0.0], [0.0])
    samples = heat_trace(AlgebraElement.single(ClassicalSymbol.constant(1), e), t_grid=t)
    cases["rotation_n1"] = (leading_exponent(samples, 2), 0.0)
    worst = max(abs(a - b) for a, b in cases.values())
    measured = {k: v[0] for k, v in cases.items()}
    measured.update({"worst": worst, "tol": 0.02})
    return {"passed": worst <= 0.02, "measured": measured}


# 5 --------------------------------------------------------------------------
def fixed_point_constant(phis=(1.0, 2 * np.pi / 3)):
    worst_oracle = worst_const = 0.0
    t = geometric_grid(0.001, 0.05, 40)
    for phi in phis:
        e = GroupElement.from_config([phi], [0.0], [0.0])
        D = AlgebraElement.single(ClassicalSymbol.constant(1), e)
        fit = fit_expansion(heat_trace(D, t_grid=t), heat_ladder(0, 0, 2, 12))
        c0 = fit.coefficient(0)
        expected = (1 - 1j / math.tan(phi / 2)) / 2
        worst_oracle = max(worst_oracle, abs(c0 - expected))
        worst_const = max(worst_const, abs(c0 - prefactor_Cncr(e)))
    tol = 1e-6
    return {
        "passed": max(worst_oracle, worst_const) <= tol,
        "measured": {"vs_oracle": worst_oracle, "vs_C_ncr": worst_const, "tol": tol},
    }


# 6 --------------------------------------------------------------------------
def _inverse_oscillator(n, angles):
    e = GroupElement.from_config(angles, [0.0] * n, [0.0] * n)
    return AlgebraElement((Summand(1.0, e, ClassicalSymbol.constant(n), 1),))


def residue_two_routes():
    D = _inverse_oscillator(1, [0.0])
    closed = residue_closed_form(D)
    numeric = 2 * numeric_residue_at_zero(D)
    ok = abs(closed - 2) <= 1e-10 and abs(numeric - 2) <= 1e-3
    measured = {"closed_n1": closed, "numeric_n1": numeric}
    worst = 0.0
    for phi in (2 * np.pi / 3, 1.0):
        D = _inverse_oscillator(2, [0.0, phi])
        expected = 1 - 1j / math.tan(phi / 2)
        closed = residue_closed_form(D)
        numeric = 2 * numeric_residue_at_zero(D)
        worst = max(worst, abs(closed - expected), abs(numeric - expected))
    measured.update({"n2_worst": worst, "tol": 1e-3})
    return {"passed": ok and worst <= 1e-3, "measured": measured}


# 7 --------------------------------------------------------------------------
def h_independence():
    D = _inverse_oscillator(1, [0.0])
    r2 = 2 * numeric_residue_at_zero(D, Oscillator(1))
    r4 = 4 * numeric_residue_at_zero(D, Oscillator(2))
    diff = abs(r2 - r4)
    return {"passed": diff <= 1e-3, "measured": {"m2": r2, "m4": r4, "difference": diff, "tol": 1e-3}}


# 8 --------------------------------------------------------------------------
def fixed_point_free():
    e = GroupElement.from_config([0.0], [1.0], [0.0])
    D = AlgebraElement.single(ClassicalSymbol.constant(1), e)
    vals = heat_trace(D, t_grid=np.array([0.05, 0.1])).values
    small, large = abs(vals[0]), abs(vals[1])
    res = numeric_residue_at_zero(D)
    passed = small < 1e-6 and small < large and abs(res) <= 1e-7
    # exact value for comparison: e^{-|w|^2 coth(t/2)/4} / (2 sinh(t/2))
    exact_small = math.exp(-0.25 / math.tanh(0.025)) / (2 * math.sinh(0.025))
    return {
        "passed": passed,
        "measured": {
            "trace_t005": small,
            "closed_form_t005": exact_small,
            "trace_t01": large,
            "bound": 1e-6,
            "residue": abs(res),
        },
    }


# 9 --------------------------------------------------------------------------
def _random_rational_element(rng, n, angles_list, order_sym, osc_power):
    summands = []
    for angles in angles_list:
        e = GroupElement.from_config(angles, [0.0] * n, [0.0] * n)
        sym = _random_poly_symbol(rng, n, order_sym)
        scale = complex(Fraction(int(rng.integers(1, 5)), 2))
        summands.append(Summand(scale, e, sym, osc_power))
    return AlgebraElement(tuple(summands))


def trace_property(pairs=20, seed=9):
    """Commutators over the order-3 rotation group have zero localized residue.

    The stated case (n = 1, symbols of order -2) has products below the
    residue's order range. A second family with a fixed mode (n = 2,
    g = diag(1, rotation)) and order-0 symbols exercises nonzero layers.
    """
    rng = np.random.default_rng(seed)
    rot = 2 * np.pi / 3
    worst = 0.0
    worst_nontrivial = 0.0
    largest_part = 0.0
    classes_1 = [[0.0], [rot], [-rot]]
    classes_2 = [[0.0, 0.0], [0.0, rot], [0.0, -rot]]
    for _ in range(pairs):
        D1 = _random_rational_element(rng, 1, classes_1, 0, 1)
        D2 = _random_rational_element(rng, 1, classes_1, 0, 1)
        C = commutator(D1, D2, 4)
        for angles in classes_1:
            worst = max(worst, abs(localized_trace(C, [GroupElement.from_config(angles, [0.0], [0.0])])))
    for _ in range(max(1, pairs // 4)):
        D1 = _random_rational_element(rng, 2, classes_2, 2, 1)
        D2 = _random_rational_element(rng, 2, classes_2, 2, 2)
        P = _multiply_parts(D1, D2)
        C = P[0] - P[1]
        for angles in classes_2:
            cls = [GroupElement.from_config(angles, [0.0, 0.0], [0.0, 0.0])]
            worst_nontrivial = max(worst_nontrivial, abs(localized_trace(C, cls)))
            largest_part = max(largest_part, abs(localized_trace(P[0], cls)))
    tol = 1e-6
    return {
        "passed": worst <= tol and worst_nontrivial <= tol,
        "measured": {
            "order_minus2": worst,
            "fixed_mode_family": worst_nontrivial,
            "largest_product_residue": largest_part,
            "tol": tol,
        },
    }


def _multiply_parts(D1, D2):
    return multiply(D1, D2, 4), multiply(D2, D1, 4)


# 10 -------------------------------------------------------------------------
def symbol_defect():
    h = ClassicalSymbol.oscillator(1, "standard")
    P = parametrix(h, 1, 4)
    composed = compose_with_operator(P, h)
    worst_degree = None
    leftover_identity = True
    for key, mat in composed.entries.items():
        if key == (0, 0):
            one = mat[0] - RadialRational.constant(2, 1)
            if one.is_zero():
                continue
            leftover_identity = False
        jd = composed.joint_degree(key)
        worst_degree = jd if worst_degree is None else max(worst_degree, jd)
    cancel_ok = leftover_identity and (worst_degree is None or worst_degree <= -5)
    odd_nonzero = 0
    for k, sym in grubb_seeley_coeffs(P, 9):
        if k % 2 and not sym.is_zero():
            odd_nonzero += 1
    return {
        "passed": cancel_ok and odd_nonzero == 0,
        "measured": {"top_defect_degree": worst_degree, "bound": -5, "odd_k_nonzero": odd_nonzero},
    }


# 11 -------------------------------------------------------------------------
def resolvent_oracle():
    lam = SectorSpec().ray(10)
    samples = resolvent_trace(AlgebraElement.identity(1), lam_grid=lam, K=2)
    mp.dps = 30
    exact_vals = np.array([complex(psi(1, 0.5 - complex(l))) for l in lam])
    err = float(np.abs(samples.values - exact_vals).max())
    D = _inverse_oscillator(1, [0.0])
    K = 1
    s = geometric_grid(20.0, 2e3, 40)
    res_samples = resolvent_trace(D, lam_grid=-s, K=K)
    fit = fit_expansion(res_samples, resolvent_ladder(1, -2, 2, K), 8)
    heat = convert_coefficients(fit, K, 2)
    from_resolvent = -2 * heat.coefficient(0, 1)
    from_heat = 2 * numeric_residue_at_zero(D)
    diff = abs(from_resolvent - from_heat)
    return {
        "passed": err <= 1e-9 and diff <= 1e-3,
        "measured": {
            "polygamma_error": err,
            "tol": 1e-9,
            "residue_resolvent": from_resolvent,
            "residue_heat": from_heat,
            "difference": diff,
            "route_tol": 1e-3,
        },
    }


CRITERIA = [
    (1, "group law, conjugation and translation relations", group_law),
    (2, "metaplectic conjugation of symbols", egorov),
    (3, "heat-trace closed forms", heat_oracles),
    (4, "leading heat exponents", expansion_exponents),
    (5, "fixed-point constant", fixed_point_constant),
    (6, "residue by two routes", residue_two_routes),
    (7, "independence of the auxiliary operator", h_independence),
    (8, "fixed-point-free decay", fixed_point_free),
    (9, "trace property of the localized residue", trace_property),
    (10, "parametrix defect and parity", symbol_defect),
    (11, "resolvent closed form and route agreement", resolvent_oracle),
]


def run_criterion(number):
    for num, name, fn in CRITERIA:
        if num == number:
            start = time.perf_counter()
            out = fn()
            return Criterion(num, name, bool(out["passed"]), out["measured"], time.perf_counter() - start)
    raise KeyError(f"no criterion {number}")


def run_all(selected=None):
    numbers = [num for num, _, _ in CRITERIA] if selected is None else list(selected)
    return [run_criterion(k) for k in numbers]


__all__ = ["CRITERIA", "Criterion", "run_all", "run_criterion"]
