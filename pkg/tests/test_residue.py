import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fioresidue.group_ops import AlgebraElement, GroupElement, Summand
from fioresidue.residue import (
    QuadraticPhase,
    chained_prefactor,
    localized_trace,
    normalize_summand,
    phase_eigenvalues,
    prefactor_Cncr,
    reduce_trace_integral,
    residue_closed_form,
    sphere_integral,
    stationary_phase_quadratic,
)
from fioresidue.group_ops import DiagonalUnitary
from fioresidue.symbol_calculus import ClassicalSymbol, Poly, RadialRational
from fioresidue.trace_engine import numeric_residue_at_zero

SPECIAL = [math.pi / 2, -math.pi / 2, math.pi, 0.0]


def mono(n, xp, pp, c=1, radpow=0):
    return ClassicalSymbol.from_terms(n, [(c, tuple(xp), tuple(pp), radpow)])


def element(angles, w=None):
    n = len(angles)
    w = np.zeros(n, complex) if w is None else np.asarray(w, complex)
    return GroupElement.from_config(angles, w.real, w.imag)


def single(sym, angles, w=None, osc_power=0, scale=1.0):
    return AlgebraElement((Summand(scale, element(angles, w), sym, osc_power),))


generic = st.floats(0.05, 3.09).flatmap(lambda a: st.sampled_from([a, -a])).filter(
    lambda a: min(abs(abs(a) - math.pi / 2), abs(abs(a) - math.pi)) > 1e-3
)
any_angle = st.one_of(generic, st.sampled_from(SPECIAL))
shift = st.complex_numbers(max_magnitude=2.0)


# phase data -----------------------------------------------------------------
def test_phase_eigenvalues_at_third_turn():
    [(lp, lm)] = phase_eigenvalues(DiagonalUnitary((math.pi / 3,)))
    assert lp == pytest.approx((math.sqrt(3) - 1) / 2)
    assert lm == pytest.approx((math.sqrt(3) + 1) / 2)


@settings(max_examples=50, deadline=None)
@given(generic)
def test_phase_eigenvalue_identities(phi):
    [(lp, lm)] = phase_eigenvalues(DiagonalUnitary((phi,)))
    assert 4 * lp * lm == pytest.approx(2 * (1 - math.cos(phi)) / math.cos(phi))
    [(lp2, lm2)] = phase_eigenvalues(DiagonalUnitary((-phi,)))
    assert lp2 == pytest.approx(-lm) and lm2 == pytest.approx(-lp)
    assert lp != 0 and lm != 0


def test_phase_eigenvalues_reject_special_angles():
    from fioresidue.residue import _single_phase_eigenvalues

    with pytest.raises(ValueError):
        _single_phase_eigenvalues(math.pi / 2 + 1e-13)


def test_reduction_constants_identity():
    data = reduce_trace_integral(element([0.0, 0.0]))
    assert data.C_res == pytest.approx((2 * math.pi) ** -2)
    assert not np.any(data.b0)
    assert data.n_prime == 4


def test_reduction_constants_quarter_turn():
    data = reduce_trace_integral(element([math.pi / 2]))
    assert data.C_res == pytest.approx((2 * math.pi) ** -0.5)
    assert data.n_prime == 1


def test_shift_vector():
    phi, w = 1.1, 0.4 - 0.9j
    a, k = w.real, -w.imag
    c = 1 / math.tan(phi / 2)
    data = reduce_trace_integral(element([phi], [w]))
    assert data.b0[0] == pytest.approx((a - k * c) / 2)
    assert data.b0[1] == pytest.approx((a * c + k) / 2)


@settings(max_examples=200, deadline=None)
@given(st.lists(any_angle, min_size=1, max_size=4))
def test_quadratic_phase_invariants(angles):
    if all(a == 0.0 for a in angles):
        return
    g = DiagonalUnitary(tuple(angles))
    data = reduce_trace_integral(GroupElement(g, np.zeros(len(angles))))
    Q = np.array(data.phase.Q)
    det, sig = data.phase.expected_invariants(g.permuted(g.canonical_order()))
    assert np.prod(np.abs(Q)) == pytest.approx(det, rel=1e-9)
    assert int(np.sum(np.sign(Q))) == sig


def test_quadratic_phase_rejects_singular():
    with pytest.raises(ValueError):
        QuadraticPhase.from_diagonal([1.0, 0.0])


# constants ------------------------------------------------------------------
def test_Cncr_identity():
    assert prefactor_Cncr(element([0.0, 0.0])) == pytest.approx(1 / (4 * math.pi**2))


@settings(max_examples=30, deadline=None)
@given(generic)
def test_Cncr_one_mode_matches_geometric_series(phi):
    # t^0 coefficient of e^{-t/2}/(1 - e^{-i phi - t}) is 1/(1 - e^{-i phi})
    assert prefactor_Cncr(element([phi])) == pytest.approx(1 / (1 - cmath.exp(-1j * phi)))


@settings(max_examples=200, deadline=None)
@given(st.lists(any_angle, min_size=1, max_size=3), st.lists(shift, min_size=3, max_size=3))
def test_prefactor_chain_identity(angles, ws):
    n = len(angles)
    w = np.array([0j if angles[j] == 0.0 else ws[j] for j in range(n)])
    e = element(angles, w)
    assert chained_prefactor(e) == pytest.approx(prefactor_Cncr(e), rel=1e-10, abs=1e-14)


def test_Cncr_requires_fixed_point():
    with pytest.raises(ValueError):
        prefactor_Cncr(element([0.0], [1.0]))


# sphere integrals -----------------------------------------------------------
def test_sphere_integral_constant_on_circle():
    assert sphere_integral(RadialRational(Poly.constant(2, 1), 1), 1) == pytest.approx(2 * math.pi)


def test_sphere_integral_second_moment_on_three_sphere():
    layer = RadialRational(Poly.variable(4, 0) * Poly.variable(4, 0), 3)
    assert sphere_integral(layer, 2) == pytest.approx(math.pi**2 / 2, abs=1e-10)


def test_sphere_integral_of_inverse_oscillator_layer():
    layer = mono(1, [0], [0], 2, radpow=1)
    assert sphere_integral(layer, 1) == pytest.approx(4 * math.pi, abs=1e-10)


def test_sphere_integral_against_quadrature():
    # x^2 p^4 / rho^4 on S^1 by direct quadrature
    layer = RadialRational(Poly(2, {(2, 4): 1}), 4)
    ref = mpmath.quad(lambda t: mpmath.cos(t) ** 2 * mpmath.sin(t) ** 4, [0, 2 * mpmath.pi])
    assert sphere_integral(layer, 1) == pytest.approx(float(ref), abs=1e-10)


def test_sphere_integral_degree_mismatch():
    with pytest.raises(ValueError):
        sphere_integral(RadialRational(Poly.variable(2, 0), 1), 1)


# stationary phase -----------------------------------------------------------
def test_stationary_phase_constant():
    out = stationary_phase_quadratic(Poly.constant(1, 1), [2.0], 2)
    assert out[0] == (0, 1) and all(v == 0 for _, v in out[1:])


def test_stationary_phase_second_moment():
    # Gaussian moment oracle: int s^2 e^{-a s^2} / int e^{-a s^2} = 1/(2a), checked by
    # quadrature at Re a > 0; the phase (i/2) Q s^2 with Q = 2 is a = -i, giving i/2.
    a = 1 - 1j
    num = mpmath.quad(lambda s: s**2 * mpmath.exp(-a * s**2), [-mpmath.inf, mpmath.inf])
    den = mpmath.quad(lambda s: mpmath.exp(-a * s**2), [-mpmath.inf, mpmath.inf])
    assert complex(num / den) == pytest.approx(1 / (2 * a))
    s2 = Poly.variable(1, 0) * Poly.variable(1, 0)
    out = dict(stationary_phase_quadratic(s2, [2.0], 2))
    assert out[1] == pytest.approx(1 / (2 * -1j))
    assert out[1] == pytest.approx(0.5j)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 3), st.floats(0.3, 3.0), st.sampled_from([1, -1]))
def test_stationary_phase_odd_vanishes(k, q, sign):
    d = Poly(1, {(2 * k + 1,): 1})
    assert all(v == 0 for _, v in stationary_phase_quadratic(d, [sign * q], 4))


def test_stationary_phase_singular():
    with pytest.raises(ValueError):
        stationary_phase_quadratic(Poly.constant(1, 1), [0.0], 1)


# residue --------------------------------------------------------------------
def test_residue_inverse_oscillator():
    assert residue_closed_form(single(ClassicalSymbol.constant(1), [0.0], osc_power=1)) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("phi", [2 * math.pi / 3, 1.0, math.pi / 2, -math.pi / 2, math.pi, -0.7])
def test_residue_rotated_two_modes(phi):
    D = single(ClassicalSymbol.constant(2), [0.0, phi], osc_power=1)
    expected = 1 - 1j / math.tan(phi / 2)
    assert residue_closed_form(D) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize(
    "sym, angles, w, s",
    [
        (mono(2, [2, 0], [0, 0]), [0.0, 1.0], None, 2),
        (mono(2, [0, 2], [0, 0]), [0.0, 1.0], None, 1),
        (mono(2, [0, 2], [0, 0]), [0.0, math.pi / 2], None, 1),
        (mono(2, [0, 1], [0, 0]), [0.0, math.pi / 2], [0, 0.5 - 0.3j], 1),
        (mono(2, [0, 0], [0, 1]), [0.0, -math.pi / 2], [0, 0.5 - 0.3j], 1),
        (mono(2, [0, 1], [0, 0]), [0.0, math.pi], [0, 0.5 - 0.3j], 1),
        (mono(2, [0, 1], [0, 1]), [0.0, math.pi], [0, 0.3 + 0.2j], 1),
    ],
)
def test_residue_two_routes(sym, angles, w, s):
    D = single(sym, angles, w, s)
    closed = residue_closed_form(D)
    numeric = 2 * numeric_residue_at_zero(D)
    assert abs(closed - numeric) < 1e-3 * max(1.0, abs(closed))


def test_polynomial_symbols_have_no_residue():
    D = single(mono(2, [1, 2], [1, 0]), [0.0, 1.0])
    assert residue_closed_form(D) == 0


def test_fixed_point_free_summand_vanishes():
    D = single(ClassicalSymbol.constant(2), [0.0, 1.0], [0.5, 0.0], 1)
    assert residue_closed_form(D) == 0


def test_no_fixed_mode_gives_zero():
    assert residue_closed_form(single(ClassicalSymbol.constant(1), [1.0], osc_power=1)) == 0


def test_low_order_gives_zero():
    assert residue_closed_form(single(ClassicalSymbol.constant(1), [0.0], osc_power=2)) == 0


@settings(max_examples=10, deadline=None)
@given(st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
def test_linearity(c1, c2):
    D1 = single(mono(2, [2, 0], [0, 0]), [0.0, 1.0], osc_power=2)
    D2 = single(ClassicalSymbol.constant(2), [0.0, 2.0], osc_power=1)
    combo = D1.scale(c1) + D2.scale(c2)
    expected = c1 * residue_closed_form(D1) + c2 * residue_closed_form(D2)
    assert residue_closed_form(combo) == pytest.approx(expected, abs=1e-12)


def test_permutation_conjugation_invariance():
    # g = diag(e^{i phi}, 1) written in swapped mode order
    phi = 1.3
    sym = mono(2, [0, 2], [0, 0]) + mono(2, [1, 0], [1, 0], 0.5)
    direct = Summand(1.0, element([phi, 0.0]), sym, 2)
    g_raw = np.diag([np.exp(1j * phi), 1.0])
    swapped = normalize_summand(g_raw, [0.0, 0.0], sym, 1.0, 2)
    a = residue_closed_form(AlgebraElement((direct,)))
    b = residue_closed_form(AlgebraElement((swapped,)))
    assert a == pytest.approx(b, abs=1e-10)
    assert a != 0


def test_localized_trace_membership():
    s1 = Summand(1.0, element([0.0, 1.0]), ClassicalSymbol.constant(2), 1)
    s2 = Summand(1.0, element([0.0, 2.0]), ClassicalSymbol.constant(2), 1)
    D = AlgebraElement((s1, s2))
    cls1 = [element([0.0, 1.0])]
    assert localized_trace(D, cls1) == pytest.approx(residue_closed_form(AlgebraElement((s1,))))
    assert localized_trace(D, [element([0.0, 0.5])]) == 0
    # same class listed in the other mode order
    assert localized_trace(D, [element([1.0, 0.0])]) == pytest.approx(residue_closed_form(AlgebraElement((s1,))))
