import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fioresidue.group_ops import (
    AlgebraElement,
    DiagonalUnitary,
    GroupElement,
    Summand,
    angle_block,
    commutator,
    fixed_point_data,
    multiply,
    normalize,
    reduce_angle,
    rotate_symbol,
    translate_symbol,
    weyl_phase,
)
from fioresidue.quantization import displacement, metaplectic, quantize
from fioresidue.symbol_calculus import ClassicalSymbol

N = 48


def mono(n, xp, pp, c=1):
    return ClassicalSymbol.from_terms(n, [(c, tuple(xp), tuple(pp), 0)])


def dense(D, n, N):
    out = 0
    for s in D.summands:
        M = metaplectic(s.elem.g, n, N).data @ displacement(s.elem.w, n, N).data @ quantize(s.sym, n, N).data
        out = out + s.scale * M
    return out


angles = st.floats(-3.0, 3.0)
shifts = st.complex_numbers(max_magnitude=0.8)


def test_reduce_angle_snaps_special_values():
    assert reduce_angle(2 * math.pi) == 0.0
    assert reduce_angle(-math.pi) == math.pi
    assert reduce_angle(math.pi / 2 + 1e-14) == math.pi / 2
    assert [angle_block(a) for a in (1.0, math.pi / 2, -math.pi / 2, math.pi, 0.0)] == [1, 2, 3, 4, 5]


def test_profile_counts_blocks():
    g = DiagonalUnitary((0.0, 1.0, math.pi, -math.pi / 2))
    assert g.profile == (1, 0, 1, 1, 1)
    assert g.m5 == 1
    order = g.canonical_order()
    assert g.permuted(order).is_canonical()


def test_weyl_phase_is_antisymmetric():
    v, w = np.array([0.3 + 0.1j]), np.array([-0.2 + 0.7j])
    assert weyl_phase(v, w) == pytest.approx(np.conj(weyl_phase(w, v)))
    assert weyl_phase(v, v) == pytest.approx(1.0)


@settings(max_examples=15, deadline=None)
@given(angles, angles, shifts, shifts)
def test_multiply_matches_matrices(phi1, phi2, w1, w2):
    a1 = mono(1, [1], [0]) + mono(1, [0], [1], 0.5j)
    a2 = mono(1, [2], [0]) + ClassicalSymbol.constant(1, 1.0)
    D1 = AlgebraElement.single(a1, GroupElement.from_config([phi1], [w1.real], [w1.imag]))
    D2 = AlgebraElement.single(a2, GroupElement.from_config([phi2], [w2.real], [w2.imag]))
    prod = multiply(D1, D2, 6)
    lhs = dense(D1, 1, N) @ dense(D2, 1, N)
    rhs = dense(prod, 1, N)
    half = 12
    assert np.abs(lhs[:half, :half] - rhs[:half, :half]).max() < 1e-7


@settings(max_examples=20, deadline=None)
@given(angles, angles)
def test_rotations_compose(phi1, phi2):
    a = mono(1, [2], [1]) + mono(1, [0], [3], 2)
    g1, g2 = DiagonalUnitary((phi1,)), DiagonalUnitary((phi2,))
    once = rotate_symbol(g1 @ g2, a)
    twice = rotate_symbol(g1, rotate_symbol(g2, a))
    pts = np.array([[0.4, -0.9], [1.3, 0.2]])
    assert np.allclose(once.evaluate(pts[:, :1], pts[:, 1:]), twice.evaluate(pts[:, :1], pts[:, 1:]))


def test_rotation_by_quarter_turn_sends_x_to_p():
    g = DiagonalUnitary((math.pi / 2,))
    assert rotate_symbol(g, mono(1, [1], [0])).equals(mono(1, [0], [1]))


def test_translation_evaluates_shifted_symbol():
    b = mono(1, [1], [2])
    w = np.array([0.5 - 0.25j])  # a = 0.5, k = 0.25
    out = translate_symbol(b, w)
    pts = np.array([[0.1, 0.3]])
    assert out.evaluate(pts[:, :1], pts[:, 1:])[0] == pytest.approx((0.1 + 0.5) * (0.3 + 0.25) ** 2)


def test_translation_of_rational_symbol_needs_depth():
    b = ClassicalSymbol.from_terms(1, [(1, (0,), (0,), 1)])
    with pytest.raises(ValueError):
        translate_symbol(b, [0.3])


def test_commutator_of_commuting_elements_vanishes_numerically():
    D = AlgebraElement.single(mono(1, [0], [0]), GroupElement.from_config([1.0], [0.0], [0.0]))
    C = commutator(D, D, 4)
    assert np.abs(dense(C, 1, 16)).max() < 1e-12


def test_fixed_point_data():
    assert fixed_point_data(GroupElement.from_config([0.0, 1.0], [0.0, 0.5], [0.0, 0.0])) == (1, True)
    assert fixed_point_data(GroupElement.from_config([0.0, 1.0], [0.5, 0.0], [0.0, 0.0])) == (1, False)
    assert fixed_point_data(GroupElement.from_config([2.0], [0.5], [0.1])) == (0, True)


def test_normalize_diagonalises_a_swap():
    swap = np.array([[0, 1], [1, 0]], dtype=complex)
    elem, u = normalize(swap, [1.0, 1.0])
    assert sorted(elem.g.angles) == [0.0, math.pi]
    assert np.allclose(u @ np.diag(np.exp(1j * np.array(elem.g.angles))) @ u.conj().T, swap)
    assert np.allclose(u @ elem.w, [1.0, 1.0])


def test_normalize_rejects_non_unitary():
    with pytest.raises(ValueError):
        normalize(np.array([[2.0]]), [0.0])


def test_summand_order_counts_oscillator_power():
    s = Summand(1.0, GroupElement.identity(1), mono(1, [2], [0]), 2)
    assert s.order == -2
    folded = s.folded(4)
    assert folded.osc_power == 0 and folded.sym.order == -2
