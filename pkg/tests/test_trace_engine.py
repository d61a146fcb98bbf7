import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fioresidue.group_ops import AlgebraElement, GroupElement, Summand
from fioresidue.quantization import TruncatedOperator
from fioresidue.symbol_calculus import ClassicalSymbol
from fioresidue.trace_engine import (
    AsymptoticExpansion,
    ExpansionTerm,
    FitError,
    Oscillator,
    SectorSpec,
    SpectrumError,
    TraceSamples,
    convert_coefficients,
    fit_expansion,
    geometric_grid,
    heat_ladder,
    heat_trace,
    leading_exponent,
    log_term_present,
    numeric_residue_at_zero,
    resolvent_ladder,
    resolvent_trace,
    zeta_trace,
)


def rotated(angles, sym=None, w=None, osc_power=0):
    n = len(angles)
    w = np.zeros(n, complex) if w is None else np.asarray(w, complex)
    e = GroupElement.from_config(angles, w.real, w.imag)
    return AlgebraElement((Summand(1.0, e, sym or ClassicalSymbol.constant(n), osc_power),))


def test_heat_trace_of_rotation():
    t = np.array([0.1, 0.5, 1.5])
    vals = heat_trace(rotated([1.0]), t_grid=t).values
    assert np.allclose(vals, np.exp(-t / 2) / (1 - np.exp(-1j - t)), atol=1e-12)


def test_heat_trace_of_displacement_matches_closed_form():
    # Tr(T_w e^{-tH_0}) = e^{-|w|^2 coth(t/2)/4} / (2 sinh(t/2))
    t = np.array([0.2, 0.5])
    vals = heat_trace(rotated([0.0], w=[0.8 + 0.3j]), t_grid=t).values
    ref = np.exp(-abs(0.8 + 0.3j) ** 2 / (4 * np.tanh(t / 2))) / (2 * np.sinh(t / 2))
    assert np.allclose(vals, ref, rtol=1e-9, atol=1e-12)


def test_heat_trace_dense_route_agrees():
    D = rotated([0.7], sym=ClassicalSymbol.from_terms(1, [(1, (2,), (0,), 0)]))
    N = 60
    H = TruncatedOperator(1, N, np.diag(np.arange(N) + 0.5))
    t = np.array([0.5, 1.0])
    dense = heat_trace(D, H, t).values
    fast = heat_trace(D, t_grid=t, N=N).values
    assert np.allclose(dense, fast, atol=1e-9)


def test_zeta_trace_two_modes():
    # sum over N of (N+1)^{-z} sum_{k <= N} e^{-i phi k}
    z, phi = 2.5, 2.0
    q = mpmath.exp(-1j * phi)
    ref = complex((mpmath.zeta(z) - mpmath.polylog(z, q)) / (1 - q))
    val = zeta_trace(rotated([0.0, phi]), z_list=[z]).values[0]
    assert abs(val - ref) < 1e-12


def test_zeta_trace_checks_convergence():
    with pytest.raises(ValueError):
        zeta_trace(AlgebraElement.identity(1), z_list=[0.8])


def test_resolvent_trace_polygamma():
    lam = SectorSpec().ray(5)
    vals = resolvent_trace(AlgebraElement.identity(1), lam_grid=lam, K=2).values
    ref = [complex(mpmath.psi(1, 0.5 - complex(l))) for l in lam]
    assert np.allclose(vals, ref, rtol=1e-12)


def test_resolvent_on_spectrum_is_rejected():
    with pytest.raises(SpectrumError):
        resolvent_trace(AlgebraElement.identity(1), lam_grid=[1.5], K=2)


def test_sector_rejects_ray_outside():
    with pytest.raises(ValueError):
        SectorSpec(delta=0.1, ray_arg=0.0)


def test_ladders():
    lad = heat_ladder(1, -2, 2, 2)
    assert (Fraction(0), 1) in lad and (Fraction(0), 0) in lad
    assert heat_ladder(0, 0, 2, 4) == [(Fraction(0), 0), (Fraction(1), 0), (Fraction(2), 0)]
    r = resolvent_ladder(1, -2, 2, 1, 2)
    assert (Fraction(-1), 1) in r


@settings(max_examples=20, deadline=None)
@given(
    st.floats(-2, 2),
    st.floats(-2, 2),
    st.floats(-2, 2),
)
def test_fit_recovers_synthetic_expansion(c0, clog, c1):
    t = geometric_grid(0.01, 0.2, 30)
    y = 1 / t + clog * np.log(t) + c0 + c1 * t
    samples = TraceSamples("heat", t, y, np.zeros_like(t))
    ladder = [(Fraction(-1), 0), (Fraction(0), 1), (Fraction(0), 0), (Fraction(1), 0)]
    fit = fit_expansion(samples, ladder)
    assert fit.coefficient(-1) == pytest.approx(1, abs=1e-8)
    assert fit.coefficient(0, 1) == pytest.approx(clog, abs=1e-8)
    assert fit.coefficient(0) == pytest.approx(c0, abs=1e-8)


def test_fit_refuses_ill_conditioned_basis():
    t = geometric_grid(0.5, 0.5001, 10)
    samples = TraceSamples("heat", t, t, np.zeros_like(t))
    with pytest.raises(FitError):
        fit_expansion(samples, [(Fraction(k), 0) for k in range(5)])


def test_convert_coefficients_laplace_pairs():
    # K = 1: t^{-1/2} <-> Gamma(1/2) s^{-1/2}, t^0 <-> s^{-1}, ln t <-> -(ln s + gamma)/s
    src = AsymptoticExpansion(
        "s",
        [
            ExpansionTerm(Fraction(-1, 2), 0, math.gamma(0.5)),
            ExpansionTerm(Fraction(-1), 1, 2.0),
            ExpansionTerm(Fraction(-1), 0, 0.25),
        ],
    )
    heat = convert_coefficients(src, 1)
    assert heat.coefficient(Fraction(-1, 2)) == pytest.approx(1.0)
    assert heat.coefficient(0, 1) == pytest.approx(-2.0)
    assert heat.coefficient(0) == pytest.approx(0.25 + 2.0 * float(mpmath.digamma(1)))


def test_convert_coefficients_against_numeric_laplace():
    # int_0^inf e^{-st} ln t dt = -(ln s + gamma)/s, so that pair maps back to ln t alone
    s = 7.0
    direct = mpmath.quad(lambda t: mpmath.exp(-s * t) * mpmath.log(t), [0, mpmath.inf])
    assert float(direct) == pytest.approx(-(math.log(s) + float(mpmath.euler)) / s)
    euler = float(mpmath.euler)
    src = AsymptoticExpansion("s", [ExpansionTerm(Fraction(-1), 1, -1.0), ExpansionTerm(Fraction(-1), 0, -euler)])
    heat = convert_coefficients(src, 1)
    assert heat.coefficient(0, 1) == pytest.approx(1.0)
    assert abs(heat.coefficient(0)) < 1e-12


def test_log_term_detection():
    assert log_term_present(ExpansionTerm(Fraction(0), 1, 1.0, 0.01))
    assert not log_term_present(ExpansionTerm(Fraction(0), 1, 0.05, 0.01))
    assert not log_term_present(None)


def test_numeric_residue_inverse_oscillator():
    D = rotated([0.0], osc_power=1)
    assert 2 * numeric_residue_at_zero(D) == pytest.approx(2.0, abs=1e-3)


def test_numeric_residue_of_identity_vanishes():
    assert numeric_residue_at_zero(AlgebraElement.identity(1)) == 0


def test_numeric_residue_independent_of_oscillator_power():
    D = rotated([0.0], osc_power=1)
    r2 = 2 * numeric_residue_at_zero(D, Oscillator(1))
    r4 = 4 * numeric_residue_at_zero(D, Oscillator(2))
    assert abs(r2 - r4) < 1e-3


def test_leading_exponent_of_two_modes():
    t = geometric_grid(0.001, 0.05, 30)
    samples = heat_trace(AlgebraElement.identity(2), t_grid=t)
    assert leading_exponent(samples, 2) == pytest.approx(-2.0, abs=0.02)


def test_csv_round_trip(tmp_path):
    t = geometric_grid(0.05, 2, 40)
    s = heat_trace(AlgebraElement.identity(1), t_grid=t)
    path = tmp_path / "h.csv"
    s.to_csv(path)
    back = TraceSamples.from_csv(path)
    assert np.array_equal(back.values, s.values) and np.array_equal(back.grid, s.grid)
    assert len(back) == 40 and np.all(np.diff(back.grid.real) > 0)


def test_samples_require_monotone_grid():
    with pytest.raises(ValueError):
        TraceSamples("heat", [0.1, 0.3, 0.2], [1, 2, 3], [0, 0, 0])
