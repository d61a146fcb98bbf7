import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from fioresidue.quantization import (
    TruncatedOperator,
    annihilation,
    displacement,
    functional_calculus,
    metaplectic,
    mode_matrix,
    momentum,
    oscillator_function,
    oscillator_spectrum,
    position,
    quantize,
    trace,
)
from fioresidue.symbol_calculus import ClassicalSymbol

N = 40


def test_canonical_commutator_on_interior():
    X, P = position(N), momentum(N)
    C = X @ P - P @ X
    assert np.allclose(C[: N - 1, : N - 1], 1j * np.eye(N - 1))


def test_oscillator_is_diagonal():
    H = quantize(ClassicalSymbol.oscillator(1), 1, N).data
    assert np.allclose(H[: N - 1, : N - 1], np.diag(np.arange(N - 1) + 0.5))


def test_quantizations_differ_by_ordering():
    X, P = position(N), momentum(N)
    assert np.allclose(mode_matrix(1, 1, N, "standard"), X @ P)
    assert np.allclose(mode_matrix(1, 1, N, "right"), P @ X)
    assert np.allclose(mode_matrix(1, 1, N, "weyl"), (X @ P + P @ X) / 2)


def test_displacement_agrees_with_matrix_exponential():
    # exp(i(kX - aP)) on a large truncation is accurate on the interior
    w = 0.7 - 0.4j
    a, k = w.real, -w.imag
    big = 160
    X, P = position(big), momentum(big)
    ref = expm(1j * (k * X - a * P))[:20, :20]
    T = displacement([w], 1, 64).data[:20, :20]
    assert np.abs(T - ref).max() < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.complex_numbers(max_magnitude=1.5))
def test_displacement_is_unitary_on_interior(w):
    T = displacement([w], 1, 80)
    inner = (T.adjoint() @ T).interior(20)
    assert np.abs(inner - np.eye(20)).max() < 1e-9


def test_displacement_vacuum_overlap():
    # <0|T_w|0> = exp(-|w|^2/4)
    w = 0.9 + 0.3j
    T = displacement([w], 1, 60).data
    assert abs(T[0, 0] - np.exp(-abs(w) ** 2 / 4)) < 1e-12


def test_metaplectic_is_diagonal_phase():
    R = metaplectic([0.3, -1.0], 2, 5).data
    assert R[7, 7] == pytest.approx(np.exp(-1j * (0.3 * 1 - 1.0 * 2)))


def test_spectrum_kronecker_order():
    lam = oscillator_spectrum(2, 3)
    assert lam.tolist() == [1, 2, 3, 2, 3, 4, 3, 4, 5]


def test_oscillator_function_and_functional_calculus_agree():
    H = TruncatedOperator(1, 12, np.diag(np.arange(12) + 0.5))
    a = functional_calculus(H, lambda e: np.exp(-0.3 * e)).data
    b = oscillator_function(lambda e: np.exp(-0.3 * e), 1, 12).data
    assert np.allclose(a, b)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_oscillator_function_rejects_poles():
    with pytest.raises(ValueError):
        oscillator_function(lambda e: 1 / (e - 0.5), 1, 4)


def test_trace_estimate_and_bytes():
    M = TruncatedOperator(1, 4, np.eye(4), 1e-15)
    est = trace(M)
    assert est.value == 4 and est.uncertainty == pytest.approx(4e-15)
    assert len(M.to_bytes()) == 16 * 16


def test_quantize_rejects_rational_symbols():
    sym = ClassicalSymbol.from_terms(1, [(1, (0,), (0,), 1)])
    with pytest.raises(ValueError):
        quantize(sym, 1, 8)


def test_annihilation_lowers():
    c = annihilation(5)
    assert c[1, 2] == pytest.approx(np.sqrt(2))
