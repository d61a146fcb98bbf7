"""Truncated Hermite-basis matrices of oscillator-basis operators.

Mode matrices are assembled from the ladder operator ``c`` with
``x = (c + c^*)/sqrt 2`` and ``p = (c - c^*)/(i sqrt 2)``. Multi-mode
operators are Kronecker products; mode 0 is the slowest index.

Conventions:
  * ``metaplectic`` realises e^{i phi (1/2 - H_1)} per mode, i.e.
    diag(e^{-i phi k}).
  * ``displacement`` realises T_w u(x) = e^{ikx - iak/2} u(x - a) with
    w = a - ik, as exp(i(k X - a P)).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

from .symbol_calculus import ClassicalSymbol, to_complex

EPS = np.finfo(float).eps


@dataclass
class TruncatedOperator:
    """Dense matrix on span{|k> : k in {0..N-1}^n} with an error estimate.

    ``tail_bound`` estimates the entrywise error on the interior block
    {0..N/2-1}^n. Operators that are exact there carry a round-off floor.
    """

    n: int
    N: int
    data: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        size = self.N**self.n
        if self.data.shape[0] % size or self.data.shape != (self.data.shape[0],) * 2:
            raise ValueError("data must be square with size a multiple of N**n")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite matrix entries")
        if self.tail_bound < 0:
            raise ValueError("tail_bound must be nonnegative")

    @property
    def fiberdim(self):
        return self.data.shape[0] // self.N**self.n

    def interior_indices(self, size=None):
        size = self.N // 2 if size is None else size
        grids = np.meshgrid(*[np.arange(self.N)] * self.n, indexing="ij")
        mask = np.ones([self.N] * self.n, dtype=bool)
        for g in grids:
            mask &= g < size
        idx = np.flatnonzero(mask.ravel())
        f = self.fiberdim
        if f == 1:
            return idx
        block = self.N**self.n
        return np.concatenate([idx + b * block for b in range(f)])

    def interior(self, size=None):
        idx = self.interior_indices(size)
        return self.data[np.ix_(idx, idx)]

    def __matmul__(self, other):
        _check_same(self, other)
        return TruncatedOperator(self.n, self.N, self.data @ other.data, _combine(self, other))

    def __add__(self, other):
        _check_same(self, other)
        return TruncatedOperator(self.n, self.N, self.data + other.data, self.tail_bound + other.tail_bound)

    def __sub__(self, other):
        _check_same(self, other)
        return TruncatedOperator(self.n, self.N, self.data - other.data, self.tail_bound + other.tail_bound)

    def scale(self, c):
        return TruncatedOperator(self.n, self.N, c * self.data, abs(c) * self.tail_bound)

    def adjoint(self):
        return TruncatedOperator(self.n, self.N, self.data.conj().T, self.tail_bound)

    def to_bytes(self):
        """Row-major little-endian (re, im) float64 pairs."""
        return self.data.astype("<c16").tobytes()


def _check_same(a, b):
    if a.n != b.n or a.N != b.N or a.data.shape != b.data.shape:
        raise ValueError("operators live on different truncated spaces")


def _combine(a, b):
    na = np.abs(a.data).max(initial=0.0)
    nb = np.abs(b.data).max(initial=0.0)
    size = a.data.shape[0]
    return a.tail_bound * nb * size + b.tail_bound * na * size + EPS * na * nb * size


@dataclass(frozen=True)
class Estimate:
    """A computed value with an error estimate."""

    value: complex
    uncertainty: float

    def __complex__(self):
        return complex(self.value)


# single-mode building blocks -------------------------------------------------
def annihilation(N, sparse=False):
    c = sp.diags(np.sqrt(np.arange(1, N, dtype=float)), 1, shape=(N, N), format="csr", dtype=complex)
    return c if sparse else c.toarray()


def position(N, sparse=False):
    c = annihilation(N, sparse=True)
    x = (c + c.T) / np.sqrt(2)
    return x.tocsr() if sparse else x.toarray()


def momentum(N, sparse=False):
    c = annihilation(N, sparse=True)
    p = (c - c.T) / (1j * np.sqrt(2))
    return p.tocsr() if sparse else p.toarray()


def _power(M, k, N):
    out = sp.identity(N, dtype=complex, format="csr")
    for _ in range(k):
        out = out @ M
    return out


def mode_matrix(xpow, ppow, N, quantization="weyl", sparse=False):
    """Single-mode matrix of the monomial x^xpow p^ppow.

    weyl: 2^{-a} sum_k C(a,k) X^k P^b X^{a-k}; standard: X^a P^b;
    right: P^b X^a.
    """
    X = position(N, sparse=True)
    P = momentum(N, sparse=True)
    Pb = _power(P, ppow, N)
    if quantization == "standard":
        M = _power(X, xpow, N) @ Pb
    elif quantization == "right":
        M = Pb @ _power(X, xpow, N)
    elif quantization == "weyl":
        M = sp.csr_matrix((N, N), dtype=complex)
        for k in range(xpow + 1):
            M = M + comb(xpow, k) * (_power(X, k, N) @ Pb @ _power(X, xpow - k, N))
        M = M / 2**xpow
    else:
        raise ValueError(f"unknown quantization {quantization!r}")
    M = M.tocsr()
    return M if sparse else M.toarray()


def mode_displacement_factors(w, N):
    """Spectral factors (nodes, vectors, phase) of the truncated generator.

    The generator kX - aP is tridiagonal with off-diagonal entries
    sqrt(j+1)/sqrt2 (k + ia); conjugating with diag(e^{-ij theta}),
    theta = arg(k + ia), makes it |w| X. Hence
    T = S V e^{i|w| nodes} V^T S^*, S = diag(e^{-ij theta}).
    """
    a, k = float(np.real(w)), float(-np.imag(w))
    r = np.hypot(a, k)
    theta = np.arctan2(a, k)
    off = np.sqrt(np.arange(1, N, dtype=float) / 2.0)
    nodes, vecs = eigh_tridiagonal(np.zeros(N), off)
    return r * nodes, vecs, theta


def mode_displacement(w, N):
    """Dense single-mode T_w and its leakage estimate."""
    if w == 0:
        return np.eye(N, dtype=complex), 0.0
    nodes, V, theta = mode_displacement_factors(w, N)
    S = np.exp(-1j * theta * np.arange(N))
    T = (V * np.exp(1j * nodes)) @ V.T
    T = S[:, None] * T * S.conj()[None, :]
    return T, _leakage(T, N)


def _leakage(T, N):
    half = N // 2
    edge = max(np.abs(T[-1, :half]).max(), np.abs(T[:half, -1]).max())
    return float(10.0 * edge + 10 * EPS * np.sqrt(N))


# multi-mode operators --------------------------------------------------------
def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def quantize(a: ClassicalSymbol, n: int, N: int, quantization: str | None = None) -> TruncatedOperator:
    """Matrix of op(a) in the symbol's own quantization (or the one given).

    Only polynomial symbols are accepted; negative orders enter through
    :func:`oscillator_function`.
    """
    if a.n != n:
        raise ValueError(f"symbol has {a.n} modes, expected {n}")
    if not a.is_polynomial():
        raise ValueError("quantize accepts polynomial symbols only")
    q = quantization or a.quantization
    f = a.fiberdim
    size = N**n
    data = np.zeros((f * size, f * size), dtype=complex)
    cache = {}
    biggest = 0.0
    for i in range(f):
        for j in range(f):
            block = np.zeros((size, size), dtype=complex)
            for t in a.terms((i, j)):
                mats = []
                for mode in range(n):
                    key = (t.xpow[mode], t.ppow[mode])
                    if key not in cache:
                        cache[key] = mode_matrix(key[0], key[1], N, q)
                    mats.append(cache[key])
                block += t.coeff * _kron_all(mats)
            data[i * size:(i + 1) * size, j * size:(j + 1) * size] = block
            biggest = max(biggest, np.abs(block).max(initial=0.0))
    nterms = max(1, sum(len(a.terms((i, j))) for i in range(f) for j in range(f)))
    return TruncatedOperator(n, N, data, 16 * EPS * biggest * nterms)


def displacement(w, n: int, N: int) -> TruncatedOperator:
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if w.shape != (n,):
        raise ValueError(f"w must have {n} components")
    mats, tails = [], []
    for wj in w:
        T, tb = mode_displacement(wj, N)
        mats.append(T)
        tails.append(tb)
    return TruncatedOperator(n, N, _kron_all(mats), float(sum(tails)))


def metaplectic(g, n: int, N: int) -> TruncatedOperator:
    """diag(prod_j e^{-i phi_j k_j}) for a diagonal unitary with angles phi."""
    angles = np.atleast_1d(np.asarray(getattr(g, "angles", g), dtype=float))
    if angles.shape != (n,):
        raise ValueError(f"expected {n} angles")
    k = np.arange(N)
    diag = _kron_all([np.exp(-1j * phi * k) for phi in angles])
    return TruncatedOperator(n, N, np.diag(diag), 0.0)


def oscillator_spectrum(n: int, N: int) -> np.ndarray:
    """Eigenvalues sum_j (k_j + 1/2) in Kronecker order."""
    k = np.arange(N) + 0.5
    lam = np.zeros(1)
    for _ in range(n):
        lam = np.add.outer(lam, k).ravel()
    return lam


def oscillator_function(f: Callable, n: int, N: int) -> TruncatedOperator:
    """diag(f(lambda_k)) for the oscillator spectrum."""
    lam = oscillator_spectrum(n, N)
    vals = np.asarray(f(lam), dtype=complex)
    if vals.shape != lam.shape:
        vals = np.broadcast_to(vals, lam.shape).astype(complex)
    if not np.all(np.isfinite(vals)):
        raise ValueError("function is singular on the oscillator spectrum")
    return TruncatedOperator(n, N, np.diag(vals), 0.0)


def functional_calculus(H: TruncatedOperator, f: Callable) -> TruncatedOperator:
    """f(H) for a Hermitian truncated H by dense eigendecomposition."""
    evals, evecs = np.linalg.eigh(H.data)
    vals = np.asarray(f(evals), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise ValueError("function is singular on the spectrum")
    return TruncatedOperator(H.n, H.N, (evecs * vals) @ evecs.conj().T, H.tail_bound)


def trace(M: TruncatedOperator) -> Estimate:
    size = M.data.shape[0]
    return Estimate(complex(np.trace(M.data)), float(M.tail_bound * size))


__all__ = [
    "Estimate",
    "TruncatedOperator",
    "annihilation",
    "displacement",
    "functional_calculus",
    "metaplectic",
    "mode_displacement",
    "mode_matrix",
    "momentum",
    "oscillator_function",
    "oscillator_spectrum",
    "position",
    "quantize",
    "trace",
    "to_complex",
]
