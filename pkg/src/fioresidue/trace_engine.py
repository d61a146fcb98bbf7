"""Trace curves Tr(D f(H)) and fits of their small-t / large-|lambda| expansions.

D is an AlgebraElement whose summands are scale * R_g T_w op(a) H_0^{-s}
with polynomial a. H is the oscillator H_0, a power H_0^p (order 2p), or
an arbitrary Hermitian TruncatedOperator (dense path, no tail handling).

For oscillator H every summand is diagonalised mode by mode: the diagonal
of R_g T_w op(a) is a sum over monomials of Kronecker products of single
mode diagonals, and f(H) only depends on the shell |k| = s. So each trace
is sum_s conv[s] f(s + n/2), with conv the shell sums of the diagonal.
When w = 0 the diagonal is phase times polynomial in k, and for algebraic
f the series tail is added in closed form: Euler-Maclaurin (mpmath.sumem)
for non-oscillating parts, the Euler transform for oscillating ones.
"""

from __future__ import annotations

import csv
import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
import scipy.optimize
from scipy.special import digamma, gamma

from .group_ops import AlgebraElement, fixed_point_data
from .quantization import (
    TruncatedOperator,
    displacement,
    metaplectic,
    mode_displacement_factors,
    mode_matrix,
    quantize,
)

EPS = np.finfo(float).eps


class FitError(RuntimeError):
    """Ill-conditioned or inconsistent fit."""


class SpectrumError(ValueError):
    """Resolvent parameter too close to the spectrum."""


# Hamiltonians and spectral functions ----------------------------------------
@dataclass(frozen=True)
class Oscillator:
    """H = H_0^power, of order 2 * power."""

    power: int = 1

    @property
    def order(self):
        return 2 * self.power


@dataclass(frozen=True)
class OscillatorFunction:
    """f(H_0^p) for kind 'heat' (e^{-t H}), 'power' (H^{-z}) or 'resolvent' ((H - lam)^{-K})."""

    kind: str
    param: complex
    power: int = 1
    K: int = 1

    def __post_init__(self):
        if self.kind not in ("heat", "power", "resolvent"):
            raise ValueError(f"unknown function kind {self.kind!r}")

    @property
    def algebraic(self):
        return self.kind != "heat"

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        h = lam**self.power
        if self.kind == "heat":
            return np.exp(-self.param * h)
        if self.kind == "power":
            return np.exp(-self.param * np.log(h))
        return (h - self.param) ** (-self.K)

    def mp(self, lam):
        h = mpmath.mpf(lam) ** self.power
        if self.kind == "heat":
            return mpmath.exp(-mpmath.mpc(self.param) * h)
        if self.kind == "power":
            return mpmath.exp(-mpmath.mpc(self.param) * mpmath.log(h))
        return (h - mpmath.mpc(self.param)) ** (-self.K)


@dataclass(frozen=True)
class SectorSpec:
    """Sector |arg lam - pi| < delta and the sampling ray inside it."""

    delta: float = math.pi / 2
    ray_arg: float = math.pi
    radius_min: float = 10.0
    radius_max: float = 1e4

    def __post_init__(self):
        if not 0 < self.delta <= math.pi:
            raise ValueError("delta must lie in (0, pi]")
        if abs(np.angle(np.exp(1j * (self.ray_arg - math.pi)))) >= self.delta:
            raise ValueError("ray lies outside the sector")

    def ray(self, count):
        r = geometric_grid(self.radius_min, self.radius_max, count)
        return r * np.exp(1j * self.ray_arg)


def geometric_grid(start, stop, count):
    if start <= 0 or stop <= start or count < 2:
        raise ValueError("geometric grid needs 0 < start < stop and count >= 2")
    return np.geomspace(start, stop, int(count))


# samples ---------------------------------------------------------------------
@dataclass
class TraceSamples:
    kind: str
    grid: np.ndarray
    values: np.ndarray
    uncertainty: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=complex)
        self.values = np.asarray(self.values, dtype=complex)
        self.uncertainty = np.asarray(self.uncertainty, dtype=float)
        if not (self.grid.shape == self.values.shape == self.uncertainty.shape):
            raise ValueError("grid, values and uncertainty must have equal length")
        key = np.abs(self.grid) if self.kind == "resolvent" else self.grid.real
        d = np.diff(key)
        if len(d) and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("grid must be strictly monotone")

    def __len__(self):
        return len(self.grid)

    def rows(self):
        for p, v, u in zip(self.grid, self.values, self.uncertainty):
            yield [repr(float(p.real)), repr(float(p.imag)), repr(float(v.real)), repr(float(v.imag)), repr(float(u))]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["param_re", "param_im", "trace_re", "trace_im", "uncertainty"])
            w.writerows(self.rows())

    @classmethod
    def from_csv(cls, path, kind="heat"):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        grid = [float(r["param_re"]) + 1j * float(r["param_im"]) for r in rows]
        vals = [float(r["trace_re"]) + 1j * float(r["trace_im"]) for r in rows]
        unc = [float(r["uncertainty"]) for r in rows]
        return cls(kind, grid, vals, unc)


# diagonal profiles ------------------------------------------------------------
# a displaced mode needs a dense eigenvector matrix; this caps its size
MAX_DISPLACED_CUTOFF = 6000


@functools.lru_cache(maxsize=1)
def _factors(a, k, Ntot):
    return mode_displacement_factors(complex(a, -k), Ntot)


def displacement_margin(w, N_int, deg=0):
    return int(12 * abs(w) * math.sqrt(N_int) + 20 + deg)


def mode_diagonal(phi, w, xpow, ppow, N_int, quantization="weyl"):
    """Diagonal of e^{-i phi k} (T_w op(x^xpow p^ppow)) for k < N_int, plus a leakage estimate."""
    deg = xpow + ppow
    phase = np.exp(-1j * phi * np.arange(N_int))
    if w == 0:
        M = mode_matrix(xpow, ppow, N_int + deg + 1, quantization, sparse=True)
        return phase * M.diagonal()[:N_int], 0.0
    Ntot = N_int + displacement_margin(w, N_int, deg)
    nodes, V, theta = _factors(float(np.real(w)), float(-np.imag(w)), Ntot)
    M = mode_matrix(xpow, ppow, Ntot, quantization, sparse=True)
    cos, sin = np.cos(nodes), np.sin(nodes)
    out = np.zeros(N_int, dtype=complex)
    chunk = 256
    for d in range(-deg, deg + 1):
        md = M.diagonal(-d)  # md[i] = M[i + d, i]  (d >= 0) or M[i, i - d]
        if not np.any(md):
            continue
        lo = max(0, -d)
        for start in range(lo, N_int, chunk):
            stop = min(N_int, start + chunk)
            rows = V[start:stop]
            other = V[start + d:stop + d]
            band = (rows * other) @ cos + 1j * ((rows * other) @ sin)
            mvals = md[start:stop] if d >= 0 else md[start + d:stop + d]
            out[start:stop] += np.exp(1j * d * theta) * band * mvals
    edge = abs(V[N_int - 1] @ (V[Ntot - 1] * np.exp(1j * nodes)))
    return phase * out, float(10 * edge)


def _poly_diagonal(xpow, ppow, quantization):
    """Coefficients of the polynomial k -> op(x^a p^b)_kk, or None if it is not one."""
    deg = xpow + ppow
    npts = deg + 8
    diag = mode_matrix(xpow, ppow, npts + deg + 1, quantization).diagonal()[:npts]
    k = np.arange(npts, dtype=float)
    top = deg // 2
    coeffs = np.polyfit(k, diag, top) if top else np.array([diag.mean()])
    if np.abs(np.polyval(coeffs, k) - diag).max() > 1e-9 * (1 + np.abs(diag).max()):
        return None
    return coeffs


@dataclass
class _Item:
    coeff: complex
    osc_power: int
    shells: np.ndarray
    leakage: float
    closed: list | None  # per mode (phi, poly coeffs) when w = 0


def diagonal_items(D: AlgebraElement, N_int: int):
    items = []
    n = D.n
    for s in D.summands:
        sym = s.sym.trace_fiber() if s.sym.fiberdim > 1 else s.sym
        if not sym.is_polynomial():
            raise ValueError("summand symbols must be polynomial; use osc_power for H_0^{-s} factors")
        w = s.elem.w
        angles = s.elem.g.angles
        for term in sym.terms():
            mats, leak, closed = [], 0.0, []
            for j in range(n):
                diag, lk = mode_diagonal(angles[j], w[j], term.xpow[j], term.ppow[j], N_int, sym.quantization)
                mats.append(diag)
                leak += lk
                if closed is not None and w[j] == 0:
                    c = _poly_diagonal(term.xpow[j], term.ppow[j], sym.quantization)
                    closed = None if c is None else closed + [(angles[j], c)]
                else:
                    closed = None
            shells = mats[0]
            for m in mats[1:]:
                shells = np.convolve(shells, m)[:N_int]
            items.append(_Item(s.scale * complex(term.coeff), s.osc_power, shells, leak, closed))
    return items


def _shell_values(closed, count):
    """Exact shell sums of prod_j e^{-i phi_j k_j} P_j(k_j) for s < count."""
    k = np.arange(count, dtype=float)
    out = None
    for phi, c in closed:
        vals = np.exp(-1j * phi * k) * np.polyval(c, k)
        out = vals if out is None else np.convolve(out, vals)[:count]
    return out


def _shell_decomposition(closed):
    """Write the shell sum as sum_r z_r^s Q_r(s); returns [(z, coeffs)] or None.

    One mode is immediate. For two modes the convolution of z1^k P1(k) and
    z2^k P2(k) is z1^s A(s) + z2^s B(s) with deg A, B <= deg P1 + deg P2
    (one more when z1 = z2); A and B are recovered by least squares on the
    exact values and checked on further ones.
    """
    if len(closed) == 1:
        phi, c = closed[0]
        return [(np.exp(-1j * phi), np.asarray(c, dtype=complex))]
    if len(closed) != 2:
        return None
    (p1, c1), (p2, c2) = closed
    d = (len(c1) - 1) + (len(c2) - 1)
    z1, z2 = np.exp(-1j * p1), np.exp(-1j * p2)
    groups = [(z1, d + 1)] if abs(z1 - z2) < 1e-9 else [(z1, d), (z2, d)]
    count = 4 * (d + 2) + 12
    s = np.arange(count, dtype=float)
    cols = []
    for z, deg in groups:
        cols += [z**s * s**j for j in range(deg, -1, -1)]
    A = np.column_stack(cols)
    vals = _shell_values(closed, count)
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    if np.abs(A @ coef - vals).max() > 1e-9 * (1 + np.abs(vals).max()):
        return None
    out, pos = [], 0
    for z, deg in groups:
        out.append((z, coef[pos:pos + deg + 1]))
        pos += deg + 1
    return out


def _oscillating_tail(z, g, start, dps=60, terms=40):
    """sum_{s >= start} z^s g(s) by the Euler transform

    z^start / (1 - z) * sum_j (z / (1 - z))^j Delta^j g(start).
    """
    with mpmath.workdps(dps):
        z = mpmath.mpc(z)
        ratio = z / (1 - z)
        vals = [g(start + i) for i in range(terms + 1)]
        total, last = mpmath.mpc(0), mpmath.mpf(0)
        diffs = vals
        for j in range(terms):
            term = ratio**j * diffs[0]
            total += term
            last = abs(term)
            if j > 4 and last < mpmath.mpf(10) ** (-25) * abs(total):
                break
            diffs = [b - a for a, b in zip(diffs[:-1], diffs[1:])]
        scale = z**start / (1 - z)
        return complex(scale * total), float(abs(scale) * last)


def _plain_tail(g, start):
    with mpmath.workdps(30):
        value = mpmath.sumem(g, [start, mpmath.inf])
    return complex(value), 1e-15 * abs(complex(value))


def _series_tail(items, f, n, start):
    """Sum of all shells s >= start, or None when no closed form is available."""
    total, err = 0j, 0.0
    for it in items:
        parts = _shell_decomposition(it.closed)
        if parts is None:
            return None
        for z, coeffs in parts:
            cm = [mpmath.mpc(c) for c in coeffs]
            osc = it.osc_power

            def g(s, cm=cm, osc=osc):
                lam = mpmath.mpf(s) + mpmath.mpf(n) / 2
                return mpmath.polyval(cm, s) * f.mp(lam) * lam ** (-osc)

            if abs(z - 1) < 1e-14:
                v, e = _plain_tail(g, start)
            else:
                v, e = _oscillating_tail(z, g, start)
            total += it.coeff * v
            err += abs(it.coeff) * e
    return total, err


# evaluation -------------------------------------------------------------------
def _evaluate(items, f: OscillatorFunction, n, N_int, tail=True):
    lam = np.arange(N_int) + n / 2
    fv = f(lam)
    total, mag, edge, leak = 0j, 0.0, 0.0, 0.0
    for it in items:
        terms = it.coeff * it.shells * fv * lam ** (-float(it.osc_power))
        total += terms.sum()
        mag += np.abs(terms).sum()
        edge += np.abs(terms[-8:]).max() if N_int >= 8 else 0.0
        leak += abs(it.coeff) * it.leakage * np.abs(fv * lam ** (-float(it.osc_power))).max()
    unc = 4 * EPS * mag + leak
    closed = None
    if tail and f.algebraic and all(it.closed is not None for it in items):
        closed = _series_tail(items, f, n, N_int)
    if closed is not None:
        total += closed[0]
        unc += closed[1]
    else:
        # crude remainder: the last shells repeated as far again
        unc += edge * (N_int if f.algebraic else 1.0)
    return total, unc


def _summand_orders(D):
    out = []
    for s in D.summands:
        m5, has_fp = fixed_point_data(s.elem)
        out.append((s.order, m5, has_fp, s.sym.polynomial_degree() if s.sym.is_polynomial() else 0))
    return out


def _auto_cutoff_heat(D, t_min, power):
    deg = max(d for _, _, _, d in _summand_orders(D))
    n = D.n
    budget = 45 + (deg / 2 + n) * math.log(10 + 1 / t_min)
    return int(math.ceil((budget / t_min) ** (1 / power))) + 8


def _dense_trace(D, H: TruncatedOperator, fn, grid):
    evals, evecs = np.linalg.eigh(H.data)
    Dm = quantize_element(D, H.N)
    Dt = evecs.conj().T @ Dm.data @ evecs
    vals, unc = [], []
    for p in grid:
        fv = fn(evals, p)
        vals.append(np.sum(np.diag(Dt) * fv))
        unc.append(float(Dm.tail_bound * len(evals) * np.abs(fv).max() + H.tail_bound * len(evals)))
    return np.array(vals), np.array(unc)


def quantize_element(D: AlgebraElement, N: int) -> TruncatedOperator:
    """Dense matrix of D on the truncated basis (no H_0^{-s} factors allowed)."""
    out = None
    for s in D.summands:
        if s.osc_power:
            raise ValueError("dense quantization does not take H_0^{-s} factors")
        M = metaplectic(s.elem.g, D.n, N) @ displacement(s.elem.w, D.n, N) @ quantize(s.sym, D.n, N)
        M = M.scale(s.scale)
        out = M if out is None else out + M
    return out


def _oscillator_traces(D, H, funcs, N_int, threads=1):
    items = diagonal_items(D, N_int)
    n = D.n

    def one(f):
        return _evaluate(items, f, n, N_int)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            res = list(ex.map(one, funcs))
    else:
        res = [one(f) for f in funcs]
    vals = np.array([r[0] for r in res])
    unc = np.array([r[1] for r in res])
    return vals, unc


def heat_trace(D: AlgebraElement, H=None, t_grid=None, N=None, threads=1) -> TraceSamples:
    """Tr(D e^{-tH}) on a grid of t > 0."""
    H = Oscillator() if H is None else H
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise ValueError("heat traces need t > 0")
    if isinstance(H, TruncatedOperator):
        vals, unc = _dense_trace(D, H, lambda ev, t: np.exp(-t * ev), t_grid)
        return TraceSamples("heat", t_grid, vals, unc, {"N": H.N})
    N_int = N or _auto_cutoff_heat(D, t_grid.min(), H.power)
    if N is None and any(np.any(s.elem.w) for s in D.summands):
        N_int = min(N_int, MAX_DISPLACED_CUTOFF)
    funcs = [OscillatorFunction("heat", t, H.power) for t in t_grid]
    vals, unc = _oscillator_traces(D, H, funcs, N_int, threads)
    return TraceSamples("heat", t_grid, vals, unc, {"N": N_int, "order_H": H.order})


def _check_trace_class(D, H, what, bound):
    for order, _, _, _ in _summand_orders(D):
        if not bound(order):
            raise ValueError(f"{what}: trace-class condition fails for a summand of order {order}")


def resolvent_trace(D: AlgebraElement, H=None, lam_grid=None, K=1, N=None, threads=1) -> TraceSamples:
    """Tr(D (H - lam)^{-K}) on lam values in the resolvent set."""
    H = Oscillator() if H is None else H
    lam_grid = np.asarray(lam_grid, dtype=complex)
    if isinstance(H, TruncatedOperator):
        vals, unc = _dense_trace(D, H, lambda ev, lam: (ev - lam) ** (-K), lam_grid)
        return TraceSamples("resolvent", lam_grid, vals, unc, {"N": H.N, "K": K})
    n = D.n
    _check_trace_class(D, H, "resolvent_trace", lambda a: K * H.order - a > 2 * n)
    for lam in lam_grid:
        top = abs(lam) ** (1 / H.power) + 2
        ev = (np.arange(int(top) + 2) + n / 2) ** H.power
        if np.min(np.abs(ev - lam)) < 1e-9:
            raise SpectrumError(f"lambda = {lam} is on the spectrum")
    N_int = N or max(400, int(4 * np.abs(lam_grid).max() ** (1 / H.power)) + 64)
    funcs = [OscillatorFunction("resolvent", lam, H.power, K) for lam in lam_grid]
    vals, unc = _oscillator_traces(D, H, funcs, N_int, threads)
    return TraceSamples("resolvent", lam_grid, vals, unc, {"N": N_int, "K": K, "order_H": H.order})


def zeta_trace(D: AlgebraElement, H=None, z_list=None, N=None, threads=1) -> TraceSamples:
    """Tr(D H^{-z}) in the half-plane of absolute convergence."""
    H = Oscillator() if H is None else H
    z_list = np.asarray(z_list, dtype=complex)
    if isinstance(H, TruncatedOperator):
        vals, unc = _dense_trace(D, H, lambda ev, z: np.exp(-z * np.log(ev.astype(complex))), z_list)
        return TraceSamples("zeta", z_list, vals, unc, {"N": H.N})
    n = D.n
    for z in z_list:
        _check_trace_class(D, H, "zeta_trace", lambda a: H.order * z.real > 2 * n + a)
    N_int = N or 400
    funcs = [OscillatorFunction("power", z, H.power) for z in z_list]
    vals, unc = _oscillator_traces(D, H, funcs, N_int, threads)
    return TraceSamples("zeta", z_list, vals, unc, {"N": N_int, "order_H": H.order})


# expansions ------------------------------------------------------------------
@dataclass(frozen=True)
class ExpansionTerm:
    exponent: Fraction
    logpow: int
    coeff: complex
    stderr: float = 0.0

    @property
    def key(self):
        return (self.exponent, self.logpow)


@dataclass
class AsymptoticExpansion:
    """sum coeff * v^exponent * (ln v)^logpow.

    ``variable`` is 't' (t -> 0+) for heat expansions and 's' (s = -lambda
    -> infinity) for resolvent expansions.
    """

    variable: str
    terms: list
    residual: float = 0.0
    condition: float = 1.0

    def __post_init__(self):
        self.terms = sorted(self.terms, key=lambda t: (t.exponent, -t.logpow))

    def coefficient(self, exponent, logpow=0):
        e = Fraction(exponent)
        for t in self.terms:
            if t.exponent == e and t.logpow == logpow:
                return t.coeff
        return 0j

    def term(self, exponent, logpow=0):
        e = Fraction(exponent)
        for t in self.terms:
            if t.exponent == e and t.logpow == logpow:
                return t
        return None

    def evaluate(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape, dtype=complex)
        for t in self.terms:
            out += t.coeff * v ** float(t.exponent) * np.log(v) ** t.logpow
        return out

    def report(self):
        return {
            "variable": self.variable,
            "terms": [
                {
                    "exponent": str(t.exponent),
                    "log_power": t.logpow,
                    "coeff_re": t.coeff.real,
                    "coeff_im": t.coeff.imag,
                    "stderr": t.stderr,
                }
                for t in self.terms
            ],
            "residual": self.residual,
            "condition": self.condition,
        }


def _merge(ladder):
    seen = []
    for e, l in ladder:
        key = (Fraction(e), int(l))
        if key not in seen:
            seen.append(key)
    return sorted(seen, key=lambda k: (k[0], -k[1]))


def heat_ladder(m5, order, m, j_max=8):
    """Exponents (j - 2 m5 - order)/m for j <= j_max, and t^j, t^j ln t for integers j >= 0.

    With no fixed mode (m5 = 0) the zeta function is entire, so only
    t^j for integers 0 <= j <= (j_max - order)/m remain.
    """
    out = [(Fraction(j - 2 * m5 - order, m), 0) for j in range(j_max + 1)]
    top = max(e for e, _ in out)
    if m5 == 0:
        return [(Fraction(j), 0) for j in range(0, max(int(math.floor(top)), 0) + 1)]
    for j in range(0, int(math.floor(top)) + 1):
        out += [(Fraction(j), 0), (Fraction(j), 1)]
    return _merge(out)


def resolvent_ladder(m5, order, m, K, j_max=8):
    """Exponents of s = -lambda: (2 m5 + order - j)/m - K, and s^{-K-j} with and without ln s.

    For m5 = 0 only the s^{-K-j} terms without logarithm remain.
    """
    out = [(Fraction(2 * m5 + order - j, m) - K, 0) for j in range(j_max + 1)]
    bottom = min(e for e, _ in out)
    if m5 == 0:
        return [(Fraction(-K - j), 0) for j in range(0, max(int(math.floor(-K - bottom)), 0) + 1)]
    j = 0
    while -K - j >= bottom:
        out += [(Fraction(-K - j), 0), (Fraction(-K - j), 1)]
        j += 1
    return sorted(set(out), key=lambda k: (-k[0], -k[1]))


def ladder_for(D: AlgebraElement, m, j_max=8, K=None):
    """Union of the ladders of the summands (fixed-point data taken per summand)."""
    out = []
    for order, m5, _, _ in _summand_orders(D):
        if K is None:
            out += heat_ladder(m5, order, m, j_max)
        else:
            out += resolvent_ladder(m5, order, m, K, j_max)
    if K is None:
        return _merge(out)
    return sorted(set(out), key=lambda k: (-k[0], -k[1]))


def fit_expansion(samples: TraceSamples, ladder, count=None, cond_max=1e13) -> AsymptoticExpansion:
    """Least-squares coefficients of the first ``count`` ladder entries.

    Heat samples are fitted in t; resolvent samples in s = -lambda (the
    ray arg lambda = pi), using the basis s^e (ln s)^l.
    """
    if samples.kind == "resolvent":
        s = -samples.grid
        if np.abs(s.imag).max() > 1e-12 * np.abs(s).max() or np.any(s.real <= 0):
            raise FitError("resolvent fits need samples on the negative real axis")
        v = s.real
        variable = "s"
        order_key = lambda k: (-k[0], -k[1])  # noqa: E731
    else:
        v = samples.grid.real
        variable = "t"
        order_key = lambda k: (k[0], -k[1])  # noqa: E731
        if np.any(v <= 0):
            raise FitError("heat fits need t > 0")
    basis = sorted(_merge(ladder), key=order_key)
    if count is not None:
        basis = basis[:count]
    if not basis:
        raise FitError("empty ladder")
    if len(basis) > len(v):
        raise FitError("more basis functions than samples")
    A = np.column_stack([v ** float(e) * np.log(v) ** l for e, l in basis])
    y = samples.values
    scale = np.linalg.norm(A, axis=0)
    if np.any(scale == 0) or not np.all(np.isfinite(A)):
        raise FitError("degenerate basis")
    As = A / scale
    U, sv, Vt = np.linalg.svd(As, full_matrices=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    if cond > cond_max:
        raise FitError(f"ill-conditioned basis (condition {cond:.3g})")
    coef_s = Vt.T @ ((U.conj().T @ y) / sv)
    resid = y - As @ coef_s
    dof = len(v) - len(basis)
    sigma2 = (np.linalg.norm(resid) ** 2 / dof) if dof > 0 else 0.0
    sigma2 = max(sigma2, float(np.mean(samples.uncertainty**2)), (EPS * np.abs(y).max()) ** 2)
    cov_diag = np.sum((Vt.T / sv) ** 2, axis=1) * sigma2
    coef = coef_s / scale
    stderr = np.sqrt(cov_diag) / scale
    terms = [ExpansionTerm(e, l, complex(c), float(se)) for (e, l), c, se in zip(basis, coef, stderr)]
    return AsymptoticExpansion(variable, terms, float(np.linalg.norm(resid)), cond)


def log_term_present(term: ExpansionTerm, factor=10.0):
    return term is not None and abs(term.coeff) > factor * term.stderr


def convert_coefficients(src: AsymptoticExpansion, K: int, m: int | None = None) -> AsymptoticExpansion:
    """Heat coefficients from a resolvent expansion in s = -lambda.

    Through Tr(D (H+s)^{-K}) = Gamma(K)^{-1} int t^{K-1} e^{-st} Tr(D e^{-tH}) dt:
      * c s^e (no log)         <- heat c Gamma(K)/Gamma(-e) t^{-e-K}
      * c' s^{-K-j} ln s        <- heat -c~' t^j ln t, c~' = c' (K-1)!/(j+K-1)!
      * the heat t^j coefficient also receives c~' psi(j + K).
    ``m`` (the order of H) only checks that exponents sit on a 1/m grid.
    """
    if src.variable != "s":
        raise ValueError("convert_coefficients expects a resolvent expansion")
    out = {}

    def add(key, c, se):
        prev = out.get(key)
        out[key] = (c, se) if prev is None else (prev[0] + c, math.hypot(prev[1], se))

    for t in src.terms:
        e = t.exponent
        if m is not None and (e * m).denominator != 1:
            raise ValueError(f"exponent {e} is off the 1/{m} ladder")
        beta = -e - K
        if t.logpow == 1:
            j = beta
            if j.denominator != 1 or j < 0:
                raise ValueError(f"log term at s^{e} is off the ladder")
            j = int(j)
            factor = math.factorial(K - 1) / math.factorial(j + K - 1)
            ct = t.coeff * factor
            add((Fraction(j), 1), -ct, t.stderr * factor)
            add((Fraction(j), 0), ct * digamma(j + K), t.stderr * factor * abs(digamma(j + K)))
        elif t.logpow == 0:
            if (-e).denominator == 1 and -e <= 0:
                continue  # Gamma pole: no heat counterpart
            factor = gamma(K) / gamma(float(-e))
            add((beta, 0), t.coeff * factor, t.stderr * abs(factor))
        else:
            raise ValueError("log powers above 1 are not supported")
    terms = [ExpansionTerm(k[0], k[1], complex(c), float(se)) for k, (c, se) in out.items()]
    return AsymptoticExpansion("t", terms, src.residual, src.condition)


def default_heat_grid(D, m, count=40):
    """Geometric t-grid for residue fits.

    Displaced summands need dense eigenvectors, so their grid starts where
    the cutoff stays below MAX_DISPLACED_CUTOFF. When no summand has an
    affine fixed point the trace is O(t^inf); the grid then sits just above
    the smallest t the displaced cutoff allows, where the curve is at
    round-off level and the fitted log term is tested against its error. The same grid serves H_0 and its powers
    (``m`` is accepted for symmetry with the ladders).
    """
    data = _summand_orders(D)
    displaced = any(np.any(s.elem.w) for s in D.summands)
    if not any(has_fp for _, _, has_fp, _ in data):
        return geometric_grid(0.0075, 0.015, count)
    return geometric_grid(0.01 if displaced else 0.003, 0.08, count)


def numeric_residue_at_zero(D, H=None, t_grid=None, count=None, N=None, j_max=8, detect=True, return_fit=False):
    """-(coefficient of t^0 ln t) in the heat expansion of Tr(D e^{-tH}).

    Multiplying by the order of H gives the residue. With ``detect`` the
    log term counts only when it exceeds ten fit standard errors; otherwise
    the value is 0.
    """
    H = Oscillator() if H is None else H
    m = H.order
    t_grid = default_heat_grid(D, m) if t_grid is None else np.asarray(t_grid, dtype=float)
    samples = heat_trace(D, H, t_grid, N)
    ladder = ladder_for(D, m, j_max)
    if count is not None:
        fit = fit_expansion(samples, ladder, count)
    else:
        fit = _fit_shrinking(samples, ladder, _default_count(ladder, len(t_grid)))
    term = fit.term(0, 1)
    if term is None or (detect and not log_term_present(term)):
        value = 0j
    else:
        value = -term.coeff
    return (value, fit) if return_fit else value


def _fit_shrinking(samples, ladder, count):
    """Fit with ``count`` terms, dropping the last ones while the basis is ill-conditioned."""
    ordered = _merge(ladder)
    need = ordered.index((Fraction(0), 1)) + 1 if (Fraction(0), 1) in ordered else 1
    while True:
        try:
            return fit_expansion(samples, ordered, count)
        except FitError:
            if count <= need:
                raise
            count -= 1


def _default_count(ladder, nsamples, top=4):
    keep = [k for k in ladder if k[0] <= top]
    return min(len(keep), max(1, nsamples // 2))


def leading_exponent(samples: TraceSamples, m, terms=4, with_log=False, bounds=(-6.0, 3.0)):
    """Best-fit leading exponent e of sum_j t^{e + j/m} by variable projection.

    ``with_log`` adds t^{e + j/m} ln t columns; they make the leading
    power nearly degenerate, so they are off unless asked for.
    """
    t = samples.grid.real
    y = samples.values

    def basis(e):
        cols = []
        for j in range(terms):
            cols.append(t ** (e + j / m))
            if with_log:
                cols.append(t ** (e + j / m) * np.log(t))
        return np.column_stack(cols)

    def resid(e):
        A = basis(e)
        scale = np.linalg.norm(A, axis=0)
        c, *_ = np.linalg.lstsq(A / scale, y, rcond=None)
        r = y - (A / scale) @ c
        return float(np.linalg.norm(r) / np.linalg.norm(y))

    grid = np.arange(bounds[0], bounds[1] + 1e-12, 0.01)
    vals = [resid(e) for e in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = scipy.optimize.minimize_scalar(resid, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    return float(res.x)


__all__ = [
    "AsymptoticExpansion",
    "ExpansionTerm",
    "FitError",
    "Oscillator",
    "OscillatorFunction",
    "SectorSpec",
    "SpectrumError",
    "TraceSamples",
    "convert_coefficients",
    "default_heat_grid",
    "diagonal_items",
    "fit_expansion",
    "geometric_grid",
    "heat_ladder",
    "heat_trace",
    "ladder_for",
    "leading_exponent",
    "log_term_present",
    "mode_diagonal",
    "numeric_residue_at_zero",
    "quantize_element",
    "resolvent_ladder",
    "resolvent_trace",
    "zeta_trace",
]
