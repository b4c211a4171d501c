"""Jacobi fields along a geodesic: fundamental basis, zeros and monodromy.

The basis is s (s(0)=0, s'(0)=1) and c (c(0)=1, c'(0)=0) for
u'' + eps*kappa(t) u = 0.  Any solution vanishing at a with unit slope there
is u_a(t) = c(a) s(t) - s(a) c(t); conjugate points are pairs of zeros of
one such solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import NotPeriodic, NumericFailure, SpanExhausted
from .geodesic import GeodesicTrace


class JacobiBasis:
    """Dense fundamental solutions on [t_lo, t_hi].

    ``values(t)`` returns the rows (s, s', c, c').  ``eps_kappa(t)`` is the
    coefficient of the equation.  ``omega`` is set for periodic traces.
    """

    def __init__(self, values, eps_kappa, t_lo: float, t_hi: float, omega: float | None = None,
                 beta0: float | None = None, trace: GeodesicTrace | None = None):
        self._values = values
        self.eps_kappa = eps_kappa
        self.t_lo = float(t_lo)
        self.t_hi = float(t_hi)
        self.omega = omega
        self.beta0 = beta0
        self.trace = trace
        self._grid_cache = None

    def values(self, t) -> np.ndarray:
        scalar = np.ndim(t) == 0
        v = self._values(np.atleast_1d(np.asarray(t, dtype=float)))
        return v[:, 0] if scalar else v

    def s(self, t):
        return self.values(t)[0]

    def sp(self, t):
        return self.values(t)[1]

    def c(self, t):
        return self.values(t)[2]

    def cp(self, t):
        return self.values(t)[3]

    def beta(self, t):
        if self.beta0 is None:
            raise ValueError("beta is only defined for bases built on a geodesic")
        return self.beta0 * self.s(t)

    def wronskian(self, t):
        v = self.values(t)
        return v[2] * v[1] - v[3] * v[0]

    def solution(self, a: float):
        """Coefficients (p, q) with u_a = p*s + q*c, u_a(a) = 0, u_a'(a) = 1."""
        s, _, c, _ = self.values(a)
        return c, -s

    def grid(self, step: float | None = None):
        """Cached fine sampling (t, s, c) used by zero searches."""
        if self._grid_cache is None or (step is not None and step < self._grid_cache[0]):
            if step is None:
                step = (self.omega / 200.0) if self.omega else (self.t_hi - self.t_lo) / 4000.0
            n = max(int(math.ceil((self.t_hi - self.t_lo) / step)), 16)
            ts = np.linspace(self.t_lo, self.t_hi, n + 1)
            v = self.values(ts)
            self._grid_cache = (step, ts, v[0], v[2])
        return self._grid_cache[1:]


def fundamental_basis(trace: GeodesicTrace) -> JacobiBasis:
    """Basis along a trace; the augmented integration already carries s and c."""
    p = trace.profile
    eps = trace.eps

    def values(t):
        return trace.state(t)[2:6]

    def eps_kappa(t):
        return eps * trace.kappa(t)

    beta0 = 0.5 * eps * p.derivs(trace.z0)[1]
    return JacobiBasis(values, eps_kappa, trace.t_begin, trace.t_end, trace.omega, beta0, trace)


def basis_from_coefficient(r, t_lo: float, t_hi: float, omega: float | None = None,
                           rtol: float = 1e-12, atol: float = 1e-13) -> JacobiBasis:
    """Basis for u'' + r(t) u = 0 with r given directly (synthetic fixtures)."""

    def rhs(t, y):
        k = r(t)
        return [y[1], -k * y[0], y[3], -k * y[2]]

    y0 = [0.0, 1.0, 1.0, 0.0]
    segs = []
    if t_hi > 0:
        segs.append(solve_ivp(rhs, (0.0, t_hi), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=True))
    if t_lo < 0:
        segs.append(solve_ivp(rhs, (0.0, t_lo), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=True))
    for sol in segs:
        if sol.status < 0:
            raise NumericFailure(sol.message)

    def values(t):
        out = np.empty((4, t.size))
        pos = t >= 0
        if np.any(pos):
            out[:, pos] = segs[0].sol(np.clip(t[pos], 0.0, t_hi))
        if np.any(~pos):
            out[:, ~pos] = segs[-1].sol(np.clip(t[~pos], t_lo, 0.0))
        return out

    def eps_kappa(t):
        return np.vectorize(r, otypes=[float])(t) if np.ndim(t) else float(r(t))

    return JacobiBasis(values, eps_kappa, t_lo, t_hi, omega)


# ---------------------------------------------------------------------------
# zeros


def _first_zero_after(basis: JacobiBasis, a: float, p_coef: float, q_coef: float) -> float:
    ts, S, C = basis.grid()
    u = p_coef * S + q_coef * C
    sep = 1e-6 * max(basis.omega or 1.0, 1e-3)
    start = int(np.searchsorted(ts, a + sep, side="right"))
    if start >= ts.size - 1:
        raise SpanExhausted(f"no room after a = {a!r} inside the basis span")
    # value just after a is positive (unit slope); bracket the first sign change
    seg = u[start:]
    neg = np.nonzero(seg <= 0.0)[0]
    if neg.size == 0:
        raise SpanExhausted(f"solution vanishing at a = {a!r} has no further zero before t = {basis.t_hi!r}")
    j = start + int(neg[0])
    lo = ts[j - 1] if j > start else a + sep
    hi = ts[j]
    g = lambda t: p_coef * basis.s(t) + q_coef * basis.c(t)
    if g(hi) == 0.0:
        return float(hi)
    if g(lo) <= 0.0:  # zero squeezed between a and the first grid node
        lo = a + sep * 1e-3
    return brentq(g, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)


def next_zero(basis: JacobiBasis, a: float) -> float:
    """Smallest zero greater than a of the solution vanishing at a."""
    if not basis.t_lo <= a < basis.t_hi:
        raise SpanExhausted(f"a = {a!r} outside the basis span")
    p_coef, q_coef = basis.solution(a)
    return _first_zero_after(basis, a, p_coef, q_coef)


def zeros_of(basis: JacobiBasis, p_coef: float, q_coef: float, lo: float, hi: float) -> np.ndarray:
    """All zeros of p*s + q*c on (lo, hi)."""
    ts, S, C = basis.grid()
    m = (ts > lo) & (ts < hi)
    t, u = ts[m], p_coef * S[m] + q_coef * C[m]
    out = []
    g = lambda x: p_coef * basis.s(x) + q_coef * basis.c(x)
    for i in np.nonzero(np.sign(u[:-1]) * np.sign(u[1:]) < 0)[0]:
        out.append(brentq(g, t[i], t[i + 1], xtol=1e-13, rtol=4 * np.finfo(float).eps))
    out.extend(float(x) for x in t[u == 0.0])
    return np.array(sorted(out))


# ---------------------------------------------------------------------------
# monodromy


@dataclass(frozen=True)
class Monodromy:
    matrix: np.ndarray  # columns: images of c and s, in the basis (c, s)
    period: float

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def is_identity(self, tol: float = 1e-6) -> bool:
        return bool(np.max(np.abs(self.matrix - np.eye(2))) < tol)

    def is_minus_identity(self, tol: float = 1e-6) -> bool:
        return bool(np.max(np.abs(self.matrix + np.eye(2))) < tol)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))


def monodromy_over(basis: JacobiBasis, period: float) -> Monodromy:
    """Shift operator u(t) -> u(t + period) written in the basis (c, s)."""
    s, sp, c, cp = basis.values(period)
    # c(t + T) = c(T) c(t) + c'(T) s(t); s(t + T) = s(T) c(t) + s'(T) s(t)
    return Monodromy(np.array([[c, s], [cp, sp]]), period)


def monodromy(trace: GeodesicTrace, basis: JacobiBasis) -> Monodromy:
    if trace is None or not trace.periodic:
        raise NotPeriodic("monodromy needs a periodic trace")
    return monodromy_over(basis, 4.0 * trace.omega)


def min_gap(trace: GeodesicTrace | None, basis: JacobiBasis, grid_n: int = 200):
    """Smallest distance between consecutive zeros of a Jacobi field.

    Scans a over one kappa period [-4w, 0); every solution has a zero within
    4w of any point (interlacing with s, whose zeros are 2w apart), so the
    next zero stays inside the span.  Returns (gap, argmin a).
    """
    omega = basis.omega if trace is None else (trace.omega if trace.periodic else None)
    if omega is None:
        raise NotPeriodic("min_gap needs a periodic trace")
    period = 4.0 * omega
    best = (math.inf, None)
    for a in np.linspace(-period, 0.0, grid_n, endpoint=False):
        gap = next_zero(basis, float(a)) - a
        if gap < best[0]:
            best = (gap, float(a))
    return best


# ---------------------------------------------------------------------------
# analytic identities along periodic traces


def identity_residuals(trace: GeodesicTrace, basis: JacobiBasis, n: int = 801, symmetric: bool = False) -> dict:
    """Residuals of the structural identities that every periodic trace obeys."""
    w = trace.omega
    p = trace.profile
    out = {}
    ts = np.linspace(-4 * w, 4 * w, n)
    out["wronskian"] = float(np.max(np.abs(basis.wronskian(ts) - 1.0)))
    out["energy"] = float(np.max(trace.energy_residual(ts)))

    # beta' = eps f'(x)/2, checked against the Jacobi solution beta0 * s'
    st = trace.state(ts)
    fp = p.derivs_array(st[0])[1]
    out["beta_prime"] = float(np.max(np.abs(basis.beta0 * st[3] - 0.5 * trace.eps * fp)))
    f = p.derivs_array(st[0])[0]
    out["beta_conservation"] = float(np.max(np.abs(trace.c2 - (basis.beta0 * st[2]) ** 2 - trace.eps * f)))

    tk = np.linspace(-4 * w, 0.0, n)
    k_neg, k_pos, k_shift = trace.kappa(tk), trace.kappa(-tk), trace.kappa(tk + 4 * w)
    out["kappa_even"] = float(np.max(np.abs(k_neg - k_pos)))
    out["kappa_period"] = float(np.max(np.abs(k_shift - k_neg)))

    b_neg, b_pos, b_shift = basis.beta(tk), basis.beta(-tk), basis.beta(tk + 4 * w)
    out["beta_odd"] = float(np.max(np.abs(b_neg + b_pos)))
    out["beta_period"] = float(np.max(np.abs(b_shift - b_neg)))
    zs = zeros_of(basis, 1.0, 0.0, -4 * w + 0.5 * w, 4 * w - 0.5 * w)
    out["beta_zeros"] = zs.tolist()
    out["beta_zero_spacing"] = float(np.max(np.abs(np.diff(zs) - 2 * w))) if zs.size > 1 else math.nan

    tau = 2 * w
    k = basis.cp(tau) / basis.sp(tau)
    tt = np.linspace(0.0, 2 * tau, n)
    out["reflection_identity"] = float(np.max(np.abs(basis.c(2 * tau - tt) - basis.c(tt) + 2 * k * basis.s(tt))))
    out["c_at_2w"] = float(basis.c(2 * w))
    if symmetric:
        t2 = np.linspace(0.0, 2 * w, n)
        k_half = basis.c(w) / basis.s(w)
        out["kappa_half_period"] = float(np.max(np.abs(trace.kappa(t2 + 2 * w) - trace.kappa(t2))))
        resid = basis.c(2 * w - t2) - 2 * k_half * basis.s(t2) + basis.c(t2)
        out["half_period_identity"] = float(np.max(np.abs(resid)))
    return out


def simple_zero_slopes(basis: JacobiBasis, a_values) -> float:
    """Smallest |u'| at located zeros of the solutions vanishing at each a."""
    worst = math.inf
    for a in a_values:
        try:
            z = next_zero(basis, a)
        except SpanExhausted:
            continue
        p_coef, q_coef = basis.solution(a)
        slope = p_coef * basis.sp(z) + q_coef * basis.cp(z)
        worst = min(worst, abs(slope))
    return worst

