"""Radial dynamics of non-null geodesics launched tangent to the Killing field.

Along a geodesic of causal type eps with squared Clairaut constant C2 the
transverse coordinate obeys x'^2 = C2 - eps f(x), hence x'' = -eps f'(x)/2.
A trace starts at the tangency point z0 (x' = 0, eps f(z0) = C2), leaves the
band through its nearest null orbit, crosses the neighbouring band and either
turns in a later band of the same sign (Periodic) or creeps towards a
critical orbit whose critical value equals C2 (Asymptotic).

The Jacobi equation u'' + eps*kappa(t) u = 0 with kappa = f''(x(t))/2 is
integrated in the same ODE system, so kappa is never interpolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .errors import BranchSingular, HorizonExceeded, NoTangency, NumericFailure, ProfileError
from .profile import Band, FProfile

ASYMPTOTIC_DIST = 1e-6
ASYMPTOTIC_SPEED = 1e-8
_APPROACH_SWITCH = 1e-4
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class LaunchSpec:
    eps: int
    c2: float
    band: int  # global band index, see FProfile.band_at
    side: str  # "left" or "right" of the band's peak

    def __post_init__(self):
        if self.eps not in (1, -1):
            raise ValueError("eps must be +1 or -1")
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        if not (self.c2 > 0 and math.isfinite(self.c2)):
            raise ValueError("C^2 must be a positive finite number")


@dataclass(frozen=True)
class Classification:
    kind: str  # Periodic | Asymptotic | CriticalOrbit | Perpendicular
    omega: float | None = None
    x_limit: float | None = None

    def as_dict(self) -> dict:
        return {"kind": self.kind, "omega": self.omega, "x_limit": self.x_limit}


@dataclass
class _Segment:
    t0: float
    t1: float
    sol: object  # scipy OdeSolution

    def __call__(self, t):
        return self.sol(t)


@dataclass
class GeodesicTrace:
    profile: FProfile
    spec: LaunchSpec
    z0: float
    direction: int  # sign of x' on (0, t_turn)
    crossings_x: tuple[float, ...]  # null orbits met in travel order
    crossings_t: tuple[float, ...]
    t_turn: float | None
    x_turn: float | None
    x_limit: float | None  # critical coordinate for asymptotic traces
    classification: Classification
    t_end: float
    t_begin: float  # most negative time available (<= 0)
    horizon_exceeded: bool = False
    tail: dict | None = None
    _forward: list = field(default_factory=list, repr=False)
    _backward: list = field(default_factory=list, repr=False)
    _mirror: bool = field(default=True, repr=False)

    # -- basic data -------------------------------------------------------
    @property
    def eps(self) -> int:
        return self.spec.eps

    @property
    def c2(self) -> float:
        return self.spec.c2

    @property
    def C(self) -> float:
        """Signed Clairaut constant on the regular y-branch (eps*C = direction*|C|)."""
        return self.spec.eps * self.direction * math.sqrt(self.spec.c2)

    @property
    def t0(self) -> float | None:
        return self.crossings_t[0] if self.crossings_t else None

    @property
    def t1(self) -> float | None:
        return self.crossings_t[1] if len(self.crossings_t) > 1 else None

    @property
    def omega(self) -> float | None:
        return None if self.t_turn is None else 0.5 * self.t_turn

    @property
    def periodic(self) -> bool:
        return self.classification.kind == "Periodic"

    # -- dense state ------------------------------------------------------
    def state(self, t) -> np.ndarray:
        """Augmented state (x, x', s, s', c, c') at time(s) t; shape (6,) or (6, n)."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((6, t.size))
        if np.any(t > self.t_end * (1 + 1e-12) + 1e-12) or np.any(t < self.t_begin * (1 + 1e-12) - 1e-12):
            raise ValueError(f"t outside the integrated span [{self.t_begin}, {self.t_end}]")
        pos = t >= 0
        if np.any(pos):
            out[:, pos] = _eval_segments(self._forward, t[pos])
        neg = ~pos
        if np.any(neg):
            if self._mirror:
                v = _eval_segments(self._forward, -t[neg])
                v[[1, 2, 5]] *= -1.0  # x' and s, c' are odd; x, s', c are even
                out[:, neg] = v
            else:
                out[:, neg] = _eval_segments(self._backward, t[neg])
        return out[:, 0] if scalar else out

    def x(self, t):
        return self.state(t)[0]

    def xprime(self, t):
        return self.state(t)[1]

    def kappa(self, t):
        """Curvature f''(x(t))/2 along the trace."""
        x = self.x(t)
        if np.ndim(x) == 0:
            return 0.5 * self.profile.derivs(float(x))[2]
        return 0.5 * self.profile.derivs_array(x)[2]

    def energy_residual(self, t) -> np.ndarray:
        st = self.state(np.atleast_1d(t))
        f = self.profile.derivs_array(st[0])[0]
        return np.abs(st[1] ** 2 + self.eps * f - self.c2) / max(1.0, self.c2)

    def sample_times(self, n: int = 400, negative: bool = False) -> np.ndarray:
        lo = self.t_begin if negative else 0.0
        return np.linspace(lo, self.t_end, n)


def _eval_segments(segs, t: np.ndarray) -> np.ndarray:
    out = np.empty((6, t.size))
    done = np.zeros(t.size, dtype=bool)
    for seg in segs:
        lo, hi = min(seg.t0, seg.t1), max(seg.t0, seg.t1)
        m = (~done) & (t >= lo - 1e-12) & (t <= hi + 1e-12)
        if np.any(m):
            out[:, m] = seg(np.clip(t[m], lo, hi))
            done |= m
    if not np.all(done):
        raise ValueError("time outside the integrated span")
    return out


# ---------------------------------------------------------------------------
# launch geometry


def _band_for_launch(p: FProfile, spec: LaunchSpec) -> Band:
    if p.flat or not p.has_null_orbits:
        raise NoTangency("profile has no null orbits; tangent launches are not defined")
    band = p.band_at(spec.band)
    if band.sign != spec.eps:
        raise NoTangency(f"band {spec.band} has sign {band.sign}, launch asks for eps = {spec.eps}")
    if not spec.c2 < band.sup_abs:
        raise NoTangency(f"C^2 = {spec.c2!r} is not below the band peak {band.sup_abs!r}")
    return band


def tangency_point(p: FProfile, band: Band, eps: int, c2: float, side: str) -> float:
    """Solve eps*f(z) = C2 on the requested side, taking the root nearest the peak."""
    g = lambda x: eps * p.derivs(x)[0] - c2
    peak = band.argmax
    end = band.left if side == "left" else band.right
    xs = np.linspace(peak, end, 4001)
    vals = eps * p.derivs_array(xs)[0] - c2
    idx = np.nonzero(vals <= 0)[0]
    if idx.size == 0:  # pragma: no cover - the band end has eps*f = 0 < C2
        raise NoTangency("no tangency on this side")
    i = int(idx[0])
    if vals[i] == 0.0:
        return float(xs[i])
    return brentq(g, min(xs[i - 1], xs[i]), max(xs[i - 1], xs[i]), xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _route(p: FProfile, band_index: int, direction: int, eps: int, c2: float, tol_crit: float):
    """Walk the bands in travel direction until the geodesic turns or stalls.

    Returns (crossed zeros, outcome, x_target, final band) where outcome is
    "turn" (x_target is the turning coordinate) or "asymptote" (x_target is
    the critical coordinate approached).
    """
    crossed = []
    k = band_index
    n = len(p.zeros)
    for _ in range(2 * n + 2):
        zero_k = k if direction < 0 else k + 1
        crossed.append(p.zero_at(zero_k))
        k += direction
        band = p.band_at(k)
        if band.sign != eps:
            continue
        gap = band.sup_abs - c2
        if abs(gap) <= tol_crit * max(1.0, c2):
            return crossed, "asymptote", band.argmax, band
        if gap > 0:
            start = band.right if direction < 0 else band.left
            end = band.argmax
            xs = np.linspace(start, end, 4001)
            vals = eps * p.derivs_array(xs)[0] - c2
            i = int(np.nonzero(vals >= 0)[0][0])
            g = lambda x: eps * p.derivs(x)[0] - c2
            xt = brentq(g, min(xs[i - 1], xs[i]), max(xs[i - 1], xs[i]), xtol=1e-15, rtol=4 * np.finfo(float).eps)
            return crossed, "turn", xt, band
    raise NumericFailure("band walk did not terminate")  # pragma: no cover


# ---------------------------------------------------------------------------
# integration


def _rhs_factory(p: FProfile, eps: int):
    d12 = p.expr.d12
    half = 0.5 * eps

    def rhs(t, y):
        f1, f2 = d12(y[0])
        k = half * f2
        return np.array([y[1], -half * f1, y[3], -k * y[2], y[5], -k * y[4]])

    return rhs


def _integrate(rhs, t_span, y0, tol, events=None):
    sol = solve_ivp(
        rhs,
        t_span,
        y0,
        method="DOP853",
        rtol=tol.ode_rtol,
        atol=tol.ode_atol,
        dense_output=True,
        events=events,
    )
    if sol.status < 0:
        raise NumericFailure(f"integrator failed: {sol.message}")
    return sol


def _event_times(seg_eval, grid, targets):
    """First time at which x(t) = target, for each target in travel order."""
    xs = seg_eval(grid)[0]
    out = []
    start = 0
    for xt in targets:
        d = xs[start:] - xt
        idx = np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)[0]
        if idx.size == 0:
            break
        i = start + int(idx[0])
        if xs[i] == xt:
            out.append(float(grid[i]))
        else:
            g = lambda t: float(seg_eval(np.array([t]))[0, 0] - xt)
            out.append(brentq(g, grid[i], grid[i + 1], xtol=1e-13, rtol=4 * np.finfo(float).eps))
        start = i
    return out


def launch_tangent(p: FProfile, spec: LaunchSpec, t_max: float | None = None,
                   full_period: bool = True) -> GeodesicTrace:
    """Integrate the geodesic tangent to K at eps*f = C2 on the given side.

    Periodic traces are integrated over [0, 4*omega] (one kappa period) and
    extended to negative times by evenness; other traces are integrated
    backwards explicitly.
    """
    p.require_certifiable()
    tol = p.tolerances
    band = _band_for_launch(p, spec)
    eps, c2 = spec.eps, spec.c2
    z0 = tangency_point(p, band, eps, c2, spec.side)
    f0, f1, _, _ = p.derivs(z0)
    direction = -1 if eps * f1 > 0 else 1
    crossed, outcome, x_target, _ = _route(p, spec.band, direction, eps, c2, tol.tol_crit)
    if t_max is None:
        t_max = 50.0 * p.period / math.sqrt(c2)

    rhs = _rhs_factory(p, eps)
    y0 = np.array([z0, 0.0, 0.0, 1.0, 1.0, 0.0])
    forward: list[_Segment] = []
    horizon = False
    t_turn = None
    tail = None

    if outcome == "turn":
        turn = lambda t, y: y[1]
        turn.terminal = True
        turn.direction = -direction
        sol = _integrate(rhs, (0.0, t_max), y0, tol, events=[turn])
        forward.append(_Segment(0.0, sol.t[-1], sol.sol))
        if sol.status == 1 and sol.t_events[0].size:
            t_turn = float(sol.t_events[0][0])
            if full_period:
                y_turn = sol.sol(t_turn)
                sol2 = _integrate(rhs, (t_turn, 2.0 * t_turn * (1 + 1e-9)), y_turn, tol)
                forward.append(_Segment(t_turn, sol2.t[-1], sol2.sol))
        else:
            horizon = True
        kind = "Periodic" if t_turn is not None else "Unresolved"
        mirror = True
    else:
        # Stop the second-order integration once close to the critical orbit;
        # the tail of the approach is followed on the first-order flow.
        near = lambda t, y: direction * (y[0] - x_target) + _APPROACH_SWITCH
        near.terminal = True
        near.direction = 1
        sol = _integrate(rhs, (0.0, t_max), y0, tol, events=[near])
        forward.append(_Segment(0.0, sol.t[-1], sol.sol))
        if sol.status != 1:
            horizon = True
        else:
            tail = _asymptotic_tail(p, eps, x_target, direction, sol.t[-1], sol.y[0, -1], tol)
        kind = "Asymptotic" if tail is not None and tail["reached"] else "Unresolved"
        mirror = False

    t_end = forward[-1].t1
    seg_eval = lambda ts: _eval_segments(forward, np.atleast_1d(ts))

    # crossing times of the null orbits, located on the dense output
    grid = np.linspace(0.0, t_turn if t_turn is not None else t_end, 513)
    crossings_t = _event_times(seg_eval, grid, crossed)
    if len(crossings_t) < 2 and horizon:
        raise HorizonExceeded(f"fewer than two null-orbit crossings before T_max = {t_max:.6g}")
    if len(crossings_t) < 2:
        raise NumericFailure("null-orbit crossings not found on the trace")

    backward: list[_Segment] = []
    t_begin = -t_end
    if not mirror:
        solb = _integrate(rhs, (0.0, -t_end), y0, tol)
        backward.append(_Segment(0.0, solb.t[-1], solb.sol))
        t_begin = float(solb.t[-1])

    if kind == "Periodic":
        cls = Classification("Periodic", omega=0.5 * t_turn)
    elif kind == "Asymptotic":
        cls = Classification("Asymptotic", x_limit=x_target)
    else:
        cls = Classification("Unresolved")

    trace = GeodesicTrace(
        profile=p,
        spec=spec,
        z0=z0,
        direction=direction,
        crossings_x=tuple(crossed[: len(crossings_t)]),
        crossings_t=tuple(crossings_t),
        t_turn=t_turn,
        x_turn=x_target if outcome == "turn" else None,
        x_limit=x_target if outcome == "asymptote" else None,
        classification=cls,
        t_end=t_end,
        t_begin=t_begin,
        horizon_exceeded=horizon,
        tail=tail,
        _forward=forward,
        _backward=backward,
        _mirror=mirror,
    )
    _check_energy(trace)
    return trace


def _check_energy(trace: GeodesicTrace, limit: float = 1e-9):
    ts = trace.sample_times(801)
    worst = float(np.max(trace.energy_residual(ts)))
    if worst > limit:
        raise NumericFailure(f"energy drift {worst:.3g} exceeds {limit:g} (relative)")


def _speed_sq_near_critical(p: FProfile, eps: int, x_cr: float, x: float) -> float:
    """eps*f(x_cr) - eps*f(x) written as -eps * int_{x_cr}^{x} f'(u) du.

    Near the critical point the integrand is O(|x - x_cr|), so this form keeps
    full relative accuracy where the plain difference cancels.
    """
    w = x - x_cr
    u = x_cr + 0.5 * w * (_GL_NODES + 1.0)
    fp = p.derivs_array(u)[1]
    return float(-eps * 0.5 * w * np.dot(_GL_WEIGHTS, fp))


def _asymptotic_tail(p, eps, x_cr, direction, t_start, x_start, tol):
    """Follow x' = direction*sqrt(C2 - eps f) towards the critical orbit."""

    def rhs(t, y):
        q = max(_speed_sq_near_critical(p, eps, x_cr, y[0]), 0.0)
        return [direction * math.sqrt(q)]

    mu = math.sqrt(0.5 * abs(p.derivs(x_cr)[2]))
    span = 40.0 / max(mu, 1e-6)
    sol = solve_ivp(rhs, (t_start, t_start + span), [x_start], method="DOP853", rtol=1e-12, atol=1e-16)
    xs = sol.y[0]
    speeds = np.array([math.sqrt(max(_speed_sq_near_critical(p, eps, x_cr, x), 0.0)) for x in xs])
    dist = np.abs(xs - x_cr)
    hit = np.nonzero((speeds < ASYMPTOTIC_SPEED) & (dist < ASYMPTOTIC_DIST))[0]
    # only the approach matters; past the first hit the flow may step over x_cr
    stop = int(hit[0]) + 1 if hit.size else len(speeds)
    monotone = bool(np.all(np.diff(speeds[:stop]) <= 1e-15))
    reached = bool(hit.size) and monotone
    return {
        "reached": reached,
        "t": float(sol.t[hit[0]]) if hit.size else float(sol.t[-1]),
        "distance": float(dist[hit[0]]) if hit.size else float(dist[-1]),
        "speed": float(speeds[hit[0]]) if hit.size else float(speeds[-1]),
        "speed_monotone": monotone,
    }


def classify(p: FProfile, trace: GeodesicTrace) -> Classification:
    return trace.classification


def classify_launch(p: FProfile, eps: int, c2: float, band_index: int) -> str:
    """Analytic pre-classification used for the excluded sweep endpoints."""
    band = p.band_at(band_index)
    if c2 == 0.0:
        return "Perpendicular"
    if abs(c2 - band.sup_abs) <= p.tolerances.tol_crit * max(1.0, c2):
        return "CriticalOrbit"
    return "Launchable" if 0.0 < c2 < band.sup_abs else "NoTangency"


# ---------------------------------------------------------------------------
# y coordinate on the regular branch


def y_prime(trace: GeodesicTrace, t) -> np.ndarray:
    st = trace.state(np.atleast_1d(t))
    denom = trace.eps * trace.C + st[1]
    if np.any(np.abs(denom) < 1e-9):
        raise BranchSingular("eps*C + x' vanishes on the requested span")
    return trace.eps / denom


def y_trace(p: FProfile, trace: GeodesicTrace, y0: float = 0.0, t_stop: float | None = None, n: int = 201):
    """Sample (t, x, y) with y obtained by quadrature of y' = eps/(eps*C + x')."""
    t_stop = trace.t_turn if t_stop is None else t_stop
    if t_stop is None:
        t_stop = trace.t1
    ts = np.linspace(0.0, t_stop, n)
    y_prime(trace, np.linspace(0.0, t_stop, 4 * n))  # branch check
    ys = [y0]
    for a, b in zip(ts[:-1], ts[1:]):
        val, _ = quad(lambda s: float(y_prime(trace, s)[0]), a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        ys.append(ys[-1] + val)
    return ts, trace.x(ts), np.array(ys)


# ---------------------------------------------------------------------------


def band_crossing_growth(p: FProfile, eps: int, c2: float, n: int, t_max: float | None = None) -> np.ndarray:
    """Times of the first n null-orbit crossings of a geodesic started on a null orbit.

    The geodesic starts at the first zero of f moving right with x' = |C|,
    which for C2 above every eps-band peak makes it transverse forever.
    """
    p.require_certifiable()
    if not p.has_null_orbits:
        raise ProfileError("profile has no null orbits")
    tol = p.tolerances
    if t_max is None:
        t_max = 50.0 * p.period / math.sqrt(c2)
    x0 = p.zero_at(0)
    y0 = np.array([x0, math.sqrt(c2)])
    half = 0.5 * eps
    d12 = p.expr.d12
    rhs = lambda t, y: np.array([y[1], -half * d12(y[0])[0]])
    # at t = 0 the event function would read f(x0) = 0; report the sign f
    # takes just after the start instead, so the launch is not counted
    start_sign = math.copysign(1e-300, p.derivs(x0)[1])
    f_evt = lambda t, y: p.derivs(y[0])[0] if t > 0 else start_sign
    f_evt.terminal = n
    sol = solve_ivp(rhs, (0.0, t_max), y0, method="DOP853", rtol=tol.ode_rtol, atol=tol.ode_atol,
                    events=[f_evt], dense_output=True)
    times = sol.t_events[0]
    if times.size < n:
        raise HorizonExceeded(f"only {times.size} crossings before T_max = {t_max:.6g}")
    return np.asarray(times[:n], dtype=float)
