"""Periodic profile f and its combinatorial geometry.

f is the norm of the Killing field as a function of the transverse
coordinate x.  ``build_profile`` verifies the period, brackets the zeros,
splits a period into bands and looks for a symmetry axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DegenerateZero, DomainError, NonPeriodic, ProfileError
from .expr import Expression
from .tolerances import DEFAULT, Tolerances

ZERO_GRID = 10_000
PERIOD_GRID = 2_000
MAX_DIVISOR = 12
SYM_GRID = 512


@dataclass(frozen=True)
class Band:
    index: int
    left: float
    right: float
    sign: int
    sup_abs: float  # M_eps = sup of sign*f on the band
    argmax: float
    critical_xs: tuple[float, ...]
    curvature_zeros: tuple[float, ...]
    no_null_orbits: bool = False

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def critical(self) -> float:
        """Location of the band's peak (the critical orbit of maximal |f|)."""
        return self.argmax

    def contains(self, x: float) -> bool:
        return self.left < x < self.right

    def shifted(self, dx: float) -> "Band":
        return Band(
            self.index,
            self.left + dx,
            self.right + dx,
            self.sign,
            self.sup_abs,
            self.argmax + dx,
            tuple(c + dx for c in self.critical_xs),
            tuple(z + dx for z in self.curvature_zeros),
            self.no_null_orbits,
        )


@dataclass(frozen=True)
class FProfile:
    expr: Expression
    period: float
    zeros: tuple[float, ...]
    zero_slopes: tuple[float, ...]
    bands: tuple[Band, ...]
    critical_points: tuple[float, ...]
    symmetry_axis: float | None
    degenerate: tuple[bool, ...]
    flat: bool
    scale: float  # max |f| over a period, used to scale absolute tolerances
    tolerances: Tolerances = field(default=DEFAULT)

    # -- evaluation -------------------------------------------------------
    def __call__(self, x):
        return self.expr(x)

    def derivs(self, x: float):
        return self.expr.derivs(x)

    def derivs_array(self, x):
        return self.expr.derivs_array(x)

    @property
    def n_bands(self) -> int:
        return len(self.zeros)

    @property
    def has_null_orbits(self) -> bool:
        return bool(self.zeros)

    @property
    def certifiable(self) -> bool:
        return not any(self.degenerate)

    def require_certifiable(self):
        if any(self.degenerate):
            bad = [z for z, d in zip(self.zeros, self.degenerate) if d]
            raise DegenerateZero(f"non-simple zero(s) of f at x = {', '.join(f'{z:.12g}' for z in bad)}")

    # -- periodic bookkeeping ---------------------------------------------
    def zero_at(self, k: int) -> float:
        """k-th zero counted over the whole real line (k may be negative)."""
        n = len(self.zeros)
        q, r = divmod(k, n)
        return self.zeros[r] + q * self.period

    def slope_at(self, k: int) -> float:
        return self.zero_slopes[k % len(self.zeros)]

    def band_at(self, k: int) -> Band:
        """Band between zero_at(k) and zero_at(k+1), translated into place."""
        n = len(self.bands)
        q, r = divmod(k, n)
        return self.bands[r].shifted(q * self.period)

    def band_index_of(self, x: float) -> int:
        """Global index k of the band containing x (x must not be a zero)."""
        if not self.zeros:
            return 0
        n = len(self.zeros)
        q = math.floor((x - self.zeros[0]) / self.period)
        base = x - q * self.period
        r = int(np.searchsorted(self.zeros, base, side="right")) - 1
        return q * n + r

    def obstruction_residuals(self) -> tuple[float, ...]:
        """f'(x_n) + f'(x_{n+1}) for consecutive zeros, cyclically over a period."""
        n = len(self.zeros)
        return tuple(self.zero_slopes[i] + self.zero_slopes[(i + 1) % n] for i in range(n))


# ---------------------------------------------------------------------------


def _scale_of(values: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(values))))


def detect_period(expr: Expression, hint: float, tol: float) -> float:
    """Smallest hint/k (k <= MAX_DIVISOR) that passes the periodicity test."""
    xs = np.linspace(0.0, hint, PERIOD_GRID, endpoint=False)
    base = expr.derivs_array(xs)[0]
    scale = _scale_of(base)
    best = None
    for k in range(1, MAX_DIVISOR + 1):
        p = hint / k
        resid = np.max(np.abs(expr.derivs_array(xs + p)[0] - base))
        if resid < tol * scale:
            best = p
        elif k == 1:
            raise NonPeriodic(f"f(x + {hint!r}) differs from f(x) by up to {resid:.3g}")
    return best


def _bracket_roots(fn, xs: np.ndarray, vals: np.ndarray, xtol: float) -> list[float]:
    """Roots of fn from sign changes (and exact zeros) of ``vals`` sampled at ``xs``."""
    roots = []
    sgn = np.sign(vals)
    for i in range(len(xs) - 1):
        if sgn[i] == 0.0:
            roots.append(float(xs[i]))
        elif sgn[i] * sgn[i + 1] < 0:
            roots.append(brentq(fn, xs[i], xs[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200))
    return roots


def _newton_polish(expr: Expression, x: float) -> float:
    f0, f1, *_ = expr.derivs(x)
    if f1 == 0.0:
        return x
    cand = x - f0 / f1
    return cand if abs(expr.derivs(cand)[0]) < abs(f0) else x


def find_zeros(expr: Expression, period: float, tol: Tolerances, scale: float):
    """Zeros in [0, period) with simple/degenerate flags."""
    # one extra cell below 0 so a zero just left of the origin is bracketed
    h = period / ZERO_GRID
    xs = np.linspace(-h, period, ZERO_GRID + 2)
    vals = expr.derivs_array(xs)[0]
    f = lambda x: expr.derivs(x)[0]
    found = [_newton_polish(expr, r) for r in _bracket_roots(f, xs, vals, tol.tol_root)]

    # Touching zeros: local minima of |f| that do not change sign.
    absv = np.abs(vals)
    for i in range(1, len(xs) - 1):
        if absv[i] <= absv[i - 1] and absv[i] <= absv[i + 1] and vals[i - 1] * vals[i + 1] > 0:
            if absv[i] > 1e-3 * scale:
                continue
            res = minimize_scalar(lambda t: abs(f(t)), bounds=(xs[i - 1], xs[i + 1]), method="bounded",
                                  options={"xatol": 1e-14})
            if abs(f(res.x)) < 1e-10 * scale:
                found.append(float(res.x))

    def wrap(z):
        z = float(np.mod(z, period))
        return 0.0 if period - z < 1e-12 * period else z

    zeros = []
    for z in sorted(wrap(z) for z in found):
        if zeros and abs(z - zeros[-1]) < 1e-9:
            continue
        zeros.append(z)
    if len(zeros) > 1 and abs(zeros[0] + period - zeros[-1]) < 1e-9:
        zeros.pop()
    slopes = [expr.derivs(z)[1] for z in zeros]
    degenerate = [abs(s) <= tol.margin_simple for s in slopes]
    return zeros, slopes, degenerate


def _interior_roots(fn_vec_index: int, expr: Expression, a: float, b: float, xtol: float, n: int = 2000):
    xs = np.linspace(a, b, n + 1)[1:-1]
    vals = expr.derivs_array(xs)[fn_vec_index]
    fn = lambda x: expr.derivs(x)[fn_vec_index]
    return [r for r in _bracket_roots(fn, xs, vals, xtol) if a < r < b]


def decompose_bands(expr: Expression, zeros, period: float, tol: Tolerances) -> list[Band]:
    if not zeros:
        crit = _interior_roots(1, expr, -1e-9 * period, period, 1e-15)
        crit = sorted({float(np.mod(c, period)) for c in crit})
        sign = 1 if expr.derivs(0.0)[0] > 0 else -1
        pts = crit or [0.0]
        vals = [sign * expr.derivs(c)[0] for c in pts]
        i = int(np.argmax(vals))
        curv = _interior_roots(2, expr, 0.0, period, 1e-15)
        return [Band(0, 0.0, period, sign, vals[i], pts[i], tuple(crit), tuple(curv), no_null_orbits=True)]

    bands = []
    n = len(zeros)
    for k in range(n):
        a = zeros[k]
        b = zeros[k + 1] if k + 1 < n else zeros[0] + period
        mid = 0.5 * (a + b)
        sign = 1 if expr.derivs(mid)[0] > 0 else -1
        crit = _interior_roots(1, expr, a, b, 1e-15)
        grid = np.linspace(a, b, 2001)[1:-1]
        gvals = sign * expr.derivs_array(grid)[0]
        cands = [(sign * expr.derivs(c)[0], c) for c in crit]
        cands.append((float(np.max(gvals)), float(grid[int(np.argmax(gvals))])))
        sup, arg = max(cands)
        curv = _interior_roots(2, expr, a, b, 1e-15)
        bands.append(Band(k, a, b, sign, float(sup), float(arg), tuple(crit), tuple(curv)))
    return bands


def symmetry_residual(expr: Expression, period: float, a: float) -> float:
    t = np.linspace(0.0, 0.5 * period, SYM_GRID + 1)
    fp = expr.derivs_array(a + t)[0]
    fm = expr.derivs_array(a - t)[0]
    return float(np.max(np.abs(fp - fm)))


def detect_symmetry(expr: Expression, period: float, zeros, critical, tol: float) -> float | None:
    """Axis a in [0, period) with f(a+t) = f(a-t), or None.

    Candidates are midpoints between consecutive zeros, then critical points.
    """
    cands = []
    n = len(zeros)
    for k in range(n):
        b = zeros[k + 1] if k + 1 < n else zeros[0] + period
        cands.append(0.5 * (zeros[k] + b))
    cands.extend(critical)
    width = 1e-3 * period
    for a in cands:
        r = symmetry_residual(expr, period, a)
        if r >= tol and r < 1e3 * tol:
            res = minimize_scalar(lambda s: symmetry_residual(expr, period, s), bounds=(a - width, a + width),
                                  method="bounded", options={"xatol": 1e-14})
            if res.fun < r:
                a, r = float(res.x), float(res.fun)
        if r < tol:
            a = float(np.mod(a, period))
            return 0.0 if period - a < 1e-12 * period else a
    return None


def build_profile(expr: Expression | str, hint_period: float, tolerances: Tolerances = DEFAULT) -> FProfile:
    """Construct an FProfile.  Degenerate zeros are flagged, not raised."""
    if isinstance(expr, str):
        expr = Expression(expr)
    if not (isinstance(hint_period, (int, float)) and hint_period > 0 and math.isfinite(hint_period)):
        raise ProfileError(f"period hint must be a positive number, got {hint_period!r}")
    hint_period = float(hint_period)
    try:
        expr.derivs_array(np.linspace(0.0, 4.0 * hint_period, 4001))
    except DomainError as exc:
        raise ProfileError(f"profile is not evaluable on [0, 4*period]: {exc}") from exc

    tol = tolerances
    grid = np.linspace(0.0, hint_period, PERIOD_GRID, endpoint=False)
    fvals, d1 = expr.derivs_array(grid)[:2]
    scale = float(np.max(np.abs(fvals)))
    if expr.is_constant or float(np.max(np.abs(d1))) < 1e-14 * max(1.0, scale):
        c = float(fvals[0])
        sign = 1 if c > 0 else -1
        band = Band(0, 0.0, hint_period, sign, abs(c), 0.0, (), (), no_null_orbits=True)
        return FProfile(expr, hint_period, (), (), (band,), (), 0.0, (), True, scale, tol)

    period = detect_period(expr, hint_period, tol.tol_sym)
    zeros, slopes, degenerate = find_zeros(expr, period, tol, max(1.0, scale))
    bands = decompose_bands(expr, zeros, period, tol)
    critical = tuple(sorted(float(np.mod(c, period)) for b in bands for c in b.critical_xs))
    axis = detect_symmetry(expr, period, zeros, critical, tol.tol_sym * max(1.0, scale))
    return FProfile(
        expr,
        period,
        tuple(zeros),
        tuple(slopes),
        tuple(bands),
        critical,
        axis,
        tuple(degenerate),
        False,
        scale,
        tol,
    )


def sample_derivatives(p: FProfile, x: float):
    """(f, f', f'', f''') at x, exact up to rounding."""
    return p.derivs(x)
