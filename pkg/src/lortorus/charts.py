"""Chart-level geometry: ribbon metrics, Christoffel symbols, transition maps
and the saddle chart that adds a zero of K at an incomplete null orbit.

A ribbon chart of parity sigma carries the metric

    2 sigma dx dy + f(x) dy^2,    K = d/dy,

with inverse g^xx = -f, g^xy = sigma, g^yy = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import DegenerateZero, OutOfBand
from .profile import Band, FProfile

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_GL_T = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


def curvature(p: FProfile, x):
    """Gauss curvature f''/2 of the ribbon metric (vectorised)."""
    if np.ndim(x):
        return 0.5 * p.derivs_array(np.asarray(x, dtype=float))[2]
    return 0.5 * p.derivs(float(x))[2]


# ---------------------------------------------------------------------------
# ribbon charts


@dataclass(frozen=True)
class ChristoffelData:
    x: float
    sigma: int
    xyy: float  # Gamma^x_yy
    yyy: float  # Gamma^y_yy
    xxy: float  # Gamma^x_xy

    def as_dict(self) -> dict:
        return {"x": self.x, "sigma": self.sigma, "Gx_yy": self.xyy, "Gy_yy": self.yyy, "Gx_xy": self.xxy}


@dataclass(frozen=True)
class RibbonChart:
    profile: FProfile
    left: float
    right: float
    sigma: int = 1

    def metric(self, x: float) -> np.ndarray:
        f = self.profile.derivs(x)[0]
        return np.array([[0.0, float(self.sigma)], [float(self.sigma), f]])

    def determinant(self, x: float) -> float:
        return float(np.linalg.det(self.metric(x)))

    def christoffel(self, x: float) -> ChristoffelData:
        f, fp = self.profile.derivs(x)[:2]
        s = self.sigma
        # lowered symbols: Gamma_{x,yy} = -f'/2, Gamma_{y,xy} = f'/2; raise with g^xx = -f, g^xy = sigma
        return ChristoffelData(x, s, 0.5 * f * fp, -0.5 * s * fp, 0.5 * s * fp)

    def geodesic_residual(self, x, xp, xpp, yp):
        """x'' + 2 Gamma^x_xy x' y' + Gamma^x_yy y'^2 (vectorised over samples)."""
        d = self.profile.derivs_array(np.atleast_1d(np.asarray(x, dtype=float)))
        f, fp = d[0], d[1]
        return xpp + self.sigma * fp * xp * yp + 0.5 * f * fp * yp * yp

    def contains(self, x: float) -> bool:
        return self.left < x < self.right


def ribbon_chart(p: FProfile, k: int) -> RibbonChart:
    """Chart I_k = (x_k, x_{k+2}) spanning two bands, with parity (-1)^k."""
    if not p.has_null_orbits:
        return RibbonChart(p, -math.inf, math.inf, 1)
    return RibbonChart(p, p.zero_at(k), p.zero_at(k + 2), -1 if k % 2 else 1)


# ---------------------------------------------------------------------------
# transitions


def transition_primitive(p: FProfile, band: Band, x_ref: float | None = None) -> Callable[[float], float]:
    """G(x) = -int_{x_ref}^x dt / f(t), defined on the open band only."""
    if x_ref is None:
        x_ref = band.argmax
    if not band.contains(x_ref):
        raise OutOfBand(f"reference point {x_ref!r} is not inside ({band.left!r}, {band.right!r})")

    def inv_f(t):
        return 1.0 / p.derivs(t)[0]

    def G(x: float) -> float:
        if not band.contains(x):
            raise OutOfBand(f"x = {x!r} is outside the open band ({band.left!r}, {band.right!r})")
        val, _ = quad(inv_f, x_ref, x, epsabs=1e-13, epsrel=1e-12, limit=200)
        return -val

    G.band = band
    G.x_ref = x_ref
    return G


@dataclass(frozen=True)
class TransitionMap:
    """psi(x, y) = (x, y - 2 sigma G(x)) from a parity-sigma chart to parity -sigma.

    For sigma = -1 this is (x, y + 2G(x)).
    """

    G: Callable[[float], float]
    sigma: int

    def __call__(self, x: float, y: float) -> tuple[float, float]:
        return x, y - 2 * self.sigma * self.G(x)

    def inverse(self, x: float, y: float) -> tuple[float, float]:
        return x, y + 2 * self.sigma * self.G(x)

    def jacobian(self, x: float, f_x: float) -> np.ndarray:
        # G' = -1/f
        return np.array([[1.0, 0.0], [2 * self.sigma / f_x, 1.0]])


def transition_map(p: FProfile, band: Band, sigma: int, x_ref: float | None = None) -> TransitionMap:
    return TransitionMap(transition_primitive(p, band, x_ref), sigma)


@dataclass(frozen=True)
class Reflection:
    """rho(x, y) = (x, 2 sigma G(x) - y): an isometry of the chart sending K to -K.

    Composing with (x, y) -> (-x, -y) gives the generic reflection between a
    chart and its mirrored copy.
    """

    G: Callable[[float], float]
    sigma: int

    def __call__(self, x: float, y: float) -> tuple[float, float]:
        return x, 2 * self.sigma * self.G(x) - y

    def jacobian(self, x: float, f_x: float) -> np.ndarray:
        return np.array([[1.0, 0.0], [-2 * self.sigma / f_x, -1.0]])

    def push_killing(self, x: float, f_x: float) -> np.ndarray:
        """Image of K = d/dy under d(rho)."""
        return self.jacobian(x, f_x) @ np.array([0.0, 1.0])


def reflection(p: FProfile, band: Band, sigma: int = 1, x_ref: float | None = None) -> Reflection:
    return Reflection(transition_primitive(p, band, x_ref), sigma)


def pullback_metric(jac: np.ndarray, target: np.ndarray) -> np.ndarray:
    return jac.T @ target @ jac


# ---------------------------------------------------------------------------
# saddle chart


def _gl(fn, x):
    """int_0^1 fn(t x) dt with a fixed Gauss-Legendre rule (vectorised in x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    vals = fn(np.outer(x, _GL_T))
    return vals @ _GL_W


@dataclass(frozen=True)
class SaddleChart:
    profile: FProfile
    anchor: float
    lam: float
    halfwidth: float

    # shifted profile derivatives around the anchor
    def _d(self, order: int, x):
        return self.profile.derivs_array(self.anchor + x)[order]

    def j(self, x):
        """int_0^1 f'(t x) dt (equals f(x)/x away from 0)."""
        return _gl(lambda u: self._d(1, u), x)

    def j_prime(self, x):
        # d/dx int_0^1 f'(t x) dt = int_0^1 t f''(t x) dt
        return _gl(lambda u: _GL_T * self._d(2, u), x)

    def l(self, x):
        jv = self.j(x)
        return jv - 1.0 / jv

    def h(self, x):
        """int_0^1 l'(t x) dt with l' = j' (1 + 1/j^2)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        inner = np.outer(x, _GL_T)
        jv = self.j(inner.ravel()).reshape(inner.shape)
        jp = self.j_prime(inner.ravel()).reshape(inner.shape)
        return (jp * (1.0 + 1.0 / jv**2)) @ _GL_W

    def metric(self, u, v):
        """(g_uu, g_uv, g_vv) of the extension at (u, v); uv must lie in J."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        x = u * v
        if np.any(np.abs(x) >= self.halfwidth):
            raise OutOfBand("uv lies outside the saddle neighbourhood J")
        shape = x.shape
        jv = self.j(x.ravel()).reshape(shape)
        hv = self.h(x.ravel()).reshape(shape)
        g_uu = v * v * hv / self.lam
        g_uv = -(jv + 1.0 / jv) / self.lam
        g_vv = u * u * hv / self.lam
        return g_uu, g_uv, g_vv

    def determinant(self, u, v):
        g_uu, g_uv, g_vv = self.metric(u, v)
        return g_uu * g_vv - g_uv**2

    def killing(self, u, v):
        """K = (2/lambda)(u d/du - v d/dv)."""
        return (2.0 / self.lam) * np.asarray(u, dtype=float), -(2.0 / self.lam) * np.asarray(v, dtype=float)

    def killing_norm(self, u, v):
        g_uu, g_uv, g_vv = self.metric(u, v)
        ku, kv = self.killing(u, v)
        return g_uu * ku * ku + 2 * g_uv * ku * kv + g_vv * kv * kv

    def identity_residual(self, n: int = 50) -> float:
        """max |x j(x) - f(x)| on J."""
        xs = np.linspace(-self.halfwidth, self.halfwidth, n) * (1 - 1e-9)
        f = self.profile.derivs_array(self.anchor + xs)[0]
        return float(np.max(np.abs(xs * self.j(xs) - f)))

    def grid(self, n: int = 21, extent: float | None = None):
        """Rows (u, v, g_uu, g_uv, g_vv) on a square grid inside {|uv| < J}."""
        if extent is None:
            extent = math.sqrt(self.halfwidth) * 0.95
        us = np.linspace(-extent, extent, n)
        U, V = np.meshgrid(us, us, indexing="ij")
        g = self.metric(U, V)
        return np.column_stack([U.ravel(), V.ravel()] + [c.ravel() for c in g])


def saddle_chart(p: FProfile, k: int, halfwidth: float | None = None) -> SaddleChart:
    """Saddle extension at the k-th zero; default J is 0.4 x distance to the nearest other zero."""
    if not p.has_null_orbits:
        raise DegenerateZero("profile has no null orbits")
    x_k = p.zero_at(k)
    lam = p.derivs(x_k)[1]
    if abs(lam) <= p.tolerances.margin_simple:
        raise DegenerateZero(f"zero at x = {x_k!r} is not simple (f' = {lam!r})")
    gap = min(x_k - p.zero_at(k - 1), p.zero_at(k + 1) - x_k)
    if halfwidth is None:
        halfwidth = 0.4 * gap
    elif not 0 < halfwidth < gap:
        raise ValueError("halfwidth must be positive and smaller than the distance to the next zero")
    return SaddleChart(p, x_k, lam, float(halfwidth))


# ---------------------------------------------------------------------------
# null orbits


@dataclass(frozen=True)
class NullOrbit:
    x: float
    eta: int
    coefficient: float  # exponent -eta f'(x_k)/2 of the geodesic parametrization
    gamma_yyy: float  # Gamma^y_yy at the orbit (sigma = 1)
    nabla_residual: float  # |nabla_K K + f'(x_k)/2 K|

    def as_dict(self) -> dict:
        return {"x": self.x, "eta": self.eta, "coefficient": self.coefficient,
                "Gy_yy": self.gamma_yyy, "nabla_residual": self.nabla_residual}


def null_orbit_parametrization(p: FProfile, k: int, eta: int) -> NullOrbit:
    """Geodesic parametrization -2 (eta f')^{-1} exp(-eta f' t / 2) of the k-th null orbit."""
    if eta not in (1, -1):
        raise ValueError("eta must be +1 or -1")
    x_k = p.zero_at(k)
    f, fp = p.derivs(x_k)[:2]
    if abs(fp) <= p.tolerances.margin_simple:
        raise DegenerateZero(f"null orbit at x = {x_k!r} is complete (non-simple zero)")
    ch = RibbonChart(p, -math.inf, math.inf, 1).christoffel(x_k)
    # nabla_K K = Gamma^x_yy d/dx + Gamma^y_yy d/dy; on f = 0 it should equal -f'/2 K
    resid = math.hypot(ch.xyy, ch.yyy + 0.5 * fp)
    return NullOrbit(x_k, eta, -0.5 * eta * fp, ch.yyy, resid)
