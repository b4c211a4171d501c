"""Jacobi elliptic functions sn, cn, dn by the descending Landen (AGM) scheme.

The second argument is the modulus ``k`` (parameter m = k**2), 0 <= k < 1.
Inputs may be floats or numpy arrays; the result has the same shape.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

_MAX_LEVELS = 40


def _agm_ladder(k: float):
    if not 0.0 <= k < 1.0:
        raise ValueError(f"elliptic modulus must satisfy 0 <= k < 1, got {k!r}")
    m = k * k
    a, b, c = 1.0, math.sqrt(1.0 - m), k
    ladder = [(a, c)]
    for _ in range(_MAX_LEVELS):
        if abs(c) <= 2.0 ** -53 * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        ladder.append((a, c))
    return ladder


@lru_cache(maxsize=64)
def _scalar_plan(k: float):
    ladder = _agm_ladder(k)
    n = len(ladder) - 1
    ratios = tuple(c / a for a, c in reversed(ladder[1:]))
    return (2.0 ** n) * ladder[-1][0], ratios, k * k


def ellipj_scalar(u: float, k: float):
    """Scalar (sn, cn, dn) using math functions and a cached ladder."""
    scale, ratios, m = _scalar_plan(k)
    phi = scale * u
    for r in ratios:
        phi = 0.5 * (phi + math.asin(r * math.sin(phi)))
    s = math.sin(phi)
    return s, math.cos(phi), math.sqrt(1.0 - m * s * s)


def ellipj(u, k: float):
    """Return (sn, cn, dn) of ``u`` for modulus ``k``."""
    m = k * k
    ladder = _agm_ladder(k)
    n = len(ladder) - 1
    a_n = ladder[-1][0]
    phi = (2.0 ** n) * a_n * np.asarray(u, dtype=float)
    for a, c in reversed(ladder[1:]):
        phi = 0.5 * (phi + np.arcsin(c / a * np.sin(phi)))
    sn = np.sin(phi)
    cn = np.cos(phi)
    dn = np.sqrt(1.0 - m * sn * sn)
    if np.ndim(u) == 0:
        return float(sn), float(cn), float(dn)
    return sn, cn, dn


def sn(u, k: float):
    return ellipj(u, k)[0]


def cn(u, k: float):
    return ellipj(u, k)[1]


def dn(u, k: float):
    return ellipj(u, k)[2]


def quarter_period(k: float) -> float:
    """Complete elliptic integral K(k) = pi / (2 AGM(1, sqrt(1-k^2)))."""
    if not 0.0 <= k < 1.0:
        raise ValueError(f"elliptic modulus must satisfy 0 <= k < 1, got {k!r}")
    a, b = 1.0, math.sqrt(1.0 - k * k)
    while abs(a - b) > 1e-16 * a:
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)
