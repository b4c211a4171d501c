"""Hypothesis checks on the profile f and inequality diagnostics along geodesics.

Every boolean in a report comes with the number that decided it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq, minimize_scalar

from .errors import NotApplicable, QuadratureSingular
from .jacobi import JacobiBasis, monodromy_over
from .profile import FProfile

FAMILLE_GRID = 10_000
STABILITY_GRID = 256
TWO_PI_SQ = 2.0 * math.pi**2


def _quad(g, a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(g, a, b, epsabs=1e-11, epsrel=1e-10, limit=400)
    return val


# ---------------------------------------------------------------------------
# profile-level checks


def check_necessary(p: FProfile) -> dict:
    """Necessary conditions for absence of conjugate points."""
    if p.flat or not p.has_null_orbits:
        note = "flat profile" if p.flat else "no null orbits"
        return {"pass": True, "note": f"vacuous: {note}", "locally_finite": {"pass": True},
                "sign_alternation": {"pass": True}, "fprime_one_sign_change_per_band": {"pass": True},
                "type_II_only": {"pass": True}}
    signs = [b.sign for b in p.bands]
    n = len(signs)
    alternating = all(signs[i] * signs[(i + 1) % n] < 0 for i in range(n)) and n % 2 == 0
    counts = [len(b.critical_xs) for b in p.bands]
    crit_curv = [abs(p.derivs(c)[2]) for b in p.bands for c in b.critical_xs]
    out = {
        "locally_finite": {"pass": True, "zeros_per_period": n,
                           "note": "structural: a closed-form profile has finitely many zeros per period"},
        "sign_alternation": {"pass": alternating, "signs": signs,
                             "margin": min(b.sup_abs for b in p.bands)},
        "fprime_one_sign_change_per_band": {"pass": all(c == 1 for c in counts), "counts": counts,
                                            "margin": min(crit_curv) if crit_curv else 0.0},
        "type_II_only": {"pass": True, "note": "structural: one zero per chart interval makes every band type II"},
    }
    out["pass"] = all(v["pass"] for v in out.values())
    return out


def check_lambda_obstruction(p: FProfile, tol: float = 1e-9) -> dict:
    """Residuals f'(x_n) + f'(x_{n+1}) over one period; pass iff all vanish."""
    if not p.has_null_orbits:
        return {"pass": True, "residuals": [], "note": "no null orbits"}
    res = list(p.obstruction_residuals())
    scale = max(1.0, max(abs(s) for s in p.zero_slopes))
    worst = max(abs(r) for r in res)
    return {"pass": worst <= tol * scale, "residuals": res, "margin": worst, "tol": tol * scale}


def curvature_zeros(p: FProfile, lo: float, hi: float, n: int | None = None) -> list[float]:
    """Zeros of f'' on [lo, hi]."""
    if n is None:
        n = max(2000, int(4000 * (hi - lo) / p.period))
    xs = np.linspace(lo, hi, n + 1)
    vals = p.derivs_array(xs)[2]
    fn = lambda x: p.derivs(x)[2]
    out = []
    sgn = np.sign(vals)
    for i in range(n):
        if sgn[i] == 0.0:
            out.append(float(xs[i]))
        elif sgn[i] * sgn[i + 1] < 0:
            out.append(brentq(fn, xs[i], xs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if sgn[n] == 0.0:
        out.append(float(xs[n]))
    return sorted(set(out))


def check_famille(p: FProfile, tol: float = 1e-9) -> dict:
    """Items (i)-(v) of the sufficient family of profiles without conjugate points."""
    scale_zero = p.tolerances.margin_simple
    out: dict = {}
    if not p.has_null_orbits:
        out["simple_zeros"] = {"pass": False, "margin": 0.0, "note": "no null orbits"}
    else:
        m = min(abs(s) for s in p.zero_slopes)
        out["simple_zeros"] = {"pass": m > scale_zero, "margin": m}
    counts = [len(b.critical_xs) for b in p.bands]
    out["one_sign_change"] = {"pass": bool(p.has_null_orbits) and all(c == 1 for c in counts), "counts": counts}

    xs = np.linspace(0.0, p.period, FAMILLE_GRID, endpoint=False)
    d = p.derivs_array(xs)
    prod = -d[1] * d[3]
    thresh = tol * max(1.0, float(np.max(np.abs(prod))))
    i = int(np.argmin(prod))
    out["fpfppp_nonpositive"] = {"pass": bool(prod[i] >= -thresh), "min_neg_fp_fppp": float(prod[i]),
                                 "at": float(xs[i]), "tol": thresh}
    if p.symmetry_axis is None:
        out["symmetry_axis"] = {"pass": False, "axis": None}
    else:
        from .profile import symmetry_residual

        out["symmetry_axis"] = {"pass": True, "axis": p.symmetry_axis,
                                "residual": symmetry_residual(p.expr, p.period, p.symmetry_axis)}
    out["two_zeros_per_period"] = {"pass": len(p.zeros) == 2, "count": len(p.zeros)}
    out["pass"] = all(v["pass"] for v in out.values())
    return out


# ---------------------------------------------------------------------------
# stability inequalities (condition (3))


def _neighbour_zeros(zs: list[float], x: float) -> tuple[float, float]:
    below = [z for z in zs if z < x]
    above = [z for z in zs if z > x]
    if not below or not above:
        raise NotApplicable("f'' does not vanish on both sides of the critical point")
    return max(below), min(above)


def _other_tangency(p: FProfile, eps: int, c2: float, start: float, stop: float) -> float:
    """First x between start and stop (exclusive) with eps f(x) = c2, scanning from start."""
    xs = np.linspace(start, stop, 4001)
    vals = eps * p.derivs_array(xs)[0] - c2
    idx = np.nonzero(vals >= 0)[0]
    if idx.size == 0:
        raise NotApplicable("no mirror tangency")
    i = int(idx[0])
    g = lambda x: eps * p.derivs(x)[0] - c2
    return brentq(g, min(xs[i - 1], xs[i]), max(xs[i - 1], xs[i]), xtol=1e-14)


def _ineq_margins(p: FProfile, eps: int, x0: float, ctx: dict) -> tuple[float, float, dict]:
    """(LHS1 - 2 pi^2, LHS2 - 2 pi^2) for a tangency at x0."""
    f0, _, f2, _ = p.derivs(x0)
    c0 = eps * f0
    x1 = _other_tangency(p, eps, c0, ctx["far_zero"], ctx["far_crit"])
    M = ctx["M"]

    def g1(x):
        q = M - eps * p.derivs(x)[0]
        if q <= 0.0:
            raise QuadratureSingular("M - eps f vanishes inside (x0, x1)")
        return 1.0 / math.sqrt(q)

    lo, hi = min(x0, x1), max(x0, x1)
    i1 = _quad(g1, lo, hi)
    lhs1 = -eps * f2 * i1 * i1

    z0, z1 = ctx["zeta"]

    def g2(x):
        q = c0 - eps * p.derivs(x)[0]
        if q <= 0.0:
            raise QuadratureSingular("eps f(x0) - eps f vanishes inside (zeta0, zeta1)")
        return 1.0 / math.sqrt(q)

    i2 = _quad(g2, z0, z1)
    lhs2 = ctx["kappa_cr"] * i2 * i2
    return lhs1 - TWO_PI_SQ, lhs2 - TWO_PI_SQ, {"x1": x1, "I1": i1, "I2": i2, "lhs1": lhs1, "lhs2": lhs2}


def _chebyshev(a: float, b: float, n: int) -> np.ndarray:
    k = np.arange(n)
    return np.sort(0.5 * (a + b) + 0.5 * (b - a) * np.cos((2 * k + 1) * np.pi / (2 * n)))


def stability_margins(p: FProfile, eps: int, x0: float) -> dict:
    """Both inequality margins for a tangency at x0 (any translate of an admissible half-band)."""
    for ctx in _contexts(p, eps):
        for side in ctx["sides"]:
            lo, hi = side["half_band"]
            shift = p.period * math.floor((x0 - lo) / p.period)
            xs = x0 - shift
            if lo < xs < hi:
                m1, m2, info = _ineq_margins(p, eps, xs, side)
                info["x1"] += shift
                return {"x0": x0, "ineq1_margin": m1, "ineq2_margin": m2, **info}
    raise NotApplicable(f"x0 = {x0!r} is not a tangency facing a {-eps:+d} band")


def _contexts(p: FProfile, eps: int) -> list[dict]:
    """One context per -eps band of a period, each with its two admissible x0 intervals."""
    out = []
    n = len(p.bands)
    for k in range(n):
        band = p.band_at(k)
        if band.sign != -eps:
            continue
        d1, d2 = band.left, band.right
        xcr = band.argmax
        zetas = curvature_zeros(p, xcr - p.period, xcr + p.period)
        zeta = _neighbour_zeros(zetas, xcr)
        kappa_cr = eps * p.derivs(xcr)[2]
        left_band, right_band = p.band_at(k - 1), p.band_at(k + 1)
        sides = []
        # left: x0 between the eps-peak and min(d1, zeta0); mirror tangency right of d2
        lo, hi = left_band.argmax, min(d1, zeta[0])
        sides.append({"name": "left", "half_band": (left_band.argmax, d1), "interval": (lo, hi), "M": left_band.sup_abs,
                      "far_zero": d2, "far_crit": right_band.argmax, "zeta": zeta, "kappa_cr": kappa_cr})
        lo, hi = max(d2, zeta[1]), right_band.argmax
        sides.append({"name": "right", "half_band": (d2, right_band.argmax), "interval": (lo, hi),
                      "M": right_band.sup_abs,
                      "far_zero": d1, "far_crit": left_band.argmax, "zeta": zeta, "kappa_cr": kappa_cr})
        out.append({"band": k, "zeta": zeta, "x_cr": xcr, "sides": sides})
    return out


def _search_side(p: FProfile, eps: int, side: dict, n: int) -> dict:
    lo, hi = side["interval"]
    rec = {"side": side["name"], "interval": [lo, hi], "pass": False, "skipped": 0}
    if not lo < hi:
        rec["note"] = "empty interval: kappa cannot change sign on these geodesics"
        return rec

    def objective(x):
        try:
            m1, m2, _ = _ineq_margins(p, eps, x, side)
        except (QuadratureSingular, NotApplicable):
            return math.inf
        return max(m1, m2)

    width = hi - lo
    xs = _chebyshev(lo + 1e-9 * width, hi - 1e-9 * width, n)
    vals = np.array([objective(x) for x in xs])
    rec["skipped"] = int(np.sum(~np.isfinite(vals)))
    if not np.any(np.isfinite(vals)):
        rec["note"] = "no admissible tangency: every candidate hit a singular quadrature"
        return rec
    i = int(np.argmin(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, n - 1)]
    best_x, best_v = float(xs[i]), float(vals[i])
    if a < b:
        res = minimize_scalar(objective, bounds=(a, b), method="bounded", options={"xatol": 1e-10 * width})
        if res.fun < best_v:
            best_x, best_v = float(res.x), float(res.fun)
    m1, m2, info = _ineq_margins(p, eps, best_x, side)
    rec.update({"x0": best_x, "ineq1_margin": m1, "ineq2_margin": m2, "pass": bool(m1 < 0 and m2 < 0),
                "c0_squared": eps * p.derivs(best_x)[0], **info})
    return rec


def check_stability_inequalities(p: FProfile, eps: int, n: int = STABILITY_GRID) -> dict:
    """Condition (3) for one causal type: search a tangency x0 meeting both inequalities."""
    if eps not in (1, -1):
        raise ValueError("eps must be +1 or -1")
    out: dict = {"eps": eps}
    zs = curvature_zeros(p, 0.0, p.period, 8000)
    zs = [z for z in zs if z < p.period * (1 - 1e-12)]
    margins = [abs(p.derivs(z)[3]) for z in zs]
    out["kappa_simple_zeros"] = {"pass": bool(zs) and min(margins) > p.tolerances.margin_simple,
                                 "zeros": zs, "margin": min(margins) if margins else 0.0}
    counts = [len(b.critical_xs) for b in p.bands]
    out["one_critical_per_band"] = {"pass": all(c == 1 for c in counts), "counts": counts}
    if not p.has_null_orbits:
        out["pass"] = False
        out["note"] = "no null orbits"
        return out
    bands = []
    for ctx in _contexts(p, eps):
        sides = [_search_side(p, eps, s, n) for s in ctx["sides"]]
        best = min((s for s in sides if "x0" in s), key=lambda s: max(s["ineq1_margin"], s["ineq2_margin"]),
                   default=None)
        bands.append({"band": ctx["band"], "x_cr": ctx["x_cr"], "zeta": list(ctx["zeta"]),
                      "sides": sides, "pass": any(s["pass"] for s in sides),
                      "witness_x0": best["x0"] if best else None,
                      "ineq1_margin": best["ineq1_margin"] if best else None,
                      "ineq2_margin": best["ineq2_margin"] if best else None})
    out["bands"] = bands
    out["inequalities_pass"] = bool(bands) and all(b["pass"] for b in bands)
    out["pass"] = (out["inequalities_pass"] and out["kappa_simple_zeros"]["pass"]
                   and out["one_critical_per_band"]["pass"])
    return out


# ---------------------------------------------------------------------------
# diagnostics along a single Jacobi equation


def _integral(basis: JacobiBasis, a: float, b: float) -> float:
    return _quad(lambda t: float(basis.eps_kappa(t)), a, b)


def hill_diagnostic(basis: JacobiBasis, period: float, tol: float = 1e-6) -> dict:
    """T * int_0^T eps kappa for an equation whose solutions are all T-antiperiodic."""
    mono = monodromy_over(basis, period)
    if not mono.is_minus_identity(tol):
        raise NotApplicable(f"monodromy over T = {period!r} is not -Id (trace {mono.trace:.6g})")
    value = period * _integral(basis, 0.0, period)
    return {"value": value, "bound": math.pi**2, "pass": value <= math.pi**2 + tol,
            "slack": math.pi**2 - value, "monodromy": mono.matrix.tolist()}


def hill_for_trace(trace, basis: JacobiBasis, tol: float = 1e-6) -> dict:
    if not trace.periodic:
        raise NotApplicable("Hill diagnostic needs a periodic trace")
    return hill_diagnostic(basis, 2.0 * trace.omega, tol)


def _first_kappa_zero(basis: JacobiBasis, omega: float) -> float | None:
    ts = np.linspace(0.0, omega, 2001)
    vals = np.array([float(basis.eps_kappa(t)) for t in ts])
    sgn = np.sign(vals)
    for i in range(len(ts) - 1):
        if sgn[i] * sgn[i + 1] < 0:
            return brentq(lambda t: float(basis.eps_kappa(t)), ts[i], ts[i + 1], xtol=1e-13)
    return None


@dataclass
class SLBounds:
    omega: float
    d2: float
    D2: float
    lemma0_lhs: float
    lemma0_rhs: float
    lemma0_pass: bool
    all_periodic: bool
    lemma1: dict | None = None
    lemma2: dict | None = None
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def sl_bounds(basis: JacobiBasis, omega: float | None = None, tol: float = 1e-6) -> SLBounds:
    """Sturm-Liouville inequality checks on [0, 2 omega]."""
    omega = basis.omega if omega is None else omega
    if omega is None:
        raise NotApplicable("sl_bounds needs a periodic equation (omega)")
    I_0w = _integral(basis, 0.0, omega)
    I_w2w = _integral(basis, omega, 2 * omega)
    d2 = I_0w / omega
    D2 = max(I_w2w / omega, -float(basis.eps_kappa(0.0)))
    lhs0 = I_0w + I_w2w
    rhs0 = math.pi**2 / (2 * omega)
    mono4 = monodromy_over(basis, 4 * omega)
    mono2 = monodromy_over(basis, 2 * omega)
    all_periodic = mono4.is_identity(tol) or mono2.is_minus_identity(tol)
    out = SLBounds(omega, d2, D2, lhs0, rhs0, lhs0 <= rhs0 + tol, all_periodic)
    if not all_periodic:
        out.notes.append("solutions are not all periodic: lemmas (1) and (2) do not apply")
        return out
    target = math.pi**2 / (4 * omega**2)
    # the inequality is only guaranteed when eps kappa decreases on [omega, 2 omega]
    ts = np.linspace(omega, 2 * omega, 257)
    ek = np.array([float(basis.eps_kappa(t)) for t in ts])
    monotone = bool(np.all(np.diff(ek) <= tol * max(1.0, float(np.max(np.abs(ek))))))
    out.lemma1 = {"lhs": D2, "rhs": target, "pass": D2 >= target - tol, "monotone": monotone}
    if not monotone:
        out.notes.append("eps kappa is not monotone on [omega, 2 omega]: lemma (1) is not guaranteed")
    tau = _first_kappa_zero(basis, omega)
    if tau is None:
        out.notes.append("kappa keeps its sign on [0, omega]: lemma (2) does not apply")
    else:
        lhs = (omega - tau) ** 2 * float(basis.eps_kappa(omega))
        out.lemma2 = {"tau": tau, "lhs": lhs, "rhs": math.pi**2 / 4, "pass": lhs >= math.pi**2 / 4 - tol}
    return out


# ---------------------------------------------------------------------------
# aggregate


@dataclass
class ConditionReport:
    necessary: dict
    obstruction: dict
    famille: dict
    stability: dict  # keyed by "+1" / "-1"
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(x["pass"] for x in (self.necessary, self.obstruction, self.famille)) and all(
            s["pass"] for s in self.stability.values())

    def as_dict(self) -> dict:
        return {"pass": self.passed, "necessary": self.necessary, "obstruction": self.obstruction,
                "famille": self.famille, "stability": self.stability, "notes": list(self.notes)}


def condition_report(p: FProfile, n: int = STABILITY_GRID) -> ConditionReport:
    notes = []
    if any(p.degenerate):
        notes.append("profile has non-simple zeros: outside the certifiable class, "
                     "remaining checks run on the raw profile")
    nec = check_necessary(p)
    if p.flat or not p.has_null_orbits:
        empty = {"pass": False, "note": "no null orbits"}
        return ConditionReport(nec, check_lambda_obstruction(p), check_famille(p), {"+1": empty, "-1": empty}, notes)
    stab = {}
    for eps in (1, -1):
        try:
            stab[f"{eps:+d}"] = check_stability_inequalities(p, eps, n)
        except NotApplicable as exc:
            stab[f"{eps:+d}"] = {"pass": False, "note": str(exc)}
    return ConditionReport(nec, check_lambda_obstruction(p), check_famille(p), stab, notes)
