"""Conjugate-point certificates for geodesics tangent to the Killing field.

For a trace launched at the tangency point (t = 0) with null-orbit crossings
at t0 < t1 and turning time 2w, the torus contains the geodesic restricted
to two dominoes: one around t = 0 and one around t = 2w.  Neither carries
conjugate points iff

    c(t0) + c(t1) >= 0                                   (domino at 0)
    -c(t0) - c(t1) + 2 (c'(2w)/s'(2w)) s(t0) >= 0        (domino at 2w)

Z0 is the first quantity divided by s(t0) > 0, Z1 the second.  An
independent oracle looks directly for a Jacobi field with two zeros inside
one of the windows [-t1, t0], [-t0, t1], [t0, 4w - t1], [t1, 4w - t0].
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import DegenerateZero, LortorusError, QuadratureSingular
from .geodesic import LaunchSpec, _route, launch_tangent, tangency_point
from .jacobi import JacobiBasis, fundamental_basis, next_zero
from .profile import FProfile, build_profile
from .tolerances import Tolerances

SWEEP_LO, SWEEP_HI = 1e-3, 1.0 - 1e-3
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)

ANALYTIC_NOTES = (
    "critical orbits of K carry no conjugate points",
    "geodesics perpendicular to K are free of conjugate points (known result)",
    "null geodesics carry no conjugate points",
    "geodesics never tangent to K have a nowhere-vanishing Jacobi field beta, hence no conjugate points",
)


# ---------------------------------------------------------------------------
# quadratures for the crossing times


def _quad(g, a: float, b: float) -> float:
    with warnings.catch_warnings():
        # quadpack warns when it cannot beat 1e-12; the result is still good to ~1e-11
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(g, a, b, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def _gap_sq(p: FProfile, eps: int, z: float, w: float, cz: float) -> float:
    """C2 - eps f(z + w) written as cz - eps * int_z^{z+w} f', with cz = C2 - eps f(z).

    Unlike the plain difference this keeps full relative accuracy as x -> z.
    """
    u = z + 0.5 * w * (_GL_NODES + 1.0)
    return cz - eps * 0.5 * w * float(np.dot(_GL_WEIGHTS, p.derivs_array(u)[1]))


def _from_tangency(p: FProfile, eps: int, c2: float, z: float, x_end: float) -> float:
    """int dx / sqrt(C2 - eps f) from a simple turning point z to x_end.

    With x = z + sigma u^2 the integrand 2u / sqrt(C2 - eps f) tends to
    2 / sqrt(|f'(z)|) at u = 0.
    """
    f_z, fp_z = p.derivs(z)[:2]
    if abs(fp_z) <= p.tolerances.margin_simple:
        raise DegenerateZero("tangency at a critical point: the time integral diverges")
    cz = c2 - eps * f_z
    if abs(cz) <= 1e-12 * max(1.0, c2):
        cz = 0.0  # z solves eps f = C2; what is left is rounding
    sigma = 1.0 if x_end > z else -1.0
    span = abs(x_end - z)

    def g(u):
        if u == 0.0:
            return 2.0 / math.sqrt(abs(fp_z))
        w = sigma * u * u
        q = _gap_sq(p, eps, z, w, cz)
        if q <= 0.0:
            x = z + w
            raise QuadratureSingular(f"C2 - eps f vanishes inside the integration range at x = {x!r}")
        return 2.0 * u / math.sqrt(q)

    val = _quad(g, 0.0, math.sqrt(span))
    return val


def _regular(p: FProfile, eps: int, c2: float, a: float, b: float) -> float:
    def g(x):
        q = c2 - eps * p.derivs(x)[0]
        if q <= 0.0:
            raise QuadratureSingular(f"C2 - eps f vanishes at x = {x!r}")
        return 1.0 / math.sqrt(q)

    return _quad(g, min(a, b), max(a, b))


@dataclass(frozen=True)
class QuadratureTimes:
    t0: float
    t1: float
    t_turn: float | None
    crossings: tuple[float, ...]  # null orbits in travel order
    z0: float


def turning_quadratures(p: FProfile, spec: LaunchSpec, with_turn: bool = True) -> QuadratureTimes:
    """Crossing times t0, t1 (and the turning time when the trace turns) by quadrature."""
    p.require_certifiable()
    band = p.band_at(spec.band)
    eps, c2 = spec.eps, spec.c2
    z0 = tangency_point(p, band, eps, c2, spec.side)
    direction = -1 if eps * p.derivs(z0)[1] > 0 else 1
    crossed, outcome, x_target, _ = _route(p, spec.band, direction, eps, c2, p.tolerances.tol_crit)
    t0 = _from_tangency(p, eps, c2, z0, crossed[0])
    times = [t0]
    for a, b in zip(crossed[:-1], crossed[1:]):
        times.append(times[-1] + _regular(p, eps, c2, a, b))
    t_turn = None
    if outcome == "turn" and with_turn:
        t_turn = times[-1] + _from_tangency(p, eps, c2, x_target, crossed[-1])
    return QuadratureTimes(times[0], times[1], t_turn, tuple(crossed), z0)


# ---------------------------------------------------------------------------
# criteria


@dataclass(frozen=True)
class DominoValues:
    z0: float
    z1: float | None
    domino_sum: float  # c(t0) + c(t1)


def domino_criteria(basis: JacobiBasis, t0: float, t1: float, omega: float | None = None) -> DominoValues:
    s0, _, c0, _ = basis.values(t0)
    c1 = basis.c(t1)
    total = float(c0 + c1)
    z1 = None
    if omega is not None:
        _, sp2, _, cp2 = basis.values(2.0 * omega)
        z1 = float(-c0 - c1 + 2.0 * (cp2 / sp2) * s0)
    return DominoValues(total / float(s0), z1, total)


def limit_z_small_c(p: FProfile, x_first: float, x_next: float) -> float:
    """C -> 0 limit of c(t0) + c(t1) for the zero pair crossed in this order."""
    a = p.derivs(x_first)[1]
    b = p.derivs(x_next)[1]
    return (a + b) / b


def launch_limit(p: FProfile, band_index: int, side: str) -> tuple[float, tuple[float, float]]:
    """Analytic small-C limit for launches on one side of a band, with the zero pair."""
    band = p.band_at(band_index)
    if side == "left":
        pair = (band.left, p.zero_at(band_index - 1))
    else:
        pair = (band.right, p.zero_at(band_index + 2))
    return limit_z_small_c(p, *pair), pair


# ---------------------------------------------------------------------------
# oracle


@dataclass(frozen=True)
class Witness:
    window: tuple[float, float]
    a: float
    z: float

    def as_dict(self) -> dict:
        return {"window": list(self.window), "a": self.a, "z": self.z}


def oracle_windows(t0: float, t1: float, omega: float | None) -> list[tuple[float, float]]:
    wins = [(-t1, t0), (-t0, t1)]
    if omega is not None:
        wins += [(t0, 4 * omega - t1), (t1, 4 * omega - t0)]
    return wins


def oracle_scan(basis: JacobiBasis, t0: float, t1: float, grid_n: int = 64,
                omega: float | None = None) -> Witness | None:
    """Brute-force search for a Jacobi field with two zeros in one window.

    For every a on a grid of [L, R) the solution u_a vanishing at a is
    sampled on the basis grid; a witness is reported when u_a changes sign
    again before R.  The left end a = L is included: a zero pair (L, z) with
    z < R persists for a slightly inside the window.
    """
    ts, S, C = basis.grid()
    for lo, hi in oracle_windows(t0, t1, omega):
        a_grid = lo + (hi - lo) * np.arange(grid_n) / grid_n
        va = basis.values(a_grid)
        sa, ca = va[0], va[2]
        vr = basis.values(hi)
        u_end = ca * vr[0] - sa * vr[2]
        sep = 1e-6 * max(basis.omega or 1.0, 1e-3)
        cols = (ts > lo) & (ts < hi)
        tt = ts[cols]
        U = ca[:, None] * S[None, cols] - sa[:, None] * C[None, cols]
        inside = tt[None, :] > a_grid[:, None] + sep
        hit = np.any((U <= 0.0) & inside, axis=1) | (u_end < 0.0)
        if np.any(hit):
            i = int(np.nonzero(hit)[0][0])
            a = float(a_grid[i])
            return Witness((float(lo), float(hi)), a, next_zero(basis, a))
    return None


# ---------------------------------------------------------------------------
# certificates


@dataclass
class DominoCertificate:
    band: int
    eps: int
    side: str
    c2: float
    z0: float | None = None
    t0: float | None = None
    t1: float | None = None
    t0_quad: float | None = None
    t1_quad: float | None = None
    omega: float | None = None
    classification: str | None = None
    Z0: float | None = None
    Z1: float | None = None
    domino_sum: float | None = None
    margin: float | None = None
    verdict: str = "Error"  # NoConjugate | Conjugate | Degenerate | Error
    witness: Witness | None = None
    oracle_agrees: bool | None = None
    duality_error: float | None = None
    error: str | None = None
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "band", "eps", "side", "c2", "z0", "t0", "t1", "t0_quad", "t1_quad", "omega", "classification",
            "Z0", "Z1", "domino_sum", "margin", "verdict", "oracle_agrees", "duality_error", "error")}
        d["witness"] = self.witness.as_dict() if self.witness else None
        d["notes"] = list(self.notes)
        return d

    @property
    def sort_key(self):
        return (self.band, self.side, self.c2)


def certify(p: FProfile, spec: LaunchSpec, grid_n: int = 64) -> DominoCertificate:
    tol = p.tolerances
    cert = DominoCertificate(spec.band, spec.eps, spec.side, spec.c2)
    trace = launch_tangent(p, spec)
    basis = fundamental_basis(trace)
    cert.z0 = trace.z0
    cert.t0, cert.t1 = trace.t0, trace.t1
    cert.omega = trace.omega
    cert.classification = trace.classification.kind

    q = turning_quadratures(p, spec, with_turn=False)
    cert.t0_quad, cert.t1_quad = q.t0, q.t1
    cert.duality_error = max(abs(q.t0 - trace.t0), abs(q.t1 - trace.t1))

    omega = trace.omega if trace.periodic else None
    vals = domino_criteria(basis, trace.t0, trace.t1, omega)
    cert.Z0, cert.Z1, cert.domino_sum = vals.z0, vals.z1, vals.domino_sum
    if omega is None:
        cert.notes.append("asymptotic trace: only the domino at t = 0 is tested")
    margins = [vals.domino_sum] + ([vals.z1] if vals.z1 is not None else [])
    cert.margin = min(margins)
    if cert.margin < -tol.tol_sign:
        cert.verdict = "Conjugate"
    elif min(abs(m) for m in margins) <= tol.tol_sign:
        cert.verdict = "Degenerate"
    else:
        cert.verdict = "NoConjugate"

    cert.witness = oracle_scan(basis, trace.t0, trace.t1, grid_n, omega)
    if cert.verdict == "Degenerate":
        cert.oracle_agrees = None
    else:
        cert.oracle_agrees = (cert.witness is not None) == (cert.verdict == "Conjugate")
    return cert


def _safe_certify(p: FProfile, spec: LaunchSpec, grid_n: int) -> DominoCertificate:
    try:
        return certify(p, spec, grid_n)
    except LortorusError as exc:
        cert = DominoCertificate(spec.band, spec.eps, spec.side, spec.c2)
        cert.verdict = "Error"
        cert.error = f"{type(exc).__name__}: {exc}"
        return cert


def chebyshev_levels(n: int, lo: float = SWEEP_LO, hi: float = SWEEP_HI) -> np.ndarray:
    """n Chebyshev nodes on [lo, hi], ascending."""
    k = np.arange(n)
    x = np.cos((2 * k + 1) * np.pi / (2 * n))
    return np.sort(0.5 * (lo + hi) + 0.5 * (hi - lo) * x)


def sweep_specs(p: FProfile, band_index: int, n: int) -> list[LaunchSpec]:
    band = p.band_at(band_index)
    levels = chebyshev_levels(n) * band.sup_abs
    return [LaunchSpec(band.sign, float(c2), band_index, side) for side in ("left", "right") for c2 in levels]


# -- parallel plumbing: workers rebuild the profile from its text ----------

_WORKER_PROFILE: FProfile | None = None


def _worker_init(text: str, hint: float, tol: dict):
    global _WORKER_PROFILE
    _WORKER_PROFILE = build_profile(text, hint, Tolerances(**tol))


def _worker_run(args):
    spec, grid_n = args
    return _safe_certify(_WORKER_PROFILE, spec, grid_n)


def run_certificates(p: FProfile, specs: list[LaunchSpec], grid_n: int = 64, jobs: int = 1,
                     period_hint: float | None = None) -> list[DominoCertificate]:
    """Certify every spec; results are sorted so output order never depends on jobs."""
    if jobs <= 1 or len(specs) < 2:
        certs = [_safe_certify(p, s, grid_n) for s in specs]
    else:
        hint = p.period if period_hint is None else period_hint
        with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init,
                                 initargs=(p.expr.text, hint, p.tolerances.as_dict())) as pool:
            certs = list(pool.map(_worker_run, [(s, grid_n) for s in specs], chunksize=8))
    return sorted(certs, key=lambda c: c.sort_key)


@dataclass
class SweepRecord:
    band: int
    eps: int
    n: int
    certificates: list
    min_z0: float | None = None
    min_z1: float | None = None
    argmin_z0: float | None = None
    argmin_z1: float | None = None
    min_margin: float | None = None

    def summarize(self):
        ok = [c for c in self.certificates if c.verdict != "Error"]
        if ok:
            c = min(ok, key=lambda c: c.Z0)
            self.min_z0, self.argmin_z0 = c.Z0, c.c2
            with1 = [c for c in ok if c.Z1 is not None]
            if with1:
                c = min(with1, key=lambda c: c.Z1)
                self.min_z1, self.argmin_z1 = c.Z1, c.c2
            self.min_margin = min(c.margin for c in ok)
        return self

    def as_dict(self, with_certificates: bool = True) -> dict:
        d = {
            "band": self.band, "eps": self.eps, "samples": self.n,
            "min_Z0": self.min_z0, "argmin_Z0_c2": self.argmin_z0,
            "min_Z1": self.min_z1, "argmin_Z1_c2": self.argmin_z1,
            "min_margin": self.min_margin,
            "verdicts": _count(c.verdict for c in self.certificates),
        }
        if with_certificates:
            d["certificates"] = [c.as_dict() for c in self.certificates]
        return d


def _count(items) -> dict:
    out: dict = {}
    for it in items:
        out[it] = out.get(it, 0) + 1
    return dict(sorted(out.items()))


def band_sweep(p: FProfile, band_index: int, n: int = 64, grid_n: int = 64, jobs: int = 1) -> SweepRecord:
    if n < 2:
        raise ValueError("a sweep needs at least two samples")
    specs = sweep_specs(p, band_index, n)
    certs = run_certificates(p, specs, grid_n, jobs)
    return SweepRecord(band_index, p.band_at(band_index).sign, n, certs).summarize()


# ---------------------------------------------------------------------------
# torus verdict


@dataclass
class TorusVerdict:
    overall: str  # CertifiedNoConjugate | ConjugateFound | Inconclusive
    sweeps: list
    notes: list
    obstruction_residuals: list
    evidence: list = field(default_factory=list)

    @property
    def certificates(self):
        out = [c for s in self.sweeps for c in s.certificates]
        return out + list(self.evidence)

    def exit_code(self) -> int:
        return {"CertifiedNoConjugate": 0, "ConjugateFound": 1}.get(self.overall, 2)

    def as_dict(self, with_certificates: bool = True) -> dict:
        conj = [c for c in self.certificates if c.verdict == "Conjugate" and c.oracle_agrees]
        return {
            "overall": self.overall,
            "notes": list(self.notes),
            "obstruction_residuals": list(self.obstruction_residuals),
            "agreement": all(c.oracle_agrees is not False for c in self.certificates),
            "witness": conj[0].as_dict() if conj else None,
            "evidence": [c.as_dict() for c in self.evidence],
            "sweeps": [s.as_dict(with_certificates) for s in self.sweeps],
        }


def _aggregate(certs) -> str:
    if any(c.verdict == "Conjugate" and c.oracle_agrees for c in certs):
        return "ConjugateFound"
    if all(c.verdict == "NoConjugate" and c.oracle_agrees for c in certs):
        return "CertifiedNoConjugate"
    return "Inconclusive"


def torus_verdict(p: FProfile, n: int = 64, grid_n: int = 64, jobs: int = 1,
                  obstruction_tol: float = 1e-9) -> TorusVerdict:
    if p.flat:
        return TorusVerdict("CertifiedNoConjugate", [], ["flat: f is constant, curvature vanishes"], [])
    p.require_certifiable()
    if not p.has_null_orbits:
        return TorusVerdict("Inconclusive", [], [
            "no null orbits: f has constant sign, the domino criterion does not apply"], [])

    notes = list(ANALYTIC_NOTES)
    residuals = list(p.obstruction_residuals())
    scale = max(1.0, max(abs(s) for s in p.zero_slopes))
    if any(abs(r) > obstruction_tol * scale for r in residuals):
        notes.append("obstruction f'(x_n) + f'(x_{n+1}) = 0 fails: conjugate points are forced near null orbits")
        specs = []
        for k in range(len(p.bands)):
            band = p.band_at(k)
            for side in ("left", "right"):
                specs.append(LaunchSpec(band.sign, SWEEP_LO * band.sup_abs, k, side))
        evidence = run_certificates(p, specs, grid_n, jobs)
        if _aggregate(evidence) == "ConjugateFound":
            return TorusVerdict("ConjugateFound", [], notes, residuals, evidence)
        notes.append("small-C evidence sweep found no witness; running the full sweep")
    else:
        evidence = []

    sweeps = []
    specs = []
    for k in range(len(p.bands)):
        specs.extend(sweep_specs(p, k, n))
    certs = run_certificates(p, specs, grid_n, jobs)
    for k in range(len(p.bands)):
        mine = [c for c in certs if c.band == k]
        sweeps.append(SweepRecord(k, p.band_at(k).sign, n, mine).summarize())
    overall = _aggregate(certs + evidence)
    if overall == "Inconclusive":
        kinds = _count(c.verdict for c in certs)
        notes.append(f"inconclusive: verdict counts {kinds}")
    return TorusVerdict(overall, sweeps, notes, residuals, evidence)
