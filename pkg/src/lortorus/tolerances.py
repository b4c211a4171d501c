from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by every module.

    ``tol_root``      bracketed zeros of f are polished to this width.
    ``tol_sym``       periodicity and symmetry-axis residual threshold.
    ``margin_simple`` a zero with |f'| at or below this is degenerate.
    ``tol_sign``      certificates with |margin| below this are Degenerate.
    ``tol_crit``      C^2 within this of a critical value means Asymptotic.
    ``ode_rtol``/``ode_atol`` integrator tolerances.
    ``event_tol``     width to which event times are polished.
    """

    tol_root: float = 1e-12
    tol_sym: float = 1e-9
    margin_simple: float = 1e-6
    tol_sign: float = 1e-6
    tol_crit: float = 1e-9
    ode_rtol: float = 1e-11
    ode_atol: float = 1e-11
    event_tol: float = 1e-12

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ValueError(f"tolerance {f.name} must be a positive number, got {v!r}")

    def as_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, overrides: dict | None) -> "Tolerances":
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise KeyError(f"unknown tolerance key(s): {', '.join(unknown)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


DEFAULT = Tolerances()
