"""Command-line front end.

    lortorus bands      --config cp.json
    lortorus certify    --config cp.json --samples 64 --jobs 4 --out report.json
    lortorus conditions --expr "sin(2*x)" --period 3.14159
    lortorus geodesic   --config cp.json --eps 1 --c2 0.5 --jacobi
    lortorus saddle     --config cp.json
    lortorus oracle     --config cp.json --seed 7

Exit codes: 0 certified / success, 1 conjugate points found, 2 inconclusive
(or a failed condition check), 3 profile rejected, 4 bad input (expression,
config or arguments), 5 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .certifier import SWEEP_HI, SWEEP_LO, band_sweep, run_certificates, sweep_specs, torus_verdict
from .charts import saddle_chart
from .conditions import condition_report
from .errors import ConfigError, LortorusError, NumericFailure, ParseError, ProfileError
from .geodesic import LaunchSpec, launch_tangent
from .jacobi import fundamental_basis
from .profile import FProfile, build_profile
from .tolerances import DEFAULT, Tolerances

EXIT_OK, EXIT_CONJUGATE, EXIT_INCONCLUSIVE = 0, 1, 2
EXIT_PROFILE, EXIT_INPUT, EXIT_NUMERIC = 3, 4, 5

# ---------------------------------------------------------------------------
# config schema

SCHEMA = {
    "profile": {"expr": str, "period_hint": (int, float), "tolerances": dict},
    "certify": {"samples": int, "grid_n": int, "bands": list, "csv": str},
    "conditions": {"grid": int},
    "geodesic": {"eps": int, "c2": (int, float), "band": int, "side": str, "jacobi": bool, "samples": int},
    "saddle": {"zero": int, "halfwidth": (int, float), "grid": int},
    "oracle": {"samples": int, "grid_n": int, "bands": list, "seed": int},
    "output": {"out": str},
    "jobs": int,
}

DEFAULTS = {
    "certify": {"samples": 64, "grid_n": 64},
    "conditions": {"grid": 256},
    "geodesic": {"eps": 1, "band": None, "side": "left", "jacobi": False, "samples": 801},
    "saddle": {"zero": 0, "halfwidth": None, "grid": 21},
    "oracle": {"samples": 16, "grid_n": 64},
    "jobs": 1,
}


def _check_type(path: str, value, kind):
    if isinstance(value, bool) and kind in (int, (int, float)):
        raise ConfigError(f"{path}: expected a number, got a boolean")
    if not isinstance(value, kind):
        name = kind.__name__ if isinstance(kind, type) else "number"
        raise ConfigError(f"{path}: expected {name}, got {type(value).__name__}")


def validate_config(cfg: dict) -> dict:
    """Reject unknown keys and wrongly typed values."""
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    for key, value in cfg.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        spec = SCHEMA[key]
        if isinstance(spec, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected an object")
            for sub, v in value.items():
                if sub not in spec:
                    raise ConfigError(f"unknown config key {key}.{sub}")
                if v is None:
                    continue
                _check_type(f"{key}.{sub}", v, spec[sub])
        else:
            _check_type(key, value, spec)
    prof = cfg.get("profile")
    if prof is None or "expr" not in prof:
        raise ConfigError("profile.expr is required")
    if "period_hint" not in prof:
        raise ConfigError("profile.period_hint is required")
    try:
        tol = DEFAULT.with_overrides(prof.get("tolerances"))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"profile.tolerances: {exc}") from exc
    geo = cfg.get("geodesic", {})
    if geo.get("eps") not in (None, 1, -1):
        raise ConfigError("geodesic.eps must be +1 or -1")
    if geo.get("side") not in (None, "left", "right"):
        raise ConfigError("geodesic.side must be 'left' or 'right'")
    if cfg.get("jobs", 1) < 1:
        raise ConfigError("jobs must be at least 1")
    for sec in ("certify", "oracle"):
        if cfg.get(sec, {}).get("samples", 2) < 2:
            raise ConfigError(f"{sec}.samples must be at least 2")
    if any(v <= 0 for v in tol.as_dict().values()):
        raise ConfigError("profile.tolerances: all tolerances must be positive")
    return cfg


def effective_config(cfg: dict) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for key, value in cfg.items():
        if isinstance(value, dict):
            out.setdefault(key, {}).update(value)
        else:
            out[key] = value
    return out


def load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    cfg = copy.deepcopy(cfg)
    prof = cfg.setdefault("profile", {})
    if args.expr is not None:
        prof["expr"] = args.expr
    if args.period is not None:
        prof["period_hint"] = args.period
    if args.jobs is not None:
        cfg["jobs"] = args.jobs
    if args.out is not None:
        cfg.setdefault("output", {})["out"] = args.out
    cmd = args.command
    if args.samples is not None and cmd in ("certify", "oracle", "geodesic"):
        cfg.setdefault(cmd, {})["samples"] = args.samples
    if cmd in ("geodesic",):
        geo = cfg.setdefault("geodesic", {})
        for name in ("eps", "c2", "band", "side"):
            val = getattr(args, name)
            if val is not None:
                geo[name] = val
        if args.jacobi:
            geo["jacobi"] = True
    if cmd == "oracle":
        orc = cfg.setdefault("oracle", {})
        if args.seed is not None:
            orc["seed"] = args.seed
    if cmd == "certify" and args.csv is not None:
        cfg.setdefault("certify", {})["csv"] = args.csv
    return effective_config(validate_config(cfg))


def config_hash(cfg: dict) -> str:
    """sha256 of the analysis inputs; parallelism and output paths are excluded."""
    relevant = {k: v for k, v in cfg.items() if k not in ("jobs", "output")}
    if "csv" in relevant.get("certify", {}):
        relevant["certify"] = {k: v for k, v in relevant["certify"].items() if k != "csv"}
    canon = json.dumps(_plain(relevant), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# deterministic serialization


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if hasattr(obj, "as_dict"):
        return _plain(obj.as_dict())
    return obj


def fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = "%.17g" % x
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 2) -> str:
    """JSON with 17 significant digits for every float; non-finite floats become null."""
    out = io.StringIO()

    def emit(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, dict):
            if not o:
                out.write("{}")
                return
            out.write("{\n")
            for i, (k, v) in enumerate(o.items()):
                out.write(pad + json.dumps(k) + ": ")
                emit(v, level + 1)
                out.write(",\n" if i + 1 < len(o) else "\n")
            out.write(end + "}")
        elif isinstance(o, list):
            if not o:
                out.write("[]")
                return
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in o):
                out.write("[" + ", ".join(fmt_float(v) if isinstance(v, float) else str(v) for v in o) + "]")
                return
            out.write("[\n")
            for i, v in enumerate(o):
                out.write(pad)
                emit(v, level + 1)
                out.write(",\n" if i + 1 < len(o) else "\n")
            out.write(end + "]")
        elif isinstance(o, bool) or o is None or isinstance(o, str):
            out.write(json.dumps(o))
        elif isinstance(o, int):
            out.write(str(o))
        elif isinstance(o, float):
            out.write(fmt_float(o))
        else:
            out.write(json.dumps(str(o)))

    emit(_plain(obj), 0)
    out.write("\n")
    return out.getvalue()


def metadata(cfg: dict, tol: Tolerances) -> dict:
    return {
        "tool": "lortorus",
        "version": __version__,
        "config_sha256": config_hash(cfg),
        "tolerances": tol.as_dict(),
        "numerics": "floating-point certification at the stated tolerances; not interval arithmetic",
    }


def csv_text(header: list[str], rows, comments: list[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


@dataclass
class Outcome:
    code: int
    text: str  # main output (JSON or CSV)
    extra: dict | None = None  # path -> text for secondary files


def _profile(cfg: dict) -> tuple[FProfile, Tolerances]:
    prof = cfg["profile"]
    tol = DEFAULT.with_overrides(prof.get("tolerances"))
    return build_profile(prof["expr"], float(prof["period_hint"]), tol), tol


def _profile_dict(p: FProfile) -> dict:
    return {
        "expr": p.expr.text,
        "period": p.period,
        "flat": p.flat,
        "n_bands": 0 if p.flat else p.n_bands,
        "zeros": list(p.zeros),
        "zero_slopes": list(p.zero_slopes),
        "degenerate_zeros": [z for z, d in zip(p.zeros, p.degenerate) if d],
        "critical_points": list(p.critical_points),
        "symmetry_axis": p.symmetry_axis,
        "obstruction_residuals": list(p.obstruction_residuals()) if p.has_null_orbits else [],
        "bands": [{"index": b.index, "interval": [b.left, b.right], "sign": b.sign, "sup_abs": b.sup_abs,
                   "argmax": b.argmax, "critical_xs": list(b.critical_xs),
                   "curvature_zeros": list(b.curvature_zeros), "no_null_orbits": b.no_null_orbits}
                  for b in p.bands],
    }


def cmd_bands(cfg: dict) -> Outcome:
    p, tol = _profile(cfg)
    rep = {"command": "bands", "metadata": metadata(cfg, tol), "profile": _profile_dict(p), "notes": []}
    if p.flat:
        rep["notes"].append("flat: f is constant")
    elif not p.has_null_orbits:
        rep["notes"].append("no null orbits: f has constant sign")
    if any(p.degenerate):
        rep["notes"].append("non-simple zero(s): profile accepted for inspection, rejected for certification")
    return Outcome(EXIT_OK, dumps(rep))


def _z_csv(certs) -> str:
    rows = [(c.band, c.side, c.c2, c.Z0 if c.Z0 is not None else math.nan,
             c.Z1 if c.Z1 is not None else math.nan, c.verdict) for c in certs]
    return csv_text(["band", "side", "c2", "Z0", "Z1", "verdict"], rows)


def cmd_certify(cfg: dict) -> Outcome:
    p, tol = _profile(cfg)
    opts = cfg["certify"]
    jobs = cfg["jobs"]
    bands = opts.get("bands")
    if bands:
        sweeps = [band_sweep(p, int(k), opts["samples"], opts["grid_n"], jobs) for k in bands]
        certs = [c for s in sweeps for c in s.certificates]
        if any(c.verdict == "Conjugate" and c.oracle_agrees for c in certs):
            overall = "ConjugateFound"
        elif all(c.verdict == "NoConjugate" and c.oracle_agrees for c in certs):
            overall = "CertifiedNoConjugate"
        else:
            overall = "Inconclusive"
        body = {"overall": overall, "notes": ["partial sweep over the selected bands only"],
                "agreement": all(c.oracle_agrees is not False for c in certs),
                "sweeps": [s.as_dict() for s in sweeps]}
        code = {"CertifiedNoConjugate": 0, "ConjugateFound": 1}.get(overall, 2)
    else:
        v = torus_verdict(p, opts["samples"], opts["grid_n"], jobs)
        body = v.as_dict()
        certs = v.certificates
        code = v.exit_code()
    rep = {"command": "certify", "metadata": metadata(cfg, tol), "profile": {"expr": p.expr.text, "period": p.period},
           **body}
    extra = {opts["csv"]: _z_csv(certs)} if opts.get("csv") else None
    return Outcome(code, dumps(rep), extra)


def cmd_oracle(cfg: dict) -> Outcome:
    p, tol = _profile(cfg)
    if p.flat:
        rep = {"command": "oracle", "metadata": metadata(cfg, tol), "agreement": True, "instances": [],
               "notes": ["flat: Jacobi fields are linear, no witness can exist"]}
        return Outcome(EXIT_OK, dumps(rep))
    p.require_certifiable()
    opts = cfg["oracle"]
    bands = opts.get("bands") or list(range(len(p.bands)))
    specs = []
    seed = opts.get("seed")
    rng = np.random.default_rng(seed) if seed is not None else None
    for k in bands:
        band = p.band_at(int(k))
        if rng is None:
            specs.extend(sweep_specs(p, int(k), opts["samples"]))
        else:
            levels = np.sort(rng.uniform(SWEEP_LO, SWEEP_HI, opts["samples"])) * band.sup_abs
            specs.extend(LaunchSpec(band.sign, float(c2), int(k), side) for side in ("left", "right") for c2 in levels)
    certs = run_certificates(p, specs, opts["grid_n"], cfg["jobs"])
    rows = [{"band": c.band, "eps": c.eps, "side": c.side, "c2": c.c2, "margin": c.margin, "verdict": c.verdict,
             "witness": c.witness.as_dict() if c.witness else None, "oracle_agrees": c.oracle_agrees,
             "error": c.error} for c in certs]
    agreement = all(c.oracle_agrees is not False for c in certs)
    found = any(c.witness is not None for c in certs)
    rep = {"command": "oracle", "metadata": metadata(cfg, tol), "agreement": agreement,
           "witness_found": found, "instances": rows}
    code = EXIT_INCONCLUSIVE if not agreement else (EXIT_CONJUGATE if found else EXIT_OK)
    return Outcome(code, dumps(rep))


def cmd_conditions(cfg: dict) -> Outcome:
    p, tol = _profile(cfg)
    r = condition_report(p, cfg["conditions"]["grid"])
    rep = {"command": "conditions", "metadata": metadata(cfg, tol),
           "profile": {"expr": p.expr.text, "period": p.period},
           **r.as_dict()}
    return Outcome(EXIT_OK if r.passed else EXIT_INCONCLUSIVE, dumps(rep))


def _default_band(p: FProfile, eps: int) -> int:
    for b in p.bands:
        if b.sign == eps:
            return b.index
    raise ConfigError(f"profile has no band of sign {eps:+d}")


def cmd_geodesic(cfg: dict) -> Outcome:
    p, tol = _profile(cfg)
    p.require_certifiable()
    g = cfg["geodesic"]
    if "c2" not in g or g["c2"] is None:
        raise ConfigError("geodesic.c2 is required (use --c2)")
    eps = g["eps"]
    band = g["band"] if g["band"] is not None else _default_band(p, eps)
    spec = LaunchSpec(eps, float(g["c2"]), band, g["side"])
    trace = launch_tangent(p, spec)
    events = {"z0": trace.z0, "t0": trace.t0, "t1": trace.t1, "t_turn": trace.t_turn,
              "omega": trace.omega, "classification": trace.classification.kind, "x_limit": trace.x_limit}
    comments = ["metadata " + json.dumps(_plain(metadata(cfg, tol)), sort_keys=True),
                "events " + json.dumps(_plain(events), sort_keys=True)]
    n = g["samples"]
    if g["jacobi"]:
        basis = fundamental_basis(trace)
        ts = np.linspace(trace.t_begin, trace.t_end, n)
        s, sp, c, cp = basis.values(ts)
        beta = basis.beta0 * s
        text = csv_text(["t", "s", "c", "sprime", "cprime", "beta"], zip(ts, s, c, sp, cp, beta), comments)
    else:
        ts = np.linspace(0.0, trace.t_end, n)
        st = trace.state(ts)
        f_x = p.derivs_array(st[0])[0]
        text = csv_text(["t", "x", "xprime", "f_of_x", "kappa_of_t"], zip(ts, st[0], st[1], f_x, trace.kappa(ts)),
                        comments)
    return Outcome(EXIT_OK, text)


def cmd_saddle(cfg: dict) -> Outcome:
    p, tol = _profile(cfg)
    opts = cfg["saddle"]
    sc = saddle_chart(p, opts["zero"], opts["halfwidth"])
    comments = ["metadata " + json.dumps(_plain(metadata(cfg, tol)), sort_keys=True),
                "chart " + json.dumps(_plain({"anchor": sc.anchor, "lambda": sc.lam, "halfwidth": sc.halfwidth,
                                              "identity_residual": sc.identity_residual()}), sort_keys=True)]
    return Outcome(EXIT_OK, csv_text(["u", "v", "g_uu", "g_uv", "g_vv"], sc.grid(opts["grid"]), comments))


COMMANDS = {
    "bands": cmd_bands,
    "conditions": cmd_conditions,
    "certify": cmd_certify,
    "geodesic": cmd_geodesic,
    "saddle": cmd_saddle,
    "oracle": cmd_oracle,
}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration (see docs/config.md)")
    common.add_argument("--expr", help="profile expression, overrides profile.expr")
    common.add_argument("--period", type=float, help="period hint, overrides profile.period_hint")
    common.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    common.add_argument("--jobs", type=int, metavar="N", help="worker processes for sweeps")
    common.add_argument("--samples", type=int, metavar="N", help="C^2 samples per band side (or CSV rows)")
    common.add_argument("--eps", type=int, choices=(1, -1), help="causal type of the geodesic")
    common.add_argument("--c2", type=float, help="squared Clairaut constant")
    common.add_argument("--band", type=int, help="band index for geodesic launches")
    common.add_argument("--side", choices=("left", "right"), help="side of the band peak")
    common.add_argument("--seed", type=int, help="seed for randomized oracle sweeps")
    common.add_argument("--jacobi", action="store_true", help="geodesic: emit the Jacobi basis instead")
    common.add_argument("--csv", metavar="PATH", help="certify: also write (band, side, C^2, Z0, Z1)")

    parser = _Parser(prog="lortorus", description="Conjugate points on Lorentzian tori with a Killing field.")
    parser.add_argument("--version", action="version", version=f"lortorus {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "bands": "zeros, bands, critical points and symmetry of f",
        "conditions": "necessary, obstruction, family and stability checks",
        "certify": "sweep tangent geodesics and issue a torus verdict",
        "geodesic": "trace one tangent geodesic (CSV)",
        "saddle": "saddle-chart metric table (CSV)",
        "oracle": "brute-force Jacobi-zero scan with agreement report",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def _write(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args)
        outcome = COMMANDS[args.command](cfg)
    except ParseError as exc:
        print(f"error: parse error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ProfileError as exc:
        print(f"error: profile rejected: {exc}", file=sys.stderr)
        return EXIT_PROFILE
    except NumericFailure as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except LortorusError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for path, text in (outcome.extra or {}).items():
        _write(path, text)
    try:
        _write(cfg.get("output", {}).get("out"), outcome.text)
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return outcome.code


if __name__ == "__main__":
    raise SystemExit(main())
