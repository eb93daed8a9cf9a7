"""Command-line batch runner.

Every subcommand writes deterministic CSV/JSON artifacts plus ``manifest.json``
with the config hash and a sha256 per output.  Files are written atomically.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

OUT_ENV = "ARTIFACT_OUTPUT_DIR"

SCHEMA = {
    "dtn_trace.csv": "FourierField dump: header line with grid, then i1,i2,re,im per coefficient",
    "dtn.json": "surface amplitude, grid, solver config, trace L2 norm, trace mean",
    "paralin.csv": "eps,remainder_l2",
    "paralin_bands.csv": "band,remainder,sigma,psi,trace (band L2 norms at the largest eps)",
    "paralin.json": "fitted slope of log remainder_l2 against log eps, expected slope 2",
    "stokes.csv": "eps,mu,residual,min_taylor,min_abs_V1",
    "stokes.json": "mu_c, mu1, fitted residual slope (expected 2)",
    "stokes_eps<eps>.json": "wave header and sigma/psi coefficient dumps",
    "conjugate.json": "nu, 1/mu, transport-map defects; cascade kappa values when requested",
    "cascade.csv": "case,nu,kappa_re,kappa_im,kappa_prime_re,kappa_prime_im,parity_defect,transport_defect",
    "divisors_scan.json": "violations [k1,k2,gap], pass flag, recheck count",
    "divisors_measure.csv": "r,excluded_fraction,excluded_fraction_upper",
    "divisors_measure.json": "fitted exponent and constant, N0, regime flags, lemma claim checks",
    "suite.csv": "criterion,name,passed",
    "suite.json": "per-criterion measured values, pinned tolerances, runtime",
    "manifest.json": "subcommand, config, config_hash, outputs {name: sha256}, status",
}

# parameters that never change results
_NON_SEMANTIC = {"out", "config", "schema", "func"}


class UsageError(ValueError):
    pass


# ----------------------------------------------------------------------
# helpers

def _floats(text: str) -> List[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> List[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def config_hash(cfg: dict) -> str:
    sem = {k: v for k, v in cfg.items() if k not in _NON_SEMANTIC}
    return hashlib.sha256(json.dumps(sem, sort_keys=True, default=str).encode()).hexdigest()


def atomic_write(path: Path, text: str) -> str:
    """Write via a temporary file and rename; returns the sha256 of the content."""
    data = text.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(data).hexdigest()


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _slope(x, y) -> Optional[float]:
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def _check(cond: bool, msg: str):
    if not cond:
        raise UsageError(msg)


def _pow2(n: int, name: str):
    _check(n >= 8 and n & (n - 1) == 0, f"{name} must be a power of two >= 8")


# ----------------------------------------------------------------------
# subcommands: each validates, computes, and returns {filename: text}

def _solver(a):
    from .dtn import SolverConfig
    return SolverConfig(a.depth, a.nz)


def _validate_common(a):
    _pow2(a.n, "--n")
    _check(a.ell > 0, "--ell must be positive")
    _check(a.depth > 0, "--depth must be positive")
    _check(a.nz >= 4, "--nz must be at least 4")


def cmd_dtn(a) -> Dict[str, str]:
    from .dtn import dtn_apply
    from .torus import FourierField, TorusGrid
    _validate_common(a)
    _check(0 <= a.eps <= 0.2, "--eps must lie in [0, 0.2]")
    g = TorusGrid(a.n, a.n, a.ell)
    s = FourierField.from_function(g, lambda x1, x2: a.eps * np.cos(x1) * np.cos(x2 / a.ell))
    p = FourierField.from_function(g, lambda x1, x2: np.sin(x1) * np.cos(x2 / a.ell))
    G = dtn_apply(s, p, _solver(a))
    info = {"eps": a.eps, "grid": g.to_json(), "solver": _solver(a).to_json(),
            "trace_l2": G.l2(), "trace_mean": abs(G.mean())}
    return {"dtn_trace.csv": G.to_csv(), "dtn.json": _dumps(info)}


def cmd_paralin(a) -> Dict[str, str]:
    from .dtn import paralin_remainder
    from .torus import TorusGrid, random_field
    _validate_common(a)
    _check(len(a.eps) >= 1 and all(0 < e <= 0.2 for e in a.eps), "--eps values must lie in (0, 0.2]")
    _check(a.order in (1, 2, 3), "--order must be 1, 2 or 3")
    rng = np.random.default_rng(a.seed)
    g = TorusGrid(a.n, a.n, a.ell)
    s0 = random_field(g, rng, kmax=min(16, a.n // 4), kmin=2, parity="ee", zero_mean=True)
    p0 = random_field(g, rng, kmax=min(16, a.n // 4), kmin=2, parity="oe", zero_mean=True)
    s0, p0 = s0 / s0.sup(), p0 / p0.sup()
    rows, last = ["eps,remainder_l2"], None
    rs = []
    for e in sorted(a.eps):
        last = paralin_remainder(s0 * e, p0 * e, a.order, _solver(a), ndir=a.ndir)
        rs.append(last.remainder.l2())
        rows.append(f"{e:.17g},{rs[-1]:.17g}")
    info = {"slope": _slope(sorted(a.eps), rs), "expected_slope": 2.0, "order": a.order,
            "axes": {"x": "eps", "y": "remainder_l2", "scale": "loglog"}}
    return {"paralin.csv": "\n".join(rows) + "\n", "paralin_bands.csv": last.to_csv(),
            "paralin.json": _dumps(info)}


def cmd_stokes(a) -> Dict[str, str]:
    from .dtn import taylor_sign_check
    from .waves import (critical_mu, mu1_coefficient, residual_norm, stokes_wave, system_residual,
                        validate_diamond, wave_coefficients)
    _validate_common(a)
    _check(all(0 <= e <= 0.2 for e in a.eps), "--eps values must lie in [0, 0.2]")
    cfg = _solver(a)
    out, rows, res = {}, ["eps,mu,residual,min_taylor,min_abs_V1"], []
    for e in sorted(a.eps):
        w, _ = stokes_wave(a.ell, e, a.n)
        co = wave_coefficients(w, cfg)
        r = residual_norm(*system_residual(w, cfg))
        rep = validate_diamond(w, cfg, coeffs=co)
        res.append(r)
        rows.append(f"{e:.17g},{w.mu:.17g},{r:.17g},{taylor_sign_check(co).minimum:.17g},{rep.min_abs_V1:.17g}")
        out[f"stokes_eps{e:g}.json"] = w.to_json() + "\n"
    mc = critical_mu(a.ell)
    info = {"mu_c": mc, "mu1": mu1_coefficient(mc), "residual_slope": _slope(sorted(a.eps), res),
            "expected_slope": 2.0}
    out["stokes.csv"] = "\n".join(rows) + "\n"
    out["stokes.json"] = _dumps(info)
    return out


def cmd_conjugate(a) -> Dict[str, str]:
    from .conjugation import c_parity_defect, coefficient_cascade, conjugation_pack, random_admissible
    from .torus import TorusGrid
    from .waves import stokes_wave, wave_coefficients
    _validate_common(a)
    _check(0 <= a.eps <= 0.2, "--eps must lie in [0, 0.2]")
    _check(a.cascades >= 0, "--cascades must be non-negative")
    w, _ = stokes_wave(a.ell, a.eps, a.n)
    pk = conjugation_pack(w.sigma, wave_coefficients(w, _solver(a)), ndir=a.ndir)
    info = {"mu": w.mu, "inverse_mu": 1.0 / w.mu, "pack": pk.to_json()}
    out = {}
    if a.cascades:
        rng = np.random.default_rng(a.seed)
        g = TorusGrid(a.n, a.n, a.ell)
        rows = ["case,nu,kappa_re,kappa_im,kappa_prime_re,kappa_prime_im,parity_defect,transport_defect"]
        for i in range(a.cascades):
            nu = float(rng.uniform(0.5, 2.0))
            r = coefficient_cascade(random_admissible(g, rng), nu, g)
            rows.append(f"{i},{nu:.17g},{r.kappa.real:.17g},{r.kappa.imag:.17g},{r.kappa_prime.real:.17g},"
                        f"{r.kappa_prime.imag:.17g},{c_parity_defect(r):.6e},{max(r.defects['transport']):.6e}")
        out["cascade.csv"] = "\n".join(rows) + "\n"
        info["cascades"] = a.cascades
    out["conjugate.json"] = _dumps(info)
    return out


def cmd_divisors(a) -> Dict[str, str]:
    from .divisors import (DiophantineQuery, FamilyModel, exclusion_measure, parse_real, scan_condition,
                           verify_lemma_claims)
    try:
        parse_real(a.nu)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"--nu: {exc}") from exc
    if a.action == "scan":
        try:
            q = DiophantineQuery(a.nu, a.kappa0, a.kappa1, a.delta, a.N, a.k1max)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        return {"divisors_scan.json": scan_condition(q).to_json() + "\n"}
    _check(len(a.r) >= 2 and all(0 < r < 1 for r in a.r), "--r needs at least two values in (0, 1)")
    _check(a.samples >= 10, "--samples must be at least 10")
    try:
        m = FamilyModel(a.nu, a.nu_prime, delta=a.delta, delta_prime=a.delta_prime)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rep = exclusion_measure(m, a.r, samples=a.samples)
    claims = {f"{r:g}": verify_lemma_claims(m, r, cap=a.samples, N0=rep.extra["N0"]) for r in a.r}
    info = json.loads(rep.to_json())
    info["claims"] = claims
    info["axes"] = {"x": "r", "y": "excluded_fraction", "scale": "loglog",
                    "expected_slope": m.predicted_exponent}
    return {"divisors_measure.csv": rep.curve_csv(), "divisors_measure.json": _dumps(info)}


def cmd_suite(a) -> Dict[str, str]:
    from .acceptance import CHECKS, run_suite
    only = sorted(set(a.only)) if a.only else None
    _check(only is None or set(only) <= set(CHECKS), f"--only must be drawn from {sorted(CHECKS)}")
    res = run_suite(only, echo=print)
    rows = ["criterion,name,passed"] + [f"{c.number},{c.name},{int(c.passed)}" for c in res]
    payload = {"criteria": [c.to_json() for c in res], "all_passed": all(c.passed for c in res)}
    a._failed = not payload["all_passed"]
    return {"suite.csv": "\n".join(rows) + "\n", "suite.json": _dumps(payload)}


# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON file whose keys mirror the long flags")
    p.add_argument("--out", help=f"output directory (overrides ${OUT_ENV}; default ./artifact_out)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized runs")
    p.add_argument("--schema", action="store_true", help="print the CSV/JSON column schema and exit")
    sub = p.add_subparsers(dest="subcommand")

    def grid_args(sp, n=32):
        sp.add_argument("--ell", type=float, default=1.0)
        sp.add_argument("--n", type=int, default=n, help="grid points per direction (power of two)")
        sp.add_argument("--depth", type=float, default=1.5)
        sp.add_argument("--nz", type=int, default=24)
        sp.add_argument("--ndir", type=int, default=64)

    sp = sub.add_parser("dtn", help="Dirichlet-Neumann trace for a cosine surface")
    grid_args(sp)
    sp.add_argument("--eps", type=float, default=0.05)
    sp.set_defaults(func=cmd_dtn)

    sp = sub.add_parser("paralin", help="paralinearization remainder against amplitude")
    grid_args(sp, 64)
    sp.add_argument("--eps", type=_floats, default=[0.02, 0.04, 0.08])
    sp.add_argument("--order", type=int, default=3)
    sp.set_defaults(func=cmd_paralin)

    sp = sub.add_parser("stokes", help="first-order Stokes waves and their residuals")
    grid_args(sp)
    sp.add_argument("--eps", type=_floats, default=[0.0])
    sp.set_defaults(func=cmd_stokes)

    sp = sub.add_parser("conjugate", help="nu and transport map of a Stokes wave; optional cascades")
    grid_args(sp, 64)
    sp.add_argument("--eps", type=float, default=0.05)
    sp.add_argument("--cascades", type=int, default=0, help="number of random admissible cascades")
    sp.set_defaults(func=cmd_conjugate)

    sp = sub.add_parser("divisors", help="small-divisor scan or exclusion measure")
    sp.add_argument("action", choices=["scan", "measure"])
    sp.add_argument("--nu", default="sqrt(2)", help="float, p/q, or sqrt(n)")
    sp.add_argument("--kappa0", default="0")
    sp.add_argument("--kappa1", default="0")
    sp.add_argument("--delta", type=float, default=0.5)
    sp.add_argument("--N", type=int, default=2)
    sp.add_argument("--k1max", type=int, default=10_000)
    sp.add_argument("--nu-prime", dest="nu_prime", type=float, default=1.0)
    sp.add_argument("--delta-prime", dest="delta_prime", type=float, default=0.25)
    sp.add_argument("--r", type=_floats, default=[1e-2, 1e-3, 1e-4])
    sp.add_argument("--samples", type=int, default=2000, help="largest k1 enumerated exactly")
    sp.set_defaults(func=cmd_divisors)

    sp = sub.add_parser("suite", help="run the acceptance criteria")
    sp.add_argument("--only", type=_ints, default=None, help="comma-separated criterion numbers")
    sp.set_defaults(func=cmd_suite)
    return p


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _parse(parser, argv) -> argparse.Namespace:
    pre, _ = parser.parse_known_args(argv)
    if pre.config:
        cfg = _load_config(pre.config)
        sub = cfg.pop("subcommand", None)
        if pre.subcommand is None and sub is not None:
            argv = list(argv) + [str(sub)]
            if sub == "divisors" and "action" in cfg:
                argv.append(str(cfg.pop("action")))
        elif "action" in cfg:
            cfg.pop("action")
        # config values become defaults; explicit flags still win
        a = parser.parse_args(argv)
        sp = parser._subparsers._group_actions[0].choices.get(a.subcommand) if a.subcommand else None
        known = {act.dest for act in parser._actions} | ({act.dest for act in sp._actions} if sp else set())
        bad = sorted(set(cfg) - known)
        if bad:
            raise UsageError(f"unknown config keys: {', '.join(bad)}")
        conv = {act.dest: act.type for act in (sp._actions if sp else []) + parser._actions}
        for k, v in cfg.items():
            t = conv.get(k)
            if t in (_floats, _ints) and not isinstance(v, str):
                v = ",".join(str(x) for x in (v if isinstance(v, list) else [v]))
            if t is not None and isinstance(v, str):
                try:
                    v = t(v)
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise UsageError(f"config key {k}: {exc}") from exc
            (sp if k in {act.dest for act in (sp._actions if sp else [])} else parser).set_defaults(**{k: v})
        return parser.parse_args(argv)
    return parser.parse_args(argv)


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        a = _parse(parser, argv)
    except UsageError as exc:
        print(f"artifact: error: {exc}", file=sys.stderr)
        return 2
    if a.schema:
        print(_dumps(SCHEMA), end="")
        return 0
    if a.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2
    out = Path(a.out or os.environ.get(OUT_ENV) or "artifact_out")
    cfg = {k: v for k, v in vars(a).items() if k not in _NON_SEMANTIC}
    status, error, files = "ok", None, {}
    try:
        files = a.func(a)
    except UsageError as exc:
        print(f"artifact: error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        status, error = "failed", f"{type(exc).__name__}: {exc}"
        print(f"artifact: {error}", file=sys.stderr)
    out.mkdir(parents=True, exist_ok=True)
    digests = {name: atomic_write(out / name, text) for name, text in sorted(files.items())}
    if getattr(a, "_failed", False):
        status = "criteria_failed"
    manifest = {"subcommand": a.subcommand, "config": cfg, "config_hash": config_hash(cfg),
                "outputs": digests, "status": status, "error": error}
    atomic_write(out / "manifest.json", _dumps(manifest))
    return 0 if status == "ok" else 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
