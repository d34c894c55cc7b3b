"""Command-line front end.

Exit codes: 0 success, 1 numerical-acceptance failure, 2 configuration
or usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .cluster import check_inversion_condition, check_neumann_condition
from .config import ConfigError, SceneConfig
from .dde import DdeDivergence, integrate_dde
from .field import Observation, epsilon_scaling_study, field_difference, scattered_field
from .kernel import compute_V, neumann_solve
from .laplace import FrequencyGrid, eval_T, inverse, oracle_sigma, solve_freq
from .parallel import set_threads
from .paths import (PathBudgetExceeded, background_bound, enumerate_all, m_max,
                    make_path, maximize_path, path_amplitude,
                    resonance_band_condition, write_path_report)
from .signal import forcing_vector, hrs_norm
from .water import run_example_water

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2


class NumericalFailure(RuntimeError):
    """A run completed (or was refused) for numerical reasons."""


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    den = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / den) if den > 0 else float(np.linalg.norm(a))


# --------------------------------------------------------------------------
# commands

def cmd_check(cfg: SceneConfig) -> dict:
    """Condition reports for the configured scene."""
    cl = cfg.cluster()
    cd = cfg.coupling(cl)
    sim = cfg.sim()
    neu = check_neumann_condition(cd, sim["sigma0"])
    inv = check_inversion_condition(cl, cfg.material(), cd)
    return {"neumann": neu.to_dict(),
            "inversion": None if inv is None else inv.to_dict()}


def cmd_simulate(cfg: SceneConfig, outdir: str, force: bool = False,
                 oracle: bool = False) -> dict:
    """Neumann-series solve plus fields; writes CSV artifacts and a manifest.

    Raises :class:`NumericalFailure` when the convergence condition fails
    without ``force``; with ``force`` the run completes and returns a
    manifest whose ``flags`` list is non-empty.
    """
    mat = cfg.material()
    cl = cfg.cluster()
    cd = cfg.coupling(cl)
    sim = cfg.sim()
    grid = cfg.grid()
    x0 = cfg.x0()
    pulse = cfg.pulse(cd.omega_res)
    obs_pts = cfg.observations()
    observations = [Observation.at(x, cl, cfg.min_obs_distance()) for x in obs_pts]

    neu = check_neumann_condition(cd, sim["sigma0"])
    inv = check_inversion_condition(cl, mat, cd)
    if not neu.satisfied and not force:
        raise NumericalFailure(
            f"convergence condition violated (lhs={neu.lhs:.6g} >= rhs={neu.rhs:.6g}"
            f"{'; ' + neu.reason if neu.reason else ''}); use --force to run anyway")

    try:
        F = forcing_vector(cl, x0, pulse, mat, grid)
    except ValueError as exc:
        raise ConfigError("source", str(exc))
    V = compute_V(F, cd.omega_M)
    sol = neumann_solve(cd, V, sim["N"], sim["r"], sim["sigma"], sim["tol"], sim["n_max"])

    flags: List[str] = []
    if not neu.satisfied:
        flags.append("neumann_condition_violated")
    if sol.non_decaying:
        flags.append("non_decaying_terms")
    if sol.stop_reason in ("diverging", "n_max reached"):
        flags.append(f"series_{sol.stop_reason.replace(' ', '_')}")

    checks = {}
    if force or oracle:
        if cd.M > 1 and not cd.tau_min > grid.dt:
            checks["dde"] = {"skipped": "dt not below the smallest delay"}
        else:
            try:
                Ydd = integrate_dde(cd, F, derivative=2)
                checks["dde"] = {"rel_diff_vs_neumann": _rel(sol.partial().values, Ydd.values)}
            except DdeDivergence as exc:
                checks["dde"] = {"divergence": str(exc), "t": exc.t, "peak": exc.peak}
                flags.append("dde_divergence")
    if oracle and not flags:
        fg = FrequencyGrid.for_time_grid(grid, oracle_sigma(grid, sim["sigma"]))
        Yf = inverse(solve_freq(eval_T(cd, fg, F)), fg, grid)
        checks["frequency"] = {"rel_diff_vs_neumann": _rel(sol.partial().values, Yf.values)}
        for name, c in checks.items():
            if c.get("rel_diff_vs_neumann", 0.0) > 1e-3:
                flags.append(f"{name}_oracle_mismatch")

    os.makedirs(outdir, exist_ok=True)
    sol.dump(outdir)
    Y = sol.partial()
    for i, sig in enumerate(Y):
        sig.to_csv(os.path.join(outdir, f"partial_bubble_{i + 1}.csv"))
    fields = []
    for k, obs in enumerate(observations):
        u = scattered_field(sol, cd, obs)
        u.to_csv(os.path.join(outdir, f"field_obs_{k + 1}.csv"))
        entry = {"x": obs.x, "d_min": obs.d_min, "d_max": obs.d_max,
                 "norm": hrs_norm(u, sim["r"], sim["sigma"])}
        if sol.N >= 1:
            entry["diff_norm_last"] = field_difference(sol, cd, obs, sol.N)[1]
        fields.append(entry)

    manifest = {
        "tool": "foldylax", "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config_file": cfg.source_path,
        "config": cfg.raw,
        "derived": {**cd.to_dict(), "tau_min": cd.tau_min,
                    "grid": {"dt": grid.dt, "n": grid.n, "t_end": grid.t_end}},
        "conditions": {"neumann": neu.to_dict(),
                       "inversion": None if inv is None else inv.to_dict()},
        "solution": {"N": sol.N, "stop_reason": sol.stop_reason,
                     "term_norms": sol.term_norms, "ratios": sol.ratios,
                     "forcing_norm": hrs_norm(F, sim["r"], sim["sigma"])},
        "fields": fields,
        "oracles": checks,
        "forced": bool(force),
        "flags": flags,
    }
    _write_json(os.path.join(outdir, "manifest.json"), manifest)
    return manifest


def cmd_paths(cfg: SceneConfig, outdir: str, N: Optional[int] = None,
              i: Optional[int] = None, j: Optional[int] = None,
              path: Optional[Sequence[int]] = None) -> dict:
    """Path report CSV and a summary with the maximizer, B and M_max."""
    cd = cfg.coupling()
    pb = cfg.block("paths")
    sim = cfg.sim()
    N = int(pb.get("N", 5)) if N is None else N
    i = pb.get("i") if i is None else i
    j = pb.get("j") if j is None else j
    path = pb.get("path") if path is None else path
    if N < 1:
        raise ConfigError("paths.N", "must be at least 1")
    for name, v in (("i", i), ("j", j)):
        if v is not None and not 1 <= int(v) <= cd.M:
            raise ConfigError(f"paths.{name}", f"must lie in 1..{cd.M}")

    def num(key, default=None):
        v = pb.get(key, default)
        if v is None:
            raise ConfigError(f"paths.{key}", "missing required field")
        try:
            return float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"paths.{key}", f"expected a number, got {v!r}")

    m, h, theta = num("m"), num("h"), num("theta", 0.9)
    r = int(pb.get("r", sim["r"]))
    drop = bool(pb.get("drop_path_delay", False))
    obs = cfg.observations()
    if obs:
        d = np.linalg.norm(cfg.cluster().centers - obs[0][None, :], axis=1)
        d_min_default, d_max_default = float(d.min()), float(d.max())
    else:
        d_min_default = d_max_default = None
    d_max = num("d_max", d_max_default)
    d_min = num("d_min", d_min_default)
    if "forcing_norm" in pb:
        fnorm = num("forcing_norm")
    else:
        F = forcing_vector(cfg.cluster(), cfg.x0(), cfg.pulse(cd.omega_res), cfg.material(), cfg.grid())
        fnorm = hrs_norm(F, r, sim["sigma"])
    if "alpha_power" in pb:
        alpha = num("alpha_power") ** (1.0 / (N + 1))
    elif "alpha_inf" in pb:
        alpha = num("alpha_inf")
    else:
        alpha = None
    params = dict(sigma=sim["sigma"], m=m, h=h, r=r, d_max=d_max, drop_path_delay=drop)

    try:
        paths = enumerate_all(cd, N, None if i is None else int(i),
                              None if j is None else int(j))
    except PathBudgetExceeded as exc:
        raise NumericalFailure(str(exc))
    amps = [path_amplitude(p, cd, **params) for p in paths]
    os.makedirs(outdir, exist_ok=True)
    write_path_report(paths, amps, os.path.join(outdir, "paths.csv"))

    summary = {"N": N, "i": i, "j": j, "n_paths": len(paths), "params": params,
               "d_min": d_min, "forcing_norm": fnorm}
    if not paths:
        summary["note"] = "no paths with nonzero weight"
        _write_json(os.path.join(outdir, "paths_summary.json"), summary)
        return summary
    star, L_star = maximize_path(paths, cd, **params)
    B_unit = background_bound(cd, sim["sigma"], sim["sigma0"], N, d_min, 1.0, alpha)
    summary.update({
        "gamma_star": star.label, "L_star": L_star,
        "B_unit": B_unit, "B": B_unit * fnorm,
        "alpha_inf": alpha if alpha is not None else "derived",
        "M_max_exhaustive": m_max(L_star, B_unit, fnorm, theta),
        "band_condition": resonance_band_condition(
            cd, star, sim["sigma"], sim["sigma0"], m, h, theta, fnorm, d_min, d_max, r),
    })
    if path is not None:
        sel = make_path(path, cd)
        if sel.N != N:
            raise ConfigError("paths.path", f"has length {sel.N}, expected {N}")
        L_sel = path_amplitude(sel, cd, **params)
        summary.update({"selected_path": sel.label, "L_selected": L_sel,
                        "Q0_selected": sel.Q0, "tau_selected": sel.tau_total,
                        "M_max": m_max(L_sel, B_unit, fnorm, theta)})
    else:
        summary["M_max"] = summary["M_max_exhaustive"]
    _write_json(os.path.join(outdir, "paths_summary.json"), summary)
    return summary


def cmd_scaling(cfg: SceneConfig, outdir: str, eps_list: Optional[Sequence[float]] = None):
    """Epsilon sweep; writes ``scaling.csv`` and ``scaling.json``."""
    sb = cfg.block("scaling")
    if eps_list is None:
        eps_list = sb.get("eps")
    if not eps_list:
        raise ConfigError("scaling.eps", "empty epsilon list")
    try:
        eps_list = [float(e) for e in eps_list]
    except (TypeError, ValueError):
        raise ConfigError("scaling.eps", "expected a list of numbers")
    for key in ("N", "p", "template", "omega_M"):
        if key not in sb:
            raise ConfigError(f"scaling.{key}", "missing required field")
    obs = cfg.observations()
    if not obs:
        raise ConfigError("observation.points", "scaling needs an observation point")
    sim = cfg.sim()
    omega_M = float(sb["omega_M"])
    pulse = cfg.pulse(1.0 / omega_M)
    try:
        study = epsilon_scaling_study(
            np.asarray(sb["template"], float), eps_list, float(sb["p"]), int(sb["N"]),
            obs[0], cfg.x0(), pulse, cfg.material(), cfg.grid(), sim["sigma"], omega_M,
            sim["r"], sb.get("n_ref"))
    except ValueError as exc:
        raise ConfigError("scaling", str(exc))
    os.makedirs(outdir, exist_ok=True)
    study.to_csv(os.path.join(outdir, "scaling.csv"))
    study.to_json(os.path.join(outdir, "scaling.json"))
    return study


# --------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="foldylax",
        description="Time-domain multiple scattering by clusters of resonant bubbles.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker cap (default: FOLDYLAX_THREADS or 1)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Neumann-series solve with fields and manifest")
    p.add_argument("config")
    p.add_argument("-o", "--out", default="run")
    p.add_argument("--force", action="store_true",
                   help="run even if the convergence condition fails")
    p.add_argument("--oracle", action="store_true",
                   help="cross-check against the DDE and frequency-domain solvers")

    p = sub.add_parser("paths", help="path enumeration, L*, B and M_max")
    p.add_argument("config")
    p.add_argument("-o", "--out", default="paths")
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--i", type=int, default=None)
    p.add_argument("--j", type=int, default=None)
    p.add_argument("--path", default=None,
                   help="dash-separated indices of a path to evaluate, e.g. 1-2-3")

    p = sub.add_parser("scaling", help="epsilon-scaling study")
    p.add_argument("config")
    p.add_argument("-o", "--out", default="scaling")
    p.add_argument("--eps", type=float, nargs="+", default=None)

    p = sub.add_parser("example-water", help="reproduce the air-bubbles-in-water example")
    p.add_argument("--json", default=None, help="also write the checks to this file")

    p = sub.add_parser("check", help="evaluate the convergence conditions only")
    p.add_argument("config")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        set_threads(args.threads)
    except ValueError as exc:
        ap.error(str(exc))
    try:
        if args.command == "example-water":
            checks, info = run_example_water()
            for c in checks:
                print(c.line())
            for k, v in info.items():
                print(f"info  {k} = {v}")
            if args.json:
                _write_json(args.json, {
                    "checks": [{"name": c.name, "computed": c.computed,
                                "expected": c.expected, "rel_tol": c.rel_tol,
                                "rel_err": c.rel_err, "passed": c.passed,
                                "strict": c.passed_strict} for c in checks],
                    "info": info})
            ok = all(c.passed for c in checks)
            print("example-water:", "all checks pass" if ok else "FAILED")
            return EXIT_OK if ok else EXIT_NUMERIC

        cfg = SceneConfig.load(args.config)
        if args.command == "check":
            rep = cmd_check(cfg)
            print(json.dumps(rep, indent=2, sort_keys=True, default=_jsonable))
            return EXIT_OK if rep["neumann"]["satisfied"] else EXIT_NUMERIC
        if args.command == "simulate":
            man = cmd_simulate(cfg, args.out, args.force, args.oracle)
            print(f"wrote {args.out}: N={man['solution']['N']} "
                  f"({man['solution']['stop_reason']})")
            if man["flags"]:
                print("flags: " + ", ".join(man["flags"]), file=sys.stderr)
                return EXIT_NUMERIC
            return EXIT_OK
        if args.command == "paths":
            path = None
            if args.path:
                try:
                    path = [int(k) for k in args.path.split("-")]
                except ValueError:
                    ap.error("--path expects dash-separated integers")
            s = cmd_paths(cfg, args.out, args.N, args.i, args.j, path)
            print(json.dumps({k: s[k] for k in ("n_paths", "gamma_star", "L_star", "B",
                                                "M_max") if k in s},
                             default=_jsonable))
            return EXIT_OK
        if args.command == "scaling":
            st = cmd_scaling(cfg, args.out, args.eps)
            summ = st.summary()
            print(json.dumps(summ, sort_keys=True))
            return EXIT_OK if summ["pass_diff"] and summ["pass_remainder"] else EXIT_NUMERIC
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
