"""Command-line experiment runner.

Every subcommand reads an optional JSON config (validated against
``CONFIG_SCHEMA``; unknown keys are rejected), writes ``result.json``
(schema ``result-v1``, embedding the config hash and seed) plus CSV dumps
into the output directory, and exits with

    0  success
    2  invalid config or violated precondition
    3  solver non-convergence, or a failed check in ``verify``

Errors are also printed to stderr as one JSON object.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time

import jsonschema
import numpy as np

from . import __version__
from .anderson import assemble, certified_shift, coercivity_probe, eigen_lowest
from .diagnostics import localization_fit, residual, sign_condition_check
from .errors import AGPError, ConvergenceError, DivergenceError
from .functionals import ProblemParams
from .noise import BARE, WICK, enhance, sample_noise, zero_noise
from .solvers import (SolverConfig, action_ground_state, critical_mass, energy_ground_state,
                      gn_constant, noisy_gn_constant, small_mass_sweep)
from .spectral import BasisSpec
from .verify import DESK, QUICK, run_suite, with_seed

COMMANDS = ("sample-noise", "eigen", "energy-gs", "action-gs", "gn", "noisy-gn",
            "critical-mass", "small-mass-sweep", "verify")
RESULT_SCHEMA = "result-v1"

_pos = {"type": "number", "exclusiveMinimum": 0}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "dim": {"enum": [1, 2]},
        "cutoff": {"type": "integer", "minimum": 0, "maximum": 4096},
        "oversample": {"type": "number", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "noise": {"enum": ["white", "zero"]},
        "mode": {"enum": [BARE, WICK]},
        "lambda": {"type": "number"},
        "gamma": _pos,
        "omega": {"type": "number"},
        "omega_shift": _pos,
        "mass": _pos,
        "masses": {"type": "array", "items": _pos, "minItems": 2},
        "count": {"type": "integer", "minimum": 1},
        "restarts": {"type": "integer", "minimum": 0},
        "resolution": _pos,
        "alpha_top": {"type": "number", "minimum": 2},
        "gn_cutoff": {"type": "integer", "minimum": 4},
        "probe_trials": {"type": "integer", "minimum": 1},
        "profile": {"enum": ["desk", "quick"]},
        "criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 12},
                     "uniqueItems": True},
        "output": {"type": "string", "minLength": 1},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_iters": {"type": "integer", "minimum": 1},
                "step": _pos,
                "tol_residual": _pos,
                "tol_energy": _pos,
                "precondition": {"type": "boolean"},
                "restarts": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "newton_switch": _pos,
                "newton_iters": {"type": "integer", "minimum": 0},
                "energy_floor": {"type": "number"},
            },
        },
    },
}


class UsageError(Exception):
    """Invalid configuration (exit code 2)."""


# config handling

def _defaults(command, cfg, quick):
    d = int(cfg.get("dim", 2 if command == "noisy-gn" else 1))
    cfg.setdefault("dim", d)
    cfg.setdefault("cutoff", (64 if d == 1 else 24) if quick else (128 if d == 1 else 48))
    cfg.setdefault("oversample", 3.0)
    cfg.setdefault("seed", 0)
    cfg.setdefault("noise", "white")
    cfg.setdefault("lambda", 1.0)
    cfg.setdefault("gamma", 2.0 / d if command in ("gn", "noisy-gn", "critical-mass") else 1.0)
    if command == "energy-gs":
        cfg.setdefault("mass", 0.5)
    if command == "action-gs" and "omega" not in cfg:
        cfg.setdefault("omega_shift", 1.0)
    if command == "small-mass-sweep":
        cfg.setdefault("masses", np.geomspace(1e-1, 1e-3, 8).tolist())
    if command == "verify":
        cfg.setdefault("profile", "quick" if quick else "desk")
    cfg.setdefault("output", os.path.join("results", command))
    return cfg


def load_config(command, path=None, quick=False, out=None, seed=None):
    """Read, override, validate and complete a config; raises UsageError."""
    cfg = {}
    if path is not None:
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    if cfg.get("command", command) != command:
        raise UsageError(f"config is for {cfg['command']!r}, not {command!r}")
    if out is not None:
        cfg["output"] = out
    if seed is not None:
        cfg["seed"] = seed
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"config error at {where}: {exc.message}") from exc
    cfg["command"] = command
    cfg = _defaults(command, cfg, quick)
    if command in ("noisy-gn",) and cfg["dim"] != 2:
        raise UsageError("noisy-gn needs dim = 2")
    if command in ("gn", "noisy-gn", "critical-mass") and abs(cfg["gamma"] - 2.0 / cfg["dim"]) > 1e-12:
        raise UsageError(f"{command} needs gamma = 2/dim")
    return cfg


def config_hash(cfg):
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _solver_cfg(cfg):
    s = dict(cfg.get("solver", {}))
    if "restarts" in cfg:
        s.setdefault("restarts", cfg["restarts"])
    s.setdefault("seed", cfg["seed"])
    return SolverConfig(**s)


def _params(cfg, omega=None):
    return ProblemParams(float(cfg["lambda"]), float(cfg["gamma"]), omega)


def _noise(cfg):
    basis = BasisSpec(cfg["dim"], cfg["cutoff"], cfg["oversample"])
    r = zero_noise(basis) if cfg["noise"] == "zero" else sample_noise(cfg["seed"], basis)
    mode = cfg.get("mode")
    if mode is None and r.is_zero:
        mode = BARE
    return enhance(r, mode)


# output helpers

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([format(float(v), ".17g") if isinstance(v, (float, np.floating)) else v
                         for v in row])


def _field_csv(path, F, c):
    """Grid columns x, [y,] Re u, Im u of the physical field."""
    u = np.asarray(F.u_values(c), dtype=complex)
    nodes = F.grid.nodes
    header = ["x", "y"][:F.dim] + ["re_u", "im_u"]
    rows = (list(map(float, nodes[i])) + [float(u[i].real), float(u[i].imag)] for i in range(u.size))
    write_csv(path, header, rows)


def _check(name, ok, value, tol, statement):
    return {"name": name, "passed": bool(ok), "value": value, "tolerance": tol,
            "statement": statement}


# subcommands: each returns (result dict, checks list) and writes its own files

def cmd_sample_noise(cfg, out):
    en = _noise(cfg)
    en.save(os.path.join(out, "noise"))
    res = en.header()
    res["grid_points"] = int(en.grid.size)
    err = float(np.max(np.abs(np.log(en.rho_vals) - en.Y_vals)))
    return res, [_check("rho_is_exp_Y", err <= 1e-12, err, 1e-12, "log rho = Y on the grid")]


def cmd_eigen(cfg, out):
    en = _noise(cfg)
    F = assemble(en)
    count = min(int(cfg.get("count", 4)), F.basis.n_modes)
    eig = eigen_lowest(F, count)
    shift = certified_shift(F)
    probe = coercivity_probe(F, trials=int(cfg.get("probe_trials", 200)), seed=cfg["seed"])
    write_csv(os.path.join(out, "eigenvalues.csv"), ["index", "mu", "residual"],
              [(j, float(eig.values[j]), float(eig.residuals[j])) for j in range(count)])
    _field_csv(os.path.join(out, "phi0.csv"), F, eig.phi0.coeffs)
    res = {"values": eig.values, "gap": eig.gap, "clusters": eig.clusters,
           "certified_shift": shift, "sampled_shift": probe, "phi0": eig.phi0.to_dict()}
    checks = [_check("eigen_residuals", bool(np.all(eig.residuals <= 1e-8 * (1 + np.abs(eig.values)))),
                     float(eig.residuals.max()), 1e-8, "Rayleigh residuals of the eigenpairs")]
    if shift is not None:
        checks.append(_check("shift_agreement", abs(probe - shift) <= 0.05 + 1e-12,
                             abs(probe - shift), 0.05, "sampled shift within one step of the certified one"))
    return res, checks


def _gs_outputs(out, F, p, gs, mu0, tol):
    with open(os.path.join(out, "groundstate.json"), "w") as fh:
        fh.write(gs.to_json() + "\n")
    _field_csv(os.path.join(out, "field.csv"), F, gs.field.coeffs)
    r = residual(gs, F, p)
    verdict = sign_condition_check(gs, p, mu0)
    res = {k: v for k, v in gs.to_dict().items() if k != "field"}
    res.update({"mu0": mu0, "residual_report": r.to_dict(), "sign_verdict": verdict.to_dict()})
    checks = [_check("converged", gs.converged, gs.residual, tol,
                     "Galerkin residual of the stationary equation"),
              _check("sign_condition", verdict.passed, gs.omega + mu0, 0.0,
                     "sign(omega + mu_0) follows sign(lam)")]
    try:
        fit = localization_fit(gs, F)
        res["localization"] = fit.to_dict()
        checks.append(_check("localization", fit.slope > 0, fit.slope, 0.0,
                             "Gaussian decay rate of log|v| is positive"))
    except AGPError as exc:
        res["localization"] = {"error": str(exc)}
    return res, checks


def cmd_energy_gs(cfg, out):
    F = assemble(_noise(cfg))
    p = _params(cfg)
    mu0 = eigen_lowest(F, 1).mu0
    sc = _solver_cfg(cfg)
    gs = energy_ground_state(F, p, float(cfg["mass"]), sc)
    return _gs_outputs(out, F, p, gs, mu0, sc.tol_residual)


def cmd_action_gs(cfg, out):
    F = assemble(_noise(cfg))
    mu0 = eigen_lowest(F, 1).mu0
    omega = cfg["omega"] if "omega" in cfg else -mu0 + cfg["omega_shift"]
    p = _params(cfg, float(omega))
    sc = _solver_cfg(cfg)
    gs = action_ground_state(F, p, sc, mu0=mu0)
    res, checks = _gs_outputs(out, F, p, gs, mu0, sc.tol_residual)
    rel = abs(gs.extras["nehari_I"]) / gs.extras["P_omega"]
    checks.append(_check("nehari", rel <= 1e-8, rel, 1e-8, "I(psi) = 0 relative to P_omega"))
    return res, checks


def cmd_gn(cfg, out):
    d = cfg["dim"]
    g = gn_constant(d, cfg["gamma"], _solver_cfg(cfg), cutoff=cfg.get("gn_cutoff"),
                    lam=float(cfg["lambda"]), oversample=cfg["oversample"])
    F0 = assemble(enhance(zero_noise(g.soliton.basis), BARE))
    _field_csv(os.path.join(out, "soliton.csv"), F0, g.soliton.coeffs)
    res = {"J": g.J, "critical_mass": g.critical_mass, "half_norm_sq": g.half_norm_sq,
           "pohozaev_rel": g.pohozaev_rel, "soliton_residual": g.soliton_residual,
           "soliton": g.soliton.to_dict()}
    checks = [_check("pohozaev", g.pohozaev_rel <= 1e-4, g.pohozaev_rel, 1e-4,
                     "Pohozaev identity of the soliton")]
    if d == 2:
        dm = abs(g.critical_mass / g.half_norm_sq - 1)
        checks.append(_check("critical_mass_routes", dm <= 1e-2, dm, 1e-2,
                             "J / lam agrees with 1/2 ||Q||^2"))
    return res, checks


def cmd_noisy_gn(cfg, out):
    en = _noise(cfg)
    F = assemble(en)
    JX, u = noisy_gn_constant(F, _solver_cfg(cfg))
    g = gn_constant(2, 1.0, _solver_cfg(cfg), cutoff=cfg.get("gn_cutoff"))
    floor = math.exp(4 * (en.infY - en.supY)) * g.J
    _field_csv(os.path.join(out, "minimizer.csv"), F, u.coeffs)
    res = {"J_Xi": JX, "J": g.J, "exp_bound": floor, "infY": en.infY, "supY": en.supY}
    checks = [_check("noisy_gn_lower", floor <= JX * (1 + 1e-2), JX / floor, 1 / (1 + 1e-2),
                     "exp(4 (inf Y - sup Y)) J <= J_Xi (1 + 1e-2)")]
    return res, checks


def cmd_critical_mass(cfg, out):
    en = _noise(cfg)
    F = assemble(en)
    p = _params(cfg)
    gn = gn_constant(cfg["dim"], cfg["gamma"], _solver_cfg(cfg), cutoff=cfg.get("gn_cutoff"),
                     lam=p.lam)
    kw = {k: cfg[k] for k in ("resolution", "alpha_top") if k in cfg}
    r = critical_mass(F, p, _solver_cfg(cfg), gn=gn, **kw)
    write_csv(os.path.join(out, "probe.csv"), ["alpha", "energy_at_upper"],
              zip(map(float, r.alphas), map(float, r.details["energies_at_upper"])))
    res = {"lower": r.lower, "upper": r.upper, "mstar": r.mstar, "alpha_max": r.alpha_max,
           "threshold_hit": r.threshold_hit,
           "details": {k: v for k, v in r.details.items() if k != "energies_at_upper"}}
    if cfg["dim"] == 2:
        floor = math.exp(4 * (en.infY - en.supY)) * r.mstar
        res["exp_floor"] = floor
        checks = [_check("upper_bound", r.upper >= 0.95 * floor, r.upper / floor, 0.95,
                         "upper >= 0.95 exp(4 (inf Y - sup Y)) m*"),
                  _check("lower_bound", r.lower <= 1.05 * r.mstar, r.lower / r.mstar, 1.05,
                         "lower <= 1.05 m*")]
    else:
        width = (r.upper - r.lower) / r.mstar
        checks = [_check("bracket_width", width <= 0.05, width, 0.05, "1D bracket at most 5% wide")]
    return res, checks


def cmd_small_mass_sweep(cfg, out):
    F = assemble(_noise(cfg))
    p = _params(cfg)
    r = small_mass_sweep(F, p, cfg["masses"], _solver_cfg(cfg))
    write_csv(os.path.join(out, "sweep.csv"), ["m", "omega", "l2_err_to_phi0"],
              zip(map(float, r.masses), map(float, r.omegas), map(float, r.errors)))
    res = {"exponent": r.exponent, "prefactor": r.prefactor,
           "predicted_prefactor": r.predicted_prefactor, "mu0": r.mu0}
    signs = np.sign(r.omegas + r.mu0) == np.sign(p.lam)
    checks = [_check("frequency_signs", bool(signs.all()), float(signs.mean()), 1.0,
                     "sign(omega_m + mu_0) = sign(lam) along the sweep"),
              _check("exponent", abs(r.exponent - p.gamma) <= 0.1, r.exponent, p.gamma,
                     "|omega_m + mu_0| ~ m^gamma")]
    return res, checks


def cmd_verify(cfg, out):
    prof = with_seed(QUICK if cfg["profile"] == "quick" else DESK, cfg["seed"])
    t0 = time.perf_counter()
    rep = run_suite(prof, only=cfg.get("criteria"))
    total = time.perf_counter() - t0
    lines = [f"verify profile={prof.name} seed={prof.seed} checks={len(rep.checks)}"]
    for c in rep.checks:
        lines.append(c.line())
        lines.append(f"    {c.statement}")
    lines.append(f"total {total:.1f}s: {'PASS' if rep.passed else 'FAIL'}")
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    report = rep.to_dict()
    report["total_seconds"] = total
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    checks = []
    for c in rep.checks:
        d = c.to_dict()
        d.pop("seconds")
        d["name"] = f"c{c.criterion}.{c.name}"
        checks.append(d)
    return {"profile": prof.name, "checks_total": len(rep.checks),
            "checks_failed": sum(not c.passed for c in rep.checks)}, checks


HANDLERS = {
    "sample-noise": cmd_sample_noise, "eigen": cmd_eigen, "energy-gs": cmd_energy_gs,
    "action-gs": cmd_action_gs, "gn": cmd_gn, "noisy-gn": cmd_noisy_gn,
    "critical-mass": cmd_critical_mass, "small-mass-sweep": cmd_small_mass_sweep,
    "verify": cmd_verify,
}


def run(command, config_path=None, quick=False, out=None, seed=None):
    """Run one subcommand; returns the exit code."""
    try:
        cfg = load_config(command, config_path, quick, out, seed)
    except UsageError as exc:
        return _fail(2, "UsageError", str(exc))
    outdir = cfg["output"]
    try:
        os.makedirs(outdir, exist_ok=True)
        res, checks = HANDLERS[command](cfg, outdir)
    except (ConvergenceError, DivergenceError) as exc:
        return _fail(3, type(exc).__name__, str(exc))
    except (AGPError, ValueError) as exc:
        return _fail(2, type(exc).__name__, str(exc))
    except OSError as exc:
        return _fail(2, type(exc).__name__, str(exc))
    # the output location is not part of the experiment
    exp = {k: v for k, v in cfg.items() if k != "output"}
    doc = {"schema": RESULT_SCHEMA, "version": __version__, "command": command,
           "config": exp, "config_hash": config_hash(exp), "seed": cfg["seed"],
           "result": res, "checks": checks,
           "passed": all(c["passed"] for c in checks)}
    with open(os.path.join(outdir, "result.json"), "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for c in checks:
        tag = "PASS" if c["passed"] else "FAIL"
        print(f"[{tag}] {c['name']}: {c['value']}")
    if command == "verify" and not doc["passed"]:
        return _fail(3, "CheckFailed", f"{res['checks_failed']} of {res['checks_total']} checks failed")
    return 0


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def build_parser():
    ap = argparse.ArgumentParser(prog="agpwaves", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?", help="JSON config file")
        sp.add_argument("--quick", action="store_true", help="small cutoffs (64 in 1D, 24 in 2D)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="noise and solver seed")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return run(args.command, args.config, args.quick, args.out, args.seed)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
