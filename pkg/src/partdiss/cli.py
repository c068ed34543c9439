"""Batch experiment driver with declarative configs and reproducible outputs.

Subcommands: analyze, certify, simulate-linear, simulate, decay, relax, list.
Configs are INI-style text files (sections with key = value entries) or JSON
with the same section/key structure; unknown sections or keys are rejected.
Each run writes report.json (named checks with verdicts and values) plus CSV
series, atomically, into the output directory.  Exit codes: 0 all enabled
verdicts pass, 1 verdict failure, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
import tempfile

import numpy as np

from . import decay as decay_mod
from . import lyapunov, relaxation, solver
from .grid import Grid, SpectralField, random_real_field
from .paley import FilterBank
from .propagator import PropagatorPlan, verify_mode_decay
from .symbols import (DirectionSample, check_lemma_equivalences,
                      convective_symbol, elliptic_block_check, sk_condition,
                      spectral_abscissa)
from .system import (SystemSpec, build_isentropic_euler,
                     build_linearized_euler, build_sk_counterexample,
                     validate)


class ConfigError(Exception):
    pass


_SCHEMA = {
    "system": {"builtin", "friction", "gamma", "a", "rhobar", "epsilon",
               "matrices"},
    "grid": {"dimension", "modes", "period"},
    "solver": {"dt", "horizon", "record_stride", "dealias", "cfl_safety",
               "smallness"},
    "data": {"kind", "amplitude", "seed", "spectrum_width", "components",
             "damped_kick"},
    "norms": {"extra"},
    "task": {"name", "sigma1", "variant", "window_lo", "window_hi",
             "epsilons", "tau_horizon", "xi_max", "xi_samples", "times",
             "bound_factor"},
    "output": {"directory", "formats"},
}

_BUILTINS = {
    "linearized-euler": {
        "build": lambda p: build_linearized_euler(
            int(p.get("dimension", 1)), float(p.get("friction", 1.0))),
        "params": {"dimension": "1|2|3", "friction": "> 0"},
    },
    "isentropic-euler": {
        "build": lambda p: build_isentropic_euler(
            int(p.get("dimension", 1)), float(p.get("gamma", 1.4)),
            float(p.get("a", 1.0)), float(p.get("rhobar", 1.0)),
            float(p.get("epsilon", 1.0))),
        "params": {"dimension": "1|2|3", "gamma": "> 1", "a": "> 0",
                   "rhobar": "> 0", "epsilon": "> 0"},
    },
    "sk-counterexample": {
        "build": lambda p: build_sk_counterexample(),
        "params": {},
    },
}

_PRESETS = {
    "decay-d2": {
        "task": "decay", "description":
            "linear decay oracle, d=2, sigma1=1 (exponent 1/2), "
            "window [10, 1e3]",
        "config": {"task": {"name": "decay", "sigma1": "1.0",
                            "variant": "baseline",
                            "window_lo": "10", "window_hi": "1000"},
                   "system": {"builtin": "linearized-euler",
                              "friction": "1.0"},
                   "grid": {"dimension": "2"}},
    },
    "relax-sweep-euler": {
        "task": "relax", "description":
            "relaxation sweep for 1-d isentropic gas dynamics, "
            "eps in {0.1, 0.05, 0.025}",
        "config": {"task": {"name": "relax",
                            "epsilons": "0.1,0.05,0.025",
                            "tau_horizon": "1.0"},
                   "system": {"builtin": "isentropic-euler", "gamma": "2.0",
                              "a": "0.125", "rhobar": "1.0"},
                   "grid": {"dimension": "1", "modes": "128"}},
    },
    "global-euler-d1": {
        "task": "simulate", "description":
            "small-data global run for 1-d isentropic gas dynamics with "
            "monitored augmented energy",
        "config": {"task": {"name": "simulate"},
                   "system": {"builtin": "isentropic-euler", "gamma": "1.4",
                              "a": "0.02857142857142857", "rhobar": "1.0"},
                   "grid": {"dimension": "1", "modes": "256"},
                   "solver": {"dt": "0.002", "horizon": "50"},
                   "data": {"amplitude": "0.01", "seed": "7"}},
    },
}


def parse_config(path: str) -> dict:
    """Read an INI or JSON config into {section: {key: str}} with validation."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    text = open(path, "r", encoding="utf-8").read()
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON config: {e}") from None
        data = {str(k): {str(a): str(b) for a, b in v.items()}
                for k, v in raw.items()}
    else:
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"invalid config: {e}") from None
        data = {s: dict(cp.items(s)) for s in cp.sections()}
    for section, keys in data.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in keys:
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key '{key}' in section [{section}]")
    if "task" not in data or "name" not in data["task"]:
        raise ConfigError("config must contain [task] with a 'name' entry")
    return data


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def build_system(config: dict) -> SystemSpec:
    sysc = dict(config.get("system", {}))
    gridc = config.get("grid", {})
    if "dimension" in gridc:
        sysc.setdefault("dimension", gridc["dimension"])
    if "matrices" in sysc:
        try:
            return SystemSpec.from_dict(json.loads(sysc["matrices"]))
        except (json.JSONDecodeError, KeyError, ValueError) as e:
            raise ConfigError(f"bad explicit matrices: {e}") from None
    name = sysc.get("builtin", "linearized-euler")
    if name not in _BUILTINS:
        raise ConfigError(f"unknown builtin system '{name}'")
    try:
        return _BUILTINS[name]["build"](sysc)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad system parameters: {e}") from None


def build_grid(config: dict, default_modes: int = 64) -> Grid:
    g = config.get("grid", {})
    d = int(g.get("dimension", 1))
    modes = int(g.get("modes", default_modes))
    period = float(g.get("period", 1.0))
    try:
        return Grid((modes,) * d, period)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def build_data(config: dict, grid: Grid, n: int, seed: int) -> SpectralField:
    dc = config.get("data", {})
    amp = float(dc.get("amplitude", 0.01))
    width = float(dc.get("spectrum_width", 1.0))
    rng = np.random.default_rng(int(dc.get("seed", seed)))
    f = random_real_field(grid, n, rng,
                          spectrum=lambda r: np.exp(-(r / width) ** 2))
    scale = f.linf()
    return f * (amp / scale if scale > 0 else 0.0)


def _atomic_write(path: str, data: str):
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(outdir: str, report: dict):
    _atomic_write(os.path.join(outdir, "report.json"),
                  json.dumps(report, indent=2, sort_keys=True) + "\n")


def write_csv(path: str, header: list[str], rows):
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    _atomic_write(path, buf.getvalue())


def _check(name: str, passed: bool, value, detail: str = "") -> dict:
    return {"check": name, "passed": bool(passed),
            "value": value if isinstance(value, (int, str)) else float(value),
            "detail": detail}


# -- tasks ----------------------------------------------------------------------

def task_analyze(config, outdir, seed):
    spec = build_system(config)
    t = config.get("task", {})
    sample = DirectionSample.build(spec.dims.d)
    verdict = sk_condition(spec, sample)
    vrep = validate(spec)
    xi_max = float(t.get("xi_max", 4.0))
    nxi = int(t.get("xi_samples", 128))
    xi_grid = np.linspace(-xi_max, xi_max, nxi)
    rows = []
    absc_ok = True
    for x in xi_grid:
        xi = np.zeros(spec.dims.d)
        xi[0] = x
        a, eigs = spectral_abscissa(spec, xi)
        if abs(x) > 1e-12 and a <= 0 and verdict.holds:
            absc_ok = False
        rows.append([x, a] + [e.real for e in eigs] + [e.imag for e in eigs])
    n = spec.dims.n
    write_csv(os.path.join(outdir, "series.csv"),
              ["xi", "abscissa"] + [f"re_lambda{i}" for i in range(n)]
              + [f"im_lambda{i}" for i in range(n)], rows)
    om0 = sample.omegas[0]
    eqrep = check_lemma_equivalences(
        convective_symbol(spec, om0), spec.b_effective().astype(complex))
    checks = [
        _check("system_valid", vrep.ok, float(vrep.ok)),
        _check("rank_condition", verdict.holds, float(verdict.holds),
               verdict.sampling_caveat),
        _check("dissipativity_equivalences_agree", eqrep.agree,
               float(eqrep.agree)),
        _check("abscissa_sign_matches_rank_verdict", absc_ok, float(absc_ok)),
    ]
    report = {
        "task": "analyze",
        "ranks": verdict.ranks.tolist(),
        "witness_direction": None if verdict.witness_omega is None
        else verdict.witness_omega.tolist(),
        "sampling_caveat": verdict.sampling_caveat,
        "checks": checks,
    }
    try:
        lam, _ = elliptic_block_check(spec, sample)
        report["elliptic_block_min_eig"] = lam
        report["checks"].append(_check(
            "elliptic_block_matches_rank_verdict",
            (lam > 0) == verdict.holds, lam))
    except ValueError:
        pass
    return report


def task_certify(config, outdir, seed):
    spec = build_system(config)
    try:
        cert = lyapunov.construct(spec)
    except lyapunov.CertificateError as e:
        return {"task": "certify", "error": str(e),
                "checks": [_check("certificate_constructed", False, 0.0,
                                  str(e))]}
    rng = np.random.default_rng(seed)
    n = spec.dims.n
    lo_ratio, hi_ratio = np.inf, 0.0
    for _ in range(2000):
        r = float(np.exp(rng.uniform(np.log(1e-3), np.log(1e3))))
        om = cert.omegas[rng.integers(len(cert.omegas))]
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        val = cert.functional_value(r, om, z) / float(np.vdot(z, z).real)
        lo_ratio, hi_ratio = min(lo_ratio, val), max(hi_ratio, val)
    _atomic_write(os.path.join(outdir, "certificate.json"),
                  json.dumps(cert.to_dict(), indent=2, sort_keys=True) + "\n")
    checks = [
        _check("certificate_constructed", True, 1.0),
        _check("derivative_form_nonpositive", cert.max_residual <= 1e-10,
               cert.max_residual),
        _check("norm_equivalence_sampled",
               lo_ratio >= 0.5 and hi_ratio <= 2.0,
               float(min(lo_ratio - 0.5, 2.0 - hi_ratio))),
        _check("dissipation_floor_positive", cert.n_min > 0, cert.n_min),
    ]
    return {"task": "certify", "eta": cert.eta, "n_min": cert.n_min,
            "c_decay": cert.c_decay, "kappa": cert.kappa,
            "max_residual": cert.max_residual, "checks": checks}


def task_simulate_linear(config, outdir, seed):
    spec = build_system(config)
    grid = build_grid(config)
    sc = config.get("solver", {})
    horizon = float(sc.get("horizon", 20.0))
    times = np.linspace(0.0, horizon, int(config.get("task", {}).get(
        "times", 41)))
    Z0 = build_data(config, grid, spec.dims.n, seed)
    cert = lyapunov.construct(spec)
    plan = PropagatorPlan(spec, grid)
    bank = FilterBank(grid)
    d = grid.d
    rows = []
    from .paley import hf_norm, lf_norm

    for t in times:
        f = SpectralField(grid, plan.apply(Z0.coeffs, float(t)))
        rows.append([t, f.l2(), lf_norm(bank, f, d / 2 - 1),
                     hf_norm(bank, f, d / 2 + 1)])
    write_csv(os.path.join(outdir, "series.csv"),
              ["t", "l2", "lf_norm", "hf_norm"], rows)
    env = verify_mode_decay(spec, cert, Z0, times)
    # semigroup property
    mid = SpectralField(grid, plan.apply(Z0.coeffs, horizon / 2))
    twostep = plan.apply(mid.coeffs, horizon / 2)
    once = plan.apply(Z0.coeffs, horizon)
    sg = float(np.abs(twostep - once).max()
               / max(np.abs(once).max(), 1e-300))
    checks = [
        _check("mode_envelope_dominates", env.max_ratio <= 1.0,
               env.max_ratio, f"worst at t={env.worst_time}, "
                              f"rho={env.worst_rho}"),
        _check("semigroup_property", sg <= 1e-12, sg),
    ]
    return {"task": "simulate-linear", "max_envelope_ratio": env.max_ratio,
            "checks": checks}


def task_simulate(config, outdir, seed):
    spec = build_system(config)
    grid = build_grid(config, default_modes=256)
    sc = config.get("solver", {})
    cfg = solver.SolverConfig(
        dt=float(sc.get("dt", 2e-3)),
        horizon=float(sc.get("horizon", 10.0)),
        record_stride=int(sc.get("record_stride", 10)),
        dealias=sc.get("dealias", "true").lower() != "false",
        cfl_safety=float(sc.get("cfl_safety", 0.5)),
        smallness=None if "smallness" not in sc else float(sc["smallness"]),
    )
    Z0 = build_data(config, grid, spec.dims.n, seed)
    report = solver.solve(spec, Z0, cfg)
    bound = float(config.get("task", {}).get("bound_factor", 10.0))
    y = solver.functional_Y(report)
    mon = solver.lyapunov_monitor(report)
    header = ["t"] + list(report.series.keys())
    rows = [[report.times[i]] + [report.series[k][i] for k in report.series]
            for i in range(len(report.times))]
    write_csv(os.path.join(outdir, "series.csv"), header, rows)
    state_hash = hashlib.sha256(
        np.ascontiguousarray(report.snapshots[-1]).tobytes()).hexdigest() \
        if report.snapshots is not None else ""
    checks = [
        _check("run_completed", report.completed, float(report.completed),
               report.diagnostics.get("abort_reason", "")),
        _check("smallness_never_tripped", not report.smallness_tripped,
               float(not report.smallness_tripped)),
        _check("augmented_energy_two_time_inequality", mon.holds,
               mon.max_residual),
        _check("controlled_functional_bounded", y[-1] <= bound * y[0],
               float(y[-1] / y[0]) if y[0] > 0 else 0.0,
               f"bound factor {bound}"),
        _check("energy_identity_residual_rate",
               report.energy_residual_rate <= 1e-7,
               report.energy_residual_rate),
    ]
    return {"task": "simulate", "final_state_sha256": state_hash,
            "functional_ratio": float(y[-1] / y[0]) if y[0] > 0 else 0.0,
            "energy_residual_rate": report.energy_residual_rate,
            "monitor_constant": mon.c_used, "checks": checks}


def task_decay(config, outdir, seed):
    t = config.get("task", {})
    d = int(config.get("grid", {}).get("dimension", 2))
    sigma1 = float(t.get("sigma1", 1.0))
    variant = t.get("variant", "baseline")
    window = (float(t.get("window_lo", 10.0)), float(t.get("window_hi", 1e3)))
    spec = build_system(config)
    friction = spec.relax.L2[0, 0] / spec.relax.epsilon
    rep = decay_mod.linear_decay_study(d, sigma1, friction, variant,
                                       window=window)
    rows = [[rep.times[i]] + [rep.norms[k][i] for k in rep.norms]
            for i in range(len(rep.times))]
    write_csv(os.path.join(outdir, "series.csv"),
              ["t"] + list(rep.norms.keys()), rows)
    f0 = rep.fits["lf_base"]
    f1 = rep.fits["lf_plus1"]
    checks = [
        _check("low_frequency_exponent", f0.matches(f0.target, 0.05),
               f0.slope, f"target {f0.target}"),
        _check("shifted_exponent", f1.matches(f1.target, 0.15 * abs(f1.target)),
               f1.slope, f"target {f1.target}"),
    ]
    return {"task": "decay", "alpha1": rep.alpha1, "c0": rep.c0,
            "slopes": {k: v.slope for k, v in rep.fits.items()},
            "checks": checks}


def task_relax(config, outdir, seed):
    spec = build_system(config)
    grid = build_grid(config, default_modes=128)
    t = config.get("task", {})
    eps = [float(x) for x in t.get("epsilons", "0.1,0.05,0.025").split(",")]
    rng = np.random.default_rng(seed)
    N0 = random_real_field(grid, spec.dims.n1, rng,
                           spectrum=lambda r: np.exp(-0.5 * r**2))
    N0 = N0 * (0.04 / max(N0.linf(), 1e-300))
    z2 = random_real_field(grid, spec.dims.n2, rng,
                           spectrum=lambda r: np.exp(-0.5 * r**2))
    z2 = z2 * (0.03 / max(z2.linf(), 1e-300))
    sweep = relaxation.convergence_study(
        spec, eps, N0, z2_init=z2,
        tau_horizon=float(t.get("tau_horizon", 1.0)))
    write_csv(os.path.join(outdir, "sweep.csv"),
              ["epsilon", "err_sup_low", "err_int_high", "wtilde_l1",
               "z2_l2", "source_l1", "wcheck_gap_l1"],
              [[r.epsilon, r.err_sup_low, r.err_int_high, r.wtilde_l1,
                r.z2_l2, r.source_l1, r.wcheck_gap_l1] for r in sweep.runs])
    s = sweep.slopes
    checks = [
        _check("limit_error_rate", 0.8 <= s["err_sup_low"] <= 1.2,
               s["err_sup_low"], "target 1"),
        _check("damped_mode_l1_rate", 0.8 <= s["wtilde_l1"] <= 1.2,
               s["wtilde_l1"], "target 1"),
        _check("damped_block_l2_rate", 0.4 <= s["z2_l2"] <= 0.6,
               s["z2_l2"], "target 1/2"),
        _check("errors_monotone", sweep.monotone(), float(sweep.monotone())),
    ]
    return {"task": "relax", "slopes": s,
            "box_caveat": ("the sweep fixes the rescaled box, so the "
                           "unrescaled boxes differ across epsilon"),
            "checks": checks}


def task_list(config, outdir, seed):
    return {
        "task": "list",
        "builtins": {k: v["params"] for k, v in _BUILTINS.items()},
        "presets": {k: {"task": v["task"], "description": v["description"]}
                    for k, v in _PRESETS.items()},
        "checks": [],
    }


_TASKS = {
    "analyze": task_analyze,
    "certify": task_certify,
    "simulate-linear": task_simulate_linear,
    "simulate": task_simulate,
    "decay": task_decay,
    "relax": task_relax,
    "list": task_list,
}


def run(config: dict, outdir: str, seed: int = 0) -> int:
    """Execute the configured task; returns the process exit code."""
    name = config["task"]["name"]
    if name not in _TASKS:
        raise ConfigError(f"unknown task '{name}'")
    os.makedirs(outdir, exist_ok=True)
    try:
        report = _TASKS[name](config, outdir, seed)
    except (solver.SolverError, relaxation.ExtractionError,
            lyapunov.CertificateError, np.linalg.LinAlgError) as e:
        write_report(outdir, {"task": name, "error": str(e), "checks": [],
                              "config": config,
                              "config_sha256": config_hash(config)})
        return 3
    report["config"] = config
    report["config_sha256"] = config_hash(config)
    report["seed"] = seed
    write_report(outdir, report)
    ok = all(c["passed"] for c in report.get("checks", []))
    return 0 if ok else 1


def _preset_config(name: str) -> dict:
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset '{name}'")
    return {k: dict(v) for k, v in _PRESETS[name]["config"].items()}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="partdiss",
        description="analysis and simulation of partially dissipative "
                    "hyperbolic systems")
    ap.add_argument("command", choices=sorted(_TASKS) + ["run"],
                    help="subcommand (or 'run' to take the task from the config)")
    ap.add_argument("--config", help="path to an INI or JSON config file")
    ap.add_argument("--preset", help="name of a built-in experiment preset")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int, default=0, help="random seed")
    ap.add_argument("--threads", type=int, default=0,
                    help="advisory thread count for the BLAS/FFT backend")
    args = ap.parse_args(argv)
    if args.threads > 0:
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    try:
        if args.config:
            config = parse_config(args.config)
        elif args.preset:
            config = _preset_config(args.preset)
        else:
            config = {"task": {"name": args.command}}
        if args.command != "run":
            config.setdefault("task", {})["name"] = args.command
        return run(config, args.out, args.seed)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
