"""Command-line harness: reproducible experiments from config files.

Commands: norms | family-sweep | fractal | smallness | simulate | kt-norm.
Configs are JSON (canonical for hashing) or INI-style key=value sections with
JSON-parsed values.  Every run writes a manifest with the config hash; all
randomness flows from the single seed.  Exit codes: 0 pass/success, 1 usage
error, 2 verdict fail / diverged / blow-up.
"""

import argparse
import configparser
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .families import (
    FamilyParams,
    fit_loglog_slope,
    gaussian_profile,
    make_f_eps,
    make_reynolds_data,
    make_theorem2_data,
    resolvable_epsilons,
    scaled_profile,
)
from .fractal import (
    TransformSpec,
    apply_transform,
    besov_sandwich_gap,
    bilinear_heat_series,
    bilinear_stability_gap,
    cross_interaction_norm,
    hminus1_contraction,
    make_q_bump,
    make_q_bump_vector,
    make_spec,
    validate_spec,
)
from .grid import GridSpec, SpectralVectorField, lp_norm
from .io import load_field, save_field, write_csv, write_json
from .norms import (
    KTContext,
    besov_lp,
    bmo_minus1_norm,
    e_norm,
    sobolev_norm,
)
from .random_fields import random_divfree
from .series import HeatFlowSeries
from .solver import DtPolicy, solve
from .timegrid import TimeGrid
from .wellposed import (
    choose_lambda,
    first_iterate_series,
    smallness_check,
    smallness_check_loose,
    solve_mns,
)


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config handling

def load_config(path: str) -> dict:
    if path.endswith(".json"):
        with open(path) as fh:
            return json.load(fh)
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_string(fh.read())
    cfg = {}
    for section in parser.sections():
        out = {}
        for key, raw in parser.items(section):
            try:
                out[key] = json.loads(raw)
            except json.JSONDecodeError:
                out[key] = raw
        if section == "top":
            cfg.update(out)
        else:
            cfg[section] = out
    return cfg


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def _get(cfg, path, default=None, required=False):
    cur = cfg
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            if required:
                raise UsageError(f"config is missing required key '{path}'")
            return default
        cur = cur[part]
    return cur


def _inf(x):
    if isinstance(x, str) and x.lower() in ("inf", "infinity"):
        return np.inf
    return float(x)


def build_grid(cfg) -> GridSpec:
    return GridSpec(
        int(_get(cfg, "grid.n", required=True)),
        float(_get(cfg, "grid.box_length", 2.0 * np.pi)),
        float(_get(cfg, "grid.dealias_fraction", 2.0 / 3.0)))


def build_timegrid(cfg, grid) -> TimeGrid:
    return TimeGrid.for_grid(
        grid,
        rho=float(_get(cfg, "time_grid.rho", 1.25)),
        t_min_factor=float(_get(cfg, "time_grid.t_min_factor", 0.02)),
        t_max=_get(cfg, "time_grid.t_max"))


def resolve_profile(name):
    if name is None or name == "gaussian":
        return gaussian_profile
    if isinstance(name, str) and name.startswith("gaussian*"):
        return scaled_profile(float(name.split("*", 1)[1]))
    raise UsageError(f"unknown profile '{name}'")


def build_datum(cfg, grid, rng):
    d = _get(cfg, "datum", required=True)
    kind = d.get("kind")
    if kind == "family":
        params = FamilyParams(float(d["epsilon"]), float(d.get("alpha", 0.5)),
                              resolve_profile(d.get("profile")), grid)
        return make_theorem2_data(params)
    if kind == "reynolds":
        return make_reynolds_data(float(d["nu"]), float(d.get("alpha", 0.5)),
                                  resolve_profile(d.get("profile")), grid)
    if kind == "field":
        u = load_field(d["path"])
        if not isinstance(u, SpectralVectorField):
            raise UsageError("datum field must be a vector field")
        return u
    if kind == "q_bump":
        return make_q_bump_vector(grid, float(d.get("width", 0.25)),
                                  d.get("k_max") and float(d["k_max"]),
                                  float(d.get("amplitude", 1.0)))
    if kind == "random_divfree":
        u = random_divfree(grid, rng, k_lo=float(d.get("k_lo", 0.0)),
                           k_hi=d.get("k_hi") and float(d["k_hi"]),
                           decay=float(d.get("decay", 0.0)),
                           amplitude=float(d.get("amplitude", 1.0)))
        target = d.get("b_target")
        if target is not None:
            b = besov_lp(u, -1.0, np.inf, 2.0).value
            if b > 0:
                u = u * (float(target) / b)
        return u
    raise UsageError(f"unknown datum kind '{kind}'")


def parse_norm_name(name):
    parts = name.split(":")
    if parts[0] == "besov" and len(parts) == 4:
        return ("besov", float(parts[1]), _inf(parts[2]), _inf(parts[3]))
    if parts[0] == "sobolev" and len(parts) == 2:
        return ("sobolev", float(parts[1]))
    if parts[0] == "lp" and len(parts) == 2:
        return ("lp", _inf(parts[1]))
    if name == "hhalf":
        return ("sobolev", 0.5)
    if name == "bmo":
        return ("bmo",)
    if name == "e_first_iterate":
        return ("e_first_iterate",)
    raise UsageError(f"unknown norm name '{name}'")


# ---------------------------------------------------------------------------
# commands

def _outputs(args, cmd):
    out = args.out or f"out-{cmd}"
    os.makedirs(out, exist_ok=True)
    return out


def _finish(out, cfg, cmd, t0, files, seed, exit_code=0):
    write_json(os.path.join(out, "manifest.json"), {
        "command": cmd,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "version": __version__,
        "seed": seed,
        "wall_time_s": time.time() - t0,
        "outputs": sorted(files),
        "exit_code": exit_code,
    })
    return exit_code


def cmd_norms(cfg, args):
    t0 = time.time()
    out = _outputs(args, "norms")
    seed = int(args.seed if args.seed is not None else _get(cfg, "seed", 0))
    rng = np.random.default_rng(seed)
    grid = build_grid(cfg)
    tg = build_timegrid(cfg, grid)
    u = build_datum(cfg, grid, rng)
    names = _get(cfg, "norms", required=True)
    reports = {}
    rows = []
    for name in names:
        spec = parse_norm_name(name)
        if spec[0] == "besov":
            rep = besov_lp(u, *spec[1:])
            reports[name] = rep.to_dict()
            value = rep.value
        elif spec[0] == "sobolev":
            value = sobolev_norm(u, spec[1])
            reports[name] = {"value": value, "s": spec[1]}
        elif spec[0] == "lp":
            value = lp_norm(u, spec[1])
            reports[name] = {"value": value, "p": None if np.isinf(spec[1]) else spec[1]}
        elif spec[0] == "bmo":
            rep = bmo_minus1_norm(u, tg)
            reports[name] = rep.to_dict()
            value = rep.value
        elif spec[0] == "e_first_iterate":
            rep = e_norm(first_iterate_series(u, tg))
            reports[name] = rep.to_dict()
            value = rep.value
        rows.append((name, value))
    files = ["norms.json", "norms.csv"]
    write_json(os.path.join(out, "norms.json"),
               {"config_hash": config_hash(cfg), "reports": reports})
    write_csv(os.path.join(out, "norms.csv"), ["norm", "value"], rows)
    return _finish(out, cfg, "norms", t0, files, seed)


def _sweep_norm_value(name, grid, tg, params):
    """One (norm, epsilon) cell of the family sweep, with its reference law."""
    eps, al = params.epsilon, params.alpha
    log_factor = (-np.log(eps)) ** 0.2
    if name == "u_besov_inf_inf":
        u = make_theorem2_data(params)
        return besov_lp(u, -1.0, np.inf, np.inf).value, log_factor
    if name == "u_besov_3_1":
        u = make_theorem2_data(params)
        return besov_lp(u, -1.0, 3.0, 1.0).value, eps ** (al / 3.0) * log_factor
    if name == "f_eps_besov_inf_1":
        f = make_f_eps(params.profile, params)
        return besov_lp(f, -1.0, np.inf, 1.0).value, eps
    if name == "f_eps_besov_inf_inf":
        f = make_f_eps(params.profile, params)
        return besov_lp(f, -1.0, np.inf, np.inf).value, eps
    if name == "first_iterate_E":
        u = make_theorem2_data(params)
        return e_norm(first_iterate_series(u, tg)).value, \
            eps ** (al / 3.0) * log_factor ** 2
    raise UsageError(f"unknown sweep norm '{name}'")


def cmd_family_sweep(cfg, args):
    t0 = time.time()
    out = _outputs(args, "family-sweep")
    seed = int(args.seed if args.seed is not None else _get(cfg, "seed", 0))
    grid = build_grid(cfg)
    tg = build_timegrid(cfg, grid)
    alpha = float(_get(cfg, "sweep.alpha", 0.5))
    profile = resolve_profile(_get(cfg, "sweep.profile"))
    eps_request = [float(e) for e in _get(cfg, "sweep.epsilons", required=True)]
    names = _get(cfg, "sweep.norms",
                 ["u_besov_inf_inf", "first_iterate_E", "f_eps_besov_inf_1"])
    kept, clipped = resolvable_epsilons(grid, eps_request, alpha, warn=False)

    def run_eps(eps):
        params = FamilyParams(eps, alpha, profile, grid)
        return [(eps, alpha, name, *_sweep_norm_value(name, grid, tg, params))
                for name in names]

    workers = int(args.workers or _get(cfg, "workers", 1))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_eps, kept))
    else:
        chunks = [run_eps(e) for e in kept]
    rows = [row for chunk in chunks for row in chunk]
    slopes = {}
    for name in names:
        xs = [r[0] for r in rows if r[2] == name]
        ys = [r[3] for r in rows if r[2] == name]
        refs = [r[4] for r in rows if r[2] == name]
        slope, half = fit_loglog_slope(xs, ys)
        ref_slope, _ = fit_loglog_slope(xs, refs)
        slopes[name] = {"slope": slope, "confidence_halfwidth": half,
                        "reference_slope": ref_slope, "points": len(xs)}
    files = ["sweep.csv", "slopes.json"]
    write_csv(os.path.join(out, "sweep.csv"),
              ["epsilon", "alpha", "norm_name", "value", "reference_scaling"], rows)
    write_json(os.path.join(out, "slopes.json"), {
        "config_hash": config_hash(cfg),
        "slopes": slopes,
        "clipped_epsilons": clipped,
    })
    if clipped:
        print(f"warning: clipped unresolvable epsilons {clipped}", file=sys.stderr)
    return _finish(out, cfg, "family-sweep", t0, files, seed)


def cmd_fractal(cfg, args):
    t0 = time.time()
    out = _outputs(args, "fractal")
    seed = int(args.seed if args.seed is not None else _get(cfg, "seed", 0))
    grid = build_grid(cfg)
    tg = build_timegrid(cfg, grid)
    lambdas = [int(l) for l in _get(cfg, "fractal.lambdas", [8, 16, 32])]
    counts = [int(k) for k in _get(cfg, "fractal.counts", [2])]
    quantities = _get(cfg, "fractal.quantities",
                      ["lp_identity", "sandwich", "hminus1"])
    width = float(_get(cfg, "fractal.width", 0.25))
    k_max = _get(cfg, "fractal.k_max")
    k_max = float(k_max) if k_max else None
    f_scalar = make_q_bump(grid, width, k_max)
    f_vector = make_q_bump_vector(grid, width, k_max)
    rows = []
    skipped = []
    for count in counts:
        for lam in lambdas:
            spec = make_spec(lam, count)
            rep = validate_spec(spec)
            if not rep.ok:
                skipped.append({"lambda": lam, "K": count, "violations": rep.violations})
                continue
            if "lp_identity" in quantities:
                tf = apply_transform(f_scalar, spec)
                for p in (2.0, 3.0, np.inf):
                    ratio = lp_norm(tf, p) / lp_norm(f_scalar, p)
                    ref = lam ** (1.0 - 3.0 / p) * count ** (1.0 / p) \
                        if not np.isinf(p) else float(lam)
                    rows.append((lam, count, f"lp_ratio_p{p:g}", ratio, ref))
            if "sandwich" in quantities:
                for r in (2.0, np.inf):
                    gap = besov_sandwich_gap(f_scalar, spec, r)
                    rows.append((lam, count, f"sandwich_dev_r{r:g}",
                                 abs(gap.deviation), lam ** -2.0))
            if "hminus1" in quantities:
                ratio = hminus1_contraction(f_scalar, spec)
                rows.append((lam, count, "hminus1_ratio", ratio,
                             np.sqrt(count) * lam ** -1.5))
            if "bilinear" in quantities:
                gap = bilinear_stability_gap(f_vector, f_vector, spec, tg)
                rows.append((lam, count, "bilinear_gap", gap, lam ** -3.0))
            if "cross" in quantities:
                flows = [HeatFlowSeries(
                    apply_transform(f_vector, TransformSpec(lam, (c,), spec.delta)), tg)
                    for c in spec.centers]
                val = cross_interaction_norm(flows, spec, tg)
                rows.append((lam, count, "cross_interaction", val, float("nan")))
    slopes = {}
    for count in counts:
        for q in set(r[2] for r in rows):
            xs = [r[0] for r in rows if r[1] == count and r[2] == q]
            ys = [r[3] for r in rows if r[1] == count and r[2] == q]
            if len(xs) >= 2:
                slope, half = fit_loglog_slope(xs, ys)
                slopes[f"K{count}:{q}"] = {"slope": slope,
                                           "confidence_halfwidth": half,
                                           "points": len(xs)}
    files = ["fractal.csv", "slopes.json"]
    write_csv(os.path.join(out, "fractal.csv"),
              ["lambda", "K", "quantity", "value", "reference"], rows)
    write_json(os.path.join(out, "slopes.json"), {
        "config_hash": config_hash(cfg), "slopes": slopes, "skipped": skipped})
    return _finish(out, cfg, "fractal", t0, files, seed)


def cmd_smallness(cfg, args):
    t0 = time.time()
    out = _outputs(args, "smallness")
    seed = int(args.seed if args.seed is not None else _get(cfg, "seed", 0))
    rng = np.random.default_rng(seed)
    grid = build_grid(cfg)
    tg = build_timegrid(cfg, grid)
    u = build_datum(cfg, grid, rng)
    tspec = _get(cfg, "transform")
    if tspec:
        spec = (TransformSpec.from_dict(tspec) if "centers" in tspec
                else make_spec(int(tspec["lambda"]), int(tspec.get("count", 1))))
        u = apply_transform(u, spec)
    c0 = float(_get(cfg, "smallness.C0", 1.0))
    eta = _get(cfg, "smallness.eta")
    if eta is not None:
        report = smallness_check_loose(u, c0, float(eta), tg)
    else:
        report = smallness_check(u, c0, tg)
    d = report.to_dict()
    d["config_hash"] = config_hash(cfg)
    files = ["smallness.json"]
    write_json(os.path.join(out, "smallness.json"), d)
    code = 0 if report.passed else 2
    print(f"smallness: {report.verdict} (ratio {report.ratio:.4g})")
    return _finish(out, cfg, "smallness", t0, files, seed, exit_code=code)


def cmd_simulate(cfg, args):
    t0 = time.time()
    out = _outputs(args, "simulate")
    seed = int(args.seed if args.seed is not None else _get(cfg, "seed", 0))
    rng = np.random.default_rng(seed)
    grid = build_grid(cfg)
    u = build_datum(cfg, grid, rng)
    tspec = _get(cfg, "transform")
    if tspec:
        spec = (TransformSpec.from_dict(tspec) if "centers" in tspec
                else make_spec(int(tspec["lambda"]), int(tspec.get("count", 1))))
        u = apply_transform(u, spec)
    policy = DtPolicy(
        cfl=float(_get(cfg, "simulate.cfl", 0.5)),
        dt_max=float(_get(cfg, "simulate.dt_max", 2.5e-2)),
        dt_floor=float(_get(cfg, "simulate.dt_floor", 1e-6)),
        recheck_every=int(_get(cfg, "simulate.recheck_every", 10)))
    trace = solve(u, t_end=float(_get(cfg, "simulate.t_end", 5.0)), dt_policy=policy)
    files = ["trace.csv", "summary.json"]
    write_csv(os.path.join(out, "trace.csv"),
              ["t", "energy", "hhalf", "dissipation", "h32_sq_integral", "dt", "flag"],
              trace.rows())
    summary = trace.summary()
    summary["config_hash"] = config_hash(cfg)
    write_json(os.path.join(out, "summary.json"), summary)
    if _get(cfg, "simulate.save_final_field", False):
        save_field(os.path.join(out, "final.bfsf"),
                   build_final_field(grid, trace, u))
        files.append("final.bfsf")
    code = 2 if trace.blowup_flag else 0
    print(f"simulate: t_final={trace.times[-1]:.4g} "
          f"blowup={'yes' if trace.blowup_flag else 'no'}")
    return _finish(out, cfg, "simulate", t0, files, seed, exit_code=code)


def build_final_field(grid, trace, u0):
    # the trace holds norms only; re-solving for the final field would double
    # the cost, so the CLI stores snapshots only on request
    raise UsageError("save_final_field requires simulate.snapshot_times")


def cmd_kt_norm(cfg, args):
    t0 = time.time()
    out = _outputs(args, "kt-norm")
    seed = int(args.seed if args.seed is not None else _get(cfg, "seed", 0))
    rng = np.random.default_rng(seed)
    grid = build_grid(cfg)
    tg = build_timegrid(cfg, grid)
    u = build_datum(cfg, grid, rng)
    lambdas = [float(l) for l in _get(cfg, "kt.lambdas", [0.0])]
    ctx = KTContext(HeatFlowSeries(u, tg), u)
    values = {}
    for lam in lambdas:
        rep = ctx.norm(lam)
        values[f"{lam:g}"] = rep.to_dict()
    files = ["ktnorm.json"]
    write_json(os.path.join(out, "ktnorm.json"),
               {"config_hash": config_hash(cfg), "norms": values})
    return _finish(out, cfg, "kt-norm", t0, files, seed)


COMMANDS = {
    "norms": cmd_norms,
    "family-sweep": cmd_family_sweep,
    "fractal": cmd_fractal,
    "smallness": cmd_smallness,
    "simulate": cmd_simulate,
    "kt-norm": cmd_kt_norm,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="besovflow",
        description="Pseudo-spectral harmonic-analysis experiments on the periodic box")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON or INI config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--workers", type=int, default=None,
                        help="concurrent sweep points")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (OSError, json.JSONDecodeError, configparser.Error) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
