"""Config-driven command line front end.

Subcommands cover the full pipeline: estimate bounds per (parameter x
specification), sensitivity across a lambda grid, bootstrap confidence
intervals, the model specification test, synthetic data generation, and
standalone quantile discretization.  A JSON config file supplies the
experiment layout; command line flags override individual fields.  All
output is written as JSON (machines) plus an aligned table (humans), and is
byte-identical across reruns with the same inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor


from .bounds_solver import (
    build_problem,
    check_denominator,
    check_feasibility,
    solve_bounds,
)
from .empirical import (
    DegenerateGrid,
    estimate,
    fit_discretizer,
    itt_iv,
    load_csv,
    write_csv,
)
from .inference import TestConfig, confidence_interval, specification_test
from .latent_space import AlternativeSet, LatentIndex, OutcomeGrid
from .oracle import SyntheticModel, generate, random_model
from .parameters import (
    ParameterSpec,
    average_access_effect,
    average_effect_on_participants,
    custom_linear,
    participation_proportion,
)
from .restrictions import (
    RestrictionSet,
    hsis_access,
    mfe_access,
    mtr,
    ohie_access,
    parse_restriction,
    prune,
    roy,
    unaltered_alternative,
)
from .sensitivity import build_mixture_problem, solve_sensitivity
from .solvers import DenominatorNotPositive, InfeasibleModel

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_DENOMINATOR = 3

#: assumptions allowed to be held on a fraction of the population only:
#: they must reference potential outcomes, not access structure
OUTCOME_LEVEL_ASSUMPTIONS = ("mtr", "roy")


class ConfigError(ValueError):
    pass


# --- experiment templates ----------------------------------------------------

def _template(cfg: dict) -> tuple[AlternativeSet, RestrictionSet, dict]:
    """Resolve the experiment block to (alternatives, access restrictions,
    role labels).  Roles: program = randomized-access alternative,
    alternative = outside option used by the availability-invariance toggle."""
    exp = cfg.get("experiment", "hsis")
    if exp == "hsis":
        alts = AlternativeSet(("n", "a", "h"))
        return alts, RestrictionSet((hsis_access(alts, "h"),)), \
            {"program": "h", "alternative": "a"}
    if exp == "ohie":
        alts = AlternativeSet(("n", "a", "m"))
        return alts, RestrictionSet((ohie_access(alts, "m"),)), \
            {"program": "m", "alternative": "a"}
    if exp == "mfe":
        alts = AlternativeSet(("n", "a", "m", "ma"))
        return alts, mfe_access(alts, "m", "a", "ma"), \
            {"program": "m", "alternative": "a"}
    if isinstance(exp, dict):
        try:
            alts = AlternativeSet(tuple(exp["alternatives"]),
                                  base_index=int(exp.get("base_index", 0)))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"experiment block: {e}") from e
        access = [parse_restriction(alts, r["kill"], r.get("name"))
                  for r in exp.get("access", [])]
        roles = {k: exp[k] for k in ("program", "alternative") if k in exp}
        return alts, RestrictionSet(tuple(access)), roles
    raise ConfigError(f"unknown experiment template {exp!r}")


def _assumption(alts: AlternativeSet, roles: dict, item) -> RestrictionSet:
    if isinstance(item, str):
        if item == "ua":
            label = roles.get("alternative")
            if label is None:
                raise ConfigError("'ua' needs an 'alternative' role label")
            return RestrictionSet((unaltered_alternative(alts, label),))
        if item == "mtr":
            return RestrictionSet((mtr(alts),))
        if item == "roy":
            return roy(alts)
        raise ConfigError(f"unknown assumption {item!r}")
    if isinstance(item, dict):
        try:
            return RestrictionSet((parse_restriction(
                alts, item["kill"], item.get("name")),))
        except KeyError:
            raise ConfigError(f"custom assumption needs a 'kill' expression: "
                              f"{item}") from None
    raise ConfigError(f"cannot interpret assumption {item!r}")


def _spec_restrictions(alts, roles, access: RestrictionSet,
                       names) -> RestrictionSet:
    out = access
    for item in names:
        out = out.extended(_assumption(alts, roles, item))
    return out


def _parameter(idx: LatentIndex, roles: dict, item: dict) -> ParameterSpec:
    kind = item.get("type")
    if kind == "pp":
        return participation_proportion(idx, item["target"], item["baseline"])
    if kind == "ate":
        return average_access_effect(idx, item["with"], item["without"])
    if kind == "atop":
        return average_effect_on_participants(
            idx, item["with"], item["without"], item["target"])
    if kind == "custom":
        return custom_linear({int(k): float(v)
                              for k, v in item["coefficients"].items()},
                             name=item.get("name", "custom"))
    raise ConfigError(f"unknown parameter type {kind!r} in {item}")


def _param_label(item: dict) -> str:
    kind = item.get("type", "?")
    if kind == "pp":
        return f"pp[{item['target']}|{'+'.join(item['baseline'])}]"
    if kind == "ate":
        return f"ate[{'+'.join(item['with'])}/{'+'.join(item['without'])}]"
    if kind == "atop":
        return f"atop[{item['target']}|{'+'.join(item['without'])}]"
    return item.get("name", "custom")


def _spec_label(names) -> str:
    parts = [n if isinstance(n, str) else n.get("name", "custom")
             for n in names]
    return "base" if not parts else "+".join(["base"] + parts)


# --- shared plumbing ---------------------------------------------------------

def _load_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"{args.config}: {e}") from e
    # flag overrides, highest precedence
    for key in ("input", "out", "seed", "m", "jobs", "alpha", "bootstrap",
                "theta_grid", "tau", "lambdas"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if "jobs" not in cfg:
        cfg["jobs"] = int(os.environ.get("LATENT_BOUNDS_JOBS", "1"))
    return cfg


def _prepare_data(cfg, alts: AlternativeSet):
    """Load the sample, fit the discretizer if requested, estimate cells."""
    path = cfg.get("input")
    if not path:
        raise ConfigError("no input CSV given (config 'input' or --input)")
    sample = load_csv(path)
    m = cfg.get("m")
    dmap = None
    if m is not None:
        raw = [o.y_raw for o in sample.observations()]
        dmap = fit_discretizer(raw, int(m))
        grid = dmap.grid()
    else:
        grid = OutcomeGrid(tuple(sorted({o.y_raw
                                         for o in sample.observations()})))
    emp = estimate(sample, alts, grid, discretizer=dmap)
    return sample, grid, emp, dmap


def _emit(cfg, payload: dict, text: str) -> None:
    blob = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    out = cfg.get("out")
    if out:
        with open(f"{out}.json", "w", encoding="utf-8") as fh:
            fh.write(blob)
        with open(f"{out}.txt", "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)


def _fmt_cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, dict):
        return f"[{value['lo']:.3f}, {value['hi']:.3f}]"
    return str(value)


def _table(row_labels, col_labels, cells, corner="") -> str:
    cols = [corner] + list(col_labels)
    body = [[rl] + [_fmt_cell(c) for c in row] for rl, row in
            zip(row_labels, cells)]
    widths = [max(len(str(r[i])) for r in [cols] + body)
              for i in range(len(cols))]
    lines = ["  ".join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip()
             for row in [cols] + body]
    return "\n".join(lines) + "\n"


# --- subcommands -------------------------------------------------------------

def run_bounds(cfg: dict) -> int:
    alts, access, roles = _template(cfg)
    sample, grid, emp, _ = _prepare_data(cfg, alts)
    idx = LatentIndex(alts, grid)
    specs = cfg.get("specifications", [[]])
    params = cfg.get("parameters", [])
    jobs = max(int(cfg.get("jobs", 1)), 1)

    columns = {}
    any_infeasible = False
    any_den_failure = False

    def solve_cell(support, item):
        param = _parameter(idx, roles, item)
        problem = build_problem(idx, support, emp, param)
        if not param.is_linear:
            try:
                if check_denominator(problem) <= 0.0:
                    return None, "denominator"
            except InfeasibleModel:
                return None, "infeasible"
        try:
            iv = solve_bounds(problem)
        except InfeasibleModel:
            return None, "infeasible"
        except DenominatorNotPositive:
            return None, "denominator"
        return {"lo": iv.lo, "hi": iv.hi}, None

    for names in specs:
        label = _spec_label(names)
        support = prune(_spec_restrictions(alts, roles, access, names), idx)
        report = check_feasibility(build_problem(
            idx, support, emp,
            ParameterSpec(name="none", a_num={}, den=None)))
        col = {"feasible": report.feasible, "cells": {}}
        if not report.feasible:
            any_infeasible = True
            for item in params:
                col["cells"][_param_label(item)] = None
        else:
            if jobs > 1 and len(params) > 1:
                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    results = list(pool.map(
                        lambda it: solve_cell(support, it), params))
            else:
                results = [solve_cell(support, it) for it in params]
            for item, (cell, failure) in zip(params, results):
                col["cells"][_param_label(item)] = cell
                if failure == "infeasible":
                    any_infeasible = True
                elif failure == "denominator":
                    any_den_failure = True
        columns[label] = col

    row_labels = [_param_label(it) for it in params]
    col_labels = list(columns)
    table = _table(row_labels, col_labels,
                   [[columns[c]["cells"].get(r) for c in col_labels]
                    for r in row_labels], corner="parameter")
    diag = itt_iv(emp, roles["program"]) if roles.get("program") else None
    payload = {
        "command": "bounds",
        "specifications": columns,
        "grid": list(grid.points),
        "counts": list(emp.counts),
        "diagnostics": None if diag is None else {
            "itt_choice": diag.itt_d, "itt_outcome": diag.itt_y,
            "iv_ratio": diag.iv},
    }
    _emit(cfg, payload, table)
    if any_infeasible:
        return EXIT_INFEASIBLE
    if any_den_failure:
        return EXIT_DENOMINATOR
    return EXIT_OK


def run_sensitivity(cfg: dict) -> int:
    alts, access, roles = _template(cfg)
    sample, grid, emp, _ = _prepare_data(cfg, alts)
    idx = LatentIndex(alts, grid)
    base_names = cfg.get("base_assumptions", [])
    held = cfg.get("partial_assumptions", [])
    bad = [h for h in held if h not in OUTCOME_LEVEL_ASSUMPTIONS]
    if bad:
        raise ConfigError(
            f"assumptions {bad} cannot be held on a population fraction; "
            f"only outcome-level assumptions {OUTCOME_LEVEL_ASSUMPTIONS} can")
    lambdas = [float(v) for v in cfg.get("lambdas", [1.0])]
    if any(not 0.0 <= v <= 1.0 for v in lambdas):
        raise ConfigError("lambda values must lie in [0, 1]")
    params = cfg.get("parameters", [])
    jobs = max(int(cfg.get("jobs", 1)), 1)

    support = prune(_spec_restrictions(alts, roles, access, base_names), idx)
    s1 = RestrictionSet()
    for h in held:
        s1 = s1.extended(_assumption(alts, roles, h))

    any_infeasible = False
    any_den_failure = False
    rows = {}

    def solve_cell(lam, item):
        param = _parameter(idx, roles, item)
        problem = build_problem(idx, support, emp, param)
        mix = build_mixture_problem(problem, s1, lam)
        if not param.is_linear:
            from .sensitivity import check_denominator as mix_den
            try:
                if mix_den(mix) <= 0.0:
                    return None, "denominator"
            except InfeasibleModel:
                return None, "infeasible"
        try:
            iv = solve_sensitivity(mix)
        except InfeasibleModel:
            return None, "infeasible"
        except DenominatorNotPositive:
            return None, "denominator"
        return {"lo": iv.lo, "hi": iv.hi}, None

    tasks = [(lam, item) for lam in lambdas for item in params]
    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda t: solve_cell(*t), tasks))
    else:
        results = [solve_cell(*t) for t in tasks]
    for (lam, item), (cell, failure) in zip(tasks, results):
        rows.setdefault(f"{lam:g}", {})[_param_label(item)] = cell
        if failure == "infeasible":
            any_infeasible = True
        elif failure == "denominator":
            any_den_failure = True

    row_labels = [f"{lam:g}" for lam in lambdas]
    col_labels = [_param_label(it) for it in params]
    table = _table(row_labels, col_labels,
                   [[rows[r].get(c) for c in col_labels] for r in row_labels],
                   corner="lambda")
    payload = {"command": "sensitivity", "rows": rows,
               "held_partially": held, "base": base_names,
               "grid": list(grid.points)}
    _emit(cfg, payload, table)
    if any_infeasible:
        return EXIT_INFEASIBLE
    if any_den_failure:
        return EXIT_DENOMINATOR
    return EXIT_OK


def _test_config(cfg) -> TestConfig:
    tau = cfg.get("tau")
    if tau in ("auto", None):
        tau = None
    else:
        tau = float(tau)
    return TestConfig(alpha=float(cfg.get("alpha", 0.05)),
                      b=int(cfg.get("bootstrap", 200)), tau=tau,
                      theta_grid_points=int(cfg.get("theta_grid", 201)),
                      seed=int(cfg.get("seed", 0)))


def run_infer(cfg: dict) -> int:
    alts, access, roles = _template(cfg)
    sample, grid, emp, _ = _prepare_data(cfg, alts)
    idx = LatentIndex(alts, grid)
    names = cfg.get("base_assumptions", cfg.get("specifications", [[]])[0])
    support = prune(_spec_restrictions(alts, roles, access, names), idx)
    tc = _test_config(cfg)
    results = {}
    lines = []
    code = EXIT_OK
    for item in cfg.get("parameters", []):
        param = _parameter(idx, roles, item)
        label = _param_label(item)
        try:
            ci = confidence_interval(sample, idx, support, param, tc)
        except InfeasibleModel:
            results[label] = None
            lines.append(f"{label}  infeasible")
            code = EXIT_INFEASIBLE
            continue
        results[label] = {
            "estimated": {"lo": ci.estimated.lo, "hi": ci.estimated.hi},
            "ci": None if ci.empty else {"lo": ci.lo, "hi": ci.hi},
            "alpha": tc.alpha,
        }
        shown = "(empty)" if ci.empty else f"[{ci.lo:.3f}, {ci.hi:.3f}]"
        lines.append(f"{label}  estimated [{ci.estimated.lo:.3f}, "
                     f"{ci.estimated.hi:.3f}]  ci {shown}")
    payload = {"command": "infer", "results": results,
               "seed": tc.seed, "grid": list(grid.points)}
    _emit(cfg, payload, "\n".join(lines) + "\n")
    return code


def run_spectest(cfg: dict) -> int:
    alts, access, roles = _template(cfg)
    sample, grid, emp, _ = _prepare_data(cfg, alts)
    idx = LatentIndex(alts, grid)
    tc = _test_config(cfg)
    results = {}
    lines = []
    for names in cfg.get("specifications", [[]]):
        label = _spec_label(names)
        support = prune(_spec_restrictions(alts, roles, access, names), idx)
        stat, p = specification_test(sample, idx, support, tc)
        results[label] = {"statistic": stat, "p_value": p}
        lines.append(f"{label}  statistic {stat:.6g}  p-value {p:.3f}")
    payload = {"command": "spectest", "results": results, "seed": tc.seed,
               "grid": list(grid.points)}
    _emit(cfg, payload, "\n".join(lines) + "\n")
    return EXIT_OK


def run_simulate(cfg: dict) -> int:
    alts, access, roles = _template(cfg)
    m = int(cfg.get("m", 2))
    grid_points = cfg.get("grid", list(range(m)))
    idx = LatentIndex(alts, OutcomeGrid(tuple(float(p) for p in grid_points)))
    names = cfg.get("base_assumptions", [])
    restrictions = _spec_restrictions(alts, roles, access, names)
    seed = int(cfg.get("seed", 0))
    pmf_cfg = cfg.get("pmf")
    if pmf_cfg:
        model = SyntheticModel(
            idx=idx,
            pmf={int(k): float(v) for k, v in pmf_cfg.items()},
            p_z=float(cfg.get("p_z", 0.5)),
            cluster_count=int(cfg.get("clusters", 10)))
    else:
        model = random_model(idx, restrictions, seed,
                             cluster_count=int(cfg.get("clusters", 10)),
                             p_z=float(cfg.get("p_z", 0.5)))
    sample = generate(model, int(cfg.get("per_cluster", 50)), seed)
    out = cfg.get("out")
    if not out:
        raise ConfigError("simulate needs an output path (--out)")
    write_csv(f"{out}.csv", sample)
    payload = {"command": "simulate", "clusters": sample.g,
               "observations": sample.n, "seed": seed,
               "pmf": {str(k): v for k, v in sorted(model.pmf.items())}}
    _emit(cfg, payload, f"wrote {sample.n} observations in {sample.g} "
          f"clusters to {out}.csv\n")
    return EXIT_OK


def run_discretize(cfg: dict) -> int:
    path = cfg.get("input")
    if not path:
        raise ConfigError("no input CSV given (config 'input' or --input)")
    sample = load_csv(path)
    m = int(cfg.get("m", 10))
    try:
        dmap = fit_discretizer([o.y_raw for o in sample.observations()], m)
    except DegenerateGrid as e:
        raise ConfigError(str(e)) from e
    payload = {"command": "discretize", "m": m,
               "cut_values": list(dmap.cut_values),
               "midpoints": list(dmap.midpoints)}
    lines = [f"bins: {m}",
             "cuts: " + ", ".join(f"{c:g}" for c in dmap.cut_values),
             "midpoints: " + ", ".join(f"{v:g}" for v in dmap.midpoints)]
    _emit(cfg, payload, "\n".join(lines) + "\n")
    return EXIT_OK


# --- argument parsing --------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="latent-bounds",
        description="Bounds, sensitivity and inference for average effects "
                    "of access under latent choice sets.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in (("bounds", run_bounds), ("sensitivity", run_sensitivity),
                     ("infer", run_infer), ("spectest", run_spectest),
                     ("simulate", run_simulate),
                     ("discretize", run_discretize)):
        sp = sub.add_parser(name)
        sp.set_defaults(func=fn)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--input", help="input CSV (cluster_id,y,d,z)")
        sp.add_argument("--out", help="output path prefix")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--m", type=int, help="discretization bins")
        sp.add_argument("--jobs", type=int,
                        help="max concurrent solver instances "
                             "(default: LATENT_BOUNDS_JOBS or 1)")
        if name in ("infer", "spectest"):
            sp.add_argument("--alpha", type=float)
            sp.add_argument("--bootstrap", type=int, dest="bootstrap")
            sp.add_argument("--theta-grid", type=int, dest="theta_grid")
            sp.add_argument("--tau", help="'auto' or a value in (0,1)")
        if name == "sensitivity":
            sp.add_argument("--lambdas", type=float, nargs="+")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return args.func(cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
