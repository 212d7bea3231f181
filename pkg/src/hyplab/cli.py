"""Batch driver: scenario files in, deterministic reports out.

``hyplab verify --scenario file.json [--out dir] [--seed n] [--jobs n]`` runs
the requested checks and exits 0 on success, 1 on a failed check, 2 on a
configuration problem.  ``hyplab sweep`` runs the same checks over a grid
(eps values or repeated seeds) with an aggregated summary.  Reports are byte
identical for identical scenario + seed.
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import bv
from .bv import Interval, PiecewiseConstantFn, l1_distance, total_variation
from .certify import (
    bump_family,
    certify,
    convergence_rate,
    sample_evolution,
    upwind_burgers,
)
from .estimates import (
    EstimateReport,
    TrapezoidSpec,
    entropy_propagation_check,
    error_estimate_check,
    error_integrand,
    linear_comparison_check,
    local_l1_check,
    local_l1_constant,
    reports_to_csv,
)
from .evolution import SemigroupEvolution, TravellingJump
from .front_tracking import FrontTrackingRun, semigroup
from .models import (
    Box,
    DomainError,
    SystemModel,
    check_entropy_compatibility,
    estimate_constants,
    make_model,
)
from .riemann import entropy_dissipation, rh_residual, solve_riemann

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Configuration problem: bad file, unknown model or check."""


def rng_for(seed: int, *labels) -> np.random.Generator:
    """Counter-based generator derived from one 64-bit seed and a label path."""
    import zlib

    key = [seed & 0xFFFFFFFFFFFFFFFF]
    key.extend(zlib.crc32(str(lab).encode()) for lab in labels)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def _reject_unknown(obj: dict, allowed: set, where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"{where}: unknown fields {sorted(unknown)}")


def load_scenario(path) -> dict:
    p = pathlib.Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{p}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    return normalize_scenario(raw)


def normalize_scenario(raw: dict) -> dict:
    _reject_unknown(
        raw,
        {"schema", "model", "seed", "horizon", "delta", "initial", "checks", "grid"},
        "scenario",
    )
    if raw.get("schema") != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema {raw.get('schema')!r}")
    model = dict(raw.get("model") or {})
    _reject_unknown(model, {"id", "gamma", "omega", "a_matrix"}, "model")
    if model.get("id") not in {"burgers", "p_system", "linear"}:
        raise ScenarioError(f"unknown model {model.get('id')!r}")
    initial = dict(raw.get("initial") or {"preset": "shock"})
    _reject_unknown(
        initial,
        {"preset", "left", "right", "x0", "values", "positions",
         "breakpoints", "tv_budget", "njumps", "span"},
        "initial",
    )
    checks = []
    for i, c in enumerate(raw.get("checks") or []):
        c = dict(c)
        if "name" not in c:
            raise ScenarioError(f"checks[{i}]: missing name")
        if c["name"] not in CHECKS:
            raise ScenarioError(f"checks[{i}]: unknown check {c['name']!r}")
        checks.append(c)
    out = {
        "schema": SCHEMA_VERSION,
        "model": model,
        "seed": int(raw.get("seed", 0)),
        "horizon": float(raw.get("horizon", 1.0)),
        "delta": float(raw.get("delta", 0.05)),
        "initial": initial,
        "checks": checks,
    }
    if "grid" in raw:
        grid = dict(raw["grid"])
        _reject_unknown(grid, {"eps_grid", "seeds"}, "grid")
        out["grid"] = grid
    return out


def build_model(spec: dict) -> SystemModel:
    kwargs = {}
    if "omega" in spec:
        om = np.asarray(spec["omega"], dtype=float)
        kwargs["domain"] = Box(om[:, 0], om[:, 1])
    if spec["id"] == "p_system" and "gamma" in spec:
        kwargs["gamma"] = float(spec["gamma"])
    if spec["id"] == "linear" and "a_matrix" in spec:
        kwargs["a_matrix"] = spec["a_matrix"]
    return make_model(spec["id"], **kwargs)


def _default_jump(model: SystemModel, compressive: bool):
    if model.n == 1:
        return ([1.0], [0.0]) if compressive else ([0.0], [1.0])
    if model.name == "p_system":
        left, right = [1.0, 0.1], [1.0, -0.1]
        return (left, right) if compressive else (right, left)
    return ([0.5, 0.0], [-0.3, 0.2])


def build_initial(model: SystemModel, spec: dict, seed: int) -> PiecewiseConstantFn:
    preset = spec.get("preset", "explicit" if "breakpoints" in spec else "shock")
    if preset == "explicit" or "breakpoints" in spec:
        return PiecewiseConstantFn(spec["breakpoints"], spec["values"])
    if preset in ("shock", "rarefaction"):
        left, right = _default_jump(model, preset == "shock")
        left = spec.get("left", left)
        right = spec.get("right", right)
        return PiecewiseConstantFn([spec.get("x0", 0.0)], [left, right])
    if preset == "two_shock":
        values = spec.get("values", [[2.0], [1.0], [0.0]])
        positions = spec.get("positions", [0.0, 0.5])
        return PiecewiseConstantFn(positions, values)
    if preset == "random_tv":
        budget = float(spec.get("tv_budget", 0.1))
        njumps = int(spec.get("njumps", 6))
        span = float(spec.get("span", 1.0))
        return random_datum(model, rng_for(seed, "initial"), budget, njumps, span)
    raise ScenarioError(f"unknown initial preset {preset!r}")


def random_datum(model: SystemModel, rng: np.random.Generator, budget: float,
                 njumps: int, span: float) -> PiecewiseConstantFn:
    """Compactly supported random datum with total variation about `budget`."""
    center = 0.5 * (model.domain.lo + model.domain.hi)
    xs = np.sort(rng.uniform(-span, span, njumps))
    steps = rng.normal(size=(njumps, model.n))
    vals = np.concatenate((np.zeros((1, model.n)), np.cumsum(steps, axis=0)))
    vals -= vals[-1]  # close the loop: equal tails
    tv = np.sum(np.linalg.norm(np.diff(vals, axis=0), axis=1))
    if tv > 0:
        vals *= budget / tv
    return PiecewiseConstantFn(xs, vals + center)


# -- check implementations -----------------------------------------------------
# each returns (reports, extras) where reports is a list of EstimateReport

def check_model_constants(ctx, params):
    _reject_unknown(params, {"samples"}, "model_constants")
    samples = int(params.get("samples", 10_000))
    k = estimate_constants(ctx["model"], samples, ctx["seed"])
    compat = check_entropy_compatibility(ctx["model"], 128)
    rep = EstimateReport.build(
        "entropy_compatibility", compat, 1.0, 1e-7,
        {"samples": samples, "c0_hat": k.c0_hat, "cprime_hat": k.cprime_hat,
         "lambda_hat": k.lambda_hat},
    )
    return [rep], {"constants": k._asdict()}


def check_riemann_exactness(ctx, params):
    _reject_unknown(params, {"n_data", "rh_tol", "diss_tol"}, "riemann_exactness")
    model = ctx["model"]
    n_data = int(params.get("n_data", 200))
    rh_tol = float(params.get("rh_tol", 1e-10))
    diss_tol = float(params.get("diss_tol", 1e-10))
    rng = rng_for(ctx["seed"], "riemann")
    sub = model.domain.shrink(0.5)
    worst_rh, worst_diss, tested = 0.0, 0.0, 0
    while tested < n_data:
        ul, ur = sub.sample(rng, 1)[0], sub.sample(rng, 1)[0]
        try:
            fan = solve_riemann(model, ul, ur)
        except DomainError:
            continue
        tested += 1
        for w in fan.waves:
            if w.kind == "rarefaction":
                continue
            worst_rh = max(worst_rh, rh_residual(model, w.left, w.right, w.speed))
            worst_diss = max(
                worst_diss, -entropy_dissipation(model, w.left, w.right, w.speed)
            )
    reports = [
        EstimateReport.build("rh_residual", worst_rh, 1.0, rh_tol,
                             {"n_data": n_data}),
        EstimateReport.build("entropy_dissipation_defect", worst_diss, 1.0,
                             diss_tol, {"n_data": n_data}),
    ]
    return reports, {}


def check_semigroup_property(ctx, params):
    _reject_unknown(params, {"t_split", "tol"}, "semigroup_property")
    model, u0 = ctx["model"], ctx["u0"]
    T = ctx["scenario"]["horizon"]
    delta = ctx["scenario"]["delta"]
    s = float(params.get("t_split", 0.5)) * T
    tol = float(params.get("tol", 1e-10))
    one = semigroup(model, u0, T, delta)
    two = semigroup(model, semigroup(model, u0, s, delta), T - s, delta)
    gap = l1_distance(one, two)
    return [EstimateReport.build("semigroup_property", gap, 1.0, tol,
                                 {"T": T, "split": s})], {}


def check_lemma21_sweep(ctx, params):
    _reject_unknown(params, {"n_runs", "cases_per_run", "tv_budget"}, "lemma21_sweep")
    return _lemma_sweep(ctx, params, which="21")


def check_lemma22_sweep(ctx, params):
    _reject_unknown(params, {"n_runs", "cases_per_run", "tv_budget"}, "lemma22_sweep")
    return _lemma_sweep(ctx, params, which="22")


def _lemma_sweep(ctx, params, which: str):
    model = ctx["model"]
    n_runs = int(params.get("n_runs", 10))
    cases = int(params.get("cases_per_run", 10))
    budget = float(params.get("tv_budget", 0.08))
    delta = ctx["scenario"]["delta"]
    horizon = ctx["scenario"]["horizon"]
    k = estimate_constants(model, 10_000, ctx["seed"])
    chat = k.cprime_hat / k.c0_hat
    lam = model.lambda_hat
    reports = []
    for r in range(n_runs):
        rng = rng_for(ctx["seed"], "lemma", which, r)
        u0 = random_datum(model, rng, budget, 6, 1.0)
        ev = SemigroupEvolution(model, u0, delta)
        for _ in range(cases):
            tau = rng.uniform(0.0, 0.5 * horizon)
            dt = rng.uniform(0.05, 0.45) * horizon
            width = 2.0 * lam * dt + rng.uniform(0.5, 2.0)
            a = rng.uniform(-2.0, 0.5)
            if which == "21":
                spec = TrapezoidSpec(a, a + width, tau, tau + dt, lam)
                ustar = model.domain.shrink(0.8).sample(rng, 1)[0]
                reports.append(entropy_propagation_check(model, ev, spec, ustar,
                                                         chat=chat))
            else:
                reports.append(local_l1_check(model, ev, tau, tau + dt, a,
                                              a + width, chat=chat))
    extras = {"chat": chat, "constant": local_l1_constant(chat) if which == "22"
              else chat}
    return reports, extras


def check_error_estimate(ctx, params):
    _reject_unknown(params, {"mode", "offset", "h_grid", "tau_points", "tol"},
                    "error_estimate")
    model = ctx["model"]
    delta = ctx["scenario"]["delta"]
    T = ctx["scenario"]["horizon"]
    mode = params.get("mode", "self")
    h_grid = [float(h) for h in params.get("h_grid", [0.1, 0.01])]
    tau_points = int(params.get("tau_points", 16))
    if mode == "self":
        ev = SemigroupEvolution(model, ctx["u0"], delta)
        value = max(error_integrand(model, ev, tau, h_grid[0], delta)
                    for tau in np.linspace(0.0, T - h_grid[0], 8))
        rep = EstimateReport.build("error_integrand_self", value, 1.0,
                                   float(params.get("tol", 1e-10)), {"T": T})
        return [rep], {}
    if mode == "wrong_speed":
        if model.n != 1:
            raise ScenarioError("wrong_speed mode is scalar-only")
        left, right = _default_jump(model, True)
        rh = float(model.flux(np.array(left))[0] - model.flux(np.array(right))[0])
        rh /= left[0] - right[0]
        ev = TravellingJump(left, right, rh + float(params.get("offset", 0.1)))
        rep = error_estimate_check(model, ev, T, h_grid, delta,
                                   tau_points=tau_points, seed=ctx["seed"])
        return [rep], {}
    raise ScenarioError(f"unknown error_estimate mode {mode!r}")


def check_linear_comparison(ctx, params):
    _reject_unknown(params, {"eps_tv", "dts", "constant"}, "linear_comparison")
    model = ctx["model"]
    delta = ctx["scenario"]["delta"]
    eps = float(params.get("eps_tv", 0.05))
    dts = [float(d) for d in params.get("dts", [0.1, 0.01, 0.001])]
    constant = float(params.get("constant", 50.0))
    rng = rng_for(ctx["seed"], "lincomp")
    u0 = random_datum(model, rng, eps, 6, 0.5)
    ev = SemigroupEvolution(model, u0, delta)
    tau = 0.02
    lam = model.lambda_hat
    xi, zeta = -2.0 - tau, 2.0 + tau
    u_tau = ev.at(tau)
    v_tau = bv.w_functional(u_tau, tau, xi, zeta)
    anchor = u_tau.value(0.5 * ((xi + tau) + (zeta - tau)))
    reports = []
    for dt in dts:
        iv = Interval(xi + tau + lam * dt, zeta - tau - lam * dt)
        reports.append(
            linear_comparison_check(model, ev, tau, tau + dt, iv, anchor,
                                    v_tau, eps, constant=constant)
        )
    return reports, {"v_tau": v_tau, "eps": eps}


def check_certifier(ctx, params):
    _reject_unknown(params, {"eps", "substeps", "threshold"}, "certifier")
    model = ctx["model"]
    if model.n != 1:
        raise ScenarioError("certifier check is scalar-only")
    eps = float(params.get("eps", 0.1))
    substeps = int(params.get("substeps", 20))
    threshold = float(params.get("threshold", 0.01))
    T = 4 * eps
    phis = bump_family(0.0, T, -0.4, 1.2, n_t=2, n_x=4)
    reports = []
    for name, (l, r) in (("admissible", ([1.0], [0.0])),
                         ("inadmissible", ([0.0], [1.0]))):
        ev = TravellingJump(l, r, 0.5)
        sol = sample_evolution(ev, eps, T, 3.0, substeps=substeps)
        rep = certify(model, sol, 0.0, T, phis=phis, threshold=threshold)
        reports.append(EstimateReport.build(
            f"certifier_weak_{name}", rep.certified_weak_constant, 1.0, threshold,
            {"eps": eps}))
        if name == "admissible":
            reports.append(EstimateReport.build(
                "certifier_entropy_admissible",
                rep.certified_entropy_constant, 1.0, threshold, {"eps": eps}))
        else:
            # discrimination: pass here means the certifier flags the bad jump
            reports.append(EstimateReport.build(
                "certifier_entropy_inadmissible_flagged",
                threshold, rep.certified_entropy_constant, 1.0,
                {"eps": eps, "certified": rep.certified_entropy_constant}))
    return reports, {}


def check_convergence_rate(ctx, params):
    _reject_unknown(params, {"eps_grid", "delta_ref", "noise"}, "convergence_rate")
    model = ctx["model"]
    if model.n != 1:
        raise ScenarioError("convergence_rate check is scalar-only")
    eps_grid = [float(e) for e in params.get("eps_grid",
                                             [0.1, 0.05, 0.025, 0.0125])]
    if "grid" in ctx["scenario"] and ctx["scenario"]["grid"].get("eps_grid"):
        eps_grid = [float(e) for e in ctx["scenario"]["grid"]["eps_grid"]]
    delta_ref = float(params.get("delta_ref", min(eps_grid) / 4.0))
    noise = float(params.get("noise", 0.05))
    T = ctx["scenario"]["horizon"]
    u0 = ctx["u0"]
    table = convergence_rate(
        model, lambda eps: upwind_burgers(u0, eps, T, 3.0), eps_grid, T, delta_ref
    )
    reports = []
    dists = [d for _, d in table.rows]
    for (e, d), prev in zip(table.rows[1:], dists[:-1]):
        reports.append(EstimateReport.build(
            "rate_monotone", d, prev, 1.0 + noise, {"eps": e}))
    return reports, {
        "rate_rows": [[e, d] for e, d in table.rows],
        "slope": table.slope,
        "sqrt_log_coeff": table.sqrt_log_coeff,
        "sqrt_log_relerr": table.sqrt_log_relerr,
    }


CHECKS = {
    "model_constants": check_model_constants,
    "riemann_exactness": check_riemann_exactness,
    "semigroup_property": check_semigroup_property,
    "lemma21_sweep": check_lemma21_sweep,
    "lemma22_sweep": check_lemma22_sweep,
    "error_estimate": check_error_estimate,
    "linear_comparison": check_linear_comparison,
    "certifier": check_certifier,
    "convergence_rate": check_convergence_rate,
}


def run_checks(scenario: dict, seed: int) -> dict:
    model = build_model(scenario["model"])
    u0 = build_initial(model, scenario["initial"], seed)
    ctx = {"model": model, "u0": u0, "seed": seed, "scenario": scenario}
    results = []
    for chk in scenario["checks"]:
        params = {k: v for k, v in chk.items() if k != "name"}
        reports, extras = CHECKS[chk["name"]](ctx, params)
        results.append({
            "name": chk["name"],
            "passed": all(r.passed for r in reports),
            "extras": extras,
            "reports": [
                {"check": r.check, "lhs": r.lhs, "rhs": r.rhs,
                 "constant": r.constant, "passed": r.passed, "context": r.context}
                for r in reports
            ],
        })
    return {
        "schema": SCHEMA_VERSION,
        "seed": seed,
        "model": scenario["model"]["id"],
        "passed": all(r["passed"] for r in results),
        "checks": results,
    }


def _flat_reports(payload: dict):
    for chk in payload["checks"]:
        for row in chk["reports"]:
            yield EstimateReport(
                row["check"], row["lhs"], row["rhs"], row["constant"],
                row["passed"], row["context"],
            )


def write_outputs(payload: dict, scenario: dict, out_dir, seed: int) -> None:
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n"
    )
    (out / "report.csv").write_text(reports_to_csv(_flat_reports(payload)))
    model = build_model(scenario["model"])
    u0 = build_initial(model, scenario["initial"], seed)
    (out / "u0.txt").write_text(bv.to_text(u0))
    uT = semigroup(model, u0, scenario["horizon"], scenario["delta"])
    (out / "uT.txt").write_text(bv.to_text(uT))


def run_scenario(path, out_dir=None, seed=None, jobs=1) -> int:
    try:
        scenario = load_scenario(path)
        use_seed = scenario["seed"] if seed is None else int(seed)
        payload = run_checks(scenario, use_seed)
        if out_dir is not None:
            write_outputs(payload, scenario, out_dir, use_seed)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for chk in payload["checks"]:
        status = "pass" if chk["passed"] else "FAIL"
        print(f"[{status}] {chk['name']}")
    if not payload["passed"]:
        failing = [c["name"] for c in payload["checks"] if not c["passed"]]
        print(f"failed checks: {', '.join(failing)}", file=sys.stderr)
        return 1
    return 0


def _sweep_cell(args):
    scenario, seed, index = args
    return index, run_checks(scenario, seed)


def sweep(path, out_dir=None, seed=None, jobs=1) -> int:
    try:
        scenario = load_scenario(path)
        if "grid" not in scenario:
            raise ScenarioError("sweep needs a grid section")
        base_seed = scenario["seed"] if seed is None else int(seed)
        grid = scenario["grid"]
        cells = []
        if grid.get("eps_grid"):
            sub = dict(scenario)
            sub["grid"] = {"eps_grid": [float(e) for e in grid["eps_grid"]]}
            cells.append((sub, base_seed, 0))
        elif grid.get("seeds"):
            for i in range(int(grid["seeds"])):
                cells.append((scenario, base_seed + i, i))
        else:
            raise ScenarioError("grid must define eps_grid or seeds")
        if jobs > 1 and len(cells) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = sorted(pool.map(_sweep_cell, cells))
        else:
            results = [_sweep_cell(c) for c in cells]
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    payload = {
        "schema": SCHEMA_VERSION,
        "seed": base_seed,
        "cells": [r for _, r in results],
        "passed": all(r["passed"] for _, r in results),
    }
    slopes = [
        chk["extras"]["slope"]
        for _, r in results
        for chk in r["checks"]
        if "slope" in chk.get("extras", {})
    ]
    if slopes:
        payload["slope_summary"] = {
            "min": min(slopes), "max": max(slopes),
            "mean": sum(slopes) / len(slopes),
        }
    if out_dir is not None:
        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n"
        )
        rows = [r for _, cell in results for r in _flat_reports(cell)]
        (out / "report.csv").write_text(reports_to_csv(rows))
    n_pass = sum(1 for _, r in results if r["passed"])
    print(f"sweep: {n_pass}/{len(results)} cells passed")
    if slopes:
        print(f"fitted slope: {payload['slope_summary']['mean']:.3f}")
    return 0 if payload["passed"] else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hyplab",
                                     description="conservation-law estimate checks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("verify", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)
    fn = run_scenario if args.command == "verify" else sweep
    return fn(args.scenario, out_dir=args.out, seed=args.seed, jobs=args.jobs)


if __name__ == "__main__":
    sys.exit(main())
