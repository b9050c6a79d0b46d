"""Experiment drivers behind the command line: single runs, the two worked
examples, the harmless-delay check and the randomized consistency sweep.

Every driver returns a JSON-ready summary dict and writes its CSV outputs
into ``out`` (created if missing).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import (
    OutcomeKind,
    classify,
    delta_thresholds,
    monotone_on_grid,
    predicted_outcome,
    regime_at,
    threshold_functions,
)
from .config import RunConfig
from .eigen import delayed_scalar_principal, mu1
from .errors import ConfigError, LvstageError, NonConvergence
from .grid import Grid
from .model import ModelParams
from .profiles import sample
from .simulate import (
    SimConfig,
    Variant,
    dt_bound,
    harmless_delay_check,
    simulate,
    with_targets,
    write_trajectory_csv,
)
from .steady import solve_coexistence, solve_theta

log = logging.getLogger(__name__)

#: strictly positive growth profiles on (0, pi) used by the sweep
PROFILE_CATALOG = (
    "1",
    "1 + 0.5*cos(x)",
    "1 - 0.5*cos(x)",
    "1.5 + sin(x)",
    "exp(-x/2) + 0.5",
    "2 - 0.5*x",
    "1 + 0.3*cos(2*x)",
)


def _out_dir(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_summary(summary: dict, out) -> Path:
    path = _out_dir(out) / "summary.json"
    path.write_text(json.dumps(summary, indent=2, default=_jsonable) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, os.PathLike):
        return str(obj)
    if hasattr(obj, "value"):
        return obj.value
    return str(obj)


def _finite(x):
    return None if x is None or not math.isfinite(x) else float(x)


# -- observation --------------------------------------------------------------


@dataclass
class Observation:
    kind: str  # an OutcomeKind value, or "NoConvergence"
    t_final: float
    reached_at: float | None
    distance: float | None  # sup distance of the final state to the matched state
    wall_time: float
    detail: dict = field(default_factory=dict)


def observe(
    params: ModelParams,
    grid: Grid,
    *,
    t_end: float,
    u0="1",
    v0="1",
    dt: float = 0.02,
    conv_tol: float = 1e-3,
    variant=Variant.local,
) -> Observation:
    """Outcome of a forward simulation, judged without the region label.

    The run watches only the two semitrivial states.  If neither is held for
    the dwell time, the final state is polished by Newton; a positive steady
    state within ``conv_tol`` of it counts as observed coexistence.
    """
    start = time.perf_counter()
    m1, m2 = params.growth(grid)
    th1 = solve_theta(params.d1, params.tau1, params.gamma1, m1, grid).theta
    th2 = solve_theta(params.d2, params.tau2, params.gamma2, m2, grid).theta
    zero = np.zeros(grid.n)
    dt = min(dt, 0.9 * dt_bound(params, grid, u0, v0, variant))
    cfg = SimConfig(
        params, grid, dt, t_end, variant=Variant(variant), u0=u0, v0=v0,
        snapshot_every=t_end, targets={"U_wins": (th1, zero), "V_wins": (zero, th2)},
        conv_tol=conv_tol, stationary_tol=conv_tol / 100,
    )
    traj = simulate(cfg)
    U, V = traj.final
    if traj.reached is not None:
        return Observation(
            traj.reached, traj.t_final, traj.converged_at,
            float(traj.distances[traj.reached][-1]), time.perf_counter() - start,
        )
    try:
        st = solve_coexistence(
            params.d1, params.d2, params.delta1 * m1, params.delta2 * m2,
            params.b, params.c, grid, guess=(U, V), march=False,
        )
        gap = float(max(np.max(np.abs(U - st.U)), np.max(np.abs(V - st.V))))
        if gap < conv_tol:
            return Observation(
                OutcomeKind.UniqueCoexistence.value, traj.t_final, traj.stationary_at, gap,
                time.perf_counter() - start, {"steady_residual": st.residual},
            )
        detail = {"gap_to_polished": gap}
    except NonConvergence as exc:
        detail = {"polish": str(exc)}
    detail["min_distance"] = {k: float(v[-1]) for k, v in traj.distances.items()}
    return Observation("NoConvergence", traj.t_final, None, None, time.perf_counter() - start, detail)


# -- single-purpose commands --------------------------------------------------


def cmd_steady(cfg: RunConfig, out) -> dict:
    grid, params = cfg.grid(), cfg.model()
    m1, m2 = params.growth(grid)
    rows, result = [], {}
    for name, d, tau, gamma, m in (
        ("theta1", params.d1, params.tau1, params.gamma1, m1),
        ("theta2", params.d2, params.tau2, params.gamma2, m2),
    ):
        sol = solve_theta(d, tau, gamma, m, grid)
        rows.append(sol.theta)
        result[name] = {
            "residual": sol.residual, "delta": sol.delta, "method": sol.method,
            "iterations": sol.iterations, "min": float(sol.theta.min()), "max": float(sol.theta.max()),
        }
    path = _out_dir(out) / "steady.csv"
    _write_csv(path, ["x", "theta1", "theta2"], np.column_stack([grid.x, *rows]))
    return {"command": "steady", "config": cfg.resolved(), "outputs": [str(path)], "result": result}


def cmd_eigen(cfg: RunConfig, out) -> dict:
    grid = cfg.grid()
    e = cfg.require("eigen")
    w = sample(e["w"], grid)
    base = mu1(e["d"], w, grid)
    result = {"mu1": base.value, "residual": base.residual, "iterations": base.iterations}
    if e["tau"] > 0:
        m, q = sample(e["m"], grid, "relaxed"), sample(e["q"], grid)
        result["delayed_principal"] = delayed_scalar_principal(e["d"], e["tau"], e["gamma"], m, q, grid)
    path = _out_dir(out) / "eigenfunction.csv"
    _write_csv(path, ["x", "phi"], np.column_stack([grid.x, base.eigenfunction]))
    return {"command": "eigen", "config": cfg.resolved(), "outputs": [str(path)], "result": result}


def cmd_classify(cfg: RunConfig, out) -> dict:
    grid, params = cfg.grid(), cfg.model()
    label = classify(params, grid, cfg["run"]["tol_neutral"])
    outcome = predicted_outcome(label, params, grid)
    return {
        "command": "classify",
        "config": cfg.resolved(),
        "outputs": [],
        "result": {
            "region": label.region.value,
            "mu_uv": label.mu_uv,
            "mu_vu": label.mu_vu,
            "near_neutral": label.near_neutral,
            "predicted": outcome.kind.value,
            "steady_residual": outcome.residual,
        },
        "tolerances": {"neutral": label.tol_neutral},
    }


def _sim_config(cfg: RunConfig, params: ModelParams, grid: Grid, **over) -> SimConfig:
    s = cfg["simulation"]
    kw = dict(
        dt=s["dt"], t_end=s["t_end"], variant=Variant(s["variant"]), u0=s["u0"], v0=s["v0"],
        dtilde1=s["dtilde1"], dtilde2=s["dtilde2"], kernel_terms=s["kernel_terms"],
        snapshot_every=s["snapshot_every"], conv_tol=s["conv_tol"], dwell=s["dwell"],
        stop_on_convergence=s["stop_on_convergence"],
    )
    kw.update(over)
    try:
        return SimConfig(params, grid, **kw)
    except LvstageError as exc:
        raise ConfigError("simulation", str(exc)) from exc


def cmd_simulate(cfg: RunConfig, out) -> dict:
    grid, params = cfg.grid(), cfg.model()
    sim = _sim_config(cfg, params, grid)
    predicted = None
    if params.bc <= 1 and sim.variant in (Variant.local, Variant.nodelay):
        p = params if sim.variant is Variant.local else params.replace(tau1=0, tau2=0)
        label = classify(p, grid, cfg["run"]["tol_neutral"])
        outcome = predicted_outcome(label, p, grid)
        predicted = outcome.kind.value
        sim = with_targets(sim, outcome)
    traj = simulate(sim)
    path = _out_dir(out) / "trajectory.csv"
    write_trajectory_csv(traj, grid, path)
    U, V = traj.final
    return {
        "command": "simulate",
        "config": cfg.resolved(),
        "outputs": [str(path)],
        "result": {
            "predicted": predicted,
            "reached": traj.reached,
            "converged_at": traj.converged_at,
            "t_final": traj.t_final,
            "steps": traj.steps,
            "min_U": float(np.min(traj.U)),
            "min_V": float(np.min(traj.V)),
            "final_distance": {k: float(v[-1]) for k, v in traj.distances.items()},
            "wall_time": traj.wall_time,
        },
        "tolerances": {"conv_tol": sim.conv_tol, "dwell": sim.dwell, "dt": sim.dt},
    }


# -- worked examples ----------------------------------------------------------


def _check_identical(params: ModelParams):
    checks = {
        "d2": params.d1 == params.d2,
        "gamma2": params.gamma1 == params.gamma2,
        "b": params.b == 1.0,
        "c": params.c == 1.0,
        "m2": str(params.m1) == str(params.m2),
    }
    for key, ok in checks.items():
        if not ok:
            raise ConfigError(key, "the identical-species example needs d1 = d2, gamma1 = gamma2, b = c = 1, m1 = m2")


def cmd_example_a(cfg: RunConfig, out) -> dict:
    """Identical species that differ only in maturation delay: the one with
    the shorter delay wins; equal delays give a continuum of steady states."""
    grid, base = cfg.grid(), cfg.model()
    _check_identical(base)
    ex, s = cfg["example_a"], cfg["simulation"]
    tol = cfg["run"]["tol_neutral"]
    plane, rows = [], []
    worst_family = 0.0
    for t1 in ex["taus"]:
        for t2 in ex["taus"]:
            params = base.replace(tau1=t1, tau2=t2)
            label = classify(params, grid, tol)
            outcome = predicted_outcome(label, params, grid)
            plane.append((t1, t2, label.region.value))
            expected = (
                OutcomeKind.U_wins if t1 < t2 else OutcomeKind.V_wins if t1 > t2 else OutcomeKind.ContinuumAttractor
            )
            row = {
                "tau1": t1, "tau2": t2, "label": label.region.value, "mu_uv": label.mu_uv,
                "mu_vu": label.mu_vu, "predicted": outcome.kind.value, "expected": expected.value,
                "observed": "", "agree": "", "family_residual": "", "wall_time": "",
            }
            if outcome.kind is OutcomeKind.ContinuumAttractor:
                row["family_residual"] = outcome.residual
                worst_family = max(worst_family, outcome.residual)
            elif ex["simulate"]:
                obs = observe(params, grid, t_end=ex["t_end"], u0=s["u0"], v0=s["v0"],
                              dt=s["dt"], conv_tol=s["conv_tol"])
                row.update(observed=obs.kind, agree=obs.kind == outcome.kind.value, wall_time=obs.wall_time)
            rows.append(row)
    d = _out_dir(out)
    with open(d / "region_plane.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau1", "tau2", "label"])
        w.writerows(plane)
    _write_dicts(d / "sweep.csv", rows)
    simulated = [r for r in rows if r["observed"]]
    return {
        "command": "example-a",
        "config": cfg.resolved(),
        "outputs": [str(d / "region_plane.csv"), str(d / "sweep.csv")],
        "result": {
            "points": len(rows),
            "labels_as_expected": all(r["predicted"] == r["expected"] for r in rows),
            "simulated": len(simulated),
            "simulated_agree": sum(bool(r["agree"]) for r in simulated),
            "max_family_residual": worst_family,
        },
        "tolerances": {"neutral": tol, "family_residual": 1e-8, "conv_tol": s["conv_tol"]},
    }


def cmd_example_b(cfg: RunConfig, out) -> dict:
    """Only the first species matures with a delay; sweep its survival
    factor and locate the competitive regimes in gamma1*tau1."""
    grid, base = cfg.grid(), cfg.model()
    if base.tau2 != 0 or base.gamma2 != 0:
        raise ConfigError("tau2", "the one-delay example needs tau2 = gamma2 = 0")
    ex, s = cfg["example_b"], cfg["simulation"]
    tol = cfg["run"]["tol_neutral"]
    m1, m2 = base.growth(grid)
    report = delta_thresholds(base.d1, base.d2, base.b, base.c, m1, m2, grid, tol)
    f1, f2 = threshold_functions(base.d1, base.d2, base.b, base.c, m1, m2, grid)
    mono1, deltas, v1 = monotone_on_grid(f1, increasing=False)
    mono2, _, v2 = monotone_on_grid(f2, increasing=True)
    undelayed = classify(base.replace(tau1=0.0, gamma1=0.0), grid, tol)

    cuts = sorted(-math.log(t) for t in (report.delta1, report.delta2) if t is not None and t < 1)
    probes = sorted({round(x, 12) for c in cuts for x in (c - ex["margin"], c + ex["margin"]) if x > 0})
    if not probes:
        probes = [ex["margin"], 1.0]
    rows = []
    for sval in probes:
        params = base.replace(tau1=ex["tau1"], gamma1=sval / ex["tau1"])
        expected = regime_at(report, sval)
        label = classify(params, grid, tol)
        outcome = predicted_outcome(label, params, grid)
        row = {"gamma1_tau1": sval, "delta": math.exp(-sval), "regime": expected,
               "label": label.region.value, "predicted": outcome.kind.value, "observed": "", "agree": ""}
        if ex["simulate"]:
            obs = observe(params, grid, t_end=ex["t_end"], u0=s["u0"], v0=s["v0"],
                          dt=s["dt"], conv_tol=s["conv_tol"])
            row.update(observed=obs.kind, agree=obs.kind == expected)
        rows.append(row)
    d = _out_dir(out)
    _write_csv(d / "thresholds.csv", ["delta", "f1", "f2"], np.column_stack([deltas, v1, v2]))
    _write_dicts(d / "spot_checks.csv", rows)
    return {
        "command": "example-b",
        "config": cfg.resolved(),
        "outputs": [str(d / "thresholds.csv"), str(d / "spot_checks.csv")],
        "result": {
            "undelayed_region": undelayed.region.value,
            "case": report.case.value,
            "delta1": report.delta1,
            "delta2": report.delta2,
            "delta_tilde": report.delta_tilde,
            "f1_at_1": report.f1_at_1,
            "f2_at_1": report.f2_at_1,
            "regimes": [[lo, _finite(hi), name] for lo, hi, name in report.regimes],
            "f1_decreasing": mono1,
            "f2_increasing": mono2,
            "spot_checks": rows,
        },
        "tolerances": {"neutral": tol, "root": 1e-10, "conv_tol": s["conv_tol"]},
    }


def cmd_harmless(cfg: RunConfig, out) -> dict:
    """Delays that only enter the interaction terms leave the outcome unchanged."""
    grid, params = cfg.grid(), cfg.model()
    h, s = cfg["harmless"], cfg["simulation"]
    undelayed = params.replace(tau1=0.0, tau2=0.0, gamma1=0.0, gamma2=0.0)
    label = classify(undelayed, grid, cfg["run"]["tol_neutral"])
    outcome = predicted_outcome(label, undelayed, grid)
    dt = min(s["dt"], 0.9 * dt_bound(params, grid, s["u0"], s["v0"], Variant.nodelay),
             *(0.25 * t for pr in h["pairs"] for t in pr if t > 0))
    report = harmless_delay_check(params, grid, h["pairs"], dt=dt, t_end=h["t_end"],
                                  u0=s["u0"], v0=s["v0"], tol=s["conv_tol"])
    dist = {}
    for pair, (U, V) in report.finals.items():
        dist[f"{pair[0]:g}:{pair[1]:g}"] = {
            name: float(max(np.max(np.abs(U - Ut)), np.max(np.abs(V - Vt))))
            for name, (Ut, Vt) in outcome.targets.items()
        }
    d = _out_dir(out)
    rows = []
    for (t1, t2), (U, V) in report.finals.items():
        rows.extend((t1, t2, x, u, v) for x, u, v in zip(grid.x, U, V))
    _write_csv(d / "finals.csv", ["tau1", "tau2", "x", "U", "V"], np.array(rows))
    return {
        "command": "harmless",
        "config": cfg.resolved(),
        "outputs": [str(d / "finals.csv")],
        "result": {
            "region": label.region.value,
            "predicted": outcome.kind.value,
            "max_mismatch": report.max_mismatch,
            "distance_to_predicted": dist,
        },
        "tolerances": {"mismatch": s["conv_tol"], "dt": dt},
    }


# -- randomized consistency sweep --------------------------------------------


def sample_parameters(rng: np.random.Generator, sw: dict) -> ModelParams:
    d1, d2 = 10 ** rng.uniform(math.log10(sw["d_min"]), math.log10(sw["d_max"]), 2)
    tau1, tau2 = rng.uniform(sw["tau_min"], sw["tau_max"], 2)
    gamma1, gamma2 = rng.uniform(0.0, sw["gamma_max"], 2)
    b, c = rng.uniform(sw["coef_min"], 1.0, 2)
    i, j = rng.integers(len(PROFILE_CATALOG), size=2)
    return ModelParams(
        d1=float(d1), d2=float(d2), tau1=float(tau1), tau2=float(tau2),
        gamma1=float(gamma1), gamma2=float(gamma2), b=float(b), c=float(c),
        m1=PROFILE_CATALOG[i], m2=PROFILE_CATALOG[j],
    )


def _sweep_point(job):
    index, params, length, n, t_end, tol, u0, v0, dt, conv_tol = job
    grid = Grid(length, n)
    row = {"index": index, **params.as_dict()}
    try:
        label = classify(params, grid, tol)
        outcome = predicted_outcome(label, params, grid)
        row.update(label=label.region.value, mu_uv=label.mu_uv, mu_vu=label.mu_vu,
                   near_neutral=label.near_neutral, predicted=outcome.kind.value)
    except LvstageError as exc:
        row.update(label="", mu_uv="", mu_vu="", near_neutral=False, predicted="", error=str(exc))
        return row
    obs = observe(params, grid, t_end=t_end, u0=u0, v0=v0, dt=dt, conv_tol=conv_tol)
    row.update(observed=obs.kind, agree=obs.kind == row["predicted"], t_final=obs.t_final,
               wall_time=obs.wall_time, detail=json.dumps(obs.detail) if obs.detail else "")
    return row


@dataclass
class SweepResult:
    rows: list
    agreement: float
    counted: int
    excluded_neutral: int
    failures: list


def consistency_sweep(
    sw: dict, *, seed: int, grid: Grid, u0="1", v0="1", dt=0.02, conv_tol=1e-3,
    tol_neutral=1e-7, workers: int | None = None,
) -> SweepResult:
    rng = np.random.default_rng(seed)
    jobs = [
        (k, sample_parameters(rng, sw), grid.length, grid.n, sw["t_end"], tol_neutral, u0, v0, dt, conv_tol)
        for k in range(sw["n_points"])
    ]
    workers = workers or int(os.environ.get("LVSTAGE_THREADS", "1"))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    counted = [r for r in rows if not r.get("near_neutral") and r.get("predicted")]
    agree = sum(bool(r.get("agree")) for r in counted)
    failures = [r["index"] for r in counted if not r.get("agree")]
    rate = agree / len(counted) if counted else 1.0
    return SweepResult(rows, rate, len(counted), len(rows) - len(counted), failures)


def cmd_consistency_sweep(cfg: RunConfig, out) -> dict:
    sw, s = cfg["sweep"], cfg["simulation"]
    if sw["d_min"] > sw["d_max"] or sw["tau_min"] > sw["tau_max"]:
        raise ConfigError("sweep", "lower bounds must not exceed upper bounds")
    if sw["tau_min"] <= 0:
        raise ConfigError("tau_min", "sampled delays must be positive")
    res = consistency_sweep(
        sw, seed=cfg["run"]["seed"], grid=cfg.grid(), u0=s["u0"], v0=s["v0"], dt=s["dt"],
        conv_tol=s["conv_tol"], tol_neutral=cfg["run"]["tol_neutral"],
    )
    path = _out_dir(out) / "sweep.csv"
    _write_dicts(path, res.rows)
    return {
        "command": "sweep",
        "config": cfg.resolved(),
        "outputs": [str(path)],
        "result": {
            "points": len(res.rows),
            "counted": res.counted,
            "excluded_neutral": res.excluded_neutral,
            "agreement": res.agreement,
            "disagreeing_points": res.failures,
        },
        "tolerances": {"neutral": cfg["run"]["tol_neutral"], "conv_tol": s["conv_tol"]},
    }


# -- csv helpers ---------------------------------------------------------------


def _write_csv(path, header, data):
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt="%.17g")


def _write_dicts(path, rows):
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, restval="")
        w.writeheader()
        w.writerows(rows)


COMMANDS = {
    "steady": cmd_steady,
    "eigen": cmd_eigen,
    "classify": cmd_classify,
    "simulate": cmd_simulate,
    "example-a": cmd_example_a,
    "example-b": cmd_example_b,
    "harmless": cmd_harmless,
    "sweep": cmd_consistency_sweep,
}
