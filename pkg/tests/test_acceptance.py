"""Acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line (collected in the terminal
summary under "acceptance criteria") and then asserts on the same outcome.
"""

import math
import time

import numpy as np
import pytest

from conftest import record_criterion
from lvstage.classify import OutcomeKind, Region, classify, predicted_outcome
from lvstage.config import parse_config
from lvstage.eigen import (
    LinearizationData,
    cooperative_mu,
    delayed_scalar_principal,
    delayed_system_principal,
    mu1,
    neutral_sign,
    undelayed_system_mu,
)
from lvstage.experiments import cmd_consistency_sweep, cmd_example_a, cmd_example_b
from lvstage.grid import Grid, build_laplacian, heat_kernel
from lvstage.model import ModelParams
from lvstage.profiles import sample
from lvstage.simulate import SimConfig, Variant, check_order_preservation, harmless_delay_check, simulate
from lvstage.steady import rescaled_theta, solve_coexistence, solve_theta

TOL_NEUTRAL = 1e-7
PROFILES = ["1", "1 + 0.5*cos(x)", "1 - 0.5*cos(x)", "1.5 + sin(x)", "exp(-x/2) + 0.5", "2 - 0.5*x"]


def _dense_max_real(M):
    return float(np.max(np.linalg.eigvals(M).real))


def test_criterion_01_two_delay_figure():
    grid = Grid(math.pi, 201)
    with pytest.warns(UserWarning):
        params = ModelParams(d1=0.2, d2=0.2, tau1=0.2, tau2=0.1, gamma1=1.0, gamma2=1.0,
                             m1="x", m2="x", relaxed=True)
        cfg = SimConfig(params, grid, dt=5e-3, t_end=300.0, u0="1 + 0.5*cos(x)", v0="1 + 0.5*cos(x)",
                        snapshot_every=300.0, stop_on_convergence=False)
        start = time.perf_counter()
        traj = simulate(cfg)
        wall = time.perf_counter() - start
        theta2 = solve_theta(0.2, 0.1, 1.0, params.growth(grid)[1], grid).theta
    U, V = traj.final
    sup_u, sup_v = float(np.max(np.abs(U))), float(np.max(np.abs(V - theta2)))
    ok = traj.t_final == pytest.approx(300.0) and sup_u < 1e-2 and sup_v < 1e-2 and wall < 30
    record_criterion(1, "two-delay figure", ok,
                     f"sup|U(T)| = {sup_u:.2e}, sup|V(T) - theta| = {sup_v:.2e}, wall {wall:.1f} s")
    assert ok


def test_criterion_02_identical_species_plane(tmp_path):
    cfg = parse_config("""
[grid]
n = 101
[model]
d1 = 0.2
d2 = 0.2
gamma1 = 1
gamma2 = 1
m1 = x
m2 = x
relaxed = true
[simulation]
dt = 0.01
u0 = 1 + 0.5*cos(x)
v0 = 1 + 0.5*cos(x)
[example_a]
taus = 0.2, 0.4, 0.6, 0.8, 1.0
t_end = 600
""")
    start = time.perf_counter()
    with pytest.warns(UserWarning):
        summary = cmd_example_a(cfg, tmp_path)
    wall = time.perf_counter() - start
    res = summary["result"]
    ok = (
        res["simulated"] == 20 and res["simulated_agree"] == 20 and res["labels_as_expected"]
        and res["max_family_residual"] <= 1e-8 and wall < 600
    )
    record_criterion(2, "identical-species delay plane", ok,
                     f"{res['simulated_agree']}/{res['simulated']} smaller-delay winners, "
                     f"family residual {res['max_family_residual']:.1e}, wall {wall:.0f} s")
    assert ok


def test_criterion_03_eigen_oracles():
    rng = np.random.default_rng(3)
    worst_scalar = worst_system = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 65))
        g = Grid(float(rng.uniform(0.5, 5)), n)
        d = float(10 ** rng.uniform(-2, 1))
        w = rng.uniform(-3, 3, n)
        dense = _dense_max_real(build_laplacian(g, d).to_dense() + np.diag(w))
        worst_scalar = max(worst_scalar, abs(mu1(d, w, g).value - dense))
    for _ in range(100):
        n = int(rng.integers(3, 33))
        g = Grid(float(rng.uniform(0.5, 5)), n)
        d1, d2 = 10 ** rng.uniform(-2, 1, 2)
        a11, a22 = rng.uniform(-3, 3, (2, n))
        a12, a21 = rng.uniform(0, 2, (2, n))
        M = np.block([
            [build_laplacian(g, d1).to_dense() + np.diag(a11), np.diag(a12)],
            [np.diag(a21), build_laplacian(g, d2).to_dense() + np.diag(a22)],
        ])
        worst_system = max(worst_system, abs(cooperative_mu(d1, d2, a11, a12, a21, a22, g).value - _dense_max_real(M)))
    ok = worst_scalar <= 1e-8 and worst_system <= 1e-8
    record_criterion(3, "eigen oracle equivalence", ok,
                     f"max error scalar {worst_scalar:.1e}, system {worst_system:.1e} (100 each)")
    assert ok


def test_criterion_04_steady_state_identity():
    rng = np.random.default_rng(4)
    g = Grid(math.pi, 101)
    worst = 0.0
    for _ in range(20):
        d, delta = float(10 ** rng.uniform(-1.5, 0.7)), float(rng.uniform(0.05, 1))
        m = sample(PROFILES[rng.integers(len(PROFILES))], g)
        th = rescaled_theta(delta, d, m, g).theta
        worst = max(worst, abs(mu1(d, delta * m - th, g).value))
    ok = worst <= 1e-6
    record_criterion(4, "steady-state identity", ok, f"max |mu1(d, delta m - theta)| = {worst:.1e} (20 draws)")
    assert ok


def _random_params(rng, strong=False):
    b, c = rng.uniform(0.1, 1.0, 2) if not strong else rng.uniform(1.2, 2.0, 2)
    return ModelParams(
        d1=float(10 ** rng.uniform(-1, 0.5)), d2=float(10 ** rng.uniform(-1, 0.5)),
        tau1=float(rng.uniform(0.05, 1)), tau2=float(rng.uniform(0.05, 1)),
        gamma1=float(rng.uniform(0, 1.5)), gamma2=float(rng.uniform(0, 1.5)),
        b=float(b), c=float(c),
        m1=PROFILES[rng.integers(len(PROFILES))], m2=PROFILES[rng.integers(len(PROFILES))],
    )


def test_criterion_05_sign_equivalence():
    rng = np.random.default_rng(5)
    g = Grid(math.pi, 41)
    scalar_checked = scalar_bad = 0
    for _ in range(100):
        d, tau, gamma = float(10 ** rng.uniform(-1.5, 0.7)), float(rng.uniform(0.05, 2)), float(rng.uniform(0, 2))
        m = sample(PROFILES[rng.integers(len(PROFILES))], g)
        q = float(rng.uniform(0, 2)) * sample(PROFILES[rng.integers(len(PROFILES))], g)
        lam = delayed_scalar_principal(d, tau, gamma, m, q, g)
        base = mu1(d, math.exp(-gamma * tau) * m - q, g).value
        if min(abs(lam), abs(base)) < TOL_NEUTRAL:
            continue
        scalar_checked += 1
        scalar_bad += np.sign(lam) != np.sign(base)

    system_checked = system_bad = 0
    kinds = {"semitrivial": 0, "coexistence": 0, "saddle": 0}
    attempts = 0
    while system_checked < 20 and attempts < 200:
        attempts += 1
        strong = attempts % 4 == 0
        p = _random_params(rng, strong)
        m1, m2 = p.growth(g)
        r1, r2 = p.delta1 * m1, p.delta2 * m2
        if attempts % 2:
            th1 = solve_theta(p.d1, p.tau1, p.gamma1, m1, g).theta
            u, v, kind = th1, np.zeros(g.n), "semitrivial"
        else:
            guess = (np.maximum((r1 - p.c * r2) / (1 - p.bc), 0.05), np.maximum((r2 - p.b * r1) / (1 - p.bc), 0.05))
            try:
                st = solve_coexistence(p.d1, p.d2, r1, r2, p.b, p.c, g, guess=guess, march=False)
            except Exception:
                continue
            u, v, kind = st.U, st.V, "saddle" if strong else "coexistence"
        lin = LinearizationData.at(u, v, p.b, p.c)
        s = delayed_system_principal(lin, p, g)
        h0 = undelayed_system_mu(lin, p, g).value
        if min(abs(s), abs(h0)) < TOL_NEUTRAL:
            continue
        system_checked += 1
        kinds[kind] += 1
        system_bad += np.sign(s) != np.sign(h0)
    ok = scalar_checked >= 90 and scalar_bad == 0 and system_checked == 20 and system_bad == 0
    record_criterion(5, "sign equivalence", ok,
                     f"scalar {scalar_checked - scalar_bad}/{scalar_checked}, system "
                     f"{system_checked - system_bad}/{system_checked} {kinds}")
    assert ok


def test_criterion_06_order_preservation():
    rng = np.random.default_rng(6)
    g = Grid(math.pi, 41)
    worst, runs = 0.0, 0
    for variant in (Variant.local, Variant.interaction):
        for _ in range(10):
            p = _random_params(rng)
            base_u = rng.uniform(0.1, 1.5, g.n)
            base_v = rng.uniform(0.1, 1.5, g.n)
            gap_u, gap_v = rng.uniform(0, 0.5, (2, g.n))
            a = SimConfig(p, g, dt=0.01, t_end=50, variant=variant, u0=base_u + gap_u, v0=base_v)
            b = SimConfig(p, g, dt=0.01, t_end=50, variant=variant, u0=base_u, v0=base_v + gap_v)
            worst = max(worst, check_order_preservation(a, b, tol=1e-10).max_violation)
            runs += 1
    ok = worst <= 1e-10 and runs == 20
    record_criterion(6, "order preservation", ok, f"max violation {worst:.1e} over {runs} pairs, t in [0, 50]")
    assert ok


def test_criterion_07_consistency_sweep(tmp_path):
    cfg = parse_config("""
seed = 42
[grid]
n = 41
[model]
d1 = 1
d2 = 1
[simulation]
dt = 0.02
[sweep]
n_points = 50
""")
    summary = cmd_consistency_sweep(cfg, tmp_path)
    res = summary["result"]
    ok = res["points"] >= 50 and res["agreement"] == 1.0 and res["counted"] > 0
    record_criterion(7, "classification consistency", ok,
                     f"{res['agreement']:.0%} agreement on {res['counted']} points "
                     f"({res['excluded_neutral']} neutral excluded), seed 42")
    assert ok


def test_criterion_08_one_delay_thresholds(tmp_path):
    cfg = parse_config("""
[grid]
n = 101
[model]
d1 = 0.1
d2 = 1
b = 0.8
c = 0.5
m1 = 2 + 0.5*cos(x)
m2 = 1 + 0.3*cos(x)
[simulation]
dt = 0.02
conv_tol = 1e-3
[example_b]
tau1 = 1
margin = 0.2
t_end = 1500
""")
    res = cmd_example_b(cfg, tmp_path)["result"]
    spots = res["spot_checks"]
    ok = (
        res["undelayed_region"] == Region.S_u.value and res["f1_decreasing"] and res["f2_increasing"]
        and res["delta1"] <= res["delta2"] + 1e-8 and len(spots) == 4 and all(s["agree"] for s in spots)
    )
    record_criterion(8, "one-delay thresholds", ok,
                     f"case {res['case']}, delta1 = {res['delta1']:.6f} <= delta2 = {res['delta2']:.6f}, "
                     f"{sum(bool(s['agree']) for s in spots)}/{len(spots)} spot simulations agree")
    assert ok


def test_criterion_09_harmless_delays():
    g = Grid(math.pi, 81)
    cases = {
        "S_minus": ModelParams(d1=1, d2=1, b=0.5, c=0.5, m1="1 + 0.5*cos(x)", m2="1"),
        "S_v": ModelParams(d1=0.3, d2=0.8, b=0.4, c=0.6, m1="1 + 0.5*cos(x)", m2="1.5 + sin(x)"),
    }
    details, ok = [], True
    for name, p in cases.items():
        label = classify(p, g)
        rep = harmless_delay_check(p, g, [(0.5, 0.8), (2.0, 1.0)], dt=0.01, t_end=300, tol=1e-3)
        ok &= label.region.value == name and rep.max_mismatch <= 1e-3
        details.append(f"{name} mismatch {rep.max_mismatch:.1e}")
    record_criterion(9, "harmless delays", ok, ", ".join(details))
    assert ok


def test_criterion_10_nonlocal_limit():
    g = Grid(math.pi, 81)
    p = ModelParams(d1=0.5, d2=0.8, tau1=0.3, tau2=0.2, gamma1=0.5, gamma2=1.0, b=0.4, c=0.3,
                    m1="1 + 0.5*cos(x)", m2="1.5 + sin(x)")
    kw = dict(dt=0.01, t_end=100, u0="1 + 0.5*cos(x)", v0="0.5", snapshot_every=100, stop_on_convergence=False)
    local = simulate(SimConfig(p, g, **kw))
    near = simulate(SimConfig(p, g, variant="nonlocal", dtilde1=1e-4, dtilde2=1e-4, **kw))
    gap = max(float(np.max(np.abs(local.U[-1] - near.U[-1]))), float(np.max(np.abs(local.V[-1] - near.V[-1]))))
    row_err = sym_err = 0.0
    for dtilde, t in ((1e-4, 0.3), (0.5, 0.2), (2.0, 1.0)):
        K = heat_kernel(g, dtilde, t)
        row_err = max(row_err, float(np.max(np.abs(K.row_sums() - 1))))
        sym_err = max(sym_err, float(np.max(np.abs(K.entries - K.entries.T))))
    ok = gap <= 1e-2 and row_err <= 1e-8 and sym_err <= 1e-12
    record_criterion(10, "nonlocal to local limit", ok,
                     f"sup gap {gap:.1e} at t = 100, kernel row-sum error {row_err:.1e}, asymmetry {sym_err:.1e}")
    assert ok
