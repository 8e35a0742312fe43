"""Acceptance suite: one pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""

import sys
import time

import numpy as np
import pytest
from scipy import linalg

from spdelab.config import build_model, build_rng, build_scheme, default_config, initial_datum
from spdelab.control import ControlFamily, CostSpec, control_cost, cost_evaluate, optimize_control
from spdelab.diagnostics import (
    UPSILON_M1,
    UPSILON_M2,
    UpsilonSpec,
    default_delta,
    energy_ledger,
    l1_contraction_probe,
    refinement_study,
    upsilon_eval,
)
from spdelab.ergodic import TestFunctional, boundedness_profile, oscillation_sequence, time_average_measure, weak_feller_probe
from spdelab.grid import grad_lp_norm
from spdelab.noise import RngPolicy
from spdelab.scheme import ControlSignal, project_control, projection_error, run_trajectory, smooth_initial

TOL_NL = 1e-10
LEDGER_FACTOR = 10.0
ORACLE_TOL = 1e-9
SMOOTHING_SLACK = 1e-8
PROJECTION_ORDER = 0.9
TREND_ALPHA = 0.05
GAP_RATIO, GAP_BAND = 2.0, 0.3
MARTINGALE_SE = 3.0
UPSILON_SAMPLES = 10**5
COST_TOL = 1e-12
OPTIMIZER_RUNS = 20
PROFILE_SE = 3.0
RADII = (1.0, 2.0, 4.0, 8.0)
FELLER_ALPHA = 0.05
FELLER_PATHS = 256


@pytest.fixture(scope="module")
def base():
    return default_config()


@pytest.fixture(scope="module")
def model(base):
    return build_model(base)


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    assert ok, detail


def info(capsys, number, detail):
    with capsys.disabled():
        print(f"\n[INFO] criterion {number}: {detail}")


def with_p(base, p):
    cfg = default_config()
    cfg["model"]["flux"]["p"] = p
    return build_model(cfg)


def test_criterion_01_step_residuals(capsys, base, model):
    cfg = build_scheme(base, steps=256, tol_nl=TOL_NL)
    rng = build_rng(base)
    t0 = time.perf_counter()
    worst = 0.0
    for j in range(10):
        tr = run_trajectory(model, cfg, None, rng, j)
        worst = max(worst, float(np.max(tr.residuals / (TOL_NL * (1.0 + tr.rhs_norms)))))
    wall = time.perf_counter() - t0
    ok = worst <= 1.0 and wall < 60.0
    report(capsys, 1, ok, f"10 paths x 256 steps, max residual/bound = {worst:.3g}, wall {wall:.1f} s (< 60 s)")


def test_criterion_02_energy_identity(capsys, base):
    rng = build_rng(base)
    worst, steps = 0.0, 0
    for p in (3.0, 4.0):
        m = with_p(base, p)
        for n in (64, 256):
            cfg = build_scheme(base, steps=n, tol_nl=TOL_NL)
            for j in range(4):
                led = energy_ledger(run_trajectory(m, cfg, None, rng, j), m, TOL_NL)
                worst = max(worst, float(np.max(np.abs(led.residual) / led.tolerance)))
                steps += led.residual.size
    ok = worst <= 1.0
    report(capsys, 2, ok, f"{steps} steps over p in {{3,4}}, kappa in {{T/64,T/256}}, max |r|/(10 tol (1+rhs)) = {worst:.3g}")


def test_criterion_03_linear_oracle(capsys, base):
    cfg = default_config()
    cfg["model"]["flux"].update(kind="oracle", p=2.0, amp_x=0.0, amp_lambda=0.0, eps_reg=0.0)
    cfg["model"]["convection"].update(mode="linear", b=0.0)
    m = build_model(cfg)
    scheme = build_scheme(cfg, steps=256, oracle=True, noise=False)
    tr = run_trajectory(m, scheme, smooth=False)
    mesh, k = m.mesh, scheme.kappa
    M, K = mesh.mass_dense(), mesh.stiffness_dense()
    A = M + k * K
    ab = np.array([np.r_[0.0, np.diag(A, 1)], np.diag(A), np.r_[np.diag(A, -1), 0.0]])
    u, err = m.u0.copy(), 0.0
    for n in range(256):
        u = linalg.solve_banded((1, 1), ab, M @ u)
        err = max(err, float(np.max(np.abs(u - tr.states[n + 1]))))
    report(capsys, 3, err <= ORACLE_TOL, f"M = {mesh.node_count}, 256 steps, max nodal error {err:.2e} (<= {ORACLE_TOL:g})")


def test_criterion_04_smoothing_inequality(capsys, base, model):
    mesh = model.mesh
    x = (mesh.nodes - mesh.a) / mesh.length
    spec = dict(base["initial"], family="random_h1", amplitude=1.0)
    data = {
        "sin": np.sin(np.pi * x),
        "x(1-x)": x * (1.0 - x),
        "random H1": initial_datum(mesh, spec, build_rng(base)),
    }
    worst = -np.inf
    for u0 in data.values():
        for kappa in (1e-1, 1e-2, 1e-3):
            u, _ = smooth_initial(u0, kappa, model)
            lhs = 0.5 * mesh.l2_norm_sq(u) + kappa * grad_lp_norm(mesh, u, model.flux.p)
            worst = max(worst, lhs - 0.5 * mesh.l2_norm_sq(u0))
    report(capsys, 4, worst <= SMOOTHING_SLACK, f"3 data x 3 kappa, max slack {worst:.3e} (<= {SMOOTHING_SLACK:g})")


def test_criterion_05_projection(capsys, model):
    mesh = model.mesh
    rng = np.random.default_rng(5)
    kappa = 1.0 / 32
    idem = expand = True
    for _ in range(100):
        freqs, phases = rng.uniform(0, 30, 5), rng.uniform(0, 2 * np.pi, 5)
        fields = rng.normal(size=(5, mesh.node_count))
        U = ControlSignal.from_function(lambda t, f=freqs, ph=phases, w=fields: np.sin(f * t + ph) @ w, 1.0)
        P = project_control(U, kappa, order=12)
        idem &= bool(np.array_equal(project_control(P, kappa).values, P.values))
        expand &= P.norm(mesh, 1.0) <= U.norm(mesh, 1.0) * (1.0 + 1e-12)
    w = np.sin(np.pi * mesh.nodes)
    f = ControlSignal.from_function(lambda t: t * w, 1.0)
    ks = np.array([1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128])
    errs = [projection_error(f, project_control(f, k), mesh, 1.0) for k in ks]
    order = float(np.polyfit(np.log(ks), np.log(errs), 1)[0])
    ok = idem and expand and order >= PROJECTION_ORDER
    report(capsys, 5, ok, f"idempotent {idem}, non-expansive on 100 signals {expand}, order {order:.3f} (>= {PROJECTION_ORDER})")


def test_criterion_06_apriori_stability(capsys, base, model):
    cfg = build_scheme(base)
    levels = [64, 128, 256]
    rest = np.zeros(model.mesh.node_count)
    indep = refinement_study(model, cfg, levels, 64, build_rng(base), u0=rest, coupled=False)
    coupled = refinement_study(model, cfg, levels, 64, build_rng(base), u0=rest, coupled=True)
    pvals = {k: v["p_upward"] for k, v in indep["trends"].items()}
    ratios = coupled["gap_ratios"]
    no_trend = all(p >= TREND_ALPHA for p in pvals.values())
    halves = all(abs(r - GAP_RATIO) <= GAP_BAND for r in ratios)
    paired = {k: round(v["p_upward"], 3) for k, v in coupled["trends"].items()}
    info(capsys, 6, f"paired per-path trend p-values (common noise) {paired}")
    nonzero = refinement_study(model, cfg, levels, 64, build_rng(base), coupled=False)
    info(capsys, 6, "from the configured nonzero datum: " + str({k: round(v["p_upward"], 3) for k, v in nonzero["trends"].items()}))
    detail = (
        f"upward-trend p-values {({k: round(p, 3) for k, p in pvals.items()})} (all >= {TREND_ALPHA}), "
        f"gap ratios {[round(r, 3) for r in ratios]} (2.0 +- 0.3)"
    )
    report(capsys, 6, no_trend and halves, detail)


def test_criterion_07_pathwise_uniqueness(capsys, base, model):
    cfg = build_scheme(base)
    rng = build_rng(base)
    U = ControlSignal(values=np.outer(np.ones(cfg.steps), np.sin(np.pi * model.mesh.nodes)))
    a = run_trajectory(model, cfg, U, rng, 3)
    b = run_trajectory(model, cfg, U, rng, 3)
    same = bool(np.array_equal(a.states, b.states))
    probe = l1_contraction_probe(model, cfg, model.u0, model.u0.copy(), rng, 8)
    report(capsys, 7, same and probe.identically_zero, f"bit-identical reruns {same}, zero L1 curve {probe.identically_zero}")


def test_criterion_08_jump_martingale(capsys, base, model):
    cfg = build_scheme(base, steps=10**4, horizon=10**4 / 256)
    tr = run_trajectory(model, cfg, None, build_rng(base), 0)
    nodes = np.linspace(3, model.mesh.node_count - 4, 10).astype(int)
    inc = tr.jump_fields[:, nodes]
    z = inc.mean(axis=0) / (inc.std(axis=0, ddof=1) / np.sqrt(inc.shape[0]))
    ok = bool(np.all(np.abs(z) <= MARTINGALE_SE))
    report(capsys, 8, ok, f"10^4 steps, |mean|/se at 10 nodes max {np.max(np.abs(z)):.2f} (<= 3), events {int(tr.jump_counts.sum())}")


def test_criterion_09_upsilon_bounds(capsys):
    rng = np.random.default_rng(9)
    theta = 10.0 ** rng.uniform(-6, 1, UPSILON_SAMPLES)
    r = theta * rng.uniform(-5, 5, UPSILON_SAMPLES) * 10.0 ** rng.uniform(-3, 2, UPSILON_SAMPLES)
    eps = np.finfo(float).eps
    out = np.array([upsilon_eval(UpsilonSpec(float(t)), float(q)) for t, q in zip(theta, r)])
    v, d1, d2 = out[:, 0], out[:, 1], out[:, 2]
    bad = 0
    slack = 4.0 * eps * np.maximum(np.abs(r), theta)
    a = np.abs(r)
    bad += int(np.sum(v > a + slack))
    bad += int(np.sum(v < a - UPSILON_M1 * theta - slack))
    bad += int(np.sum(np.abs(d1) > 1.0 + 4 * eps))
    bad += int(np.sum(d2 < 0.0))
    bad += int(np.sum(d2 > UPSILON_M2 / theta * (1.0 + 4 * eps)))
    report(capsys, 9, bad == 0, f"{UPSILON_SAMPLES} samples, violations {bad}")


def test_criterion_10_cost_and_optimizer(capsys, base, model):
    mesh = model.mesh
    cfg = build_scheme(base, steps=32, noise=False)
    rest = run_trajectory(model, cfg, u0=np.zeros(mesh.node_count))
    c = np.full(mesh.node_count, 0.7)
    got = cost_evaluate(rest, None, CostSpec(u_det=c))
    want = cfg.horizon * mesh.l2_norm_sq(c)
    fam = ControlFamily(mesh, cfg.horizon)
    U = fam.realize(np.array([0.3, -0.2, 0.5, 0.1]), cfg.steps)
    base_cost = control_cost(mesh, U, cfg.kappa)
    homog = max(abs(control_cost(mesh, U * s, cfg.kappa) - s * s * base_cost) for s in (-2.0, 0.5, 3.0))
    closed = abs(got - want) <= COST_TOL and homog <= COST_TOL * max(1.0, base_cost)
    noisy = build_scheme(base, steps=32)
    spec = CostSpec(u_det=np.full(mesh.node_count, 0.3))
    monotone = 0
    for run in range(OPTIMIZER_RUNS):
        res = optimize_control(model, noisy, fam, spec, RngPolicy(1000 + run), budget=12, n_paths=4)
        monotone += bool(np.all(np.diff(res.incumbents) <= 0.0))
    ok = closed and monotone == OPTIMIZER_RUNS
    detail = f"constant offset error {abs(got - want):.1e}, homogeneity error {homog:.1e}, monotone runs {monotone}/{OPTIMIZER_RUNS}"
    report(capsys, 10, ok, detail)


def test_criterion_11_boundedness(capsys, base, model):
    e = base["ergodic"]
    cfg = build_scheme(base, steps=int(e["steps"]), horizon=float(e["horizon"]))
    delta = default_delta(model)
    t0 = time.perf_counter()
    meas = time_average_measure(model, cfg, build_rng(base), 0, float(e["burn_in"]), int(e["stride"]), delta=delta)
    wall = time.perf_counter() - t0
    rows = boundedness_profile(meas, RADII, model, delta)
    within = all(frac <= bound + PROFILE_SE * (se if np.isfinite(se) else 0.0) for _, frac, se, bound in rows)
    margins = meas.min_margin is not None and meas.min_margin >= 0.0
    ok = within and margins and not meas.partial and wall < 600.0
    table = ", ".join(f"R={r:g}: {f:.3g} <= {b:.3g}" for r, f, _, b in rows)
    report(capsys, 11, ok, f"{cfg.steps} steps in {wall:.0f} s, min margin {meas.min_margin:.3g}, {table}")


def test_criterion_12_weak_feller(capsys, base, model):
    mesh = model.mesh
    cfg = build_scheme(base, steps=32, horizon=0.25)
    x = (mesh.nodes - mesh.a) / mesh.length
    phi = TestFunctional("tanh", w=np.sin(np.pi * x))
    v = np.zeros(mesh.node_count)
    seq = oscillation_sequence(mesh, v, 0.5, levels=6)
    rep = weak_feller_probe(model, cfg, build_rng(base), phi, v, seq, paths=FELLER_PATHS)
    ok = rep.rho < 0.0 and rep.p_value < FELLER_ALPHA
    diffs = ", ".join(f"{d:.2e}" for d in rep.differences)
    report(capsys, 12, ok, f"differences [{diffs}], Spearman rho {rep.rho:.2f}, p {rep.p_value:.4f}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
