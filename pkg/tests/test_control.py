import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdelab.control import (
    ControlFamily,
    CostSpec,
    TerminalPayoff,
    control_cost,
    cost_evaluate,
    mc_cost_estimate,
    optimize_control,
)
from spdelab.errors import ConfigurationError, DataError
from spdelab.noise import RngPolicy
from spdelab.scheme import ControlSignal, SchemeConfig, run_trajectory

from conftest import make_model


def test_payoff_examples(mesh):
    u = np.sin(np.pi * mesh.nodes)
    norm = np.sqrt(mesh.l2_norm_sq(u))
    assert TerminalPayoff()(mesh, u) == 0.0
    assert TerminalPayoff("distance", scale=2.0, offset=1.0)(mesh, u) == pytest.approx(2 * norm + 1)
    clip = TerminalPayoff("clipped", scale=3.0, target=u, lo=-0.1, hi=0.1)
    assert clip(mesh, u) == pytest.approx(0.3)
    assert clip.lipschitz(mesh) == pytest.approx(3 * norm)
    with pytest.raises(ConfigurationError):
        TerminalPayoff("quadratic")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_payoff_lipschitz(seed):
    from spdelab.grid import build_mesh

    mesh = build_mesh(15)
    rng = np.random.default_rng(seed)
    a, b, w = rng.normal(size=(3, 15))
    for psi in (TerminalPayoff("distance", scale=1.5, target=w), TerminalPayoff("clipped", target=w)):
        gap = abs(psi(mesh, a) - psi(mesh, b))
        assert gap <= psi.lipschitz(mesh) * np.sqrt(mesh.l2_norm_sq(a - b)) + 1e-12


def test_cost_examples(mesh):
    model = make_model(mesh, u0=np.zeros(63))
    cfg = SchemeConfig(steps=4, noise=False)
    tr = run_trajectory(model, cfg)
    assert cost_evaluate(tr, None, CostSpec()) == 0.0
    # constant target c: running cost int_0^T ||0 - c||^2 dt = c^2 |D| T
    assert cost_evaluate(tr, None, CostSpec(u_det=np.full(63, 0.5))) == pytest.approx(
        cfg.kappa * 4 * mesh.l2_norm_sq(np.full(63, 0.5))
    )
    U = ControlSignal(values=np.ones((4, 63)))
    assert control_cost(mesh, U, cfg.kappa, 2.0) == pytest.approx(2.0 * mesh.l2_norm_sq(np.ones(63)))


def test_cost_rejects_mismatched_control(mesh):
    model = make_model(mesh)
    tr = run_trajectory(model, SchemeConfig(steps=4, noise=False))
    with pytest.raises(DataError):
        cost_evaluate(tr, ControlSignal(values=np.zeros((8, 63))), CostSpec())
    with pytest.raises(DataError):
        cost_evaluate(tr, ControlSignal.from_function(lambda t: np.zeros(63), 1.0), CostSpec())


def test_gram_matches_realized_control_term(mesh):
    fam = ControlFamily(mesh, 1.0, time_blocks=4, modes=3)
    theta = np.random.default_rng(0).normal(size=fam.size)
    U = fam.realize(theta, 32)
    assert fam.penalty(theta) == pytest.approx(control_cost(mesh, U, 1 / 32), rel=1e-12)
    assert np.linalg.eigvalsh(fam.gram()).min() > 0.0
    with pytest.raises(DataError):
        fam.realize(theta, 30)
    with pytest.raises(DataError):
        fam.realize(theta[:-1], 32)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_penalty_midpoint_convex(seed):
    from spdelab.grid import build_mesh

    fam = ControlFamily(build_mesh(15), 1.0, 2, 2)
    a, b = np.random.default_rng(seed).normal(size=(2, fam.size))
    assert fam.penalty(0.5 * (a + b)) <= 0.5 * (fam.penalty(a) + fam.penalty(b)) + 1e-12


def test_mc_estimate_deterministic_has_zero_se(mesh):
    model = make_model(mesh)
    cfg = SchemeConfig(steps=8, noise=False)
    fam = ControlFamily(mesh, 1.0)
    est = mc_cost_estimate(model, cfg, np.zeros(fam.size), fam, CostSpec(), RngPolicy(0), 3)
    assert est.se == 0.0 and not est.partial
    with pytest.raises(ConfigurationError):
        mc_cost_estimate(model, cfg, np.zeros(fam.size), fam, CostSpec(), RngPolicy(0), 1)


def test_mc_estimate_batches_agree(mesh):
    model = make_model(mesh)
    cfg = SchemeConfig(steps=16)
    fam = ControlFamily(mesh, 1.0)
    theta = np.array([0.5, 0.0, -0.5, 0.2])
    spec = CostSpec(psi=TerminalPayoff("distance"))
    a = mc_cost_estimate(model, cfg, theta, fam, spec, RngPolicy(1), 64)
    b = mc_cost_estimate(model, cfg, theta, fam, spec, RngPolicy(1), 64, path_offset=64)
    assert abs(a.mean - b.mean) <= 3 * np.hypot(a.se, b.se)


def test_optimizer_incumbents_non_increasing(mesh):
    model = make_model(mesh)
    cfg = SchemeConfig(steps=16)
    fam = ControlFamily(mesh, 1.0)
    spec = CostSpec(u_det=np.full(63, 0.3))
    res = optimize_control(model, cfg, fam, spec, RngPolicy(2), budget=20, n_paths=4)
    assert np.all(np.diff(res.incumbents) < 0.0)
    assert res.evaluations == len(res.trace) <= 20
    assert res.incumbents[-1] < res.incumbents[0]


def test_self_targeting_keeps_zero_control(mesh):
    model = make_model(mesh)
    cfg = SchemeConfig(steps=16, noise=False)
    target = run_trajectory(model, cfg).states
    fam = ControlFamily(mesh, 1.0)
    res = optimize_control(model, cfg, fam, CostSpec(u_det=target), RngPolicy(0), budget=60, n_paths=2)
    assert np.all(res.theta == 0.0)
    assert res.status in ("no_improvement", "converged")
    assert res.incumbents == [0.0]


def test_heavier_penalty_gives_smaller_control(mesh):
    model = make_model(mesh)
    cfg = SchemeConfig(steps=16, noise=False)
    fam = ControlFamily(mesh, 1.0)
    norms = []
    for w in (0.1, 10.0):
        spec = CostSpec(u_det=np.full(63, 0.5), control_weight=w)
        res = optimize_control(model, cfg, fam, spec, RngPolicy(0), budget=80, n_paths=2, step=0.25)
        norms.append(fam.penalty(res.theta))
    assert norms[1] <= norms[0]
    assert norms[0] > 0.0
