import numpy as np
import pytest
from scipy.integrate import trapezoid
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spdelab.errors import ConfigurationError, NumericError
from spdelab.grid import (
    assemble_weak_flux,
    SpatialMesh,
    build_mesh,
    grad_lp_norm,
    lq_norm,
    tri_matvec,
    tri_solve,
)

from conftest import make_model, oracle_model

finite = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)


def fields(n=15):
    return arrays(np.float64, n, elements=finite)


def test_build_mesh_spacing():
    assert build_mesh(3, (0.0, 1.0)).h == 0.25
    assert build_mesh(63, (0.0, 1.0)).h == 1.0 / 64.0


@pytest.mark.parametrize("args", [(1, (0.0, 1.0)), (2.5, (0.0, 1.0)), (3, (1.0, 0.0)), (3, (0.0, np.inf))])
def test_build_mesh_rejects(args):
    with pytest.raises(ConfigurationError):
        build_mesh(*args)


def test_lq_norm_zero_and_domain():
    mesh = build_mesh(7)
    assert lq_norm(mesh, np.zeros(7), 2.0) == 0.0
    with pytest.raises(ValueError):
        lq_norm(mesh, np.ones(7), 0.5)


def test_lq_norm_parabola():
    # interpolation error of x(1-x) is O(h^2)
    for n, tol in ((63, 2e-4), (255, 2e-5)):
        mesh = build_mesh(n)
        f = mesh.nodes * (1.0 - mesh.nodes)
        assert abs(lq_norm(mesh, f, 2.0) - np.sqrt(1.0 / 30.0)) < tol


@settings(max_examples=50, deadline=None)
@given(fields())
def test_lq2_matches_mass_matrix(f):
    mesh = build_mesh(15)
    exact = np.sqrt(f @ mesh.mass_dense() @ f)
    assert lq_norm(mesh, f, 2.0) == pytest.approx(exact, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("q", [1.0, 1.5, 3.0, 4.0])
def test_lq_norm_against_fine_quadrature(q):
    mesh = build_mesh(9)
    f = np.sin(3.0 * mesh.nodes) - 0.3
    full = mesh.pad(f)
    xs = np.linspace(0.0, 1.0, 400_001)
    vals = np.interp(xs, mesh.all_nodes, full)
    ref = trapezoid(np.abs(vals) ** q, xs) ** (1.0 / q)
    assert lq_norm(mesh, f, q) == pytest.approx(ref, rel=1e-8)


@settings(max_examples=50, deadline=None)
@given(fields(), fields(), st.floats(-5, 5), st.sampled_from([1.0, 1.5, 2.0, 3.0, 4.0]))
def test_lq_norm_homogeneous_and_triangle(f, g, c, q):
    mesh = build_mesh(15)
    nf, ng = lq_norm(mesh, f, q), lq_norm(mesh, g, q)
    assert lq_norm(mesh, c * f, q) == pytest.approx(abs(c) * nf, rel=1e-9, abs=1e-12)
    assert lq_norm(mesh, f + g, q) <= nf + ng + 1e-9 * (1.0 + nf + ng)


def test_grad_lp_norm_examples():
    mesh = SpatialMesh(1)  # one interior node, below the build_mesh minimum
    assert grad_lp_norm(mesh, np.zeros(1), 3.0) == 0.0
    assert grad_lp_norm(mesh, np.array([1.0]), 3.0) == pytest.approx(8.0, rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(fields(), st.floats(-4, 4), st.floats(1.1, 6.0))
def test_grad_lp_norm_homogeneity(f, c, p):
    mesh = build_mesh(15)
    assert grad_lp_norm(mesh, c * f, p) == pytest.approx(abs(c) ** p * grad_lp_norm(mesh, f, p), rel=1e-9, abs=1e-300)


def test_flux_of_zero_is_zero(mesh):
    model = make_model(mesh)
    assert np.all(assemble_weak_flux(model, np.zeros(63)) == 0.0)


def test_oracle_flux_is_stiffness_product(mesh):
    model = oracle_model(mesh)
    f = np.random.default_rng(0).normal(size=63)
    assert np.max(np.abs(assemble_weak_flux(model, f) - mesh.stiffness_dense() @ f)) < 1e-12


def test_convection_gauss_green_rate():
    errs = []
    for n in (31, 63, 127, 255):
        mesh = build_mesh(n)
        model = make_model(mesh, p=4.0, sigma=0.0)
        f = np.sin(np.pi * mesh.nodes) * (1.0 + mesh.nodes)
        only_f = assemble_weak_flux(model, f) - assemble_weak_flux(model.replace(convection=type(model.convection)(b=0.0)), f)
        errs.append(abs(only_f @ f))
    errs = np.array(errs)
    assert np.all(np.diff(errs) < 0.0)
    rates = np.log2(errs[:-1] / errs[1:])
    assert rates.min() > 0.9


@settings(max_examples=40, deadline=None)
@given(fields(63), fields(63))
def test_flux_monotone_without_lambda_dependence(f1, f2):
    mesh = build_mesh(63)
    model = make_model(mesh, amp_lambda=0.0, conv_b=0.0, conv_mode="linear")
    d = assemble_weak_flux(model, f1) - assemble_weak_flux(model, f2)
    assert d @ (f1 - f2) >= -1e-9 * (1.0 + np.abs(d) @ np.abs(f1 - f2))


@settings(max_examples=40, deadline=None)
@given(fields(63))
def test_flux_coercivity_surrogate(f):
    mesh = build_mesh(63)
    model = make_model(mesh, conv_b=0.0, conv_mode="linear")
    c1 = model.flux.constants()["C1"]
    lhs = assemble_weak_flux(model, f) @ f
    rhs = c1 * grad_lp_norm(mesh, f, model.flux.p)
    assert lhs >= rhs - 1e-9 * (1.0 + abs(lhs))


def test_flux_rejects_non_finite(mesh):
    f = np.zeros(63)
    f[3] = np.nan
    with pytest.raises(NumericError):
        assemble_weak_flux(make_model(mesh), f)


def test_tri_solve_roundtrip():
    rng = np.random.default_rng(1)
    lo, up = rng.normal(size=9), rng.normal(size=9)
    d = 5.0 + rng.random(10)
    x = rng.normal(size=10)
    assert np.allclose(tri_solve(lo, d, up, tri_matvec(lo, d, up, x)), x, atol=1e-12)
    with pytest.raises(NumericError):
        tri_solve(np.zeros(2), np.zeros(3), np.zeros(2), np.ones(3))
