"""Energy ledgers, a-priori certificates, smoothed-sign L1 probes and dissipativity margins."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .errors import DataError
from .grid import SpatialMesh, grad_lp_norm, l1_norm
from .kernels import flux_assemble
from .model import ModelSpec, chg_constant
from .noise import RngPolicy
from .scheme import SchemeConfig, TrajectoryRecord, _rows_matvec, run_trajectory

# --------------------------------------------------------------------------
# energy ledger


@dataclass
class EnergyReport:
    kinetic: np.ndarray  # 1/2 ||u_k||^2, k = 0..N
    dissipation: np.ndarray  # kappa <flux(u_{k+1}), u_{k+1}>
    increment: np.ndarray  # ||u_{k+1} - u_k||^2
    work: np.ndarray  # kappa (U_k, u_{k+1})
    noise_work: np.ndarray  # (dM_k + dJ_k, u_{k+1})
    residual: np.ndarray
    rhs_norms: np.ndarray
    tol_nl: float

    @property
    def tolerance(self) -> np.ndarray:
        return 10.0 * self.tol_nl * (1.0 + self.rhs_norms)

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.residual) <= self.tolerance))

    @property
    def max_norm_sq(self) -> float:
        return float(2.0 * self.kinetic.max())

    @property
    def total_dissipation(self) -> float:
        return float(self.dissipation.sum())

    @property
    def total_increments(self) -> float:
        return float(self.increment.sum())

    def rows(self):
        return [
            (k, self.kinetic[k + 1], self.dissipation[k], self.increment[k], self.work[k], self.noise_work[k], self.residual[k])
            for k in range(self.residual.size)
        ]


LEDGER_COLUMNS = ("step", "kinetic", "dissipation", "increment", "work", "noise_work", "identity_residual")


def energy_ledger(traj: TrajectoryRecord, model: ModelSpec, tol_nl: float = 1e-10) -> EnergyReport:
    """Per-step terms of the discrete energy identity tested with u_{k+1}.

    ``1/2(|u_{k+1}|^2 - |u_k|^2 + |u_{k+1}-u_k|^2) + dissipation - work - noise_work = r_k``
    """
    if not traj.has_noise_record:
        raise DataError("trajectory carries no noise record; rerun with record_noise=True")
    mesh = traj.mesh
    mass = mesh.mass_bands(traj.lumped_mass)
    u = traj.states
    nxt = u[1:]
    mu = _rows_matvec(mass, u.copy())
    sq = np.einsum("ij,ij->i", u, mu)
    d = np.diff(u, axis=0)
    inc = np.einsum("ij,ij->i", d, _rows_matvec(mass, d.copy()))
    params = model.flux_params()
    flux = np.array([flux_assemble(np.ascontiguousarray(v), mesh.h, params, False)[0] for v in nxt])
    diss = traj.kappa * np.einsum("ij,ij->i", flux, nxt)
    m_next = mu[1:]
    work = traj.kappa * np.einsum("ij,ij->i", traj.controls, m_next)
    noise_work = np.einsum("ij,ij->i", traj.wiener_fields + traj.jump_fields, m_next)
    r = 0.5 * (sq[1:] - sq[:-1] + inc) + diss - work - noise_work
    load = u[:-1] + traj.kappa * traj.controls + traj.wiener_fields + traj.jump_fields
    rhs_norms = np.linalg.norm(_rows_matvec(mass, load), axis=1)
    return EnergyReport(0.5 * sq, diss, inc, work, noise_work, r, rhs_norms, tol_nl)


# --------------------------------------------------------------------------
# a-priori certificate


@dataclass
class Estimate:
    mean: float
    se: float
    samples: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {"mean": self.mean, "se": self.se}


def _estimate(samples) -> Estimate:
    x = np.asarray(samples, dtype=float)
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return Estimate(float(x.mean()), se, x)


BOUND_QUANTITIES = ("sup_moment", "increments", "dissipation")


@dataclass
class BoundTable:
    kappa: float
    paths: int
    sup_moment: Estimate  # max_{n>=1} E||u_n||^2, per-path values at the maximizing n
    increments: Estimate  # E sum ||u_{k+1}-u_k||^2
    dissipation: Estimate  # kappa E sum ||grad u_{k+1}||_p^p
    pathwise_sup: Estimate  # E max_n ||u_n||^2
    interpolation_gap: Estimate  # E int ||u_kappa - u~_kappa||^2 dt

    def to_dict(self):
        out = {"kappa": self.kappa, "paths": self.paths}
        for name in BOUND_QUANTITIES + ("pathwise_sup", "interpolation_gap"):
            out[name] = getattr(self, name).to_dict()
        return out


def apriori_certificate(ensemble: list[TrajectoryRecord]) -> BoundTable:
    """Monte Carlo estimates of the a-priori quantities with standard errors.

    The gap between the right-endpoint and piecewise-affine interpolants is
    exact: on each interval it integrates to kappa/3 ||u_{k+1}-u_k||^2.
    Path order is preserved in the stored samples so that ensembles driven by
    common noise can be compared pathwise.
    """
    if not ensemble:
        raise DataError("empty ensemble")
    kappa = ensemble[0].kappa
    if any(abs(t.kappa - kappa) > 1e-15 * kappa or t.steps != ensemble[0].steps for t in ensemble):
        raise DataError("ensemble members use different partitions")
    norms = np.array([t.l2_norms()[1:] ** 2 for t in ensemble])
    incs = np.array([t.increments_sq().sum() for t in ensemble])
    diss = np.array([kappa * t.grad_norms_p()[1:].sum() for t in ensemble])
    n_star = int(np.argmax(norms.mean(axis=0)))
    return BoundTable(
        kappa=kappa,
        paths=len(ensemble),
        sup_moment=_estimate(norms[:, n_star]),
        increments=_estimate(incs),
        dissipation=_estimate(diss),
        pathwise_sup=_estimate(norms.max(axis=1)),
        interpolation_gap=_estimate(kappa / 3.0 * incs),
    )


def _upward_p(est: Estimate) -> float:
    if est.se > 0.0:
        return float(stats.norm.sf(est.mean / est.se))
    return 0.0 if est.mean > 0.0 else 1.0


def trend_test(x, means, ses) -> dict:
    """Weighted least-squares slope of independent estimates ``means`` on ``x``.

    ``p_upward`` is the one-sided p-value against a non-positive slope.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(means, dtype=float)
    s = np.asarray(ses, dtype=float)
    if np.any(s <= 0.0):
        slope = float(np.polyfit(x, y, 1)[0])
        return {"slope": slope, "se": 0.0, "p_upward": 0.0 if slope > 0 else 1.0}
    w = 1.0 / s**2
    xm = np.sum(w * x) / w.sum()
    sxx = np.sum(w * (x - xm) ** 2)
    est = Estimate(float(np.sum(w * (x - xm) * y) / sxx), float(np.sqrt(1.0 / sxx)))
    return {"slope": est.mean, "se": est.se, "p_upward": _upward_p(est)}


def paired_trend_test(x, samples) -> dict:
    """Slope trend for paired samples (rows = paths, columns = levels ``x``).

    Each path gets its own least-squares slope; the mean slope and its
    standard error account for the correlation that common noise induces
    between levels.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(samples, dtype=float)
    xc = x - x.mean()
    slopes = y @ xc / np.dot(xc, xc)
    est = _estimate(slopes)
    return {"slope": est.mean, "se": est.se, "p_upward": _upward_p(est)}


def refinement_study(
    model: ModelSpec,
    cfg: SchemeConfig,
    step_counts,
    paths: int,
    rng: RngPolicy,
    u0=None,
    coupled: bool = True,
    mapper=map,
):
    """Certificates for each step count plus trend tests across the levels.

    ``coupled``: every level aggregates the finest level's noise streams, so
    path ``j`` sees one Brownian path and one set of jump events at every step
    count; trends use per-path slopes.  Otherwise each level draws its own
    paths (ids offset per level) and trends use the independent-estimate
    regression.
    """
    finest = max(step_counts)
    if coupled and any(finest % n for n in step_counts):
        raise DataError("step counts must divide the finest step count")
    tables = []
    for level, n in enumerate(step_counts):
        if coupled:
            c, offset = cfg.with_steps(n, finest // n), 0
        else:
            c, offset = cfg.with_steps(n), level * paths
        ens = list(
            mapper(
                lambda j, c=c, o=offset: run_trajectory(model, c, None, rng, o + j, record_noise=False, u0=u0),
                range(paths),
            )
        )
        tables.append(apriori_certificate(ens))
    x = np.log2(np.asarray(step_counts, dtype=float))
    trends = {}
    for name in BOUND_QUANTITIES:
        est = [getattr(t, name) for t in tables]
        if coupled:
            trends[name] = paired_trend_test(x, np.column_stack([e.samples for e in est]))
        else:
            trends[name] = trend_test(x, [e.mean for e in est], [e.se for e in est])
    gaps = [t.interpolation_gap.mean for t in tables]
    ratios = [gaps[i] / gaps[i + 1] for i in range(len(gaps) - 1)]
    return {"tables": tables, "trends": trends, "gap_ratios": ratios, "coupled": coupled}


# --------------------------------------------------------------------------
# smoothed sign primitive


UPSILON_M1 = 5.0 / 16.0
UPSILON_M2 = 15.0 / 8.0


@dataclass(frozen=True)
class UpsilonSpec:
    theta: float

    def __post_init__(self):
        if not self.theta > 0.0:
            raise ValueError("theta must be positive")

    M1 = UPSILON_M1
    M2 = UPSILON_M2


def _upsilon_base(s):
    a = np.abs(s)
    inner = a <= 1.0
    s2 = s * s
    val = np.where(inner, (15.0 * s2 - 5.0 * s2 * s2 + s2**3) / 16.0, a - UPSILON_M1)
    d1 = np.where(inner, (15.0 * s - 10.0 * s * s2 + 3.0 * s * s2 * s2) / 8.0, np.sign(s))
    d2 = np.where(inner, 15.0 * (1.0 - s2) ** 2 / 8.0, 0.0)
    return val, d1, d2


def _upsilon_antiderivative(s):
    """Odd primitive of the base profile with value 0 at 0."""
    a = np.abs(s)
    inner = np.minimum(a, 1.0)
    core = (5.0 * inner**3 - inner**5 + inner**7 / 7.0) / 16.0
    outer = np.where(a > 1.0, 0.5 * (a * a - 1.0) - UPSILON_M1 * (a - 1.0), 0.0)
    return np.sign(s) * (core + outer)


def upsilon_eval(spec: UpsilonSpec, r):
    """(value, first derivative, second derivative) of r -> theta Upsilon(r / theta)."""
    r = np.asarray(r, dtype=float)
    t = spec.theta
    v, d1, d2 = _upsilon_base(r / t)
    return t * v, d1, d2 / t


def upsilon_integral(mesh: SpatialMesh, spec: UpsilonSpec, f) -> float:
    """int_D Upsilon_theta(f_h) dx, exact on each element of the P1 interpolant."""
    full = mesh.pad(np.asarray(f, dtype=float))
    A, B = full[:-1], full[1:]
    t = spec.theta
    diff = B - A
    scale = np.maximum(np.maximum(np.abs(A), np.abs(B)), t)
    near = np.abs(diff) <= 1e-6 * scale
    out = np.empty_like(A)
    far = ~near
    out[far] = t * t * (_upsilon_antiderivative(B[far] / t) - _upsilon_antiderivative(A[far] / t)) / diff[far]
    if np.any(near):
        xs, ws = np.polynomial.legendre.leggauss(4)
        s = 0.5 * (xs + 1.0)
        vals = A[near, None] * (1.0 - s) + B[near, None] * s
        out[near] = upsilon_eval(spec, vals)[0] @ (0.5 * ws)
    return float(mesh.h * out.sum())


# --------------------------------------------------------------------------
# L1 contraction probe


@dataclass
class L1ProbeReport:
    times: np.ndarray
    l1: np.ndarray  # (paths, N+1)
    smoothed: dict  # theta -> (paths, N+1)
    growth: dict = field(default_factory=dict)

    @property
    def mean_curve(self) -> np.ndarray:
        return self.l1.mean(axis=0)

    @property
    def identically_zero(self) -> bool:
        return bool(np.all(self.l1 == 0.0))

    def to_dict(self):
        return {
            "times": self.times.tolist(),
            "mean_l1": self.mean_curve.tolist(),
            "mean_smoothed": {str(t): v.mean(axis=0).tolist() for t, v in self.smoothed.items()},
            "growth": self.growth,
            "identically_zero": self.identically_zero,
        }


def l1_contraction_probe(
    model: ModelSpec,
    cfg: SchemeConfig,
    u0_a,
    u0_b,
    rng: RngPolicy,
    paths: int,
    thetas=(1e-2, 1e-3, 1e-4),
    mapper=map,
) -> L1ProbeReport:
    """Paired runs from two initial data driven by the same noise streams."""
    specs = [UpsilonSpec(t) for t in thetas]

    def one(j):
        a = run_trajectory(model, cfg, None, rng, j, record_noise=False, u0=u0_a)
        b = run_trajectory(model, cfg, None, rng, j, record_noise=False, u0=u0_b)
        diff = a.states - b.states
        l1 = np.array([l1_norm(model.mesh, d) for d in diff])
        sm = [np.array([upsilon_integral(model.mesh, s, d) for d in diff]) for s in specs]
        return l1, sm

    results = list(mapper(one, range(paths)))
    l1 = np.array([r[0] for r in results])
    smoothed = {s.theta: np.array([r[1][i] for r in results]) for i, s in enumerate(specs)}
    change = l1[:, -1] - l1[:, 0]
    est = _estimate(change)
    if est.se > 0.0:
        z = est.mean / est.se
        p_up = float(stats.norm.sf(z))
    else:
        z = 0.0 if est.mean == 0.0 else np.sign(est.mean) * np.inf
        p_up = 0.0 if est.mean > 0.0 else 1.0
    growth = {"mean_change": est.mean, "se": est.se, "z": float(z), "p_upward": p_up, "significant_growth": p_up < 0.05}
    return L1ProbeReport(cfg.times, l1, smoothed, growth)


# --------------------------------------------------------------------------
# dissipativity margin


def diffusion_hs_norm_sq(model: ModelSpec, u) -> float:
    """sum_n ||h_n(u)||^2_{L^2}."""
    prof = model.diffusion.profile
    integral = model.mesh.integrate(lambda x, v: prof(v) ** 2, u)
    return model.diffusion.c5 * integral


def jump_norm_sq(model: ModelSpec, u) -> float:
    """int_E ||eta(., u; z)||^2_{L^2} m(dz) = c_gamma ||g + lambda_star u||^2."""
    mesh = model.mesh
    jm = model.jumps
    integral = mesh.integrate(lambda x, v: (jm.g(x, mesh) + jm.lambda_star * v) ** 2, u)
    return jm.c_gamma * integral


def poincare_eigenvalue(mesh: SpatialMesh) -> float:
    """Smallest generalized eigenvalue of (K_h, M_h)."""
    w = linalg.eigh(mesh.stiffness_dense(), mesh.mass_dense(), eigvals_only=True, subset_by_index=[0, 0])
    return float(w[0])


def suggested_delta(model: ModelSpec) -> float:
    """2 C1 divided by the embedding constant of ||u||^p <= c ||grad u||_p^p."""
    p = model.flux.p
    lam1 = poincare_eigenvalue(model.mesh)
    c_emb = lam1 ** (-0.5 * p) * model.mesh.length ** (0.5 * p - 1.0)
    return 2.0 * model.flux.constants()["C1"] / c_emb


def default_delta(model: ModelSpec) -> float:
    return 0.5 * suggested_delta(model)


def dissipativity_margin(model: ModelSpec, u, delta: float) -> float:
    """C_hg + 2 C1 ||grad u||_p^p - sum ||h_n(u)||^2 - int ||eta||^2 dm - delta ||u||^p."""
    u = np.asarray(u, dtype=float)
    p = model.flux.p
    c1 = model.flux.constants()["C1"]
    norm = np.sqrt(model.mesh.l2_norm_sq(u))
    lhs = chg_constant(model) + 2.0 * c1 * grad_lp_norm(model.mesh, u, p)
    lhs -= diffusion_hs_norm_sq(model, u) + jump_norm_sq(model, u)
    return float(lhs - delta * norm**p)
