"""Semi-implicit time stepping for the p-Laplace SPDE with Levy noise.

One step solves, in weak form on the P1 space,

    M (u_{k+1} - u_k) + kappa * flux(u_{k+1}) = kappa M U_k + M dM_k + M dJ_k

where the drift is implicit and both noise terms are frozen at ``u_k``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError, NumericError, SolverError
from .grid import GAUSS3_S, GAUSS3_W, SpatialMesh, grad_lp_norm, tri_matvec, tri_solve
from .kernels import flux_assemble
from .model import ModelSpec
from .noise import (
    NoiseIncrement,
    RngPolicy,
    compensated_jump_increment,
    sample_noise,
    wiener_increment_field,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchemeConfig:
    steps: int = 256
    horizon: float = 1.0
    tol_nl: float = 1e-10
    max_newton: int = 60
    max_dampings: int = 3
    oracle: bool = False
    noise: bool = True
    lumped_mass: bool = False
    noise_substeps: int = 1

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigurationError("scheme.steps must be a positive integer")
        if not self.horizon > 0.0:
            raise ConfigurationError("scheme.horizon must be positive")
        if self.kappa > 1.0:
            raise ConfigurationError(f"time step kappa = {self.kappa} exceeds 1")
        if not self.tol_nl > 0.0:
            raise ConfigurationError("scheme.tol_nl must be positive")
        if self.max_newton < 1:
            raise ConfigurationError("scheme.max_newton must be >= 1")
        if int(self.noise_substeps) != self.noise_substeps or self.noise_substeps < 1:
            raise ConfigurationError("scheme.noise_substeps must be a positive integer")

    @property
    def kappa(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return self.kappa * np.arange(self.steps + 1)

    def with_steps(self, steps: int, noise_substeps: int = 1) -> "SchemeConfig":
        from dataclasses import replace

        return replace(self, steps=int(steps), noise_substeps=int(noise_substeps))


# --------------------------------------------------------------------------
# controls


class ControlSignal:
    """Control on [0, T]: piecewise constant on the partition, or a dense function.

    ``values[j]`` is the nodal field on the interval (t_j, t_{j+1}].
    """

    def __init__(self, values=None, fn=None, horizon=None):
        if (values is None) == (fn is None):
            raise ValueError("give exactly one of values or fn")
        self.values = None if values is None else np.asarray(values, dtype=float)
        self.fn = fn
        self.horizon = horizon

    @classmethod
    def zeros(cls, steps: int, node_count: int) -> "ControlSignal":
        return cls(values=np.zeros((steps, node_count)))

    @classmethod
    def from_function(cls, fn, horizon: float) -> "ControlSignal":
        return cls(fn=fn, horizon=float(horizon))

    @property
    def is_piecewise(self) -> bool:
        return self.values is not None

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    def __mul__(self, scalar):
        if self.is_piecewise:
            return ControlSignal(values=scalar * self.values)
        fn = self.fn
        return ControlSignal(fn=lambda t: scalar * fn(t), horizon=self.horizon)

    __rmul__ = __mul__

    def norm(self, mesh: SpatialMesh, horizon: float, order: int = 12) -> float:
        """||U||_{L^2(0,T; L^2)}."""
        if self.is_piecewise:
            k = horizon / self.steps
            mass = np.array([mesh.inner(v, v) for v in self.values])
            return float(np.sqrt(k * mass.sum()))
        return float(np.sqrt(_time_quadrature(lambda t: mesh.l2_norm_sq(self.fn(t)), horizon, 64, order)))


def _time_quadrature(fn, horizon, panels, order):
    xs, ws = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, horizon, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        total += half * sum(w * fn(mid + half * x) for x, w in zip(xs, ws))
    return total


def project_control(U: ControlSignal, kappa: float, horizon: float | None = None, order: int = 8) -> ControlSignal:
    """L2(0,T)-orthogonal projection onto fields constant on each (t_j, t_{j+1}].

    The result on an interval is the time average of ``U`` there.
    """
    if U.is_piecewise:
        n_in = U.steps
        if horizon is None:
            horizon = kappa * n_in
        n_out = int(round(horizon / kappa))
        if n_in == n_out:
            return ControlSignal(values=U.values.copy())
        if n_in % n_out != 0:
            raise DataError(f"cannot project a {n_in}-interval control onto {n_out} intervals")
        r = n_in // n_out
        return ControlSignal(values=U.values.reshape(n_out, r, -1).mean(axis=1))
    horizon = U.horizon if horizon is None else horizon
    if horizon is None:
        raise DataError("dense control needs a horizon")
    n = int(round(horizon / kappa))
    xs, ws = np.polynomial.legendre.leggauss(order)
    out = []
    for j in range(n):
        a = j * kappa
        vals = [U.fn(a + 0.5 * kappa * (x + 1.0)) for x in xs]
        out.append(0.5 * np.tensordot(ws, np.asarray(vals), axes=1))
    return ControlSignal(values=np.asarray(out))


def projection_error(U: ControlSignal, P: ControlSignal, mesh: SpatialMesh, horizon: float, order: int = 12) -> float:
    """||P - U||_{L^2(0,T;L^2)} for dense ``U`` and piecewise ``P``."""
    n = P.steps
    k = horizon / n
    xs, ws = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for j in range(n):
        for x, w in zip(xs, ws):
            t = j * k + 0.5 * k * (x + 1.0)
            d = P.values[j] - U.fn(t)
            total += 0.5 * k * w * mesh.l2_norm_sq(d)
    return float(np.sqrt(total))


# --------------------------------------------------------------------------
# nonlinear solve


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    rhs_norm: float
    picard_steps: int = 0


def _picard_matrix(model_params, mesh: SpatialMesh, u):
    """Stiffness bands of the frozen-coefficient p-Laplacian at ``u``."""
    p, eps, c0, amp_x, amp_l, sign = model_params[:6]
    full = mesh.pad(u)
    slope = np.diff(full) / mesh.h
    s = GAUSS3_S[None, :]
    lam = full[:-1, None] * (1.0 - s) + full[1:, None] * s
    x = mesh.a + (np.arange(mesh.node_count + 1)[:, None] + s) * mesh.h
    c = c0 * (1.0 + amp_x * np.sin(2.0 * np.pi * (x - mesh.a) / mesh.length)) * (1.0 + amp_l * np.tanh(lam))
    w = sign * (c @ GAUSS3_W) * (eps * eps + slope * slope) ** (0.5 * (p - 2.0))
    diag = (w[:-1] + w[1:]) / mesh.h
    off = -w[1:-1] / mesh.h
    return off, diag, off.copy()


def solve_monotone(params, mesh: SpatialMesh, mass, kappa, rhs, guess, tol, max_iter, max_dampings=3) -> tuple[np.ndarray, SolveInfo]:
    """Damped Newton with a Picard fallback for ``M u + kappa flux(u) = rhs``."""
    ml, md, mu = mass
    rhs_norm = float(np.linalg.norm(rhs))
    bound = tol * (1.0 + rhs_norm)
    target = 1e-2 * bound
    conv_only = np.array(params, dtype=float)
    conv_only[5] = 0.0

    def resid(v):
        f, _, _, _ = flux_assemble(v, mesh.h, params, False)
        return tri_matvec(ml, md, mu, v) + kappa * f - rhs

    u = np.array(guess, dtype=float)
    f, jl, jd, ju = flux_assemble(u, mesh.h, params, True)
    g = tri_matvec(ml, md, mu, u) + kappa * f - rhs
    gnorm = float(np.linalg.norm(g))
    picard = 0
    it = 0
    while it < max_iter:
        if gnorm <= target:
            break
        it += 1
        step = tri_solve(ml + kappa * jl, md + kappa * jd, mu + kappa * ju, -g)
        t = 1.0
        accepted = False
        for _ in range(max_dampings + 1):
            trial = u + t * step
            if np.all(np.isfinite(trial)):
                gt = resid(trial)
                gtn = float(np.linalg.norm(gt))
                if gtn <= (1.0 - 1e-4 * t) * gnorm:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            if gnorm <= bound:
                break  # rounding floor
            kl, kd, ku = _picard_matrix(params, mesh, u)
            fc, _, _, _ = flux_assemble(u, mesh.h, conv_only, False)
            trial = tri_solve(ml + kappa * kl, md + kappa * kd, mu + kappa * ku, rhs - kappa * fc)
            picard += 1
            if not np.all(np.isfinite(trial)):
                raise NumericError("non-finite Picard iterate")
            gt = resid(trial)
            gtn = float(np.linalg.norm(gt))
        u = trial
        gnorm = gtn
        f, jl, jd, ju = flux_assemble(u, mesh.h, params, True)
        g = tri_matvec(ml, md, mu, u) + kappa * f - rhs
    if not np.isfinite(gnorm):
        raise NumericError("non-finite residual in nonlinear solve")
    if gnorm > bound:
        raise SolverError(f"nonlinear solve did not converge in {it} iterations", residual=gnorm)
    return u, SolveInfo(it, gnorm, rhs_norm, picard)


# --------------------------------------------------------------------------
# initial smoothing


@dataclass
class SmoothingInfo:
    lhs: float
    rhs: float
    slack: float
    solve: SolveInfo


def resolvent_params(model: ModelSpec) -> np.ndarray:
    """Kernel parameters of the pure p-Laplacian (unit coefficient, no convection)."""
    f, m = model.flux, model.mesh
    return np.array([f.p, f.eps_reg, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, m.a, m.length])


def smooth_initial(u0, kappa: float, model: ModelSpec, tol: float = 1e-12, max_iter: int = 200, lumped: bool = False):
    """Resolvent u solving u - kappa div(|u'|^{p-2} u') = u0 weakly.

    Returns ``(u, info)``; ``info.slack`` is
    ``1/2||u||^2 + kappa||u'||_p^p - 1/2||u0||^2`` (non-positive up to the
    solver tolerance).
    """
    if not kappa > 0.0:
        raise ConfigurationError("kappa must be positive")
    mesh = model.mesh
    u0 = np.asarray(u0, dtype=float)
    mass = mesh.mass_bands(lumped)
    rhs = tri_matvec(*mass, u0)
    try:
        u, info = solve_monotone(resolvent_params(model), mesh, mass, kappa, rhs, u0, tol, max_iter)
    except SolverError as exc:
        raise SolverError(f"initial smoothing failed: {exc.args[0]}", residual=exc.residual) from exc
    lhs = 0.5 * mesh.inner(u, u, lumped) + kappa * grad_lp_norm(mesh, u, model.flux.p)
    rhs_val = 0.5 * mesh.inner(u0, u0, lumped)
    return u, SmoothingInfo(lhs, rhs_val, lhs - rhs_val, info)


# --------------------------------------------------------------------------
# trajectories


@dataclass
class StepResult:
    u: np.ndarray
    wiener_field: np.ndarray
    jump_field: np.ndarray
    info: SolveInfo


def _step(u_prev, control_k, noise, model: ModelSpec, cfg: SchemeConfig, guess=None) -> StepResult:
    mesh = model.mesh
    kappa = cfg.kappa
    mass = mesh.mass_bands(cfg.lumped_mass)
    if noise is None:
        d_m = np.zeros_like(u_prev)
        d_j = np.zeros_like(u_prev)
    else:
        d_m = wiener_increment_field(model, u_prev, noise.wiener)
        d_j = compensated_jump_increment(model, u_prev, noise.jump_marks, kappa)
    load = u_prev + kappa * control_k + d_m + d_j
    rhs = tri_matvec(*mass, load)
    start = u_prev if guess is None else guess
    u, info = solve_monotone(model.flux_params(), mesh, mass, kappa, rhs, start, cfg.tol_nl, cfg.max_newton, cfg.max_dampings)
    return StepResult(u, d_m, d_j, info)


def implicit_step(u_prev, control_k, noise, model: ModelSpec, cfg: SchemeConfig, guess=None) -> np.ndarray:
    """One semi-implicit step; returns the new nodal state.

    ``noise=None`` switches both noise terms off, compensator included.
    """
    return _step(np.asarray(u_prev, dtype=float), np.asarray(control_k, dtype=float), noise, model, cfg, guess).u


def step_residual(u_next, u_prev, control_k, wiener_field, jump_field, model: ModelSpec, cfg: SchemeConfig):
    """Variational residual vector and the right-hand-side norm of one step."""
    mesh = model.mesh
    mass = mesh.mass_bands(cfg.lumped_mass)
    rhs = tri_matvec(*mass, u_prev + cfg.kappa * control_k + wiener_field + jump_field)
    f, _, _, _ = flux_assemble(np.ascontiguousarray(u_next), mesh.h, model.flux_params(), False)
    return tri_matvec(*mass, u_next) + cfg.kappa * f - rhs, float(np.linalg.norm(rhs))


@dataclass
class TrajectoryRecord:
    mesh: SpatialMesh
    kappa: float
    p: float
    states: np.ndarray
    controls: np.ndarray
    newton_iters: np.ndarray
    residuals: np.ndarray
    rhs_norms: np.ndarray
    path: int
    seed: int
    lumped_mass: bool = False
    wiener_fields: np.ndarray | None = None
    jump_fields: np.ndarray | None = None
    jump_counts: np.ndarray | None = None
    smoothing: SmoothingInfo | None = None
    extras: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def horizon(self) -> float:
        return self.kappa * self.steps

    @property
    def times(self) -> np.ndarray:
        return self.kappa * np.arange(self.steps + 1)

    @property
    def has_noise_record(self) -> bool:
        return self.wiener_fields is not None and self.jump_fields is not None

    def l2_norms(self) -> np.ndarray:
        mass = self.mesh.mass_bands(self.lumped_mass)
        return np.sqrt(np.einsum("ij,ij->i", self.states, _rows_matvec(mass, self.states)))

    def increments_sq(self) -> np.ndarray:
        d = np.diff(self.states, axis=0)
        return np.einsum("ij,ij->i", d, _rows_matvec(self.mesh.mass_bands(self.lumped_mass), d))

    def grad_norms_p(self) -> np.ndarray:
        slopes = np.diff(np.pad(self.states, ((0, 0), (1, 1))), axis=1) / self.mesh.h
        return self.mesh.h * np.sum(np.abs(slopes) ** self.p, axis=1)

    # interpolants reconstructed on demand
    def u_kappa(self, t: float) -> np.ndarray:
        """Right-endpoint piecewise constant process: u_{k+1} on [t_k, t_{k+1})."""
        k = min(int(np.floor(t / self.kappa)), self.steps - 1)
        return self.states[k + 1].copy()

    def u_bar(self, t: float) -> np.ndarray:
        """Left-endpoint process: u_k on (t_k, t_{k+1}], u_0 at 0."""
        if t <= 0.0:
            return self.states[0].copy()
        k = min(int(np.ceil(t / self.kappa)) - 1, self.steps - 1)
        return self.states[k].copy()

    def u_tilde(self, t: float) -> np.ndarray:
        """Piecewise affine interpolant through the nodal states."""
        if t >= self.horizon:
            return self.states[-1].copy()
        k = int(np.floor(t / self.kappa))
        s = (t - k * self.kappa) / self.kappa
        return (1.0 - s) * self.states[k] + s * self.states[k + 1]

    def summary_rows(self):
        """Rows (step, time, l2_norm, grad_lp_norm_p, increment_l2, newton_iters, residual)."""
        l2 = self.l2_norms()
        gp = self.grad_norms_p()
        inc = np.concatenate([[0.0], np.sqrt(self.increments_sq())])
        iters = np.concatenate([[0], self.newton_iters])
        res = np.concatenate([[0.0], self.residuals])
        t = self.times
        return [(k, t[k], l2[k], gp[k], inc[k], int(iters[k]), res[k]) for k in range(self.steps + 1)]


TRAJECTORY_COLUMNS = ("step", "time", "l2_norm", "grad_lp_norm_p", "increment_l2", "newton_iters", "residual")


def _rows_matvec(bands, x):
    lower, diag, upper = bands
    y = x * diag
    y[:, 1:] += x[:, :-1] * lower
    y[:, :-1] += x[:, 1:] * upper
    return y


def sample_noise_coupled(rng: RngPolicy, path: int, step: int, model: ModelSpec, kappa: float, substeps: int = 1) -> NoiseIncrement:
    """Noise of one step assembled from ``substeps`` finer steps.

    Streams are keyed by the fine step index, so runs with N steps and
    ``substeps`` = N_fine / N see the same Brownian path and jump events for
    every N (common random numbers across refinement levels).
    """
    if substeps == 1:
        return sample_noise(rng, path, step, model, kappa)
    fine = kappa / substeps
    parts = [sample_noise(rng, path, step * substeps + j, model, fine) for j in range(substeps)]
    wiener = np.sum([q.wiener for q in parts], axis=0)
    offsets = np.concatenate([j * fine + q.jump_offsets for j, q in enumerate(parts)])
    marks = np.concatenate([q.jump_marks for q in parts])
    return NoiseIncrement(wiener, offsets, marks, float(kappa))


def _control_values(U: ControlSignal | None, cfg: SchemeConfig, mesh: SpatialMesh) -> np.ndarray:
    if U is None:
        return np.zeros((cfg.steps, mesh.node_count))
    P = project_control(U, cfg.kappa, cfg.horizon)
    if P.values.shape != (cfg.steps, mesh.node_count):
        raise DataError(f"control has shape {P.values.shape}, expected {(cfg.steps, mesh.node_count)}")
    return P.values


def run_trajectory(
    model: ModelSpec,
    cfg: SchemeConfig,
    U: ControlSignal | None = None,
    rng: RngPolicy | None = None,
    path: int = 0,
    record_noise: bool = True,
    u0=None,
    smooth: bool = True,
) -> TrajectoryRecord:
    """Iterate the scheme from the smoothed initial datum.

    ``u0`` overrides the model's initial datum; ``smooth=False`` starts from it
    without the resolvent smoothing.
    """
    if model.flux.kind == "oracle" and not cfg.oracle:
        raise ConfigurationError("p = 2 oracle flux requires scheme.oracle = true")
    rng = rng if rng is not None else RngPolicy(0)
    mesh = model.mesh
    n, m = cfg.steps, mesh.node_count
    kappa = cfg.kappa
    controls = _control_values(U, cfg, mesh)
    start = model.u0 if u0 is None else np.asarray(u0, dtype=float)
    smoothing = None
    if smooth:
        first, smoothing = smooth_initial(start, kappa, model, lumped=cfg.lumped_mass)
    else:
        first = start.copy()

    states = np.empty((n + 1, m))
    states[0] = first
    iters = np.zeros(n, dtype=np.int64)
    residuals = np.zeros(n)
    rhs_norms = np.zeros(n)
    wf = np.empty((n, m)) if record_noise else None
    jf = np.empty((n, m)) if record_noise else None
    counts = np.zeros(n, dtype=np.int64)
    u = first
    for k in range(n):
        noise = sample_noise_coupled(rng, path, k, model, kappa, cfg.noise_substeps) if cfg.noise else None
        try:
            res = _step(u, controls[k], noise, model, cfg)
        except SolverError as exc:
            raise SolverError(exc.args[0], residual=exc.residual, step=k) from exc
        except NumericError as exc:
            raise NumericError(f"step {k}: {exc}") from exc
        u = res.u
        states[k + 1] = u
        iters[k] = res.info.iterations
        residuals[k] = res.info.residual
        rhs_norms[k] = res.info.rhs_norm
        counts[k] = 0 if noise is None else noise.jump_count
        if record_noise:
            wf[k] = res.wiener_field
            jf[k] = res.jump_field
    return TrajectoryRecord(
        mesh=mesh,
        kappa=kappa,
        p=model.flux.p,
        states=states,
        controls=controls,
        newton_iters=iters,
        residuals=residuals,
        rhs_norms=rhs_norms,
        path=int(path),
        seed=int(rng.seed),
        lumped_mass=cfg.lumped_mass,
        wiener_fields=wf,
        jump_fields=jf,
        jump_counts=counts,
        smoothing=smoothing,
    )


def iterate_states(model: ModelSpec, cfg: SchemeConfig, rng: RngPolicy, path: int = 0, u0=None, smooth: bool = True):
    """Yield ``(k, u_k)`` for k = 0..N without storing the trajectory (U = 0)."""
    if model.flux.kind == "oracle" and not cfg.oracle:
        raise ConfigurationError("p = 2 oracle flux requires scheme.oracle = true")
    kappa = cfg.kappa
    start = model.u0 if u0 is None else np.asarray(u0, dtype=float)
    u = smooth_initial(start, kappa, model, lumped=cfg.lumped_mass)[0] if smooth else start.copy()
    zero = np.zeros(model.mesh.node_count)
    yield 0, u
    for k in range(cfg.steps):
        noise = sample_noise_coupled(rng, path, k, model, kappa, cfg.noise_substeps) if cfg.noise else None
        try:
            u = _step(u, zero, noise, model, cfg).u
        except SolverError as exc:
            raise SolverError(exc.args[0], residual=exc.residual, step=k) from exc
        yield k + 1, u
