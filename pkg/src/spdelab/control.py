"""Cost functional and derivative-free control optimization over finite control families."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError, NumericError, SolverError
from .grid import SpatialMesh
from .model import ModelSpec
from .noise import RngPolicy
from .scheme import ControlSignal, SchemeConfig, TrajectoryRecord, _rows_matvec, run_trajectory

logger = logging.getLogger(__name__)

PSI_KINDS = ("zero", "distance", "clipped")


@dataclass(frozen=True)
class TerminalPayoff:
    """Lipschitz terminal payoff on L2.

    ``distance``: scale * ||u - w|| + offset.
    ``clipped``: scale * clip((u, w), lo, hi).
    """

    kind: str = "zero"
    scale: float = 1.0
    offset: float = 0.0
    target: np.ndarray | None = field(default=None, compare=False)
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in PSI_KINDS:
            raise ConfigurationError(f"terminal payoff kind must be one of {PSI_KINDS}, got {self.kind!r}")
        if self.kind == "clipped" and not self.lo <= self.hi:
            raise ConfigurationError("clipped payoff needs lo <= hi")

    def _w(self, mesh):
        return np.zeros(mesh.node_count) if self.target is None else np.asarray(self.target, dtype=float)

    def __call__(self, mesh: SpatialMesh, u) -> float:
        if self.kind == "zero":
            return 0.0
        w = self._w(mesh)
        if self.kind == "distance":
            return float(self.scale * np.sqrt(max(mesh.l2_norm_sq(u - w), 0.0)) + self.offset)
        return float(self.scale * np.clip(mesh.inner(u, w), self.lo, self.hi))

    def lipschitz(self, mesh: SpatialMesh) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "distance":
            return abs(self.scale)
        return abs(self.scale) * float(np.sqrt(mesh.l2_norm_sq(self._w(mesh))))


@dataclass(frozen=True)
class CostSpec:
    """Target profile (rows at t_0..t_N, or None for zero), payoff and control weight."""

    u_det: np.ndarray | None = field(default=None, compare=False)
    psi: TerminalPayoff = field(default_factory=TerminalPayoff)
    control_weight: float = 1.0

    def __post_init__(self):
        if self.control_weight < 0.0:
            raise ConfigurationError("control_weight must be >= 0")

    def target_rows(self, steps: int, node_count: int) -> np.ndarray:
        if self.u_det is None:
            return np.zeros((steps + 1, node_count))
        rows = np.asarray(self.u_det, dtype=float)
        if rows.ndim == 1:
            rows = np.broadcast_to(rows, (steps + 1, node_count))
        if rows.shape != (steps + 1, node_count):
            raise DataError(f"target profile has shape {rows.shape}, expected {(steps + 1, node_count)}")
        return rows


def _mass_rows(mesh, x):
    return np.einsum("ij,ij->i", x, _rows_matvec(mesh.mass_bands(), x.copy()))


def running_state_cost(traj: TrajectoryRecord, spec: CostSpec) -> float:
    rows = spec.target_rows(traj.steps, traj.mesh.node_count)
    d = traj.states[:-1] - rows[:-1]
    return float(traj.kappa * _mass_rows(traj.mesh, d).sum())


def control_cost(mesh: SpatialMesh, U: ControlSignal | None, kappa: float, weight: float = 1.0) -> float:
    if U is None:
        return 0.0
    return float(weight * kappa * _mass_rows(mesh, U.values).sum())


def cost_evaluate(traj: TrajectoryRecord, U: ControlSignal | None, spec: CostSpec) -> float:
    """Left-endpoint quadrature of the running cost plus the terminal payoff."""
    if U is not None:
        if not U.is_piecewise:
            raise DataError("cost_evaluate needs the projected (piecewise constant) control")
        if U.values.shape != (traj.steps, traj.mesh.node_count):
            raise DataError(f"control on {U.values.shape[0]} intervals, trajectory has {traj.steps}")
    total = running_state_cost(traj, spec) + control_cost(traj.mesh, U, traj.kappa, spec.control_weight)
    return total + spec.psi(traj.mesh, traj.states[-1])


# --------------------------------------------------------------------------
# control family


@dataclass(frozen=True)
class ControlFamily:
    """Atoms: indicator of time block b times sin(m pi (x - a) / L), m = 1..modes.

    Coefficient ``theta[b * modes + (m - 1)]`` multiplies atom (b, m).
    """

    mesh: SpatialMesh
    horizon: float
    time_blocks: int = 2
    modes: int = 2

    def __post_init__(self):
        if self.time_blocks < 1 or self.modes < 1:
            raise ConfigurationError("control family needs at least one block and one mode")

    @property
    def size(self) -> int:
        return self.time_blocks * self.modes

    def spatial_atoms(self) -> np.ndarray:
        x = (self.mesh.nodes - self.mesh.a) / self.mesh.length
        return np.array([np.sin(m * np.pi * x) for m in range(1, self.modes + 1)])

    def gram(self) -> np.ndarray:
        """G_ij = int_0^T (atom_i, atom_j)_{L2} dt; block diagonal in time."""
        e = self.spatial_atoms()
        Ms = e @ self.mesh.mass_dense() @ e.T
        return np.kron(np.eye(self.time_blocks) * (self.horizon / self.time_blocks), Ms)

    def realize(self, theta, steps: int) -> ControlSignal:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,):
            raise DataError(f"theta has shape {theta.shape}, family has {self.size} atoms")
        if steps % self.time_blocks:
            raise DataError(f"{steps} steps do not split into {self.time_blocks} time blocks")
        fields = theta.reshape(self.time_blocks, self.modes) @ self.spatial_atoms()
        return ControlSignal(values=np.repeat(fields, steps // self.time_blocks, axis=0))

    def penalty(self, theta, weight: float = 1.0) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(weight * theta @ self.gram() @ theta)


# --------------------------------------------------------------------------
# Monte Carlo cost


@dataclass
class CostEstimate:
    mean: float
    se: float
    paths: int
    failures: int
    control_term: float

    @property
    def partial(self) -> bool:
        return self.failures > 0


def mc_cost_estimate(
    model: ModelSpec,
    cfg: SchemeConfig,
    theta,
    family: ControlFamily,
    spec: CostSpec,
    rng: RngPolicy,
    n_paths: int,
    path_offset: int = 0,
    mapper=map,
) -> CostEstimate:
    """Sample mean and standard error of the single-path cost.

    Paths ``path_offset .. path_offset + n_paths - 1`` are used, so calls with
    equal offsets share noise streams (common random numbers).
    """
    if n_paths < 2:
        raise ConfigurationError("n_paths must be >= 2")
    U = family.realize(theta, cfg.steps)
    ctrl = control_cost(model.mesh, U, cfg.kappa, spec.control_weight)

    def one(j):
        try:
            traj = run_trajectory(model, cfg, U, rng, path_offset + j, record_noise=False)
        except (SolverError, NumericError) as exc:
            logger.warning("path %d failed: %s", path_offset + j, exc)
            return None
        return running_state_cost(traj, spec) + spec.psi(model.mesh, traj.states[-1])

    vals = [v for v in mapper(one, range(n_paths))]
    ok = np.array([v for v in vals if v is not None], dtype=float)
    failures = len(vals) - ok.size
    if ok.size == 0:
        return CostEstimate(np.nan, np.nan, 0, failures, ctrl)
    se = float(ok.std(ddof=1) / np.sqrt(ok.size)) if ok.size > 1 else np.nan
    return CostEstimate(float(ok.mean()) + ctrl, se, int(ok.size), failures, ctrl)


@dataclass
class OptimizationResult:
    theta: np.ndarray
    incumbents: list  # accepted incumbent costs, non-increasing
    trace: list  # (iteration, theta, mean, se) for every evaluation
    status: str
    evaluations: int


def optimize_control(
    model: ModelSpec,
    cfg: SchemeConfig,
    family: ControlFamily,
    spec: CostSpec,
    rng: RngPolicy,
    budget: int = 40,
    n_paths: int = 8,
    theta0=None,
    step: float = 0.5,
    shrink: float = 0.5,
    min_step: float = 1e-3,
    mapper=map,
) -> OptimizationResult:
    """Coordinate search with shrinking steps on the common-random-numbers cost.

    A trial point replaces the incumbent only when its estimated cost is
    strictly lower, so the incumbent sequence never increases.
    """
    if np.linalg.eigvalsh(family.gram()).min() <= 0.0:
        raise ConfigurationError("control family Gram matrix is not positive definite")
    if budget < 1:
        raise ConfigurationError("budget must be >= 1")
    theta = np.zeros(family.size) if theta0 is None else np.array(theta0, dtype=float)

    def evaluate(th):
        return mc_cost_estimate(model, cfg, th, family, spec, rng, n_paths, mapper=mapper)

    best = evaluate(theta)
    evals = 1
    trace = [(0, theta.copy(), best.mean, best.se)]
    incumbents = [best.mean]
    improved_ever = False
    status = "budget_exhausted"
    while True:
        improved = False
        for i in range(family.size):
            for sign in (1.0, -1.0):
                if evals >= budget:
                    break
                trial = theta.copy()
                trial[i] += sign * step
                est = evaluate(trial)
                evals += 1
                trace.append((evals - 1, trial.copy(), est.mean, est.se))
                if np.isfinite(est.mean) and est.mean < best.mean:
                    theta, best = trial, est
                    incumbents.append(best.mean)
                    improved = improved_ever = True
                    break
        if evals >= budget:
            break
        if not improved:
            step *= shrink
            if step < min_step:
                status = "converged"
                break
    if not improved_ever:
        status = "no_improvement"
    return OptimizationResult(theta, incumbents, trace, status, evals)
