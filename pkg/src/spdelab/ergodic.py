"""Time-averaged occupation measures of the uncontrolled equation.

A single long trajectory with burn-in stands in for the Cesaro average
(1/T) int P_t^* delta_{u0} dt; batch means quantify the Monte Carlo error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .diagnostics import dissipativity_margin
from .errors import ConfigurationError, DataError, NumericError, SolverError
from .grid import SpatialMesh
from .model import ModelSpec, chg_constant
from .noise import RngPolicy
from .scheme import SchemeConfig, iterate_states, run_trajectory

logger = logging.getLogger(__name__)


@dataclass
class EmpiricalMeasure:
    mesh: SpatialMesh
    snapshots: np.ndarray  # (K, M)
    times: np.ndarray
    burn_in: float
    stride: int
    horizon: float
    steps_run: int
    partial: bool = False
    error: str | None = None
    min_margin: float | None = None
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.snapshots.shape[0]

    def l2_norms(self) -> np.ndarray:
        if "l2" not in self.cache:
            m = self.mesh.mass_dense()
            self.cache["l2"] = np.sqrt(np.einsum("ij,jk,ik->i", self.snapshots, m, self.snapshots))
        return self.cache["l2"]


def time_average_measure(
    model: ModelSpec,
    cfg_long: SchemeConfig,
    rng: RngPolicy,
    path: int = 0,
    burn_in: float = 0.0,
    stride: int = 1,
    delta: float | None = None,
    u0=None,
) -> EmpiricalMeasure:
    """Snapshots every ``stride`` steps after ``burn_in`` (time units), U = 0.

    With ``delta`` the dissipativity margin is tracked at every step and its
    minimum recorded.  A solver failure ends the run early with
    ``partial = True``.
    """
    if not 0.0 <= burn_in < cfg_long.horizon:
        raise ConfigurationError("burn_in must lie in [0, horizon)")
    if stride < 1:
        raise ConfigurationError("stride must be >= 1")
    burn_steps = int(np.ceil(burn_in / cfg_long.kappa - 1e-9))
    count = (cfg_long.steps - burn_steps) // stride
    marks = set(burn_steps + stride * (j + 1) for j in range(count))
    snaps, times = [], []
    min_margin = np.inf if delta is not None else None
    partial, error, last = False, None, 0
    try:
        for k, u in iterate_states(model, cfg_long, rng, path, u0=u0):
            last = k
            if not np.all(np.isfinite(u)):
                raise NumericError(f"non-finite state at step {k}")
            if delta is not None:
                min_margin = min(min_margin, dissipativity_margin(model, u, delta))
            if k in marks:
                snaps.append(u.copy())
                times.append(k * cfg_long.kappa)
    except (SolverError, NumericError) as exc:
        partial, error = True, str(exc)
        logger.warning("long run stopped early: %s", exc)
    arr = np.array(snaps) if snaps else np.empty((0, model.mesh.node_count))
    return EmpiricalMeasure(
        model.mesh, arr, np.array(times), burn_in, stride, cfg_long.horizon, last, partial, error, min_margin
    )


@dataclass(frozen=True)
class TestFunctional:
    """phi(u) = exp(-c ||u||^2) (``exp``) or tanh((u, w)) (``tanh``); both bounded by 1."""

    __test__ = False  # not a pytest class

    kind: str = "exp"
    c: float = 1.0
    w: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("exp", "tanh"):
            raise ConfigurationError(f"test functional kind must be 'exp' or 'tanh', got {self.kind!r}")
        if self.kind == "exp" and self.c < 0.0:
            raise ConfigurationError("c must be >= 0")
        if self.kind == "tanh" and self.w is None:
            raise ConfigurationError("tanh functional needs a weight field w")

    def __call__(self, mesh: SpatialMesh, u) -> float:
        if self.kind == "exp":
            return float(np.exp(-self.c * mesh.l2_norm_sq(u)))
        return float(np.tanh(mesh.inner(u, np.asarray(self.w, dtype=float))))

    def batch(self, mesh: SpatialMesh, states) -> np.ndarray:
        return np.array([self(mesh, u) for u in states])


def batch_means_se(x, batches: int = 10) -> float:
    """Standard error of the mean of a correlated series from non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    b = min(batches, x.size)
    if b < 2:
        return np.nan
    size = x.size // b
    means = x[: b * size].reshape(b, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(b))


@dataclass
class AverageReport:
    running: np.ndarray
    cauchy_gap: float
    final: float
    se: float


def test_function_average(measure: EmpiricalMeasure, phi: TestFunctional, m0: int | None = None, batches: int = 10) -> AverageReport:
    """Prefix averages A_m and the tail gap max_{m >= m0} |A_m - A_last|."""
    if measure.size < 2:
        raise DataError("need at least two snapshots")
    vals = phi.batch(measure.mesh, measure.snapshots)
    running = np.cumsum(vals) / np.arange(1, vals.size + 1)
    m0 = vals.size // 2 if m0 is None else m0
    gap = float(np.max(np.abs(running[max(m0 - 1, 0):] - running[-1])))
    return AverageReport(running, gap, float(running[-1]), batch_means_se(vals, batches))


test_function_average.__test__ = False


def markov_bound(model: ModelSpec, radius: float, delta: float, horizon: float, u0=None) -> float:
    """(2 ||K1||_{L1} + C_hg + ||u0||^2 / T) / (R^p delta)."""
    if radius <= 0.0:
        return np.inf
    k1 = model.flux.constants()["K1"] * model.mesh.length
    u0 = model.u0 if u0 is None else np.asarray(u0, dtype=float)
    num = 2.0 * k1 + chg_constant(model) + model.mesh.l2_norm_sq(u0) / horizon
    return float(num / (radius ** model.flux.p * delta))


PROFILE_COLUMNS = ("radius", "fraction", "se", "bound")


def boundedness_profile(measure: EmpiricalMeasure, radii, model: ModelSpec, delta: float, u0=None, batches: int = 10):
    """Rows (R, frac(R), batch-means se, analytic bound)."""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 0.0) or np.any(np.diff(radii) <= 0.0):
        raise ConfigurationError("radii must be non-negative and increasing")
    norms = measure.l2_norms()
    rows = []
    for r in radii:
        ind = (norms > r).astype(float)
        se = batch_means_se(ind, batches) if ind.size else np.nan
        frac = float(ind.mean()) if ind.size else np.nan
        rows.append((float(r), frac, se, markov_bound(model, r, delta, measure.horizon, u0)))
    return rows


@dataclass
class FellerReport:
    levels: np.ndarray
    values: np.ndarray  # estimates of (P_t phi)(v_n)
    base: float  # estimate of (P_t phi)(v)
    differences: np.ndarray
    rho: float
    p_value: float

    @property
    def decreasing(self) -> bool:
        return bool(self.rho < 0.0 and self.p_value < 0.05)


def oscillation_sequence(mesh: SpatialMesh, v, amplitude: float, levels: int = 6):
    """v_n = v + amplitude * sin(2^n pi (x - a) / L), n = 0..levels-1."""
    x = (mesh.nodes - mesh.a) / mesh.length
    return [np.asarray(v, dtype=float) + amplitude * np.sin(2.0**n * np.pi * x) for n in range(levels)]


def weak_feller_probe(
    model: ModelSpec,
    cfg: SchemeConfig,
    rng: RngPolicy,
    phi: TestFunctional,
    v,
    v_sequence,
    paths: int = 256,
    mapper=map,
) -> FellerReport:
    """Common-noise estimates of (P_t phi)(v_n) and their distance to (P_t phi)(v).

    The rank correlation of the distances with n is tested one-sided for a
    negative trend.
    """
    mesh = model.mesh

    def terminal(u0):
        def one(j):
            return phi(mesh, run_trajectory(model, cfg, None, rng, j, record_noise=False, u0=u0).states[-1])

        return float(np.mean(list(mapper(one, range(paths)))))

    base = terminal(v)
    values = np.array([terminal(vn) for vn in v_sequence])
    diffs = np.abs(values - base)
    levels = np.arange(len(v_sequence))
    if np.all(diffs == diffs[0]):
        rho, pval = 0.0, 1.0
    else:
        res = stats.spearmanr(levels, diffs, alternative="less")
        rho, pval = float(res.statistic), float(res.pvalue)
    return FellerReport(levels, values, base, diffs, rho, pval)
