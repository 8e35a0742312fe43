"""Parametric coefficient families for the p-Laplace SPDE and their validation.

The simulated equation is

    du - div(A(x, u, grad u) + F(u)) dt = U dt + h(u) dW + int_E eta(x, u; z) N~(dz, dt)

with homogeneous Dirichlet data on a 1D interval.  Every family exposes the
structural constants (C1..C5, K1..K3, L_sigma, c_gamma, ...) that the
a-priori and invariant-measure bounds are stated in terms of.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special

from .errors import ConfigurationError, ValidationError
from .grid import SpatialMesh

FLUX_KINDS = ("plaplace", "oracle", "adversarial")


@dataclass(frozen=True)
class FluxModel:
    """A(x, lam, zeta) = sign * c(x, lam) * (eps^2 + zeta^2)^((p-2)/2) * zeta.

    ``c(x, lam) = c0 (1 + amp_x sin(2 pi (x - a)/|D|)) (1 + amp_lambda tanh(lam))``.
    ``kind="oracle"`` permits p = 2; ``kind="adversarial"`` flips the sign and
    exists only to exercise the monotonicity check.
    """

    p: float = 4.0
    c0: float = 1.0
    amp_x: float = 0.0
    amp_lambda: float = 0.0
    eps_reg: float = 1e-8
    kind: str = "plaplace"

    def __post_init__(self):
        if self.kind not in FLUX_KINDS:
            raise ConfigurationError(f"flux kind must be one of {FLUX_KINDS}, got {self.kind!r}")
        if self.kind == "oracle":
            if self.p < 2.0:
                raise ConfigurationError("oracle flux needs p >= 2")
        elif not self.p > 2.0:
            raise ConfigurationError(f"flux exponent must satisfy p > 2 (got {self.p}); use kind='oracle' for p = 2")
        if not self.c0 > 0.0:
            raise ConfigurationError("flux c0 must be positive")
        if not (abs(self.amp_x) < 1.0 and abs(self.amp_lambda) < 1.0):
            raise ConfigurationError("flux amplitudes must lie in (-1, 1)")
        if self.eps_reg < 0.0:
            raise ConfigurationError("eps_reg must be >= 0")

    @property
    def sign(self) -> float:
        return -1.0 if self.kind == "adversarial" else 1.0

    def coefficient(self, x, lam, mesh: SpatialMesh):
        phase = 2.0 * np.pi * (np.asarray(x) - mesh.a) / mesh.length
        return self.c0 * (1.0 + self.amp_x * np.sin(phase)) * (1.0 + self.amp_lambda * np.tanh(lam))

    def value(self, x, lam, zeta, mesh: SpatialMesh):
        zeta = np.asarray(zeta, dtype=float)
        c = self.coefficient(x, lam, mesh)
        return self.sign * c * (self.eps_reg**2 + zeta * zeta) ** (0.5 * (self.p - 2.0)) * zeta

    @property
    def c_min(self) -> float:
        return self.c0 * (1.0 - abs(self.amp_x)) * (1.0 - abs(self.amp_lambda))

    @property
    def c_max(self) -> float:
        return self.c0 * (1.0 + abs(self.amp_x)) * (1.0 + abs(self.amp_lambda))

    @property
    def lip_lambda(self) -> float:
        """Global Lipschitz constant of c(x, .)."""
        return self.c0 * (1.0 + abs(self.amp_x)) * abs(self.amp_lambda)

    def _growth_split(self):
        """(k, k_eps) with (eps^2+z^2)^((p-2)/2)|z| <= k|z|^(p-1) + k_eps."""
        p, eps = self.p, self.eps_reg
        if eps == 0.0 or p == 2.0:
            return 1.0, 0.0
        r = 0.5 * (p - 2.0)
        kp = max(1.0, 2.0 ** (r - 1.0))
        e = eps ** (p - 2.0)
        return kp * (1.0 + e), kp * e

    def constants(self) -> dict:
        k, k_eps = self._growth_split()
        return {
            "p": self.p,
            "C1": self.c_min,
            "K1": 0.0,
            "C2": self.c_max * k,
            "C3": 0.0,
            "K2": self.c_max * k_eps,
            "C4": self.lip_lambda * k,
            "K3": self.lip_lambda * k_eps,
            # (eps^2 + z^2)^((p-2)/2) >= |z|^(p-2) for p >= 2, so the
            # regularization costs nothing in the coercivity constant
            "K1_eff": 0.0,
        }


@dataclass(frozen=True)
class ConvectionModel:
    """F(u) = b u (``linear``) or F(u) = b s tanh(u / s) (``saturated``)."""

    mode: str = "saturated"
    b: float = 0.5
    s: float = 1.0

    def __post_init__(self):
        if self.mode not in ("linear", "saturated"):
            raise ConfigurationError(f"convection mode must be 'linear' or 'saturated', got {self.mode!r}")
        if self.mode == "saturated" and not self.s > 0.0:
            raise ConfigurationError("saturation level s must be positive")

    def value(self, u):
        u = np.asarray(u, dtype=float)
        if self.mode == "linear":
            return self.b * u
        return self.b * self.s * np.tanh(u / self.s)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.mode == "linear":
            return np.full_like(u, self.b)
        t = np.tanh(u / self.s)
        return self.b * (1.0 - t * t)

    @property
    def lipschitz(self) -> float:
        return abs(self.b)

    @property
    def mode_code(self) -> float:
        return 0.0 if self.mode == "linear" else 1.0


@dataclass(frozen=True)
class WienerDiffusionModel:
    """h_n(xi) = sigma n^-(1+a) xi (``linear``) or sigma n^-(1+a) sin(xi) (``bounded``)."""

    n_modes: int = 32
    sigma: float = 0.5
    decay: float = 0.5
    variant: str = "linear"

    def __post_init__(self):
        if self.n_modes < 1:
            raise ConfigurationError("n_modes must be >= 1")
        if self.sigma < 0.0:
            raise ConfigurationError("sigma must be >= 0")
        if not self.decay > 0.0:
            raise ConfigurationError("decay must be > 0")
        if self.variant not in ("linear", "bounded"):
            raise ConfigurationError(f"diffusion variant must be 'linear' or 'bounded', got {self.variant!r}")

    @cached_property
    def coefficients(self) -> np.ndarray:
        n = np.arange(1, self.n_modes + 1, dtype=float)
        return self.sigma * n ** (-(1.0 + self.decay))

    def profile(self, xi):
        xi = np.asarray(xi, dtype=float)
        return xi if self.variant == "linear" else np.sin(xi)

    def h_values(self, xi):
        """Array of shape (n_modes, *xi.shape) holding h_n(xi)."""
        return np.multiply.outer(self.coefficients, self.profile(xi))

    def noise_field(self, u, dbeta):
        """sum_n h_n(u(x)) dbeta_n at the nodes."""
        return self.profile(u) * float(np.dot(self.coefficients, dbeta))

    @property
    def c5(self) -> float:
        return float(np.sum(self.coefficients**2))

    @property
    def l_sigma(self) -> float:
        return self.c5

    @property
    def tail_fraction(self) -> float:
        """Share of the infinite-mode constant dropped by truncation."""
        if self.sigma == 0.0:
            return 0.0
        full = self.sigma**2 * special.zeta(2.0 + 2.0 * self.decay, 1.0)
        return float(max(full - self.c5, 0.0) / full)


LEVY_VARIANTS = ("compound_poisson", "tempered_truncated")


@dataclass(frozen=True)
class LevyMeasureSpec:
    """Jump intensity m on R* (the O-factor of E is a unit point mass).

    ``compound_poisson``: m(dz) = rate * q(z) dz, q a normal or Laplace density.
    ``tempered_truncated``: m(dz) = c exp(-beta |z|) |z|^(-1-alpha) dz on |z| >= eps_jump.
    """

    variant: str = "compound_poisson"
    rate: float = 2.0
    density: str = "normal"
    loc: float = 0.0
    scale: float = 0.5
    alpha: float = 0.8
    beta: float = 1.0
    c: float = 0.5
    eps_jump: float = 1e-3

    def __post_init__(self):
        if self.variant not in LEVY_VARIANTS:
            raise ConfigurationError(f"levy variant must be one of {LEVY_VARIANTS}, got {self.variant!r}")
        if self.variant == "compound_poisson":
            if self.rate < 0.0 or not math.isfinite(self.rate):
                raise ConfigurationError("jump rate must be finite and >= 0")
            if self.density not in ("normal", "laplace"):
                raise ConfigurationError(f"jump density must be 'normal' or 'laplace', got {self.density!r}")
            if not self.scale > 0.0:
                raise ConfigurationError("jump density scale must be positive")
        else:
            if not 0.0 < self.alpha < 2.0:
                raise ConfigurationError("tempered alpha must lie in (0, 2)")
            if not self.beta > 0.0 or self.c < 0.0:
                raise ConfigurationError("tempered measure needs beta > 0 and c >= 0")
            if not self.eps_jump > 0.0:
                raise ConfigurationError("eps_jump must be positive")

    # -- densities ---------------------------------------------------------
    def density_fn(self, z):
        """Density of m with respect to Lebesgue measure on R*."""
        z = np.asarray(z, dtype=float)
        if self.variant == "compound_poisson":
            if self.density == "normal":
                q = np.exp(-0.5 * ((z - self.loc) / self.scale) ** 2) / (self.scale * math.sqrt(2.0 * math.pi))
            else:
                q = np.exp(-np.abs(z - self.loc) / self.scale) / (2.0 * self.scale)
            return self.rate * q
        az = np.abs(z)
        with np.errstate(divide="ignore"):
            out = self.c * np.exp(-self.beta * az) * az ** (-1.0 - self.alpha)
        return np.where(az >= self.eps_jump, out, 0.0)

    @cached_property
    def quadrature(self):
        """(nodes, weights) with sum w_i f(z_i) ~ int f dm for f smooth off {-1, 0, 1}."""
        xs, ws = np.polynomial.legendre.leggauss(16)
        edges = self._panel_edges()
        lo, hi = edges[:-1], edges[1:]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        nodes = (mid[:, None] + half[:, None] * xs[None, :]).ravel()
        weights = (half[:, None] * ws[None, :]).ravel() * self.density_fn(nodes)
        keep = weights > 0.0
        return nodes[keep], weights[keep]

    def _panel_edges(self) -> np.ndarray:
        if self.variant == "compound_poisson":
            width = 40.0 * self.scale if self.density == "laplace" else 12.0 * self.scale
            lo, hi = self.loc - width, self.loc + width
            brk = [lo, hi, self.loc] + [v for v in (-1.0, 0.0, 1.0) if lo < v < hi]
            brk = np.unique(np.array(brk))
            pieces = []
            for a, b in zip(brk[:-1], brk[1:]):
                n = max(1, int(math.ceil((b - a) / (0.5 * self.scale))))
                pieces.append(np.linspace(a, b, n + 1)[:-1])
            pieces.append(brk[-1:])
            return np.concatenate(pieces)
        eps = self.eps_jump
        zmax = max(1.0, eps) + 60.0 / self.beta
        small = np.geomspace(eps, 1.0, max(2, int(math.ceil(math.log(1.0 / eps) / math.log(1.5))) + 1)) if eps < 1.0 else np.array([eps])
        large_start = max(1.0, eps)
        large = np.linspace(large_start, zmax, max(2, int(math.ceil((zmax - large_start) / (0.5 / self.beta))) + 1))
        pos = np.unique(np.concatenate([small, large]))
        return np.concatenate([-pos[::-1], pos])  # the gap (-eps, eps) carries zero density

    def integrate(self, fn) -> float:
        nodes, weights = self.quadrature
        return float(np.dot(weights, fn(nodes)))

    @cached_property
    def total_mass(self) -> float:
        if self.variant == "compound_poisson":
            return float(self.rate)
        # 2 c int_eps^inf e^{-beta z} z^{-1-alpha} dz = 2 c beta^alpha Gamma(-alpha, beta eps)
        return float(2.0 * self.c * self.beta**self.alpha * _upper_gamma_negative(-self.alpha, self.beta * self.eps_jump))

    @cached_property
    def truncated_gamma_mass(self) -> float:
        """int_{|z| < eps_jump} gamma(z)^2 m_full(dz): the part of c_gamma lost to truncation."""
        if self.variant == "compound_poisson":
            return 0.0
        e = min(self.eps_jump, 1.0)
        return float(2.0 * self.c * self.beta ** (self.alpha - 2.0) * special.gammainc(2.0 - self.alpha, self.beta * e) * special.gamma(2.0 - self.alpha))

    def sample_marks(self, gen: np.random.Generator, n: int) -> np.ndarray:
        if n == 0:
            return np.empty(0)
        if self.variant == "compound_poisson":
            if self.density == "normal":
                return self.loc + self.scale * gen.standard_normal(n)
            return gen.laplace(self.loc, self.scale, n)
        out = np.empty(0)
        eps, alpha, beta = self.eps_jump, self.alpha, self.beta
        # Pareto proposal on [eps, inf) thinned by the exponential tempering
        while out.size < n:
            k = 2 * (n - out.size) + 8
            z = eps * gen.random(k) ** (-1.0 / alpha)
            accept = gen.random(k) < np.exp(-beta * (z - eps))
            out = np.concatenate([out, z[accept]])
        out = out[:n]
        signs = np.where(gen.random(n) < 0.5, -1.0, 1.0)
        return signs * out

    def mark_cdf(self, z):
        """CDF of the normalized mark law (used by goodness-of-fit checks)."""
        from scipy import stats

        z = np.atleast_1d(np.asarray(z, dtype=float))
        if self.variant == "compound_poisson":
            if self.density == "normal":
                return stats.norm.cdf(z, self.loc, self.scale)
            return stats.laplace.cdf(z, self.loc, self.scale)

        def tail(t):
            # c int_t^inf exp(-beta s) s^(-1-alpha) ds = c beta^alpha Gamma(-alpha, beta t)
            t = max(t, self.eps_jump)
            return self.c * self.beta**self.alpha * _upper_gamma_negative(-self.alpha, self.beta * t)

        out = np.empty_like(z)
        for i, t in enumerate(z):
            if t <= -self.eps_jump:
                out[i] = tail(-t) / self.total_mass
            elif t < self.eps_jump:
                out[i] = 0.5
            else:
                out[i] = 1.0 - tail(t) / self.total_mass
        return out


def _upper_gamma_negative(a: float, x: float) -> float:
    """Upper incomplete gamma Gamma(a, x) for a in (-2, 0), x > 0."""
    # recurrence Gamma(a+1, x) = a Gamma(a, x) + x^a e^{-x}
    if a > -1.0:
        g1 = special.gammaincc(a + 1.0, x) * special.gamma(a + 1.0)
        return (g1 - x**a * math.exp(-x)) / a
    if a == -1.0:
        return float(math.exp(-x) / x - special.exp1(x))
    g2 = special.gammaincc(a + 2.0, x) * special.gamma(a + 2.0)
    g1 = (g2 - x ** (a + 1.0) * math.exp(-x)) / (a + 1.0)
    return (g1 - x**a * math.exp(-x)) / a


def gamma_weight(z):
    """gamma(z) = min(1, |z|)."""
    return np.minimum(1.0, np.abs(z))


@dataclass(frozen=True)
class JumpModel:
    """eta(x, zeta; z) = gamma(z) (g(x) + lambda_star zeta), g >= 0 bounded."""

    lambda_star: float = 0.3
    g0: float = 0.5
    g_profile: str = "sine"
    levy: LevyMeasureSpec = field(default_factory=LevyMeasureSpec)

    def __post_init__(self):
        if self.g0 < 0.0:
            raise ConfigurationError("g0 must be >= 0")
        if self.g_profile not in ("sine", "constant"):
            raise ConfigurationError(f"g_profile must be 'sine' or 'constant', got {self.g_profile!r}")

    def g(self, x, mesh: SpatialMesh):
        x = np.asarray(x, dtype=float)
        if self.g_profile == "constant":
            return np.full_like(x, self.g0)
        return self.g0 * np.sin(np.pi * (x - mesh.a) / mesh.length)

    def g_sup(self) -> float:
        return self.g0

    def g_lipschitz(self, mesh: SpatialMesh) -> float:
        return 0.0 if self.g_profile == "constant" else self.g0 * math.pi / mesh.length

    def envelope_sup(self) -> float:
        """sup of g~ = max(g, lambda_star), the multiplier in the growth envelope of eta."""
        return max(self.g_sup(), self.lambda_star)

    def eta(self, x, zeta, z, mesh: SpatialMesh):
        return gamma_weight(z) * (self.g(x, mesh) + self.lambda_star * np.asarray(zeta, dtype=float))

    @cached_property
    def gamma_integral(self) -> float:
        return self.levy.integrate(gamma_weight)

    @cached_property
    def c_gamma(self) -> float:
        return self.levy.integrate(lambda z: gamma_weight(z) ** 2)


@dataclass(frozen=True)
class ModelSpec:
    mesh: SpatialMesh
    flux: FluxModel
    convection: ConvectionModel
    diffusion: WienerDiffusionModel
    jumps: JumpModel
    u0: np.ndarray = field(compare=False)

    def __post_init__(self):
        u0 = np.asarray(self.u0, dtype=float)
        if u0.shape != (self.mesh.node_count,):
            raise ConfigurationError(f"u0 has shape {u0.shape}, mesh has {self.mesh.node_count} nodes")
        object.__setattr__(self, "u0", u0)

    def flux_params(self) -> np.ndarray:
        f, c, m = self.flux, self.convection, self.mesh
        return np.array(
            [f.p, f.eps_reg, f.c0, f.amp_x, f.amp_lambda, f.sign, c.mode_code, c.b, c.s, m.a, m.length],
            dtype=float,
        )

    def replace(self, **changes) -> "ModelSpec":
        from dataclasses import replace

        return replace(self, **changes)

    @property
    def g_nodal(self) -> np.ndarray:
        return self.jumps.g(self.mesh.nodes, self.mesh)

    def eta_nodal_factor(self, u) -> np.ndarray:
        """g(x_i) + lambda_star u_i: eta at node i equals gamma(z) times this."""
        return self.g_nodal + self.jumps.lambda_star * u


def compensator_field(model: ModelSpec, u) -> np.ndarray:
    """Nodal values of x -> int_E eta(x, u(x); z) m(dz) (fixed quadrature in z)."""
    val = model.eta_nodal_factor(np.asarray(u, dtype=float)) * model.jumps.gamma_integral
    if not np.all(np.isfinite(val)):
        from .errors import NumericError

        raise NumericError("non-finite compensator")
    return val


def chg_constant(model: ModelSpec) -> float:
    """C_hg = 2 (C5 + c_gamma ||g~||_inf^2)(1 + |D|)."""
    return 2.0 * (model.diffusion.c5 + model.jumps.c_gamma * model.jumps.envelope_sup() ** 2) * (1.0 + model.mesh.length)


@dataclass
class CheckResult:
    passed: bool
    detail: str = ""
    samples: int = 0
    worst: float = 0.0

    def to_dict(self):
        return {"passed": bool(self.passed), "detail": self.detail, "samples": int(self.samples), "worst": float(self.worst)}


@dataclass
class AssumptionReport:
    checks: dict
    constants: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list:
        return [k for k, c in self.checks.items() if not c.passed]

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": {k: v.to_dict() for k, v in self.checks.items()},
            "constants": {k: float(v) for k, v in self.constants.items()},
        }


def _log_uniform_signed(gen, n, lo=-3.0, hi=2.0):
    mag = 10.0 ** gen.uniform(lo, hi, n)
    return np.where(gen.random(n) < 0.5, -mag, mag)


def model_constants(model: ModelSpec) -> dict:
    out = dict(model.flux.constants())
    out.update(
        {
            "F_lipschitz": model.convection.lipschitz,
            "C5": model.diffusion.c5,
            "L_sigma": model.diffusion.l_sigma,
            "wiener_tail_fraction": model.diffusion.tail_fraction,
            "lambda_star": model.jumps.lambda_star,
            "L_eta": model.jumps.g_lipschitz(model.mesh),
            "g_sup": model.jumps.g_sup(),
            "g_envelope_sup": model.jumps.envelope_sup(),
            "c_gamma": model.jumps.c_gamma,
            "gamma_integral": model.jumps.gamma_integral,
            "levy_total_mass": model.jumps.levy.total_mass,
            "levy_truncated_gamma_mass": model.jumps.levy.truncated_gamma_mass,
            "domain_length": model.mesh.length,
        }
    )
    out["C_hg"] = chg_constant(model)
    return out


def validate_assumptions(model: ModelSpec, sample_budget: int = 10_000, seed: int = 20240611) -> AssumptionReport:
    """Randomized plus analytic check of the structural assumptions.

    Every sampled inequality is checked with a relative slack of 1e-12.
    """
    if sample_budget < 1:
        raise ConfigurationError("sample_budget must be >= 1")
    consts = model_constants(model)
    bad = [k for k, v in consts.items() if not math.isfinite(v)]
    if bad:
        raise ValidationError(f"non-finite model constants: {', '.join(bad)}")

    gen = np.random.default_rng(seed)
    n = int(sample_budget)
    mesh, flux = model.mesh, model.flux
    checks = {}
    rtol = 1e-12
    p = flux.p

    checks["A1"] = CheckResult(bool(np.all(np.isfinite(model.u0))), "initial datum finite", model.u0.size)

    x = gen.uniform(mesh.a, mesh.b, n)
    lam = _log_uniform_signed(gen, n)
    z1 = _log_uniform_signed(gen, n)
    z2 = _log_uniform_signed(gen, n)
    a1 = flux.value(x, lam, z1, mesh)
    a2 = flux.value(x, lam, z2, mesh)
    mono = (a1 - a2) * (z1 - z2)
    scale = np.abs(a1 * z1) + np.abs(a2 * z2) + np.abs(a1 * z2) + np.abs(a2 * z1)
    checks["A2(i)"] = CheckResult(
        bool(np.all(mono >= -rtol * scale)), "(A(z1)-A(z2))(z1-z2) >= 0", n, float(np.min(mono))
    )

    coer = a1 * z1 - (consts["C1"] * np.abs(z1) ** p - consts["K1"])
    ok_range = p > 2.0 or flux.kind == "oracle"
    checks["A2(ii)"] = CheckResult(
        bool(consts["C1"] > 0 and np.all(coer >= -rtol * np.abs(a1 * z1)) and ok_range),
        f"A.z >= C1|z|^p - K1 with C1={consts['C1']:.6g}, p={p}",
        n,
        float(np.min(coer)),
    )

    bound = consts["C2"] * np.abs(z1) ** (p - 1.0) + consts["C3"] * np.abs(lam) ** (p - 1.0) + consts["K2"]
    gap = bound - np.abs(a1)
    checks["A2(iii)"] = CheckResult(bool(np.all(gap >= -rtol * bound)), "|A| <= C2|z|^(p-1) + C3|lam|^(p-1) + K2", n, float(np.min(gap)))

    lam2 = _log_uniform_signed(gen, n)
    a3 = flux.value(x, lam2, z1, mesh)
    lip = (consts["C4"] * np.abs(z1) ** (p - 1.0) + consts["K3"]) * np.abs(lam - lam2)
    gap = lip - np.abs(a1 - a3)
    checks["A2(iv)"] = CheckResult(bool(np.all(gap >= -rtol * (lip + np.abs(a1) + np.abs(a3)))), "Lipschitz in lam", n, float(np.min(gap)))

    conv = model.convection
    u1 = _log_uniform_signed(gen, n)
    u2 = _log_uniform_signed(gen, n)
    diff = conv.lipschitz * np.abs(u1 - u2) - np.abs(conv.value(u1) - conv.value(u2))
    checks["A3"] = CheckResult(
        bool(float(conv.value(0.0)) == 0.0 and np.all(diff >= -rtol * (np.abs(conv.value(u1)) + np.abs(conv.value(u2)) + 1e-300))),
        "F(0)=0 and Lipschitz",
        n,
        float(np.min(diff)),
    )

    dif = model.diffusion
    xi = _log_uniform_signed(gen, n)
    zeta = _log_uniform_signed(gen, n)
    s1 = np.sum(dif.h_values(xi) ** 2, axis=0)
    s2 = np.sum((dif.h_values(xi) - dif.h_values(zeta)) ** 2, axis=0)
    g1 = dif.c5 * (1.0 + xi**2) - s1
    g2 = dif.l_sigma * (xi - zeta) ** 2 - s2
    checks["A4"] = CheckResult(
        bool(np.all(g1 >= -rtol * (1.0 + s1)) and np.all(g2 >= -rtol * (1.0 + s2))),
        f"sum h_n^2 <= C5(1+xi^2), Lipschitz with L_sigma={dif.l_sigma:.6g}",
        n,
        float(min(np.min(g1), np.min(g2))),
    )

    lev = model.jumps.levy
    checks["A5"] = CheckResult(
        bool(math.isfinite(lev.total_mass) and math.isfinite(model.jumps.c_gamma)),
        f"truncated mass {lev.total_mass:.6g}, c_gamma {model.jumps.c_gamma:.6g}",
    )

    jm = model.jumps
    in_range = 0.0 <= jm.lambda_star < 1.0
    xa = gen.uniform(mesh.a, mesh.b, n)
    xb = gen.uniform(mesh.a, mesh.b, n)
    za = _log_uniform_signed(gen, n)
    zb = _log_uniform_signed(gen, n)
    zz = _log_uniform_signed(gen, n, -4.0, 2.0)
    e1 = jm.eta(xa, za, zz, mesh)
    e2 = jm.eta(xb, zb, zz, mesh)
    gam = gamma_weight(zz)
    env = jm.envelope_sup() * gam * (1.0 + np.abs(za)) - np.abs(e1)
    lipj = gam * (jm.lambda_star * np.abs(za - zb) + jm.g_lipschitz(mesh) * np.abs(xa - xb)) - np.abs(e1 - e2)
    g_ok = bool(np.all(jm.g(xa, mesh) >= 0.0))
    tol_scale = rtol * (np.abs(e1) + np.abs(e2) + 1e-300)
    ok = in_range and g_ok and bool(np.all(env >= -tol_scale)) and bool(np.all(lipj >= -tol_scale))
    detail = "lambda_star in [0,1), g >= 0, envelope and Lipschitz bounds"
    if not in_range:
        detail = f"lambda_star={jm.lambda_star} outside [0,1)"
    checks["A6"] = CheckResult(ok, detail, n, float(min(np.min(env), np.min(lipj))))
    return AssumptionReport(checks, consts)
