"""Wiener mode increments, Poisson jump events and compensated jump increments.

Random streams are counter based: every draw comes from a Philox generator
keyed by ``(seed, path, step, channel)``, so results never depend on the order
in which paths or steps are evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError
from .model import LevyMeasureSpec, ModelSpec, compensator_field, gamma_weight

WIENER = 0
JUMPS = 1
INITIAL = 2
AUX = 3


@dataclass(frozen=True)
class RngPolicy:
    """Master seed plus the (path, step, channel) stream derivation rule."""

    seed: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    def generator(self, path: int, step: int, channel: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(path), int(step), int(channel)))
        return np.random.Generator(np.random.Philox(ss))


@dataclass
class NoiseIncrement:
    wiener: np.ndarray
    jump_offsets: np.ndarray
    jump_marks: np.ndarray
    kappa: float

    @property
    def jump_count(self) -> int:
        return int(self.jump_marks.size)


def sample_wiener_increments(rng: RngPolicy, path: int, step: int, n_modes: int, kappa: float) -> np.ndarray:
    if not kappa > 0.0:
        raise ConfigurationError("kappa must be positive")
    gen = rng.generator(path, step, WIENER)
    return np.sqrt(kappa) * gen.standard_normal(int(n_modes))


def sample_jump_events(rng: RngPolicy, path: int, step: int, spec: LevyMeasureSpec, kappa: float):
    """Jump offsets in (0, kappa] and marks drawn from the normalized measure."""
    mass = spec.total_mass
    if not np.isfinite(mass):
        raise ConfigurationError("Levy measure has non-finite truncated mass")
    if mass == 0.0:
        return np.empty(0), np.empty(0)
    gen = rng.generator(path, step, JUMPS)
    count = int(gen.poisson(kappa * mass))
    offsets = kappa * (1.0 - gen.random(count))
    marks = spec.sample_marks(gen, count)
    order = np.argsort(offsets, kind="stable")
    return offsets[order], marks[order]


def sample_noise(rng: RngPolicy, path: int, step: int, model: ModelSpec, kappa: float) -> NoiseIncrement:
    dbeta = sample_wiener_increments(rng, path, step, model.diffusion.n_modes, kappa)
    offsets, marks = sample_jump_events(rng, path, step, model.jumps.levy, kappa)
    return NoiseIncrement(dbeta, offsets, marks, float(kappa))


def zero_noise(model: ModelSpec, kappa: float) -> NoiseIncrement:
    return NoiseIncrement(np.zeros(model.diffusion.n_modes), np.empty(0), np.empty(0), float(kappa))


def wiener_increment_field(model: ModelSpec, u, dbeta) -> np.ndarray:
    """Nodal values of sum_n h_n(u) dbeta_n, with h frozen at the left state."""
    return model.diffusion.noise_field(np.asarray(u, dtype=float), dbeta)


def compensated_jump_increment(model: ModelSpec, u, marks, kappa: float) -> np.ndarray:
    """sum over events of eta(., u; z) minus kappa times the compensator, eta frozen at ``u``."""
    u = np.asarray(u, dtype=float)
    marks = np.asarray(marks, dtype=float)
    factor = model.eta_nodal_factor(u)
    out = factor * float(np.sum(gamma_weight(marks))) - kappa * compensator_field(model, u)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite compensated jump increment")
    return out
