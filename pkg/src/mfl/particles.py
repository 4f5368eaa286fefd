"""Particle cloud state: positions and velocities of N particles in R^d."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError
from .rng import DOMAIN_INIT, RngStreams

# Any entry beyond this magnitude is treated as a blow-up even if finite.
DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class ParticleCloud:
    """Positions x^i and velocities v^i, both stored as dense (N, d) arrays.

    Treated as immutable across integrator steps: every update returns a new
    cloud, so a cloud can be shared read-only between workers.
    """

    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.positions, dtype=float)
        v = np.asarray(self.velocities, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ConfigError(f"positions must be a nonempty (N, d) matrix, got shape {x.shape}")
        if x.shape != v.shape:
            raise ConfigError(f"positions/velocities shape mismatch: {x.shape} vs {v.shape}")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def check_finite(self, step: int = -1) -> "ParticleCloud":
        """Raise DivergenceError if any entry is non-finite or > 1e12."""
        for arr in (self.positions, self.velocities):
            if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > DIVERGENCE_LIMIT):
                raise DivergenceError(step)
        return self


def init_cloud(n_particles: int, dim: int, mean: float, std: float,
               rng: RngStreams) -> ParticleCloud:
    """I.i.d. normal initialization of positions and velocities.

    Deterministic given ``rng``; std = 0 yields a constant cloud.
    """
    if n_particles < 1:
        raise ConfigError(f"n_particles must be >= 1, got {n_particles}")
    if dim < 1:
        raise ConfigError(f"dim must be >= 1, got {dim}")
    if std < 0:
        raise ConfigError(f"std must be >= 0, got {std}")
    g = rng.generator(DOMAIN_INIT)
    x = mean + std * g.standard_normal((n_particles, dim))
    v = mean + std * g.standard_normal((n_particles, dim))
    return ParticleCloud(x, v).check_finite(step=-1)


def second_moments(cloud: ParticleCloud) -> tuple[float, float]:
    """Per-particle mean squared norms: ((1/N) sum ||x^i||^2, same for v)."""
    n = cloud.n_particles
    x_m2 = float(np.sum(cloud.positions**2) / n)
    v_m2 = float(np.sum(cloud.velocities**2) / n)
    return x_m2, v_m2
