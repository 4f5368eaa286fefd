"""Update rules for the particle chains.

Three integrators:

* ``nula_step`` -- exponential-integrator update: the velocity SDE with the
  gradient frozen over the step is integrated exactly, giving coefficients
  phi0..phi3 and a correlated (x, v) Gaussian noise with per-coordinate
  covariance [[S11, S12], [S12, S22]].
* ``em_nula_step`` -- Euler-Maruyama discretization of the same underdamped
  dynamics (baseline).
* ``nla_step`` -- overdamped Langevin baseline on positions only.

``derive_step_params`` evaluates the closed forms

    phi0 = (1 - e^{-gh}) / g
    phi1 = (gh - (1 - e^{-gh})) / g^2
    phi2 = e^{-gh}
    S11  = (2/g) (h - 2(1 - e^{-gh})/g + (1 - e^{-2gh})/(2g))
    S12  = (1 - e^{-gh})^2 / g
    S22  = 1 - e^{-2gh}

switching to power series for small gh where the direct expressions suffer
catastrophic cancellation.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .diagnostics import RunRecord
from .errors import ConfigError, DivergenceError, NumericalError
from .particles import DIVERGENCE_LIMIT, ParticleCloud, second_moments
from .rng import RngStreams

MODE_EXACT_EI = "exact_ei"
MODE_TUNED = "tuned"

# Below this value of u = gamma*h the direct formulas for phi1 and S11 lose
# more relative precision than the 1e-12 exactness budget allows; the
# alternating series converge to machine precision well before u = 0.5.
_SERIES_THRESHOLD = 0.5


def _phi1_over_h2(u: float) -> float:
    """(u + expm1(-u)) / u^2, i.e. phi1 = h^2 * this at u = gamma*h."""
    if u >= _SERIES_THRESHOLD:
        return (u + math.expm1(-u)) / (u * u)
    total = 0.0
    term = 0.5  # j = 0 term: 1/2!
    j = 0
    while abs(term) > 1e-20:
        total += term
        j += 1
        term *= -u / (j + 2)
    return total


def _s11_shape(u: float) -> float:
    """f(u) = u - 2(1 - e^{-u}) + (1 - e^{-2u})/2, so S11 = 2 f(u) / gamma^2."""
    if u >= _SERIES_THRESHOLD:
        return u + 2.0 * math.expm1(-u) - 0.5 * math.expm1(-2.0 * u)
    # f(u) = sum_{j>=3} (-1)^{j+1} (2^{j-1} - 2) u^j / j!
    total = 0.0
    sign = 1.0
    ujfact = u**3 / 6.0  # u^j / j! at j = 3
    pow2 = 4.0  # 2^{j-1}
    j = 3
    while True:
        term = sign * (pow2 - 2.0) * ujfact
        total += term
        if abs(term) < 1e-22 * max(abs(total), 1e-300):
            break
        j += 1
        sign = -sign
        ujfact *= u / j
        pow2 *= 2.0
    return total


@dataclass(frozen=True)
class StepParams:
    """Per-step integrator coefficients and noise covariance entries.

    In ``exact_ei`` mode the entries are the closed forms above (with
    phi3 = phi0) and ``temperature`` multiplies the covariance at sampling
    time.  In ``tuned`` mode the phi's are free and the noise is isotropic
    with standard deviation eta in both channels (S11 = S22 = eta^2,
    S12 = 0).
    """

    phi0: float
    phi1: float
    phi2: float
    phi3: float
    sigma11: float
    sigma12: float
    sigma22: float
    temperature: float = 1.0
    mode: str = MODE_EXACT_EI
    gamma: float | None = None
    h: float | None = None

    def __post_init__(self):
        if self.mode not in (MODE_EXACT_EI, MODE_TUNED):
            raise ConfigError(f"unknown StepParams mode {self.mode!r}")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        s11, s12, s22 = self.sigma11, self.sigma12, self.sigma22
        if s11 < 0 or s22 < 0 or s11 * s22 - s12 * s12 < -1e-14 * max(s11 * s22, 1.0):
            raise ConfigError("noise covariance is not positive semidefinite")

    def covariance(self) -> tuple[float, float, float]:
        """Temperature-scaled per-coordinate noise covariance entries."""
        t = self.temperature
        return t * self.sigma11, t * self.sigma12, t * self.sigma22


def derive_step_params(gamma: float, h: float, temperature: float = 1.0) -> StepParams:
    """Exact exponential-integrator coefficients for damping gamma, step h."""
    if gamma <= 0:
        raise ConfigError(f"gamma must be > 0, got {gamma}")
    if h < 0:
        raise ConfigError(f"h must be >= 0, got {h}")
    if temperature <= 0:
        raise ConfigError(f"temperature must be > 0, got {temperature}")
    u = gamma * h
    phi0 = -math.expm1(-u) / gamma
    phi1 = h * h * _phi1_over_h2(u)
    phi2 = math.exp(-u)
    s11 = 2.0 * _s11_shape(u) / (gamma * gamma)
    em1 = math.expm1(-u)
    s12 = em1 * em1 / gamma
    s22 = -math.expm1(-2.0 * u)
    return StepParams(phi0=phi0, phi1=phi1, phi2=phi2, phi3=phi0,
                      sigma11=s11, sigma12=s12, sigma22=s22,
                      temperature=temperature, mode=MODE_EXACT_EI,
                      gamma=gamma, h=h)


def tuned_step_params(phi0: float, phi1: float, phi2: float, phi3: float,
                      eta: float) -> StepParams:
    """Hand-tuned coefficients with isotropic noise of scale eta."""
    if not (0.0 < phi2 <= 1.0):
        raise ConfigError(f"phi2 must lie in (0, 1], got {phi2}")
    if eta < 0:
        raise ConfigError(f"eta must be >= 0, got {eta}")
    return StepParams(phi0=phi0, phi1=phi1, phi2=phi2, phi3=phi3,
                      sigma11=eta * eta, sigma12=0.0, sigma22=eta * eta,
                      temperature=1.0, mode=MODE_TUNED)


def _noise_factors(params: StepParams) -> tuple[float, float, float]:
    """Square-root factorization (a, b, c) with bv = a xi1, bx = b xi1 + c xi2.

    Conditions on the velocity channel first since S22 dominates for small h;
    the degenerate S22 = 0 branch falls back to independent x-noise.
    """
    s11, s12, s22 = params.covariance()
    if s22 == 0.0:
        if abs(s12) > 0.0:
            raise NumericalError("S12 != 0 with degenerate S22")
        return 0.0, 0.0, math.sqrt(s11)
    a = math.sqrt(s22)
    b = s12 / a
    rad = s11 - s12 * s12 / s22
    if rad < 0:
        if rad < -1e-14 * max(s11, 1e-300):
            raise NumericalError(f"negative radicand {rad} in noise factorization")
        rad = 0.0
    return a, b, math.sqrt(rad)


def sample_noise_block(params: StepParams, rng: RngStreams, step: int,
                       n_particles: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Correlated (bx, bv) noise for all particles at one step, each (N, d)."""
    a, b, c = _noise_factors(params)
    if a == 0.0 and b == 0.0 and c == 0.0:
        z = np.zeros((n_particles, dim))
        return z, z.copy()
    xi = rng.step_normals(step, n_particles, 2 * dim)
    xi1, xi2 = xi[:, :dim], xi[:, dim:]
    bv = a * xi1
    bx = b * xi1 + c * xi2
    return bx, bv


def sample_correlated_noise(params: StepParams, rng: RngStreams, particle: int,
                            step: int, dim: int,
                            n_particles: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Single particle's (bx, bv) draw; identical to its row of the block."""
    bx, bv = sample_noise_block(params, rng, step, n_particles, dim)
    return bx[particle], bv[particle]


def nula_step(cloud: ParticleCloud, grads: np.ndarray, params: StepParams,
              rng: RngStreams, step: int) -> ParticleCloud:
    """One exponential-integrator update of the whole cloud.

    grads row i must be the intrinsic gradient at particle i for the current
    empirical measure.
    """
    bx, bv = sample_noise_block(params, rng, step, cloud.n_particles, cloud.dim)
    x = cloud.positions + params.phi0 * cloud.velocities - params.phi1 * grads + bx
    v = params.phi2 * cloud.velocities - params.phi3 * grads + bv
    return ParticleCloud(x, v).check_finite(step)


def em_nula_step(cloud: ParticleCloud, grads: np.ndarray, h2: float, gamma: float,
                 lambda2: float, rng: RngStreams, step: int,
                 h3: float | None = None) -> ParticleCloud:
    """Euler-Maruyama update of the underdamped dynamics (baseline)."""
    if lambda2 < 0:
        raise ConfigError("lambda2 must be >= 0")
    if h3 is None:
        h3 = gamma * h2
    if h3 >= 1.0:
        warnings.warn(f"EM damping factor 1 - h3 = {1.0 - h3} is non-contractive",
                      RuntimeWarning, stacklevel=2)
    scale = math.sqrt(2.0 * lambda2 * h2)
    xi = rng.step_normals(step, cloud.n_particles, cloud.dim) if scale > 0 else 0.0
    x = cloud.positions + h2 * cloud.velocities
    v = (1.0 - h3) * cloud.velocities - h2 * grads + scale * xi
    return ParticleCloud(x, v).check_finite(step)


def nla_step(positions: np.ndarray, grads: np.ndarray, h1: float, lambda1: float,
             rng: RngStreams, step: int) -> np.ndarray:
    """Overdamped Langevin update on positions only (baseline)."""
    if lambda1 < 0:
        raise ConfigError("lambda1 must be >= 0")
    scale = math.sqrt(2.0 * lambda1 * h1)
    xi = rng.step_normals(step, positions.shape[0], positions.shape[1]) if scale > 0 else 0.0
    x = positions - h1 * grads + scale * xi
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > DIVERGENCE_LIMIT):
        raise DivergenceError(step)
    return x


@dataclass(frozen=True)
class NulaSpec:
    """Chain driven by nula_step with fixed StepParams."""
    params: StepParams


@dataclass(frozen=True)
class EmNulaSpec:
    """Chain driven by em_nula_step."""
    h2: float
    gamma: float
    lambda2: float
    h3: float | None = None


@dataclass(frozen=True)
class NlaSpec:
    """Chain driven by nla_step (velocities carried along unchanged)."""
    h1: float
    lambda1: float


IntegratorSpec = NulaSpec | EmNulaSpec | NlaSpec


def _advance(cloud: ParticleCloud, grads: np.ndarray, spec: IntegratorSpec,
             rng: RngStreams, step: int) -> ParticleCloud:
    if isinstance(spec, NulaSpec):
        return nula_step(cloud, grads, spec.params, rng, step)
    if isinstance(spec, EmNulaSpec):
        return em_nula_step(cloud, grads, spec.h2, spec.gamma, spec.lambda2,
                            rng, step, h3=spec.h3)
    if isinstance(spec, NlaSpec):
        x = nla_step(cloud.positions, grads, spec.h1, spec.lambda1, rng, step)
        return ParticleCloud(x, cloud.velocities)
    raise ConfigError(f"unknown integrator spec {type(spec).__name__}")


def run_chain(cloud: ParticleCloud, objective, spec: IntegratorSpec,
              rng: RngStreams, n_steps: int, record_every: int = 10,
              callbacks: Sequence[Callable[[int, ParticleCloud], None]] = (),
              record_walltime: bool = True) -> tuple[list[RunRecord], ParticleCloud]:
    """Run one chain for n_steps, recording diagnostics every record_every steps.

    Recorded rows carry the state *after* the indexed step; the final step is
    always recorded.  Raises DivergenceError (with the step index) if an
    update blows up.
    """
    if n_steps < 0:
        raise ConfigError("n_steps must be >= 0")
    if record_every < 1:
        raise ConfigError("record_every must be >= 1")
    records: list[RunRecord] = []
    t0 = time.perf_counter()
    for k in range(1, n_steps + 1):
        grads = objective.batch_grad(cloud.positions)
        try:
            cloud = _advance(cloud, grads, spec, rng, k - 1)
        except DivergenceError as exc:
            exc.records = records  # retain partial diagnostics for the caller
            raise
        for cb in callbacks:
            cb(k, cloud)
        if k % record_every == 0 or k == n_steps:
            g = objective.batch_grad(cloud.positions)
            x_m2, v_m2 = second_moments(cloud)
            wall = (time.perf_counter() - t0) * 1e3 if record_walltime else 0.0
            records.append(RunRecord(
                step=k,
                loss=float(objective.value(cloud.positions)),
                grad_norm_mean=float(np.mean(np.linalg.norm(g, axis=1))),
                x_m2=x_m2, v_m2=v_m2, wall_ms=wall))
    return records, cloud
