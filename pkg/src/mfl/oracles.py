"""Independent ground-truth computations used to validate the main code paths.

These deliberately avoid the implementation under test: the stationary
covariance comes from a discrete Lyapunov fixed point, gradient checks use
central finite differences, and the Gaussian-convolution closed forms are
recomputed by adaptive quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import OracleError
from .integrators import StepParams, derive_step_params


@dataclass(frozen=True)
class LinearChainSpec:
    """Exponential-integrator chain on the pure-ridge gradient g = lambda' x."""

    gamma: float
    h: float
    lambda_prime: float
    temperature: float = 1.0

    def step_params(self) -> StepParams:
        return derive_step_params(self.gamma, self.h, self.temperature)

    def update_matrix(self) -> np.ndarray:
        """Per-coordinate deterministic map M of (x, v) with frozen gradient."""
        p = self.step_params()
        lp = self.lambda_prime
        return np.array([[1.0 - lp * p.phi1, p.phi0],
                         [-lp * p.phi3, p.phi2]])

    def noise_covariance(self) -> np.ndarray:
        p = self.step_params()
        s11, s12, s22 = p.covariance()
        return np.array([[s11, s12], [s12, s22]])


def ou_chain_stationary_covariance(spec: LinearChainSpec,
                                   rel_tol: float = 1e-12,
                                   max_iter: int = 10_000_000) -> np.ndarray:
    """Exact stationary covariance of z_{k+1} = M z_k + w_k per coordinate.

    Computed by iterating the discrete Lyapunov fixed point
    C <- M C M^T + Q until the relative update drops below rel_tol.
    """
    m = spec.update_matrix()
    rho = max(abs(np.linalg.eigvals(m)))
    if rho >= 1.0:
        raise OracleError(f"update matrix spectral radius {rho:.6g} >= 1")
    q = spec.noise_covariance()
    cov = q.copy()
    for _ in range(max_iter):
        nxt = m @ cov @ m.T + q
        delta = np.max(np.abs(nxt - cov))
        cov = nxt
        if delta <= rel_tol * max(np.max(np.abs(cov)), 1e-300):
            return cov
    raise OracleError("Lyapunov fixed-point iteration did not converge")


def finite_diff_grad_check(objective, positions: np.ndarray, particle: int,
                           eps: float = 1e-6) -> float:
    """Worst relative error of batch_grad row j vs central differences.

    Differentiates N * value with respect to particle j, which is the
    defining identity of the intrinsic gradient.
    """
    if not (1e-8 <= eps <= 1e-4):
        raise OracleError(f"eps must lie in [1e-8, 1e-4], got {eps}")
    positions = np.asarray(positions, dtype=float)
    n_p, d = positions.shape
    analytic = objective.batch_grad(positions)[particle]
    scale = max(float(np.max(np.abs(analytic))), 1e-12)
    worst = 0.0
    for j in range(d):
        plus = positions.copy()
        plus[particle, j] += eps
        minus = positions.copy()
        minus[particle, j] -= eps
        num = n_p * (objective.value(plus) - objective.value(minus)) / (2.0 * eps)
        worst = max(worst, abs(num - analytic[j]) / scale)
    return worst


def quadrature_validate_mmd(x: float, x_prime: float, z: float,
                            sigma: float) -> tuple[float, float]:
    """Absolute error of the 1-D MMD closed forms vs adaptive quadrature.

    Validates
      pair: int int p(y;x) p(y';x') k(y,y') dy dy' = 3^{-1/2} e^{-(x-x')^2/6s^2}
      data: int p(y;x) k(y,z) dy                   = 2^{-1/2} e^{-(x-z)^2/4s^2}
    where p(y;c) is the N(c, s^2) density and k the RBF kernel of width s.
    """
    s2 = sigma * sigma
    norm = 1.0 / math.sqrt(2.0 * math.pi * s2)

    def p(y, c):
        return norm * math.exp(-((y - c) ** 2) / (2.0 * s2))

    def kern(y, yp):
        return math.exp(-((y - yp) ** 2) / (2.0 * s2))

    span = 12.0 * sigma
    lo = min(x, x_prime, z) - span
    hi = max(x, x_prime, z) + span

    pair_num, pair_err = integrate.dblquad(
        lambda yp, y: p(y, x) * p(yp, x_prime) * kern(y, yp),
        lo, hi, lo, hi, epsabs=1e-12, epsrel=1e-12)
    data_num, data_err = integrate.quad(
        lambda y: p(y, x) * kern(y, z), lo, hi, epsabs=1e-13, epsrel=1e-13)
    if pair_err > 1e-8 or data_err > 1e-9:
        raise OracleError("quadrature failed to converge")

    pair_cf = (1.0 / math.sqrt(3.0)) * math.exp(-((x - x_prime) ** 2) / (6.0 * s2))
    data_cf = (1.0 / math.sqrt(2.0)) * math.exp(-((x - z) ** 2) / (4.0 * s2))
    return abs(pair_num - pair_cf), abs(data_num - data_cf)
