"""Mean-field objectives F(mu_x) and their intrinsic gradients.

Each objective evaluates the functional on the empirical measure of an
(N, d) position matrix and supplies the intrinsic derivative, i.e. the force
a particle at a query point feels given the current cloud.  The defining
relation (tested by finite differences) is

    grad_{x^j} [ N * value(x^1..x^N) ] = batch_grad row j.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError
from .rng import DOMAIN_DATA, RngStreams


class MeanFieldObjective:
    """Interface: value / intrinsic_grad / batch_grad over an (N, d) cloud."""

    dim: int

    def value(self, positions: np.ndarray) -> float:
        raise NotImplementedError

    def intrinsic_grad(self, positions: np.ndarray, query: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def batch_grad(self, positions: np.ndarray) -> np.ndarray:
        # Subclasses override with vectorized versions; the row-by-row
        # fallback is the reference semantics.
        return np.stack([self.intrinsic_grad(positions, x) for x in positions])

    def reference_positions(self) -> np.ndarray:
        """Small default cloud used by diagnostic sweeps."""
        return np.zeros((4, self.dim))


def _ridge_value(positions: np.ndarray, lambda_prime: float) -> float:
    n = positions.shape[0]
    return 0.5 * lambda_prime * float(np.sum(positions**2)) / n


@dataclass
class RidgeObjective(MeanFieldObjective):
    """Pure quadratic ridge (lambda'/2) E||x||^2; the exactly-linear case."""

    dim: int
    lambda_prime: float

    def value(self, positions):
        return _ridge_value(positions, self.lambda_prime)

    def intrinsic_grad(self, positions, query):
        return self.lambda_prime * np.asarray(query, dtype=float)

    def batch_grad(self, positions):
        return self.lambda_prime * positions


@dataclass
class NeuralNetObjective(MeanFieldObjective):
    """Quadratic risk of a mean-field two-layer tanh network plus ridge.

    value = (1/2n) sum_i ( (1/N) sum_s tanh(x^s . a_i) - b_i )^2
            + (lambda'/2N) sum_s ||x^s||^2
    """

    inputs: np.ndarray
    labels: np.ndarray
    lambda_prime: float = 0.0
    activation: str = "tanh"

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).ravel()
        if self.inputs.shape[0] != self.labels.shape[0] or self.inputs.shape[0] < 1:
            raise ConfigError("inputs and labels must share a positive sample count")
        if self.activation != "tanh":
            raise ConfigError(f"unsupported activation {self.activation!r}")
        if self.lambda_prime < 0:
            raise ConfigError("lambda_prime must be >= 0")
        self.dim = self.inputs.shape[1]

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    def _residuals(self, positions: np.ndarray) -> np.ndarray:
        pred = np.tanh(positions @ self.inputs.T).mean(axis=0)
        return pred - self.labels

    def value(self, positions):
        r = self._residuals(positions)
        return 0.5 * float(np.mean(r**2)) + _ridge_value(positions, self.lambda_prime)

    def data_loss(self, positions) -> float:
        """The plotted quantity: quadratic risk without the ridge term."""
        return 0.5 * float(np.mean(self._residuals(positions) ** 2))

    def intrinsic_grad(self, positions, query):
        query = np.asarray(query, dtype=float)
        r = self._residuals(positions)
        t = np.tanh(self.inputs @ query)
        w = r * (1.0 - t**2)
        return self.inputs.T @ w / self.n_samples + self.lambda_prime * query

    def batch_grad(self, positions):
        t = np.tanh(positions @ self.inputs.T)  # (N, n)
        r = t.mean(axis=0) - self.labels  # shared mean-field reduction
        return ((1.0 - t**2) * r) @ self.inputs / self.n_samples \
            + self.lambda_prime * positions

    def reference_positions(self):
        return np.zeros((4, self.dim))


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = (np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :]
          - 2.0 * a @ b.T)
    return np.maximum(d2, 0.0)


@dataclass
class MmdObjective(MeanFieldObjective):
    """Empirical MMD between a Gaussian-mixture fit and target samples.

    Both components of the mixture and the RBF kernel share width sigma, so
    the Gaussian convolutions collapse to closed forms:

        pair term  3^{-d/2} exp(-||x - x'||^2 / 6 sigma^2)
        data term  2^{-d/2} exp(-||x - z||^2 / 4 sigma^2)

    The s = t diagonal of the pair double sum is kept: the empirical-measure
    functional includes it.
    """

    samples: np.ndarray
    sigma: float = 1.0
    lambda_prime: float = 0.0

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if self.sigma <= 0:
            raise ConfigError("sigma must be > 0")
        if self.lambda_prime < 0:
            raise ConfigError("lambda_prime must be >= 0")
        self.dim = self.samples.shape[1]

    def _coeffs(self) -> tuple[float, float]:
        d = self.dim
        return 3.0 ** (-d / 2.0), 2.0 ** (-d / 2.0)

    def value(self, positions):
        c_pp, c_pz = self._coeffs()
        s2 = self.sigma**2
        n_p = positions.shape[0]
        w_pp = np.exp(-_sq_dists(positions, positions) / (6.0 * s2))
        w_pz = np.exp(-_sq_dists(positions, self.samples) / (4.0 * s2))
        return (c_pp * float(w_pp.mean())
                - 2.0 * c_pz * float(w_pz.mean())
                + _ridge_value(positions, self.lambda_prime))

    def intrinsic_grad(self, positions, query):
        query = np.asarray(query, dtype=float)
        c_pp, c_pz = self._coeffs()
        s2 = self.sigma**2
        dx = query[None, :] - positions  # (N, d)
        w = np.exp(-np.sum(dx**2, axis=1) / (6.0 * s2))
        pair = 2.0 * c_pp * np.mean(-dx / (3.0 * s2) * w[:, None], axis=0)
        dz = query[None, :] - self.samples  # (n, d)
        wz = np.exp(-np.sum(dz**2, axis=1) / (4.0 * s2))
        data = 2.0 * c_pz * np.mean(-dz / (2.0 * s2) * wz[:, None], axis=0)
        return pair - data + self.lambda_prime * query

    def batch_grad(self, positions):
        c_pp, c_pz = self._coeffs()
        s2 = self.sigma**2
        n_p = positions.shape[0]
        n_z = self.samples.shape[0]
        w = np.exp(-_sq_dists(positions, positions) / (6.0 * s2))
        pair = -(2.0 * c_pp / (3.0 * s2 * n_p)) * (
            positions * w.sum(axis=1)[:, None] - w @ positions)
        wz = np.exp(-_sq_dists(positions, self.samples) / (4.0 * s2))
        data = -(2.0 * c_pz / (2.0 * s2 * n_z)) * (
            positions * wz.sum(axis=1)[:, None] - wz @ self.samples)
        return pair - data + self.lambda_prime * positions


ScoreFn = Callable[[np.ndarray], np.ndarray]
ScoreJacFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class KsdObjective(MeanFieldObjective):
    """Kernelized Stein discrepancy to a target known through its score.

    Uses the light-tailed kernel
        k(x, x') = exp(-||x||^2/2s1^2 - ||x'||^2/2s1^2 - ||x - x'||^2/2s2^2)
    and the Stein kernel
        u = s(x)^T k s(x') + s(x)^T grad_{x'} k + grad_x^T k s(x')
            + tr(grad_{x,x'} k).
    """

    dim: int
    score: ScoreFn
    score_jacobian: ScoreJacFn
    sigma1: float = 1.0
    sigma2: float = 1.0
    lambda_prime: float = 0.0

    def __post_init__(self):
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ConfigError("kernel widths must be > 0")
        if self.lambda_prime < 0:
            raise ConfigError("lambda_prime must be >= 0")

    def _kernel(self, x: np.ndarray, y: np.ndarray) -> float:
        s1, s2 = self.sigma1**2, self.sigma2**2
        return math.exp(-np.dot(x, x) / (2 * s1) - np.dot(y, y) / (2 * s1)
                        - float(np.sum((x - y) ** 2)) / (2 * s2))

    def stein_kernel(self, x: np.ndarray, y: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s1, s2 = self.sigma1**2, self.sigma2**2
        k = self._kernel(x, y)
        a = -x / s1 - (x - y) / s2  # grad_x log k
        b = -y / s1 + (x - y) / s2  # grad_x' log k
        sx, sy = self.score(x), self.score(y)
        return k * (float(sx @ sy) + float(sx @ b) + float(a @ sy)
                    + float(a @ b) + self.dim / s2)

    def stein_kernel_grad_x(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Analytic grad_x of the Stein kernel."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s1, s2 = self.sigma1**2, self.sigma2**2
        k = self._kernel(x, y)
        a = -x / s1 - (x - y) / s2
        b = -y / s1 + (x - y) / s2
        sx, sy = self.score(x), self.score(y)
        jac = np.asarray(self.score_jacobian(x), dtype=float)
        u = k * (float(sx @ sy) + float(sx @ b) + float(a @ sy)
                 + float(a @ b) + self.dim / s2)
        return (u * a
                + k * (jac.T @ (sy + b)
                       + (sx + a) / s2
                       - (1.0 / s1 + 1.0 / s2) * (sy + b)))

    def value(self, positions):
        n_p = positions.shape[0]
        total = 0.0
        for s in range(n_p):
            for t in range(n_p):
                total += self.stein_kernel(positions[s], positions[t])
        return total / n_p**2 + _ridge_value(positions, self.lambda_prime)

    def intrinsic_grad(self, positions, query):
        query = np.asarray(query, dtype=float)
        acc = np.zeros(self.dim)
        for t in range(positions.shape[0]):
            acc += self.stein_kernel_grad_x(query, positions[t])
        return 2.0 * acc / positions.shape[0] + self.lambda_prime * query


def gaussian_score(mean: np.ndarray | float = 0.0) -> tuple[ScoreFn, ScoreJacFn]:
    """Score and Jacobian of a unit-covariance Gaussian target."""
    def score(x):
        return -(np.asarray(x, dtype=float) - mean)

    def jac(x):
        d = np.asarray(x).shape[-1]
        return -np.eye(d)

    return score, jac


def gaussian_mixture_score(means: np.ndarray,
                           weights: np.ndarray | None = None
                           ) -> tuple[ScoreFn, ScoreJacFn]:
    """Score and Jacobian of a unit-covariance Gaussian mixture target."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    n_comp = means.shape[0]
    if weights is None:
        weights = np.full(n_comp, 1.0 / n_comp)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n_comp,) or np.any(weights <= 0):
        raise ConfigError("weights must be positive, one per component")
    weights = weights / weights.sum()

    def _resp(x):
        logp = -0.5 * np.sum((x[None, :] - means) ** 2, axis=1) + np.log(weights)
        logp -= logp.max()
        p = np.exp(logp)
        return p / p.sum()

    def score(x):
        x = np.asarray(x, dtype=float)
        r = _resp(x)
        return -(x - r @ means)

    def jac(x):
        x = np.asarray(x, dtype=float)
        r = _resp(x)
        m_bar = r @ means
        d = x.shape[-1]
        out = -np.eye(d)
        for j in range(n_comp):
            out += np.outer(means[j], r[j] * (means[j] - m_bar))
        return out

    return score, jac


def make_gaussian_regression_data(d: int, n: int, seed: int
                                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Synthetic regression set: targets of a Gaussian bump at hidden center m.

    m ~ N(0, I_d), a_i ~ N(0, I_d), b_i = exp(-||a_i - m||^2 / 2d).
    """
    if d < 1 or n < 1:
        raise ConfigError("d and n must be >= 1")
    g = RngStreams(seed).generator(DOMAIN_DATA)
    m = g.standard_normal(d)
    a = g.standard_normal((n, d))
    b = np.exp(-np.sum((a - m) ** 2, axis=1) / (2.0 * d))
    return a, b, m


def load_regression_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Regression data from a CSV with header columns a_1..a_d, b."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty CSV") from None
        d = len(header) - 1
        expected = [f"a_{j + 1}" for j in range(d)] + ["b"]
        if d < 1 or header != expected:
            raise ConfigError(f"{path}: header must be a_1..a_d,b, got {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    if arr.shape[1] != d + 1:
        raise ConfigError(f"{path}: inconsistent column count")
    return arr[:, :d], arr[:, d]
