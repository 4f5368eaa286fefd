"""Post-processing of chain runs: decay-rate fits, plateaus, seed bands."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MflError


@dataclass(frozen=True)
class RunRecord:
    """One diagnostic row of a chain run."""

    step: int
    loss: float
    grad_norm_mean: float
    x_m2: float
    v_m2: float
    wall_ms: float


@dataclass(frozen=True)
class SeedBand:
    """Pointwise loss statistics across seeds at one recorded step."""

    step: int
    mean: float
    min: float
    max: float

    def __post_init__(self):
        if not (self.min <= self.mean <= self.max):
            raise MflError(f"band out of order at step {self.step}")


class FitError(MflError):
    """Decay-rate fit could not be performed on the given window."""


def plateau_level(records: list[RunRecord], tail_fraction: float = 0.2) -> float:
    """Mean loss over the final tail_fraction of recorded rows."""
    if not (0.0 < tail_fraction <= 1.0):
        raise MflError(f"tail_fraction must be in (0, 1], got {tail_fraction}")
    n_tail = max(int(round(len(records) * tail_fraction)), 1)
    if len(records) < 10:
        raise MflError(f"need at least 10 records for a plateau, got {len(records)}")
    return float(np.mean([r.loss for r in records[-n_tail:]]))


def fit_decay_rate(records: list[RunRecord],
                   window: tuple[int, int] | None = None,
                   plateau: float | None = None) -> tuple[float, float]:
    """Least-squares slope of log(loss - plateau) vs step over a step window.

    Returns (rate, r_squared) where rate > 0 means exponential decay at
    loss ~ exp(-rate * step) + plateau.  The plateau defaults to
    plateau_level(records).
    """
    if plateau is None:
        plateau = plateau_level(records)
    if window is None:
        rows = records
    else:
        lo, hi = window
        rows = [r for r in records if lo <= r.step <= hi]
    if len(rows) < 3:
        raise FitError("need at least 3 records in the fit window")
    excess = np.array([r.loss - plateau for r in rows])
    if np.any(excess <= 0):
        raise FitError("non-positive excess loss in fit window")
    steps = np.array([r.step for r in rows], dtype=float)
    y = np.log(excess)
    slope, intercept = np.polyfit(steps, y, 1)
    resid = y - (slope * steps + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return -float(slope), r2


def aggregate_seeds(runs: list[list[RunRecord]]) -> list[SeedBand]:
    """Pointwise mean/min/max of the loss across seed runs on a shared grid."""
    if not runs:
        raise MflError("no runs to aggregate")
    grids = [[r.step for r in run] for run in runs]
    if any(g != grids[0] for g in grids[1:]):
        raise MflError("runs do not share the same recorded step grid")
    bands = []
    for i, step in enumerate(grids[0]):
        losses = [run[i].loss for run in runs]
        bands.append(SeedBand(step=step, mean=float(np.mean(losses)),
                              min=float(np.min(losses)), max=float(np.max(losses))))
    return bands


def grad_growth_check(objective, radii: np.ndarray | None = None,
                      n_directions: int = 16, seed: int = 0) -> float:
    """Smallest C with ||grad(mu, x)|| <= C (1 + ||x||) on a radial grid.

    Empirical surrogate for the linear-growth assumption on the intrinsic
    gradient; reported, never asserted.
    """
    if radii is None:
        radii = np.concatenate([[0.0], np.geomspace(1e-2, 100.0, 25)])
    g = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    dim = objective.dim
    dirs = g.standard_normal((n_directions, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    positions = objective.reference_positions()
    worst = 0.0
    for r in radii:
        for u in dirs:
            x = r * u
            ratio = float(np.linalg.norm(objective.intrinsic_grad(positions, x))) / (1.0 + r)
            worst = max(worst, ratio)
    return worst
