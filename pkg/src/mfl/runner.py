"""Experiment orchestration: seed loops, CSV persistence, sweeps.

CSV files are UTF-8 with LF line endings and a header row; floats are
serialized with 17 significant digits so that a written run re-parses to the
exact same values.
"""
from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig, build_integrator_spec, build_objective
from .diagnostics import (FitError, RunRecord, aggregate_seeds, fit_decay_rate,
                          plateau_level)
from .errors import ConfigError, DivergenceError, MflError
from .integrators import run_chain
from .particles import init_cloud
from .rng import RngStreams

RUN_COLUMNS = ("step", "loss", "grad_norm_mean", "x_m2", "v_m2", "wall_ms")
BANDS_COLUMNS = ("step", "mean", "min", "max")
SUMMARY_COLUMNS = ("seed", "final_loss", "plateau", "decay_rate", "r_squared",
                   "diverged_at")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_DIVERGED = 2
EXIT_CONFIG_ERROR = 3


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _write_csv(path: Path, columns, rows) -> None:
    lines = [",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_run_csv(path: Path, records: list[RunRecord]) -> None:
    _write_csv(path, RUN_COLUMNS,
               [(r.step, r.loss, r.grad_norm_mean, r.x_m2, r.v_m2, r.wall_ms)
                for r in records])


def read_run_csv(path: Path) -> list[RunRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split(",") != list(RUN_COLUMNS):
        raise MflError(f"{path}: not a run CSV")
    out = []
    for line in lines[1:]:
        step, loss, gnm, xm2, vm2, wall = line.split(",")
        out.append(RunRecord(step=int(step), loss=float(loss),
                             grad_norm_mean=float(gnm), x_m2=float(xm2),
                             v_m2=float(vm2), wall_ms=float(wall)))
    return out


def read_bands_csv(path: Path) -> list[tuple[int, float, float, float]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split(",") != list(BANDS_COLUMNS):
        raise MflError(f"{path}: not a bands CSV")
    return [(int(s), float(m), float(lo), float(hi))
            for s, m, lo, hi in (line.split(",") for line in lines[1:])]


def run_single_seed(config: RunConfig, seed: int
                    ) -> tuple[list[RunRecord], int | None]:
    """One chain run; returns (records, diverged_at or None)."""
    objective = build_objective(config.objective)
    spec = build_integrator_spec(config.algorithm)
    rng = RngStreams(seed)
    cloud = init_cloud(config.n_particles, config.objective.d,
                       config.init_mean, config.init_std, rng)
    try:
        records, _ = run_chain(cloud, objective, spec, rng, config.steps,
                               record_every=config.record_every,
                               record_walltime=config.record_walltime)
        return records, None
    except DivergenceError as exc:
        return exc.records, exc.step


def _seed_task(args):
    config_dict, seed = args
    from .config import parse_config_dict  # worker processes re-validate
    records, diverged_at = run_single_seed(parse_config_dict(config_dict), seed)
    return seed, records, diverged_at


def cmd_run(config: RunConfig, workers: int = 1) -> int:
    """Run every seed, write per-seed CSVs, bands.csv and summary.csv.

    Returns 0 on success, 2 if any seed diverged.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = config.to_dict()
    (out / "resolved_config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    results: dict[int, tuple[list[RunRecord], int | None]] = {}
    if workers > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for seed, records, diverged_at in pool.map(
                    _seed_task, [(resolved, s) for s in config.seeds]):
                results[seed] = (records, diverged_at)
    else:
        for seed in config.seeds:
            results[seed] = run_single_seed(config, seed)

    summary_rows = []
    completed_runs = []
    any_diverged = False
    for seed in config.seeds:
        records, diverged_at = results[seed]
        write_run_csv(out / f"run_seed{seed}.csv", records)
        final_loss = records[-1].loss if records else None
        plateau = None
        rate = None
        r2 = None
        if diverged_at is None and records:
            completed_runs.append(records)
            try:
                plateau = plateau_level(records)
            except MflError:
                plateau = None
            if plateau is not None:
                try:
                    rate, r2 = fit_decay_rate(records, plateau=plateau)
                except FitError:
                    rate, r2 = None, None
        else:
            any_diverged = True
        summary_rows.append((seed, final_loss, plateau, rate, r2, diverged_at))

    if completed_runs:
        bands = aggregate_seeds(completed_runs)
        _write_csv(out / "bands.csv", BANDS_COLUMNS,
                   [(b.step, b.mean, b.min, b.max) for b in bands])
    else:
        _write_csv(out / "bands.csv", BANDS_COLUMNS, [])
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows)
    return EXIT_DIVERGED if any_diverged else EXIT_OK


SWEEP_AXES = ("n_particles", "h", "gamma")


def _with_axis_value(config: RunConfig, axis: str, value: float) -> RunConfig:
    if axis == "n_particles":
        return dataclasses.replace(config, n_particles=int(value))
    alg = config.algorithm
    if axis == "h":
        if not (alg.kind == "nula" and alg.mode == "exact_ei"):
            raise ConfigError("axis 'h' requires algorithm nula in exact_ei mode")
        return dataclasses.replace(config,
                                   algorithm=dataclasses.replace(alg, h=float(value)))
    if axis == "gamma":
        if not ((alg.kind == "nula" and alg.mode == "exact_ei")
                or alg.kind == "em_nula"):
            raise ConfigError("axis 'gamma' requires nula (exact_ei) or em_nula")
        return dataclasses.replace(config,
                                   algorithm=dataclasses.replace(alg, gamma=float(value)))
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def cmd_sweep(config: RunConfig, axis: str, values: list[float],
              workers: int = 1) -> int:
    """One cmd_run per axis value in its own subdirectory, plus a summary."""
    if not values:
        raise ConfigError("sweep values list must be nonempty")
    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    worst = EXIT_OK
    rows = []
    for value in values:
        label = str(int(value)) if axis == "n_particles" else _fmt(float(value))
        sub = root / f"{axis}_{label}"
        cfg = _with_axis_value(config, axis, value)
        cfg = dataclasses.replace(cfg, output_dir=str(sub))
        code = cmd_run(cfg, workers=workers)
        worst = max(worst, code)
        finals, plateaus = [], []
        for seed in cfg.seeds:
            records = read_run_csv(sub / f"run_seed{seed}.csv")
            if records:
                finals.append(records[-1].loss)
                try:
                    plateaus.append(plateau_level(records))
                except MflError:
                    pass
        rows.append((value if axis != "n_particles" else int(value),
                     float(np.mean(finals)) if finals else None,
                     float(np.mean(plateaus)) if plateaus else None))
    _write_csv(root / "sweep_summary.csv",
               ("value", "mean_final_loss", "mean_plateau"), rows)
    return worst
