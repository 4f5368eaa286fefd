"""Experiment configuration: JSON schema, validation, and objective/spec builders."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .integrators import (EmNulaSpec, IntegratorSpec, NlaSpec, NulaSpec,
                          derive_step_params, tuned_step_params)
from .objectives import (KsdObjective, MeanFieldObjective, MmdObjective,
                         NeuralNetObjective, RidgeObjective, gaussian_mixture_score,
                         gaussian_score, load_regression_csv,
                         make_gaussian_regression_data)
from .rng import DOMAIN_DATA, RngStreams

_OBJECTIVE_KINDS = ("nn", "mmd", "ksd", "ridge")
_ALGORITHM_KINDS = ("nula", "em_nula", "nla")


def _require(cond: bool, key: str, msg: str):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def _take(d: dict, key: str, path: str, typ, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"missing required field {path}.{key}")
        return default
    val = d.pop(key)
    if typ is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, typ) or isinstance(val, bool) and typ is not bool:
        raise ConfigError(f"{path}.{key}: expected {getattr(typ, '__name__', typ)}, "
                          f"got {type(val).__name__}")
    return val


def _reject_unknown(d: dict, path: str):
    if d:
        key = sorted(d)[0]
        raise ConfigError(f"unknown key {path}.{key}" if path else f"unknown key {key}")


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: str
    d: int
    n: int = 100
    lambda_prime: float = 1e-4
    sigma: float = 1.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    score: str = "gaussian"
    mixture_means: tuple = ()
    data_source: str = "synthetic"
    data_seed: int = 0
    csv_path: str | None = None


@dataclass(frozen=True)
class AlgorithmConfig:
    kind: str
    mode: str = "exact_ei"  # nula only
    gamma: float = 1.0
    h: float = 0.01
    temperature: float = 1.0
    phi0: float = 1e-4
    phi1: float = 0.02
    phi2: float = 0.99
    phi3: float = 0.02
    eta: float = 1e-3
    h1: float = 1e-2
    lambda1: float = 1e-4
    h2: float = 1e-2
    h3: float | None = None
    lambda2: float = 1e-4


@dataclass(frozen=True)
class RunConfig:
    objective: ObjectiveConfig
    algorithm: AlgorithmConfig
    n_particles: int
    steps: int
    seeds: tuple[int, ...]
    record_every: int = 10
    init_mean: float = 0.0
    init_std: float = 0.1
    output_dir: str = "out"
    record_walltime: bool = False

    def to_dict(self) -> dict:
        o, a = self.objective, self.algorithm
        obj: dict = {"kind": o.kind, "d": o.d, "lambda_prime": o.lambda_prime}
        if o.kind in ("nn", "mmd"):
            obj["n"] = o.n
            if o.data_source == "csv":
                obj["data"] = {"source": "csv", "path": o.csv_path}
            else:
                obj["data"] = {"source": "synthetic", "seed": o.data_seed}
        if o.kind == "mmd":
            obj["sigma"] = o.sigma
        if o.kind == "ksd":
            obj["sigma1"] = o.sigma1
            obj["sigma2"] = o.sigma2
            obj["score"] = o.score
            if o.score == "mixture":
                obj["mixture_means"] = [list(m) for m in o.mixture_means]
        alg: dict = {"kind": a.kind}
        if a.kind == "nula":
            alg["mode"] = a.mode
            if a.mode == "exact_ei":
                alg.update(gamma=a.gamma, h=a.h, temperature=a.temperature)
            else:
                alg.update(phi0=a.phi0, phi1=a.phi1, phi2=a.phi2, phi3=a.phi3,
                           eta=a.eta)
        elif a.kind == "nla":
            alg.update(h1=a.h1, lambda1=a.lambda1)
        else:
            alg.update(h2=a.h2, gamma=a.gamma, lambda2=a.lambda2)
            if a.h3 is not None:
                alg["h3"] = a.h3
        return {
            "objective": obj,
            "algorithm": alg,
            "n_particles": self.n_particles,
            "steps": self.steps,
            "record_every": self.record_every,
            "seeds": list(self.seeds),
            "init": {"mean": self.init_mean, "std": self.init_std},
            "output_dir": self.output_dir,
            "record_walltime": self.record_walltime,
        }


def _parse_objective(raw: dict) -> ObjectiveConfig:
    raw = dict(raw)
    kind = _take(raw, "kind", "objective", str, required=True)
    _require(kind in _OBJECTIVE_KINDS, "objective.kind",
             f"must be one of {_OBJECTIVE_KINDS}, got {kind!r}")
    d = _take(raw, "d", "objective", int, required=True)
    _require(d >= 1, "objective.d", "must be >= 1")
    lambda_prime = _take(raw, "lambda_prime", "objective", float, default=1e-4)
    _require(lambda_prime >= 0, "objective.lambda_prime", "must be >= 0")
    kwargs: dict = {"kind": kind, "d": d, "lambda_prime": lambda_prime}
    if kind in ("nn", "mmd"):
        n = _take(raw, "n", "objective", int, default=100)
        _require(n >= 1, "objective.n", "must be >= 1")
        kwargs["n"] = n
        data = dict(_take(raw, "data", "objective", dict,
                          default={"source": "synthetic", "seed": 0}))
        source = _take(data, "source", "objective.data", str, default="synthetic")
        _require(source in ("synthetic", "csv"), "objective.data.source",
                 "must be 'synthetic' or 'csv'")
        kwargs["data_source"] = source
        if source == "csv":
            kwargs["csv_path"] = _take(data, "path", "objective.data", str, required=True)
        else:
            kwargs["data_seed"] = _take(data, "seed", "objective.data", int, default=0)
        _reject_unknown(data, "objective.data")
    if kind == "mmd":
        sigma = _take(raw, "sigma", "objective", float, default=1.0)
        _require(sigma > 0, "objective.sigma", "must be > 0")
        kwargs["sigma"] = sigma
    if kind == "ksd":
        for name in ("sigma1", "sigma2"):
            val = _take(raw, name, "objective", float, default=1.0)
            _require(val > 0, f"objective.{name}", "must be > 0")
            kwargs[name] = val
        score = _take(raw, "score", "objective", str, default="gaussian")
        _require(score in ("gaussian", "mixture"), "objective.score",
                 "must be 'gaussian' or 'mixture'")
        kwargs["score"] = score
        if score == "mixture":
            means = _take(raw, "mixture_means", "objective", list, required=True)
            kwargs["mixture_means"] = tuple(tuple(float(v) for v in m) for m in means)
    _reject_unknown(raw, "objective")
    return ObjectiveConfig(**kwargs)


def _parse_algorithm(raw: dict) -> AlgorithmConfig:
    raw = dict(raw)
    kind = _take(raw, "kind", "algorithm", str, required=True)
    _require(kind in _ALGORITHM_KINDS, "algorithm.kind",
             f"must be one of {_ALGORITHM_KINDS}, got {kind!r}")
    kwargs: dict = {"kind": kind}
    if kind == "nula":
        mode = _take(raw, "mode", "algorithm", str, default="exact_ei")
        _require(mode in ("exact_ei", "tuned"), "algorithm.mode",
                 "must be 'exact_ei' or 'tuned'")
        kwargs["mode"] = mode
        if mode == "exact_ei":
            gamma = _take(raw, "gamma", "algorithm", float, default=1.0)
            _require(gamma > 0, "algorithm.gamma", "must be > 0")
            h = _take(raw, "h", "algorithm", float, default=0.01)
            _require(h >= 0, "algorithm.h", "must be >= 0")
            temperature = _take(raw, "temperature", "algorithm", float, default=1.0)
            _require(temperature > 0, "algorithm.temperature", "must be > 0")
            kwargs.update(gamma=gamma, h=h, temperature=temperature)
        else:
            for name, default in (("phi0", 1e-4), ("phi1", 0.02), ("phi2", 0.99),
                                  ("phi3", 0.02), ("eta", 1e-3)):
                kwargs[name] = _take(raw, name, "algorithm", float, default=default)
            _require(0.0 < kwargs["phi2"] <= 1.0, "algorithm.phi2", "must be in (0, 1]")
            _require(kwargs["eta"] >= 0, "algorithm.eta", "must be >= 0")
    elif kind == "nla":
        h1 = _take(raw, "h1", "algorithm", float, default=1e-2)
        _require(h1 >= 0, "algorithm.h1", "must be >= 0")
        lambda1 = _take(raw, "lambda1", "algorithm", float, default=1e-4)
        _require(lambda1 >= 0, "algorithm.lambda1", "must be >= 0")
        kwargs.update(h1=h1, lambda1=lambda1)
    else:
        h2 = _take(raw, "h2", "algorithm", float, default=1e-2)
        _require(h2 >= 0, "algorithm.h2", "must be >= 0")
        gamma = _take(raw, "gamma", "algorithm", float, default=1.0)
        _require(gamma > 0, "algorithm.gamma", "must be > 0")
        lambda2 = _take(raw, "lambda2", "algorithm", float, default=1e-4)
        _require(lambda2 >= 0, "algorithm.lambda2", "must be >= 0")
        h3 = _take(raw, "h3", "algorithm", float, default=None)
        kwargs.update(h2=h2, gamma=gamma, lambda2=lambda2, h3=h3)
    _reject_unknown(raw, "algorithm")
    return AlgorithmConfig(**kwargs)


def parse_config_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    objective = _parse_objective(dict(_take(raw, "objective", "", dict, required=True)))
    algorithm = _parse_algorithm(dict(_take(raw, "algorithm", "", dict, required=True)))
    n_particles = _take(raw, "n_particles", "", int, required=True)
    _require(n_particles >= 1, "n_particles", "must be >= 1")
    steps = _take(raw, "steps", "", int, required=True)
    _require(steps >= 0, "steps", "must be >= 0")
    record_every = _take(raw, "record_every", "", int, default=10)
    _require(record_every >= 1, "record_every", "must be >= 1")
    seeds_raw = _take(raw, "seeds", "", list, default=[0, 1, 2, 3, 4])
    _require(len(seeds_raw) >= 1, "seeds", "must be nonempty")
    _require(all(isinstance(s, int) and not isinstance(s, bool) for s in seeds_raw),
             "seeds", "must be a list of integers")
    init = dict(_take(raw, "init", "", dict, default={"mean": 0.0, "std": 0.1}))
    init_mean = _take(init, "mean", "init", float, default=0.0)
    init_std = _take(init, "std", "init", float, default=0.1)
    _require(init_std >= 0, "init.std", "must be >= 0")
    _reject_unknown(init, "init")
    output_dir = _take(raw, "output_dir", "", str, default="out")
    record_walltime = _take(raw, "record_walltime", "", bool, default=False)
    _reject_unknown(raw, "")

    override = os.environ.get("MFL_SEED_OVERRIDE")
    if override:
        try:
            seeds_raw = [int(s) for s in override.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"MFL_SEED_OVERRIDE is not a comma-separated int list: "
                              f"{override!r}") from None
        _require(len(seeds_raw) >= 1, "MFL_SEED_OVERRIDE", "must be nonempty")

    return RunConfig(objective=objective, algorithm=algorithm,
                     n_particles=n_particles, steps=steps,
                     seeds=tuple(seeds_raw), record_every=record_every,
                     init_mean=init_mean, init_std=init_std,
                     output_dir=output_dir, record_walltime=record_walltime)


def parse_config(path) -> RunConfig:
    """Load and fully validate a JSON experiment config."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config_dict(raw)


def build_objective(cfg: ObjectiveConfig) -> MeanFieldObjective:
    """Instantiate the objective named by the config (data included)."""
    if cfg.kind == "ridge":
        return RidgeObjective(dim=cfg.d, lambda_prime=cfg.lambda_prime)
    if cfg.kind == "nn":
        if cfg.data_source == "csv":
            a, b = load_regression_csv(cfg.csv_path)
            if a.shape[1] != cfg.d:
                raise ConfigError(f"objective.d = {cfg.d} but CSV has {a.shape[1]} features")
        else:
            a, b, _ = make_gaussian_regression_data(cfg.d, cfg.n, cfg.data_seed)
        return NeuralNetObjective(inputs=a, labels=b, lambda_prime=cfg.lambda_prime)
    if cfg.kind == "mmd":
        if cfg.data_source == "csv":
            z, _ = load_regression_csv(cfg.csv_path)
            if z.shape[1] != cfg.d:
                raise ConfigError(f"objective.d = {cfg.d} but CSV has {z.shape[1]} features")
        else:
            g = RngStreams(cfg.data_seed).generator(DOMAIN_DATA, 1)
            z = g.standard_normal((cfg.n, cfg.d))
        return MmdObjective(samples=z, sigma=cfg.sigma, lambda_prime=cfg.lambda_prime)
    if cfg.kind == "ksd":
        if cfg.score == "mixture":
            means = np.asarray(cfg.mixture_means, dtype=float)
            if means.ndim != 2 or means.shape[1] != cfg.d:
                raise ConfigError("objective.mixture_means must be a list of d-vectors")
            score, jac = gaussian_mixture_score(means)
        else:
            score, jac = gaussian_score()
        return KsdObjective(dim=cfg.d, score=score, score_jacobian=jac,
                            sigma1=cfg.sigma1, sigma2=cfg.sigma2,
                            lambda_prime=cfg.lambda_prime)
    raise ConfigError(f"unknown objective kind {cfg.kind!r}")


def build_integrator_spec(cfg: AlgorithmConfig) -> IntegratorSpec:
    if cfg.kind == "nula":
        if cfg.mode == "exact_ei":
            return NulaSpec(derive_step_params(cfg.gamma, cfg.h, cfg.temperature))
        return NulaSpec(tuned_step_params(cfg.phi0, cfg.phi1, cfg.phi2,
                                          cfg.phi3, cfg.eta))
    if cfg.kind == "nla":
        return NlaSpec(h1=cfg.h1, lambda1=cfg.lambda1)
    if cfg.kind == "em_nula":
        return EmNulaSpec(h2=cfg.h2, gamma=cfg.gamma, lambda2=cfg.lambda2, h3=cfg.h3)
    raise ConfigError(f"unknown algorithm kind {cfg.kind!r}")
