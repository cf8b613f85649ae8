"""Experiment configuration: a flat key = value text format.

Strings, integers, reals and booleans only, one assignment per line, with
'#' comments; unknown keys are rejected.  Rendering is canonical, so a
rendered config re-parses to an equivalent one.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .datasets import BARS_DIM, gen_bars, gen_gaussian2d, gen_scalar
from .distributions import AnalyticDist, Exponential, Gaussian, Mixture, Uniform
from .errors import ConfigError
from .network import AiqnModel, TauMode, create_model, default_hidden_sizes
from .rng import Rng
from .training import TrainConfig

TASKS = ("scalar-analytic", "multivariate-gaussian", "bars8x8", "external-idx")

# Model-construction seeds live in a different hash domain than training
# streams so the two never alias.
_MODEL_SEED_SALT = 0x6D6F64656C


@dataclass
class ExperimentConfig:
    # experiment
    task: str = "scalar-analytic"
    count: int = 10000
    seed: int = 0
    out: str = "."
    # scalar-analytic distribution
    dist: str = "gaussian"
    mu: float = 0.0
    sigma: float = 1.0
    a: float = 0.0
    b: float = 1.0
    lam: float = 1.0
    mixture_weights: str = ""
    mixture_mus: str = ""
    mixture_sigmas: str = ""
    # multivariate-gaussian
    rho: float = 0.8
    # external-idx ingestion
    idx_path: str = ""
    # file inputs
    dataset: str = ""
    checkpoint: str = ""
    # model
    hidden_sizes: str = ""
    head_width: int = 0
    ordering: str = ""
    tau_mode: str = "per-dimension"
    autoregressive: bool = True
    context_width: int = 0
    # training
    optimizer: str = "adam"
    lr: float = 1e-4
    lr_boundaries: str = ""
    lr_values: str = ""
    kappa: float = 0.002
    batch_size: int = 64
    steps: int = 20000
    polyak: float = 0.9999
    eval_interval: int = 0
    eval_samples: int = 256
    tau_samples: int = 1

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; choose from {TASKS}")
        if self.tau_mode not in ("per-dimension", "shared"):
            raise ConfigError(f"tau_mode must be per-dimension or shared, got {self.tau_mode!r}")


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        raw = raw[1:-1]
    try:
        if kind == "bool":
            if raw.lower() not in ("true", "false"):
                raise ValueError(raw)
            return raw.lower() == "true"
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} (expected {kind})") from exc


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    return ExperimentConfig(**values)


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    """Config from an untyped mapping (the service's JSON payloads)."""
    values = {}
    for key, value in mapping.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _parse_value(key, str(value))
    return ExperimentConfig(**values)


def render_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = str(value).lower()
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())


def _parse_floats(raw: str, key: str) -> tuple[float, ...]:
    if not raw.strip():
        return ()
    try:
        return tuple(float(t) for t in raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad comma-separated reals in {key!r}: {raw!r}") from exc


def _parse_ints(raw: str, key: str) -> tuple[int, ...]:
    if not raw.strip():
        return ()
    try:
        return tuple(int(t) for t in raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad comma-separated integers in {key!r}: {raw!r}") from exc


def build_dist(cfg: ExperimentConfig) -> AnalyticDist:
    if cfg.dist == "gaussian":
        return Gaussian(cfg.mu, cfg.sigma)
    if cfg.dist == "uniform":
        return Uniform(cfg.a, cfg.b)
    if cfg.dist == "exponential":
        return Exponential(cfg.lam)
    if cfg.dist == "mixture":
        weights = _parse_floats(cfg.mixture_weights, "mixture_weights")
        mus = _parse_floats(cfg.mixture_mus, "mixture_mus")
        sigmas = _parse_floats(cfg.mixture_sigmas, "mixture_sigmas")
        if not (len(weights) == len(mus) == len(sigmas)) or not weights:
            raise ConfigError("mixture needs equal-length nonempty "
                              "mixture_weights/mixture_mus/mixture_sigmas")
        return Mixture(weights, tuple(Gaussian(m, s) for m, s in zip(mus, sigmas)))
    raise ConfigError(f"unknown dist {cfg.dist!r}")


def task_dimension(cfg: ExperimentConfig) -> int | None:
    """Data dimension implied by the task, when known without reading files."""
    if cfg.task == "scalar-analytic":
        return 1
    if cfg.task == "multivariate-gaussian":
        return 2
    if cfg.task == "bars8x8":
        return BARS_DIM
    return None


def generate_dataset(cfg: ExperimentConfig) -> np.ndarray:
    rng = Rng(cfg.seed)
    if cfg.task == "scalar-analytic":
        return gen_scalar(build_dist(cfg), cfg.count, rng)
    if cfg.task == "multivariate-gaussian":
        return gen_gaussian2d(cfg.rho, cfg.count, rng)
    if cfg.task == "bars8x8":
        return gen_bars(cfg.count, rng)
    if cfg.task == "external-idx":
        from .tensor_io import read_idx
        if not cfg.idx_path:
            raise ConfigError("external-idx task needs idx_path")
        return read_idx(cfg.idx_path)
    raise ConfigError(f"unknown task {cfg.task!r}")


def resolve_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Materialize auto fields (hidden sizes, head width) where the task
    dimension is known; used by --dry-run and model construction."""
    n = task_dimension(cfg)
    hidden = cfg.hidden_sizes
    head = cfg.head_width
    if n is not None:
        if not hidden.strip():
            hidden = ",".join(str(h) for h in default_hidden_sizes(n))
        if head == 0:
            head = _parse_ints(hidden, "hidden_sizes")[-1]
    out = ExperimentConfig(**{**vars(cfg), "hidden_sizes": hidden, "head_width": head})
    return out


def build_model(cfg: ExperimentConfig, n: int, seed: int | None = None) -> AiqnModel:
    hidden = _parse_ints(cfg.hidden_sizes, "hidden_sizes") or None
    ordering = None
    if cfg.ordering.strip():
        ordering = np.array(_parse_ints(cfg.ordering, "ordering"), dtype=np.int64)
    head = cfg.head_width or None
    model_seed = (cfg.seed if seed is None else seed) ^ _MODEL_SEED_SALT
    return create_model(n, hidden_sizes=list(hidden) if hidden else None,
                        head_width=head, ordering=ordering,
                        tau_mode=TauMode(cfg.tau_mode),
                        autoregressive=cfg.autoregressive,
                        context_width=cfg.context_width,
                        seed=model_seed)


def build_train_config(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(
        optimizer=cfg.optimizer, lr=cfg.lr,
        lr_boundaries=_parse_ints(cfg.lr_boundaries, "lr_boundaries"),
        lr_values=_parse_floats(cfg.lr_values, "lr_values"),
        kappa=cfg.kappa, batch_size=cfg.batch_size, steps=cfg.steps,
        polyak=cfg.polyak, eval_interval=cfg.eval_interval,
        eval_samples=cfg.eval_samples, tau_samples=cfg.tau_samples,
        seed=cfg.seed)
