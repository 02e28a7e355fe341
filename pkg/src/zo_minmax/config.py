"""Experiment configuration: strict JSON in, canonical JSON out.

Every section is a dataclass whose defaults are the documented defaults.
Unknown keys, duplicate keys and non-finite literals are rejected.
Command-line overrides address fields by dotted path, e.g.
``--solver.eta0 0.05``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import typing
from dataclasses import dataclass, field

from .errors import InvalidArgumentError

__all__ = [
    "ConfigError",
    "DatasetConfig",
    "ModelConfig",
    "ObjectiveConfig",
    "SolverSection",
    "ReferenceConfig",
    "OutputsConfig",
    "CompareConfig",
    "RobustnessConfig",
    "SweepConfig",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "apply_overrides",
    "parse_override_args",
]

PROBLEMS = ("wdrsc", "toy-bilinear")
VARIANT_NAMES = ("OGDA_RR", "OGDA_WR", "SGDA_RR", "SGDA_WR")


class ConfigError(InvalidArgumentError):
    pass


@dataclass
class DatasetConfig:
    """CSV ``path`` or, when it is null, a synthetic draw.

    For the bilinear toy ``n``, ``d`` and ``seed`` size and seed the toy.
    """

    path: str | None = None
    label_column: str = "label"
    standardize: bool = False
    n: int = 100
    d: int = 5
    noise_std: float = 0.1
    strategic: int | None = None
    seed: int = 0


@dataclass
class ModelConfig:
    zeta: float = 0.05
    mask: list[int] | None = None  # strategic feature indices; null keeps the dataset's own


@dataclass
class ObjectiveConfig:
    delta: float = 0.4
    kappa: float = 0.5
    alpha_max: float | None = None
    link: str = "logistic"


@dataclass
class SolverSection:
    variant: str = "OGDA_RR"
    epochs: int = 500
    eta0: float = 0.05
    eps0: float = 10.0
    chi: float = 0.1
    eta_exponent: float | None = None
    eps_exponent: float = 0.25
    estimator_mode: str = "hybrid"
    seed: int = 0
    init: str = "zero"
    eval_every: int = 1


@dataclass
class ReferenceConfig:
    enabled: bool = True
    tol: float = 1e-10
    max_iters: int = 2_000_000
    method: str = "ogda"


@dataclass
class OutputsConfig:
    dir: str = "."
    trace_csv: str = "trace.csv"
    plot_svg: str | None = None
    snapshot_every: int | None = None
    wall_time: bool = False


@dataclass
class CompareConfig:
    repeats: int = 1


@dataclass
class RobustnessConfig:
    zeta_grid: list[float] = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3])
    solution: str = "solution.json"
    baseline_iters: int = 5000
    curve_csv: str = "curve.csv"
    plot_svg: str | None = "curve.svg"


@dataclass
class SweepConfig:
    n_values: list[int] = field(default_factory=lambda: [50, 100])
    d_values: list[int] = field(default_factory=lambda: [5, 10])
    epsilon: float = 0.1
    epoch_cap: int = 5000
    table_csv: str = "sweep.csv"
    plot_svg: str | None = "sweep.svg"


@dataclass
class ExperimentConfig:
    problem: str = "wdrsc"
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    solver: SolverSection = field(default_factory=SolverSection)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)
    robustness: RobustnessConfig = field(default_factory=RobustnessConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        validate(self)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        """Canonical form: sorted keys, no whitespace."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), allow_nan=False)

    def hash(self) -> str:
        """Digest of the canonical form; the output directory does not affect results and is left out."""
        data = self.to_dict()
        del data["outputs"]["dir"]
        text = json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -- parsing ---------------------------------------------------------------


def _no_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ConfigError(f"duplicate key {key!r}")
        out[key] = value
    return out


def _reject_constant(name):
    raise ConfigError(f"non-finite literal {name} is not allowed")


def _coerce(value, hint, where: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union or (origin is not None and type(None) in args):
        if value is None:
            if type(None) in args:
                return None
            raise ConfigError(f"{where} may not be null")
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], where)
    if value is None:
        raise ConfigError(f"{where} may not be null")
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be a list")
        return [_coerce(v, args[0], f"{where}[{k}]") for k, v in enumerate(value)]
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        if not math.isfinite(value):
            raise ConfigError(f"{where} must be finite")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    raise ConfigError(f"{where}: unsupported field type {hint!r}")


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        path = f"{where}.{name}" if where else name
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, path)
        else:
            kwargs[name] = _coerce(value, hint, path)
    return kwargs


def from_dict(data: dict) -> ExperimentConfig:
    kwargs = _build(ExperimentConfig, data, "")
    hints = typing.get_type_hints(ExperimentConfig)
    for name, value in list(kwargs.items()):
        if dataclasses.is_dataclass(hints[name]):
            kwargs[name] = hints[name](**value)
    return ExperimentConfig(**kwargs)


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicates, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return from_dict(data)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _parse_value(raw: str):
    try:
        return json.loads(raw, parse_constant=_reject_constant)
    except json.JSONDecodeError:
        return raw


def apply_overrides(config: ExperimentConfig, overrides: list[tuple[str, str]]) -> ExperimentConfig:
    """Return a new config with dotted-path string overrides applied.

    Values are read as JSON literals when possible, else as bare strings.
    """
    data = config.to_dict()
    for path, raw in overrides:
        keys = path.split(".")
        node = data
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                raise ConfigError(f"unknown override path {path!r}")
            node = node[key]
        if keys[-1] not in node:
            raise ConfigError(f"unknown override path {path!r}")
        node[keys[-1]] = _parse_value(raw)
    return from_dict(data)


def parse_override_args(extra: list[str]) -> list[tuple[str, str]]:
    """Turn leftover ``--a.b value`` / ``--a.b=value`` tokens into pairs."""
    pairs = []
    k = 0
    while k < len(extra):
        token = extra[k]
        if not token.startswith("--") or "." not in token:
            raise ConfigError(f"unrecognized argument {token!r}")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            k += 1
        else:
            if k + 1 >= len(extra):
                raise ConfigError(f"override {token} needs a value")
            value = extra[k + 1]
            k += 2
        pairs.append((key, value))
    return pairs


# -- semantic checks ---------------------------------------------------------


def validate(cfg: ExperimentConfig) -> None:
    if cfg.problem not in PROBLEMS:
        raise ConfigError(f"problem must be one of {PROBLEMS}, got {cfg.problem!r}")
    ds = cfg.dataset
    if ds.n < 1 or ds.d < 1:
        raise ConfigError("dataset.n and dataset.d must be >= 1")
    if ds.noise_std < 0:
        raise ConfigError("dataset.noise_std must be >= 0")
    if not cfg.model.zeta > 0:
        raise ConfigError("model.zeta must be positive")
    ob = cfg.objective
    if not (ob.delta > 0 and ob.kappa > 0):
        raise ConfigError("objective.delta and objective.kappa must be positive")
    if ob.alpha_max is not None and not ob.alpha_max > 0:
        raise ConfigError("objective.alpha_max must be positive")
    s = cfg.solver
    if s.variant not in VARIANT_NAMES + ("all",):
        raise ConfigError(f"solver.variant must be one of {VARIANT_NAMES + ('all',)}")
    if s.estimator_mode not in ("full_zo", "hybrid"):
        raise ConfigError("solver.estimator_mode must be full_zo or hybrid")
    if s.epochs < 1 or s.eval_every < 1:
        raise ConfigError("solver.epochs and solver.eval_every must be >= 1")
    if not (s.eta0 > 0 and s.eps0 > 0):
        raise ConfigError("solver.eta0 and solver.eps0 must be positive")
    if not 0 < s.chi < 0.25:
        raise ConfigError("solver.chi must lie in (0, 1/4)")
    if s.init not in ("zero", "far"):
        raise ConfigError("solver.init must be zero or far")
    if cfg.reference.method not in ("ogda", "gda"):
        raise ConfigError("reference.method must be ogda or gda")
    if not cfg.reference.tol > 0 or cfg.reference.max_iters < 1:
        raise ConfigError("reference.tol must be positive and reference.max_iters >= 1")
    if cfg.outputs.snapshot_every is not None and cfg.outputs.snapshot_every < 1:
        raise ConfigError("outputs.snapshot_every must be >= 1")
    if cfg.compare.repeats < 1:
        raise ConfigError("compare.repeats must be >= 1")
    if not cfg.robustness.zeta_grid:
        raise ConfigError("robustness.zeta_grid must be non-empty")
    if any(z < 0 for z in cfg.robustness.zeta_grid):
        raise ConfigError("robustness.zeta_grid entries must be >= 0")
    sw = cfg.sweep
    if not sw.n_values or not sw.d_values:
        raise ConfigError("sweep grid must be non-empty")
    if any(v < 1 for v in sw.n_values + sw.d_values):
        raise ConfigError("sweep grid values must be >= 1")
    if not sw.epsilon > 0 or sw.epoch_cap < 1:
        raise ConfigError("sweep.epsilon must be positive and sweep.epoch_cap >= 1")
