#!/usr/bin/env python3
"""
Experiment configuration for HybridCI
One JSON document per run, parsed into frozen dataclasses. Unknown keys are
errors naming their dotted path; every default is resolved at parse time so
the echo written to run.json reproduces the run.
"""

import json
import logging
import os
import typing
from dataclasses import dataclass, field, fields, is_dataclass, replace
from enum import Enum
from typing import Optional, Tuple

from src.core.datasets import DEFAULT_HORIZON, DEFAULT_LAGS, SplitSpec
from src.core.errors import InvalidConfigError, InvalidSplitError
from src.evolution.engine import EAConfig
from src.fuzzy.inference import SystemKind
from src.fuzzy.membership import Defuzz, MFKind, TConorm, TNorm
from src.fuzzy.neurofuzzy import NFTrainConfig
from src.hybrids.evonf import EvoNFConfig
from src.hybrids.evonf import default_ea as evonf_default_ea
from src.hybrids.mleann import MLEANNConfig
from src.hybrids.mleann import default_ea as mleann_default_ea
from src.neural.mlp import TransferFn
from src.neural.trainers import TrainerConfig

logger = logging.getLogger(__name__)

TASKS = ("gen-series", "train-nn", "anfis", "mleann", "evonf", "ea-bench")
SOURCES = ("mackey_glass", "csv")
MAX_SEED = 2 ** 64 - 1


@dataclass(frozen=True)
class MackeyGlassSection:
    a: float = 0.2
    b: float = 0.1
    tau: float = 17.0
    dt: float = 0.1
    n: int = 1000
    x0: float = 1.2
    washout: int = 100
    sample_every: int = 10


@dataclass(frozen=True)
class CsvSection:
    path: str = ""
    has_header: bool = False
    target_cols: int = 1


@dataclass(frozen=True)
class EmbeddingSection:
    lags: Tuple[int, ...] = DEFAULT_LAGS
    horizon: int = DEFAULT_HORIZON


@dataclass(frozen=True)
class SplitSection:
    train: float = 0.5
    valid: float = 0.25
    test: float = 0.25
    shuffle: bool = False

    def spec(self, seed):
        return SplitSpec(self.train, self.valid, self.test, self.shuffle, seed)


@dataclass(frozen=True)
class DatasetSection:
    """Where the data comes from and how it is prepared; embedding applies to generated series only."""

    source: str = "mackey_glass"
    mackey_glass: MackeyGlassSection = field(default_factory=MackeyGlassSection)
    csv: CsvSection = field(default_factory=CsvSection)
    embedding: EmbeddingSection = field(default_factory=EmbeddingSection)
    split: SplitSection = field(default_factory=SplitSection)
    normalize: bool = True


@dataclass(frozen=True)
class NetworkSection:
    """Fixed architecture for the train-nn task."""

    hidden: Tuple[int, ...] = (8,)
    transfer: Tuple[TransferFn, ...] = (TransferFn.TANH,)
    init_scale: float = 0.5


@dataclass(frozen=True)
class FuzzySection:
    """Grid-partition system for the anfis task."""

    kind: SystemKind = SystemKind.TAKAGI_SUGENO
    terms_per_var: int = 2
    shape: MFKind = MFKind.GAUSSIAN
    tnorm: TNorm = TNorm.PRODUCT
    tconorm: TConorm = TConorm.MAX
    defuzz: Defuzz = Defuzz.CENTROID


@dataclass(frozen=True)
class BenchSection:
    """Sphere benchmark for the ea-bench task."""

    dimensions: int = 2
    bound: float = 5.12


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    name: str = ""
    seed: int = 0
    output_dir: str = "results"
    dataset: DatasetSection = field(default_factory=DatasetSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    fuzzy: FuzzySection = field(default_factory=FuzzySection)
    neurofuzzy: NFTrainConfig = field(default_factory=NFTrainConfig)
    ea: Optional[EAConfig] = None
    mleann: MLEANNConfig = field(default_factory=MLEANNConfig)
    evonf: EvoNFConfig = field(default_factory=EvoNFConfig)
    bench: BenchSection = field(default_factory=BenchSection)

    @property
    def run_name(self):
        return self.name or self.task

    def split_spec(self):
        return self.dataset.split.spec(self.seed)


def task_ea_defaults(task):
    """Evolution settings a task starts from before the ea section is applied."""
    if task == "mleann":
        return mleann_default_ea()
    if task == "evonf":
        return evonf_default_ea()
    return EAConfig()


def _origin(hint):
    return typing.get_origin(hint), typing.get_args(hint)


def _coerce(hint, value, path):
    origin, args = _origin(hint)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, path)
    if is_dataclass(hint):
        return parse_section(hint, value, path)
    if isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint(value)
        except ValueError:
            choices = ", ".join(str(member.value) for member in hint)
            raise InvalidConfigError(path, f"must be one of {choices}, got {value!r}") from None
    if hint is bool:
        if not isinstance(value, bool):
            raise InvalidConfigError(path, f"must be true or false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise InvalidConfigError(path, f"must be an integer, got {value!r}")
        return int(value)
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidConfigError(path, f"must be a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise InvalidConfigError(path, f"must be a string, got {value!r}")
        return value
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise InvalidConfigError(path, f"must be a list, got {value!r}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(args[0], v, f"{path}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise InvalidConfigError(path, f"must have {len(args)} entries, got {len(value)}")
        return tuple(_coerce(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if origin is dict or hint is dict:
        if not isinstance(value, dict):
            raise InvalidConfigError(path, f"must be an object, got {value!r}")
        if args and args[1] is float:
            return {k: _coerce(float, v, f"{path}.{k}") for k, v in value.items()}
        return dict(value)
    return value


def parse_section(cls, data, path, base=None, exclude=()):
    """
    Parse a JSON object into dataclass cls, starting from base (or cls()).

    Raises:
        InvalidConfigError: On unknown keys, wrong types or values the dataclass rejects
    """
    if not isinstance(data, dict):
        raise InvalidConfigError(path, f"must be an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)} - set(exclude)
    hints = typing.get_type_hints(cls)
    values = {}
    for key, value in data.items():
        key_path = f"{path}.{key}" if path else key
        if key not in known:
            raise InvalidConfigError(key_path, "unknown key")
        values[key] = _coerce(hints[key], value, key_path)
    try:
        return replace(base if base is not None else cls(), **values)
    except InvalidConfigError as exc:
        if path and not exc.field.startswith(f"{path}."):
            raise InvalidConfigError(f"{path}.{exc.field}", exc.detail) from None
        raise
    except (ValueError, TypeError) as exc:
        raise InvalidConfigError(path or cls.__name__, str(exc)) from None


def parse_experiment(data, seed=None, output_dir=None):
    """
    Build a fully resolved ExperimentConfig from a decoded JSON document.

    Args:
        data (dict): Decoded configuration
        seed (int): Override of the top-level seed
        output_dir (str): Override of the output directory

    Raises:
        InvalidConfigError: Naming the offending field
    """
    if not isinstance(data, dict):
        raise InvalidConfigError("config", "must be a JSON object")
    if "task" not in data:
        raise InvalidConfigError("task", f"is required (one of {', '.join(TASKS)})")
    task = data["task"]
    if task not in TASKS:
        raise InvalidConfigError("task", f"must be one of {', '.join(TASKS)}, got {task!r}")

    data = dict(data)
    if seed is not None:
        data["seed"] = seed
    if output_dir is not None:
        data["output_dir"] = output_dir
    raw_ea = data.pop("ea", {})
    raw_mleann = data.pop("mleann", {})
    raw_evonf = data.pop("evonf", {})
    cfg = parse_section(ExperimentConfig, data, "", base=ExperimentConfig(task))

    if not 0 <= cfg.seed <= MAX_SEED:
        raise InvalidConfigError("seed", f"must be in [0, 2^64), got {cfg.seed}")
    ea = parse_section(EAConfig, raw_ea, "ea", base=task_ea_defaults(task), exclude=("seed",))
    ea = replace(ea, seed=cfg.seed)
    cfg = replace(
        cfg,
        ea=ea,
        mleann=replace(parse_section(MLEANNConfig, raw_mleann, "mleann", exclude=("ea",)), ea=ea),
        evonf=replace(parse_section(EvoNFConfig, raw_evonf, "evonf", exclude=("ea",)), ea=ea),
    )
    _check_dataset(cfg)
    _check_network(cfg.network)
    _check_fuzzy(cfg.fuzzy)
    return cfg


def _check_dataset(cfg: ExperimentConfig):
    dataset = cfg.dataset
    if dataset.source not in SOURCES:
        raise InvalidConfigError("dataset.source", f"must be one of {', '.join(SOURCES)}, got {dataset.source!r}")
    if cfg.task == "gen-series" and dataset.source != "mackey_glass":
        raise InvalidConfigError("dataset.source", "gen-series only generates mackey_glass series")
    if dataset.source == "csv":
        if not dataset.csv.path:
            raise InvalidConfigError("dataset.csv.path", "is required for csv datasets")
        if not os.path.isfile(dataset.csv.path):
            raise InvalidConfigError("dataset.csv.path", f"file not found: {dataset.csv.path}")
        if dataset.csv.target_cols < 1:
            raise InvalidConfigError("dataset.csv.target_cols", "must be at least 1")
    if any(lag < 0 for lag in dataset.embedding.lags) or not dataset.embedding.lags:
        raise InvalidConfigError("dataset.embedding.lags", "must be a non-empty list of non-negative offsets")
    if dataset.embedding.horizon < 1:
        raise InvalidConfigError("dataset.embedding.horizon", "must be positive")
    try:
        cfg.split_spec()
    except InvalidSplitError as exc:
        raise InvalidConfigError("dataset.split", str(exc)) from None


def _check_network(network: NetworkSection):
    if not network.hidden or any(size < 1 for size in network.hidden):
        raise InvalidConfigError("network.hidden", "must list at least one positive layer size")
    if len(network.transfer) != len(network.hidden):
        raise InvalidConfigError("network.transfer", "needs one transfer function per hidden layer")
    if not network.init_scale > 0:
        raise InvalidConfigError("network.init_scale", "must be positive")


def _check_fuzzy(fuzzy: FuzzySection):
    if fuzzy.terms_per_var < 2:
        raise InvalidConfigError("fuzzy.terms_per_var", "must be at least 2")
    if fuzzy.kind is SystemKind.MAMDANI and fuzzy.shape is not MFKind.GAUSSIAN:
        raise InvalidConfigError("fuzzy.shape", "Mamdani training needs gaussian membership functions")


def load_experiment(path, seed=None, output_dir=None):
    """
    Read and parse an experiment file.

    Raises:
        InvalidConfigError: If the file is missing, is not JSON or fails validation
    """
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except FileNotFoundError:
        raise InvalidConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfigError("config", f"{path} is not valid JSON: {exc}") from None
    return parse_experiment(data, seed, output_dir)


def _plain(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in fields(value)}
    return value


def config_to_dict(cfg: ExperimentConfig):
    """The echo written to run.json; parse_experiment(config_to_dict(cfg)) == cfg."""
    data = _plain(cfg)
    data["ea"].pop("seed")
    for section in ("mleann", "evonf"):
        data[section].pop("ea")
    return data
