#!/usr/bin/env python3
"""
Run records for HybridCI
The persisted outcome of one experiment run (run.json) and the atomic file
writes every output of the harness goes through.
"""

import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from src import __version__
from src.core.errors import InvalidInputError

logger = logging.getLogger(__name__)

RUN_FILE = "run.json"
HISTORY_FILE = "history.csv"
PREDICTIONS_FILE = "predictions.csv"

# field name -> accepted JSON types (None allowed where listed)
SCHEMA = {
    "task": (str,),
    "name": (str,),
    "version": (str,),
    "seed": (int,),
    "config": (dict,),
    "dataset_fingerprint": (str,),
    "history_columns": (list,),
    "history": (list,),
    "model": (dict, type(None)),
    "train_rmse": (float, int, type(None)),
    "valid_rmse": (float, int, type(None)),
    "test_rmse": (float, int, type(None)),
    "parameter_count": (int,),
    "duration_seconds": (float, int),
    "diverged": (bool,),
    "extra": (dict,),
}


def atomic_write_text(path, text):
    """Write text to a temporary file next to path, then rename it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    handle = tempfile.NamedTemporaryFile("w", encoding="utf-8", dir=directory, prefix=".tmp-",
                                         suffix=os.path.basename(path), delete=False, newline="")
    try:
        with handle:
            handle.write(text)
        os.replace(handle.name, path)
    except OSError:
        if os.path.exists(handle.name):
            os.unlink(handle.name)
        raise


def _finite_or_none(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


@dataclass
class RunRecord:
    """
    Everything needed to report and reproduce one run.

    Attributes:
        task (str): Task that produced the record
        name (str): Run name shown by compare
        seed (int): Master seed actually used
        config (dict): Full experiment configuration with defaults resolved
        dataset_fingerprint (str): Hash of the normalized dataset
        history_columns (list): Column names of history rows
        history (list): Per-generation or per-epoch rows
        model (dict): Serialized final model
        train_rmse / valid_rmse / test_rmse (float): Errors on the splits (None if the split is empty)
        parameter_count (int): Adjustable parameters of the final model
        duration_seconds (float): Wall-clock time of the run
        diverged (bool): Whether training diverged
        extra (dict): Task specific details (best genome, controller comparison, ...)
    """

    task: str
    name: str
    seed: int
    config: Dict[str, Any]
    dataset_fingerprint: str = ""
    history_columns: Tuple[str, ...] = ()
    history: List[list] = field(default_factory=list)
    model: Optional[Dict[str, Any]] = None
    train_rmse: Optional[float] = None
    valid_rmse: Optional[float] = None
    test_rmse: Optional[float] = None
    parameter_count: int = 0
    duration_seconds: float = 0.0
    diverged: bool = False
    extra: Dict[str, Any] = field(default_factory=dict)
    version: str = __version__

    def to_dict(self):
        data = asdict(self)
        data["history_columns"] = list(self.history_columns)
        data["history"] = [list(row) for row in self.history]
        for name in ("train_rmse", "valid_rmse", "test_rmse"):
            data[name] = _finite_or_none(data[name])
        data["duration_seconds"] = float(self.duration_seconds)
        return data

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)

    def save(self, directory):
        path = os.path.join(directory, RUN_FILE)
        atomic_write_text(path, self.to_json() + "\n")
        logger.info("Wrote %s", path)
        return path

    @classmethod
    def from_dict(cls, data):
        validate_run_record(data)
        values = {name: data[name] for name in SCHEMA}
        values["history_columns"] = tuple(values["history_columns"])
        return cls(**values)

    @classmethod
    def load(cls, path):
        """
        Load and validate a run.json file (or the run.json inside a directory).

        Raises:
            InvalidInputError: If the file is not valid JSON or violates the schema
        """
        if os.path.isdir(path):
            path = os.path.join(path, RUN_FILE)
        try:
            with open(path, encoding="utf-8") as handle:
                data = json.load(handle)
        except FileNotFoundError:
            raise InvalidInputError(f"no run record at {path}") from None
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path} is not valid JSON: {exc}") from None
        return cls.from_dict(data)


def validate_run_record(data):
    """
    Check a decoded run.json document against the documented schema.

    Raises:
        InvalidInputError: Naming the first missing or mistyped field
    """
    if not isinstance(data, dict):
        raise InvalidInputError("run record must be a JSON object")
    for name, types in SCHEMA.items():
        if name not in data:
            raise InvalidInputError(f"run record is missing field {name}")
        value = data[name]
        if isinstance(value, bool) and bool not in types:
            raise InvalidInputError(f"run record field {name} has type bool")
        if not isinstance(value, types):
            raise InvalidInputError(f"run record field {name} has type {type(value).__name__}")
    width = len(data["history_columns"])
    for index, row in enumerate(data["history"], start=1):
        if not isinstance(row, list) or len(row) != width:
            raise InvalidInputError(f"history row {index} does not have {width} values")
    for name in ("train_rmse", "valid_rmse", "test_rmse"):
        if data[name] is not None and data[name] < 0:
            raise InvalidInputError(f"run record field {name} is negative")
    return data
