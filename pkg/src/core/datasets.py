#!/usr/bin/env python3
"""
Datasets for HybridCI
Benchmark series generation, delay embedding, CSV ingestion, splitting,
min-max normalisation and RMSE scoring.
"""

import csv
import hashlib
import io
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.core.errors import InvalidInputError, InvalidSplitError, NumericBlowupError, ParseError
from src.core.numeric import RngStream, as_matrix
from src.core.records import atomic_write_text

logger = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e6

# Conventional Mackey-Glass setup used when an experiment does not override it
DEFAULT_LAGS = (18, 12, 6, 0)
DEFAULT_HORIZON = 6


def fingerprint_arrays(*arrays):
    digest = hashlib.blake2b(digest_size=8)
    for array in arrays:
        digest.update(np.ascontiguousarray(array, dtype=np.float64).tobytes())
    return digest.hexdigest()


@dataclass(frozen=True)
class Dataset:
    """
    Supervised training set: n input rows of width d paired with n target rows of width m.

    Attributes:
        inputs (Matrix): n x d inputs
        targets (Matrix): n x m targets
        name (str): Label used in reports
    """

    inputs: np.ndarray
    targets: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        inputs = as_matrix(self.inputs, name=f"{self.name} inputs")
        targets = as_matrix(self.targets, name=f"{self.name} targets")
        if inputs.shape[0] < 1:
            raise InvalidInputError(f"{self.name} needs at least one row")
        if inputs.shape[0] != targets.shape[0]:
            raise InvalidInputError(
                f"{self.name} has {inputs.shape[0]} input rows but {targets.shape[0]} target rows")
        if inputs.shape[1] < 1 or targets.shape[1] < 1:
            raise InvalidInputError(f"{self.name} needs at least one input and one target column")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def n_rows(self):
        return self.inputs.shape[0]

    @property
    def n_inputs(self):
        return self.inputs.shape[1]

    @property
    def n_targets(self):
        return self.targets.shape[1]

    def take(self, rows, name=None):
        """Return a new dataset built from the given row indices."""
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.inputs[rows], self.targets[rows], name or self.name)

    def fingerprint(self):
        """64-bit hash (hex) of the dataset's bytes, used to check runs are comparable."""
        return fingerprint_arrays(self.inputs, self.targets)


@dataclass(frozen=True)
class SplitSpec:
    """Fractions for train / validation / test partitions."""

    train_fraction: float = 0.5
    valid_fraction: float = 0.25
    test_fraction: float = 0.25
    shuffle: bool = False
    seed: int = 0

    def __post_init__(self):
        fractions = (self.train_fraction, self.valid_fraction, self.test_fraction)
        if any(f < 0 for f in fractions):
            raise InvalidSplitError(f"split fractions must be non-negative, got {fractions}")
        if abs(sum(fractions) - 1.0) > 1e-12:
            raise InvalidSplitError(f"split fractions must sum to 1, got {sum(fractions)!r}")


def _mackey_glass_rate(a, b, x, delayed):
    return a * delayed / (1.0 + delayed ** 10) - b * x


def gen_mackey_glass(a=0.2, b=0.1, tau=17.0, dt=0.1, n=1000, x0=1.2, washout=0, sample_every=1):
    """
    Integrate the Mackey-Glass delay differential equation.

    dx/dt = a x(t - tau) / (1 + x(t - tau)^10) - b x(t), constant history x0,
    fixed-step RK4 with the delayed value linearly interpolated on the stored
    trajectory.

    Args:
        a (float): Production coefficient
        b (float): Decay coefficient
        tau (float): Delay in time units
        dt (float): Integration step
        n (int): Number of samples returned
        x0 (float): Initial (and history) value
        washout (int): Leading samples discarded
        sample_every (int): Integration steps between returned samples

    Returns:
        numpy.ndarray: n samples spaced sample_every * dt time units apart

    Raises:
        InvalidInputError: On invalid step, delay or counts
        NumericBlowupError: If |x| exceeds 1e6
    """
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if tau < 0:
        raise InvalidInputError(f"tau must be non-negative, got {tau}")
    if n < 1 or washout < 0 or sample_every < 1:
        raise InvalidInputError("n must be >= 1, washout >= 0 and sample_every >= 1")

    total_samples = n + washout
    steps = (total_samples - 1) * sample_every
    trajectory = np.empty(steps + 1)
    trajectory[0] = x0

    def delayed(t_index, offset, stage_value):
        # value of x at time (t_index + offset) * dt - tau
        if tau == 0:
            return stage_value
        position = t_index + offset - tau / dt
        if position <= 0:
            return x0 if position < 0 else trajectory[0]
        lower = int(math.floor(position))
        # for tau < dt the point can lie beyond the computed trajectory
        if lower >= t_index:
            return trajectory[t_index]
        frac = position - lower
        left = trajectory[lower]
        return left + frac * (trajectory[lower + 1] - left)

    for i in range(steps):
        x = trajectory[i]
        k1 = _mackey_glass_rate(a, b, x, delayed(i, 0.0, x))
        mid1 = x + 0.5 * dt * k1
        k2 = _mackey_glass_rate(a, b, mid1, delayed(i, 0.5, mid1))
        mid2 = x + 0.5 * dt * k2
        k3 = _mackey_glass_rate(a, b, mid2, delayed(i, 0.5, mid2))
        end = x + dt * k3
        k4 = _mackey_glass_rate(a, b, end, delayed(i, 1.0, end))
        nxt = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(nxt) or abs(nxt) > BLOWUP_LIMIT:
            raise NumericBlowupError(f"Mackey-Glass trajectory diverged at step {i + 1}")
        trajectory[i + 1] = nxt

    samples = trajectory[::sample_every]
    return samples[washout:washout + n].copy()


def embed_series(series, lags=DEFAULT_LAGS, horizon=DEFAULT_HORIZON, name="series"):
    """
    Delay-embed a scalar series into a supervised dataset.

    Row k has inputs x[k + L - lag_j] (L = max lag) and target x[k + L + horizon].

    Args:
        series: Real sequence
        lags (sequence): Non-negative offsets
        horizon (int): Positive prediction offset
        name (str): Dataset label

    Returns:
        Dataset: length - max(lags) - horizon rows

    Raises:
        InvalidInputError: If the series is too short or offsets are invalid
    """
    x = np.asarray(series, dtype=np.float64).reshape(-1)
    lags = tuple(int(lag) for lag in lags)
    if not lags or any(lag < 0 for lag in lags):
        raise InvalidInputError(f"lags must be a non-empty list of non-negative offsets, got {lags}")
    if horizon < 1:
        raise InvalidInputError(f"horizon must be positive, got {horizon}")
    span = max(lags)
    if span + horizon >= x.size:
        raise InvalidInputError(
            f"series of length {x.size} is too short for max lag {span} and horizon {horizon}")

    n_rows = x.size - span - horizon
    base = np.arange(n_rows) + span
    inputs = np.column_stack([x[base - lag] for lag in lags])
    targets = x[base + horizon].reshape(-1, 1)
    return Dataset(inputs, targets, name)


def load_csv(path, has_header=False, target_cols=1, name=None):
    """
    Read a numeric CSV file; the last target_cols columns become targets.

    Args:
        path: File path
        has_header (bool): Skip the first row
        target_cols (int): Number of trailing target columns
        name (str): Dataset label (defaults to the file name)

    Returns:
        Dataset: Parsed dataset

    Raises:
        ParseError: For empty files, ragged rows or non-numeric cells
    """
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        for row_number, row in enumerate(reader, start=1):
            if has_header and row_number == 1:
                continue
            if not row:
                continue
            if width is None:
                width = len(row)
                if width <= target_cols:
                    raise ParseError(
                        f"need more than {target_cols} columns, found {width}", row=row_number)
            elif len(row) != width:
                raise ParseError(f"expected {width} columns, found {len(row)}", row=row_number)
            values = []
            for column_number, cell in enumerate(row, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric cell {cell!r}", row=row_number,
                                     column=column_number) from None
                if not math.isfinite(value):
                    raise ParseError(f"non-finite cell {cell!r}", row=row_number, column=column_number)
                values.append(value)
            rows.append(values)

    if not rows:
        raise ParseError(f"{path} contains no data rows")
    data = np.array(rows, dtype=np.float64)
    return Dataset(data[:, :-target_cols], data[:, -target_cols:], name or str(path))


def write_csv(path, columns: Sequence[np.ndarray], header: Sequence[str] = None):
    """
    Write equally long columns as CSV using repr() so values read back bit-exactly.
    The file is replaced atomically.

    Args:
        path: Destination file
        columns: Column arrays (1-D) or matrices (each column written in order)
        header: Optional column names
    """
    blocks = [np.asarray(c, dtype=np.float64).reshape(len(c), -1) for c in columns]
    table = np.hstack(blocks) if blocks else np.zeros((0, 0))
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in table:
        writer.writerow([repr(float(v)) for v in row])
    atomic_write_text(path, buffer.getvalue())


def split(ds: Dataset, spec: SplitSpec):
    """
    Partition a dataset into train / validation / test sets.

    Validation and test sizes are floor(n * fraction); the remainder goes to train.
    Without shuffling the original row order is kept (train first, test last).

    Returns:
        tuple: (train, valid, test) datasets; an empty partition is returned as None

    Raises:
        InvalidSplitError: If n < 3 or a non-zero fraction maps to zero rows
    """
    n = ds.n_rows
    if n < 3:
        raise InvalidSplitError(f"need at least 3 rows to split, got {n}")

    n_valid = int(math.floor(n * spec.valid_fraction + 1e-9))
    n_test = int(math.floor(n * spec.test_fraction + 1e-9))
    n_train = n - n_valid - n_test
    for label, fraction, size in (("train", spec.train_fraction, n_train),
                                  ("valid", spec.valid_fraction, n_valid),
                                  ("test", spec.test_fraction, n_test)):
        if fraction > 0 and size == 0:
            raise InvalidSplitError(f"{label} fraction {fraction} maps to zero of {n} rows")

    order = np.arange(n)
    if spec.shuffle:
        order = RngStream.derive(spec.seed, "split").generator().permutation(n)

    parts = []
    start = 0
    for label, size in (("train", n_train), ("valid", n_valid), ("test", n_test)):
        rows = order[start:start + size]
        start += size
        parts.append(ds.take(rows, f"{ds.name}:{label}") if size > 0 else None)
    return tuple(parts)


@dataclass(frozen=True)
class MinMaxScaling:
    """Per-column (min, max) record produced by normalize_minmax."""

    input_min: np.ndarray
    input_max: np.ndarray
    target_min: np.ndarray
    target_max: np.ndarray

    @staticmethod
    def _forward(values, low, high):
        span = high - low
        scaled = np.where(span > 0, (values - low) / np.where(span > 0, span, 1.0), 0.5)
        return scaled

    @staticmethod
    def _inverse(values, low, high):
        return low + values * (high - low)

    def transform(self, ds: Dataset):
        """Map a dataset into the unit box using the stored parameters."""
        return Dataset(self._forward(ds.inputs, self.input_min, self.input_max),
                       self._forward(ds.targets, self.target_min, self.target_max), ds.name)

    def inverse(self, ds: Dataset):
        """Undo transform()."""
        return Dataset(self._inverse(ds.inputs, self.input_min, self.input_max),
                       self._inverse(ds.targets, self.target_min, self.target_max), ds.name)

    def inverse_targets(self, targets):
        """Map normalised target values back to the original scale."""
        return self._inverse(np.asarray(targets, dtype=np.float64), self.target_min, self.target_max)

    def to_dict(self):
        return {key: getattr(self, key).tolist()
                for key in ("input_min", "input_max", "target_min", "target_max")}


def normalize_minmax(ds: Dataset):
    """
    Map every input and target column affinely onto [0, 1].

    Constant columns map to 0.5.

    Returns:
        tuple: (normalised Dataset, MinMaxScaling for the inverse mapping)
    """
    scaling = MinMaxScaling(ds.inputs.min(axis=0), ds.inputs.max(axis=0),
                            ds.targets.min(axis=0), ds.targets.max(axis=0))
    return scaling.transform(ds), scaling


def rmse(predicted, targets):
    """
    Root mean squared error sqrt(sum ||y_i - t_i||^2 / (n m)).

    Raises:
        InvalidInputError: If the shapes differ
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predicted.shape != targets.shape:
        raise InvalidInputError(f"shape mismatch: predicted {predicted.shape} vs targets {targets.shape}")
    if predicted.size == 0:
        raise InvalidInputError("rmse of an empty set is undefined")
    return float(np.sqrt(np.sum((predicted - targets) ** 2) / predicted.size))
