#!/usr/bin/env python3
"""
Numeric substrate for HybridCI
Dense matrices, regularised least squares, a central-difference gradient oracle
and counter-based random streams.

All reals are float64. A "Matrix" is a two dimensional, read-only numpy array;
functions in the toolkit never modify their array arguments in place.
"""

import hashlib
import logging
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Union

import numpy as np
from scipy import linalg

from src.core.errors import InvalidInputError, NumericBlowupError

logger = logging.getLogger(__name__)

Matrix = np.ndarray

FALLBACK_RIDGE = 1e-10
_MASK64 = (1 << 64) - 1


def as_matrix(data, rows=None, cols=None, name="matrix"):
    """
    Convert data into a validated, read-only float64 matrix.

    Args:
        data: Nested sequence or array
        rows (int): Expected row count (optional)
        cols (int): Expected column count (optional)
        name (str): Name used in error messages

    Returns:
        numpy.ndarray: Two dimensional read-only float64 array

    Raises:
        InvalidInputError: If the shape is wrong or an entry is not finite
    """
    matrix = np.array(data, dtype=np.float64)
    if matrix.ndim == 1 and cols is not None and rows is not None:
        matrix = matrix.reshape(rows, cols)
    if matrix.ndim != 2:
        raise InvalidInputError(f"{name} must be two dimensional, got {matrix.ndim} dimensions")
    if rows is not None and matrix.shape[0] != rows:
        raise InvalidInputError(f"{name} has {matrix.shape[0]} rows, expected {rows}")
    if cols is not None and matrix.shape[1] != cols:
        raise InvalidInputError(f"{name} has {matrix.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(matrix)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    matrix.setflags(write=False)
    return matrix


def as_vector(data, length=None, name="vector"):
    """Convert data into a finite one dimensional float64 array."""
    vector = np.array(data, dtype=np.float64).reshape(-1)
    if length is not None and vector.shape[0] != length:
        raise InvalidInputError(f"{name} has length {vector.shape[0]}, expected {length}")
    if not np.all(np.isfinite(vector)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return vector


class LeastSquaresSolution(NamedTuple):
    """Result of solve_least_squares."""

    x: np.ndarray
    ridge: float
    rank_deficient: bool


def _qr_solve(A, b, ridge):
    """Solve min ||Ax - b||^2 + ridge ||x||^2 via pivoted QR; returns (x, rank)."""
    n_cols = A.shape[1]
    if ridge > 0:
        A = np.vstack([A, np.sqrt(ridge) * np.eye(n_cols)])
        b = np.concatenate([b, np.zeros(n_cols)])
    if A.shape[0] < n_cols:
        return None, A.shape[0]

    Q, R, perm = linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(A.shape) * np.finfo(np.float64).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < n_cols:
        return None, rank

    z = linalg.solve_triangular(R, Q.T @ b, lower=False)
    x = np.empty(n_cols)
    x[perm] = z
    return x, rank


def solve_least_squares(A, b, ridge=0.0):
    """
    Solve the (optionally ridge regularised) linear least-squares problem.

    Minimises ||Ax - b||^2 + ridge * ||x||^2 using an orthogonal factorisation of
    the augmented system. A rank-deficient system with ridge = 0 is re-solved with
    ridge = 1e-10 and the result is flagged.

    Args:
        A (Matrix): Design matrix (rows x cols)
        b: Right-hand side, length rows
        ridge (float): Non-negative Tikhonov weight

    Returns:
        LeastSquaresSolution: Solution vector, ridge actually used, rank flag

    Raises:
        InvalidInputError: On non-finite input, mismatched shapes or negative ridge
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if A.ndim != 2:
        raise InvalidInputError("least squares design matrix must be two dimensional")
    if A.shape[0] != b.shape[0]:
        raise InvalidInputError(f"design matrix has {A.shape[0]} rows but b has length {b.shape[0]}")
    if not (np.isfinite(ridge) and ridge >= 0):
        raise InvalidInputError(f"ridge must be a non-negative real, got {ridge}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise InvalidInputError("least squares input contains non-finite entries")

    x, rank = _qr_solve(A, b, ridge)
    if x is not None:
        return LeastSquaresSolution(x, float(ridge), False)

    used = max(float(ridge), FALLBACK_RIDGE)
    logger.warning("Rank-deficient least squares (rank %d of %d); retrying with ridge %.1e",
                   rank, A.shape[1], used)
    x, _ = _qr_solve(A, b, used)
    if x is None:
        # badly scaled columns can still trip the rank test at ridge 1e-10
        augmented = np.vstack([A, np.sqrt(used) * np.eye(A.shape[1])])
        rhs = np.concatenate([b, np.zeros(A.shape[1])])
        x = np.linalg.lstsq(augmented, rhs, rcond=None)[0]
    return LeastSquaresSolution(x, used, True)


def finite_diff_gradient(f: Callable[[np.ndarray], float], x, h=1e-6):
    """
    Central-difference gradient of a scalar function.

    Args:
        f (callable): Function of a real vector returning a real
        x: Point at which to differentiate
        h (float): Positive step

    Returns:
        numpy.ndarray: (f(x + h e_i) - f(x - h e_i)) / (2h) for every coordinate

    Raises:
        InvalidInputError: If h is not positive
        NumericBlowupError: If any evaluation of f is not finite
    """
    if not h > 0:
        raise InvalidInputError(f"finite-difference step must be positive, got {h}")
    x = np.array(x, dtype=np.float64).reshape(-1)
    grad = np.zeros_like(x)
    for i in range(x.size):
        forward = x.copy()
        backward = x.copy()
        forward[i] += h
        backward[i] -= h
        f_plus = float(f(forward))
        f_minus = float(f(backward))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericBlowupError(f"non-finite function value while differentiating coordinate {i}")
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def stream_id_for(*parts):
    """
    Derive a 64-bit stream identifier from labels such as (purpose, generation, index).

    Returns:
        int: Stable 64-bit identifier
    """
    digest = hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass(frozen=True)
class Uniform01:
    """Uniform distribution on [0, 1)."""


@dataclass(frozen=True)
class Gaussian:
    """Normal distribution with the given mean and standard deviation."""

    mean: float = 0.0
    sd: float = 1.0


UNIFORM01 = Uniform01()
Distribution = Union[Uniform01, Gaussian]


@dataclass(frozen=True)
class RngStream:
    """
    Counter-based random stream keyed by (seed, stream_id).

    The stream is a value: drawing returns the next stream state instead of
    mutating this one. Draw n always comes from Philox block (key, n), so two
    streams with the same key produce identical sequences regardless of which
    thread advances them.
    """

    seed: int
    stream_id: int = 0
    counter: int = 0

    @property
    def key(self):
        return ((self.seed & _MASK64) << 64) | (self.stream_id & _MASK64)

    @classmethod
    def derive(cls, seed, *parts):
        """Create the stream for a purpose label, e.g. derive(seed, "mutate", gen, index)."""
        return cls(seed=seed & _MASK64, stream_id=stream_id_for(*parts))

    def generator(self):
        """
        Numpy Generator positioned at this stream's counter.

        Bulk operators (mutation, shuffling) draw from it; identical streams give
        identical generators.
        """
        return np.random.Generator(np.random.Philox(key=self.key, counter=self.counter << 64))

    def advance(self, steps=1):
        """Return the stream advanced by the given number of draws."""
        return replace(self, counter=self.counter + steps)


def rng_draw(stream: RngStream, kind: Distribution = UNIFORM01):
    """
    Draw the next value of a stream.

    Args:
        stream (RngStream): Current stream state
        kind: UNIFORM01 or Gaussian(mean, sd)

    Returns:
        tuple: (value, next stream state)
    """
    if isinstance(kind, Gaussian):
        if kind.sd < 0:
            raise InvalidInputError(f"gaussian sd must be non-negative, got {kind.sd}")
        if kind.sd == 0:
            return float(kind.mean), stream.advance()
        value = float(stream.generator().normal(kind.mean, kind.sd))
    else:
        value = float(stream.generator().random())
    return value, stream.advance()
