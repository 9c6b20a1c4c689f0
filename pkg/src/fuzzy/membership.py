#!/usr/bin/env python3
"""
Membership functions and fuzzy operators for HybridCI
Triangular, trapezoidal, gaussian and logistic membership functions evaluated
through scikit-fuzzy, with analytic parameter derivatives for neuro-fuzzy
learning, plus the T-norm / T-conorm pairs and defuzzifier choices.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
import skfuzzy

from src.core.errors import InvalidInputError

logger = logging.getLogger(__name__)

MIN_SIGMA = 1e-6


class MFKind(Enum):
    TRIANGULAR = "triangular"
    TRAPEZOIDAL = "trapezoidal"
    GAUSSIAN = "gaussian"
    LOGISTIC = "logistic"


PARAM_COUNT = {
    MFKind.TRIANGULAR: 3,
    MFKind.TRAPEZOIDAL: 4,
    MFKind.GAUSSIAN: 2,
    MFKind.LOGISTIC: 2,
}


@dataclass(frozen=True)
class MembershipFn:
    """
    A parameterised membership function.

    Params by kind: triangular (a, b, c), trapezoidal (a, b, c, d),
    gaussian (center, sigma), logistic (center, slope).
    """

    kind: MFKind
    params: Tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        kind = MFKind(self.kind)
        params = tuple(float(p) for p in self.params)
        if len(params) != PARAM_COUNT[kind]:
            raise InvalidInputError(f"{kind.value} membership needs {PARAM_COUNT[kind]} parameters, got {len(params)}")
        if not all(np.isfinite(params)):
            raise InvalidInputError(f"membership parameters must be finite, got {params}")
        if kind in (MFKind.TRIANGULAR, MFKind.TRAPEZOIDAL) and list(params) != sorted(params):
            raise InvalidInputError(f"{kind.value} parameters must be non-decreasing, got {params}")
        if kind is MFKind.GAUSSIAN and params[1] <= 0:
            raise InvalidInputError(f"gaussian sigma must be positive, got {params[1]}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)

    @classmethod
    def triangular(cls, a, b, c, label=""):
        return cls(MFKind.TRIANGULAR, (a, b, c), label)

    @classmethod
    def trapezoidal(cls, a, b, c, d, label=""):
        return cls(MFKind.TRAPEZOIDAL, (a, b, c, d), label)

    @classmethod
    def gaussian(cls, center, sigma, label=""):
        return cls(MFKind.GAUSSIAN, (center, sigma), label)

    @classmethod
    def logistic(cls, center, slope, label=""):
        return cls(MFKind.LOGISTIC, (center, slope), label)

    @property
    def center(self):
        """Point of full (or half, for logistic) membership."""
        p = self.params
        if self.kind is MFKind.TRIANGULAR:
            return p[1]
        if self.kind is MFKind.TRAPEZOIDAL:
            return 0.5 * (p[1] + p[2])
        return p[0]

    def evaluate(self, x):
        """Membership degrees for an array of crisp values."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        p = self.params
        if self.kind is MFKind.TRIANGULAR:
            return skfuzzy.trimf(x, list(p))
        if self.kind is MFKind.TRAPEZOIDAL:
            return skfuzzy.trapmf(x, list(p))
        if self.kind is MFKind.GAUSSIAN:
            return skfuzzy.gaussmf(x, p[0], p[1])
        with np.errstate(over="ignore"):
            return skfuzzy.sigmf(x, p[0], p[1])

    def __call__(self, x):
        return float(self.evaluate(x)[0])

    def param_gradient(self, x):
        """
        Derivative of the membership degree with respect to each parameter.

        Kinks (triangle apex, trapezoid shoulders, support ends) use subgradient 0.

        Returns:
            numpy.ndarray: n x len(params) matrix
        """
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        p = self.params
        grad = np.zeros((x.size, len(p)))
        if self.kind is MFKind.GAUSSIAN:
            mu = self.evaluate(x)
            diff = x - p[0]
            grad[:, 0] = mu * diff / p[1] ** 2
            grad[:, 1] = mu * diff ** 2 / p[1] ** 3
        elif self.kind is MFKind.LOGISTIC:
            mu = self.evaluate(x)
            grad[:, 0] = -p[1] * mu * (1.0 - mu)
            grad[:, 1] = (x - p[0]) * mu * (1.0 - mu)
        else:
            if self.kind is MFKind.TRIANGULAR:
                a, b, c = p
                rise, fall = (0, 1), (1, 2)
                top_left, top_right = b, b
            else:
                a, b, c, d = p
                rise, fall = (0, 1), (2, 3)
                top_left, top_right = b, c
            lo, hi = p[rise[0]], p[rise[1]]
            if hi > lo:
                left = (x > lo) & (x < top_left)
                grad[left, rise[0]] = (x[left] - hi) / (hi - lo) ** 2
                grad[left, rise[1]] = -(x[left] - lo) / (hi - lo) ** 2
            lo, hi = p[fall[0]], p[fall[1]]
            if hi > lo:
                right = (x > top_right) & (x < hi)
                grad[right, fall[0]] = (hi - x[right]) / (hi - lo) ** 2
                grad[right, fall[1]] = (x[right] - lo) / (hi - lo) ** 2
        return grad

    def with_params(self, params):
        """
        Rebuild with new parameters, repairing them into a valid shape.

        Triangular / trapezoidal parameters are sorted; gaussian sigma is floored at 1e-6.
        """
        params = [float(v) for v in params]
        if self.kind in (MFKind.TRIANGULAR, MFKind.TRAPEZOIDAL):
            params = sorted(params)
        elif self.kind is MFKind.GAUSSIAN:
            params[1] = max(abs(params[1]), MIN_SIGMA)
        return MembershipFn(self.kind, tuple(params), self.label)

    def to_dict(self):
        return {"kind": self.kind.value, "params": list(self.params), "label": self.label}

    @classmethod
    def from_dict(cls, data):
        return cls(MFKind(data["kind"]), tuple(data["params"]), data.get("label", ""))


def mf_eval(mf: MembershipFn, x):
    """Membership degree of a single crisp value, in [0, 1]."""
    return mf(x)


class TNorm(Enum):
    """Fuzzy intersection."""

    MIN = "min"
    PRODUCT = "product"

    def apply(self, a, b):
        return np.minimum(a, b) if self is TNorm.MIN else np.multiply(a, b)

    def reduce(self, values, axis=-1):
        return np.min(values, axis=axis) if self is TNorm.MIN else np.prod(values, axis=axis)


class TConorm(Enum):
    """Fuzzy union."""

    MAX = "max"
    PROB_SUM = "probabilistic_sum"

    def apply(self, a, b):
        return np.maximum(a, b) if self is TConorm.MAX else a + b - a * b

    def reduce(self, values, axis=-1):
        if self is TConorm.MAX:
            return np.max(values, axis=axis)
        return 1.0 - np.prod(1.0 - values, axis=axis)


class Defuzz(Enum):
    CENTROID = "centroid"
    MOM = "mean_of_maxima"


def tnorm(kind: TNorm, a, b):
    return float(TNorm(kind).apply(a, b))


def tconorm(kind: TConorm, a, b):
    return float(TConorm(kind).apply(a, b))
