#!/usr/bin/env python3
"""
Fuzzy associative memories for HybridCI
Each rule is stored as its own max-min correlation matrix per input; recall
composes a key with every matrix, aggregates rule outputs by max and
defuzzifies the result by centroid.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.core.errors import InvalidInputError
from src.fuzzy.inference import FuzzyRule, FuzzyVariable

logger = logging.getLogger(__name__)

MIN_GRID = 8


@dataclass(frozen=True)
class FAMStore:
    """
    Stored rule associations.

    Attributes:
        input_grids (tuple): Discretisation of every input universe
        output_grid (numpy.ndarray): Discretisation of the output universe
        matrices (tuple): Per rule, one (input grid x output grid) matrix per input
    """

    input_grids: Tuple[np.ndarray, ...]
    output_grid: np.ndarray
    matrices: Tuple[Tuple[np.ndarray, ...], ...]

    @property
    def n_rules(self):
        return len(self.matrices)

    @property
    def output_midpoint(self):
        return 0.5 * (self.output_grid[0] + self.output_grid[-1])


@dataclass(frozen=True)
class FAMRecall:
    """Recalled output fuzzy set, its centroid and the zero-activation flag."""

    fuzzy_output: np.ndarray
    value: float
    zero_activation: bool


def _grid(variable: FuzzyVariable, points):
    if points < MIN_GRID:
        raise InvalidInputError(f"FAM grids need at least {MIN_GRID} points, got {points}")
    lo, hi = variable.universe
    return np.linspace(lo, hi, int(points))


def fam_store(rules: Sequence[FuzzyRule], input_vars: Sequence[FuzzyVariable], output_var: FuzzyVariable,
              grids=33):
    """
    Encode every rule A_1 .. A_d -> B as matrices M_j = min(mu_Aj(grid_j), mu_B(grid_out)^T).

    Args:
        rules: Rules with output term indices as consequents ("any" antecedents store all-ones keys)
        input_vars: Antecedent variables
        output_var: Consequent variable
        grids: Points per grid, either one count for all or (input counts..., output count)

    Raises:
        InvalidInputError: On grids below 8 points or rules that do not fit the variables
    """
    input_vars = tuple(input_vars)
    counts = [grids] * (len(input_vars) + 1) if np.isscalar(grids) else list(grids)
    if len(counts) != len(input_vars) + 1:
        raise InvalidInputError(f"expected {len(input_vars) + 1} grid sizes, got {len(counts)}")
    input_grids = tuple(_grid(v, n) for v, n in zip(input_vars, counts))
    output_grid = _grid(output_var, counts[-1])

    matrices = []
    for number, rule in enumerate(rules, start=1):
        if len(rule.antecedent) != len(input_vars) or not isinstance(rule.consequent, int):
            raise InvalidInputError(f"rule {number} does not match the FAM variables")
        consequent = output_var.terms[rule.consequent].evaluate(output_grid)
        per_input = []
        for variable, term, grid in zip(input_vars, rule.antecedent, input_grids):
            antecedent = np.ones(grid.size) if term is None else variable.terms[term].evaluate(grid)
            per_input.append(np.minimum(antecedent[:, None], consequent[None, :]))
        matrices.append(tuple(per_input))
    return FAMStore(input_grids, output_grid, tuple(matrices))


def singleton_keys(store: FAMStore, x):
    """Fuzzify a crisp input as singletons on the nearest grid point of each input."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != len(store.input_grids):
        raise InvalidInputError(f"input has length {x.size}, FAM expects {len(store.input_grids)}")
    keys = []
    for value, grid in zip(x, store.input_grids):
        key = np.zeros(grid.size)
        key[int(np.argmin(np.abs(grid - value)))] = 1.0
        keys.append(key)
    return keys


def fam_recall_key(store: FAMStore, keys):
    """
    Recall with fuzzy keys, one membership vector per input grid.

    Rule output = min over inputs of the max-min composition key_j o M_j;
    rule outputs are aggregated by max and defuzzified by centroid.
    """
    keys = [np.asarray(k, dtype=np.float64) for k in keys]
    aggregate = np.zeros(store.output_grid.size)
    for per_input in store.matrices:
        recalled = [np.max(np.minimum(key[:, None], matrix), axis=0) for key, matrix in zip(keys, per_input)]
        aggregate = np.maximum(aggregate, np.min(recalled, axis=0))

    mass = aggregate.sum()
    if mass <= 0:
        logger.debug("FAM recall produced an empty fuzzy set")
        return FAMRecall(aggregate, float(store.output_midpoint), True)
    return FAMRecall(aggregate, float(aggregate @ store.output_grid / mass), False)


def fam_recall(store: FAMStore, x):
    """Crisp recall: singleton keys at x, then centroid of the recalled fuzzy set."""
    return fam_recall_key(store, singleton_keys(store, x)).value
