#!/usr/bin/env python3
"""
Fuzzy inference systems for HybridCI
Linguistic variables, rules, grid partitioning, firing strengths and the
Mamdani and Takagi-Sugeno inference paths.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from itertools import product
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.config.settings import toolkit_settings
from src.core.errors import InvalidInputError
from src.core.numeric import RngStream
from src.fuzzy.membership import Defuzz, MembershipFn, MFKind, TConorm, TNorm

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 16
ROW_BLOCK = 64

TERM_LABELS = {
    2: ("low", "high"),
    3: ("small", "medium", "large"),
    5: ("very_small", "small", "medium", "large", "very_large"),
}


class SystemKind(Enum):
    MAMDANI = "mamdani"
    TAKAGI_SUGENO = "takagi_sugeno"


@dataclass(frozen=True)
class FuzzyVariable:
    """A linguistic variable: a universe of discourse and its ordered terms."""

    name: str
    universe: Tuple[float, float]
    terms: Tuple[MembershipFn, ...]

    def __post_init__(self):
        lo, hi = (float(v) for v in self.universe)
        if not lo < hi:
            raise InvalidInputError(f"variable {self.name}: universe min must be below max, got {self.universe}")
        terms = tuple(self.terms)
        if not terms:
            raise InvalidInputError(f"variable {self.name} needs at least one term")
        labels = [t.label for t in terms]
        if len(set(labels)) != len(labels):
            raise InvalidInputError(f"variable {self.name} has duplicate term labels {labels}")
        object.__setattr__(self, "universe", (lo, hi))
        object.__setattr__(self, "terms", terms)

    @property
    def midpoint(self):
        return 0.5 * (self.universe[0] + self.universe[1])

    def memberships(self, x):
        """n x terms matrix of membership degrees."""
        return np.column_stack([term.evaluate(x) for term in self.terms])

    def term_index(self, label):
        for index, term in enumerate(self.terms):
            if term.label == label:
                return index
        raise InvalidInputError(f"variable {self.name} has no term {label!r}")


def term_labels(n_terms):
    return TERM_LABELS.get(n_terms, tuple(f"t{i + 1}" for i in range(n_terms)))


def uniform_variable(name, universe, n_terms, shape=MFKind.TRIANGULAR):
    """
    Variable with n_terms evenly spaced terms overlapping by 50%.

    Triangles have apexes on the grid and feet on the neighbouring apexes, so
    they sum to 1 everywhere on the universe. Gaussian terms use sigma = spacing / 2.
    """
    if n_terms < 2:
        raise InvalidInputError(f"need at least 2 terms per variable, got {n_terms}")
    lo, hi = (float(v) for v in universe)
    spacing = (hi - lo) / (n_terms - 1)
    terms = []
    for index, label in enumerate(term_labels(n_terms)):
        apex = lo + index * spacing
        if MFKind(shape) is MFKind.GAUSSIAN:
            terms.append(MembershipFn.gaussian(apex, spacing / 2.0, label))
        else:
            terms.append(MembershipFn.triangular(apex - spacing, apex, apex + spacing, label))
    return FuzzyVariable(name, (lo, hi), tuple(terms))


Consequent = Union[int, Tuple[float, ...]]


@dataclass(frozen=True)
class FuzzyRule:
    """
    IF input_1 is A_1 AND ... THEN consequent.

    Attributes:
        antecedent (tuple): Term index per input, None meaning "any"
        consequent: Output term index (Mamdani) or coefficients (p_1..p_d, r) (Takagi-Sugeno)
        weight (float): Rule weight in [0, 1], multiplies the firing strength
    """

    antecedent: Tuple[Optional[int], ...]
    consequent: Consequent
    weight: float = 1.0

    def __post_init__(self):
        antecedent = tuple(None if a is None else int(a) for a in self.antecedent)
        if isinstance(self.consequent, (int, np.integer)):
            consequent = int(self.consequent)
        else:
            consequent = tuple(float(c) for c in self.consequent)
        if not 0.0 <= self.weight <= 1.0:
            raise InvalidInputError(f"rule weight must be in [0, 1], got {self.weight}")
        object.__setattr__(self, "antecedent", antecedent)
        object.__setattr__(self, "consequent", consequent)
        object.__setattr__(self, "weight", float(self.weight))


@dataclass(frozen=True)
class FuzzySystem:
    """Complete fuzzy inference system: variables, rule base and operator choices."""

    kind: SystemKind
    inputs: Tuple[FuzzyVariable, ...]
    rules: Tuple[FuzzyRule, ...]
    output: Optional[FuzzyVariable] = None
    tnorm: TNorm = TNorm.PRODUCT
    tconorm: TConorm = TConorm.MAX
    defuzz: Defuzz = Defuzz.CENTROID

    def __post_init__(self):
        kind = SystemKind(self.kind)
        inputs = tuple(self.inputs)
        rules = tuple(self.rules)
        if not inputs:
            raise InvalidInputError("a fuzzy system needs at least one input variable")
        if not rules:
            raise InvalidInputError("a fuzzy system needs at least one rule")
        if kind is SystemKind.MAMDANI and self.output is None:
            raise InvalidInputError("a Mamdani system needs an output variable")
        for number, rule in enumerate(rules, start=1):
            if len(rule.antecedent) != len(inputs):
                raise InvalidInputError(f"rule {number} has {len(rule.antecedent)} antecedents for {len(inputs)} inputs")
            for variable, term in zip(inputs, rule.antecedent):
                if term is not None and not 0 <= term < len(variable.terms):
                    raise InvalidInputError(f"rule {number} refers to missing term {term} of {variable.name}")
            if kind is SystemKind.MAMDANI:
                if not isinstance(rule.consequent, int) or not 0 <= rule.consequent < len(self.output.terms):
                    raise InvalidInputError(f"rule {number} needs an output term index")
            elif isinstance(rule.consequent, int) or len(rule.consequent) != len(inputs) + 1:
                raise InvalidInputError(f"rule {number} needs {len(inputs) + 1} linear coefficients")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "rules", rules)
        object.__setattr__(self, "tnorm", TNorm(self.tnorm))
        object.__setattr__(self, "tconorm", TConorm(self.tconorm))
        object.__setattr__(self, "defuzz", Defuzz(self.defuzz))

    @property
    def n_inputs(self):
        return len(self.inputs)

    @property
    def parameter_count(self):
        count = sum(len(t.params) for v in self.inputs for t in v.terms)
        if self.kind is SystemKind.MAMDANI:
            count += sum(len(t.params) for t in self.output.terms)
        else:
            count += len(self.rules) * (self.n_inputs + 1)
        return count

    def antecedent_index_matrix(self):
        """rules x inputs term indices, -1 for "any"."""
        return np.array([[-1 if a is None else a for a in rule.antecedent] for rule in self.rules], dtype=int)

    def consequent_matrix(self):
        """Takagi-Sugeno coefficients, rules x (inputs + 1)."""
        return np.array([rule.consequent for rule in self.rules], dtype=np.float64)

    def with_consequents(self, coefficients):
        coefficients = np.asarray(coefficients, dtype=np.float64).reshape(len(self.rules), -1)
        rules = tuple(replace(rule, consequent=tuple(row)) for rule, row in zip(self.rules, coefficients))
        return replace(self, rules=rules)


def grid_cells(n_inputs, terms_per_var):
    """Term index tuples of every grid cell, first input varying fastest."""
    return [tuple(reversed(cell)) for cell in product(range(terms_per_var), repeat=n_inputs)]


def grid_partition(input_vars: Sequence[FuzzyVariable], terms_per_var, kind: SystemKind, rng: RngStream,
                   output: Optional[FuzzyVariable] = None, shape=MFKind.TRIANGULAR,
                   tnorm=TNorm.PRODUCT, tconorm=TConorm.MAX, defuzz=Defuzz.CENTROID):
    """
    Build a grid-partitioned rule base: one rule per cell of the input term grid.

    Cells are enumerated with the first input varying fastest. Takagi-Sugeno
    consequents start at zero; Mamdani consequents are drawn uniformly from the
    output terms using rng.

    Args:
        input_vars: Variables supplying names and universes (their terms are replaced)
        terms_per_var (int): Terms per input (>= 2)
        kind (SystemKind): Mamdani or Takagi-Sugeno
        rng (RngStream): Stream for Mamdani consequent draws
        output (FuzzyVariable): Mamdani output; defaults to terms_per_var terms on [0, 1]

    Raises:
        InvalidInputError: If terms_per_var < 2
    """
    if terms_per_var < 2:
        raise InvalidInputError(f"terms_per_var must be at least 2, got {terms_per_var}")
    kind = SystemKind(kind)
    inputs = tuple(uniform_variable(v.name, v.universe, terms_per_var, shape) for v in input_vars)
    cells = grid_cells(len(inputs), terms_per_var)

    if kind is SystemKind.MAMDANI:
        if output is None:
            output = uniform_variable("output", (0.0, 1.0), terms_per_var, shape)
        draws = rng.generator().integers(0, len(output.terms), size=len(cells))
        rules = tuple(FuzzyRule(cell, int(term)) for cell, term in zip(cells, draws))
    else:
        output = None
        zeros = (0.0,) * (len(inputs) + 1)
        rules = tuple(FuzzyRule(cell, zeros) for cell in cells)
    return FuzzySystem(kind, inputs, rules, output, tnorm, tconorm, defuzz)


def _as_batch(fs: FuzzySystem, inputs):
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 1:
        inputs = inputs.reshape(1, -1)
    if inputs.ndim != 2 or inputs.shape[1] != fs.n_inputs:
        raise InvalidInputError(f"inputs must have {fs.n_inputs} columns, got shape {inputs.shape}")
    return inputs


def antecedent_memberships(fs: FuzzySystem, inputs):
    """
    Membership of every input in every rule's antecedent term.

    Returns:
        numpy.ndarray: n x rules x inputs, 1 where the rule says "any"
    """
    inputs = _as_batch(fs, inputs)
    index = fs.antecedent_index_matrix()
    columns = []
    for j, variable in enumerate(fs.inputs):
        table = np.hstack([variable.memberships(inputs[:, j]), np.ones((inputs.shape[0], 1))])
        columns.append(table[:, index[:, j]])
    return np.stack(columns, axis=2)


def firing_matrix(fs: FuzzySystem, inputs):
    """Rule firing strengths for a batch of inputs, n x rules."""
    weights = np.array([rule.weight for rule in fs.rules])
    return fs.tnorm.reduce(antecedent_memberships(fs, inputs), axis=2) * weights


def firing_strengths(fs: FuzzySystem, x):
    """Firing strength of every rule for one input vector."""
    return firing_matrix(fs, x)[0]


def normalize_firing(w):
    """
    Normalise firing strengths to sum to 1.

    Returns:
        tuple: (normalised weights, zero_activation flag); all-zero input gives uniform weights
    """
    w = np.asarray(w, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        return np.full(w.shape, 1.0 / w.size), True
    return w / total, False


def normalize_firing_matrix(firing):
    """Row-wise normalize_firing; returns (n x rules weights, per-row zero flags)."""
    totals = firing.sum(axis=1, keepdims=True)
    zero = totals[:, 0] <= 0
    safe = np.where(totals > 0, totals, 1.0)
    normalized = np.where(totals > 0, firing / safe, 1.0 / firing.shape[1])
    return normalized, zero


def rule_outputs_ts(fs: FuzzySystem, inputs):
    """Linear consequent value of every rule, n x rules."""
    inputs = _as_batch(fs, inputs)
    augmented = np.hstack([inputs, np.ones((inputs.shape[0], 1))])
    return augmented @ fs.consequent_matrix().T


def predict_ts(fs: FuzzySystem, inputs):
    """Takagi-Sugeno outputs for a batch; returns (values, zero-activation flags)."""
    normalized, zero = normalize_firing_matrix(firing_matrix(fs, inputs))
    return np.sum(normalized * rule_outputs_ts(fs, inputs), axis=1), zero


def evaluate_ts(fs: FuzzySystem, x):
    """Takagi-Sugeno output for one input and its zero-activation flag."""
    if fs.kind is not SystemKind.TAKAGI_SUGENO:
        raise InvalidInputError("infer_ts needs a Takagi-Sugeno system")
    values, zero = predict_ts(fs, x)
    return float(values[0]), bool(zero[0])


def infer_ts(fs: FuzzySystem, x):
    """Weighted average of the rules' linear consequents."""
    return evaluate_ts(fs, x)[0]


def output_grid(fs: FuzzySystem, resolution):
    lo, hi = fs.output.universe
    return np.linspace(lo, hi, resolution)


def _defuzzify(aggregate, grid, method: Defuzz):
    """Row-wise defuzzification of n x grid aggregates; all-zero rows give the midpoint."""
    heights = aggregate.max(axis=1)
    zero = heights <= 0
    midpoint = 0.5 * (grid[0] + grid[-1])
    if method is Defuzz.CENTROID:
        mass = aggregate.sum(axis=1)
        values = (aggregate @ grid) / np.where(zero, 1.0, mass)
    else:
        at_max = aggregate >= (heights[:, None] - 1e-12)
        lows = np.where(at_max, grid, np.inf).min(axis=1)
        highs = np.where(at_max, grid, -np.inf).max(axis=1)
        values = 0.5 * (lows + highs)
    return np.where(zero, midpoint, values), zero


def mamdani_aggregate(fs: FuzzySystem, inputs, resolution):
    """Clipped and aggregated output fuzzy sets on the output grid, n x resolution."""
    grid = output_grid(fs, resolution)
    consequent_sets = np.vstack([fs.output.terms[rule.consequent].evaluate(grid) for rule in fs.rules])
    firing = firing_matrix(fs, inputs)
    blocks = []
    for start in range(0, firing.shape[0], ROW_BLOCK):
        clipped = np.minimum(firing[start:start + ROW_BLOCK, :, None], consequent_sets[None, :, :])
        blocks.append(fs.tconorm.reduce(clipped, axis=1))
    return np.vstack(blocks), grid


def predict_mamdani(fs: FuzzySystem, inputs, resolution=None, defuzz: Defuzz = None):
    """Mamdani outputs for a batch; returns (values, zero-activation flags)."""
    if fs.kind is not SystemKind.MAMDANI:
        raise InvalidInputError("infer_mamdani needs a Mamdani system")
    resolution = toolkit_settings.defuzz_resolution if resolution is None else int(resolution)
    if resolution < MIN_RESOLUTION:
        raise InvalidInputError(f"resolution must be at least {MIN_RESOLUTION}, got {resolution}")
    aggregate, grid = mamdani_aggregate(fs, inputs, resolution)
    return _defuzzify(aggregate, grid, Defuzz(defuzz or fs.defuzz))


def evaluate_mamdani(fs: FuzzySystem, x, resolution=None):
    """Mamdani output for one input and its zero-activation flag."""
    values, zero = predict_mamdani(fs, x, resolution)
    if zero[0]:
        logger.debug("Mamdani aggregate is zero; returning the universe midpoint")
    return float(values[0]), bool(zero[0])


def infer_mamdani(fs: FuzzySystem, x, resolution=None):
    """Clip, aggregate and defuzzify; resolution defaults to the toolkit setting."""
    return evaluate_mamdani(fs, x, resolution)[0]


def predict(fs: FuzzySystem, inputs, resolution=None):
    """Crisp outputs of either kind of system for every row of inputs."""
    if fs.kind is SystemKind.TAKAGI_SUGENO:
        return predict_ts(fs, inputs)[0]
    return predict_mamdani(fs, inputs, resolution)[0]
