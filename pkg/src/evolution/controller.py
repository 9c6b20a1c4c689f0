#!/usr/bin/env python3
"""
Fuzzy controller for evolutionary algorithm parameters
Three Mamdani systems read fitness statistics of the last generation and
propose changes to population size, crossover rate and mutation rate.

Inputs (minimisation):
    avg_over_best   average / best fitness, universe [1, 2]
    worst_over_avg  worst / average fitness, universe [1, 3]
    delta_norm      (best - previous best) / |previous best|, universe [-1, 0]
each with low / medium / high triangles. Outputs live on [-1, 1] with
decrease / keep / increase terms and are scaled by their bandwidths.

Shipped rule base:
    mutation    avg_over_best low -> increase, medium -> keep, high -> decrease
    population  delta low -> decrease; (avg low, delta high) -> increase;
                delta medium, (avg medium, delta high), (avg high, delta high) -> keep
    crossover   worst_over_avg low -> decrease, medium -> keep, high -> increase
"""

import logging
import math
from functools import lru_cache
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from src.core.errors import InvalidInputError
from src.evolution.engine import EAConfig, GenerationStats
from src.fuzzy.inference import FuzzyRule, FuzzySystem, SystemKind, predict_mamdani, uniform_variable
from src.fuzzy.membership import Defuzz, TConorm, TNorm
from src.fuzzy.serialization import system_from_dict, system_to_dict

logger = logging.getLogger(__name__)

POPULATION_BANDWIDTH = 0.2
CROSSOVER_BANDWIDTH = 0.1
MUTATION_BANDWIDTH = 0.05
NEUTRAL_INPUTS = (1.5, 2.0, -0.5)
OUTPUTS = ("population", "crossover", "mutation")

LOW, MEDIUM, HIGH = 0, 1, 2
DECREASE, KEEP, INCREASE = 0, 1, 2


@dataclass(frozen=True)
class ControllerInputs:
    avg_over_best: float
    worst_over_avg: float
    delta_best: float


@dataclass(frozen=True)
class ControllerOutputs:
    """Proposed parameter changes, already clamped to their bandwidths."""

    delta_pop: int = 0
    delta_crossover: float = 0.0
    delta_mutation: float = 0.0


def _input_variables():
    variables = (uniform_variable("avg_over_best", (1.0, 2.0), 3),
                 uniform_variable("worst_over_avg", (1.0, 3.0), 3),
                 uniform_variable("delta_norm", (-1.0, 0.0), 3))
    return tuple(replace(v, terms=tuple(replace(t, label=name) for t, name in zip(v.terms, ("low", "medium", "high"))))
                 for v in variables)


def _output_variable():
    variable = uniform_variable("change", (-1.0, 1.0), 3)
    labels = ("decrease", "keep", "increase")
    return replace(variable, terms=tuple(replace(t, label=name) for t, name in zip(variable.terms, labels)))


def _system(rules):
    return FuzzySystem(SystemKind.MAMDANI, _input_variables(),
                       tuple(FuzzyRule(antecedent, consequent) for antecedent, consequent in rules),
                       _output_variable(), TNorm.MIN, TConorm.MAX, Defuzz.CENTROID)


def default_rule_bases():
    """The shipped controller: one Mamdani system per output."""
    return {
        "population": _system([
            ((None, None, LOW), DECREASE),
            ((LOW, None, HIGH), INCREASE),
            ((None, None, MEDIUM), KEEP),
            ((MEDIUM, None, HIGH), KEEP),
            ((HIGH, None, HIGH), KEEP),
        ]),
        "crossover": _system([
            ((None, LOW, None), DECREASE),
            ((None, MEDIUM, None), KEEP),
            ((None, HIGH, None), INCREASE),
        ]),
        "mutation": _system([
            ((LOW, None, None), INCREASE),
            ((MEDIUM, None, None), KEEP),
            ((HIGH, None, None), DECREASE),
        ]),
    }


def controller_inputs(stats: GenerationStats, prev_best: Optional[float]):
    """
    Crisp controller inputs from generation statistics.

    Degenerate statistics (best <= 0, non-finite values) give the neutral inputs.
    """
    values = (stats.best, stats.average, stats.worst)
    if not all(math.isfinite(v) for v in values) or stats.best <= 0 or stats.average <= 0:
        return ControllerInputs(*NEUTRAL_INPUTS)
    if prev_best is None or not math.isfinite(prev_best) or prev_best == 0:
        delta = NEUTRAL_INPUTS[2]
    else:
        delta = (stats.best - prev_best) / abs(prev_best)
    return ControllerInputs(stats.average / stats.best, stats.worst / stats.average, delta)


class FuzzyController:
    """Maps generation statistics to clamped parameter changes."""

    def __init__(self, rule_bases=None):
        self.rule_bases = dict(default_rule_bases())
        if rule_bases:
            unknown = set(rule_bases) - set(OUTPUTS)
            if unknown:
                raise InvalidInputError(f"unknown controller outputs {sorted(unknown)}")
            self.rule_bases.update(rule_bases)
        for name, system in self.rule_bases.items():
            if system.kind is not SystemKind.MAMDANI or system.n_inputs != 3:
                raise InvalidInputError(f"controller rule base {name} must be a 3-input Mamdani system")

    @classmethod
    def from_dict(cls, data):
        return cls({name: system_from_dict(system) for name, system in data.items()})

    def to_dict(self):
        return {name: system_to_dict(system) for name, system in self.rule_bases.items()}

    def raw_output_matrix(self, inputs):
        """
        Defuzzified outputs for every row of an (n, 3) input matrix.

        Inputs are clipped to each system's universes. Columns follow OUTPUTS.
        """
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        if x.ndim != 2 or x.shape[1] != 3:
            raise InvalidInputError(f"controller inputs need 3 columns, got shape {x.shape}")
        columns = []
        for name in OUTPUTS:
            system = self.rule_bases[name]
            lows = np.array([v.universe[0] for v in system.inputs])
            highs = np.array([v.universe[1] for v in system.inputs])
            values, zero = predict_mamdani(system, np.clip(x, lows, highs))
            if np.any(zero):
                logger.debug("%s rule base fired for no rule on %d inputs", name, int(np.count_nonzero(zero)))
            columns.append(np.clip(values, -1.0, 1.0))
        return np.column_stack(columns)

    def raw_outputs(self, inputs: ControllerInputs):
        """Defuzzified outputs on [-1, 1] before scaling."""
        row = self.raw_output_matrix([[inputs.avg_over_best, inputs.worst_over_avg, inputs.delta_best]])[0]
        return {name: float(value) for name, value in zip(OUTPUTS, row)}

    def step(self, stats: GenerationStats, prev_best: Optional[float]):
        """
        Compute bandwidth-clamped parameter changes for the next generation.

        Returns:
            ControllerOutputs: delta_pop within 20% of the population, crossover
            within 0.1, mutation within 0.05
        """
        inputs = controller_inputs(stats, prev_best)
        outputs = scale_outputs(self.raw_outputs(inputs), stats.population_size)
        logger.debug("Controller inputs %s -> %s", inputs, outputs)
        return outputs


def scale_outputs(raw, population_size):
    """Turn raw outputs on [-1, 1] into changes clamped to their bandwidths."""
    pop_band = math.floor(POPULATION_BANDWIDTH * population_size)
    delta_pop = int(np.clip(round(raw["population"] * POPULATION_BANDWIDTH * population_size), -pop_band, pop_band))
    return ControllerOutputs(
        delta_pop,
        float(np.clip(raw["crossover"] * CROSSOVER_BANDWIDTH, -CROSSOVER_BANDWIDTH, CROSSOVER_BANDWIDTH)),
        float(np.clip(raw["mutation"] * MUTATION_BANDWIDTH, -MUTATION_BANDWIDTH, MUTATION_BANDWIDTH)),
    )


@lru_cache(maxsize=1)
def default_controller():
    return FuzzyController()


def controller_step(stats: GenerationStats, prev_best: Optional[float], controller: FuzzyController = None):
    """Evaluate the (shipped, unless given) controller on one generation's statistics."""
    return (controller or default_controller()).step(stats, prev_best)


def apply_outputs(cfg: EAConfig, out: ControllerOutputs):
    """
    Apply controller changes to a config.

    Population stays within [2 + elitism, ceiling]; rates are clamped to [0, 1].
    """
    ceiling = cfg.population_ceiling
    population = int(np.clip(cfg.population_size + out.delta_pop, 2 + cfg.elitism, max(ceiling, 2 + cfg.elitism)))
    return replace(
        cfg,
        population_size=population,
        crossover_rate=float(np.clip(cfg.crossover_rate + out.delta_crossover, 0.0, 1.0)),
        mutation_rate=float(np.clip(cfg.mutation_rate + out.delta_mutation, 0.0, 1.0)),
    )
