#!/usr/bin/env python3
"""
Evolutionary neuro-fuzzy systems for HybridCI
A genome describes a complete fuzzy inference system: its type, operators,
rule base, membership functions and learning parameters. Fitness decodes the
genome, runs neuro-fuzzy learning and scores the system on held-out data.

Genome spans, slowest to fastest:
    fis_type    Takagi-Sugeno | Mamdani
    operators   T-norm (product | min), T-conorm (max | probabilistic sum),
                defuzzifier (centroid | mean of maxima)
    rules       one active flag per grid cell, one Mamdani output term per cell,
                d + 1 Takagi-Sugeno coefficients per cell
    mf          one shape gene per input (triangular | gaussian), then a centre
                offset and width multiplier per input term and per output term
    learning    epochs, log10 learning rate, ridge
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from src.config.settings import toolkit_settings
from src.core.datasets import Dataset, rmse
from src.core.errors import HybridCIError, InvalidConfigError, InvalidInputError
from src.core.numeric import RngStream
from src.core.records import RunRecord
from src.evolution.engine import EAConfig, Genome, GenomeLayout, GenerationStats, decode_choice, decode_count, evolve
from src.fuzzy.inference import (FuzzyRule, FuzzySystem, FuzzyVariable, SystemKind, grid_cells, grid_partition,
                                 predict, term_labels, uniform_variable)
from src.fuzzy.membership import Defuzz, MembershipFn, MFKind, TConorm, TNorm
from src.fuzzy.neurofuzzy import NFTrainConfig, gradient_train_mamdani, hybrid_train_ts
from src.fuzzy.serialization import system_to_dict
from src.hybrids.mleann import check_splits, evolution_extra, split_errors

logger = logging.getLogger(__name__)

KINDS = (SystemKind.TAKAGI_SUGENO, SystemKind.MAMDANI)
TNORMS = (TNorm.PRODUCT, TNorm.MIN)
TCONORMS = (TConorm.MAX, TConorm.PROB_SUM)
DEFUZZIFIERS = (Defuzz.CENTROID, Defuzz.MOM)
SHAPES = (MFKind.TRIANGULAR, MFKind.GAUSSIAN)

WIDTH_BOUNDS = (0.5, 1.5)
LOG_LR_BOUNDS = (-4.0, math.log10(0.5))
RIDGE_BOUNDS = (0.0, 1e-2)

DEFAULT_SIGMAS = {"fis_type": 0.02, "operators": 0.05, "rules": 0.1, "mf": 0.2, "learning": 0.1}


class Strategy(Enum):
    """How much local learning runs inside a fitness evaluation."""

    EVOLUTION_ONLY = "evolution_only"
    CONSEQUENTS_ONLY = "consequents_only"
    FULL_HYBRID = "full_hybrid"


class EvoNFCodec:
    """
    Genome layout for fuzzy systems over fixed universes, plus decode/encode.

    Args:
        input_universes: (low, high) per input
        output_universe: (low, high) of the target
        terms_per_var (int): Terms per input and for the Mamdani output (>= 2)
        epochs_max (int): Largest epoch budget
        coefficient_bound (float): Takagi-Sugeno coefficients live in [-bound, bound]
        fixed_kind (SystemKind): Pin the system type (None leaves it to evolution)
        fixed_operators (tuple): Pin (tnorm, tconorm, defuzz) (None leaves them to evolution)
    """

    def __init__(self, input_universes: Sequence[Tuple[float, float]], output_universe, terms_per_var=2,
                 epochs_max=50, coefficient_bound=5.0, fixed_kind=None, fixed_operators=None):
        if terms_per_var < 2:
            raise InvalidConfigError("terms_per_var", f"must be at least 2, got {terms_per_var}")
        if epochs_max < 1:
            raise InvalidConfigError("epochs_max", f"must be at least 1, got {epochs_max}")
        self.input_universes = tuple((float(lo), float(hi)) for lo, hi in input_universes)
        self.output_universe = (float(output_universe[0]), float(output_universe[1]))
        for lo, hi in self.input_universes + (self.output_universe,):
            if not lo < hi:
                raise InvalidInputError(f"universe ({lo}, {hi}) is empty")
        if not self.input_universes:
            raise InvalidInputError("need at least one input universe")
        self.terms = int(terms_per_var)
        self.epochs_max = int(epochs_max)
        self.coefficient_bound = float(coefficient_bound)
        self.fixed_kind = None if fixed_kind is None else SystemKind(fixed_kind)
        self.fixed_operators = None
        if fixed_operators is not None:
            tn, tc, df = fixed_operators
            self.fixed_operators = (TNorm(tn), TConorm(tc), Defuzz(df))

        d, t = self.n_inputs, self.terms
        self.cells = grid_cells(d, t)
        r = len(self.cells)
        kind_bounds = (0.0, 1.0)
        if self.fixed_kind is not None:
            kind_bounds = (float(KINDS.index(self.fixed_kind)),) * 2
        operator_lower, operator_upper = (0.0, 0.0, 0.0), (1.0, 1.0, 1.0)
        if self.fixed_operators is not None:
            operator_lower = operator_upper = (float(TNORMS.index(self.fixed_operators[0])),
                                               float(TCONORMS.index(self.fixed_operators[1])),
                                               float(DEFUZZIFIERS.index(self.fixed_operators[2])))

        mf_lower, mf_upper = [0.0] * d, [1.0] * d
        for lo, hi in self.input_universes + (self.output_universe,):
            half = 0.5 * (hi - lo) / (t - 1)
            for _ in range(t):
                mf_lower += [-half, WIDTH_BOUNDS[0]]
                mf_upper += [half, WIDTH_BOUNDS[1]]
        b = self.coefficient_bound
        self.layout = GenomeLayout.build([
            ("fis_type", kind_bounds[0], kind_bounds[1]),
            ("operators", operator_lower, operator_upper),
            ("rules",
             [0.0] * r + [0.0] * r + [-b] * (r * (d + 1)),
             [1.0] * r + [t - 1.0] * r + [b] * (r * (d + 1))),
            ("mf", mf_lower, mf_upper),
            ("learning", (1.0, LOG_LR_BOUNDS[0], RIDGE_BOUNDS[0]),
             (self.epochs_max, LOG_LR_BOUNDS[1], RIDGE_BOUNDS[1])),
        ])

    @property
    def n_inputs(self):
        return len(self.input_universes)

    @property
    def n_rules(self):
        return len(self.cells)

    def _spacing(self, universe):
        return (universe[1] - universe[0]) / (self.terms - 1)

    def _variable(self, name, universe, genes, shape):
        lo, hi = universe
        spacing = self._spacing(universe)
        terms = []
        for index, label in enumerate(term_labels(self.terms)):
            offset, multiplier = genes[2 * index], genes[2 * index + 1]
            center = float(np.clip(lo + index * spacing + offset, lo, hi))
            width = spacing * float(multiplier)
            if shape is MFKind.GAUSSIAN:
                terms.append(MembershipFn.gaussian(center, width / 2.0, label))
            else:
                terms.append(MembershipFn.triangular(center - width, center, center + width, label))
        return FuzzyVariable(name, universe, tuple(terms))

    def _rule_genes(self, genome):
        genes = genome.span("rules")
        r, d = self.n_rules, self.n_inputs
        return genes[:r], genes[r:2 * r], genes[2 * r:].reshape(r, d + 1)

    def active_rules(self, genome: Genome):
        """Indices of active grid cells; the highest flag is forced on when none reaches 0.5."""
        flags = self._rule_genes(genome)[0]
        active = np.flatnonzero(flags >= 0.5)
        if active.size == 0:
            active = np.array([int(np.argmax(flags))])
        return active

    def decode(self, genome: Genome):
        """
        Decode a genome into a fuzzy system and its learning settings.

        Every gene vector decodes. Mamdani systems always use gaussian terms.

        Returns:
            tuple: (FuzzySystem, NFTrainConfig)
        """
        if genome.layout != self.layout:
            raise InvalidInputError("genome layout does not match the codec")
        kind = decode_choice(genome.span("fis_type")[0], KINDS)
        tn, tc, df = genome.span("operators")
        operators = (decode_choice(tn, TNORMS), decode_choice(tc, TCONORMS), decode_choice(df, DEFUZZIFIERS))

        mf = genome.span("mf")
        d, t = self.n_inputs, self.terms
        shapes = [decode_choice(g, SHAPES) for g in mf[:d]]
        if kind is SystemKind.MAMDANI:
            shapes = [MFKind.GAUSSIAN] * d
        offset = d
        inputs = []
        for j, universe in enumerate(self.input_universes):
            inputs.append(self._variable(f"x{j + 1}", universe, mf[offset:offset + 2 * t], shapes[j]))
            offset += 2 * t

        _, terms, coefficients = self._rule_genes(genome)
        rules = []
        for index in self.active_rules(genome):
            if kind is SystemKind.MAMDANI:
                consequent = min(max(decode_count(terms[index]), 0), t - 1)
            else:
                consequent = tuple(coefficients[index])
            rules.append(FuzzyRule(self.cells[index], consequent))

        output = None
        if kind is SystemKind.MAMDANI:
            output = self._variable("y", self.output_universe, mf[offset:offset + 2 * t], MFKind.GAUSSIAN)
        system = FuzzySystem(kind, tuple(inputs), tuple(rules), output, *operators)

        epochs, log_lr, ridge = genome.span("learning")
        learning = NFTrainConfig(epochs=min(max(decode_count(epochs), 1), self.epochs_max),
                                 antecedent_lr=10.0 ** float(log_lr), ridge=float(ridge))
        return system, learning

    def _encode_variable(self, variable: FuzzyVariable, universe):
        if len(variable.terms) != self.terms or variable.universe != universe:
            raise InvalidInputError(f"variable {variable.name} does not match the codec grid")
        kinds = {term.kind for term in variable.terms}
        if len(kinds) != 1 or not kinds <= set(SHAPES):
            raise InvalidInputError(f"variable {variable.name} needs all-triangular or all-gaussian terms")
        shape = kinds.pop()
        spacing = self._spacing(universe)
        genes = []
        for index, term in enumerate(variable.terms):
            if shape is MFKind.GAUSSIAN:
                center, width = term.params[0], 2.0 * term.params[1]
            else:
                a, center, c = term.params
                width = center - a
                if not math.isclose(c - center, width, rel_tol=1e-9, abs_tol=1e-12):
                    raise InvalidInputError(f"term {term.label} of {variable.name} is not symmetric")
            genes += [center - (universe[0] + index * spacing), width / spacing]
        return shape, genes

    def encode(self, fs: FuzzySystem, learning: NFTrainConfig = None):
        """
        Build a genome that decodes to the given system (up to gene clipping).

        The system must live on the codec's grid: one rule per used cell with
        unit weight, symmetric triangles or gaussians, and parameters inside
        the gene ranges.

        Raises:
            InvalidInputError: If the system cannot be represented
        """
        learning = learning or NFTrainConfig()
        if fs.n_inputs != self.n_inputs:
            raise InvalidInputError(f"system has {fs.n_inputs} inputs, codec expects {self.n_inputs}")
        genes = self.layout.midpoint.copy()
        r, d, t = self.n_rules, self.n_inputs, self.terms

        def put(name, values):
            span = self.layout.span(name)
            values = np.asarray(values, dtype=np.float64)
            if np.any(values < self.layout.lower[span.slice] - 1e-12) or \
                    np.any(values > self.layout.upper[span.slice] + 1e-12):
                raise InvalidInputError(f"{name} genes fall outside their ranges")
            genes[span.slice] = values

        put("fis_type", [KINDS.index(fs.kind)])
        put("operators", [TNORMS.index(fs.tnorm), TCONORMS.index(fs.tconorm), DEFUZZIFIERS.index(fs.defuzz)])

        flags = np.zeros(r)
        terms = np.full(r, 0.5 * (t - 1))
        coefficients = np.zeros((r, d + 1))
        for rule in fs.rules:
            if rule.weight != 1.0 or rule.antecedent not in self.cells:
                raise InvalidInputError(f"rule {rule.antecedent} is not a unit-weight grid cell")
            index = self.cells.index(rule.antecedent)
            flags[index] = 1.0
            if fs.kind is SystemKind.MAMDANI:
                terms[index] = rule.consequent
            else:
                coefficients[index] = rule.consequent
        put("rules", np.concatenate([flags, terms, coefficients.ravel()]))

        shapes, mf = [], []
        for variable, universe in zip(fs.inputs, self.input_universes):
            shape, values = self._encode_variable(variable, universe)
            shapes.append(float(SHAPES.index(shape)))
            mf += values
        if fs.kind is SystemKind.MAMDANI:
            mf += self._encode_variable(fs.output, self.output_universe)[1]
        else:
            mf += list(self.layout.midpoint[self.layout.span("mf").stop - 2 * t:self.layout.span("mf").stop])
        put("mf", shapes + mf)
        put("learning", [learning.epochs, math.log10(learning.antecedent_lr), learning.ridge])
        return Genome(genes, self.layout)

    def random(self, stream):
        return Genome.random(self.layout, stream)


def decode_fis(genome: Genome, codec: EvoNFCodec):
    return codec.decode(genome)


def encode_fis(fs: FuzzySystem, codec: EvoNFCodec, learning: NFTrainConfig = None):
    return codec.encode(fs, learning)


def grid_genome(codec: EvoNFCodec, stream: RngStream):
    """
    Genome of the untuned grid system on the codec's universes.

    Every cell is active with uniform gaussian terms and default learning
    settings capped at the codec's epoch bound. Takagi-Sugeno consequents start
    at zero; Mamdani consequents are drawn from stream.
    """
    kind = codec.fixed_kind or SystemKind.TAKAGI_SUGENO
    tnorm, tconorm, defuzz = codec.fixed_operators or (TNorm.PRODUCT, TConorm.MAX, Defuzz.CENTROID)
    variables = [uniform_variable(f"x{j + 1}", universe, codec.terms)
                 for j, universe in enumerate(codec.input_universes)]
    output = None
    if kind is SystemKind.MAMDANI:
        output = uniform_variable("y", codec.output_universe, codec.terms, MFKind.GAUSSIAN)
    fs = grid_partition(variables, codec.terms, kind, stream, output, MFKind.GAUSSIAN, tnorm, tconorm, defuzz)
    return codec.encode(fs, NFTrainConfig(epochs=min(NFTrainConfig().epochs, codec.epochs_max)))


def train_system(fs: FuzzySystem, learning: NFTrainConfig, train_ds: Dataset, strategy: Strategy):
    """
    Run the strategy's local learning.

    Returns:
        tuple: (trained system, diverged flag)
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.EVOLUTION_ONLY:
        return fs, False
    learning = replace(learning, freeze_antecedents=strategy is Strategy.CONSEQUENTS_ONLY)
    if fs.kind is SystemKind.TAKAGI_SUGENO:
        result = hybrid_train_ts(fs, train_ds, learning)
    else:
        result = gradient_train_mamdani(fs, train_ds, learning)
    return result.system, result.diverged


def evonf_fitness(genome: Genome, train_ds: Dataset, eval_ds: Dataset, codec: EvoNFCodec,
                  strategy: Strategy = Strategy.FULL_HYBRID):
    """
    Decode, train with the genome's learning genes and return the RMSE on eval_ds.

    Training failures and non-finite errors give the penalty fitness.
    """
    try:
        fs, learning = codec.decode(genome)
        fs, diverged = train_system(fs, learning, train_ds, strategy)
        if diverged:
            return toolkit_settings.penalty_fitness
        with np.errstate(over="ignore", invalid="ignore"):
            error = rmse(predict(fs, eval_ds.inputs), eval_ds.targets[:, 0])
    except HybridCIError as exc:
        logger.debug("Fuzzy genome failed: %s", exc)
        return toolkit_settings.penalty_fitness
    return error if math.isfinite(error) else toolkit_settings.penalty_fitness


def default_ea():
    return EAConfig(population_size=30, generations=40, elitism=1, crossover_rate=0.7,
                    mutation_sigma=dict(DEFAULT_SIGMAS))


@dataclass(frozen=True)
class EvoNFConfig:
    """
    EvoNF settings.

    Attributes:
        ea (EAConfig): Evolution settings (the fuzzy controller adapter is allowed)
        terms_per_var (int): Terms per input variable (>= 2)
        fitness_split (str): "valid" (default) or "test"
        strategy (Strategy): Local learning inside fitness evaluation
        fixed_kind (str): Pin the system type, or None
        fixed_operators (tuple): Pin (tnorm, tconorm, defuzz), or None
        epochs_max (int): Upper bound of the epoch gene
        coefficient_bound (float): Range of Takagi-Sugeno coefficient genes
        seed_grid (bool): Start evolution from the untuned grid system plus random genomes
    """

    ea: EAConfig = field(default_factory=default_ea)
    terms_per_var: int = 2
    fitness_split: str = "valid"
    strategy: Strategy = Strategy.FULL_HYBRID
    fixed_kind: Optional[SystemKind] = None
    fixed_operators: Optional[Tuple[str, str, str]] = None
    epochs_max: int = 50
    coefficient_bound: float = 5.0
    seed_grid: bool = False

    def __post_init__(self):
        if self.terms_per_var < 2:
            raise InvalidConfigError("terms_per_var", f"must be at least 2, got {self.terms_per_var}")
        if self.fitness_split not in ("valid", "test"):
            raise InvalidConfigError("fitness_split", f"must be valid or test, got {self.fitness_split!r}")
        try:
            object.__setattr__(self, "strategy", Strategy(self.strategy))
        except ValueError as exc:
            raise InvalidConfigError("strategy", str(exc)) from None
        if self.fixed_kind is not None:
            try:
                object.__setattr__(self, "fixed_kind", SystemKind(self.fixed_kind))
            except ValueError as exc:
                raise InvalidConfigError("fixed_kind", str(exc)) from None
        if self.fixed_operators is not None:
            if len(self.fixed_operators) != 3:
                raise InvalidConfigError("fixed_operators", "needs [tnorm, tconorm, defuzz]")
            try:
                operators = (TNorm(self.fixed_operators[0]), TConorm(self.fixed_operators[1]),
                             Defuzz(self.fixed_operators[2]))
            except ValueError as exc:
                raise InvalidConfigError("fixed_operators", str(exc)) from None
            object.__setattr__(self, "fixed_operators", tuple(o.value for o in operators))
        if self.epochs_max < 1:
            raise InvalidConfigError("epochs_max", f"must be at least 1, got {self.epochs_max}")
        if not self.coefficient_bound > 0:
            raise InvalidConfigError("coefficient_bound", f"must be positive, got {self.coefficient_bound}")
        object.__setattr__(self, "ea", replace(self.ea, mutation_sigma={**DEFAULT_SIGMAS, **self.ea.mutation_sigma}))

    def codec(self, input_universes, output_universe):
        return EvoNFCodec(input_universes, output_universe, self.terms_per_var, self.epochs_max,
                          self.coefficient_bound, self.fixed_kind, self.fixed_operators)


def data_universes(*datasets):
    """
    Per-column (min, max) of inputs and of the single target over the given datasets.

    Constant columns are widened by 0.5 on each side.
    """
    present = [ds for ds in datasets if ds is not None]
    inputs = np.vstack([ds.inputs for ds in present])
    targets = np.vstack([ds.targets for ds in present])

    def bounds(column):
        lo, hi = float(column.min()), float(column.max())
        return (lo - 0.5, hi + 0.5) if lo == hi else (lo, hi)

    return [bounds(inputs[:, j]) for j in range(inputs.shape[1])], bounds(targets[:, 0])


def evonf_run(cfg: EvoNFConfig, train_ds: Dataset, valid_ds: Optional[Dataset], test_ds: Optional[Dataset],
              name="evonf", on_generation=None):
    """
    Evolve fuzzy systems on (train, fitness split) and score the best one.

    Universes span the data of all splits. The best genome of the final
    generation is decoded, retrained with its own learning genes and scored.
    With seed_grid the untuned grid system opens the initial population.

    Raises:
        InvalidInputError: If the splits are inconsistent or have more than one target
    """
    eval_ds = check_splits(train_ds, valid_ds, test_ds, cfg.fitness_split)
    if train_ds.n_targets != 1:
        raise InvalidInputError(f"fuzzy systems have one output, dataset has {train_ds.n_targets} targets")
    codec = cfg.codec(*data_universes(train_ds, valid_ds, test_ds))
    started = time.perf_counter()
    logger.info("EvoNF: %d genes, %d grid rules, population %d, %d generations", codec.layout.size,
                codec.n_rules, cfg.ea.population_size, cfg.ea.generations)

    seeds = [grid_genome(codec, RngStream.derive(cfg.ea.seed, "grid"))] if cfg.seed_grid else []
    result = evolve(codec.random, lambda g: evonf_fitness(g, train_ds, eval_ds, codec, cfg.strategy),
                    cfg.ea, on_generation, seeds)

    fs, learning = codec.decode(result.best)
    diverged = result.best_fitness >= toolkit_settings.penalty_fitness
    try:
        fs, failed = train_system(fs, learning, train_ds, cfg.strategy)
        diverged = diverged or failed
    except HybridCIError as exc:
        logger.warning("Best fuzzy system failed on retraining: %s", exc)
        diverged = True
    with np.errstate(over="ignore", invalid="ignore"):
        errors = split_errors(lambda x: predict(fs, x).reshape(-1, 1), train_ds, valid_ds, test_ds)

    return RunRecord(
        task="evonf",
        name=name,
        seed=cfg.ea.seed,
        config={},
        history_columns=GenerationStats.COLUMNS,
        history=[stats.as_row() for stats in result.history],
        model={"system": system_to_dict(fs), "learning": asdict(learning)},
        train_rmse=errors[0],
        valid_rmse=errors[1],
        test_rmse=errors[2],
        parameter_count=fs.parameter_count,
        duration_seconds=time.perf_counter() - started,
        diverged=diverged,
        extra=evolution_extra(result, {"fitness_split": cfg.fitness_split, "strategy": cfg.strategy.value,
                                       "rules_active": len(fs.rules)}),
    )
