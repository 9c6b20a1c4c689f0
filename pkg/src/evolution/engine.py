#!/usr/bin/env python3
"""
Evolutionary engine for HybridCI
Real-coded generational EA with elitism, tournament selection, gaussian
mutation, optional blend crossover and an optional fuzzy controller that
adapts population size and operator rates between generations.

Every random decision for child c of generation g comes from its own stream
keyed by (seed, "offspring", g, c), so results do not depend on how fitness
evaluations are scheduled across threads.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.config.settings import toolkit_settings
from src.core.errors import HybridCIError, InvalidConfigError, InvalidInputError
from src.core.numeric import RngStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeneSpan:
    """A named, contiguous run of genes with per-gene bounds."""

    name: str
    start: int
    stop: int
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    @property
    def size(self):
        return self.stop - self.start

    @property
    def slice(self):
        return slice(self.start, self.stop)


class GenomeLayout:
    """Ordered, disjoint spans covering a flat gene vector."""

    def __init__(self, spans: Sequence[GeneSpan]):
        self.spans = tuple(spans)
        position = 0
        for span in self.spans:
            if span.start != position or span.stop < span.start:
                raise InvalidInputError(f"span {span.name} does not continue at gene {position}")
            position = span.stop
        self.size = position
        self.lower = np.array([v for s in self.spans for v in s.lower], dtype=np.float64)
        self.upper = np.array([v for s in self.spans for v in s.upper], dtype=np.float64)
        if np.any(self.lower > self.upper):
            raise InvalidInputError("gene lower bounds must not exceed upper bounds")
        self._by_name = {span.name: span for span in self.spans}

    @classmethod
    def build(cls, specs):
        """Build from (name, lower bounds, upper bounds) triples."""
        spans = []
        position = 0
        for name, lower, upper in specs:
            lower = tuple(float(v) for v in np.atleast_1d(lower))
            upper = tuple(float(v) for v in np.atleast_1d(upper))
            if len(lower) != len(upper):
                raise InvalidInputError(f"span {name} has mismatched bounds")
            spans.append(GeneSpan(name, position, position + len(lower), lower, upper))
            position += len(lower)
        return cls(spans)

    def span(self, name):
        return self._by_name[name]

    @property
    def span_names(self):
        return tuple(self._by_name)

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    def clip(self, genes):
        return np.clip(genes, self.lower, self.upper)

    def sigma_vector(self, relative_sigmas: Mapping[str, float], default=0.1):
        """Absolute per-gene mutation sigma: the span's relative sigma times the gene range."""
        sigma = np.empty(self.size)
        for span in self.spans:
            sigma[span.slice] = relative_sigmas.get(span.name, default)
        return sigma * (self.upper - self.lower)

    def random_genes(self, stream: RngStream):
        return stream.generator().uniform(self.lower, self.upper)

    def __eq__(self, other):
        return isinstance(other, GenomeLayout) and self.spans == other.spans

    def __hash__(self):
        return hash(self.spans)


@dataclass(frozen=True, eq=False)
class Genome:
    """Real-valued genes plus the layout that gives them meaning."""

    genes: np.ndarray
    layout: GenomeLayout

    def __post_init__(self):
        genes = np.array(self.genes, dtype=np.float64).reshape(-1)
        if genes.size != self.layout.size:
            raise InvalidInputError(f"genome has {genes.size} genes, layout expects {self.layout.size}")
        genes = self.layout.clip(genes)
        genes.setflags(write=False)
        object.__setattr__(self, "genes", genes)

    def span(self, name):
        return self.genes[self.layout.span(name).slice]

    def with_genes(self, genes):
        return Genome(genes, self.layout)

    @classmethod
    def random(cls, layout: GenomeLayout, stream: RngStream):
        return cls(layout.random_genes(stream), layout)


def decode_choice(gene, options):
    """Nearest option index for a categorical gene on [0, len-1]; ties go to the lower option."""
    index = int(math.ceil(float(gene) - 0.5))
    return options[min(max(index, 0), len(options) - 1)]


def decode_count(gene):
    """Nearest integer, ties toward the lower value."""
    return int(math.ceil(float(gene) - 0.5))


class Adapter(Enum):
    NONE = "none"
    FUZZY_CONTROLLER = "fuzzy_controller"


@dataclass(frozen=True)
class EAConfig:
    """
    Evolutionary algorithm settings.

    Attributes:
        population_size (int): Individuals per generation (>= 2)
        generations (int): Generations after the initial population
        elitism (int): Best individuals copied unchanged (>= 1, < population_size)
        tournament_k (int): Tournament size (>= 2)
        mutation_rate (float): Per-gene mutation probability
        mutation_sigma (dict): Relative sigma per span name (absolute = sigma * gene range)
        crossover_rate (float): Probability of blend crossover per child
        blend_alpha (float): BLX-alpha extension
        seed (int): Master seed
        adapter (Adapter): none | fuzzy_controller
        tolerance (float): Stop once the best fitness drops below this
        max_population (int): Ceiling the controller may grow the population to (0 = 4x initial)
        controller_rules (dict): Optional rule base override for the fuzzy controller
    """

    population_size: int = 30
    generations: int = 40
    elitism: int = 1
    tournament_k: int = 2
    mutation_rate: float = 0.1
    mutation_sigma: Dict[str, float] = field(default_factory=dict)
    crossover_rate: float = 0.0
    blend_alpha: float = 0.5
    seed: int = 0
    adapter: Adapter = Adapter.NONE
    tolerance: float = 0.0
    max_population: int = 0
    controller_rules: Optional[Dict[str, dict]] = None

    def __post_init__(self):
        for name in ("population_size", "generations", "elitism", "tournament_k", "seed", "max_population"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise InvalidConfigError(name, f"must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        object.__setattr__(self, "adapter", Adapter(self.adapter))
        object.__setattr__(self, "mutation_sigma", dict(self.mutation_sigma))
        if self.population_size < 2:
            raise InvalidConfigError("population_size", f"must be at least 2, got {self.population_size}")
        if self.generations < 0:
            raise InvalidConfigError("generations", f"must be non-negative, got {self.generations}")
        if not 1 <= self.elitism < self.population_size:
            raise InvalidConfigError("elitism", f"must be in [1, population_size), got {self.elitism}")
        if self.tournament_k < 2:
            raise InvalidConfigError("tournament_k", f"must be at least 2, got {self.tournament_k}")
        for name in ("mutation_rate", "crossover_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidConfigError(name, f"must be in [0, 1], got {getattr(self, name)}")
        for span, sigma in self.mutation_sigma.items():
            if not sigma >= 0:
                raise InvalidConfigError(f"mutation_sigma.{span}", f"must be non-negative, got {sigma}")
        if not self.blend_alpha >= 0:
            raise InvalidConfigError("blend_alpha", f"must be non-negative, got {self.blend_alpha}")
        if not self.tolerance >= 0:
            raise InvalidConfigError("tolerance", f"must be non-negative, got {self.tolerance}")
        if self.max_population < 0:
            raise InvalidConfigError("max_population", f"must be non-negative, got {self.max_population}")

    @property
    def population_ceiling(self):
        return self.max_population or 4 * self.population_size


@dataclass(frozen=True)
class GenerationStats:
    """Fitness statistics and operator settings of one generation (minimisation)."""

    generation: int
    best: float
    average: float
    worst: float
    population_size: int
    mutation_rate: float
    crossover_rate: float
    penalized: int = 0

    COLUMNS = ("generation", "best", "average", "worst", "population_size", "mutation_rate",
               "crossover_rate", "penalized")

    def as_row(self):
        return [getattr(self, name) for name in self.COLUMNS]


@dataclass(frozen=True)
class EvolutionResult:
    best: Genome
    best_fitness: float
    history: Tuple[GenerationStats, ...]
    final_config: EAConfig


def _generator(rng):
    return rng.generator() if isinstance(rng, RngStream) else rng


def tournament_select(pop, fitnesses, k, rng):
    """
    Index of the fittest of k uniform draws with replacement; ties go to the lowest index.

    Args:
        pop: Population (only its length is used)
        fitnesses: Fitness per member (lower is better)
        k (int): Tournament size
        rng: RngStream or numpy Generator
    """
    n = len(pop)
    if n < 1:
        raise InvalidInputError("cannot select from an empty population")
    draws = _generator(rng).integers(0, n, size=int(k))
    return int(min(draws, key=lambda i: (fitnesses[i], i)))


def mutate(g: Genome, rate, sigma_per_span: Mapping[str, float], rng):
    """
    Gaussian mutation: each gene is perturbed with probability rate by
    N(0, sigma of its span relative to the gene range), then clamped to bounds.
    """
    gen = _generator(rng)
    mask = gen.random(g.layout.size) < rate
    noise = gen.standard_normal(g.layout.size) * g.layout.sigma_vector(sigma_per_span)
    return g.with_genes(np.where(mask, g.genes + noise, g.genes))


def blend_crossover(a: Genome, b: Genome, alpha, rng):
    """
    BLX-alpha: child genes uniform on [min - alpha*range, max + alpha*range], clamped.

    Raises:
        InvalidInputError: If the parents have different layouts
    """
    if a.layout != b.layout:
        raise InvalidInputError("blend crossover needs parents with the same layout")
    low = np.minimum(a.genes, b.genes)
    high = np.maximum(a.genes, b.genes)
    spread = alpha * (high - low)
    u = _generator(rng).random(a.layout.size)
    return a.with_genes(low - spread + u * (high - low + 2.0 * spread))


def _evaluate(population, fitness, executor):
    penalty = toolkit_settings.penalty_fitness

    def safe(genome):
        try:
            value = float(fitness(genome))
        except HybridCIError as exc:
            logger.debug("Fitness evaluation failed, penalising: %s", exc)
            return penalty, True
        if not math.isfinite(value):
            return penalty, True
        return value, False

    results = list(executor.map(safe, population))
    return [r[0] for r in results], sum(1 for r in results if r[1])


def _stats(generation, fitnesses, penalized, cfg):
    return GenerationStats(generation, float(min(fitnesses)), float(np.mean(fitnesses)), float(max(fitnesses)),
                           len(fitnesses), cfg.mutation_rate, cfg.crossover_rate, penalized)


def evolve(init: Callable[[RngStream], Genome], fitness: Callable[[Genome], float], cfg: EAConfig,
           on_generation: Callable[[GenerationStats], None] = None, seeds: Sequence[Genome] = ()):
    """
    Run the generational loop.

    Args:
        init: Genome factory called with a per-individual stream
        fitness: Genome -> non-negative real, lower is better; non-finite values are penalised
        cfg (EAConfig): Settings
        on_generation: Optional callback receiving each GenerationStats
        seeds: Genomes that open the initial population; init fills the remaining places

    Returns:
        EvolutionResult: Best genome of the final population and per-generation statistics
    """
    from src.evolution.controller import FuzzyController, apply_outputs

    controller = None
    current = cfg
    if cfg.adapter is Adapter.FUZZY_CONTROLLER:
        controller = FuzzyController.from_dict(cfg.controller_rules) if cfg.controller_rules else FuzzyController()
        # the ceiling is fixed relative to the initial population
        current = replace(cfg, max_population=cfg.population_ceiling)

    population = list(seeds)[:cfg.population_size]
    population += [init(RngStream.derive(cfg.seed, "init", i)) for i in range(len(population), cfg.population_size)]
    history = []
    with ThreadPoolExecutor(max_workers=toolkit_settings.resolve_threads()) as executor:
        fitnesses, penalized = _evaluate(population, fitness, executor)
        history.append(_stats(0, fitnesses, penalized, current))
        if on_generation:
            on_generation(history[-1])

        for generation in range(1, cfg.generations + 1):
            if history[-1].best < cfg.tolerance:
                logger.info("Best fitness %.6g below tolerance; stopping at generation %d",
                            history[-1].best, generation - 1)
                break
            if controller is not None:
                previous = history[-2].best if len(history) > 1 else None
                outputs = controller.step(history[-1], previous)
                current = apply_outputs(current, outputs)

            order = sorted(range(len(population)), key=lambda i: (fitnesses[i], i))
            elites = [population[i] for i in order[:current.elitism]]
            elite_fitness = [fitnesses[i] for i in order[:current.elitism]]
            sigmas = current.mutation_sigma
            children = []
            for c in range(current.population_size - current.elitism):
                gen = RngStream.derive(cfg.seed, "offspring", generation, c).generator()
                k = min(current.tournament_k, len(population))
                parent = population[tournament_select(population, fitnesses, k, gen)]
                if current.crossover_rate > 0 and gen.random() < current.crossover_rate:
                    other = population[tournament_select(population, fitnesses, k, gen)]
                    parent = blend_crossover(parent, other, current.blend_alpha, gen)
                children.append(mutate(parent, current.mutation_rate, sigmas, gen))

            child_fitness, penalized = _evaluate(children, fitness, executor)
            population = elites + children
            fitnesses = elite_fitness + child_fitness
            history.append(_stats(generation, fitnesses, penalized, current))
            if on_generation:
                on_generation(history[-1])
            logger.debug("Generation %d: best %.6g avg %.6g pop %d", generation, history[-1].best,
                         history[-1].average, len(population))

    best_index = min(range(len(population)), key=lambda i: (fitnesses[i], i))
    return EvolutionResult(population[best_index], fitnesses[best_index], tuple(history), current)


def sphere(genome: Genome):
    """Sum of squared genes; the benchmark used by the ea-bench task."""
    return float(genome.genes @ genome.genes)
