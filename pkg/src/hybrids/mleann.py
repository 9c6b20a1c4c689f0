#!/usr/bin/env python3
"""
Meta-learning evolutionary neural networks for HybridCI
One fixed-length genome carries the learning algorithm and its parameters, the
architecture and the initial weights of a network; every fitness evaluation
decodes the genome, trains the network locally and scores it on held-out data.

Genome spans:
    learning      algorithm (SCG | BP | QNA | LM), log10 learning rate, momentum,
                  log10 LM damping, epoch budget
    architecture  hidden layer count, neurons per hidden layer (x2),
                  transfer function per hidden layer (x2)
    weights       initial weights of the maximal network d -> H -> H -> m,
                  masked down to the decoded architecture
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from src.config.settings import toolkit_settings
from src.core.datasets import Dataset, rmse
from src.core.errors import HybridCIError, InvalidConfigError, InvalidInputError, TrainingDivergedError
from src.core.records import RunRecord
from src.evolution.engine import EAConfig, Genome, GenomeLayout, GenerationStats, decode_choice, decode_count, evolve
from src.neural.mlp import MLPNetwork, TransferFn, predict
from src.neural.trainers import Algorithm, TrainerConfig, train

logger = logging.getLogger(__name__)

ALGORITHMS = (Algorithm.SCG, Algorithm.BP, Algorithm.QNA, Algorithm.LM)
TRANSFERS = (TransferFn.SIGMOID, TransferFn.TANH, TransferFn.GAUSSIAN)

LOG_LR_BOUNDS = (-4.0, 0.0)
MOMENTUM_BOUNDS = (0.0, 0.95)
LOG_LAMBDA_BOUNDS = (-6.0, 0.0)

# weights adapt fastest, the learning rule slowest
DEFAULT_SIGMAS = {"learning": 0.05, "architecture": 0.1, "weights": 0.2}


class MLEANNCodec:
    """
    Genome layout for networks with d inputs and m outputs, plus decode/encode.

    Args:
        n_inputs (int): Input width d
        n_outputs (int): Output width m
        max_hidden (int): Largest hidden layer H
        epochs_min (int): Smallest epoch budget a genome may ask for
        epochs_max (int): Largest epoch budget
        weight_bound (float): Initial weights live in [-bound, bound]
    """

    def __init__(self, n_inputs, n_outputs, max_hidden=16, epochs_min=10, epochs_max=200, weight_bound=5.0):
        if n_inputs < 1 or n_outputs < 1:
            raise InvalidInputError(f"network needs at least one input and output, got {n_inputs}->{n_outputs}")
        if max_hidden < 1:
            raise InvalidConfigError("max_hidden", f"must be at least 1, got {max_hidden}")
        if not 1 <= epochs_min <= epochs_max:
            raise InvalidConfigError("epochs_min", f"need 1 <= epochs_min <= epochs_max, got {epochs_min}, {epochs_max}")
        if not weight_bound > 0:
            raise InvalidConfigError("weight_bound", f"must be positive, got {weight_bound}")
        self.n_inputs = int(n_inputs)
        self.n_outputs = int(n_outputs)
        self.max_hidden = int(max_hidden)
        self.epochs_min = int(epochs_min)
        self.epochs_max = int(epochs_max)
        self.weight_bound = float(weight_bound)

        h, d, m = self.max_hidden, self.n_inputs, self.n_outputs
        self.weight_shapes = ((h, d + 1), (h, h + 1), (m, h + 1))
        n_weights = sum(rows * cols for rows, cols in self.weight_shapes)
        self.layout = GenomeLayout.build([
            ("learning",
             (0.0, LOG_LR_BOUNDS[0], MOMENTUM_BOUNDS[0], LOG_LAMBDA_BOUNDS[0], self.epochs_min),
             (len(ALGORITHMS) - 1, LOG_LR_BOUNDS[1], MOMENTUM_BOUNDS[1], LOG_LAMBDA_BOUNDS[1], self.epochs_max)),
            ("architecture",
             (1.0, 1.0, 1.0, 0.0, 0.0),
             (2.0, h, h, len(TRANSFERS) - 1, len(TRANSFERS) - 1)),
            ("weights", np.full(n_weights, -self.weight_bound), np.full(n_weights, self.weight_bound)),
        ])

    @classmethod
    def for_layout(cls, layout: GenomeLayout, n_inputs, n_outputs):
        """Rebuild the codec that produced a layout."""
        learning = layout.span("learning")
        architecture = layout.span("architecture")
        weights = layout.span("weights")
        codec = cls(n_inputs, n_outputs, int(architecture.upper[1]), int(learning.lower[4]),
                    int(learning.upper[4]), weights.upper[0] if weights.size else 1.0)
        if codec.layout != layout:
            raise InvalidInputError(f"genome layout does not fit a {n_inputs}->{n_outputs} network")
        return codec

    def _maximal_weights(self, genes):
        matrices = []
        offset = 0
        for rows, cols in self.weight_shapes:
            matrices.append(genes[offset:offset + rows * cols].reshape(rows, cols))
            offset += rows * cols
        return matrices

    def architecture(self, genome: Genome):
        """(hidden layer sizes, hidden transfer functions) of a genome."""
        genes = genome.span("architecture")
        layers = min(max(decode_count(genes[0]), 1), 2)
        sizes = tuple(min(max(decode_count(g), 1), self.max_hidden) for g in genes[1:1 + layers])
        transfer = tuple(decode_choice(g, TRANSFERS) for g in genes[3:3 + layers])
        return sizes, transfer

    def trainer_config(self, genome: Genome):
        algorithm, log_lr, momentum, log_lambda, epochs = genome.span("learning")
        return TrainerConfig(
            algorithm=decode_choice(algorithm, ALGORITHMS),
            epochs=min(max(decode_count(epochs), self.epochs_min), self.epochs_max),
            learning_rate=10.0 ** float(log_lr),
            momentum=float(momentum),
            lm_lambda0=10.0 ** float(log_lambda),
        )

    def decode(self, genome: Genome):
        """
        Decode a genome into a network and its trainer settings.

        Every gene vector decodes; weight genes outside the decoded architecture
        are ignored.

        Returns:
            tuple: (MLPNetwork, TrainerConfig)
        """
        if genome.layout != self.layout:
            raise InvalidInputError("genome layout does not match the codec")
        hidden, transfer = self.architecture(genome)
        w1, w2, w3 = self._maximal_weights(genome.span("weights"))
        h = self.max_hidden
        weights = [w1[:hidden[0]]]
        if len(hidden) == 2:
            weights.append(np.hstack([w2[:hidden[1], :hidden[0]], w2[:hidden[1], h:]]))
        weights.append(np.hstack([w3[:, :hidden[-1]], w3[:, h:]]))
        net = MLPNetwork((self.n_inputs, *hidden, self.n_outputs), tuple(weights), transfer)
        return net, self.trainer_config(genome)

    def encode(self, net: MLPNetwork, trainer_cfg: TrainerConfig):
        """
        Build a genome that decodes to the given network and trainer settings.

        Genes the network does not use are left at their span midpoints.

        Raises:
            InvalidInputError: If the network or settings fall outside the genome's ranges
        """
        hidden = net.layer_sizes[1:-1]
        if net.n_inputs != self.n_inputs or net.n_outputs != self.n_outputs:
            raise InvalidInputError(f"network is {net.n_inputs}->{net.n_outputs}, codec is "
                                    f"{self.n_inputs}->{self.n_outputs}")
        if not 1 <= len(hidden) <= 2 or max(hidden) > self.max_hidden:
            raise InvalidInputError(f"hidden layers {hidden} do not fit max_hidden {self.max_hidden}")
        if any(t not in TRANSFERS for t in net.transfer):
            raise InvalidInputError(f"transfer functions {net.transfer} cannot be encoded")
        if np.any(np.abs(net.flatten()) > self.weight_bound):
            raise InvalidInputError(f"weights exceed the bound {self.weight_bound}")

        genes = self.layout.midpoint.copy()
        learning = [
            float(ALGORITHMS.index(trainer_cfg.algorithm)),
            math.log10(trainer_cfg.learning_rate),
            trainer_cfg.momentum,
            math.log10(trainer_cfg.lm_lambda0),
            float(trainer_cfg.epochs),
        ]
        span = self.layout.span("learning")
        if np.any(np.array(learning) < self.layout.lower[span.slice]) or \
                np.any(np.array(learning) > self.layout.upper[span.slice]):
            raise InvalidInputError(f"trainer settings {trainer_cfg} fall outside the genome ranges")
        genes[span.slice] = learning

        architecture = genes[self.layout.span("architecture").slice]
        architecture[0] = len(hidden)
        for index, (size, transfer) in enumerate(zip(hidden, net.transfer)):
            architecture[1 + index] = size
            architecture[3 + index] = TRANSFERS.index(transfer)

        w1, w2, w3 = (np.array(m) for m in self._maximal_weights(genes[self.layout.span("weights").slice]))
        h = self.max_hidden
        layers = list(net.weights)
        w1[:hidden[0]] = layers[0]
        if len(hidden) == 2:
            w2[:hidden[1], :hidden[0]] = layers[1][:, :-1]
            w2[:hidden[1], h] = layers[1][:, -1]
        w3[:, :hidden[-1]] = layers[-1][:, :-1]
        w3[:, h] = layers[-1][:, -1]
        genes[self.layout.span("weights").slice] = np.concatenate([w1.ravel(), w2.ravel(), w3.ravel()])
        return Genome(genes, self.layout)

    def random(self, stream):
        return Genome.random(self.layout, stream)


def decode(genome: Genome, n_inputs, n_outputs):
    """Decode a genome for a d -> m task; the remaining codec settings come from its layout."""
    return MLEANNCodec.for_layout(genome.layout, n_inputs, n_outputs).decode(genome)


def _train_and_score(genome, codec, train_ds, eval_ds):
    net, trainer_cfg = codec.decode(genome)
    report = train(net, train_ds, trainer_cfg)
    return report, rmse(predict(report.final_net, eval_ds.inputs), eval_ds.targets)


def mleann_fitness(genome: Genome, train_ds: Dataset, eval_ds: Dataset, codec: MLEANNCodec = None):
    """
    Decode, train with the genome's own algorithm and budget, and return the RMSE on eval_ds.

    Divergence and non-finite errors give the penalty fitness instead of raising.
    """
    codec = codec or MLEANNCodec.for_layout(genome.layout, train_ds.n_inputs, train_ds.n_targets)
    try:
        _, error = _train_and_score(genome, codec, train_ds, eval_ds)
    except TrainingDivergedError as exc:
        logger.debug("Genome diverged during training: %s", exc)
        return toolkit_settings.penalty_fitness
    return error if math.isfinite(error) else toolkit_settings.penalty_fitness


def default_ea():
    return EAConfig(population_size=30, generations=40, elitism=1, crossover_rate=0.0,
                    mutation_sigma=dict(DEFAULT_SIGMAS))


@dataclass(frozen=True)
class MLEANNConfig:
    """
    MLEANN settings.

    Attributes:
        ea (EAConfig): Evolution settings; missing span sigmas fall back to the defaults
        max_hidden (int): Largest hidden layer
        epochs_min / epochs_max (int): Bounds of the per-genome epoch budget
        weight_bound (float): Initial weight range
        fitness_split (str): "valid" (default) or "test"
    """

    ea: EAConfig = field(default_factory=default_ea)
    max_hidden: int = 16
    epochs_min: int = 10
    epochs_max: int = 200
    weight_bound: float = 5.0
    fitness_split: str = "valid"

    def __post_init__(self):
        if self.max_hidden < 1:
            raise InvalidConfigError("max_hidden", f"must be at least 1, got {self.max_hidden}")
        if self.fitness_split not in ("valid", "test"):
            raise InvalidConfigError("fitness_split", f"must be valid or test, got {self.fitness_split!r}")
        object.__setattr__(self, "ea", replace(self.ea, mutation_sigma={**DEFAULT_SIGMAS, **self.ea.mutation_sigma}))

    def codec(self, n_inputs, n_outputs):
        return MLEANNCodec(n_inputs, n_outputs, self.max_hidden, self.epochs_min, self.epochs_max, self.weight_bound)


def check_splits(train_ds, valid_ds, test_ds, fitness_split):
    """
    Validate split shapes and pick the fitness set.

    Raises:
        InvalidInputError: On missing training data, inconsistent widths or an empty fitness split
    """
    if train_ds is None:
        raise InvalidInputError("training set is empty")
    for label, ds in (("valid", valid_ds), ("test", test_ds)):
        if ds is not None and (ds.n_inputs, ds.n_targets) != (train_ds.n_inputs, train_ds.n_targets):
            raise InvalidInputError(f"{label} set is {ds.n_inputs}->{ds.n_targets}, training set is "
                                    f"{train_ds.n_inputs}->{train_ds.n_targets}")
    eval_ds = valid_ds if fitness_split == "valid" else test_ds
    if eval_ds is None:
        raise InvalidInputError(f"fitness split {fitness_split!r} is empty")
    return eval_ds


def split_errors(model_predict, train_ds, valid_ds, test_ds):
    """RMSE on each split, None for empty splits."""
    errors = []
    for ds in (train_ds, valid_ds, test_ds):
        errors.append(None if ds is None else rmse(model_predict(ds.inputs), ds.targets))
    return errors


def evolution_extra(result, names):
    return {
        "best_fitness": float(result.best_fitness),
        "best_genome": result.best.genes.tolist(),
        "genome_spans": {span.name: [span.start, span.stop] for span in result.best.layout.spans},
        "final_ea": {"population_size": result.final_config.population_size,
                     "mutation_rate": result.final_config.mutation_rate,
                     "crossover_rate": result.final_config.crossover_rate},
        **names,
    }


def mleann_run(cfg: MLEANNConfig, train_ds: Dataset, valid_ds: Optional[Dataset], test_ds: Optional[Dataset],
               name="mleann", on_generation=None):
    """
    Evolve networks on (train, fitness split) and score the best one.

    The best genome of the final generation is decoded, retrained with its own
    settings and scored on every split.

    Raises:
        InvalidInputError: If the splits are inconsistent, before evolution starts
    """
    eval_ds = check_splits(train_ds, valid_ds, test_ds, cfg.fitness_split)
    codec = cfg.codec(train_ds.n_inputs, train_ds.n_targets)
    started = time.perf_counter()
    logger.info("MLEANN: %d genes, population %d, %d generations", codec.layout.size,
                cfg.ea.population_size, cfg.ea.generations)

    result = evolve(codec.random, lambda g: mleann_fitness(g, train_ds, eval_ds, codec), cfg.ea, on_generation)

    net, trainer_cfg = codec.decode(result.best)
    diverged = result.best_fitness >= toolkit_settings.penalty_fitness
    try:
        net = train(net, train_ds, trainer_cfg).final_net
    except HybridCIError as exc:
        logger.warning("Best genome diverged on retraining: %s", exc)
        diverged = True
    errors = split_errors(lambda x: predict(net, x), train_ds, valid_ds, test_ds)

    return RunRecord(
        task="mleann",
        name=name,
        seed=cfg.ea.seed,
        config={},
        history_columns=GenerationStats.COLUMNS,
        history=[stats.as_row() for stats in result.history],
        model={"network": net.to_dict(), "trainer": trainer_cfg.to_dict()},
        train_rmse=errors[0],
        valid_rmse=errors[1],
        test_rmse=errors[2],
        parameter_count=net.parameter_count,
        duration_seconds=time.perf_counter() - started,
        diverged=diverged,
        extra=evolution_extra(result, {"fitness_split": cfg.fitness_split}),
    )
