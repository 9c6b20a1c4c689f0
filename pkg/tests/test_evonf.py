#!/usr/bin/env python3
"""
Test suite for evolutionary neuro-fuzzy systems.
Tests the fuzzy-system genome, learning strategies and a complete small run.
"""

import numpy as np
import pytest

from src.config.settings import toolkit_settings
from src.core.datasets import Dataset
from src.core.errors import InvalidConfigError, InvalidInputError
from src.core.numeric import RngStream
from src.evolution.engine import EAConfig, Genome, mutate
from src.fuzzy.inference import FuzzyRule, FuzzySystem, SystemKind, grid_partition, uniform_variable
from src.fuzzy.membership import Defuzz, MFKind, TConorm, TNorm
from src.fuzzy.neurofuzzy import NFTrainConfig
from src.hybrids.evonf import (DEFAULT_SIGMAS, EvoNFCodec, EvoNFConfig, Strategy, data_universes, decode_fis,
                               encode_fis, evonf_fitness, evonf_run, grid_genome, train_system)


UNIT = [(0.0, 1.0), (0.0, 1.0)]


@pytest.fixture
def codec():
    return EvoNFCodec(UNIT, (0.0, 1.0), terms_per_var=2, epochs_max=5)


@pytest.fixture
def splits(linear_dataset):
    rows = np.arange(linear_dataset.n_rows)
    return (linear_dataset.take(rows[:24], "train"), linear_dataset.take(rows[24:32], "valid"),
            linear_dataset.take(rows[32:], "test"))


def uniform_ts():
    variables = [uniform_variable(f"x{j + 1}", (0.0, 1.0), 2) for j in range(2)]
    return grid_partition(variables, 2, SystemKind.TAKAGI_SUGENO, RngStream(seed=0))


def uniform_mamdani():
    inputs = tuple(uniform_variable(f"x{j + 1}", (0.0, 1.0), 2, MFKind.GAUSSIAN) for j in range(2))
    output = uniform_variable("y", (0.0, 1.0), 2, MFKind.GAUSSIAN)
    rules = (FuzzyRule((0, 0), 0), FuzzyRule((1, 1), 1))
    return FuzzySystem(SystemKind.MAMDANI, inputs, rules, output, TNorm.MIN, TConorm.PROB_SUM, Defuzz.MOM)


class TestCodecLayout:
    """Test the fuzzy-system genome layout."""

    def test_span_order_and_sizes(self, codec):
        """Test spans from slowest to fastest changing."""
        assert codec.layout.span_names == ("fis_type", "operators", "rules", "mf", "learning")
        assert codec.n_rules == 4
        assert codec.layout.span("rules").size == 4 + 4 + 4 * 3
        assert codec.layout.span("mf").size == 2 + 3 * 2 * 2
        assert codec.layout.span("learning").size == 3

    def test_measured_steps_follow_span_time_scales(self):
        """Test mutation steps, as fractions of gene ranges, from the slowest span to the fastest."""
        codec = EvoNFCodec([(0.0, 100.0), (-3.0, 3.0)], (0.0, 50.0), terms_per_var=3, epochs_max=40)
        layout = codec.layout
        genome = Genome(layout.midpoint, layout)
        sigmas = EvoNFConfig().ea.mutation_sigma
        rng = np.random.default_rng(6)
        steps = np.mean([np.abs(mutate(genome, 1.0, sigmas, rng).genes - genome.genes) for _ in range(10_000)],
                        axis=0) / (layout.upper - layout.lower)
        per_span = {name: steps[layout.span(name).slice].mean() for name in layout.span_names}

        assert per_span["fis_type"] < per_span["operators"] < per_span["rules"] < per_span["mf"]
        assert per_span["fis_type"] == pytest.approx(DEFAULT_SIGMAS["fis_type"] * np.sqrt(2 / np.pi), rel=0.05)

    def test_validation(self):
        """Test term count and universe checks."""
        with pytest.raises(InvalidConfigError):
            EvoNFCodec(UNIT, (0.0, 1.0), terms_per_var=1)
        with pytest.raises(InvalidInputError):
            EvoNFCodec([(1.0, 1.0)], (0.0, 1.0))

    def test_fixed_kind_and_operators_collapse_bounds(self):
        """Test that pinned choices are no longer evolved."""
        codec = EvoNFCodec(UNIT, (0.0, 1.0), fixed_kind="mamdani", fixed_operators=("min", "max", "mean_of_maxima"))

        for index in range(5):
            fs, _ = codec.decode(codec.random(RngStream.derive(2, "init", index)))
            assert fs.kind is SystemKind.MAMDANI
            assert (fs.tnorm, fs.tconorm, fs.defuzz) == (TNorm.MIN, TConorm.MAX, Defuzz.MOM)


class TestDecode:
    """Test decoding genomes into fuzzy systems."""

    def test_random_genomes_decode(self, codec):
        """Test that any gene vector gives a valid system and learning settings."""
        for index in range(10):
            fs, learning = codec.decode(codec.random(RngStream.derive(4, "init", index)))
            assert 1 <= len(fs.rules) <= 4
            assert 1 <= learning.epochs <= 5
            if fs.kind is SystemKind.MAMDANI:
                assert all(t.kind is MFKind.GAUSSIAN for v in fs.inputs for t in v.terms)

    def test_no_active_flag_forces_the_highest(self, codec):
        """Test that a genome with every rule off keeps its strongest rule."""
        genes = codec.layout.midpoint.copy()
        rules = codec.layout.span("rules")
        genes[rules.start:rules.start + 4] = [0.1, 0.4, 0.2, 0.0]
        genome = Genome(genes, codec.layout)

        np.testing.assert_array_equal(codec.active_rules(genome), [1])
        assert decode_fis(genome, codec)[0].rules[0].antecedent == (1, 0)

    def test_layout_mismatch(self, codec):
        """Test that foreign genomes are rejected."""
        foreign = EvoNFCodec(UNIT, (0.0, 1.0), terms_per_var=3)

        with pytest.raises(InvalidInputError):
            codec.decode(foreign.random(RngStream(seed=0)))


class TestEncode:
    """Test encoding grid systems."""

    def test_takagi_sugeno_survives(self, codec):
        """Test that a uniform grid system decodes back to itself."""
        fs = uniform_ts()

        assert decode_fis(encode_fis(fs, codec, NFTrainConfig(epochs=3)), codec)[0] == fs

    def test_mamdani_survives(self, codec):
        """Test Mamdani systems with a partial rule base and pinned operators."""
        fs = uniform_mamdani()
        decoded, learning = codec.decode(codec.encode(fs, NFTrainConfig(epochs=3)))

        assert decoded == fs
        assert learning.epochs == 3

    def test_unrepresentable_systems(self, codec):
        """Test weights, universes and off-grid rules that do not fit."""
        fs = uniform_ts()
        weighted = FuzzySystem(fs.kind, fs.inputs, (FuzzyRule((0, 0), (0.0, 0.0, 0.0), weight=0.5),))
        wide = EvoNFCodec([(0.0, 2.0), (0.0, 1.0)], (0.0, 1.0))

        with pytest.raises(InvalidInputError):
            codec.encode(weighted)
        with pytest.raises(InvalidInputError):
            wide.encode(fs)

    def test_grid_genome_decodes_to_the_untuned_grid(self, codec):
        """Test every cell active, uniform gaussians and default learning capped at the epoch bound."""
        fs, learning = codec.decode(grid_genome(codec, RngStream(seed=0)))
        variables = [uniform_variable(f"x{j + 1}", (0.0, 1.0), 2) for j in range(2)]

        assert fs == grid_partition(variables, 2, SystemKind.TAKAGI_SUGENO, RngStream(seed=0), shape=MFKind.GAUSSIAN)
        assert learning.epochs == 5
        assert learning.antecedent_lr == pytest.approx(NFTrainConfig().antecedent_lr)
        assert learning.ridge == 0.0

    def test_grid_genome_follows_pinned_choices(self):
        """Test a Mamdani grid under pinned operators."""
        codec = EvoNFCodec(UNIT, (0.0, 1.0), fixed_kind="mamdani", fixed_operators=("min", "max", "mean_of_maxima"))
        fs, _ = codec.decode(grid_genome(codec, RngStream(seed=1)))

        assert fs.kind is SystemKind.MAMDANI
        assert len(fs.rules) == codec.n_rules
        assert (fs.tnorm, fs.tconorm, fs.defuzz) == (TNorm.MIN, TConorm.MAX, Defuzz.MOM)
        assert {term.kind for term in fs.inputs[0].terms} == {MFKind.GAUSSIAN}


class TestStrategies:
    """Test local learning inside fitness evaluation."""

    def test_evolution_only_keeps_system(self, splits):
        """Test that no learning leaves the decoded system untouched."""
        fs = uniform_ts()
        trained, diverged = train_system(fs, NFTrainConfig(epochs=3), splits[0], Strategy.EVOLUTION_ONLY)

        assert trained is fs
        assert diverged is False

    def test_consequents_only_freezes_memberships(self, splits):
        """Test that only the consequents are learnt."""
        fs = uniform_ts()
        trained, _ = train_system(fs, NFTrainConfig(epochs=3), splits[0], "consequents_only")

        assert trained.inputs == fs.inputs
        assert trained.rules != fs.rules

    def test_hybrid_improves_fitness(self, codec, splits):
        """Test that full hybrid learning beats no learning on a linear target."""
        train_ds, valid_ds, _ = splits
        genome = codec.encode(uniform_ts(), NFTrainConfig(epochs=3))

        untrained = evonf_fitness(genome, train_ds, valid_ds, codec, Strategy.EVOLUTION_ONLY)
        trained = evonf_fitness(genome, train_ds, valid_ds, codec, Strategy.FULL_HYBRID)

        assert trained < untrained < toolkit_settings.penalty_fitness


class TestEvoNFRun:
    """Test complete EvoNF runs."""

    def test_data_universes(self):
        """Test per-column bounds over all splits with constant columns widened."""
        a = Dataset([[0.0, 2.0], [1.0, 2.0]], [[0.5], [0.7]])
        b = Dataset([[3.0, 2.0]], [[0.1]])

        inputs, output = data_universes(a, None, b)

        assert inputs == [(0.0, 3.0), (1.5, 2.5)]
        assert output == pytest.approx((0.1, 0.7))

    def test_config_validation(self):
        """Test strategy and pinned operator checks."""
        with pytest.raises(InvalidConfigError) as excinfo:
            EvoNFConfig(strategy="lamarckian")
        assert excinfo.value.field == "strategy"
        with pytest.raises(InvalidConfigError):
            EvoNFConfig(fixed_operators=("min", "max"))
        assert EvoNFConfig(ea=EAConfig(mutation_sigma={"mf": 0.3})).ea.mutation_sigma["rules"] == DEFAULT_SIGMAS["rules"]

    def test_multi_target_rejected(self):
        """Test that fuzzy runs need a single target."""
        ds = Dataset(np.zeros((4, 1)), np.zeros((4, 2)))

        with pytest.raises(InvalidInputError):
            evonf_run(EvoNFConfig(), ds, ds, None)

    def test_small_run(self, splits):
        """Test the record of a two-generation run."""
        cfg = EvoNFConfig(ea=EAConfig(population_size=4, generations=2, crossover_rate=0.5, seed=3), epochs_max=3)
        record = evonf_run(cfg, *splits, name="tiny")

        assert record.task == "evonf"
        assert len(record.history) == 3
        assert record.train_rmse is not None
        assert 1 <= record.extra["rules_active"] <= 4
        assert record.extra["strategy"] == "full_hybrid"
        assert record.model["system"]["kind"] in ("takagi_sugeno", "mamdani")

    def test_seeded_run_never_worse_than_the_grid(self, splits):
        """Test that the grid seed bounds the best fitness of a run."""
        cfg = EvoNFConfig(ea=EAConfig(population_size=4, generations=1, seed=3), epochs_max=3,
                          fixed_kind="takagi_sugeno", seed_grid=True)
        codec = cfg.codec(*data_universes(*splits))
        grid = evonf_fitness(grid_genome(codec, RngStream.derive(3, "grid")), splits[0], splits[1], codec)
        record = evonf_run(cfg, *splits)

        assert record.extra["best_fitness"] <= grid
        assert not EvoNFConfig().seed_grid
