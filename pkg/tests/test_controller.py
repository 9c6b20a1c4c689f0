#!/usr/bin/env python3
"""
Test suite for the fuzzy controller of evolution parameters.
"""

import pytest

from src.core.errors import InvalidInputError
from src.evolution.controller import (CROSSOVER_BANDWIDTH, MUTATION_BANDWIDTH, NEUTRAL_INPUTS, OUTPUTS,
                                      ControllerInputs, ControllerOutputs, FuzzyController, apply_outputs,
                                      controller_inputs, controller_step, default_controller, scale_outputs)
from src.evolution.engine import Adapter, EAConfig, GenerationStats, Genome, GenomeLayout, evolve, sphere


def stats(best, average, worst, population=20, mutation=0.1, crossover=0.5):
    return GenerationStats(1, best, average, worst, population, mutation, crossover)


class TestControllerInputs:
    """Test the crisp inputs derived from generation statistics."""

    def test_ratios_and_delta(self):
        """Test avg/best, worst/avg and the relative change of the best."""
        inputs = controller_inputs(stats(2.0, 3.0, 6.0), prev_best=4.0)

        assert inputs.avg_over_best == pytest.approx(1.5)
        assert inputs.worst_over_avg == pytest.approx(2.0)
        assert inputs.delta_best == pytest.approx(-0.5)

    def test_degenerate_statistics_are_neutral(self):
        """Test that a zero best fitness gives the neutral inputs."""
        inputs = controller_inputs(stats(0.0, 1.0, 2.0), prev_best=1.0)

        assert (inputs.avg_over_best, inputs.worst_over_avg, inputs.delta_best) == NEUTRAL_INPUTS

    def test_first_generation_has_neutral_delta(self):
        """Test that without a previous best the delta is neutral."""
        assert controller_inputs(stats(1.0, 1.2, 2.0), None).delta_best == NEUTRAL_INPUTS[2]


class TestControllerOutputs:
    """Test the shipped rule bases."""

    def test_outputs_within_bandwidths(self):
        """Test clamping over a spread of statistics."""
        for best, average, worst, previous in [(1.0, 1.0, 1.0, 1.0), (1.0, 2.5, 9.0, 10.0),
                                               (1.0, 1.9, 2.0, 1.0), (5.0, 5.5, 6.0, None)]:
            out = controller_step(stats(best, average, worst), previous)
            assert abs(out.delta_pop) <= int(0.2 * 20)
            assert abs(out.delta_crossover) <= CROSSOVER_BANDWIDTH + 1e-12
            assert abs(out.delta_mutation) <= MUTATION_BANDWIDTH + 1e-12

    def test_converged_population_raises_mutation(self):
        """Test that average close to best asks for more mutation."""
        out = controller_step(stats(1.0, 1.0, 1.1), 1.0)

        assert out.delta_mutation > 0

    def test_spread_population_lowers_mutation(self):
        """Test that average far above best asks for less mutation."""
        out = controller_step(stats(1.0, 2.0, 2.2), 1.0)

        assert out.delta_mutation < 0

    def test_fast_improvement_shrinks_population(self):
        """Test that a large drop of the best fitness shrinks the population."""
        out = controller_step(stats(1.0, 1.5, 2.0), 100.0)

        assert out.delta_pop < 0

    def test_worst_far_from_average_raises_crossover(self):
        """Test the crossover rule base at both ends."""
        assert controller_step(stats(1.0, 1.5, 4.5), 1.0).delta_crossover > 0
        assert controller_step(stats(1.0, 1.5, 1.5), 1.0).delta_crossover < 0

    def test_default_controller_is_shared(self):
        """Test that the shipped controller is built once."""
        assert default_controller() is default_controller()

    def test_rule_base_override(self):
        """Test overriding one output and rejecting unknown ones."""
        shipped = FuzzyController()
        controller = FuzzyController.from_dict({"mutation": shipped.to_dict()["crossover"]})

        assert set(controller.rule_bases) == {"population", "crossover", "mutation"}
        with pytest.raises(InvalidInputError):
            FuzzyController({"selection": shipped.rule_bases["mutation"]})

    def test_batch_outputs_match_single_rows(self):
        """Test that the matrix form agrees row by row and clips out-of-universe inputs."""
        controller = default_controller()
        rows = [[1.0, 1.0, 0.0], [1.5, 2.0, -0.5], [1.9, 2.8, -0.9], [5.0, 9.0, -4.0]]
        batch = controller.raw_output_matrix(rows)

        assert batch.shape == (4, 3)
        for row, values in zip(rows, batch):
            single = controller.raw_outputs(ControllerInputs(*row))
            assert [single[name] for name in OUTPUTS] == pytest.approx(list(values), abs=1e-12)
        assert list(batch[3]) == pytest.approx(list(controller.raw_output_matrix([[2.0, 3.0, -1.0]])[0]))

    def test_batch_outputs_need_three_columns(self):
        """Test the input shape check."""
        with pytest.raises(InvalidInputError):
            default_controller().raw_output_matrix([[1.0, 2.0]])

    def test_scaling_at_the_extremes(self):
        """Test full-scale raw outputs against the bandwidths."""
        out = scale_outputs({"population": 1.0, "crossover": -1.0, "mutation": 1.0}, 23)

        assert out == ControllerOutputs(4, -CROSSOVER_BANDWIDTH, MUTATION_BANDWIDTH)
        assert scale_outputs({"population": -1.0, "crossover": 0.0, "mutation": 0.0}, 3).delta_pop == 0


class TestApplyOutputs:
    """Test applying controller changes to a configuration."""

    def test_clamping(self):
        """Test population and rate clamps."""
        cfg = EAConfig(population_size=4, elitism=1, mutation_rate=0.98, crossover_rate=0.02, max_population=6)

        grown = apply_outputs(cfg, ControllerOutputs(10, -0.1, 0.05))
        assert grown.population_size == 6
        assert grown.mutation_rate == 1.0
        assert grown.crossover_rate == 0.0

        shrunk = apply_outputs(cfg, ControllerOutputs(-10, 0.0, 0.0))
        assert shrunk.population_size == 3

    def test_controlled_evolution_runs(self):
        """Test an evolution run with the controller adapting its settings."""
        layout = GenomeLayout.build([("x", [-5.0] * 3, [5.0] * 3)])
        cfg = EAConfig(population_size=10, generations=6, crossover_rate=0.5, seed=2,
                       adapter=Adapter.FUZZY_CONTROLLER)
        result = evolve(lambda s: Genome.random(layout, s), sphere, cfg)

        assert len(result.history) == 7
        assert result.final_config.max_population == 40
        assert all(3 <= s.population_size <= 40 for s in result.history)
        assert any(s.mutation_rate != 0.1 or s.crossover_rate != 0.5 for s in result.history[1:])
