#!/usr/bin/env python3
"""
Test suite for the local-search trainers.
Tests configuration validation, monotone loss curves and divergence reporting.
"""

from unittest.mock import patch

import numpy as np
import pytest

from src.core.datasets import Dataset
from src.core.errors import InvalidConfigError, TrainingDivergedError
from src.core.numeric import RngStream
from src.neural import mlp
from src.neural.mlp import MLPNetwork, TransferFn
from src.neural.trainers import Algorithm, TrainerConfig, train


@pytest.fixture
def start_network():
    return MLPNetwork.initialize((2, 4, 1), (TransferFn.TANH,), RngStream.derive(11, "start"))


class TestTrainerConfig:
    """Test TrainerConfig validation."""

    def test_defaults(self):
        """Test default settings."""
        cfg = TrainerConfig()

        assert cfg.algorithm is Algorithm.BP
        assert cfg.epochs == 100

    def test_algorithm_from_string(self):
        """Test that algorithm names are accepted."""
        assert TrainerConfig(algorithm="LM").algorithm is Algorithm.LM

    @pytest.mark.parametrize("kwargs, field", [
        ({"epochs": 0}, "epochs"),
        ({"learning_rate": 0.0}, "learning_rate"),
        ({"momentum": 1.0}, "momentum"),
        ({"lm_factor": 1.0}, "lm_factor"),
        ({"tolerance": -1.0}, "tolerance"),
    ])
    def test_invalid_values_name_their_field(self, kwargs, field):
        """Test that each invalid setting raises with its field name."""
        with pytest.raises(InvalidConfigError) as excinfo:
            TrainerConfig(**kwargs)
        assert excinfo.value.field == field

    def test_to_dict(self):
        """Test the plain-value form used in run records."""
        assert TrainerConfig(algorithm=Algorithm.SCG).to_dict()["algorithm"] == "SCG"


class TestTraining:
    """Test that every algorithm reduces the error monotonically."""

    @pytest.mark.parametrize("algorithm", list(Algorithm))
    def test_loss_curve_is_non_increasing(self, algorithm, start_network, linear_dataset):
        """Test monotone curves and a real improvement for every algorithm."""
        cfg = TrainerConfig(algorithm=algorithm, epochs=30, learning_rate=0.05, momentum=0.5)
        report = train(start_network, linear_dataset, cfg)
        curve = np.array(report.loss_curve)

        assert curve[0] == pytest.approx(mlp.sse(start_network, linear_dataset))
        assert np.all(np.diff(curve) <= 0.0)
        assert report.final_loss < curve[0]
        assert report.final_loss == pytest.approx(mlp.sse(report.final_net, linear_dataset))
        assert 1 <= report.epochs_run <= 30

    def test_lm_fits_linear_target(self, linear_dataset):
        """Test that LM drives a linear network to the exact linear target."""
        net = MLPNetwork.zeros((2, 1), ())
        report = train(net, linear_dataset, TrainerConfig(algorithm=Algorithm.LM, epochs=50))

        assert report.final_loss < 1e-12
        np.testing.assert_allclose(report.final_net.weights[0], [[0.5, -0.25, 0.1]], atol=1e-6)

    def test_input_network_unchanged(self, start_network, linear_dataset):
        """Test that training leaves its starting network alone."""
        before = start_network.flatten().copy()
        train(start_network, linear_dataset, TrainerConfig(algorithm=Algorithm.QNA, epochs=5))

        np.testing.assert_array_equal(start_network.flatten(), before)

    def test_zero_initial_error(self):
        """Test that a perfect network returns immediately."""
        net = MLPNetwork((1, 1), (np.array([[1.0, 0.0]]),), ())
        ds = Dataset(np.array([[0.0], [1.0]]), np.array([[0.0], [1.0]]))
        report = train(net, ds, TrainerConfig())

        assert report.loss_curve == (0.0,)
        assert report.converged is True
        assert report.epochs_run == 0

    def test_deterministic(self, start_network, linear_dataset):
        """Test that identical inputs give identical curves."""
        cfg = TrainerConfig(algorithm=Algorithm.SCG, epochs=15)

        assert train(start_network, linear_dataset, cfg).loss_curve == \
            train(start_network, linear_dataset, cfg).loss_curve

    def test_lm_fits_linear_target_in_three_epochs(self, linear_dataset):
        """Test that LM solves a problem linear in the weights within three epochs."""
        report = train(MLPNetwork.zeros((2, 1), ()), linear_dataset, TrainerConfig(algorithm=Algorithm.LM, epochs=3))

        assert report.epochs_run <= 3
        assert report.final_loss < 1e-12


XOR = Dataset(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]), np.array([[0.0], [1.0], [1.0], [0.0]]))

LINEAR_SETTINGS = {
    Algorithm.BP: {"epochs": 3000, "learning_rate": 0.01, "momentum": 0.0},
    Algorithm.SCG: {"epochs": 200},
    Algorithm.QNA: {"epochs": 200},
    Algorithm.LM: {"epochs": 200},
}


class TestAgreement:
    """Test the algorithms against each other on small fixed problems."""

    @pytest.mark.parametrize("algorithm", list(Algorithm))
    def test_xor_curves_non_increasing(self, algorithm):
        """Test monotone curves on XOR from twenty random starts."""
        cfg = TrainerConfig(algorithm=algorithm, epochs=50, learning_rate=0.1, momentum=0.5)
        for seed in range(20):
            net = MLPNetwork.initialize((2, 2, 1), (TransferFn.TANH,), RngStream.derive(seed, "xor"))
            report = train(net, XOR, cfg)
            curve = np.array(report.loss_curve)

            assert np.all(np.isfinite(curve)), f"seed {seed}"
            assert np.all(np.diff(curve) <= 0.0), f"seed {seed}"
            assert report.final_loss <= mlp.sse(net, XOR)

    @pytest.mark.parametrize("algorithm", list(Algorithm))
    def test_same_minimizer_when_linear_in_weights(self, algorithm, linear_dataset):
        """Test that every algorithm finds the unique least-squares weights of a linear network."""
        cfg = TrainerConfig(algorithm=algorithm, tolerance=1e-20, **LINEAR_SETTINGS[algorithm])
        report = train(MLPNetwork.zeros((2, 1), ()), linear_dataset, cfg)

        np.testing.assert_allclose(report.final_net.weights[0], [[0.5, -0.25, 0.1]], atol=1e-6)
        assert report.final_loss < 1e-10


class TestDivergence:
    """Test divergence reporting."""

    def test_non_finite_gradient_raises(self, start_network, linear_dataset):
        """Test that a NaN gradient raises with the last good network and partial curve."""
        bad = np.full(start_network.parameter_count, np.nan)
        with patch('src.neural.trainers.mlp.gradient', return_value=bad):
            with pytest.raises(TrainingDivergedError) as excinfo:
                train(start_network, linear_dataset, TrainerConfig(algorithm=Algorithm.BP, epochs=5))

        assert excinfo.value.network is not None
        assert len(excinfo.value.loss_curve) == 1
        assert np.isfinite(excinfo.value.loss_curve[0])

    def test_non_finite_initial_error_raises(self, start_network, linear_dataset):
        """Test that an infinite starting error is reported as divergence."""
        with patch('src.neural.trainers.mlp.sse', return_value=np.inf):
            with pytest.raises(TrainingDivergedError):
                train(start_network, linear_dataset, TrainerConfig())
