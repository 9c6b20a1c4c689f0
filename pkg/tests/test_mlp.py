#!/usr/bin/env python3
"""
Test suite for feedforward networks.
Tests construction, forward evaluation, flattening and analytic derivatives.
"""

import numpy as np
import pytest

from src.core.datasets import Dataset
from src.core.errors import InvalidInputError
from src.core.numeric import RngStream, finite_diff_gradient
from src.neural import mlp
from src.neural.mlp import MLPNetwork, TransferFn


@pytest.fixture
def network():
    """A 2 -> 3 -> 2 -> 1 network with mixed transfer functions."""
    return MLPNetwork.initialize((2, 3, 2, 1), (TransferFn.TANH, TransferFn.SIGMOID), RngStream.derive(1, "net"))


class TestConstruction:
    """Test network validation and parameter handling."""

    def test_parameter_count(self, network):
        """Test (d+1)*h1 + (h1+1)*h2 + (h2+1)*m."""
        assert network.parameter_count == 3 * 3 + 4 * 2 + 3 * 1
        assert network.flatten().shape == (20,)

    def test_wrong_weight_shape(self):
        """Test that weight shapes must follow the layer sizes."""
        with pytest.raises(InvalidInputError, match="shape"):
            MLPNetwork((2, 1), (np.zeros((1, 2)),), ())

    def test_transfer_count(self):
        """Test one transfer function per hidden layer."""
        with pytest.raises(InvalidInputError):
            MLPNetwork.zeros((2, 3, 1), ())

    def test_flatten_order_is_row_major_with_bias_last(self):
        """Test the documented flattening order."""
        net = MLPNetwork((1, 2, 1), (np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0, 6.0, 7.0]])),
                         (TransferFn.LINEAR,))

        np.testing.assert_array_equal(net.flatten(), [1, 2, 3, 4, 5, 6, 7])

    def test_with_params_round_trip(self, network):
        """Test that with_params(flatten()) rebuilds the same weights."""
        rebuilt = network.with_params(network.flatten())

        for a, b in zip(rebuilt.weights, network.weights):
            np.testing.assert_array_equal(a, b)
        with pytest.raises(InvalidInputError):
            network.with_params(np.zeros(3))

    def test_initialize_is_seeded(self):
        """Test that the same stream gives the same weights within the scale."""
        a = MLPNetwork.initialize((3, 4, 1), (TransferFn.TANH,), RngStream.derive(9, "net"), scale=0.3)
        b = MLPNetwork.initialize((3, 4, 1), (TransferFn.TANH,), RngStream.derive(9, "net"), scale=0.3)

        np.testing.assert_array_equal(a.flatten(), b.flatten())
        assert np.all(np.abs(a.flatten()) <= 0.3)

    def test_dict_round_trip(self, network):
        """Test serialization to plain values and back."""
        restored = MLPNetwork.from_dict(network.to_dict())

        assert restored.layer_sizes == network.layer_sizes
        assert restored.transfer == network.transfer
        np.testing.assert_array_equal(restored.flatten(), network.flatten())


class TestEvaluation:
    """Test forward passes."""

    def test_hand_computed_forward(self):
        """Test a tiny network against a hand calculation."""
        net = MLPNetwork((1, 1, 1), (np.array([[2.0, -1.0]]), np.array([[3.0, 0.5]])), (TransferFn.TANH,))

        assert mlp.forward(net, [1.0])[0] == pytest.approx(3.0 * np.tanh(1.0) + 0.5)

    def test_transfer_functions(self):
        """Test the transfer function values."""
        z = np.array([0.0])
        assert TransferFn.SIGMOID.apply(z)[0] == 0.5
        assert TransferFn.TANH.apply(z)[0] == 0.0
        assert TransferFn.GAUSSIAN.apply(z)[0] == 1.0
        assert TransferFn.LINEAR.apply(np.array([2.5]))[0] == 2.5

    def test_forward_input_width(self, network):
        """Test that the input length is checked."""
        with pytest.raises(InvalidInputError):
            mlp.forward(network, [1.0, 2.0, 3.0])

    def test_predict_matches_forward(self, network):
        """Test that batch prediction equals row-wise evaluation."""
        inputs = np.array([[0.1, 0.2], [0.5, -0.3], [1.0, 1.0]])
        batch = mlp.predict(network, inputs)

        for row, expected in zip(inputs, batch):
            np.testing.assert_allclose(mlp.forward(network, row), expected)

    def test_sse_of_perfect_fit(self):
        """Test that a network reproducing its targets has zero error."""
        net = MLPNetwork((1, 1), (np.array([[2.0, 1.0]]),), ())
        ds = Dataset(np.array([[0.0], [1.0]]), np.array([[1.0], [3.0]]))

        assert mlp.sse(net, ds) == 0.0


class TestDerivatives:
    """Test analytic gradients and Jacobians against finite differences."""

    @pytest.mark.parametrize("transfer", [TransferFn.SIGMOID, TransferFn.TANH, TransferFn.GAUSSIAN])
    def test_gradient_matches_finite_differences(self, transfer, linear_dataset):
        """Test the backpropagated gradient for every transfer function."""
        net = MLPNetwork.initialize((2, 3, 1), (transfer,), RngStream.derive(4, transfer.value))
        numeric = finite_diff_gradient(lambda w: mlp.sse(net.with_params(w), linear_dataset), net.flatten())

        np.testing.assert_allclose(mlp.gradient(net, linear_dataset), numeric, rtol=1e-5, atol=1e-6)

    def test_jacobian_matches_finite_differences(self):
        """Test the residual Jacobian of a two-output network."""
        net = MLPNetwork.initialize((2, 3, 2), (TransferFn.TANH,), RngStream.derive(2, "jac"))
        ds = Dataset(np.array([[0.1, 0.9], [0.4, 0.2], [0.7, 0.5]]), np.array([[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]]))
        J = mlp.jacobian(net, ds)

        assert J.shape == (6, net.parameter_count)
        w = net.flatten()
        for k in range(6):
            numeric = finite_diff_gradient(lambda v: mlp.residuals(net.with_params(v), ds)[k], w)
            np.testing.assert_allclose(J[k], numeric, rtol=1e-5, atol=1e-7)

    def test_gradient_is_jacobian_times_residuals(self, network, linear_dataset):
        """Test grad sse = 2 J^T r."""
        r = mlp.residuals(network, linear_dataset)
        J = mlp.jacobian(network, linear_dataset)

        np.testing.assert_allclose(mlp.gradient(network, linear_dataset), 2.0 * J.T @ r, atol=1e-10)

    def test_dataset_width_checked(self, network, sine_dataset):
        """Test that datasets of the wrong width are rejected."""
        with pytest.raises(InvalidInputError):
            mlp.gradient(network, sine_dataset)
