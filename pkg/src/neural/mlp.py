#!/usr/bin/env python3
"""
Feedforward networks for HybridCI
Layered networks with per-layer transfer functions, the sum-of-squares error,
backpropagation gradients and the residual Jacobian used by Levenberg-Marquardt.

Parameter flattening order (frozen, the MLEANN genome depends on it): layer by
layer, each weight matrix row-major, where row j holds neuron j's input weights
followed by its bias in the last column.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np

from src.core.datasets import Dataset
from src.core.errors import InvalidInputError
from src.core.numeric import RngStream

logger = logging.getLogger(__name__)


class TransferFn(Enum):
    """Node transfer functions; every kind has a closed-form derivative."""

    SIGMOID = "sigmoid"
    TANH = "tanh"
    GAUSSIAN = "gaussian"
    LINEAR = "linear"

    def apply(self, z):
        if self is TransferFn.SIGMOID:
            return 0.5 * (1.0 + np.tanh(0.5 * z))
        if self is TransferFn.TANH:
            return np.tanh(z)
        if self is TransferFn.GAUSSIAN:
            return np.exp(-z * z)
        return z

    def derivative(self, z, activation):
        """Derivative at pre-activation z, given activation = apply(z)."""
        if self is TransferFn.SIGMOID:
            return activation * (1.0 - activation)
        if self is TransferFn.TANH:
            return 1.0 - activation * activation
        if self is TransferFn.GAUSSIAN:
            return -2.0 * z * activation
        return np.ones_like(z)


@dataclass(frozen=True)
class MLPNetwork:
    """
    Immutable feedforward network.

    Attributes:
        layer_sizes (tuple): (d, hidden..., m)
        weights (tuple): One matrix per layer, shape (out, in + 1), bias column last
        transfer (tuple): One TransferFn per hidden layer; the output layer is linear
    """

    layer_sizes: Tuple[int, ...]
    weights: Tuple[np.ndarray, ...]
    transfer: Tuple[TransferFn, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise InvalidInputError(f"layer sizes must be >= 2 positive counts, got {sizes}")
        if len(self.weights) != len(sizes) - 1:
            raise InvalidInputError(f"expected {len(sizes) - 1} weight matrices, got {len(self.weights)}")
        transfer = tuple(TransferFn(t) for t in self.transfer)
        if len(transfer) != len(sizes) - 2:
            raise InvalidInputError(f"expected {len(sizes) - 2} hidden transfer functions, got {len(transfer)}")

        weights = []
        for index, matrix in enumerate(self.weights):
            matrix = np.array(matrix, dtype=np.float64)
            expected = (sizes[index + 1], sizes[index] + 1)
            if matrix.shape != expected:
                raise InvalidInputError(f"layer {index} weights have shape {matrix.shape}, expected {expected}")
            if not np.all(np.isfinite(matrix)):
                raise InvalidInputError(f"layer {index} weights contain non-finite entries")
            matrix.setflags(write=False)
            weights.append(matrix)

        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", tuple(weights))
        object.__setattr__(self, "transfer", transfer)

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def n_outputs(self):
        return self.layer_sizes[-1]

    @property
    def parameter_count(self):
        return sum(w.size for w in self.weights)

    def flatten(self):
        """All weights as one vector in the documented flattening order."""
        return np.concatenate([w.ravel() for w in self.weights])

    def with_params(self, params):
        """Return a network of the same shape carrying the given flat parameters."""
        params = np.asarray(params, dtype=np.float64).reshape(-1)
        if params.size != self.parameter_count:
            raise InvalidInputError(f"expected {self.parameter_count} parameters, got {params.size}")
        weights = []
        offset = 0
        for w in self.weights:
            weights.append(params[offset:offset + w.size].reshape(w.shape))
            offset += w.size
        return MLPNetwork(self.layer_sizes, tuple(weights), self.transfer)

    @classmethod
    def zeros(cls, layer_sizes: Sequence[int], transfer: Sequence[TransferFn]):
        sizes = tuple(int(s) for s in layer_sizes)
        weights = tuple(np.zeros((sizes[i + 1], sizes[i] + 1)) for i in range(len(sizes) - 1))
        return cls(sizes, weights, tuple(transfer))

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], transfer: Sequence[TransferFn], stream: RngStream, scale=0.5):
        """Random network with weights uniform in [-scale, scale]."""
        template = cls.zeros(layer_sizes, transfer)
        params = stream.generator().uniform(-scale, scale, template.parameter_count)
        return template.with_params(params)

    def to_dict(self):
        return {
            "layer_sizes": list(self.layer_sizes),
            "transfer": [t.value for t in self.transfer],
            "weights": [w.tolist() for w in self.weights],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["layer_sizes"]),
                   tuple(np.array(w, dtype=np.float64) for w in data["weights"]),
                   tuple(TransferFn(t) for t in data["transfer"]))


def _with_bias(activations):
    return np.hstack([activations, np.ones((activations.shape[0], 1))])


def _forward_pass(net: MLPNetwork, inputs):
    """Batch forward pass; returns (activations per layer, pre-activations per layer)."""
    activations = [inputs]
    pre_activations = []
    last = len(net.weights) - 1
    for index, w in enumerate(net.weights):
        z = _with_bias(activations[-1]) @ w.T
        pre_activations.append(z)
        activations.append(z if index == last else net.transfer[index].apply(z))
    return activations, pre_activations


def _check_dataset(net: MLPNetwork, ds: Dataset):
    if ds.n_inputs != net.n_inputs or ds.n_targets != net.n_outputs:
        raise InvalidInputError(
            f"dataset is {ds.n_inputs}->{ds.n_targets} but network is {net.n_inputs}->{net.n_outputs}")


def forward(net: MLPNetwork, x):
    """
    Evaluate the network on one input vector.

    Raises:
        InvalidInputError: If len(x) differs from the input width
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != net.n_inputs:
        raise InvalidInputError(f"input has length {x.size}, network expects {net.n_inputs}")
    return predict(net, x.reshape(1, -1))[0]


def predict(net: MLPNetwork, inputs):
    """Evaluate the network on every row of an n x d input matrix."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != net.n_inputs:
        raise InvalidInputError(f"inputs must be n x {net.n_inputs}, got shape {inputs.shape}")
    activations, _ = _forward_pass(net, inputs)
    return activations[-1]


def residuals(net: MLPNetwork, ds: Dataset):
    """Residual vector y - t ordered row-major over (sample, output)."""
    _check_dataset(net, ds)
    return (predict(net, ds.inputs) - ds.targets).ravel()


def sse(net: MLPNetwork, ds: Dataset):
    """Sum of squared residuals over all rows and outputs."""
    r = residuals(net, ds)
    return float(r @ r)


def _layer_deltas(net, activations, pre_activations, output_delta):
    """Backpropagate an output-layer delta; returns the delta of every layer."""
    deltas = [output_delta]
    for index in range(len(net.weights) - 1, 0, -1):
        back = deltas[0] @ net.weights[index][:, :-1]
        hidden = index - 1
        deltas.insert(0, back * net.transfer[hidden].derivative(pre_activations[hidden], activations[index]))
    return deltas


def gradient(net: MLPNetwork, ds: Dataset):
    """
    Analytic gradient of sse with respect to the flattened parameters.

    Returns:
        numpy.ndarray: Vector of length parameter_count
    """
    _check_dataset(net, ds)
    activations, pre_activations = _forward_pass(net, ds.inputs)
    output_delta = 2.0 * (activations[-1] - ds.targets)
    deltas = _layer_deltas(net, activations, pre_activations, output_delta)
    return np.concatenate([(delta.T @ _with_bias(a)).ravel() for delta, a in zip(deltas, activations)])


def jacobian(net: MLPNetwork, ds: Dataset):
    """
    Jacobian of the residual vector with respect to the flattened parameters.

    Returns:
        numpy.ndarray: (n * m) x parameter_count matrix; row n_i * m + k belongs to
        sample i, output k
    """
    _check_dataset(net, ds)
    activations, pre_activations = _forward_pass(net, ds.inputs)
    n, m = ds.n_rows, net.n_outputs
    J = np.empty((n, m, net.parameter_count))
    for k in range(m):
        output_delta = np.zeros((n, m))
        output_delta[:, k] = 1.0
        deltas = _layer_deltas(net, activations, pre_activations, output_delta)
        blocks = [np.einsum("no,ni->noi", delta, _with_bias(a)).reshape(n, -1)
                  for delta, a in zip(deltas, activations)]
        J[:, k, :] = np.hstack(blocks)
    return J.reshape(n * m, net.parameter_count)
