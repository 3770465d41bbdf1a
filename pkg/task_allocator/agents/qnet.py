"""
Feed-forward Q-network: rectifier hidden layers, identity output, one output per task or idle location.

Weights are stored as (fan_out, fan_in) matrices so a batch of row vectors X maps to X @ W.T + b.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple
import numpy as np
from ..utils.errors import ContractViolation


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


@dataclass
class QNet:
    layer_dims: Tuple[int, ...]
    weights: List[np.ndarray] = field(repr=False)
    biases: List[np.ndarray] = field(repr=False)

    @classmethod
    def initialize(cls, layer_dims: Sequence[int], rng: np.random.Generator) -> "QNet":
        """Uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases"""
        dims = tuple(int(d) for d in layer_dims)
        if len(dims) < 2 or min(dims) < 1:
            raise ContractViolation("A Q-network needs at least an input and an output layer of positive width", dims)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(dims, weights, biases)

    @classmethod
    def zeros(cls, layer_dims: Sequence[int]) -> "QNet":
        dims = tuple(int(d) for d in layer_dims)
        return cls(
            dims,
            [np.zeros((fan_out, fan_in)) for fan_in, fan_out in zip(dims[:-1], dims[1:])],
            [np.zeros(fan_out) for fan_out in dims[1:]],
        )

    @property
    def input_width(self) -> int:
        return self.layer_dims[0]

    @property
    def output_width(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "QNet":
        return QNet(self.layer_dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def load_parameters_from(self, other: "QNet") -> None:
        """Overwrite this network's parameters with another network's (target sync)"""
        if other.layer_dims != self.layer_dims:
            raise ContractViolation("Cannot copy parameters between networks of different shapes", other.layer_dims)
        for mine, theirs in zip(self.weights + self.biases, other.weights + other.biases):
            np.copyto(mine, theirs)

    def parameters(self) -> List[np.ndarray]:
        return self.weights + self.biases


def forward_batch(net: QNet, features: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Forward a batch of feature rows.

    Returns:
        The (batch, outputs) Q-values and the cache needed by ``backprop``: the input followed by every
        layer's pre-activation.
    """
    x = np.atleast_2d(np.asarray(features, dtype=float))
    if x.shape[1] != net.input_width:
        raise ContractViolation(f"Expected {net.input_width} features, got {x.shape[1]}", x.shape)
    cache = [x]
    a = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        cache.append(z)
        a = z if i == last else relu(z)
    return a, cache


def forward(net: QNet, features: np.ndarray) -> np.ndarray:
    """Q-values of every action for a single encoded knowledge state"""
    features = np.asarray(features, dtype=float)
    if features.ndim != 1:
        raise ContractViolation("forward expects a single feature vector", features.shape)
    out, _ = forward_batch(net, features)
    return out[0]


def backprop(net: QNet, cache: List[np.ndarray], d_out: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Gradients of a scalar loss w.r.t. weights and biases, given dLoss/dOutput for the cached batch"""
    x, pre_activations = cache[0], cache[1:]
    grad_w: List[np.ndarray] = [np.empty(0)] * len(net.weights)
    grad_b: List[np.ndarray] = [np.empty(0)] * len(net.biases)
    delta = d_out
    for i in range(len(net.weights) - 1, -1, -1):
        inputs = x if i == 0 else relu(pre_activations[i - 1])
        grad_w[i] = delta.T @ inputs
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i]) * (pre_activations[i - 1] > 0)
    return grad_w, grad_b
