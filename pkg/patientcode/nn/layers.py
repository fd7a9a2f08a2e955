"""Dense layers with analytic forward and backward passes.

Inputs are either a single vector of shape (in,) or a batch of shape
(batch, in). Backward sums parameter gradients over the batch; any averaging
belongs to the loss.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from patientcode.errors import ShapeError


class Activation(str, Enum):
    LINEAR = "linear"
    RELU = "relu"
    TANH = "tanh"

    @property
    def tag(self) -> int:
        return _ACTIVATION_TAGS[self]

    @classmethod
    def from_tag(cls, tag: int) -> "Activation":
        for activation, value in _ACTIVATION_TAGS.items():
            if value == tag:
                return activation
        raise ShapeError(f"unknown activation tag {tag}")


_ACTIVATION_TAGS = {Activation.LINEAR: 0, Activation.RELU: 1, Activation.TANH: 2}


def activate(activation: Activation, z: np.ndarray) -> np.ndarray:
    if activation is Activation.RELU:
        return np.maximum(z, 0)
    if activation is Activation.TANH:
        return np.tanh(z)
    return z


def activation_grad(activation: Activation, z: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Derivative of the activation at pre-activation z (out = activation(z))."""
    if activation is Activation.RELU:
        return (z > 0).astype(z.dtype)
    if activation is Activation.TANH:
        return 1 - out * out
    return np.ones_like(z)


@dataclass
class DenseLayer:
    """activation(W x + b) with W shaped (out, in)."""

    weight: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.LINEAR

    def __post_init__(self) -> None:
        self.weight = np.asarray(self.weight)
        self.bias = np.asarray(self.bias, dtype=self.weight.dtype)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"weight {self.weight.shape} and bias {self.bias.shape} are inconsistent")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ShapeError("layer parameters must be finite")
        self.activation = Activation(self.activation)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @classmethod
    def initialized(cls, in_dim: int, out_dim: int, activation: Activation,
                    rng: np.random.Generator, dtype=np.float32) -> "DenseLayer":
        """Fan-based uniform initialization, zero bias."""
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        weight = rng.uniform(-limit, limit, size=(out_dim, in_dim)).astype(dtype)
        return cls(weight, np.zeros(out_dim, dtype=dtype), activation)

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weight.copy(), self.bias.copy(), self.activation)


def _check_input(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=layer.weight.dtype)
    if x.ndim not in (1, 2) or x.shape[-1] != layer.in_dim:
        raise ShapeError(f"layer expects {layer.in_dim} inputs, got shape {x.shape}")
    return x


def pre_activation(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    x = _check_input(layer, x)
    return x @ layer.weight.T + layer.bias


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    """Return activation(W x + b) for a vector or a batch of row vectors."""
    return activate(layer.activation, pre_activation(layer, x))


def dense_backward(layer: DenseLayer, x: np.ndarray, upstream_grad: np.ndarray,
                   z: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of activation(W x + b) given dL/d(output).

    Args:
        layer: The layer used in the forward pass.
        x: Forward input, (in,) or (batch, in).
        upstream_grad: dL/d(output), same leading shape as the output.
        z: Cached pre-activation; recomputed when omitted.

    Returns:
        (grad_W, grad_b, grad_x).
    """
    x = _check_input(layer, x)
    if z is None:
        z = pre_activation(layer, x)
    upstream_grad = np.asarray(upstream_grad, dtype=layer.weight.dtype)
    if upstream_grad.shape != z.shape:
        raise ShapeError(f"upstream gradient shape {upstream_grad.shape} does not match output {z.shape}")
    out = activate(layer.activation, z)
    dz = upstream_grad * activation_grad(layer.activation, z, out)
    if x.ndim == 1:
        grad_w = np.outer(dz, x)
        grad_b = dz
    else:
        grad_w = dz.T @ x
        grad_b = dz.sum(axis=0)
    grad_x = dz @ layer.weight
    return grad_w, grad_b, grad_x
