"""Fixed-topology dense stacks and the MBLX checkpoint format.

Checkpoint layout (little-endian):

    b"MBLX"                      magic
    uint16                       format version
    uint32                       layer count
    per layer: uint32 in, uint32 out, uint8 activation tag
    per layer: weight (out x in, row-major) then bias, float32
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from patientcode.errors import ParseError, ShapeError
from patientcode.nn.layers import Activation, DenseLayer, activate, dense_backward, pre_activation

MAGIC = b"MBLX"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHI")
_LAYER = struct.Struct("<IIB")

# (layer input, pre-activation, output) per layer
Cache = List[Tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass
class DenseNetwork:
    """A chain of dense layers."""

    layers: List[DenseLayer] = field(default_factory=list)

    def __post_init__(self) -> None:
        for before, after in zip(self.layers, self.layers[1:]):
            if before.out_dim != after.in_dim:
                raise ShapeError(f"layer output {before.out_dim} does not feed layer input {after.in_dim}")

    @classmethod
    def build(cls, sizes: Sequence[int], activations: Sequence[Activation], seed: int,
              dtype=np.float32) -> "DenseNetwork":
        """Initialize len(sizes) - 1 layers from a seeded generator."""
        if len(activations) != len(sizes) - 1:
            raise ShapeError("need one activation per layer")
        rng = np.random.default_rng(seed)
        return cls([
            DenseLayer.initialized(n_in, n_out, act, rng, dtype)
            for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations)
        ])

    @property
    def sizes(self) -> List[int]:
        if not self.layers:
            return []
        return [self.layers[0].in_dim] + [layer.out_dim for layer in self.layers]

    @property
    def dtype(self):
        return self.layers[0].weight.dtype

    def parameters(self) -> List[np.ndarray]:
        """Weights and biases in layer order; the arrays are the live parameters."""
        params = []
        for layer in self.layers:
            params.extend((layer.weight, layer.bias))
        return params

    def forward(self, x: np.ndarray, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        """Run layers[start:stop] on x."""
        for layer in self.layers[start:stop]:
            x = activate(layer.activation, pre_activation(layer, x))
        return x

    def forward_cached(self, x: np.ndarray) -> Tuple[np.ndarray, Cache]:
        cache = []
        for layer in self.layers:
            z = pre_activation(layer, x)
            out = activate(layer.activation, z)
            cache.append((np.asarray(x, dtype=layer.weight.dtype), z, out))
            x = out
        return x, cache

    def backward(self, cache: Cache, upstream_grad: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """Backpropagate dL/d(output) through the cached forward pass.

        Returns:
            (gradients aligned with parameters(), dL/d(input)).
        """
        grads: List[np.ndarray] = []
        grad = upstream_grad
        for layer, (x, z, _) in zip(reversed(self.layers), reversed(cache)):
            grad_w, grad_b, grad = dense_backward(layer, x, grad, z)
            grads[:0] = [grad_w, grad_b]
        return grads, grad

    def copy(self) -> "DenseNetwork":
        return DenseNetwork([layer.copy() for layer in self.layers])


def save_checkpoint(path: Path, network: DenseNetwork) -> Path:
    """Write a network in the MBLX format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        handle.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(network.layers)))
        for layer in network.layers:
            handle.write(_LAYER.pack(layer.in_dim, layer.out_dim, layer.activation.tag))
        for layer in network.layers:
            handle.write(np.ascontiguousarray(layer.weight, dtype="<f4").tobytes())
            handle.write(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
    return path


def load_checkpoint(path: Path) -> DenseNetwork:
    """Read an MBLX checkpoint; parameters come back as float32.

    Raises:
        ParseError: Bad magic, unsupported version or truncated file.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ParseError(1, f"{path}: truncated checkpoint header")
    magic, version, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ParseError(1, f"{path}: not an MBLX checkpoint")
    if version != FORMAT_VERSION:
        raise ParseError(1, f"{path}: unsupported checkpoint version {version}")
    offset = _HEADER.size
    shapes = []
    for _ in range(count):
        if offset + _LAYER.size > len(data):
            raise ParseError(1, f"{path}: truncated layer table")
        n_in, n_out, tag = _LAYER.unpack_from(data, offset)
        shapes.append((n_in, n_out, Activation.from_tag(tag)))
        offset += _LAYER.size
    layers = []
    for n_in, n_out, activation in shapes:
        n_weight = n_in * n_out
        needed = 4 * (n_weight + n_out)
        if offset + needed > len(data):
            raise ParseError(1, f"{path}: truncated parameter block")
        weight = np.frombuffer(data, dtype="<f4", count=n_weight, offset=offset).reshape(n_out, n_in)
        bias = np.frombuffer(data, dtype="<f4", count=n_out, offset=offset + 4 * n_weight)
        offset += needed
        layers.append(DenseLayer(weight.astype(np.float32), bias.astype(np.float32), activation))
    if offset != len(data):
        raise ParseError(1, f"{path}: {len(data) - offset} trailing byte(s)")
    return DenseNetwork(layers)
