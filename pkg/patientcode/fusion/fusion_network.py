"""Outer-product fusion network and 64-bit monograms.

The latents (u, v) are fused into the 128 x 128 outer product, flattened
row-major and passed through a tanh trunk:

    16384 -> 1024 -> 256 -> 64

The 64 tanh outputs are the real code; thresholding them gives the bits of
an 8 x 8 binary monogram, bit index = row * 8 + col, bit 0 least significant.
One parameter set serves the anchor, positive and negative branches.
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from patientcode.errors import DataError, ShapeError
from patientcode.latent.autoencoder import BOTTLENECK_SIZE
from patientcode.nn.layers import Activation
from patientcode.nn.network import Cache, DenseNetwork, load_checkpoint, save_checkpoint

TRUNK_SIZES = (1024, 256, 64)
CODE_BITS = 64
GRID = 8
CODE_CAPACITY = 2 ** CODE_BITS
BRANCHES = ("anchor", "positive", "negative")
_FORWARD_CHUNK = 256


class ThresholdMode(str, Enum):
    """Binarization threshold: 0 for tanh codes, 0.5 as the alternative rule."""

    ZERO = "zero"
    HALF = "half"

    @property
    def value_threshold(self) -> float:
        return 0.0 if self is ThresholdMode.ZERO else 0.5


@dataclass(frozen=True)
class Monogram:
    """An 8 x 8 binary code packed into 64 bits plus its real-valued companion."""

    bits: int
    real_code: np.ndarray

    def __post_init__(self) -> None:
        if not 0 <= self.bits < CODE_CAPACITY:
            raise ShapeError(f"monogram bits out of 64-bit range: {self.bits}")
        code = np.array(self.real_code, dtype=np.float64)
        if code.shape != (CODE_BITS,):
            raise ShapeError(f"real code must have length {CODE_BITS}, got {code.shape}")
        code.setflags(write=False)
        object.__setattr__(self, "real_code", code)

    @property
    def hex(self) -> str:
        return f"{self.bits:016X}"

    def matrix(self) -> np.ndarray:
        """The 8 x 8 bit grid, [row][col] = bit row * 8 + col."""
        return unpack_bits(self.bits).reshape(GRID, GRID)


def unpack_bits(word: int) -> np.ndarray:
    """64 bits of a word as uint8, bit 0 first."""
    raw = np.frombuffer(int(word).to_bytes(8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")


def outer_product(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """M[i][j] = u[i] * v[j]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise ShapeError(f"outer product needs two vectors of equal length, got {u.shape} and {v.shape}")
    return np.outer(u, v)


def batch_outer(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row-major flattened outer products of aligned (n, d) latent batches."""
    if u.shape != v.shape or u.ndim != 2:
        raise ShapeError(f"latent batches must share one (n, d) shape, got {u.shape} and {v.shape}")
    return (u[:, :, None] * v[:, None, :]).reshape(u.shape[0], -1)


def binarize(real_code: np.ndarray, threshold: float = 0.0) -> int:
    """Pack entries into a 64-bit word: bit i = 1 iff real_code[i] > threshold."""
    code = np.asarray(real_code)
    if code.shape != (CODE_BITS,):
        raise ShapeError(f"binarize needs {CODE_BITS} values, got {code.shape}")
    return int(binarize_batch(code[None], threshold)[0])


def binarize_batch(codes: np.ndarray, threshold: float = 0.0) -> np.ndarray:
    """Vectorized binarize over rows of an (n, 64) array; returns uint64 words."""
    codes = np.asarray(codes)
    bits = (codes > threshold).astype(np.uint8)
    packed = np.packbits(bits, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").reshape(-1).astype(np.uint64)


@dataclass
class FusionNetwork:
    """Shared-weight fusion trunk Q."""

    network: DenseNetwork
    threshold: ThresholdMode = ThresholdMode.ZERO

    @classmethod
    def build(cls, latent_dim: int = BOTTLENECK_SIZE, seed: int = 0, dtype=np.float32,
              threshold: ThresholdMode = ThresholdMode.ZERO) -> "FusionNetwork":
        sizes = [latent_dim * latent_dim, *TRUNK_SIZES]
        activations = [Activation.TANH] * len(TRUNK_SIZES)
        return cls(DenseNetwork.build(sizes, activations, seed, dtype), ThresholdMode(threshold))

    @property
    def latent_dim(self) -> int:
        return int(round(np.sqrt(self.network.layers[0].in_dim)))

    @property
    def layer_sizes(self) -> List[int]:
        return self.network.sizes

    def codes(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Real codes for aligned (n, d) latent batches, computed in chunks."""
        u = np.atleast_2d(np.asarray(u, dtype=np.float64))
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        if u.shape[1] != self.latent_dim:
            raise ShapeError(f"fusion network expects latents of length {self.latent_dim}, got {u.shape[1]}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise DataError("latents must be finite")
        out = np.empty((u.shape[0], CODE_BITS), dtype=np.float64)
        for start in range(0, u.shape[0], _FORWARD_CHUNK):
            stop = start + _FORWARD_CHUNK
            out[start:stop] = self.network.forward(batch_outer(u[start:stop], v[start:stop]))
        return out

    def forward_cached(self, u: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, Cache]:
        return self.network.forward_cached(batch_outer(u, v))

    def branches(self, anchor: Tuple[np.ndarray, np.ndarray], positive: Tuple[np.ndarray, np.ndarray],
                 negative: Tuple[np.ndarray, np.ndarray]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Run the three logical branches; all use this network's single parameter set."""
        return tuple(self.codes(*pair)[0] for pair in (anchor, positive, negative))

    def save(self, path: Path) -> Path:
        return save_checkpoint(path, self.network)

    @classmethod
    def load(cls, path: Path, threshold: ThresholdMode = ThresholdMode.ZERO) -> "FusionNetwork":
        network = load_checkpoint(path)
        if network.sizes[1:] != list(TRUNK_SIZES):
            raise DataError(f"{path}: checkpoint is not a fusion trunk")
        return cls(network, ThresholdMode(threshold))


def fusion_forward(q: FusionNetwork, u: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, Monogram]:
    """Outer product, flatten, trunk; returns the real code and its monogram.

    Raises:
        DataError: Non-finite latents.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != (q.latent_dim,) or v.shape != (q.latent_dim,):
        raise ShapeError(f"fusion network expects two latents of length {q.latent_dim}, got {u.shape} and {v.shape}")
    real_code = q.codes(u[None], v[None])[0]
    return real_code, Monogram(binarize(real_code, q.threshold.value_threshold), real_code)


def generate_monogram(q: FusionNetwork, u: np.ndarray, v: np.ndarray) -> Monogram:
    """monogram = Q({u, v}), keeping both the real code and the bits."""
    return fusion_forward(q, u, v)[1]


def generate_monograms(q: FusionNetwork, u: np.ndarray, v: np.ndarray) -> List[Monogram]:
    """Batch form of generate_monogram for aligned latent arrays."""
    codes = q.codes(u, v)
    words = binarize_batch(codes, q.threshold.value_threshold)
    return [Monogram(int(word), code) for word, code in zip(words, codes)]


def monogram_bits_matrix(monograms: Sequence[Monogram]) -> np.ndarray:
    """(n, 64) 0/1 matrix of monogram bits, bit 0 first."""
    if not monograms:
        return np.zeros((0, CODE_BITS), dtype=np.uint8)
    return np.stack([unpack_bits(m.bits) for m in monograms])
