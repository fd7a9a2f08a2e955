"""Hybrid cross-modal autoencoders.

A_I reads the image embedding f and reconstructs the sequence embedding g;
A_S does the reverse. Their bottlenecks give the image-enriched latent u and
the sequence-enriched latent v:

    l -> 512 -> 256 -> 128 (bottleneck) -> 256 -> 512 -> l

Hidden layers use ReLU, the output layer is linear.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from patientcode.data.dataset import Dataset, Modality, check_identifier, read_dump, write_dump
from patientcode.errors import DataError, IngestionError, ShapeError, TrainingError
from patientcode.nn.layers import Activation
from patientcode.nn.losses import mse_loss
from patientcode.nn.network import DenseNetwork, load_checkpoint, save_checkpoint
from patientcode.nn.optim import AdamState, adam_step

logger = logging.getLogger(__name__)

ENCODER_SIZES = (512, 256)
BOTTLENECK_SIZE = 128
DECODER_SIZES = (256, 512)
ENCODER_DEPTH = len(ENCODER_SIZES) + 1
LATENT_U_TAG = "latent-u"
LATENT_V_TAG = "latent-v"


class Direction(str, Enum):
    IMAGE_TO_SEQ = "image-to-seq"
    SEQ_TO_IMAGE = "seq-to-image"


@dataclass(frozen=True)
class AutoencoderHyper:
    """Training settings for one hybrid autoencoder.

    batch_size None trains full-batch.
    """

    epochs: int
    learning_rate: float
    seed: int = 0
    batch_size: Optional[int] = None
    divergence_factor: float = 1e3


IMAGE_TO_SEQ_DEFAULTS = AutoencoderHyper(epochs=150, learning_rate=1e-5)
SEQ_TO_IMAGE_DEFAULTS = AutoencoderHyper(epochs=50, learning_rate=1e-4)


@dataclass
class TrainReport:
    """Per-epoch loss curve of one training run."""

    epochs: int
    learning_rate: float
    losses: List[float] = field(default_factory=list)

    @property
    def final_loss(self) -> Optional[float]:
        return self.losses[-1] if self.losses else None


@dataclass
class HybridAutoencoder:
    direction: Direction
    network: DenseNetwork

    @classmethod
    def build(cls, direction: Direction, input_dim: int, output_dim: int, seed: int = 0,
              dtype=np.float32) -> "HybridAutoencoder":
        sizes = [input_dim, *ENCODER_SIZES, BOTTLENECK_SIZE, *DECODER_SIZES, output_dim]
        activations = [Activation.RELU] * (len(sizes) - 2) + [Activation.LINEAR]
        return cls(Direction(direction), DenseNetwork.build(sizes, activations, seed, dtype))

    @property
    def layer_sizes(self) -> List[int]:
        return self.network.sizes

    def encode(self, x: np.ndarray) -> np.ndarray:
        return self.network.forward(x, stop=ENCODER_DEPTH)

    def decode(self, latent: np.ndarray) -> np.ndarray:
        return self.network.forward(latent, start=ENCODER_DEPTH)

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        return self.network.forward(x)

    def save(self, path: Path) -> Path:
        return save_checkpoint(path, self.network)

    @classmethod
    def load(cls, path: Path, direction: Direction) -> "HybridAutoencoder":
        network = load_checkpoint(path)
        if len(network.layers) != len(ENCODER_SIZES) + len(DECODER_SIZES) + 2:
            raise DataError(f"{path}: checkpoint is not a hybrid autoencoder")
        return cls(Direction(direction), network)


def _stack_pairs(pairs: Sequence[Tuple[np.ndarray, np.ndarray]]) -> Tuple[np.ndarray, np.ndarray]:
    if len(pairs) == 0:
        raise IngestionError("cannot train an autoencoder on zero pairs")
    f = np.stack([np.asarray(p[0], dtype=np.float64) for p in pairs])
    g = np.stack([np.asarray(p[1], dtype=np.float64) for p in pairs])
    return f, g


def train_hybrid(direction: Direction, pairs: Sequence[Tuple[np.ndarray, np.ndarray]],
                 hyper: AutoencoderHyper) -> Tuple[HybridAutoencoder, TrainReport]:
    """Train one hybrid autoencoder on scaled (f, g) pairs with MSE and Adam.

    ImageToSeq maps f to g, SeqToImage maps g to f.

    Raises:
        IngestionError: No pairs.
        TrainingError: The loss became non-finite or exceeded
            divergence_factor times its initial value.
    """
    direction = Direction(direction)
    f, g = _stack_pairs(pairs)
    inputs, targets = (f, g) if direction is Direction.IMAGE_TO_SEQ else (g, f)
    model = HybridAutoencoder.build(direction, inputs.shape[1], targets.shape[1], hyper.seed)
    report = TrainReport(hyper.epochs, hyper.learning_rate)
    if hyper.epochs == 0:
        return model, report

    params = model.network.parameters()
    state = AdamState.for_params(params, hyper.learning_rate)
    rng = np.random.default_rng(hyper.seed)
    n = inputs.shape[0]
    batch_size = hyper.batch_size or n
    initial = None
    for epoch in range(1, hyper.epochs + 1):
        order = np.arange(n) if batch_size >= n else rng.permutation(n)
        batch_losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            out, cache = model.network.forward_cached(inputs[idx])
            loss = mse_loss(out, targets[idx])
            grads, _ = model.network.backward(cache, loss.grads[0])
            adam_step(state, params, grads)
            batch_losses.append(loss.loss * len(idx))
        epoch_loss = float(sum(batch_losses) / n)
        if not np.isfinite(epoch_loss):
            raise TrainingError(f"{direction.value} autoencoder loss is not finite", epoch)
        if initial is None:
            initial = epoch_loss
        elif initial > 0 and epoch_loss > hyper.divergence_factor * initial:
            raise TrainingError(f"{direction.value} autoencoder diverged (loss {epoch_loss:.4g})", epoch)
        report.losses.append(epoch_loss)
        logger.debug("%s epoch %d loss %.6f", direction.value, epoch, epoch_loss)
    logger.info("Trained %s autoencoder: %d epochs, final loss %.6f", direction.value, hyper.epochs, report.final_loss)
    return model, report


def _encode(model: HybridAutoencoder, expected: Direction, x: np.ndarray) -> np.ndarray:
    if model.direction is not expected:
        raise DataError(f"expected a {expected.value} model, got {model.direction.value}")
    x = np.asarray(x)
    if x.shape[-1] != model.network.layers[0].in_dim:
        raise ShapeError(f"model expects {model.network.layers[0].in_dim} inputs, got {x.shape[-1]}")
    return np.asarray(model.encode(x), dtype=np.float64)


def encode_image_latent(model: HybridAutoencoder, f: np.ndarray) -> np.ndarray:
    """u = E_I(f): the bottleneck of the ImageToSeq model (rows encode independently)."""
    return _encode(model, Direction.IMAGE_TO_SEQ, f)


def encode_seq_latent(model: HybridAutoencoder, g: np.ndarray) -> np.ndarray:
    """v = E_S(g): the bottleneck of the SeqToImage model."""
    return _encode(model, Direction.SEQ_TO_IMAGE, g)


@dataclass(frozen=True)
class LatentPair:
    case_id: str
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        for name in ("u", "v"):
            vec = np.asarray(getattr(self, name), dtype=np.float64)
            if vec.shape != (BOTTLENECK_SIZE,):
                raise ShapeError(f"latent {name} must have length {BOTTLENECK_SIZE}, got {vec.shape}")
            if not np.all(np.isfinite(vec)):
                raise ShapeError(f"latent {name} of case {self.case_id} is not finite")
            object.__setattr__(self, name, vec)


@dataclass(frozen=True)
class LatentSet:
    """Row-aligned latents of a set of labelled cases."""

    case_ids: Tuple[str, ...]
    labels: Tuple[str, ...]
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.case_ids)
        if len(self.labels) != n or self.u.shape[0] != n or self.v.shape[0] != n:
            raise ShapeError("latent set columns are not row-aligned")
        if len(set(self.case_ids)) != n:
            raise IngestionError("duplicate case_id in latent set")
        if self.u.ndim != 2 or self.v.ndim != 2 or self.u.shape[1] != self.v.shape[1]:
            raise ShapeError(f"latents must be (n, d) arrays of equal width, got {self.u.shape}, {self.v.shape}")

    def __len__(self) -> int:
        return len(self.case_ids)

    def pairs(self) -> List[LatentPair]:
        return [LatentPair(cid, u, v) for cid, u, v in zip(self.case_ids, self.u, self.v)]

    def subset(self, indices: Sequence[int]) -> "LatentSet":
        indices = list(indices)
        return LatentSet(
            tuple(self.case_ids[i] for i in indices),
            tuple(self.labels[i] for i in indices),
            self.u[indices],
            self.v[indices],
        )


def encode_latents(image_model: HybridAutoencoder, seq_model: HybridAutoencoder, dataset: Dataset) -> LatentSet:
    """Encode every case of a scaled dataset into its (u, v) pair."""
    u = encode_image_latent(image_model, dataset.matrix(Modality.IMAGE))
    v = encode_seq_latent(seq_model, dataset.matrix(Modality.SEQUENCE))
    return LatentSet(tuple(dataset.case_ids), tuple(dataset.labels), u, v)


def write_latents(path: Path, latents: LatentSet) -> Path:
    """Write latents in the embedding dump format with latent-u / latent-v tags."""
    width = latents.u.shape[1]

    def rows():
        for cid, label, u, v in zip(latents.case_ids, latents.labels, latents.u, latents.v):
            yield cid, label, LATENT_U_TAG, u
            yield cid, label, LATENT_V_TAG, v

    return write_dump(path, {LATENT_U_TAG: width, LATENT_V_TAG: width}, rows())


def read_latents(path: Path) -> LatentSet:
    contents = read_dump(path)
    case_ids, labels, u, v = [], [], [], []
    for cid, per_case in contents.vectors.items():
        if LATENT_U_TAG not in per_case or LATENT_V_TAG not in per_case:
            logger.warning("%s: case %s lacks a latent; skipped", path, cid)
            continue
        check_identifier(cid, "case_id")
        case_ids.append(cid)
        labels.append(contents.labels[cid])
        u.append(per_case[LATENT_U_TAG])
        v.append(per_case[LATENT_V_TAG])
    width = contents.dims.get(LATENT_U_TAG, BOTTLENECK_SIZE)
    u_arr = np.stack(u) if u else np.zeros((0, width))
    v_arr = np.stack(v) if v else np.zeros((0, width))
    return LatentSet(tuple(case_ids), tuple(labels), u_arr, v_arr)
