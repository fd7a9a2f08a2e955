"""Triplet training of the fusion network.

Triplets are re-mined at the start of every epoch from the current real
codes (or once from the concatenated latents) and consumed in shuffled
mini-batches. The loss is measured on real codes; thresholding is not
differentiable. Because all branches share one parameter set, a batch runs
each distinct case once and accumulates the code gradients of every role it
plays before a single backward pass.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from patientcode.errors import ConfigError, DataError, TrainingError
from patientcode.fusion.fusion_network import FusionNetwork, ThresholdMode
from patientcode.fusion.mining import MiningSpace, mine_triplets
from patientcode.latent.autoencoder import LatentSet, TrainReport
from patientcode.nn.losses import batch_triplet_loss
from patientcode.nn.optim import AdamState, adam_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FusionHyper:
    epochs: int = 150
    learning_rate: float = 1e-5
    alpha: float = 1.0
    batch_size: int = 32
    seed: int = 0
    threshold: ThresholdMode = ThresholdMode.ZERO
    mining_space: MiningSpace = MiningSpace.CODES
    divergence_factor: float = 1e3

    def validate(self) -> "FusionHyper":
        if self.epochs < 0:
            raise ConfigError("fusion.epochs", "must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("fusion.learning_rate", "must be > 0")
        if self.alpha < 0:
            raise ConfigError("fusion.alpha", "must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("fusion.batch_size", "must be >= 1")
        return self


def _mine(q: FusionNetwork, latents: LatentSet, space: MiningSpace):
    if space is MiningSpace.LATENTS:
        points = np.concatenate([latents.u, latents.v], axis=1)
    else:
        points = q.codes(latents.u, latents.v)
    return mine_triplets(latents.labels, points)


def triplet_batch_gradients(q: FusionNetwork, latents: LatentSet, batch: np.ndarray,
                            alpha: float) -> Tuple[float, List[np.ndarray]]:
    """Mean triplet loss of (anchor, positive, negative) index rows and its parameter gradients.

    Each distinct case runs through the trunk once; the code gradients of
    every role it plays are summed before one backward pass.
    """
    cases, inverse = np.unique(batch.reshape(-1), return_inverse=True)
    roles = inverse.reshape(batch.shape)
    codes, cache = q.forward_cached(latents.u[cases], latents.v[cases])
    codes = np.asarray(codes, dtype=np.float64)
    loss = batch_triplet_loss(codes[roles[:, 0]], codes[roles[:, 1]], codes[roles[:, 2]], alpha)
    code_grads = np.zeros_like(codes)
    for role in range(3):
        np.add.at(code_grads, roles[:, role], loss.grads[role])
    grads, _ = q.network.backward(cache, code_grads)
    return loss.loss, grads


def train_fusion(q: FusionNetwork, latents: LatentSet, hyper: FusionHyper,
                 report: Optional[TrainReport] = None) -> Tuple[FusionNetwork, TrainReport]:
    """Train Q in place under the triplet hinge loss with Adam.

    Raises:
        DataError: No valid triplets can be mined.
        TrainingError: The loss became non-finite or diverged.
    """
    hyper.validate()
    report = report or TrainReport(hyper.epochs, hyper.learning_rate)
    if hyper.epochs == 0:
        return q, report

    params = q.network.parameters()
    state = AdamState.for_params(params, hyper.learning_rate)
    rng = np.random.default_rng(hyper.seed)
    fixed_triplets = _mine(q, latents, hyper.mining_space) if hyper.mining_space is MiningSpace.LATENTS else None
    initial = None

    for epoch in range(1, hyper.epochs + 1):
        triplets = fixed_triplets if fixed_triplets is not None else _mine(q, latents, hyper.mining_space)
        if not triplets:
            raise DataError("no valid triplets: every class needs at least two cases and two classes are required")
        table = np.array([(t.anchor, t.positive, t.negative) for t in triplets], dtype=np.int64)
        table = table[rng.permutation(len(table))]

        total = 0.0
        for start in range(0, len(table), hyper.batch_size):
            batch = table[start:start + hyper.batch_size]
            loss, grads = triplet_batch_gradients(q, latents, batch, hyper.alpha)
            adam_step(state, params, grads)
            total += loss * len(batch)

        epoch_loss = total / len(table)
        if not np.isfinite(epoch_loss):
            raise TrainingError("fusion triplet loss is not finite", epoch)
        if initial is None:
            initial = epoch_loss
        elif initial > 0 and epoch_loss > hyper.divergence_factor * initial:
            raise TrainingError(f"fusion training diverged (loss {epoch_loss:.4g})", epoch)
        report.losses.append(float(epoch_loss))
        logger.debug("fusion epoch %d loss %.6f (%d triplets)", epoch, epoch_loss, len(table))

    logger.info("Trained fusion network: %d epochs, final loss %.6f", hyper.epochs, report.final_loss)
    return q, report
