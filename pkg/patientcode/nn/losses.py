"""MSE and triplet hinge losses with gradients for every input."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from patientcode.errors import ShapeError


@dataclass(frozen=True)
class LossValue:
    """Scalar loss and its gradient with respect to each input, in argument order."""

    loss: float
    grads: Tuple[np.ndarray, ...]


def mse_loss(pred: np.ndarray, target: np.ndarray) -> LossValue:
    """Mean of squared element differences over all entries (batch and dimensions)."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} and target {target.shape} differ in shape")
    if pred.size == 0:
        raise ShapeError("mse_loss of empty arrays")
    diff = pred - target
    grad = 2.0 * diff / diff.size
    return LossValue(float(np.mean(diff * diff)), (grad, -grad))


def _unit(diff: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """diff / dist row-wise, 0 where dist is 0."""
    safe = np.where(dist > 0, dist, 1.0)
    return np.where((dist > 0)[..., None], diff / safe[..., None], 0.0)


def triplet_loss(a: np.ndarray, p: np.ndarray, n: np.ndarray, alpha: float) -> LossValue:
    """max(d(a,p) - d(a,n) + alpha, 0) with Euclidean d.

    The subgradient is 0 on the hinge boundary and for zero distances.
    """
    a, p, n = (np.asarray(v, dtype=np.float64) for v in (a, p, n))
    if not a.shape == p.shape == n.shape or a.ndim != 1:
        raise ShapeError(f"triplet vectors must share one length, got {a.shape}, {p.shape}, {n.shape}")
    if alpha < 0:
        raise ShapeError(f"margin must be non-negative, got {alpha}")
    result = batch_triplet_loss(a[None], p[None], n[None], alpha)
    return LossValue(result.loss, tuple(g[0] for g in result.grads))


def batch_triplet_loss(a: np.ndarray, p: np.ndarray, n: np.ndarray, alpha: float) -> LossValue:
    """Mean triplet loss over rows of (batch, dim) arrays; gradients include the 1/batch factor."""
    if not a.shape == p.shape == n.shape or a.ndim != 2:
        raise ShapeError(f"triplet batches must share one (batch, dim) shape, got {a.shape}, {p.shape}, {n.shape}")
    batch = a.shape[0]
    if batch == 0:
        raise ShapeError("empty triplet batch")
    d_ap_vec = a - p
    d_an_vec = a - n
    d_ap = np.sqrt(np.sum(d_ap_vec * d_ap_vec, axis=1))
    d_an = np.sqrt(np.sum(d_an_vec * d_an_vec, axis=1))
    hinge = d_ap - d_an + alpha
    active = hinge > 0
    losses = np.where(active, hinge, 0.0)

    unit_ap = _unit(d_ap_vec, d_ap)
    unit_an = _unit(d_an_vec, d_an)
    scale = (active / batch)[:, None]
    grad_a = scale * (unit_ap - unit_an)
    grad_p = -scale * unit_ap
    grad_n = scale * unit_an
    return LossValue(float(np.mean(losses)), (grad_a, grad_p, grad_n))
