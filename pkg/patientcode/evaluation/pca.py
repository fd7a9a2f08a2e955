"""Principal-component projection for external t-SNE tooling."""

import logging
from dataclasses import dataclass

import numpy as np

from patientcode.errors import DataError

logger = logging.getLogger(__name__)

DEFAULT_COMPONENTS = 64
# eigenvalues below this fraction of the largest count as null directions
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class PcaResult:
    """Projection onto the leading components.

    components holds one unit-length row per component, ordered by
    descending explained variance.
    """

    projected: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray
    mean: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def pca_project(vectors: np.ndarray, n_components: int = DEFAULT_COMPONENTS) -> PcaResult:
    """Mean-centre and project onto the top eigenvectors of the sample covariance.

    Each component's sign is fixed so its largest-magnitude loading is
    positive. When the data has fewer than n_components non-null directions
    only those are returned, with a warning.

    Raises:
        DataError: Fewer samples or features than n_components, or non-finite data.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"PCA needs a 2-D array, got shape {x.shape}")
    n, d = x.shape
    if n_components < 1 or n < n_components or d < n_components:
        raise DataError(f"PCA with {n_components} components needs at least that many samples and features, got {x.shape}")
    if n < 2:
        raise DataError("PCA needs at least two samples")
    if not np.all(np.isfinite(x)):
        raise DataError("PCA input must be finite")

    mean = x.mean(axis=0)
    centered = x - mean
    covariance = centered.T @ centered / (n - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order]

    tolerance = float(eigenvalues[0]) * RANK_TOLERANCE
    rank = int(np.sum(eigenvalues > tolerance))
    keep = min(n_components, rank)
    if keep < n_components:
        logger.warning("Data has rank %d; returning %d of %d requested components", rank, keep, n_components)

    components = eigenvectors[:, :keep].T
    if keep:
        signs = np.sign(components[np.arange(keep), np.argmax(np.abs(components), axis=1)])
        components = components * signs[:, None]
    total = float(eigenvalues.sum())
    variance = eigenvalues[:keep]
    ratio = variance / total if total > 0 else np.zeros_like(variance)
    return PcaResult(centered @ components.T, components, variance, ratio, mean)
