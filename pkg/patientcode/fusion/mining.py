"""Hard triplet mining: farthest positive and closest negative per anchor."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence

import numpy as np

from patientcode.errors import DataError, ShapeError

logger = logging.getLogger(__name__)


class MiningSpace(str, Enum):
    """Where pairwise distances for mining are measured."""

    CODES = "codes"
    LATENTS = "latents"


@dataclass(frozen=True)
class Triplet:
    anchor: int
    positive: int
    negative: int

    def __post_init__(self) -> None:
        if len({self.anchor, self.positive, self.negative}) != 3:
            raise DataError(f"triplet indices must be distinct: {self}")


def row_distances(points: np.ndarray, i: int) -> np.ndarray:
    """Euclidean distances from point i to every point."""
    diff = points - points[i]
    return np.sqrt(np.sum(diff * diff, axis=1))


def mine_triplets(labels: Sequence[str], points: np.ndarray) -> List[Triplet]:
    """One hard triplet per anchor over pairwise Euclidean distances.

    The positive is the farthest same-label case, the negative the closest
    different-label case; ties go to the lowest index. Anchors whose class
    has a single member are skipped with a warning.

    Raises:
        DataError: Fewer than two classes.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    if points.ndim != 2 or points.shape[0] != labels.shape[0]:
        raise ShapeError(f"need one point row per label, got {points.shape} for {labels.shape[0]} labels")
    if len(set(labels.tolist())) < 2:
        raise DataError("hard mining needs at least two classes")

    triplets = []
    skipped = []
    for i in range(points.shape[0]):
        same = labels == labels[i]
        same[i] = False
        if not same.any():
            skipped.append(i)
            continue
        distances = row_distances(points, i)
        positive = int(np.argmax(np.where(same, distances, -np.inf)))
        negative = int(np.argmin(np.where(labels != labels[i], distances, np.inf)))
        triplets.append(Triplet(i, positive, negative))
    if skipped:
        logger.warning("Skipped %d anchor(s) from single-member classes: indices %s", len(skipped), skipped[:10])
    return triplets
