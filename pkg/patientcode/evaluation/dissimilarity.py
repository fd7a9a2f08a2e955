"""XOR dissimilarity between monogram sets, per-bit flip grids and class-block summaries."""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd

from patientcode.archive.archive import ArchiveEntry
from patientcode.archive.kernels import pairwise_hamming
from patientcode.errors import DataError
from patientcode.fusion.fusion_network import GRID, unpack_bits

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_PER_CLASS = 19


@dataclass(frozen=True)
class DissimilarityMatrix:
    row_ids: Tuple[str, ...]
    row_labels: Tuple[str, ...]
    col_ids: Tuple[str, ...]
    col_labels: Tuple[str, ...]
    values: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def is_symmetric(self) -> bool:
        return self.values.shape[0] == self.values.shape[1] and bool(np.array_equal(self.values, self.values.T))

    def to_frame(self) -> pd.DataFrame:
        """Dense table; rows and columns are indexed by (case_id, label)."""
        index = pd.MultiIndex.from_arrays([self.row_ids, self.row_labels], names=["case_id", "label"])
        columns = pd.MultiIndex.from_arrays([self.col_ids, self.col_labels], names=["case_id", "label"])
        return pd.DataFrame(self.values, index=index, columns=columns)


def _words(entries: Sequence[ArchiveEntry]) -> np.ndarray:
    return np.array([e.bits for e in entries], dtype=np.uint64)


def xor_dissimilarity(a: Sequence[ArchiveEntry], b: Sequence[ArchiveEntry]) -> DissimilarityMatrix:
    """Entry (i, j) = popcount(a_i XOR b_j).

    Raises:
        DataError: Either set is empty.
    """
    if not a or not b:
        raise DataError("dissimilarity needs two non-empty monogram sets")
    return DissimilarityMatrix(
        tuple(e.case_id for e in a),
        tuple(e.label for e in a),
        tuple(e.case_id for e in b),
        tuple(e.label for e in b),
        pairwise_hamming(_words(a), _words(b)),
    )


def bit_flip_grid(a: int, b: int) -> np.ndarray:
    """8 x 8 grid going from a to b: +1 where a bit flips 0 -> 1, -1 where it flips 1 -> 0."""
    before = unpack_bits(a).astype(np.int8)
    after = unpack_bits(b).astype(np.int8)
    return (after - before).reshape(GRID, GRID)


def _pair_mask(matrix: DissimilarityMatrix) -> np.ndarray:
    """False where a row and a column are the same case."""
    return np.array(matrix.row_ids)[:, None] != np.array(matrix.col_ids)[None, :]


def class_block_means(matrix: DissimilarityMatrix) -> pd.DataFrame:
    """Mean entry of every (row class, column class) block; self-pairs are left out."""
    rows = np.array(matrix.row_labels)
    cols = np.array(matrix.col_labels)
    valid = _pair_mask(matrix)
    row_classes = sorted(set(matrix.row_labels))
    col_classes = sorted(set(matrix.col_labels))
    table = np.full((len(row_classes), len(col_classes)), np.nan)
    for i, rc in enumerate(row_classes):
        for j, cc in enumerate(col_classes):
            block = (rows[:, None] == rc) & (cols[None, :] == cc) & valid
            if block.any():
                table[i, j] = float(matrix.values[block].mean())
    return pd.DataFrame(table, index=pd.Index(row_classes, name="label"), columns=col_classes)


def intra_inter_means(matrix: DissimilarityMatrix) -> Tuple[float, float]:
    """Mean dissimilarity of same-class pairs and of different-class pairs, self-pairs excluded."""
    same = np.array(matrix.row_labels)[:, None] == np.array(matrix.col_labels)[None, :]
    valid = _pair_mask(matrix)
    intra = matrix.values[same & valid]
    inter = matrix.values[~same & valid]
    if intra.size == 0 or inter.size == 0:
        raise DataError("need both same-class and different-class pairs")
    return float(intra.mean()), float(inter.mean())


def sample_per_class(entries: Sequence[ArchiveEntry], per_class: int = DEFAULT_SAMPLE_PER_CLASS,
                     seed: int = 0) -> List[ArchiveEntry]:
    """Seeded subsample of at most per_class entries per class, original order kept."""
    if per_class < 1:
        raise DataError(f"per_class must be >= 1, got {per_class}")
    rng = np.random.default_rng(seed)
    labels = np.array([e.label for e in entries])
    chosen = []
    for label in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == label)
        if len(members) <= per_class:
            if len(members) < per_class:
                logger.warning("Class %s has %d case(s), fewer than the %d requested", label, len(members), per_class)
            chosen.extend(members.tolist())
        else:
            chosen.extend(rng.choice(members, size=per_class, replace=False).tolist())
    return [entries[i] for i in sorted(chosen)]
