"""Stratified k-fold assignment of cases."""

import logging
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterator, List, Tuple

import numpy as np
from sklearn.model_selection import KFold, StratifiedKFold

from patientcode.data.dataset import Dataset
from patientcode.errors import ConfigError, IngestionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FoldAssignment:
    """Mapping of every case to exactly one of k folds."""

    k: int
    mapping: Dict[str, int]

    def __post_init__(self) -> None:
        used = set(self.mapping.values())
        if used != set(range(self.k)):
            raise IngestionError(f"fold assignment must use every fold in [0, {self.k}), got {sorted(used)}")

    def fold_of(self, case_id: str) -> int:
        return self.mapping[case_id]

    def test_ids(self, fold: int) -> List[str]:
        return [cid for cid, f in self.mapping.items() if f == fold]

    def train_ids(self, fold: int) -> List[str]:
        return [cid for cid, f in self.mapping.items() if f != fold]

    def sizes(self) -> List[int]:
        counts = Counter(self.mapping.values())
        return [counts[i] for i in range(self.k)]

    def splits(self) -> Iterator[Tuple[int, List[str], List[str]]]:
        """Yield (fold, train_ids, test_ids) in fold order."""
        for fold in range(self.k):
            yield fold, self.train_ids(fold), self.test_ids(fold)


def make_folds(dataset: Dataset, k: int, seed: int) -> FoldAssignment:
    """Assign cases to k stratified folds, deterministically for a fixed seed.

    Classes with fewer than k members cannot appear in every fold; the split
    is then relaxed with a warning. When no class has k members the split
    falls back to an unstratified shuffle.

    Raises:
        ConfigError: k < 2.
        IngestionError: k exceeds the number of cases.
    """
    if k < 2:
        raise ConfigError("folds", f"fold count must be at least 2, got {k}")
    n = len(dataset)
    if k > n:
        raise IngestionError(f"cannot split {n} case(s) into {k} folds")

    labels = np.asarray(dataset.labels)
    counts = Counter(dataset.labels)
    small = sorted(label for label, count in counts.items() if count < k)
    if small:
        logger.warning("Stratification relaxed: class(es) %s have fewer than %d members", small, k)

    placeholder = np.zeros(n)
    if max(counts.values()) >= k:
        splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            splits = list(splitter.split(placeholder, labels))
    else:
        splits = list(KFold(n_splits=k, shuffle=True, random_state=seed).split(placeholder))

    ids = dataset.case_ids
    mapping = {}
    for fold, (_, test_index) in enumerate(splits):
        for i in test_index:
            mapping[ids[i]] = fold
    # dataset order, independent of split iteration order
    mapping = {cid: mapping[cid] for cid in ids}
    return FoldAssignment(k, mapping)
