"""Classification metrics of retrieval predictions and their fold summaries."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from patientcode.errors import DataError, ShapeError

logger = logging.getLogger(__name__)

ABSTAIN_LABEL = "<abstain>"
METRIC_NAMES = ("accuracy", "macro_precision", "macro_recall", "macro_f1")


class Criterion(str, Enum):
    TOP1 = "top-1"
    MV3 = "MV@3"
    MV5 = "MV@5"
    MV10 = "MV@10"

    @property
    def depth(self) -> int:
        return 1 if self is Criterion.TOP1 else int(self.value.split("@")[1])

    @property
    def is_vote(self) -> bool:
        return self is not Criterion.TOP1


ALL_CRITERIA = (Criterion.TOP1, Criterion.MV3, Criterion.MV5, Criterion.MV10)


class Representation(str, Enum):
    BINARY_MONOGRAM = "binary-monogram"
    REAL_MONOGRAM = "real-monogram"
    IMAGE_UNIMODAL = "image-unimodal"
    SEQUENCE_UNIMODAL = "sequence-unimodal"
    IMAGE_LATENT = "image-latent"
    SEQUENCE_LATENT = "sequence-latent"


ALL_REPRESENTATIONS = tuple(Representation)


class Abstention(str, Enum):
    """How majority-vote abstentions enter the metrics."""

    SCORED = "scored"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class MetricsReport:
    """Metrics of one representation under one criterion, for one fold or pooled.

    confusion rows follow ``classes`` (truth); columns follow ``columns``, which
    are the truth classes, any other predicted labels, then the abstain column.
    """

    representation: Representation
    criterion: Criterion
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    classes: Tuple[str, ...]
    columns: Tuple[str, ...]
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    n_cases: int
    n_abstained: int
    abstention: Abstention = Abstention.SCORED
    fold: Optional[int] = None

    @property
    def tag(self) -> str:
        suffix = ":excl-abstain" if self.abstention is Abstention.EXCLUDED else ""
        return f"{self.representation.value}:{self.criterion.value}{suffix}"

    def value(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise KeyError(name)
        return float(getattr(self, name))


def compute_metrics(predictions: Sequence[Optional[str]], truth: Sequence[str],
                    representation: Representation = Representation.BINARY_MONOGRAM,
                    criterion: Criterion = Criterion.TOP1,
                    abstention: Abstention = Abstention.SCORED,
                    fold: Optional[int] = None) -> MetricsReport:
    """Accuracy and macro precision/recall/F1 over the classes present in truth.

    A None prediction is an abstention. Scored, it counts as a wrong answer;
    excluded, the case is dropped before scoring. Classes never predicted get
    precision 0.

    Raises:
        DataError: Empty inputs.
        ShapeError: Predictions and truth differ in length.
    """
    if len(predictions) != len(truth):
        raise ShapeError(f"{len(predictions)} predictions for {len(truth)} truth labels")
    if not truth:
        raise DataError("cannot compute metrics on zero predictions")
    predicted = [ABSTAIN_LABEL if p is None else p for p in predictions]
    truth = list(truth)
    n_abstained = predicted.count(ABSTAIN_LABEL)
    if abstention is Abstention.EXCLUDED:
        kept = [(p, t) for p, t in zip(predicted, truth) if p != ABSTAIN_LABEL]
        predicted = [p for p, _ in kept]
        truth = [t for _, t in kept]

    classes = sorted(set(truth))
    others = sorted(set(predicted) - set(classes) - {ABSTAIN_LABEL})
    columns = classes + others + [ABSTAIN_LABEL]
    if not truth:
        logger.warning("%s %s: every case abstained; excluded-abstention metrics are 0", representation.value, criterion.value)
        empty = np.zeros(0)
        return MetricsReport(representation, criterion, 0.0, 0.0, 0.0, 0.0, (), tuple(columns),
                             np.zeros((0, len(columns)), dtype=np.int64), empty, empty, empty,
                             0, n_abstained, abstention, fold)

    precision, recall, f1, _ = precision_recall_fscore_support(
        truth, predicted, labels=classes, average=None, zero_division=0
    )
    confusion = confusion_matrix(truth, predicted, labels=columns)[: len(classes)]
    accuracy = float(np.trace(confusion[:, : len(classes)]) / len(truth))
    return MetricsReport(
        representation=representation,
        criterion=criterion,
        accuracy=accuracy,
        macro_precision=float(np.mean(precision)),
        macro_recall=float(np.mean(recall)),
        macro_f1=float(np.mean(f1)),
        classes=tuple(classes),
        columns=tuple(columns),
        confusion=confusion.astype(np.int64),
        precision=np.asarray(precision, dtype=np.float64),
        recall=np.asarray(recall, dtype=np.float64),
        f1=np.asarray(f1, dtype=np.float64),
        n_cases=len(truth),
        n_abstained=n_abstained,
        abstention=abstention,
        fold=fold,
    )


@dataclass
class FoldSummary:
    """Per-fold reports of one (representation, criterion, abstention) cell."""

    representation: Representation
    criterion: Criterion
    abstention: Abstention = Abstention.SCORED
    reports: List[MetricsReport] = field(default_factory=list)

    def values(self, name: str) -> np.ndarray:
        return np.array([report.value(name) for report in self.reports], dtype=np.float64)

    def mean(self, name: str) -> float:
        values = self.values(name)
        return float(np.mean(values)) if len(values) else float("nan")

    def std(self, name: str) -> float:
        """Sample standard deviation across folds; 0 for a single fold."""
        values = self.values(name)
        if len(values) < 2:
            return 0.0
        return float(np.std(values, ddof=1))

    @classmethod
    def summarize(cls, reports: Sequence[MetricsReport]) -> "FoldSummary":
        if not reports:
            raise DataError("cannot summarize zero reports")
        first = reports[0]
        for report in reports:
            if (report.representation, report.criterion, report.abstention) != (
                    first.representation, first.criterion, first.abstention):
                raise DataError(f"cannot summarize {report.tag} with {first.tag}")
        return cls(first.representation, first.criterion, first.abstention, list(reports))
