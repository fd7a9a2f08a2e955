"""Leave-one-out retrieval: every case queries the others and is classified from its hits."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from patientcode.archive.archive import Archive, Metric, RetrievalHit
from patientcode.archive.voting import majority_vote
from patientcode.errors import DataError, ShapeError
from patientcode.evaluation.metrics import (
    ALL_CRITERIA,
    Abstention,
    Criterion,
    MetricsReport,
    Representation,
    compute_metrics,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CasePrediction:
    case_id: str
    truth: str
    criterion: Criterion
    predicted: Optional[str]
    support: int


Predictions = Dict[Criterion, List[CasePrediction]]


def usable_criteria(n_entries: int, criteria: Sequence[Criterion]) -> List[Criterion]:
    """Criteria whose depth fits in an archive of n_entries with the query excluded."""
    usable = []
    for criterion in criteria:
        criterion = Criterion(criterion)
        if criterion.depth <= n_entries - 1:
            usable.append(criterion)
        else:
            logger.warning("Skipping %s: archive of %d entries is too small", criterion.value, n_entries)
    return usable


def _predict(case_id: str, truth: str, hits: Sequence[RetrievalHit], criteria: Sequence[Criterion],
             predictions: Predictions) -> None:
    for criterion in criteria:
        if criterion.is_vote:
            vote = majority_vote(hits, criterion.depth)
            predictions[criterion].append(CasePrediction(case_id, truth, criterion, vote.predicted, vote.support))
        else:
            predictions[criterion].append(CasePrediction(case_id, truth, criterion, hits[0].label, 1))


def leave_one_out(archive: Archive, metric: Metric = Metric.HAMMING,
                  criteria: Sequence[Criterion] = ALL_CRITERIA) -> Predictions:
    """Query the archive with each of its entries, the entry itself excluded.

    Top-1 takes the nearest hit's label; MV@n takes the majority vote of the
    top n. Criteria deeper than the archive allows are skipped with a warning.
    """
    criteria = usable_criteria(len(archive), criteria)
    predictions: Predictions = {criterion: [] for criterion in criteria}
    if not criteria:
        return predictions
    depth = max(c.depth for c in criteria)
    for entry in archive.entries():
        hits = archive.search_topk(entry.monogram, depth, metric, exclude=entry.case_id)
        _predict(entry.case_id, entry.label, hits, criteria, predictions)
    return predictions


def leave_one_out_vectors(case_ids: Sequence[str], labels: Sequence[str], vectors: np.ndarray,
                          criteria: Sequence[Criterion] = ALL_CRITERIA) -> Predictions:
    """Leave-one-out Euclidean retrieval over plain vectors, same tie rule as the archive."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != len(case_ids) or len(labels) != len(case_ids):
        raise ShapeError(f"need one vector row per case, got {vectors.shape} for {len(case_ids)} cases")
    if not np.all(np.isfinite(vectors)):
        raise DataError("retrieval vectors must be finite")
    criteria = usable_criteria(len(case_ids), criteria)
    predictions: Predictions = {criterion: [] for criterion in criteria}
    if not criteria:
        return predictions
    depth = max(c.depth for c in criteria)
    ids = np.array(case_ids, dtype=str)
    id_rank = np.empty(len(ids), dtype=np.int64)
    id_rank[np.argsort(ids, kind="stable")] = np.arange(len(ids))
    for i, case_id in enumerate(case_ids):
        diff = vectors - vectors[i]
        distances = np.sqrt(np.sum(diff * diff, axis=1))
        others = np.flatnonzero(np.arange(len(ids)) != i)
        order = others[np.lexsort((id_rank[others], distances[others]))][:depth]
        hits = [RetrievalHit(case_ids[j], labels[j], float(distances[j])) for j in order]
        _predict(case_id, labels[i], hits, criteria, predictions)
    return predictions


def score_predictions(predictions: Predictions, representation: Representation,
                      fold: Optional[int] = None) -> List[MetricsReport]:
    """Metrics per criterion; vote criteria also get the abstentions-excluded variant."""
    reports = []
    for criterion, rows in predictions.items():
        if not rows:
            continue
        predicted = [row.predicted for row in rows]
        truth = [row.truth for row in rows]
        reports.append(compute_metrics(predicted, truth, representation, criterion, Abstention.SCORED, fold))
        if criterion.is_vote:
            reports.append(compute_metrics(predicted, truth, representation, criterion, Abstention.EXCLUDED, fold))
    return reports


def unimodal_baseline(case_ids: Sequence[str], labels: Sequence[str], embeddings: np.ndarray,
                      criteria: Sequence[Criterion] = ALL_CRITERIA,
                      representation: Representation = Representation.IMAGE_UNIMODAL,
                      fold: Optional[int] = None) -> List[MetricsReport]:
    """Leave-one-out nearest-neighbour metrics on one modality's scaled embeddings."""
    predictions = leave_one_out_vectors(case_ids, labels, embeddings, criteria)
    return score_predictions(predictions, representation, fold)
