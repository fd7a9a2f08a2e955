"""Majority-vote classification of ranked retrievals."""

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

from patientcode.archive.archive import RetrievalHit
from patientcode.errors import DataError


@dataclass(frozen=True)
class VoteResult:
    n: int
    predicted: Optional[str]
    support: int

    @property
    def abstained(self) -> bool:
        return self.predicted is None


def quorum(n: int) -> int:
    """Votes a label needs among the top n: floor(n/2) + 1."""
    return n // 2 + 1


def majority_vote(hits: Sequence[RetrievalHit], n: int) -> VoteResult:
    """Predict the modal label of the top n hits when it reaches quorum, else abstain.

    Raises:
        DataError: n < 1 or fewer than n hits.
    """
    if n < 1:
        raise DataError(f"vote depth must be >= 1, got {n}")
    if len(hits) < n:
        raise DataError(f"majority vote over top-{n} needs {n} hits, got {len(hits)}")
    label, support = Counter(hit.label for hit in hits[:n]).most_common(1)[0]
    if support >= quorum(n):
        return VoteResult(n, label, support)
    return VoteResult(n, None, support)
