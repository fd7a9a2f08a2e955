"""Unit tests for majority voting over ranked retrievals.

The vote is checked exhaustively against a counting oracle for every label
sequence over three classes at depths 3, 5 and 10.
"""

import itertools
from collections import Counter

import pytest

from patientcode.archive.archive import RetrievalHit
from patientcode.archive.voting import majority_vote, quorum
from patientcode.errors import DataError


def _hits(labels):
    """Helper to turn a label sequence into ranked hits."""
    return [RetrievalHit(f"case-{i}", label, i) for i, label in enumerate(labels)]


def oracle(labels, n):
    """Label holding at least floor(n/2) + 1 of the first n votes, else None."""
    for label, count in Counter(labels[:n]).items():
        if count >= n // 2 + 1:
            return label
    return None


@pytest.mark.parametrize("n", [3, 5, 10])
def test_exhaustive_truth_table(n):
    """Test every label sequence of length n over {A, B, C} against the oracle."""
    for labels in itertools.product("ABC", repeat=n):
        result = majority_vote(_hits(labels), n)
        assert result.predicted == oracle(labels, n), labels
        assert result.abstained == (result.predicted is None)


def test_quorum_values():
    """Test the quorum is floor(n/2) + 1."""
    assert [quorum(n) for n in (1, 3, 5, 10)] == [1, 2, 3, 6]


def test_mv3_examples():
    """Test two of three agreeing votes win and three distinct labels abstain."""
    assert majority_vote(_hits("AAB"), 3).predicted == "A"
    assert majority_vote(_hits("BAB"), 3).support == 2
    assert majority_vote(_hits("ABC"), 3).abstained


def test_even_split_at_ten_abstains():
    """Test a 5-5 split does not reach the quorum of 6."""
    result = majority_vote(_hits("AAAAABBBBB"), 10)
    assert result.abstained
    assert result.support == 5


def test_only_first_n_hits_vote():
    """Test hits beyond depth n are ignored."""
    assert majority_vote(_hits("ABBAAAA"), 3).predicted == "B"


def test_too_few_hits():
    """Test voting over more hits than available raises DataError."""
    with pytest.raises(DataError):
        majority_vote(_hits("AB"), 3)


def test_non_positive_depth():
    """Test n < 1 raises DataError."""
    with pytest.raises(DataError):
        majority_vote(_hits("A"), 0)
