"""Unit tests for stratified fold assignment.

Every case must land in exactly one fold, class proportions must be kept
when classes are large enough, and the same seed must give the same split.
"""

from collections import Counter

import pytest

from patientcode.data.folds import FoldAssignment, make_folds
from patientcode.data.synthetic import SynthConfig, synth_generate
from patientcode.errors import ConfigError, IngestionError


def synth_dataset(n_classes=2, per_class=10):
    """Small synthetic dataset for split tests."""
    return synth_generate(SynthConfig(n_classes=n_classes, per_class=per_class, image_dim=2, sequence_dim=2))


def test_every_case_in_exactly_one_fold():
    """Test the folds partition the dataset."""
    dataset = synth_dataset()
    folds = make_folds(dataset, 5, seed=0)
    assert sorted(folds.mapping) == sorted(dataset.case_ids)
    seen = [cid for fold in range(5) for cid in folds.test_ids(fold)]
    assert sorted(seen) == sorted(dataset.case_ids)
    assert sum(folds.sizes()) == len(dataset)


def test_train_and_test_are_disjoint():
    """Test a fold's training and test ids never overlap."""
    folds = make_folds(synth_dataset(), 4, seed=1)
    for _, train, test in folds.splits():
        assert not set(train) & set(test)
        assert len(train) + len(test) == 20


def test_stratification_keeps_class_balance():
    """Test each fold holds the same number of cases from each class."""
    dataset = synth_dataset(n_classes=2, per_class=10)
    folds = make_folds(dataset, 5, seed=0)
    labels = dict(zip(dataset.case_ids, dataset.labels))
    for fold in range(5):
        counts = Counter(labels[cid] for cid in folds.test_ids(fold))
        assert counts == {"class-0": 2, "class-1": 2}


def test_same_seed_same_split():
    """Test fold assignment is deterministic for a fixed seed."""
    dataset = synth_dataset()
    assert make_folds(dataset, 5, seed=7).mapping == make_folds(dataset, 5, seed=7).mapping


def test_different_seed_changes_split():
    """Test a different seed shuffles cases differently."""
    dataset = synth_dataset(per_class=20)
    assert make_folds(dataset, 5, seed=0).mapping != make_folds(dataset, 5, seed=1).mapping


def test_small_class_relaxes_stratification(caplog):
    """Test a class smaller than k is still assigned, with a warning."""
    dataset = synth_dataset(n_classes=3, per_class=10)
    small = dataset.subset(dataset.case_ids[:22])
    folds = make_folds(small, 5, seed=0)
    assert sorted(folds.mapping) == sorted(small.case_ids)
    assert "Stratification relaxed" in caplog.text


def test_fold_count_below_two_is_a_config_error():
    """Test k < 2 is rejected as a configuration error."""
    with pytest.raises(ConfigError):
        make_folds(synth_dataset(), 1, seed=0)


def test_more_folds_than_cases_is_refused():
    """Test k larger than the dataset raises IngestionError."""
    with pytest.raises(IngestionError):
        make_folds(synth_dataset(per_class=2), 5, seed=0)


def test_assignment_must_use_every_fold():
    """Test a mapping leaving a fold empty is refused."""
    with pytest.raises(IngestionError):
        FoldAssignment(3, {"a": 0, "b": 1})
