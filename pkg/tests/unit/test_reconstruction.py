"""Unit tests for held-out reconstruction quality.

The slow test trains both hybrid autoencoders on a noise-free linear
cross-modal map and expects the median held-out cosine to reach 0.9.
"""

import numpy as np
import pytest

from patientcode.data.dataset import Modality
from patientcode.data.scaling import fit_dataset_scaling, scale_dataset
from patientcode.data.synthetic import synth_linear_pairs
from patientcode.errors import DataError
from patientcode.latent.autoencoder import AutoencoderHyper, Direction, HybridAutoencoder, train_hybrid
from patientcode.latent.reconstruction import (
    ReconstructionReport,
    ReconstructionRow,
    cosine_similarity,
    reconstruction_report,
)


def _split(dataset, n_train):
    """Helper to split a dataset by position and scale both halves with training params."""
    train = dataset.subset(dataset.case_ids[:n_train])
    test = dataset.subset(dataset.case_ids[n_train:])
    params = fit_dataset_scaling(train)
    return scale_dataset(params, train), scale_dataset(params, test)


def test_cosine_similarity_values():
    """Test parallel, orthogonal and zero-norm vectors."""
    assert cosine_similarity(np.array([1.0, 2.0]), np.array([2.0, 4.0])) == pytest.approx(1.0)
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 3.0])) == pytest.approx(0.0)
    assert cosine_similarity(np.zeros(2), np.array([1.0, 1.0])) is None


def test_zero_norm_rows_are_flagged_and_excluded(caplog):
    """Test flagged rows are left out of the median with a warning."""
    report = ReconstructionReport([
        ReconstructionRow("a", Modality.SEQUENCE, 0.2, 1.0),
        ReconstructionRow("b", Modality.SEQUENCE, None, 1.0),
        ReconstructionRow("c", Modality.SEQUENCE, 0.8, 1.0),
        ReconstructionRow("a", Modality.IMAGE, 0.9, 3.0),
    ])
    assert report.median_cosine(Modality.SEQUENCE) == pytest.approx(0.5)
    assert report.mean_mse(Modality.IMAGE) == pytest.approx(3.0)
    assert "zero-norm" in caplog.text


def test_report_rows_cover_both_directions():
    """Test each held-out case gets a sequence row and an image row."""
    dataset = synth_linear_pairs(10, 4, 3, seed=1)
    train, test = _split(dataset, 6)
    image_model = HybridAutoencoder.build(Direction.IMAGE_TO_SEQ, 4, 3)
    seq_model = HybridAutoencoder.build(Direction.SEQ_TO_IMAGE, 3, 4)
    report = reconstruction_report(image_model, seq_model, test)
    frame = report.to_frame()
    assert list(frame.columns) == ["case_id", "modality", "cosine", "mse"]
    assert len(frame) == 8
    assert sorted(set(frame["modality"])) == ["image", "sequence"]
    assert len(train) == 6


def test_models_in_wrong_roles_are_refused():
    """Test the report needs (ImageToSeq, SeqToImage) in that order."""
    dataset = synth_linear_pairs(4, 3, 3)
    a = HybridAutoencoder.build(Direction.IMAGE_TO_SEQ, 3, 3)
    b = HybridAutoencoder.build(Direction.SEQ_TO_IMAGE, 3, 3)
    with pytest.raises(DataError):
        reconstruction_report(b, a, dataset)


@pytest.mark.slow
def test_linear_map_is_learned():
    """Test a learnable cross-modal map reaches median held-out cosine >= 0.9."""
    dataset = synth_linear_pairs(240, 16, 16, noise=0.0, seed=3)
    train, test = _split(dataset, 200)
    pairs = list(zip(train.matrix(Modality.IMAGE), train.matrix(Modality.SEQUENCE)))
    hyper = AutoencoderHyper(epochs=150, learning_rate=1e-3, seed=0, batch_size=32)
    image_model, curve = train_hybrid(Direction.IMAGE_TO_SEQ, pairs, hyper)
    seq_model, _ = train_hybrid(Direction.SEQ_TO_IMAGE, pairs, hyper)
    report = reconstruction_report(image_model, seq_model, test)
    assert curve.final_loss < curve.losses[0]
    assert report.median_cosine(Modality.SEQUENCE) >= 0.9
    assert report.median_cosine(Modality.IMAGE) >= 0.9
