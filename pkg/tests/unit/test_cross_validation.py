"""Unit tests for the fold-wise pipeline evaluation.

The fast tests run the full pipeline with a handful of epochs on tiny
synthetic data to check wiring, seeding and fold skipping. The slow tests
are the synthetic end-to-end checks: the binary monogram must retrieve at
least as well as each unimodal baseline over all five folds and reach 0.90
macro F1 on cleanly separable data.
"""

from dataclasses import replace

import pytest

from patientcode.archive.archive import Metric
from patientcode.data.folds import FoldAssignment, make_folds
from patientcode.data.synthetic import SynthConfig, synth_generate
from patientcode.errors import ConfigError
from patientcode.evaluation.cross_validation import (
    FUSION_STAGE,
    IMAGE_AE_STAGE,
    SEQ_AE_STAGE,
    PipelineConfig,
    cross_validate,
    run_fold,
    stage_seed,
)
from patientcode.evaluation.metrics import Abstention, Criterion, Representation
from patientcode.fusion.training import FusionHyper
from patientcode.latent.autoencoder import AutoencoderHyper


def quick_config(**kwargs):
    """Pipeline settings small enough for a unit test."""
    base = PipelineConfig(
        image_to_seq=AutoencoderHyper(epochs=2, learning_rate=1e-3),
        seq_to_image=AutoencoderHyper(epochs=2, learning_rate=1e-3),
        fusion=FusionHyper(epochs=2, learning_rate=1e-4, batch_size=8),
        criteria=(Criterion.TOP1, Criterion.MV3),
    )
    return replace(base, **kwargs)


def synth_dataset(per_class=10, dim=8, signal=0.5, noise=0.3, seed=0):
    """Two-class synthetic dataset with equal signal in both modalities."""
    return synth_generate(SynthConfig(n_classes=2, per_class=per_class, image_dim=dim, sequence_dim=dim,
                                      image_signal=signal, sequence_signal=signal, noise=noise, seed=seed))


def test_stage_seeds_are_distinct_per_fold_and_stage():
    """Test (seed + fold) * 3 + stage never repeats across folds and stages."""
    seeds = {stage_seed(4, fold, stage) for fold in range(5) for stage in (IMAGE_AE_STAGE, SEQ_AE_STAGE, FUSION_STAGE)}
    assert len(seeds) == 15
    assert stage_seed(4, 1, FUSION_STAGE) == 17


def test_run_fold_reports_every_representation():
    """Test one fold yields scored reports for all representations and excluded ones for votes."""
    dataset = synth_dataset()
    folds = make_folds(dataset, 2, seed=0)
    result = run_fold(dataset, folds, 0, quick_config())
    assert result.test_size + result.train_size == len(dataset)
    cells = {(r.representation, r.criterion, r.abstention) for r in result.reports}
    for representation in Representation:
        assert (representation, Criterion.TOP1, Abstention.SCORED) in cells
        assert (representation, Criterion.MV3, Abstention.EXCLUDED) in cells
        assert (representation, Criterion.TOP1, Abstention.EXCLUDED) not in cells
    assert set(result.curves) == {"image-to-seq", "seq-to-image", "fusion"}
    assert len(result.curves["fusion"].losses) == 2
    assert len(result.predictions) == len(Representation) * 2 * result.test_size


def test_cross_validation_is_deterministic():
    """Test two runs with the same seed give identical metrics and predictions."""
    dataset = synth_dataset()
    folds = make_folds(dataset, 2, seed=0)
    config = quick_config(representations=(Representation.BINARY_MONOGRAM, Representation.REAL_MONOGRAM))
    a = cross_validate(dataset, folds, config)
    b = cross_validate(dataset, folds, config)
    assert [(r.tag, r.fold, r.accuracy, r.macro_f1) for r in a.reports] == [(r.tag, r.fold, r.accuracy, r.macro_f1) for r in b.reports]
    assert a.predictions == b.predictions


def test_thread_pool_keeps_fold_order():
    """Test parallel folds are reassembled in fold order with the serial results."""
    dataset = synth_dataset()
    folds = make_folds(dataset, 2, seed=1)
    config = quick_config(representations=(Representation.BINARY_MONOGRAM,))
    serial = cross_validate(dataset, folds, config)
    parallel = cross_validate(dataset, folds, replace(config, workers=2))
    assert [f.fold for f in parallel.folds] == [0, 1]
    assert [(r.tag, r.accuracy) for r in parallel.reports] == [(r.tag, r.accuracy) for r in serial.reports]


def test_single_class_fold_is_skipped(caplog):
    """Test a fold whose test split holds one class is skipped with a warning."""
    dataset = synth_dataset(per_class=4)
    mapping = {cid: (0 if label == "class-0" else 1) for cid, label in zip(dataset.case_ids, dataset.labels)}
    result = cross_validate(dataset, FoldAssignment(2, mapping), quick_config())
    assert result.skipped == [0, 1]
    assert result.folds == []
    assert "Skipping fold 0" in caplog.text


def test_summary_lookup():
    """Test per-cell summaries are reachable and missing cells raise KeyError."""
    dataset = synth_dataset()
    folds = make_folds(dataset, 2, seed=0)
    config = quick_config(representations=(Representation.IMAGE_UNIMODAL,), criteria=(Criterion.TOP1,))
    result = cross_validate(dataset, folds, config)
    summary = result.summary(Representation.IMAGE_UNIMODAL, Criterion.TOP1)
    assert len(summary.reports) == 2
    with pytest.raises(KeyError):
        result.summary(Representation.BINARY_MONOGRAM, Criterion.TOP1)


@pytest.mark.parametrize("changes,field", [
    ({"criteria": ()}, "evaluation.criteria"),
    ({"representations": ()}, "evaluation.representations"),
    ({"real_metric": Metric.HAMMING}, "evaluation.real_metric"),
    ({"workers": 0}, "evaluation.workers"),
    ({"image_to_seq": AutoencoderHyper(epochs=1, learning_rate=0.0)}, "autoencoder.image_to_seq.learning_rate"),
])
def test_invalid_pipeline_config(changes, field):
    """Test invalid pipeline settings raise ConfigError naming the field."""
    with pytest.raises(ConfigError) as excinfo:
        quick_config(**changes).validate()
    assert excinfo.value.field == field


def _top1_f1(result, representation):
    return result.summary(representation, Criterion.TOP1).mean("macro_f1")


@pytest.mark.slow
def test_monogram_retrieval_matches_unimodal_baselines():
    """Test binary-monogram top-1 macro F1 is at least each unimodal baseline's over all five folds."""
    dataset = synth_dataset(per_class=100, dim=64)
    folds = make_folds(dataset, 5, seed=0)
    config = PipelineConfig(
        image_to_seq=AutoencoderHyper(epochs=30, learning_rate=1e-3, batch_size=32),
        seq_to_image=AutoencoderHyper(epochs=30, learning_rate=1e-3, batch_size=32),
        fusion=FusionHyper(epochs=10, learning_rate=1e-4, batch_size=32),
        criteria=(Criterion.TOP1,),
        representations=(Representation.BINARY_MONOGRAM, Representation.IMAGE_UNIMODAL,
                         Representation.SEQUENCE_UNIMODAL),
    )
    result = cross_validate(dataset, folds, config)
    monogram = _top1_f1(result, Representation.BINARY_MONOGRAM)
    assert monogram >= _top1_f1(result, Representation.IMAGE_UNIMODAL)
    assert monogram >= _top1_f1(result, Representation.SEQUENCE_UNIMODAL)


@pytest.mark.slow
def test_separable_data_reaches_high_f1():
    """Test cleanly separable classes give binary-monogram top-1 macro F1 >= 0.90."""
    dataset = synth_dataset(per_class=100, dim=64, signal=1.0, noise=0.1, seed=1)
    folds = make_folds(dataset, 5, seed=1)
    config = PipelineConfig(
        image_to_seq=AutoencoderHyper(epochs=30, learning_rate=1e-3, batch_size=32),
        seq_to_image=AutoencoderHyper(epochs=30, learning_rate=1e-3, batch_size=32),
        fusion=FusionHyper(epochs=10, learning_rate=1e-4, batch_size=32),
        criteria=(Criterion.TOP1,),
        representations=(Representation.BINARY_MONOGRAM,),
    )
    result = cross_validate(dataset, folds, config, only=[0])
    assert _top1_f1(result, Representation.BINARY_MONOGRAM) >= 0.90
