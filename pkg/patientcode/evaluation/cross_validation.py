"""Fold-wise evaluation of the full pipeline against the unimodal baselines.

Every fold trains scaling, both autoencoders and the fusion network on its
training split only. The held-out cases are encoded, archived and retrieved
leave-one-out inside that test archive. Folds are independent; with more
than one worker they run on a thread pool and are reassembled in fold order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from patientcode.archive.archive import Archive, Metric
from patientcode.data.dataset import Dataset, Modality
from patientcode.data.folds import FoldAssignment
from patientcode.data.scaling import fit_dataset_scaling, scale_dataset
from patientcode.errors import ConfigError
from patientcode.evaluation.metrics import (
    ALL_CRITERIA,
    ALL_REPRESENTATIONS,
    Abstention,
    Criterion,
    FoldSummary,
    MetricsReport,
    Representation,
)
from patientcode.evaluation.retrieval import Predictions, leave_one_out, leave_one_out_vectors, score_predictions
from patientcode.fusion.fusion_network import FusionNetwork, generate_monograms
from patientcode.fusion.training import FusionHyper, train_fusion
from patientcode.latent.autoencoder import (
    IMAGE_TO_SEQ_DEFAULTS,
    SEQ_TO_IMAGE_DEFAULTS,
    AutoencoderHyper,
    Direction,
    LatentSet,
    TrainReport,
    encode_latents,
    train_hybrid,
)

logger = logging.getLogger(__name__)

# Offsets added to a fold's seed so each trained stage draws its own stream.
IMAGE_AE_STAGE = 0
SEQ_AE_STAGE = 1
FUSION_STAGE = 2
_STAGES = 3


def stage_seed(seed: int, fold: int, stage: int) -> int:
    """Seed of one training stage of one fold: (seed + fold) * 3 + stage."""
    return (seed + fold) * _STAGES + stage


@dataclass(frozen=True)
class PipelineConfig:
    image_to_seq: AutoencoderHyper = IMAGE_TO_SEQ_DEFAULTS
    seq_to_image: AutoencoderHyper = SEQ_TO_IMAGE_DEFAULTS
    fusion: FusionHyper = field(default_factory=FusionHyper)
    criteria: Tuple[Criterion, ...] = ALL_CRITERIA
    representations: Tuple[Representation, ...] = ALL_REPRESENTATIONS
    real_metric: Metric = Metric.EUCLIDEAN
    seed: int = 0
    workers: int = 1

    def validate(self) -> "PipelineConfig":
        for name, hyper in (("autoencoder.image_to_seq", self.image_to_seq), ("autoencoder.seq_to_image", self.seq_to_image)):
            if hyper.epochs < 0:
                raise ConfigError(f"{name}.epochs", "must be >= 0")
            if hyper.learning_rate <= 0:
                raise ConfigError(f"{name}.learning_rate", "must be > 0")
        self.fusion.validate()
        if not self.criteria:
            raise ConfigError("evaluation.criteria", "at least one criterion is required")
        if not self.representations:
            raise ConfigError("evaluation.representations", "at least one representation is required")
        if Metric(self.real_metric) is Metric.HAMMING:
            raise ConfigError("evaluation.real_metric", "real-code retrieval needs euclidean or cosine")
        if self.workers < 1:
            raise ConfigError("evaluation.workers", "must be >= 1")
        return self


@dataclass(frozen=True)
class PredictionRow:
    fold: int
    representation: Representation
    criterion: Criterion
    case_id: str
    truth: str
    predicted: Optional[str]
    support: int


@dataclass
class FoldResult:
    fold: int
    train_size: int
    test_size: int
    reports: List[MetricsReport]
    predictions: List[PredictionRow]
    curves: Dict[str, TrainReport]


@dataclass
class CrossValidationResult:
    folds: List[FoldResult]
    skipped: List[int]

    @property
    def reports(self) -> List[MetricsReport]:
        return [report for fold in self.folds for report in fold.reports]

    @property
    def predictions(self) -> List[PredictionRow]:
        return [row for fold in self.folds for row in fold.predictions]

    def summaries(self) -> List[FoldSummary]:
        """One summary per (representation, criterion, abstention), in first-seen order."""
        cells: Dict[Tuple[Representation, Criterion, Abstention], List[MetricsReport]] = {}
        for report in self.reports:
            cells.setdefault((report.representation, report.criterion, report.abstention), []).append(report)
        return [FoldSummary.summarize(reports) for reports in cells.values()]

    def summary(self, representation: Representation, criterion: Criterion,
                abstention: Abstention = Abstention.SCORED) -> FoldSummary:
        for summary in self.summaries():
            if (summary.representation, summary.criterion, summary.abstention) == (representation, criterion, abstention):
                return summary
        raise KeyError(f"{representation.value}:{criterion.value}:{abstention.value}")


def _representation_predictions(representation: Representation, archive: Archive, test: Dataset,
                                latents: LatentSet, config: PipelineConfig) -> Predictions:
    if representation is Representation.BINARY_MONOGRAM:
        return leave_one_out(archive, Metric.HAMMING, config.criteria)
    if representation is Representation.REAL_MONOGRAM:
        return leave_one_out(archive, config.real_metric, config.criteria)
    vectors = {
        Representation.IMAGE_UNIMODAL: lambda: test.matrix(Modality.IMAGE),
        Representation.SEQUENCE_UNIMODAL: lambda: test.matrix(Modality.SEQUENCE),
        Representation.IMAGE_LATENT: lambda: latents.u,
        Representation.SEQUENCE_LATENT: lambda: latents.v,
    }[representation]()
    return leave_one_out_vectors(test.case_ids, test.labels, vectors, config.criteria)


def run_fold(dataset: Dataset, folds: FoldAssignment, fold: int, config: PipelineConfig) -> Optional[FoldResult]:
    """Train on every fold but one and evaluate leave-one-out on the held-out fold.

    Returns None, with a warning, when either split holds a single class.
    """
    train = dataset.subset(folds.train_ids(fold))
    test = dataset.subset(folds.test_ids(fold))
    if len(set(test.labels)) < 2 or len(set(train.labels)) < 2:
        logger.warning("Skipping fold %d: a split holds a single class", fold)
        return None
    logger.info("Fold %d: %d training and %d test cases", fold, len(train), len(test))

    params = fit_dataset_scaling(train)
    train_scaled = scale_dataset(params, train)
    test_scaled = scale_dataset(params, test)
    pairs = list(zip(train_scaled.matrix(Modality.IMAGE), train_scaled.matrix(Modality.SEQUENCE)))

    image_model, image_curve = train_hybrid(
        Direction.IMAGE_TO_SEQ, pairs, replace(config.image_to_seq, seed=stage_seed(config.seed, fold, IMAGE_AE_STAGE))
    )
    seq_model, seq_curve = train_hybrid(
        Direction.SEQ_TO_IMAGE, pairs, replace(config.seq_to_image, seed=stage_seed(config.seed, fold, SEQ_AE_STAGE))
    )
    fusion_hyper = replace(config.fusion, seed=stage_seed(config.seed, fold, FUSION_STAGE))
    q = FusionNetwork.build(seed=fusion_hyper.seed, threshold=fusion_hyper.threshold)
    q, fusion_curve = train_fusion(q, encode_latents(image_model, seq_model, train_scaled), fusion_hyper)

    test_latents = encode_latents(image_model, seq_model, test_scaled)
    monograms = generate_monograms(q, test_latents.u, test_latents.v)
    archive = Archive.from_monograms(test_latents.case_ids, test_latents.labels, monograms, fusion_hyper.threshold)

    reports, rows = [], []
    for representation in map(Representation, config.representations):
        predictions = _representation_predictions(representation, archive, test_scaled, test_latents, config)
        reports.extend(score_predictions(predictions, representation, fold))
        for criterion, case_rows in predictions.items():
            rows.extend(
                PredictionRow(fold, representation, criterion, row.case_id, row.truth, row.predicted, row.support)
                for row in case_rows
            )
    curves = {"image-to-seq": image_curve, "seq-to-image": seq_curve, "fusion": fusion_curve}
    return FoldResult(fold, len(train), len(test), reports, rows, curves)


def cross_validate(dataset: Dataset, folds: FoldAssignment, config: PipelineConfig,
                   only: Optional[Sequence[int]] = None) -> CrossValidationResult:
    """Run every fold and collect per-fold reports; summaries follow from the result.

    Args:
        dataset: Unscaled dataset covering every case in folds.
        folds: Fold assignment to evaluate.
        config: Pipeline hyperparameters and evaluation settings.
        only: Restrict to these fold indices.
    """
    config.validate()
    indices = list(range(folds.k)) if only is None else sorted(only)
    if config.workers > 1 and len(indices) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(lambda f: run_fold(dataset, folds, f, config), indices))
    else:
        outcomes = [run_fold(dataset, folds, f, config) for f in indices]
    completed = [result for result in outcomes if result is not None]
    skipped = [f for f, result in zip(indices, outcomes) if result is None]
    logger.info("Cross-validation finished: %d fold(s) evaluated, %d skipped", len(completed), len(skipped))
    return CrossValidationResult(completed, skipped)
