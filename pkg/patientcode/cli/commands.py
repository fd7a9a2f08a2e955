"""Subcommand implementations.

Each command reads its inputs, refuses to overwrite existing outputs unless
--force is given, writes its artifacts under the output directory and ends
with a manifest describing the run.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from patientcode.archive.archive import Archive, ArchiveEntry, Metric
from patientcode.cli.config import RunConfig
from patientcode.cli.manifest import build_manifest, manifest_name, render_manifest
from patientcode.data.dataset import Dataset, Modality, load_dataset, write_dataset, write_dump
from patientcode.data.folds import make_folds
from patientcode.data.scaling import fit_dataset_scaling, load_scaling, save_scaling, scale_dataset
from patientcode.data.synthetic import synth_generate
from patientcode.errors import DataError, UsageError
from patientcode.evaluation.cross_validation import FUSION_STAGE, IMAGE_AE_STAGE, SEQ_AE_STAGE, cross_validate, stage_seed
from patientcode.evaluation.dissimilarity import (
    bit_flip_grid,
    class_block_means,
    sample_per_class,
    xor_dissimilarity,
)
from patientcode.evaluation.pca import pca_project
from patientcode.evaluation.reports import (
    curves_table,
    fold_metrics_table,
    predictions_table,
    summary_table,
    write_table,
)
from patientcode.fusion.fusion_network import GRID, FusionNetwork, generate_monograms
from patientcode.fusion.training import train_fusion
from patientcode.latent.autoencoder import (
    Direction,
    HybridAutoencoder,
    encode_latents,
    read_latents,
    train_hybrid,
    write_latents,
)
from patientcode.latent.reconstruction import reconstruction_report

logger = logging.getLogger(__name__)

DATASET_FILE = "dataset.txt"
IMAGE_MODEL_FILE = "ae_image.mblx"
SEQ_MODEL_FILE = "ae_seq.mblx"
SCALE_FILE = "scale.json"
AE_CURVES_FILE = "ae_curves.csv"
LATENTS_FILE = "latents.txt"
FUSION_MODEL_FILE = "fusion.mblx"
FUSION_CURVE_FILE = "fusion_curve.csv"
ARCHIVE_FILE = "archive.txt"
FOLD_METRICS_FILE = "fold_metrics.csv"
SUMMARY_FILE = "summary.csv"
PREDICTIONS_FILE = "predictions.csv"
XOR_MATRIX_FILE = "xor_matrix.csv"
BIT_FLIPS_FILE = "bit_flips.csv"
CLASS_BLOCKS_FILE = "class_blocks.csv"
RECONSTRUCTION_FILE = "reconstruction.csv"
PCA_SOURCES = ("real", "u", "v")


@dataclass
class CommandContext:
    command: str
    config: RunConfig
    out: Path
    force: bool = False
    arguments: Dict[str, Any] = field(default_factory=dict)

    def claim(self, *names: str) -> List[Path]:
        """Output paths for this run; existing files are refused without --force."""
        paths = [self.out / name for name in names]
        if not self.force:
            existing = [str(p) for p in paths if p.exists()]
            if existing:
                raise UsageError(f"refusing to overwrite {', '.join(existing)}; pass --force")
        self.out.mkdir(parents=True, exist_ok=True)
        return paths

    def finish(self, artifacts: List[Path], manifest_suffix: str = "") -> Path:
        """Write the run manifest; an unchanged manifest may be rewritten without --force."""
        manifest = build_manifest(self.command, self.arguments, self.config.snapshot(), self.config.seed,
                                  artifacts, self.out)
        text = render_manifest(manifest)
        path = self.out / manifest_name(self.command + manifest_suffix)
        if path.exists() and not self.force and path.read_text(encoding="utf-8") != text:
            raise UsageError(f"refusing to overwrite {path}; pass --force")
        self.out.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
        logger.info("%s finished; %d artifact(s) under %s", self.command, len(artifacts), self.out)
        return path


def _load(ctx: CommandContext, data: Optional[Path]) -> Dataset:
    return load_dataset(ctx.config.require_dataset(data), ctx.config.schema)


def _require_file(path: Path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{what} {path} does not exist")
    return path


def _load_models(models: Path) -> Tuple[HybridAutoencoder, HybridAutoencoder, dict]:
    models = Path(models)
    image_model = HybridAutoencoder.load(_require_file(models / IMAGE_MODEL_FILE, "model"), Direction.IMAGE_TO_SEQ)
    seq_model = HybridAutoencoder.load(_require_file(models / SEQ_MODEL_FILE, "model"), Direction.SEQ_TO_IMAGE)
    scaling = load_scaling(_require_file(models / SCALE_FILE, "scaling file"))
    return image_model, seq_model, scaling


def _load_fusion(ctx: CommandContext, path: Path) -> FusionNetwork:
    return FusionNetwork.load(_require_file(path, "fusion model"), ctx.config.fusion.threshold)


def cmd_synth(ctx: CommandContext, args) -> List[Path]:
    (dataset_path,) = ctx.claim(DATASET_FILE)
    dataset = synth_generate(ctx.config.synth)
    write_dataset(dataset_path, dataset)
    logger.info("Generated %d synthetic cases in %d classes", len(dataset), len(dataset.classes))
    return [dataset_path]


def cmd_train_ae(ctx: CommandContext, args) -> List[Path]:
    paths = ctx.claim(IMAGE_MODEL_FILE, SEQ_MODEL_FILE, SCALE_FILE, AE_CURVES_FILE)
    dataset = _load(ctx, args.data)
    scaling = fit_dataset_scaling(dataset)
    scaled = scale_dataset(scaling, dataset)
    pairs = list(zip(scaled.matrix(Modality.IMAGE), scaled.matrix(Modality.SEQUENCE)))
    cfg = ctx.config
    image_model, image_curve = train_hybrid(
        Direction.IMAGE_TO_SEQ, pairs, replace(cfg.image_to_seq, seed=stage_seed(cfg.seed, 0, IMAGE_AE_STAGE))
    )
    seq_model, seq_curve = train_hybrid(
        Direction.SEQ_TO_IMAGE, pairs, replace(cfg.seq_to_image, seed=stage_seed(cfg.seed, 0, SEQ_AE_STAGE))
    )
    image_model.save(paths[0])
    seq_model.save(paths[1])
    save_scaling(paths[2], scaling)
    write_table(curves_table({Direction.IMAGE_TO_SEQ.value: image_curve, Direction.SEQ_TO_IMAGE.value: seq_curve}), paths[3])
    return paths


def cmd_encode(ctx: CommandContext, args) -> List[Path]:
    (latents_path,) = ctx.claim(LATENTS_FILE)
    dataset = _load(ctx, args.data)
    image_model, seq_model, scaling = _load_models(args.models)
    latents = encode_latents(image_model, seq_model, scale_dataset(scaling, dataset))
    write_latents(latents_path, latents)
    return [latents_path]


def cmd_train_fusion(ctx: CommandContext, args) -> List[Path]:
    model_path, curve_path = ctx.claim(FUSION_MODEL_FILE, FUSION_CURVE_FILE)
    latents = read_latents(_require_file(args.latents, "latents file"))
    hyper = replace(ctx.config.fusion, seed=stage_seed(ctx.config.seed, 0, FUSION_STAGE))
    q = FusionNetwork.build(latent_dim=latents.u.shape[1], seed=hyper.seed, threshold=hyper.threshold)
    q, curve = train_fusion(q, latents, hyper)
    q.save(model_path)
    write_table(curves_table({"fusion": curve}), curve_path)
    return [model_path, curve_path]


def cmd_index(ctx: CommandContext, args) -> List[Path]:
    (archive_path,) = ctx.claim(ARCHIVE_FILE)
    latents = read_latents(_require_file(args.latents, "latents file"))
    q = _load_fusion(ctx, args.model)
    monograms = generate_monograms(q, latents.u, latents.v)
    archive = Archive.from_monograms(latents.case_ids, latents.labels, monograms, q.threshold)
    archive.save(archive_path)
    return [archive_path]


def _encode_case(ctx: CommandContext, args, case_id: str):
    if args.data is None or args.models is None:
        raise DataError(f"case {case_id!r} is not archived; pass --data and --models to encode it")
    dataset = _load(ctx, args.data)
    if case_id not in dataset.case_ids:
        raise DataError(f"case {case_id!r} is not in {args.data}")
    image_model, seq_model, scaling = _load_models(args.models)
    case = scale_dataset(scaling, dataset.subset([case_id]))
    latents = encode_latents(image_model, seq_model, case)
    q = _load_fusion(ctx, Path(args.models) / FUSION_MODEL_FILE)
    return generate_monograms(q, latents.u, latents.v)[0]


def cmd_search(ctx: CommandContext, args) -> List[Path]:
    archive = Archive.load(_require_file(args.archive, "archive"))
    if args.case_id in archive and args.data is None:
        query = archive.get(args.case_id).monogram
    else:
        query = _encode_case(ctx, args, args.case_id)
    exclude = args.case_id if args.exclude_self else None
    hits = archive.search_topk(query, args.k, Metric(args.metric), exclude)
    table = pd.DataFrame(
        [{"rank": rank, "case_id": h.case_id, "label": h.label, "distance": h.distance} for rank, h in enumerate(hits, 1)],
        columns=["rank", "case_id", "label", "distance"],
    )
    print(table.to_string(index=False) if len(table) else "no hits")
    return []


def _xor_outputs(entries: List[ArchiveEntry], sample: List[ArchiveEntry], paths: List[Path]) -> None:
    matrix_path, flips_path, blocks_path = paths
    write_table(xor_dissimilarity(sample, sample).to_frame(), matrix_path, index=True)
    write_table(class_block_means(xor_dissimilarity(entries, entries)), blocks_path, index=True)

    first_of: Dict[str, List[ArchiveEntry]] = {}
    for entry in sample:
        first_of.setdefault(entry.label, []).append(entry)
    pairs = []
    labels = sorted(first_of)
    for i, label in enumerate(labels):
        members = first_of[label]
        if len(members) > 1:
            pairs.append((members[0], members[1]))
        pairs.extend((members[0], first_of[other][0]) for other in labels[i + 1:])
    rows = []
    for a, b in pairs:
        grid = bit_flip_grid(a.bits, b.bits)
        rows.extend(
            {"case_a": a.case_id, "case_b": b.case_id, "row": r, "col": c, "flip": int(grid[r, c])}
            for r in range(GRID) for c in range(GRID)
        )
    write_table(pd.DataFrame(rows, columns=["case_a", "case_b", "row", "col", "flip"]), flips_path)


def _pca_output(path: Path, tag: str, case_ids, labels, vectors: np.ndarray, wanted: int) -> None:
    components = min(wanted, vectors.shape[0], vectors.shape[1])
    if components < wanted:
        logger.warning("PCA of %s limited to %d component(s) by data shape %s", tag, components, vectors.shape)
    result = pca_project(vectors, components)
    width = result.projected.shape[1]
    write_dump(path, {tag: width}, ((cid, label, tag, row) for cid, label, row in zip(case_ids, labels, result.projected)))


def cmd_report(ctx: CommandContext, args) -> List[Path]:
    pca_names = [f"pca_{source}.txt" for source in PCA_SOURCES]
    paths = ctx.claim(XOR_MATRIX_FILE, BIT_FLIPS_FILE, CLASS_BLOCKS_FILE, *pca_names, RECONSTRUCTION_FILE)
    dataset = _load(ctx, args.data)
    image_model, seq_model, scaling = _load_models(args.models)
    q = _load_fusion(ctx, Path(args.models) / FUSION_MODEL_FILE)
    scaled = scale_dataset(scaling, dataset)
    latents = encode_latents(image_model, seq_model, scaled)
    monograms = generate_monograms(q, latents.u, latents.v)
    entries = [ArchiveEntry.from_monogram(cid, label, m) for cid, label, m in zip(latents.case_ids, latents.labels, monograms)]

    sample = sample_per_class(entries, ctx.config.sample_per_class, ctx.config.seed)
    _xor_outputs(entries, sample, paths[:3])
    codes = np.stack([m.real_code for m in monograms])
    for path, source, vectors in zip(paths[3:6], PCA_SOURCES, (codes, latents.u, latents.v)):
        _pca_output(path, f"pca-{source}", latents.case_ids, latents.labels, vectors, ctx.config.pca_components)
    write_table(reconstruction_report(image_model, seq_model, scaled).to_frame(), paths[6])
    return paths


def cmd_evaluate(ctx: CommandContext, args) -> List[Path]:
    paths = ctx.claim(FOLD_METRICS_FILE, SUMMARY_FILE, PREDICTIONS_FILE)
    dataset = _load(ctx, args.data)
    folds = make_folds(dataset, ctx.config.folds, ctx.config.seed)
    result = cross_validate(dataset, folds, ctx.config.pipeline())
    if not result.folds:
        raise DataError("every fold was skipped; nothing to report")
    write_table(fold_metrics_table(result.reports), paths[0])
    write_table(summary_table(result.summaries()), paths[1])
    write_table(predictions_table(result.predictions), paths[2])
    return paths


COMMANDS: Dict[str, Callable[[CommandContext, Any], List[Path]]] = {
    "synth": cmd_synth,
    "train-ae": cmd_train_ae,
    "encode": cmd_encode,
    "train-fusion": cmd_train_fusion,
    "index": cmd_index,
    "search": cmd_search,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}
