"""Argument parsing and exit-code mapping for the command line."""

import argparse
import logging
import re
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from patientcode.archive.archive import Metric
from patientcode.cli.commands import COMMANDS, CommandContext
from patientcode.cli.config import load_config
from patientcode.errors import ConfigError, DataError, PatientCodeError, UsageError
from patientcode.fusion.fusion_network import ThresholdMode
from patientcode.fusion.mining import MiningSpace
from patientcode.settings import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0

# flag dest -> dotted config key
FLAG_OVERRIDES: Dict[str, str] = {
    "seed": "seed",
    "out": "output_dir",
    "folds": "folds.k",
    "epochs_ae_image": "autoencoder.image_to_seq.epochs",
    "lr_ae_image": "autoencoder.image_to_seq.learning_rate",
    "epochs_ae_seq": "autoencoder.seq_to_image.epochs",
    "lr_ae_seq": "autoencoder.seq_to_image.learning_rate",
    "epochs_fusion": "fusion.epochs",
    "lr_fusion": "fusion.learning_rate",
    "alpha": "fusion.alpha",
    "batch": "fusion.batch_size",
    "threshold": "fusion.threshold",
    "mining_space": "fusion.mining_space",
    "workers": "evaluation.workers",
    "sample_per_class": "evaluation.sample_per_class",
    "pca_components": "evaluation.pca_components",
    "classes": "synth.n_classes",
    "per_class": "synth.per_class",
    "signal_image": "synth.image_signal",
    "signal_seq": "synth.sequence_signal",
    "noise": "synth.noise",
}


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on bad arguments."""

    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage().strip()}")


def _common_flags() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--force", action="store_true", help="allow overwriting existing outputs")
    common.add_argument("--seed", type=int)
    common.add_argument("--folds", type=int)
    common.add_argument("--epochs-ae-image", type=int)
    common.add_argument("--lr-ae-image", type=float)
    common.add_argument("--epochs-ae-seq", type=int)
    common.add_argument("--lr-ae-seq", type=float)
    common.add_argument("--epochs-fusion", type=int)
    common.add_argument("--lr-fusion", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--batch", type=int)
    common.add_argument("--threshold", choices=[m.value for m in ThresholdMode])
    common.add_argument("--mining-space", choices=[m.value for m in MiningSpace])
    common.add_argument("--workers", type=int)
    common.add_argument("--dim", type=int, help="embedding dimension of both modalities")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="app.py", description="Multimodal binary patient codes: train, index, search and evaluate.")
    parser.add_argument("--config", type=Path, help="config file (default: ./patientcode.json when present)")
    parser.add_argument("--profile", help="profile in the config file (default: synth)")
    sub = parser.add_subparsers(dest="command", metavar="<subcommand>", parser_class=_Parser)
    common = _common_flags()

    synth = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    synth.add_argument("--classes", type=int)
    synth.add_argument("--per-class", type=int)
    synth.add_argument("--signal-image", type=float)
    synth.add_argument("--signal-seq", type=float)
    synth.add_argument("--noise", type=float)

    train_ae = sub.add_parser("train-ae", parents=[common], help="train both hybrid autoencoders")
    train_ae.add_argument("--data", type=Path)

    encode = sub.add_parser("encode", parents=[common], help="encode cases into latent pairs")
    encode.add_argument("--data", type=Path)
    encode.add_argument("--models", type=Path, required=True)

    train_fusion = sub.add_parser("train-fusion", parents=[common], help="train the fusion network")
    train_fusion.add_argument("--latents", type=Path, required=True)

    index = sub.add_parser("index", parents=[common], help="build a monogram archive")
    index.add_argument("--latents", type=Path, required=True)
    index.add_argument("--model", type=Path, required=True)

    search = sub.add_parser("search", parents=[common], help="rank archived cases against a query case")
    search.add_argument("--archive", type=Path, required=True)
    search.add_argument("--case-id", required=True)
    search.add_argument("--data", type=Path)
    search.add_argument("--models", type=Path)
    search.add_argument("--k", type=int, default=5)
    search.add_argument("--metric", choices=[m.value for m in Metric], default=Metric.HAMMING.value)
    search.add_argument("--exclude-self", action="store_true")

    evaluate = sub.add_parser("evaluate", parents=[common], help="cross-validated retrieval evaluation")
    evaluate.add_argument("--data", type=Path)

    report = sub.add_parser("report", parents=[common], help="dissimilarity, PCA and reconstruction tables")
    report.add_argument("--data", type=Path)
    report.add_argument("--models", type=Path, required=True)
    report.add_argument("--sample-per-class", type=int)
    report.add_argument("--pca-components", type=int)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, object]:
    values = vars(args)
    overrides = {dotted: values[dest] for dest, dotted in FLAG_OVERRIDES.items() if values.get(dest) is not None}
    if values.get("dim") is not None:
        for dotted in ("data.image_dim", "data.sequence_dim", "synth.image_dim", "synth.sequence_dim"):
            overrides[dotted] = values["dim"]
    if "output_dir" in overrides:
        overrides["output_dir"] = str(overrides["output_dir"])
    return overrides


def _manifest_suffix(args: argparse.Namespace) -> str:
    if args.command != "search":
        return ""
    return "-" + re.sub(r"[^A-Za-z0-9._-]", "_", args.case_id)


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit status.

    0 on success; otherwise the exit code of the raised error (1 usage,
    2 config, 3 data or unreadable file, 4 training divergence) with a
    one-line diagnostic. Other value errors exit 1.
    """
    configure_logging()
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(list(sys.argv[1:] if argv is None else argv))
        except SystemExit as e:
            return int(e.code or 0)
        if args.command is None:
            raise UsageError(f"a subcommand is required\n{parser.format_usage().strip()}")
        config = load_config(args.config, args.profile, _overrides(args))
        arguments = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "force")}
        ctx = CommandContext(args.command, config, config.output_dir, args.force, arguments)
        artifacts: List[Path] = COMMANDS[args.command](ctx, args)
        ctx.finish(artifacts, _manifest_suffix(args))
        return EXIT_OK
    except ConfigError as e:
        logger.error("config error: %s", e)
        return e.exit_code
    except PatientCodeError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    except OSError as e:
        logger.error("I/O error: %s", e)
        return DataError.exit_code
    except ValueError as e:
        logger.error("unexpected %s: %s", type(e).__name__, e)
        return PatientCodeError.exit_code
