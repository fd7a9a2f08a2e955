"""Run configuration: built-in defaults, a JSON profile file and flag overrides.

patientcode.json holds a "defaults" block and named "profiles"; the active
profile is chosen with --profile. Later layers win:

    built-in defaults < "defaults" < selected profile < command-line flags

Every field is validated once, and a failure names its dotted field.
"""

import copy
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from patientcode.archive.archive import Metric
from patientcode.data.dataset import DatasetSchema
from patientcode.data.synthetic import SynthConfig
from patientcode.errors import ConfigError
from patientcode.evaluation.cross_validation import PipelineConfig
from patientcode.evaluation.metrics import ALL_CRITERIA, ALL_REPRESENTATIONS, Criterion, Representation
from patientcode.fusion.fusion_network import ThresholdMode
from patientcode.fusion.mining import MiningSpace
from patientcode.fusion.training import FusionHyper
from patientcode.latent.autoencoder import AutoencoderHyper

logger = logging.getLogger(__name__)

CONFIG_FILE = "patientcode.json"
DEFAULT_PROFILE = "synth"

BUILTIN_DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "output_dir": "out",
    "data": {"dataset": None, "image_dim": 768, "sequence_dim": 768},
    "folds": {"k": 5},
    "autoencoder": {
        "image_to_seq": {"epochs": 150, "learning_rate": 1e-5, "batch_size": None},
        "seq_to_image": {"epochs": 50, "learning_rate": 1e-4, "batch_size": None},
    },
    "fusion": {
        "epochs": 150,
        "learning_rate": 1e-5,
        "alpha": 1.0,
        "batch_size": 32,
        "threshold": ThresholdMode.ZERO.value,
        "mining_space": MiningSpace.CODES.value,
    },
    "evaluation": {
        "criteria": [c.value for c in ALL_CRITERIA],
        "representations": [r.value for r in ALL_REPRESENTATIONS],
        "real_metric": Metric.EUCLIDEAN.value,
        "workers": 1,
        "sample_per_class": 19,
        "pca_components": 64,
    },
    "synth": {
        "n_classes": 2,
        "per_class": 100,
        "image_dim": 768,
        "sequence_dim": 768,
        "image_signal": 0.5,
        "sequence_signal": 0.5,
        "noise": 0.3,
    },
}


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge override into a copy of base; nested dicts merge, everything else replaces."""
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def set_dotted(tree: Dict[str, Any], dotted: str, value: Any) -> None:
    node = tree
    *parents, leaf = dotted.split(".")
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


def _check_keys(tree: Mapping[str, Any], reference: Mapping[str, Any], prefix: str = "") -> None:
    for key, value in tree.items():
        dotted = f"{prefix}{key}"
        if key not in reference:
            raise ConfigError(dotted, "unknown configuration key")
        if isinstance(reference[key], Mapping):
            if not isinstance(value, Mapping):
                raise ConfigError(dotted, "expected an object")
            _check_keys(value, reference[key], f"{dotted}.")


def read_config_file(path: Path) -> Dict[str, Any]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"{path} is not valid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise ConfigError("config", f"{path} must hold a JSON object")
    return payload


@dataclass(frozen=True)
class RunConfig:
    """Validated settings of one CLI run."""

    profile: str
    seed: int
    output_dir: Path
    dataset: Optional[Path]
    schema: DatasetSchema
    folds: int
    image_to_seq: AutoencoderHyper
    seq_to_image: AutoencoderHyper
    fusion: FusionHyper
    criteria: Tuple[Criterion, ...]
    representations: Tuple[Representation, ...]
    real_metric: Metric
    workers: int
    sample_per_class: int
    pca_components: int
    synth: SynthConfig
    raw: Mapping[str, Any]

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            image_to_seq=self.image_to_seq,
            seq_to_image=self.seq_to_image,
            fusion=self.fusion,
            criteria=self.criteria,
            representations=self.representations,
            real_metric=self.real_metric,
            seed=self.seed,
            workers=self.workers,
        )

    def snapshot(self) -> Dict[str, Any]:
        """The merged configuration tree, JSON-serialisable."""
        return {"profile": self.profile, **copy.deepcopy(dict(self.raw))}

    def require_dataset(self, override: Optional[Path] = None) -> Path:
        path = Path(override) if override is not None else self.dataset
        if path is None:
            raise ConfigError("data.dataset", "no dataset given; pass --data or set it in the profile")
        if not path.exists():
            raise ConfigError("data.dataset", f"{path} does not exist")
        return path


def _number(tree: Mapping[str, Any], dotted: str, kind=float, minimum=None, exclusive: bool = False):
    node: Any = tree
    for key in dotted.split("."):
        node = node[key]
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(dotted, f"expected a number, got {node!r}")
    if kind is int and int(node) != node:
        raise ConfigError(dotted, f"expected an integer, got {node!r}")
    value = kind(node)
    if minimum is not None and (value <= minimum if exclusive else value < minimum):
        raise ConfigError(dotted, f"must be {'>' if exclusive else '>='} {minimum}, got {value}")
    return value


def _choice(enum_cls, value: Any, dotted: str):
    try:
        return enum_cls(value)
    except ValueError as e:
        allowed = ", ".join(m.value for m in enum_cls)
        raise ConfigError(dotted, f"{value!r} is not one of: {allowed}") from e


def _autoencoder(tree: Mapping[str, Any], name: str, seed: int) -> AutoencoderHyper:
    prefix = f"autoencoder.{name}"
    batch = tree["autoencoder"][name].get("batch_size")
    if batch is not None:
        batch = _number(tree, f"{prefix}.batch_size", int, 1)
    return AutoencoderHyper(
        epochs=_number(tree, f"{prefix}.epochs", int, 0),
        learning_rate=_number(tree, f"{prefix}.learning_rate", float, 0, exclusive=True),
        seed=seed,
        batch_size=batch,
    )


def build_run_config(tree: Mapping[str, Any], profile: str) -> RunConfig:
    """Validate a merged configuration tree.

    Raises:
        ConfigError: Naming the first invalid field.
    """
    _check_keys(tree, BUILTIN_DEFAULTS)
    seed = _number(tree, "seed", int, 0)
    fusion = FusionHyper(
        epochs=_number(tree, "fusion.epochs", int, 0),
        learning_rate=_number(tree, "fusion.learning_rate", float, 0, exclusive=True),
        alpha=_number(tree, "fusion.alpha", float, 0),
        batch_size=_number(tree, "fusion.batch_size", int, 1),
        seed=seed,
        threshold=_choice(ThresholdMode, tree["fusion"]["threshold"], "fusion.threshold"),
        mining_space=_choice(MiningSpace, tree["fusion"]["mining_space"], "fusion.mining_space"),
    )
    evaluation = tree["evaluation"]
    criteria = tuple(_choice(Criterion, c, "evaluation.criteria") for c in evaluation["criteria"])
    representations = tuple(_choice(Representation, r, "evaluation.representations") for r in evaluation["representations"])
    if not criteria:
        raise ConfigError("evaluation.criteria", "at least one criterion is required")
    if not representations:
        raise ConfigError("evaluation.representations", "at least one representation is required")
    real_metric = _choice(Metric, evaluation["real_metric"], "evaluation.real_metric")
    if real_metric is Metric.HAMMING:
        raise ConfigError("evaluation.real_metric", "real-code retrieval needs euclidean or cosine")

    synth_cfg = SynthConfig(
        n_classes=_number(tree, "synth.n_classes", int),
        per_class=_number(tree, "synth.per_class", int),
        image_dim=_number(tree, "synth.image_dim", int),
        sequence_dim=_number(tree, "synth.sequence_dim", int),
        image_signal=_number(tree, "synth.image_signal"),
        sequence_signal=_number(tree, "synth.sequence_signal"),
        noise=_number(tree, "synth.noise"),
        seed=seed,
    ).validate()

    dataset = tree["data"].get("dataset")
    return RunConfig(
        profile=profile,
        seed=seed,
        output_dir=Path(tree["output_dir"]),
        dataset=Path(dataset) if dataset else None,
        schema=DatasetSchema(_number(tree, "data.image_dim", int, 1), _number(tree, "data.sequence_dim", int, 1)),
        folds=_number(tree, "folds.k", int, 2),
        image_to_seq=_autoencoder(tree, "image_to_seq", seed),
        seq_to_image=_autoencoder(tree, "seq_to_image", seed),
        fusion=fusion,
        criteria=criteria,
        representations=representations,
        real_metric=real_metric,
        workers=_number(tree, "evaluation.workers", int, 1),
        sample_per_class=_number(tree, "evaluation.sample_per_class", int, 1),
        pca_components=_number(tree, "evaluation.pca_components", int, 1),
        synth=synth_cfg,
        raw=tree,
    )


def load_config(path: Optional[Path] = None, profile: Optional[str] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Resolve the run configuration from the file, the profile and dotted overrides.

    Args:
        path: Config file; patientcode.json in the working directory when it
            exists, built-in defaults only otherwise.
        profile: Profile name; "synth" when omitted.
        overrides: Dotted keys (e.g. "fusion.alpha") set from command-line flags.

    Raises:
        ConfigError: Unreadable file, unknown profile or invalid field.
    """
    profile = profile or DEFAULT_PROFILE
    tree = copy.deepcopy(BUILTIN_DEFAULTS)
    if path is None and Path(CONFIG_FILE).exists():
        path = Path(CONFIG_FILE)
    if path is not None:
        payload = read_config_file(path)
        unknown = set(payload) - {"defaults", "profiles"}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown top-level key; expected defaults and profiles")
        profiles = payload.get("profiles", {})
        tree = deep_merge(tree, payload.get("defaults", {}))
        if profile not in profiles:
            raise ConfigError("profile", f"no profile named {profile!r}. Available profiles: {', '.join(sorted(profiles)) or 'none'}")
        tree = deep_merge(tree, profiles[profile])
        logger.debug("Loaded profile %s from %s", profile, path)
    elif profile != DEFAULT_PROFILE:
        raise ConfigError("profile", f"profile {profile!r} requested but no {CONFIG_FILE} found")
    for dotted, value in (overrides or {}).items():
        if value is not None:
            set_dotted(tree, dotted, value)
    return build_run_config(tree, profile)
