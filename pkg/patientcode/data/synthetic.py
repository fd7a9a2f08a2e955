"""Synthetic multimodal datasets for desk-scale runs and tests.

Every class owns one hidden prototype per modality. A case embedding is

    signal * prototype[class] + noise * N(0, I)

so each modality carries a tunable amount of class information. With both
signals at 0 the labels are independent of the embeddings.
"""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from patientcode.data.dataset import CaseRecord, Dataset, DatasetSchema, Embedding, Modality
from patientcode.errors import ConfigError


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the prototype-plus-noise generator."""

    n_classes: int = 2
    per_class: int = 100
    image_dim: int = 768
    sequence_dim: int = 768
    image_signal: float = 0.5
    sequence_signal: float = 0.5
    noise: float = 0.3
    seed: int = 0

    def validate(self) -> "SynthConfig":
        if self.n_classes < 2:
            raise ConfigError("synth.n_classes", f"need at least 2 classes, got {self.n_classes}")
        if self.per_class < 2:
            raise ConfigError("synth.per_class", f"need at least 2 cases per class, got {self.per_class}")
        for name in ("image_dim", "sequence_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"synth.{name}", "dimension must be positive")
        for name in ("image_signal", "sequence_signal"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"synth.{name}", f"signal strength must lie in [0, 1], got {value}")
        if self.noise < 0:
            raise ConfigError("synth.noise", f"noise scale must be non-negative, got {self.noise}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def _case_id(index: int) -> str:
    return f"case-{index:05d}"


def synth_generate(cfg: SynthConfig) -> Dataset:
    """Generate a labelled two-modality dataset, bit-identical per seed."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    image_protos = rng.standard_normal((cfg.n_classes, cfg.image_dim))
    sequence_protos = rng.standard_normal((cfg.n_classes, cfg.sequence_dim))
    n = cfg.n_classes * cfg.per_class
    image_noise = rng.standard_normal((n, cfg.image_dim))
    sequence_noise = rng.standard_normal((n, cfg.sequence_dim))

    cases = []
    for index in range(n):
        cls = index // cfg.per_class
        f = cfg.image_signal * image_protos[cls] + cfg.noise * image_noise[index]
        g = cfg.sequence_signal * sequence_protos[cls] + cfg.noise * sequence_noise[index]
        cases.append(CaseRecord(
            _case_id(index),
            f"class-{cls}",
            Embedding(f, Modality.IMAGE),
            Embedding(g, Modality.SEQUENCE),
        ))
    return Dataset(tuple(cases), DatasetSchema(cfg.image_dim, cfg.sequence_dim))


def synth_linear_pairs(n_cases: int, image_dim: int, sequence_dim: int, noise: float = 0.0,
                       seed: int = 0, n_classes: int = 2, mapping: Optional[np.ndarray] = None) -> Dataset:
    """Cases whose sequence embedding is a fixed linear map of the image embedding.

    Used to check that a hybrid autoencoder can learn a cross-modal map.
    """
    rng = np.random.default_rng(seed)
    if mapping is None:
        mapping = rng.standard_normal((sequence_dim, image_dim)) / np.sqrt(image_dim)
    f = rng.uniform(0.0, 1.0, size=(n_cases, image_dim))
    g = f @ mapping.T + noise * rng.standard_normal((n_cases, sequence_dim))
    cases = tuple(
        CaseRecord(_case_id(i), f"class-{i % n_classes}", Embedding(f[i], Modality.IMAGE), Embedding(g[i], Modality.SEQUENCE))
        for i in range(n_cases)
    )
    return Dataset(cases, DatasetSchema(image_dim, sequence_dim))
