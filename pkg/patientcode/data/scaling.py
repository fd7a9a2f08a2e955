"""Per-dimension min-max rescaling fitted on a training split."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict

import numpy as np

from patientcode.data.dataset import Dataset, DatasetSchema, Embedding, Modality
from patientcode.errors import IngestionError, ParseError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScaleParams:
    """Per-dimension minimum and maximum of one modality."""

    modality: Modality
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self) -> None:
        minimum = np.array(self.minimum, dtype=np.float64)
        maximum = np.array(self.maximum, dtype=np.float64)
        if minimum.shape != maximum.shape or minimum.ndim != 1:
            raise ShapeError("minimum and maximum must be vectors of equal length")
        if np.any(minimum > maximum):
            raise ShapeError("minimum exceeds maximum in at least one dimension")
        minimum.setflags(write=False)
        maximum.setflags(write=False)
        object.__setattr__(self, "minimum", minimum)
        object.__setattr__(self, "maximum", maximum)

    @property
    def dim(self) -> int:
        return self.minimum.shape[0]

    @property
    def constant(self) -> np.ndarray:
        """Mask of dimensions where min equals max."""
        return self.minimum == self.maximum

    def to_dict(self) -> dict:
        return {"modality": self.modality.value, "minimum": self.minimum.tolist(), "maximum": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ScaleParams":
        return cls(Modality(data["modality"]), np.asarray(data["minimum"]), np.asarray(data["maximum"]))


def fit_minmax(dataset: Dataset, modality: Modality) -> ScaleParams:
    """Fit per-dimension min/max of one modality over the given (training) cases.

    Raises:
        IngestionError: The dataset is empty.
    """
    if len(dataset) == 0:
        raise IngestionError("cannot fit min-max scaling on an empty dataset")
    values = dataset.matrix(modality)
    params = ScaleParams(modality, values.min(axis=0), values.max(axis=0))
    n_constant = int(params.constant.sum())
    if n_constant:
        logger.debug("%s: %d constant dimension(s) will map to 0", modality.value, n_constant)
    return params


def apply_minmax_matrix(params: ScaleParams, values: np.ndarray) -> np.ndarray:
    """Rescale the rows of an (n, l) array, clamping to [0, 1]."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] != params.dim:
        raise ShapeError(f"expected {params.dim} values per vector, got {values.shape[-1]}")
    span = params.maximum - params.minimum
    safe_span = np.where(params.constant, 1.0, span)
    scaled = (values - params.minimum) / safe_span
    scaled = np.where(params.constant, 0.0, scaled)
    return np.clip(scaled, 0.0, 1.0)


def apply_minmax(params: ScaleParams, e: Embedding) -> Embedding:
    """Rescale one embedding with fitted params.

    Constant dimensions map to 0; values outside the fitted range are clamped.

    Raises:
        ShapeError: Embedding length differs from the fitted dimension.
    """
    if e.modality is not params.modality:
        raise ShapeError(f"params fitted on {params.modality.value}, embedding is {e.modality.value}")
    return Embedding(apply_minmax_matrix(params, e.values), e.modality)


def fit_dataset_scaling(train: Dataset) -> Dict[Modality, ScaleParams]:
    """Fit both modalities independently on a training split."""
    return {modality: fit_minmax(train, modality) for modality in Modality}


def scale_dataset(params: Dict[Modality, ScaleParams], dataset: Dataset) -> Dataset:
    """Apply fitted params to every case of a dataset."""
    if len(dataset) == 0:
        return dataset
    image = apply_minmax_matrix(params[Modality.IMAGE], dataset.matrix(Modality.IMAGE))
    sequence = apply_minmax_matrix(params[Modality.SEQUENCE], dataset.matrix(Modality.SEQUENCE))
    return dataset.with_matrices(image, sequence, DatasetSchema(image.shape[1], sequence.shape[1]))


def save_scaling(path: Path, params: Dict[Modality, ScaleParams]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {modality.value: p.to_dict() for modality, p in params.items()}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_scaling(path: Path) -> Dict[Modality, ScaleParams]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return {Modality(key): ScaleParams.from_dict(value) for key, value in payload.items()}
    except (OSError, ValueError, KeyError) as e:
        raise ParseError(1, f"cannot read scaling params from {path}: {e}") from e
