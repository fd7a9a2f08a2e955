"""Reconstruction quality of the hybrid autoencoders on held-out cases."""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from patientcode.data.dataset import Dataset, Modality
from patientcode.errors import DataError
from patientcode.latent.autoencoder import Direction, HybridAutoencoder

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReconstructionRow:
    """Quality of one reconstructed embedding; modality names the reconstructed side."""

    case_id: str
    modality: Modality
    cosine: Optional[float]
    mse: float

    @property
    def flagged(self) -> bool:
        return self.cosine is None


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    """Cosine of two vectors, None when either has zero norm."""
    norm = float(np.linalg.norm(a) * np.linalg.norm(b))
    if norm == 0.0:
        return None
    return float(np.dot(a, b) / norm)


@dataclass
class ReconstructionReport:
    rows: List[ReconstructionRow]

    def _rows(self, modality: Modality) -> List[ReconstructionRow]:
        return [row for row in self.rows if row.modality is modality]

    def cosines(self, modality: Modality) -> List[float]:
        return [row.cosine for row in self._rows(modality) if not row.flagged]

    def median_cosine(self, modality: Modality) -> float:
        """Median over unflagged cases; zero-norm cases are excluded with a warning."""
        rows = self._rows(modality)
        flagged = [row.case_id for row in rows if row.flagged]
        if flagged:
            logger.warning("%s reconstruction: %d zero-norm case(s) excluded from the median: %s",
                           modality.value, len(flagged), flagged[:5])
        values = self.cosines(modality)
        return float(np.median(values)) if values else float("nan")

    def mean_mse(self, modality: Modality) -> float:
        values = [row.mse for row in self._rows(modality)]
        return float(np.mean(values)) if values else float("nan")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "case_id": [row.case_id for row in self.rows],
                "modality": [row.modality.value for row in self.rows],
                "cosine": [np.nan if row.flagged else row.cosine for row in self.rows],
                "mse": [row.mse for row in self.rows],
            },
            columns=["case_id", "modality", "cosine", "mse"],
        )


def reconstruction_report(image_model: HybridAutoencoder, seq_model: HybridAutoencoder,
                          test: Dataset) -> ReconstructionReport:
    """Compare every held-out embedding with its cross-modal reconstruction.

    For each case: cosine(g, A_I(f)) tagged sequence and cosine(f, A_S(g))
    tagged image, plus the per-case MSE. The test split must be scaled with
    the training-split params.
    """
    if image_model.direction is not Direction.IMAGE_TO_SEQ or seq_model.direction is not Direction.SEQ_TO_IMAGE:
        raise DataError("reconstruction_report needs (ImageToSeq, SeqToImage) models")
    f = test.matrix(Modality.IMAGE)
    g = test.matrix(Modality.SEQUENCE)
    g_hat = np.asarray(image_model.reconstruct(f), dtype=np.float64) if len(test) else g
    f_hat = np.asarray(seq_model.reconstruct(g), dtype=np.float64) if len(test) else f
    rows = []
    for i, case_id in enumerate(test.case_ids):
        for modality, target, recon in ((Modality.SEQUENCE, g[i], g_hat[i]), (Modality.IMAGE, f[i], f_hat[i])):
            diff = target - recon
            rows.append(ReconstructionRow(case_id, modality, cosine_similarity(target, recon), float(np.mean(diff * diff))))
    return ReconstructionReport(rows)
