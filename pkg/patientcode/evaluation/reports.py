"""Tabular report output.

All tables are written with a fixed float format and "\\n" line endings so
that two runs with the same configuration produce byte-identical files.
"""

from pathlib import Path
from typing import Mapping, Sequence

import pandas as pd

from patientcode.evaluation.cross_validation import PredictionRow
from patientcode.evaluation.metrics import METRIC_NAMES, FoldSummary, MetricsReport
from patientcode.latent.autoencoder import TrainReport

FLOAT_FORMAT = "%.6f"

FOLD_COLUMNS = ["representation", "criterion", "abstention", "fold", "accuracy", "macro_p", "macro_r", "macro_f1",
                "n_cases", "n_abstained"]
SUMMARY_COLUMNS = ["representation", "criterion", "abstention", "folds"] + [
    f"{short}_{stat}" for short in ("accuracy", "macro_p", "macro_r", "macro_f1") for stat in ("mean", "std")
]
PREDICTION_COLUMNS = ["fold", "representation", "criterion", "case_id", "truth", "predicted", "support"]
_SHORT = dict(zip(METRIC_NAMES, ("accuracy", "macro_p", "macro_r", "macro_f1")))


def fold_metrics_table(reports: Sequence[MetricsReport]) -> pd.DataFrame:
    rows = [
        {
            "representation": r.representation.value,
            "criterion": r.criterion.value,
            "abstention": r.abstention.value,
            "fold": r.fold,
            "accuracy": r.accuracy,
            "macro_p": r.macro_precision,
            "macro_r": r.macro_recall,
            "macro_f1": r.macro_f1,
            "n_cases": r.n_cases,
            "n_abstained": r.n_abstained,
        }
        for r in reports
    ]
    return pd.DataFrame(rows, columns=FOLD_COLUMNS)


def summary_table(summaries: Sequence[FoldSummary]) -> pd.DataFrame:
    rows = []
    for s in summaries:
        row = {
            "representation": s.representation.value,
            "criterion": s.criterion.value,
            "abstention": s.abstention.value,
            "folds": len(s.reports),
        }
        for name in METRIC_NAMES:
            row[f"{_SHORT[name]}_mean"] = s.mean(name)
            row[f"{_SHORT[name]}_std"] = s.std(name)
        rows.append(row)
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def predictions_table(rows: Sequence[PredictionRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "fold": r.fold,
                "representation": r.representation.value,
                "criterion": r.criterion.value,
                "case_id": r.case_id,
                "truth": r.truth,
                "predicted": r.predicted if r.predicted is not None else "",
                "support": r.support,
            }
            for r in rows
        ],
        columns=PREDICTION_COLUMNS,
    )


def curves_table(curves: Mapping[str, TrainReport]) -> pd.DataFrame:
    """Long-form loss curves: one row per (model, epoch)."""
    rows = []
    for name, report in curves.items():
        rows.extend({"model": name, "epoch": epoch, "loss": loss} for epoch, loss in enumerate(report.losses, start=1))
    return pd.DataFrame(rows, columns=["model", "epoch", "loss"])


def write_table(frame: pd.DataFrame, path: Path, index: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path
