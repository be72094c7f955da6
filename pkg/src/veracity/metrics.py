"""Binary classification metrics with fake (label 1) as the positive class."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def table(self) -> str:
        """Aligned two-column text rendering."""
        rows = [(name, f"{getattr(self, name):.6f}") for name in ("accuracy", "precision", "recall", "f1")]
        rows += [(name, str(getattr(self, name))) for name in ("tp", "fp", "tn", "fn")]
        width = max(len(n) for n, _ in rows)
        return "\n".join(f"{n.ljust(width)}  {v}" for n, v in rows)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def compute_metrics(predictions, labels) -> MetricsReport:
    pred = np.asarray(predictions).astype(np.int64).ravel()
    true = np.asarray(labels).astype(np.int64).ravel()
    if pred.shape != true.shape:
        raise ValueError(f"{pred.size} predictions for {true.size} labels")
    if pred.size == 0:
        raise ValueError("cannot compute metrics on an empty set")
    if not (np.isin(pred, (0, 1)).all() and np.isin(true, (0, 1)).all()):
        raise ValueError("predictions and labels must be 0 or 1")
    tp = int(np.sum((pred == 1) & (true == 1)))
    fp = int(np.sum((pred == 1) & (true == 0)))
    tn = int(np.sum((pred == 0) & (true == 0)))
    fn = int(np.sum((pred == 0) & (true == 1)))
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    return MetricsReport(tp, fp, tn, fn, (tp + tn) / pred.size, precision, recall, f1)
