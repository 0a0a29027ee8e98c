"""Selection accuracy metrics over boolean masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

__all__ = ["Confusion", "confusion", "accuracy", "f1", "csi", "score_selection"]


@dataclass(frozen=True)
class Confusion:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(selected: NDArray[np.bool_], truth: NDArray[np.bool_]) -> Confusion:
    """Count the four cells of selected vs true masks."""

    selected = np.asarray(selected, dtype=bool).reshape(-1)
    truth = np.asarray(truth, dtype=bool).reshape(-1)
    if len(selected) != len(truth):
        raise ValueError("selected and truth masks have different lengths")
    if len(selected) == 0:
        raise ValueError("masks must be nonempty")
    return Confusion(
        tp=int((selected & truth).sum()),
        tn=int((~selected & ~truth).sum()),
        fp=int((selected & ~truth).sum()),
        fn=int((~selected & truth).sum()),
    )


def accuracy(table: Confusion) -> float:
    return (table.tp + table.tn) / table.total


def f1(table: Confusion) -> float:
    # No positives anywhere: a perfect all-negative call scores 1.
    denominator = 2 * table.tp + table.fp + table.fn
    if denominator == 0:
        return 1.0
    return 2 * table.tp / denominator


def csi(table: Confusion) -> float:
    denominator = table.tp + table.fp + table.fn
    if denominator == 0:
        return 1.0
    return table.tp / denominator


def score_selection(
    selected: NDArray[np.bool_], truth: NDArray[np.bool_]
) -> dict[str, float]:
    """Accuracy, F1, and critical-success-index for one mask pair."""

    table = confusion(selected, truth)
    return {"acc": accuracy(table), "f1": f1(table), "csi": csi(table)}
