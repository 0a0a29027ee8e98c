"""Metric identities against independent implementations."""

import numpy as np
import pytest
from sklearn.metrics import accuracy_score, f1_score, jaccard_score

from drcfs.metrics import Confusion, accuracy, confusion, csi, f1, score_selection


def test_worked_example():
    table = Confusion(tp=3, tn=5, fp=1, fn=1)
    assert accuracy(table) == pytest.approx(0.8)
    assert f1(table) == pytest.approx(0.75)
    assert csi(table) == pytest.approx(0.6)


def test_confusion_counts():
    selected = np.array([True, True, False, False, True])
    truth = np.array([True, False, False, True, True])
    table = confusion(selected, truth)
    assert (table.tp, table.tn, table.fp, table.fn) == (2, 1, 1, 1)
    assert table.total == 5


def test_all_negative_masks_are_perfect():
    table = confusion(np.zeros(6, dtype=bool), np.zeros(6, dtype=bool))
    assert accuracy(table) == 1.0
    assert f1(table) == 1.0
    assert csi(table) == 1.0


def test_identities_on_random_masks():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(1, 40))
        selected = rng.uniform(size=n) < rng.uniform()
        truth = rng.uniform(size=n) < rng.uniform()
        scores = score_selection(selected, truth)
        assert scores["acc"] == pytest.approx(accuracy_score(truth, selected))
        if selected.any() or truth.any():
            assert scores["f1"] == pytest.approx(
                f1_score(truth, selected, zero_division=0.0)
            )
            assert scores["csi"] == pytest.approx(
                jaccard_score(truth, selected, zero_division=0.0)
            )


def test_f1_dominates_csi_on_random_tables():
    rng = np.random.default_rng(7)
    counts = rng.integers(0, 25, size=(10_000, 4))
    counts = counts[counts.sum(axis=1) > 0]
    for tp, tn, fp, fn in counts:
        table = Confusion(tp=int(tp), tn=int(tn), fp=int(fp), fn=int(fn))
        f1_val, csi_val = f1(table), csi(table)
        assert f1_val >= csi_val
        # harmonic relation between the two scores
        assert f1_val == pytest.approx(2 * csi_val / (1 + csi_val))


def test_validation_errors():
    with pytest.raises(ValueError, match="lengths"):
        confusion(np.array([True]), np.array([True, False]))
    with pytest.raises(ValueError, match="nonempty"):
        confusion(np.array([], dtype=bool), np.array([], dtype=bool))
