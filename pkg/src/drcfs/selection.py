"""Cross-fitted debiased feature selection.

For every feature ``j`` the pipeline contrasts two debiased estimates of
an outcome-product functional: one conditioning on all columns and one
conditioning on all columns except ``j``.  Their gap estimates

    chi_j = E[(E[Y | X] - E[Y | X without j])^2],

which is zero exactly when column ``j`` carries no information about the
outcome beyond the remaining columns.  Per-observation score differences
feed a paired t-test, and the per-feature p-values pass through a
dependence-robust false-discovery step-up before selection.

Two score conventions are supported for the same functional:

* ``eq3`` (default): ``y*g + a*(y - g)``, which targets ``+E[g^2]`` at
  the oracle nuisances, so reported gaps estimate the nonnegative chi.
* ``paper``: ``y*g - y*a - a*g``, an alternative sign convention that
  targets ``-E[g^2]``; gaps come out negated, decisions are unchanged.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
import scipy.stats
from numpy.typing import NDArray

from .metrics import confusion, score_selection
from .nuisance import IDENTITY_MAP, FeatureMap, LearnerSpec, SpecLearner

__all__ = [
    "SCORE_CONVENTIONS",
    "FoldPlan",
    "ScoreSamples",
    "FeatureTestResult",
    "SelectionReport",
    "make_folds",
    "score_theta",
    "estimate_chi",
    "paired_t_test",
    "by_adjust",
    "run_drcfs",
]

SCORE_CONVENTIONS = ("eq3", "paper")


@dataclass(frozen=True)
class FoldPlan:
    """Balanced random partition of ``n`` rows into ``k`` folds."""

    k: int
    assignment: NDArray[np.intp]
    seed: int

    @property
    def n(self) -> int:
        return len(self.assignment)

    def test_rows(self, fold: int) -> NDArray[np.intp]:
        return np.flatnonzero(self.assignment == fold)

    def train_rows(self, fold: int) -> NDArray[np.intp]:
        return np.flatnonzero(self.assignment != fold)


def make_folds(n: int, k: int, seed: int = 0) -> FoldPlan:
    """Draw a uniform balanced fold assignment; sizes differ by at most 1."""

    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"cannot split n={n} rows into k={k} folds")
    assignment = np.random.default_rng(seed).permutation(n) % k
    return FoldPlan(k=k, assignment=assignment.astype(np.intp), seed=seed)


@dataclass
class ScoreSamples:
    """Per-observation debiased scores for one conditioning set."""

    values: NDArray[np.float64]
    fold_of: NDArray[np.intp]
    convention: str
    target_columns: tuple[int, ...]
    fold_means: NDArray[np.float64]
    fold_variances: NDArray[np.float64]
    trained_rows: tuple[NDArray[np.intp], ...]

    @property
    def theta_hat(self) -> float:
        """Average of the per-fold means."""

        return float(self.fold_means.mean())

    @property
    def sigma2_hat(self) -> float:
        """Average of the per-fold score variances."""

        return float(self.fold_variances.mean())


def _combine(
    y: NDArray[np.float64],
    g: NDArray[np.float64],
    a: NDArray[np.float64],
    convention: str,
) -> NDArray[np.float64]:
    if convention == "eq3":
        return y * g + a * (y - g)
    if convention == "paper":
        return y * g - y * a - a * g
    raise ValueError(
        f"unknown score convention {convention!r}; expected one of {SCORE_CONVENTIONS}"
    )


def _fold_seed(seed: int, fold: int) -> np.random.SeedSequence:
    # Shared across conditioning sets so permuting columns permutes results.
    return np.random.SeedSequence(entropy=seed, spawn_key=(fold,))


def _as_learner(learner: Any, feature_map: FeatureMap) -> Any:
    if learner is None:
        learner = LearnerSpec()
    if isinstance(learner, LearnerSpec):
        return SpecLearner(learner, feature_map)
    if not hasattr(learner, "fit_pair"):
        raise TypeError("learner must be a LearnerSpec or provide fit_pair(...)")
    return learner


def score_theta(
    features: NDArray[np.float64],
    outcome: NDArray[np.float64],
    plan: FoldPlan,
    learner: Any = None,
    *,
    drop: int | None = None,
    convention: str = "eq3",
    feature_map: FeatureMap = IDENTITY_MAP,
    seed: int = 0,
) -> ScoreSamples:
    """Cross-fit the debiased score for one conditioning set.

    For each fold, both nuisances are fit on the complement and evaluated
    on the held-out fold only.  ``drop`` removes one column from the
    conditioning set; ``None`` keeps all columns.
    """

    features = np.asarray(features, dtype=float)
    outcome = np.asarray(outcome, dtype=float).reshape(-1)
    if features.ndim != 2:
        raise ValueError("features must be a 2-d array")
    n, m = features.shape
    if len(outcome) != n:
        raise ValueError("features and outcome lengths differ")
    if plan.n != n:
        raise ValueError("fold plan does not match the number of rows")
    if convention not in SCORE_CONVENTIONS:
        raise ValueError(
            f"unknown score convention {convention!r}; expected one of {SCORE_CONVENTIONS}"
        )
    if drop is not None and not 0 <= drop < m:
        raise ValueError(f"drop column {drop} is out of range for m={m}")
    cols = tuple(c for c in range(m) if c != drop)
    if not cols:
        raise ValueError("conditioning set cannot be empty")

    learner = _as_learner(learner, feature_map)
    sub = features[:, cols]
    values = np.empty(n)
    fold_means = np.empty(plan.k)
    fold_variances = np.empty(plan.k)
    trained: list[NDArray[np.intp]] = []
    for fold in range(plan.k):
        train = plan.train_rows(fold)
        test = plan.test_rows(fold)
        pair = learner.fit_pair(sub[train], outcome[train], _fold_seed(seed, fold), cols)
        g = np.asarray(pair.mean_model.predict(sub[test]), dtype=float)
        a = np.asarray(pair.riesz_model.predict(sub[test]), dtype=float)
        psi = _combine(outcome[test], g, a, convention)
        values[test] = psi
        fold_means[fold] = psi.mean()
        fold_variances[fold] = ((psi - psi.mean()) ** 2).mean()
        trained.append(train)

    return ScoreSamples(
        values=values,
        fold_of=plan.assignment.copy(),
        convention=convention,
        target_columns=cols,
        fold_means=fold_means,
        fold_variances=fold_variances,
        trained_rows=tuple(trained),
    )


def estimate_chi(
    score_full: ScoreSamples, score_drop: ScoreSamples
) -> tuple[float, NDArray[np.float64]]:
    """Gap estimate and per-observation paired differences.

    Under the default convention the gap targets the nonnegative quantity
    ``chi_j``; under ``paper`` it comes out negated.
    """

    if score_full.convention != score_drop.convention:
        raise ValueError(
            f"score conventions differ: {score_full.convention!r} vs "
            f"{score_drop.convention!r}"
        )
    if len(score_full.values) != len(score_drop.values):
        raise ValueError("score sample lengths differ")
    if not np.array_equal(score_full.fold_of, score_drop.fold_of):
        raise ValueError("scores were produced under different fold plans")
    if not set(score_drop.target_columns) < set(score_full.target_columns):
        raise ValueError(
            "drop-column conditioning set must be a strict subset of the full set"
        )
    diffs = score_full.values - score_drop.values
    return float(diffs.mean()), diffs


def paired_t_test(diffs: NDArray[np.float64]) -> tuple[float, float]:
    """Two-sided one-sample t-test of zero mean on paired differences.

    Degenerate samples follow the convention: zero spread with zero mean
    gives ``p = 1``; zero spread with nonzero mean gives ``p = 0`` and a
    warning, since the test statistic is unbounded there.
    """

    diffs = np.asarray(diffs, dtype=float).reshape(-1)
    n = len(diffs)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 differences")
    mean = diffs.mean()
    sd = diffs.std(ddof=1)
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        warnings.warn(
            "degenerate paired t-test: zero variance with nonzero mean",
            RuntimeWarning,
            stacklevel=2,
        )
        return math.inf if mean > 0 else -math.inf, 0.0
    t_stat = mean / (sd / math.sqrt(n))
    p_value = 2.0 * scipy.stats.t.sf(abs(t_stat), df=n - 1)
    return float(t_stat), float(min(p_value, 1.0))


def by_adjust(
    p_values: NDArray[np.float64], q: float
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Step-up false-discovery control valid under arbitrary dependence.

    The usual step-up thresholds are deflated by the harmonic factor
    ``c(m) = sum_{i<=m} 1/i``.  Returns monotone adjusted p-values clipped
    to 1 and the selection mask ``adjusted <= q``.
    """

    p_values = np.asarray(p_values, dtype=float).reshape(-1)
    if len(p_values) == 0:
        raise ValueError("no p-values to adjust")
    if ((p_values < 0) | (p_values > 1)).any():
        raise ValueError("p-values must lie in [0, 1]")
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    m = len(p_values)
    harmonic = (1.0 / np.arange(1, m + 1)).sum()
    order = np.argsort(p_values, kind="stable")
    ranks = np.arange(1, m + 1)
    scaled = p_values[order] * m * harmonic / ranks
    adjusted_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted = np.empty(m)
    adjusted[order] = np.minimum(adjusted_sorted, 1.0)
    return adjusted, adjusted <= q


@dataclass
class FeatureTestResult:
    """Outcome of the paired comparison for one feature column."""

    column: int
    name: str
    chi_hat: float
    theta_full: float
    theta_drop: float
    se_chi: float
    t_stat: float
    p_value: float
    p_adjusted: float
    selected: bool

    def to_dict(self) -> dict:
        return {
            "column": self.column,
            "name": self.name,
            "chi_hat": self.chi_hat,
            "theta_full": self.theta_full,
            "theta_drop": self.theta_drop,
            "se_chi": self.se_chi,
            "t_stat": self.t_stat,
            "p_value": self.p_value,
            "p_adjusted": self.p_adjusted,
            "selected": self.selected,
        }


@dataclass
class SelectionReport:
    """Full output of one selection run."""

    results: list[FeatureTestResult]
    selected_mask: NDArray[np.bool_]
    theta_full: float
    sigma2_full: float
    q: float
    k: int
    seed: int
    convention: str
    learner: dict
    n: int
    m: int
    column_names: tuple[str, ...]
    wall_ms: float
    metrics: dict | None = None

    @property
    def selected_names(self) -> list[str]:
        return [r.name for r in self.results if r.selected]

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "n": self.n,
            "m": self.m,
            "k": self.k,
            "q": self.q,
            "seed": self.seed,
            "convention": self.convention,
            "learner": self.learner,
            "theta_full": self.theta_full,
            "sigma2_full": self.sigma2_full,
            "selected": self.selected_names,
            "features": [r.to_dict() for r in self.results],
            "metrics": self.metrics,
            "wall_ms": self.wall_ms,
        }


def _default_threads() -> int:
    raw = os.environ.get("DRCFS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_drcfs(
    features: NDArray[np.float64],
    outcome: NDArray[np.float64],
    *,
    k: int = 5,
    q: float = 0.05,
    learner: Any = None,
    feature_map: FeatureMap = IDENTITY_MAP,
    convention: str = "eq3",
    seed: int = 0,
    threads: int | None = None,
    column_names: Sequence[str] | None = None,
    truth_mask: NDArray[np.bool_] | None = None,
) -> SelectionReport:
    """Run the full selection pipeline on one dataset.

    One fold plan is shared by every conditioning set.  Feature columns
    are processed independently (optionally in a thread pool) and results
    are always emitted in column order.  When ``truth_mask`` is given the
    report carries accuracy metrics against it.
    """

    started = time.perf_counter()
    features = np.asarray(features, dtype=float)
    outcome = np.asarray(outcome, dtype=float).reshape(-1)
    if features.ndim != 2:
        raise ValueError("features must be a 2-d array")
    n, m = features.shape
    if m < 2:
        raise ValueError("need at least 2 feature columns to contrast conditioning sets")
    if column_names is None:
        column_names = tuple(f"X{i + 1}" for i in range(m))
    else:
        column_names = tuple(column_names)
        if len(column_names) != m:
            raise ValueError("column_names length does not match features")
    if threads is None:
        threads = _default_threads()

    plan = make_folds(n, k, seed)
    learner_obj = _as_learner(learner, feature_map)
    score_full = score_theta(
        features, outcome, plan, learner_obj, convention=convention, seed=seed
    )

    def one_feature(j: int) -> tuple[float, float, float, float, float]:
        score_drop = score_theta(
            features,
            outcome,
            plan,
            learner_obj,
            drop=j,
            convention=convention,
            seed=seed,
        )
        chi_hat, diffs = estimate_chi(score_full, score_drop)
        se = diffs.std(ddof=1) / math.sqrt(len(diffs))
        t_stat, p_value = paired_t_test(diffs)
        return chi_hat, score_drop.theta_hat, se, t_stat, p_value

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_feature = list(pool.map(one_feature, range(m)))
    else:
        per_feature = [one_feature(j) for j in range(m)]

    p_values = np.array([row[4] for row in per_feature])
    adjusted, mask = by_adjust(p_values, q)

    results = [
        FeatureTestResult(
            column=j,
            name=column_names[j],
            chi_hat=per_feature[j][0],
            theta_full=score_full.theta_hat,
            theta_drop=per_feature[j][1],
            se_chi=per_feature[j][2],
            t_stat=per_feature[j][3],
            p_value=per_feature[j][4],
            p_adjusted=float(adjusted[j]),
            selected=bool(mask[j]),
        )
        for j in range(m)
    ]

    metrics = None
    if truth_mask is not None:
        truth_mask = np.asarray(truth_mask, dtype=bool).reshape(-1)
        table = confusion(mask, truth_mask)
        metrics = score_selection(mask, truth_mask)
        metrics["confusion"] = {
            "tp": table.tp,
            "tn": table.tn,
            "fp": table.fp,
            "fn": table.fn,
        }

    learner_doc = (
        learner_obj.describe()
        if hasattr(learner_obj, "describe")
        else {"kind": type(learner_obj).__name__}
    )
    wall_ms = (time.perf_counter() - started) * 1e3
    return SelectionReport(
        results=results,
        selected_mask=mask,
        theta_full=score_full.theta_hat,
        sigma2_full=score_full.sigma2_hat,
        q=q,
        k=k,
        seed=seed,
        convention=convention,
        learner=learner_doc,
        n=n,
        m=m,
        column_names=column_names,
        wall_ms=wall_ms,
        metrics=metrics,
    )
