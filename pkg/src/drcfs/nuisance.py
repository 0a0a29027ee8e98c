"""Nuisance learners for debiased moment estimation.

Two interchangeable function classes are provided: a ridge-penalized
linear class over a feature map, and an honest forest whose leaves hold
local linear solutions of the same normal equations.

For the outcome-product moment ``phi -> E[Y * phi]`` the empirical Riesz
representer minimizes ``E_n[a(X)^2 - 2 Y a(X)]``, whose first-order
condition is exactly the ridge system ``(E_n[phi phi'] + lam I) gamma =
E_n[Y phi]``.  The mean fit solves the same system, so the two estimates
coincide when data, map, penalty, and subsampling all match.  They are
still fit as separate models with decorrelated randomness (distinct
cross-validation folds for the penalty in the linear case, independent
subsampling in the forest case).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from numpy.typing import NDArray
from sklearn.preprocessing import PolynomialFeatures
from sklearn.tree import DecisionTreeRegressor

__all__ = [
    "MOMENT_OUTCOME_PRODUCT",
    "FeatureMap",
    "IDENTITY_MAP",
    "LearnerSpec",
    "LinearModel",
    "ForestModel",
    "FixedModel",
    "NuisancePair",
    "IllConditionedError",
    "fit_mean",
    "fit_riesz",
    "fit_forest",
    "fit_nuisance_pair",
    "predict",
    "SpecLearner",
    "model_to_json",
    "model_from_json",
]

#: The only moment family these learners serve: ``m(V; f) = Y * f(X)``.
MOMENT_OUTCOME_PRODUCT = "outcome-product"

# Penalty grid, scaled at fit time by trace(E_n[phi phi']) / dim.
_LAMBDA_GRID = np.logspace(-4.0, 1.0, 8)

_SERIAL_VERSION = 1


class IllConditionedError(np.linalg.LinAlgError):
    """Unpenalized system is singular; carries the offending column ids."""

    def __init__(self, message: str, columns: Sequence[int]):
        super().__init__(message)
        self.columns = tuple(int(c) for c in columns)


@dataclass(frozen=True)
class FeatureMap:
    """Deterministic basis expansion applied before the linear solve.

    ``identity`` passes columns through, ``polynomial`` expands to all
    monomials up to ``degree`` (no constant term; the intercept is handled
    by the solver), and ``custom`` wraps a user callable together with its
    output dimension.
    """

    kind: str = "identity"
    degree: int = 1
    fn: Callable[[NDArray[np.float64]], NDArray[np.float64]] | None = None
    custom_dim: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("identity", "polynomial", "custom"):
            raise ValueError(f"unknown feature map kind {self.kind!r}")
        if self.kind == "polynomial" and self.degree < 1:
            raise ValueError("polynomial maps need degree >= 1")
        if self.kind == "custom" and (self.fn is None or self.custom_dim is None):
            raise ValueError("custom maps need both fn and custom_dim")

    @classmethod
    def parse(cls, label: str) -> "FeatureMap":
        """Parse a CLI label: ``identity`` or ``poly:<degree>``."""

        if label == "identity":
            return cls()
        if label.startswith("poly:"):
            return cls(kind="polynomial", degree=int(label.split(":", 1)[1]))
        raise ValueError(f"unknown feature map label {label!r}")

    @property
    def label(self) -> str:
        if self.kind == "identity":
            return "identity"
        if self.kind == "polynomial":
            return f"poly:{self.degree}"
        return "custom"

    def transform(self, features: NDArray[np.float64]) -> NDArray[np.float64]:
        features = np.asarray(features, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if self.kind == "identity":
            return features
        if self.kind == "polynomial":
            expander = PolynomialFeatures(degree=self.degree, include_bias=False)
            return expander.fit_transform(features)
        out = np.asarray(self.fn(features), dtype=float)
        if out.shape != (features.shape[0], self.custom_dim):
            raise ValueError("custom map returned the wrong shape")
        return out

    def output_dim(self, n_features: int) -> int:
        if self.kind == "identity":
            return n_features
        if self.kind == "polynomial":
            return math.comb(n_features + self.degree, self.degree) - 1
        return int(self.custom_dim)


IDENTITY_MAP = FeatureMap()


@dataclass(frozen=True)
class LearnerSpec:
    """Hyperparameters for either learner kind.

    ``ridge_lambda=None`` selects the penalty by k-fold cross-validation
    over a log grid scaled to the second-moment trace of the mapped
    features.  Forest fields follow the honest-splitting design: each tree
    subsamples without replacement, builds structure on one half, and
    solves its leaf systems on the other half only.
    """

    kind: str = "linear"
    ridge_lambda: float | None = None
    cv_folds: int = 5
    trees: int = 100
    min_leaf: int = 5
    honest_fraction: float = 0.5
    subsample_fraction: float = 0.5
    leaf_ridge: float = 1e-6
    split_search: str = "random"
    max_features_fraction: float = 1 / 3

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "forest"):
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.ridge_lambda is not None and self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be nonnegative")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")
        if self.trees < 1 or self.min_leaf < 1:
            raise ValueError("trees and min_leaf must be positive")
        if not 0 < self.honest_fraction < 1:
            raise ValueError("honest_fraction must lie in (0, 1)")
        if not 0 < self.subsample_fraction <= 1:
            raise ValueError("subsample_fraction must lie in (0, 1]")
        if self.leaf_ridge < 0:
            raise ValueError("leaf_ridge must be nonnegative")
        if self.split_search not in ("random", "exact"):
            raise ValueError("split_search must be 'random' or 'exact'")

    def describe(self) -> dict:
        if self.kind == "linear":
            return {
                "kind": "linear",
                "ridge_lambda": self.ridge_lambda,
                "cv_folds": self.cv_folds,
            }
        return {
            "kind": "forest",
            "trees": self.trees,
            "min_leaf": self.min_leaf,
            "honest_fraction": self.honest_fraction,
            "subsample_fraction": self.subsample_fraction,
            "leaf_ridge": self.leaf_ridge,
            "split_search": self.split_search,
        }


@dataclass
class LinearModel:
    """Ridge solution on standardized mapped features.

    Prediction is ``z @ coefficients + intercept`` where ``z`` is the
    mapped input standardized with the training center and scale.  The
    intercept equals the training outcome mean and is never penalized.
    """

    coefficients: NDArray[np.float64]
    intercept: float
    ridge_lambda: float
    feature_map: FeatureMap
    center: NDArray[np.float64]
    scale: NDArray[np.float64]
    n_features_in: int

    def predict(self, features: NDArray[np.float64]) -> NDArray[np.float64]:
        features = np.asarray(features, dtype=float)
        if features.ndim != 2 or features.shape[1] != self.n_features_in:
            raise ValueError(
                f"expected {self.n_features_in} feature columns, "
                f"got shape {features.shape}"
            )
        z = (self.feature_map.transform(features) - self.center) / self.scale
        return z @ self.coefficients + self.intercept


@dataclass
class _TreeRecord:
    children_left: NDArray[np.intp]
    children_right: NDArray[np.intp]
    split_feature: NDArray[np.intp]
    threshold: NDArray[np.float64]
    leaf_slot: NDArray[np.intp]
    gamma: NDArray[np.float64]
    structure_rows: NDArray[np.intp]
    estimate_rows: NDArray[np.intp]


@dataclass
class ForestModel:
    """Honest forest with a local linear solution per leaf.

    Trees split on raw feature columns; each leaf stores a coefficient
    vector over ``[1, phi(x)]`` solved on that tree's estimation half.
    Leaves too small for a stable local solve fall back to the leaf mean
    (an intercept-only vector); empty leaves fall back to the tree's
    estimation-half mean.  ``degenerate_leaves`` counts both cases.
    """

    trees: list[_TreeRecord]
    feature_map: FeatureMap
    n_features_in: int
    spec: LearnerSpec
    degenerate_leaves: int

    def predict(self, features: NDArray[np.float64]) -> NDArray[np.float64]:
        features = np.asarray(features, dtype=float)
        if features.ndim != 2 or features.shape[1] != self.n_features_in:
            raise ValueError(
                f"expected {self.n_features_in} feature columns, "
                f"got shape {features.shape}"
            )
        phi = np.column_stack([np.ones(len(features)), self.feature_map.transform(features)])
        total = np.zeros(len(features))
        for tree in self.trees:
            nodes = _route(tree, features)
            gamma = tree.gamma[tree.leaf_slot[nodes]]
            total += np.einsum("ij,ij->i", phi, gamma)
        return total / len(self.trees)


def _route(tree: _TreeRecord, features: NDArray[np.float64]) -> NDArray[np.intp]:
    """Send rows down one tree; returns the leaf node id per row."""

    idx = np.zeros(len(features), dtype=np.intp)
    while True:
        internal = tree.children_left[idx] >= 0
        if not internal.any():
            return idx
        rows = np.flatnonzero(internal)
        at = idx[rows]
        go_left = features[rows, tree.split_feature[at]] <= tree.threshold[at]
        idx[rows] = np.where(go_left, tree.children_left[at], tree.children_right[at])


@dataclass(frozen=True)
class FixedModel:
    """Wraps a plain callable as a predictor; used for injected nuisances."""

    fn: Callable[[NDArray[np.float64]], NDArray[np.float64]]

    def predict(self, features: NDArray[np.float64]) -> NDArray[np.float64]:
        features = np.asarray(features, dtype=float)
        out = np.asarray(self.fn(features), dtype=float)
        return np.broadcast_to(out, (features.shape[0],)).astype(float)


@dataclass(frozen=True)
class NuisancePair:
    """Mean and Riesz models fit for one conditioning set."""

    mean_model: Any
    riesz_model: Any
    target_columns: tuple[int, ...]


def _standardize(
    phi: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64], NDArray[np.intp]]:
    center = phi.mean(axis=0)
    scale = phi.std(axis=0)
    constant = np.flatnonzero(scale == 0)
    safe = np.where(scale == 0, 1.0, scale)
    return (phi - center) / safe, center, safe, constant


def _solve_ridge(
    z: NDArray[np.float64],
    y_centered: NDArray[np.float64],
    lam: float,
    constant_columns: NDArray[np.intp],
) -> NDArray[np.float64]:
    n, d = z.shape
    gram = z.T @ z / n
    rhs = z.T @ y_centered / n
    if lam > 0:
        return np.linalg.solve(gram + lam * np.eye(d), rhs)
    # lam == 0: fail loudly on rank deficiency, naming the columns involved
    u, s, vt = np.linalg.svd(gram, hermitian=True)
    tol = d * np.finfo(float).eps * (s[0] if s.size else 0.0)
    if (s <= tol).any():
        null_dir = np.abs(vt[s <= tol]).max(axis=0)
        involved = sorted(
            set(np.flatnonzero(null_dir > 1e-8 * null_dir.max()).tolist())
            | set(constant_columns.tolist())
        )
        raise IllConditionedError(
            "unpenalized normal equations are singular; "
            f"dependent or constant mapped columns: {involved}",
            involved,
        )
    return vt.T @ ((u.T @ rhs) / s)


def _cv_lambda(
    z: NDArray[np.float64],
    y_centered: NDArray[np.float64],
    grid: NDArray[np.float64],
    folds: int,
    rng: np.random.Generator,
    constant_columns: NDArray[np.intp],
) -> float:
    """Pick the penalty by k-fold validation MSE.

    Validation MSE and the Riesz loss ``E[a^2 - 2 y a]`` differ by a
    constant in the candidate, so one criterion serves both fits.
    """

    n, d = z.shape
    folds = min(folds, n)
    assignment = rng.permutation(n) % folds
    errors = np.zeros(len(grid))
    eye = np.eye(d)
    for f in range(folds):
        hold = assignment == f
        if hold.all() or not hold.any():
            continue
        z_tr, y_tr = z[~hold], y_centered[~hold]
        z_va, y_va = z[hold], y_centered[hold]
        gram = z_tr.T @ z_tr / len(z_tr)
        rhs = z_tr.T @ y_tr / len(z_tr)
        for i, lam in enumerate(grid):
            beta = np.linalg.solve(gram + lam * eye, rhs)
            errors[i] += ((z_va @ beta - y_va) ** 2).sum()
    return float(grid[int(np.argmin(errors))])


def _fit_linear(
    features: NDArray[np.float64],
    outcome: NDArray[np.float64],
    feature_map: FeatureMap,
    spec: LearnerSpec,
    seed: Any,
) -> LinearModel:
    features = np.asarray(features, dtype=float)
    outcome = np.asarray(outcome, dtype=float).reshape(-1)
    if features.ndim != 2:
        raise ValueError("features must be a 2-d array")
    if len(features) != len(outcome):
        raise ValueError("features and outcome lengths differ")
    if len(outcome) < 2:
        raise ValueError("need at least 2 rows to fit")
    phi = feature_map.transform(features)
    z, center, scale, constant = _standardize(phi)
    y_bar = outcome.mean()
    y_centered = outcome - y_bar
    if spec.ridge_lambda is None:
        trace_scale = float((z**2).mean()) or 1.0
        grid = _LAMBDA_GRID * trace_scale
        rng = np.random.default_rng(seed)
        lam = _cv_lambda(z, y_centered, grid, spec.cv_folds, rng, constant)
    else:
        lam = float(spec.ridge_lambda)
    beta = _solve_ridge(z, y_centered, lam, constant)
    return LinearModel(
        coefficients=beta,
        intercept=float(y_bar),
        ridge_lambda=lam,
        feature_map=feature_map,
        center=center,
        scale=scale,
        n_features_in=features.shape[1],
    )


def fit_mean(
    features: NDArray[np.float64],
    outcome: NDArray[np.float64],
    feature_map: FeatureMap = IDENTITY_MAP,
    spec: LearnerSpec | None = None,
    seed: Any = 0,
):
    """Fit the conditional-mean model ``E[Y | features]``.

    Returns a :class:`LinearModel` or :class:`ForestModel` depending on
    ``spec.kind``.
    """

    spec = spec or LearnerSpec()
    if spec.kind == "forest":
        return fit_forest(features, outcome, feature_map, spec, seed)
    return _fit_linear(features, outcome, feature_map, spec, seed)


def fit_riesz(
    features: NDArray[np.float64],
    outcome: NDArray[np.float64],
    moment: str = MOMENT_OUTCOME_PRODUCT,
    feature_map: FeatureMap = IDENTITY_MAP,
    spec: LearnerSpec | None = None,
    seed: Any = 0,
):
    """Fit the Riesz representer of an outcome-product moment.

    Only ``MOMENT_OUTCOME_PRODUCT`` is supported; the full-conditioning
    and drop-one-column variants are both of this family and differ only
    in which columns the caller passes.  The minimizer solves the same
    normal equations as :func:`fit_mean`, but the fit keeps its own
    penalty selection (linear) or subsampling stream (forest).
    """

    if moment != MOMENT_OUTCOME_PRODUCT:
        raise NotImplementedError(
            f"unsupported moment {moment!r}; only {MOMENT_OUTCOME_PRODUCT!r} is available"
        )
    spec = spec or LearnerSpec()
    if spec.kind == "forest":
        return fit_forest(features, outcome, feature_map, spec, seed)
    return _fit_linear(features, outcome, feature_map, spec, seed)


def fit_forest(
    features: NDArray[np.float64],
    outcome: NDArray[np.float64],
    feature_map: FeatureMap = IDENTITY_MAP,
    spec: LearnerSpec | None = None,
    seed: Any = 0,
) -> ForestModel:
    """Fit an honest forest with local linear leaf solutions.

    Each tree draws ``subsample_fraction * n`` rows without replacement,
    uses the first ``honest_fraction`` for structure and the rest for the
    leaf systems, so no row influences both the splits and the values of
    the same tree.
    """

    spec = spec or LearnerSpec(kind="forest")
    features = np.asarray(features, dtype=float)
    outcome = np.asarray(outcome, dtype=float).reshape(-1)
    if features.ndim != 2:
        raise ValueError("features must be a 2-d array")
    if len(features) != len(outcome):
        raise ValueError("features and outcome lengths differ")
    n, d = features.shape
    subsample = int(round(n * spec.subsample_fraction))
    n_structure = int(round(subsample * spec.honest_fraction))
    n_estimate = subsample - n_structure
    if n_structure < 1 or n_estimate < 1:
        raise ValueError(
            f"n={n} is too small for the honest split: the subsample of "
            f"{subsample} rows cannot populate both halves"
        )

    phi = np.column_stack([np.ones(n), feature_map.transform(features)])
    p = phi.shape[1]
    # Precompute per-row outer products once; each tree just gathers rows.
    outer = (phi[:, :, None] * phi[:, None, :]).reshape(n, p * p)
    phi_y = phi * outcome[:, None]
    ridge = spec.leaf_ridge * np.eye(p)
    ridge[0, 0] = 0.0  # intercept stays unpenalized
    max_features = max(1, math.ceil(d * spec.max_features_fraction))
    splitter = "random" if spec.split_search == "random" else "best"

    rng = np.random.default_rng(seed)
    records: list[_TreeRecord] = []
    degenerate = 0
    for _ in range(spec.trees):
        chosen = rng.choice(n, size=subsample, replace=False)
        structure_rows = chosen[:n_structure]
        estimate_rows = chosen[n_structure:]
        learner = DecisionTreeRegressor(
            min_samples_leaf=spec.min_leaf,
            max_features=max_features,
            splitter=splitter,
            random_state=int(rng.integers(2**31 - 1)),
        )
        learner.fit(features[structure_rows], outcome[structure_rows])
        raw = learner.tree_
        record = _TreeRecord(
            children_left=raw.children_left.astype(np.intp),
            children_right=raw.children_right.astype(np.intp),
            split_feature=raw.feature.astype(np.intp),
            threshold=raw.threshold.astype(float),
            leaf_slot=np.zeros(raw.node_count, dtype=np.intp),
            gamma=np.zeros((1, p)),
            structure_rows=structure_rows.astype(np.intp),
            estimate_rows=estimate_rows.astype(np.intp),
        )

        leaves = _route(record, features[estimate_rows])
        present, slot = np.unique(leaves, return_inverse=True)
        order = np.argsort(slot, kind="stable")
        sorted_slots = slot[order]
        starts = np.flatnonzero(np.r_[True, sorted_slots[1:] != sorted_slots[:-1]])
        counts = np.diff(np.r_[starts, len(estimate_rows)])
        rows = estimate_rows[order]
        gram = np.add.reduceat(outer[rows], starts, axis=0).reshape(-1, p, p)
        gram /= counts[:, None, None]
        rhs = np.add.reduceat(phi_y[rows], starts, axis=0) / counts[:, None]
        gamma = np.linalg.solve(gram + ridge[None], rhs[:, :, None])[:, :, 0]

        small = counts < p + 1
        gamma[small] = 0.0
        gamma[small, 0] = rhs[small, 0]  # leaf mean of the outcome
        degenerate += int(small.sum())

        global_mean = float(outcome[estimate_rows].mean())
        fallback = np.zeros(p)
        fallback[0] = global_mean
        full_gamma = np.vstack([gamma, fallback])

        leaf_slot = np.full(raw.node_count, len(full_gamma) - 1, dtype=np.intp)
        leaf_slot[present] = np.arange(len(present))
        empty_leaves = int((record.children_left == -1).sum() - len(present))
        degenerate += max(0, empty_leaves)
        record.leaf_slot = leaf_slot
        record.gamma = full_gamma
        records.append(record)

    return ForestModel(
        trees=records,
        feature_map=feature_map,
        n_features_in=d,
        spec=spec,
        degenerate_leaves=degenerate,
    )


def fit_nuisance_pair(
    features: NDArray[np.float64],
    outcome: NDArray[np.float64],
    feature_map: FeatureMap = IDENTITY_MAP,
    spec: LearnerSpec | None = None,
    seed: Any = 0,
    target_columns: Sequence[int] | None = None,
) -> NuisancePair:
    """Fit the mean and Riesz models with decorrelated randomness."""

    spec = spec or LearnerSpec()
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    mean_seed, riesz_seed = seed.spawn(2)
    mean_model = fit_mean(features, outcome, feature_map, spec, mean_seed)
    riesz_model = fit_riesz(
        features, outcome, MOMENT_OUTCOME_PRODUCT, feature_map, spec, riesz_seed
    )
    if target_columns is None:
        target_columns = range(np.asarray(features).shape[1])
    return NuisancePair(
        mean_model=mean_model,
        riesz_model=riesz_model,
        target_columns=tuple(int(c) for c in target_columns),
    )


def predict(model: Any, features: NDArray[np.float64]) -> NDArray[np.float64]:
    """Evaluate any fitted nuisance model on new rows."""

    return model.predict(features)


class SpecLearner:
    """Adapter giving :class:`LearnerSpec` the fit-pair interface."""

    def __init__(self, spec: LearnerSpec, feature_map: FeatureMap = IDENTITY_MAP):
        self.spec = spec
        self.feature_map = feature_map

    def fit_pair(
        self,
        features: NDArray[np.float64],
        outcome: NDArray[np.float64],
        seed: Any,
        target_columns: Sequence[int],
    ) -> NuisancePair:
        return fit_nuisance_pair(
            features, outcome, self.feature_map, self.spec, seed, target_columns
        )

    def describe(self) -> dict:
        doc = self.spec.describe()
        doc["feature_map"] = self.feature_map.label
        return doc


def _map_doc(feature_map: FeatureMap) -> dict:
    if feature_map.kind == "custom":
        raise ValueError("custom feature maps are not serializable")
    return {"kind": feature_map.kind, "degree": feature_map.degree}


def model_to_json(model: Any) -> dict:
    """Serialize a fitted model to a versioned plain-data document."""

    if isinstance(model, LinearModel):
        return {
            "format_version": _SERIAL_VERSION,
            "kind": "linear",
            "coefficients": model.coefficients.tolist(),
            "intercept": model.intercept,
            "ridge_lambda": model.ridge_lambda,
            "feature_map": _map_doc(model.feature_map),
            "center": model.center.tolist(),
            "scale": model.scale.tolist(),
            "n_features_in": model.n_features_in,
        }
    if isinstance(model, ForestModel):
        return {
            "format_version": _SERIAL_VERSION,
            "kind": "forest",
            "feature_map": _map_doc(model.feature_map),
            "n_features_in": model.n_features_in,
            "degenerate_leaves": model.degenerate_leaves,
            "spec": model.spec.describe(),
            "trees": [
                {
                    "children_left": t.children_left.tolist(),
                    "children_right": t.children_right.tolist(),
                    "split_feature": t.split_feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "leaf_slot": t.leaf_slot.tolist(),
                    "gamma": t.gamma.tolist(),
                }
                for t in model.trees
            ],
        }
    raise TypeError(f"cannot serialize model of type {type(model).__name__}")


def model_from_json(doc: dict) -> Any:
    """Rebuild a model serialized by :func:`model_to_json`."""

    if doc.get("format_version") != _SERIAL_VERSION:
        raise ValueError(f"unsupported format_version {doc.get('format_version')!r}")
    map_doc = doc["feature_map"]
    feature_map = FeatureMap(kind=map_doc["kind"], degree=map_doc["degree"])
    if doc["kind"] == "linear":
        return LinearModel(
            coefficients=np.asarray(doc["coefficients"], dtype=float),
            intercept=float(doc["intercept"]),
            ridge_lambda=float(doc["ridge_lambda"]),
            feature_map=feature_map,
            center=np.asarray(doc["center"], dtype=float),
            scale=np.asarray(doc["scale"], dtype=float),
            n_features_in=int(doc["n_features_in"]),
        )
    if doc["kind"] == "forest":
        spec_doc = doc["spec"]
        spec = LearnerSpec(
            kind="forest",
            trees=spec_doc["trees"],
            min_leaf=spec_doc["min_leaf"],
            honest_fraction=spec_doc["honest_fraction"],
            subsample_fraction=spec_doc["subsample_fraction"],
            leaf_ridge=spec_doc["leaf_ridge"],
            split_search=spec_doc["split_search"],
        )
        trees = [
            _TreeRecord(
                children_left=np.asarray(t["children_left"], dtype=np.intp),
                children_right=np.asarray(t["children_right"], dtype=np.intp),
                split_feature=np.asarray(t["split_feature"], dtype=np.intp),
                threshold=np.asarray(t["threshold"], dtype=float),
                leaf_slot=np.asarray(t["leaf_slot"], dtype=np.intp),
                gamma=np.asarray(t["gamma"], dtype=float),
                structure_rows=np.empty(0, dtype=np.intp),
                estimate_rows=np.empty(0, dtype=np.intp),
            )
            for t in doc["trees"]
        ]
        return ForestModel(
            trees=trees,
            feature_map=feature_map,
            n_features_in=int(doc["n_features_in"]),
            spec=spec,
            degenerate_leaves=int(doc["degenerate_leaves"]),
        )
    raise ValueError(f"unknown model kind {doc['kind']!r}")
