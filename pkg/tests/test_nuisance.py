"""Learner behavior: ridge algebra, honesty, Riesz coincidence, round trips."""

import math

import numpy as np
import pytest

from drcfs.nuisance import (
    _LAMBDA_GRID,
    FeatureMap,
    FixedModel,
    IDENTITY_MAP,
    IllConditionedError,
    LearnerSpec,
    MOMENT_OUTCOME_PRODUCT,
    SpecLearner,
    fit_forest,
    fit_mean,
    fit_nuisance_pair,
    fit_riesz,
    model_from_json,
    model_to_json,
    predict,
)


def make_linear_data(n=400, d=3, noise=0.1, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    beta = np.arange(1, d + 1, dtype=float)
    y = 0.5 + x @ beta + noise * rng.normal(size=n)
    return x, y


# ---------------------------------------------------------------- feature maps


def test_feature_map_labels_round_trip():
    for label in ("identity", "poly:2", "poly:3"):
        assert FeatureMap.parse(label).label == label
    with pytest.raises(ValueError, match="unknown feature map label"):
        FeatureMap.parse("sine")


def test_polynomial_dimensions_match_comb():
    for d in (1, 2, 4):
        for degree in (1, 2, 3):
            fmap = FeatureMap(kind="polynomial", degree=degree)
            x = np.random.default_rng(0).normal(size=(10, d))
            expected = math.comb(d + degree, degree) - 1
            assert fmap.output_dim(d) == expected
            assert fmap.transform(x).shape == (10, expected)


def test_polynomial_degree_two_contents():
    x = np.array([[2.0, 3.0]])
    out = FeatureMap(kind="polynomial", degree=2).transform(x)
    assert sorted(out[0].tolist()) == sorted([2.0, 3.0, 4.0, 6.0, 9.0])


def test_custom_map_shape_checked():
    fmap = FeatureMap(kind="custom", fn=lambda x: np.sin(x), custom_dim=2)
    x = np.ones((5, 2))
    assert fmap.transform(x).shape == (5, 2)
    bad = FeatureMap(kind="custom", fn=lambda x: x[:, :1], custom_dim=2)
    with pytest.raises(ValueError, match="wrong shape"):
        bad.transform(x)


# ---------------------------------------------------------------- linear model


def test_unpenalized_fit_matches_lstsq():
    x, y = make_linear_data()
    model = fit_mean(x, y, spec=LearnerSpec(ridge_lambda=0.0))
    design = np.column_stack([np.ones(len(x)), x])
    theta, *_ = np.linalg.lstsq(design, y, rcond=None)
    assert np.allclose(model.predict(x), design @ theta, atol=1e-8)


def test_intercept_is_outcome_mean():
    x, y = make_linear_data(seed=3)
    model = fit_mean(x, y, spec=LearnerSpec(ridge_lambda=0.5))
    assert model.intercept == pytest.approx(y.mean(), abs=1e-12)


def test_ridge_normal_equations_hold():
    x, y = make_linear_data(seed=5)
    lam = 0.3
    model = fit_mean(x, y, spec=LearnerSpec(ridge_lambda=lam))
    z = (x - model.center) / model.scale
    gram = z.T @ z / len(z)
    rhs = z.T @ (y - y.mean()) / len(z)
    residual = (gram + lam * np.eye(z.shape[1])) @ model.coefficients - rhs
    assert np.max(np.abs(residual)) < 1e-8


def test_ridge_shrinks_monotonically():
    x, y = make_linear_data(seed=7)
    norms = [
        np.linalg.norm(fit_mean(x, y, spec=LearnerSpec(ridge_lambda=lam)).coefficients)
        for lam in (0.0, 0.1, 1.0, 10.0)
    ]
    assert norms == sorted(norms, reverse=True)
    assert norms[0] > norms[-1] * 2


def test_singular_unpenalized_system_names_columns():
    rng = np.random.default_rng(9)
    base = rng.normal(size=(100, 2))
    x = np.column_stack([base, base[:, 0] + base[:, 1]])  # exact collinearity
    with pytest.raises(IllConditionedError) as excinfo:
        fit_mean(x, rng.normal(size=100), spec=LearnerSpec(ridge_lambda=0.0))
    assert set(excinfo.value.columns) == {0, 1, 2}
    assert "singular" in str(excinfo.value)


def test_constant_column_flagged_when_unpenalized():
    rng = np.random.default_rng(11)
    x = np.column_stack([rng.normal(size=50), np.full(50, 3.0)])
    with pytest.raises(IllConditionedError) as excinfo:
        fit_mean(x, rng.normal(size=50), spec=LearnerSpec(ridge_lambda=0.0))
    assert 1 in excinfo.value.columns


def test_cv_picks_from_scaled_grid():
    x, y = make_linear_data(seed=13)
    model = fit_mean(x, y, spec=LearnerSpec(ridge_lambda=None), seed=1)
    # standardized columns have unit variance, so the scale factor is 1
    assert min(abs(model.ridge_lambda - _LAMBDA_GRID)) < 1e-12


def test_cv_prefers_small_penalty_under_strong_signal():
    x, y = make_linear_data(n=2000, noise=0.01, seed=17)
    model = fit_mean(x, y, spec=LearnerSpec(ridge_lambda=None), seed=2)
    assert model.ridge_lambda <= _LAMBDA_GRID[2]


def test_predict_validates_width():
    x, y = make_linear_data()
    model = fit_mean(x, y, spec=LearnerSpec(ridge_lambda=0.1))
    with pytest.raises(ValueError, match="feature columns"):
        model.predict(x[:, :2])


def test_fit_validates_inputs():
    with pytest.raises(ValueError, match="2-d"):
        fit_mean(np.ones(5), np.ones(5))
    with pytest.raises(ValueError, match="lengths differ"):
        fit_mean(np.ones((5, 2)), np.ones(4))
    with pytest.raises(ValueError, match="at least 2 rows"):
        fit_mean(np.ones((1, 2)), np.ones(1))


# --------------------------------------------------------- riesz / mean match


def test_riesz_solves_same_system_as_mean():
    # for the outcome-product moment the representer's normal equations are
    # the ridge equations, so with a fixed penalty the two fits coincide
    x, y = make_linear_data(seed=19)
    spec = LearnerSpec(ridge_lambda=0.2)
    mean = fit_mean(x, y, spec=spec, seed=0)
    riesz = fit_riesz(x, y, MOMENT_OUTCOME_PRODUCT, spec=spec, seed=99)
    assert np.max(np.abs(mean.coefficients - riesz.coefficients)) < 1e-10
    assert np.max(np.abs(mean.predict(x) - riesz.predict(x))) < 1e-10


def test_riesz_first_order_condition():
    # the fitted representer must satisfy E_n[a phi_k] = E_n[y phi_k] on the
    # standardized basis, up to the ridge term
    x, y = make_linear_data(seed=23)
    lam = 0.1
    model = fit_riesz(x, y, spec=LearnerSpec(ridge_lambda=lam))
    z = (x - model.center) / model.scale
    a_centered = model.predict(x) - model.intercept
    lhs = z.T @ a_centered / len(z) + lam * model.coefficients
    rhs = z.T @ (y - y.mean()) / len(z)
    assert np.max(np.abs(lhs - rhs)) < 1e-8


def test_unknown_moment_rejected():
    x, y = make_linear_data()
    with pytest.raises(NotImplementedError, match="outcome-product"):
        fit_riesz(x, y, moment="average-derivative")


def test_pair_uses_decorrelated_streams():
    x, y = make_linear_data(n=300, seed=29)
    spec = LearnerSpec(kind="forest", trees=10, min_leaf=10)
    pair = fit_nuisance_pair(x, y, spec=spec, seed=3, target_columns=(0, 1, 2))
    g = pair.mean_model.predict(x)
    a = pair.riesz_model.predict(x)
    assert pair.target_columns == (0, 1, 2)
    # same target function, independent subsampling: close but not identical
    assert np.corrcoef(g, a)[0, 1] > 0.9
    assert np.max(np.abs(g - a)) > 1e-12


def test_pair_accepts_seed_sequence():
    x, y = make_linear_data(n=100, seed=31)
    seq = np.random.SeedSequence(entropy=5, spawn_key=(2,))
    pair = fit_nuisance_pair(x, y, spec=LearnerSpec(ridge_lambda=0.1), seed=seq)
    again = fit_nuisance_pair(
        x, y, spec=LearnerSpec(ridge_lambda=0.1),
        seed=np.random.SeedSequence(entropy=5, spawn_key=(2,)),
    )
    assert np.array_equal(
        pair.mean_model.coefficients, again.mean_model.coefficients
    )


# --------------------------------------------------------------------- forest


def test_forest_honest_halves_are_disjoint():
    x, y = make_linear_data(n=200, seed=37)
    model = fit_forest(x, y, spec=LearnerSpec(kind="forest", trees=5))
    for tree in model.trees:
        structure = set(tree.structure_rows.tolist())
        estimate = set(tree.estimate_rows.tolist())
        assert structure.isdisjoint(estimate)
        assert len(structure) + len(estimate) == round(200 * 0.5)
        assert len(tree.structure_rows) == len(structure)  # no replacement


def test_root_only_tree_is_estimation_half_ridge():
    n, d = 200, 2
    x, y = make_linear_data(n=n, d=d, seed=41)
    spec = LearnerSpec(
        kind="forest",
        trees=1,
        min_leaf=n,  # no split can satisfy this: the tree stays a root
        subsample_fraction=1.0,
        leaf_ridge=1e-10,
    )
    model = fit_forest(x, y, spec=spec, seed=0)
    tree = model.trees[0]
    assert tree.children_left[0] == -1  # really a single leaf
    rows = tree.estimate_rows
    phi = np.column_stack([np.ones(len(rows)), x[rows]])
    gram = phi.T @ phi / len(rows)
    rhs = phi.T @ y[rows] / len(rows)
    ridge = 1e-10 * np.eye(d + 1)
    ridge[0, 0] = 0.0
    gamma = np.linalg.solve(gram + ridge, rhs)
    grid = np.random.default_rng(1).normal(size=(50, d))
    expected = np.column_stack([np.ones(50), grid]) @ gamma
    assert np.allclose(model.predict(grid), expected, atol=1e-8)


def test_forest_recovers_linear_signal():
    x, y = make_linear_data(n=1500, d=2, noise=0.2, seed=43)
    spec = LearnerSpec(kind="forest", trees=40, min_leaf=20)
    model = fit_forest(x[:1000], y[:1000], spec=spec, seed=7)
    pred = model.predict(x[1000:])
    resid = y[1000:] - pred
    r2 = 1.0 - resid.var() / y[1000:].var()
    assert r2 > 0.85


def test_forest_handles_step_function():
    rng = np.random.default_rng(47)
    x = rng.uniform(-1, 1, size=(1200, 1))
    y = np.sign(x[:, 0]) + 0.1 * rng.normal(size=1200)
    spec = LearnerSpec(kind="forest", trees=60, min_leaf=15)
    model = fit_forest(x[:800], y[:800], spec=spec, seed=11)
    test = x[800:]
    pred = model.predict(test)
    errors = (pred - np.sign(test[:, 0])) ** 2
    # leaves straddling the jump blur it; away from the jump the fit is clean
    away = np.abs(test[:, 0]) > 0.2
    assert float(errors[away].mean()) < 0.02
    assert float(errors.mean()) < 0.15


def test_forest_counts_degenerate_leaves():
    rng = np.random.default_rng(53)
    x = rng.normal(size=(60, 4))
    y = rng.normal(size=60)
    spec = LearnerSpec(kind="forest", trees=10, min_leaf=1)
    model = fit_forest(x, y, spec=spec, seed=1)
    assert model.degenerate_leaves > 0


def test_forest_is_seed_deterministic():
    x, y = make_linear_data(n=300, seed=59)
    spec = LearnerSpec(kind="forest", trees=8)
    grid = np.random.default_rng(2).normal(size=(40, 3))
    a = fit_forest(x, y, spec=spec, seed=21).predict(grid)
    b = fit_forest(x, y, spec=spec, seed=21).predict(grid)
    c = fit_forest(x, y, spec=spec, seed=22).predict(grid)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_forest_rejects_tiny_samples():
    with pytest.raises(ValueError, match="honest split"):
        fit_forest(np.ones((2, 1)), np.ones(2), spec=LearnerSpec(kind="forest"))


# --------------------------------------------------------------- odds and ends


def test_fixed_model_broadcasts():
    model = FixedModel(fn=lambda x: 2.5)
    assert np.array_equal(model.predict(np.ones((4, 3))), np.full(4, 2.5))
    vector = FixedModel(fn=lambda x: x[:, 0] ** 2)
    assert np.array_equal(vector.predict(np.array([[2.0], [3.0]])), [4.0, 9.0])


def test_spec_learner_interface():
    learner = SpecLearner(LearnerSpec(ridge_lambda=0.1), FeatureMap.parse("poly:2"))
    doc = learner.describe()
    assert doc["kind"] == "linear"
    assert doc["feature_map"] == "poly:2"
    x, y = make_linear_data(n=100, seed=61)
    pair = learner.fit_pair(x, y, seed=0, target_columns=(0, 2))
    assert pair.target_columns == (0, 2)
    assert predict(pair.mean_model, x).shape == (100,)


def test_linear_serialization_round_trip():
    x, y = make_linear_data(seed=67)
    model = fit_mean(x, y, FeatureMap.parse("poly:2"), LearnerSpec(ridge_lambda=0.2))
    clone = model_from_json(model_to_json(model))
    assert np.allclose(clone.predict(x), model.predict(x), atol=1e-12)
    assert clone.ridge_lambda == model.ridge_lambda


def test_forest_serialization_round_trip():
    x, y = make_linear_data(n=250, seed=71)
    model = fit_forest(x, y, spec=LearnerSpec(kind="forest", trees=6), seed=5)
    clone = model_from_json(model_to_json(model))
    grid = np.random.default_rng(3).normal(size=(30, 3))
    assert np.allclose(clone.predict(grid), model.predict(grid), atol=1e-12)
    assert clone.degenerate_leaves == model.degenerate_leaves


def test_custom_map_not_serializable():
    fmap = FeatureMap(kind="custom", fn=lambda x: x, custom_dim=2)
    x, y = make_linear_data(d=2, seed=73)
    model = fit_mean(x, y, fmap, LearnerSpec(ridge_lambda=0.1))
    with pytest.raises(ValueError, match="not serializable"):
        model_to_json(model)


def test_bad_serial_version_rejected():
    x, y = make_linear_data(seed=79)
    doc = model_to_json(fit_mean(x, y, spec=LearnerSpec(ridge_lambda=0.1)))
    doc["format_version"] = 99
    with pytest.raises(ValueError, match="format_version"):
        model_from_json(doc)


def test_spec_validation():
    with pytest.raises(ValueError, match="unknown learner kind"):
        LearnerSpec(kind="boosting")
    with pytest.raises(ValueError, match="honest_fraction"):
        LearnerSpec(kind="forest", honest_fraction=1.0)
    with pytest.raises(ValueError, match="split_search"):
        LearnerSpec(kind="forest", split_search="greedy")
    assert IDENTITY_MAP.output_dim(4) == 4
