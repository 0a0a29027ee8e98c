"""Exact discrete-model checks: enumeration, chi identities, interventions."""

import itertools

import numpy as np
import pytest

from drcfs.oracle import (
    DiscreteSCM,
    ZeroProbabilityError,
    chi_from_moments,
    counterexample_fixtures,
    exact_acde,
    exact_chi,
    exact_chi_all,
    random_scm,
    scm_from_json,
    scm_to_json,
)


def two_feature_scm():
    """X0 ~ Bern(0.5), X1 | X0 flips with prob 0.2, Y = X0 + 2 X1 + noise."""
    return DiscreteSCM(
        supports=((0.0, 1.0), (0.0, 1.0)),
        parents=((), (0,)),
        cpts=(
            {(): (0.5, 0.5)},
            {(0.0,): (0.8, 0.2), (1.0,): (0.2, 0.8)},
        ),
        outcome_parents=(0, 1),
        outcome_table={
            (0.0, 0.0): 0.0,
            (0.0, 1.0): 2.0,
            (1.0, 0.0): 1.0,
            (1.0, 1.0): 3.0,
        },
        noise_support=(-0.5, 0.5),
        noise_probs=(0.5, 0.5),
    )


def null_feature_scm():
    """X1 depends on X0 but the outcome reads only X0."""
    return DiscreteSCM(
        supports=((0.0, 1.0), (0.0, 1.0)),
        parents=((), (0,)),
        cpts=(
            {(): (0.3, 0.7)},
            {(0.0,): (0.9, 0.1), (1.0,): (0.4, 0.6)},
        ),
        outcome_parents=(0,),
        outcome_table={(0.0,): -1.0, (1.0,): 1.0},
        noise_support=(0.0,),
        noise_probs=(1.0,),
    )


def test_joint_enumeration_sums_to_one():
    states, probs = two_feature_scm().enumerate_joint()
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert len(states) == 4
    assert np.all(probs > 0)


def test_joint_matches_hand_computation():
    scm = two_feature_scm()
    states, probs = scm.enumerate_joint()
    table = {tuple(s): p for s, p in zip(states, probs)}
    assert table[(0.0, 0.0)] == pytest.approx(0.5 * 0.8)
    assert table[(0.0, 1.0)] == pytest.approx(0.5 * 0.2)
    assert table[(1.0, 0.0)] == pytest.approx(0.5 * 0.2)
    assert table[(1.0, 1.0)] == pytest.approx(0.5 * 0.8)


def test_exact_chi_hand_value():
    # g(x0,x1) = y(x0,x1) since outcome noise is mean-zero.
    # Dropping X1: h(x0) = E[Y | X0=x0] = x0 + 2 P(X1=1 | X0=x0).
    # gap at (x0, x1) is 2 x1 - 2 P(X1=1 | x0); squares weighted by the joint.
    scm = two_feature_scm()
    expected = 0.0
    for x0, p0 in ((0.0, 0.5), (1.0, 0.5)):
        p1 = 0.2 if x0 == 0.0 else 0.8
        for x1, p1x in ((0.0, 1.0 - p1), (1.0, p1)):
            expected += p0 * p1x * (2.0 * x1 - 2.0 * p1) ** 2
    assert exact_chi(scm, 1) == pytest.approx(expected, abs=1e-12)


def test_null_feature_has_zero_chi():
    scm = null_feature_scm()
    assert exact_chi(scm, 1) == pytest.approx(0.0, abs=1e-12)
    assert exact_chi(scm, 0) > 0.05


def test_chi_all_matches_per_feature():
    scm = two_feature_scm()
    values = exact_chi_all(scm)
    assert values == pytest.approx([exact_chi(scm, 0), exact_chi(scm, 1)])


def test_moment_route_agrees_with_squared_gap_route():
    rng = np.random.default_rng(42)
    for _ in range(25):
        scm = random_scm(rng, n_features=rng.integers(2, 5))
        for j in range(scm.n_features):
            assert chi_from_moments(scm, j) == pytest.approx(
                exact_chi(scm, j), abs=1e-12
            )


def test_random_scm_parents_have_positive_chi():
    rng = np.random.default_rng(7)
    for _ in range(20):
        scm = random_scm(rng, n_features=3)
        for j in range(scm.n_features):
            value = exact_chi(scm, j)
            if j in scm.outcome_parents:
                assert value > 1e-4
            else:
                assert value == pytest.approx(0.0, abs=1e-12)


def test_exact_acde_hand_value():
    # values are (low, high): the effect of moving X1 from 0 to 1 is
    # y(x0, 1) - y(x0, 0) = 2 in every context for this table.
    scm = two_feature_scm()
    for x0 in (0.0, 1.0):
        effect = exact_acde(scm, 1, (0.0, 1.0), {0: x0})
        assert effect == pytest.approx(2.0, abs=1e-12)
        flipped = exact_acde(scm, 1, (1.0, 0.0), {0: x0})
        assert flipped == pytest.approx(-2.0, abs=1e-12)


def test_exact_acde_requires_full_context():
    with pytest.raises(ValueError, match="context"):
        exact_acde(two_feature_scm(), 1, (1.0, 0.0), {})


def test_exact_acde_zero_probability_context():
    scm = null_feature_scm()
    # force a zero-probability conditioning event with a degenerate root
    degenerate = DiscreteSCM(
        supports=((0.0, 1.0), (0.0, 1.0)),
        parents=((), (0,)),
        cpts=(
            {(): (1.0, 0.0)},
            {(0.0,): (0.5, 0.5), (1.0,): (0.5, 0.5)},
        ),
        outcome_parents=(0, 1),
        outcome_table={
            (0.0, 0.0): 0.0,
            (0.0, 1.0): 1.0,
            (1.0, 0.0): 2.0,
            (1.0, 1.0): 3.0,
        },
        noise_support=(0.0,),
        noise_probs=(1.0,),
    )
    with pytest.raises(ZeroProbabilityError):
        exact_acde(degenerate, 1, (1.0, 0.0), {0: 1.0})
    assert scm is not None


def test_validation_rejects_bad_inputs():
    with pytest.raises(ValueError, match="distribution"):
        DiscreteSCM(
            supports=((0.0, 1.0),),
            parents=((),),
            cpts=({(): (0.6, 0.6)},),
            outcome_parents=(0,),
            outcome_table={(0.0,): 0.0, (1.0,): 1.0},
            noise_support=(0.0,),
            noise_probs=(1.0,),
        )
    with pytest.raises(ValueError, match="cycle"):
        DiscreteSCM(
            supports=((0.0, 1.0), (0.0, 1.0)),
            parents=((1,), (0,)),
            cpts=(
                {(0.0,): (0.5, 0.5), (1.0,): (0.5, 0.5)},
                {(0.0,): (0.5, 0.5), (1.0,): (0.5, 0.5)},
            ),
            outcome_parents=(0,),
            outcome_table={(0.0,): 0.0, (1.0,): 1.0},
            noise_support=(0.0,),
            noise_probs=(1.0,),
        )
    with pytest.raises(ValueError, match="outcome table"):
        DiscreteSCM(
            supports=((0.0, 1.0),),
            parents=((),),
            cpts=({(): (0.5, 0.5)},),
            outcome_parents=(0,),
            outcome_table={(0.0,): 0.0},
            noise_support=(0.0,),
            noise_probs=(1.0,),
        )


def test_enumeration_cap_enforced():
    k = 30  # 2^30 > 10^7 cells
    with pytest.raises(ValueError, match="enumeration"):
        DiscreteSCM(
            supports=tuple((0.0, 1.0) for _ in range(k)),
            parents=tuple(() for _ in range(k)),
            cpts=tuple({(): (0.5, 0.5)} for _ in range(k)),
            outcome_parents=(0,),
            outcome_table={(0.0,): 0.0, (1.0,): 1.0},
            noise_support=(0.0,),
            noise_probs=(1.0,),
        )


def test_counterexample_fixtures_distinguishable_only_by_intervention():
    fixtures = counterexample_fixtures(n=200_000, seed=3)
    assert [f.name for f in fixtures] == ["shared-noise", "reversed-cause"]
    for fixture in fixtures:
        cov_a = np.cov(fixture.x_a, fixture.y_a)
        cov_b = np.cov(fixture.x_b, fixture.y_b)
        # both members of the pair share the observational covariance
        assert np.allclose(cov_a, fixture.covariance, atol=0.02)
        assert np.allclose(cov_b, fixture.covariance, atol=0.02)
        # yet their parent sets differ
        assert fixture.parents_a != fixture.parents_b


def test_serialization_round_trip():
    rng = np.random.default_rng(11)
    scm = random_scm(rng, n_features=3)
    clone = scm_from_json(scm_to_json(scm))
    assert clone.supports == scm.supports
    assert clone.parents == scm.parents
    assert clone.outcome_table == scm.outcome_table
    for j in range(scm.n_features):
        assert exact_chi(clone, j) == pytest.approx(exact_chi(scm, j), abs=1e-12)


def test_marginalization_consistency():
    # summing the joint over feature j then recomputing E[Y | rest] must match
    # the h used inside exact_chi: verify via total variance decomposition
    # E[(g - h)^2] = E[g^2] - E[h^2].
    rng = np.random.default_rng(19)
    for _ in range(10):
        scm = random_scm(rng, n_features=3)
        states, probs = scm.enumerate_joint()
        g = np.array([scm.conditional_mean(tuple(s)) for s in states])
        for j in range(scm.n_features):
            rest = [i for i in range(scm.n_features) if i != j]
            groups = {}
            for idx, s in enumerate(states):
                groups.setdefault(tuple(s[i] for i in rest), []).append(idx)
            gap_sq = 0.0
            for idxs in groups.values():
                w = probs[idxs]
                total = w.sum()
                h = float(g[idxs] @ w / total) if total > 0 else 0.0
                gap_sq += float(((g[idxs] - h) ** 2) @ w)
            assert exact_chi(scm, j) == pytest.approx(gap_sq, abs=1e-12)


def test_itertools_support_ordering_is_stable():
    # enumerate_joint must list states in product order over supports
    scm = two_feature_scm()
    states, _ = scm.enumerate_joint()
    expected = list(itertools.product((0.0, 1.0), repeat=2))
    assert [tuple(s) for s in states] == expected
