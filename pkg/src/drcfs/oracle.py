"""Exact ground truth on small discrete structural models.

Everything here is brute force: the joint law of the features is
enumerated cell by cell, so the population quantities the estimators
target (conditional-mean gaps, intervention contrasts, moment products)
can be computed to machine precision and compared path against path.

The outcome is always ``Y = f(parents) + noise`` with a deterministic
table ``f`` and independent discrete noise, which keeps conditional and
interventional means equal by construction; the checks assert that
equality rather than assume it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "ENUMERATION_CAP",
    "DiscreteSCM",
    "ZeroProbabilityError",
    "GaussianPairFixture",
    "exact_chi",
    "exact_chi_all",
    "chi_from_moments",
    "exact_acde",
    "random_scm",
    "counterexample_fixtures",
    "scm_to_json",
    "scm_from_json",
]

#: Refuse to enumerate feature joints larger than this many cells.
ENUMERATION_CAP = 10**7

_PROB_TOL = 1e-9


class ZeroProbabilityError(ValueError):
    """Conditioning event has zero probability on the observational path."""


@dataclass(frozen=True)
class DiscreteSCM:
    """Finite-support structural model with a numeric outcome.

    Features ``0..m-1`` each have a finite support and a conditional
    probability table keyed by the tuple of parent values (in parent-list
    order).  The outcome is ``f(parent values) + noise`` where ``f`` is a
    deterministic table over the outcome parents and the noise is an
    independent discrete draw.
    """

    supports: tuple[tuple[float, ...], ...]
    parents: tuple[tuple[int, ...], ...]
    cpts: tuple[Mapping[tuple, tuple[float, ...]], ...]
    outcome_parents: tuple[int, ...]
    outcome_table: Mapping[tuple, float]
    noise_support: tuple[float, ...] = (0.0,)
    noise_probs: tuple[float, ...] = (1.0,)

    def __post_init__(self) -> None:
        m = len(self.supports)
        if len(self.parents) != m or len(self.cpts) != m:
            raise ValueError("supports, parents, and cpts must align")
        cells = 1
        for support in self.supports:
            if not support:
                raise ValueError("every feature needs a nonempty support")
            cells *= len(support)
            if cells > ENUMERATION_CAP:
                raise ValueError(
                    f"joint support exceeds the enumeration cap of {ENUMERATION_CAP} cells"
                )
        self._topological_order()  # raises on cycles
        for j in range(m):
            for pa in self.parents[j]:
                if not 0 <= pa < m or pa == j:
                    raise ValueError(f"feature {j} has an invalid parent {pa}")
            for config in itertools.product(*(self.supports[p] for p in self.parents[j])):
                probs = self.cpts[j].get(config)
                if probs is None:
                    raise ValueError(f"feature {j} lacks a CPT row for parents {config}")
                probs = np.asarray(probs, dtype=float)
                if len(probs) != len(self.supports[j]):
                    raise ValueError(f"CPT row for feature {j}, parents {config} has wrong length")
                if (probs < -_PROB_TOL).any() or abs(probs.sum() - 1.0) > _PROB_TOL:
                    raise ValueError(
                        f"CPT row for feature {j}, parents {config} is not a distribution"
                    )
        for pa in self.outcome_parents:
            if not 0 <= pa < m:
                raise ValueError(f"invalid outcome parent {pa}")
        for config in itertools.product(*(self.supports[p] for p in self.outcome_parents)):
            if config not in self.outcome_table:
                raise ValueError(f"outcome table lacks a row for parents {config}")
        noise = np.asarray(self.noise_probs, dtype=float)
        if len(self.noise_support) != len(noise):
            raise ValueError("noise support and probabilities must align")
        if (noise < -_PROB_TOL).any() or abs(noise.sum() - 1.0) > _PROB_TOL:
            raise ValueError("noise probabilities are not a distribution")

    @property
    def n_features(self) -> int:
        return len(self.supports)

    @property
    def noise_mean(self) -> float:
        return float(
            np.dot(np.asarray(self.noise_support), np.asarray(self.noise_probs))
        )

    def _topological_order(self) -> list[int]:
        m = len(self.parents)
        remaining = {j: set(self.parents[j]) for j in range(m)}
        order: list[int] = []
        while remaining:
            ready = sorted(j for j, deps in remaining.items() if not deps)
            if not ready:
                raise ValueError("feature parent sets contain a cycle")
            for j in ready:
                del remaining[j]
                for deps in remaining.values():
                    deps.discard(j)
            order.extend(ready)
        return order

    def enumerate_joint(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """All feature assignments with their probabilities via the chain rule."""

        m = self.n_features
        states = np.array(list(itertools.product(*self.supports)), dtype=float)
        probs = np.ones(len(states))
        for j in self._topological_order():
            support = list(self.supports[j])
            for row, state in enumerate(states):
                config = tuple(state[p] for p in self.parents[j])
                probs[row] *= self.cpts[j][config][support.index(state[j])]
        return states, probs

    def conditional_mean(self, state: Sequence[float]) -> float:
        """``E[Y | X = state]``, defined for every state by construction."""

        config = tuple(np.asarray(state, dtype=float)[list(self.outcome_parents)])
        return float(self.outcome_table[config]) + self.noise_mean


def _marginalized_means(
    scm: DiscreteSCM, j: int, states: NDArray[np.float64], probs: NDArray[np.float64]
) -> NDArray[np.float64]:
    """``E[Y | X without j]`` evaluated at every joint state."""

    g = np.array([scm.conditional_mean(s) for s in states])
    rest = [c for c in range(scm.n_features) if c != j]
    keys = [tuple(s) for s in states[:, rest]]
    weight_sum: dict[tuple, float] = {}
    value_sum: dict[tuple, float] = {}
    for key, p, gv in zip(keys, probs, g):
        weight_sum[key] = weight_sum.get(key, 0.0) + p
        value_sum[key] = value_sum.get(key, 0.0) + p * gv
    h = np.empty(len(states))
    for row, key in enumerate(keys):
        w = weight_sum[key]
        # Zero-probability groups never contribute to chi; reuse g there.
        h[row] = value_sum[key] / w if w > 0 else g[row]
    return h


def exact_chi(scm: DiscreteSCM, j: int) -> float:
    """Population conditional-gap value for feature ``j`` by enumeration."""

    if not 0 <= j < scm.n_features:
        raise ValueError(f"feature index {j} out of range")
    states, probs = scm.enumerate_joint()
    g = np.array([scm.conditional_mean(s) for s in states])
    h = _marginalized_means(scm, j, states, probs)
    return float(np.dot(probs, (g - h) ** 2))


def exact_chi_all(scm: DiscreteSCM) -> NDArray[np.float64]:
    return np.array([exact_chi(scm, j) for j in range(scm.n_features)])


def chi_from_moments(scm: DiscreteSCM, j: int) -> float:
    """Same quantity through the moment identity ``E[Y g] - E[Y h]``.

    The products are enumerated over the joint of features and outcome
    noise, a genuinely different computational path than the squared-gap
    enumeration in :func:`exact_chi`.
    """

    if not 0 <= j < scm.n_features:
        raise ValueError(f"feature index {j} out of range")
    states, probs = scm.enumerate_joint()
    g = np.array([scm.conditional_mean(s) for s in states])
    h = _marginalized_means(scm, j, states, probs)
    noise_vals = np.asarray(scm.noise_support, dtype=float)
    noise_probs = np.asarray(scm.noise_probs, dtype=float)
    e_yg = 0.0
    e_yh = 0.0
    for state, p, gv, hv in zip(states, probs, g, h):
        f_val = scm.conditional_mean(state) - scm.noise_mean
        for eps, pe in zip(noise_vals, noise_probs):
            y = f_val + eps
            e_yg += p * pe * y * gv
            e_yh += p * pe * y * hv
    return e_yg - e_yh


def exact_acde(
    scm: DiscreteSCM,
    j: int,
    values: tuple[float, float],
    context: Mapping[int, float],
) -> float:
    """Average controlled direct effect of moving ``X_j`` between two values.

    The interventional side fixes every feature by mechanism replacement;
    the observational side conditions on the same assignment and requires
    it to have positive probability.  Both sides are computed and must
    agree to ``1e-12``; the common value is returned.
    """

    if not 0 <= j < scm.n_features:
        raise ValueError(f"feature index {j} out of range")
    low, high = values
    rest = [c for c in range(scm.n_features) if c != j]
    if set(context) != set(rest):
        raise ValueError("context must assign every feature except the intervened one")

    def do_mean(xj: float) -> float:
        state = np.empty(scm.n_features)
        state[j] = xj
        for c in rest:
            state[c] = context[c]
        return scm.conditional_mean(state)

    def observational_mean(xj: float) -> float:
        states, probs = scm.enumerate_joint()
        match = np.ones(len(states), dtype=bool)
        match &= states[:, j] == xj
        for c in rest:
            match &= states[:, c] == context[c]
        total = probs[match].sum()
        if total <= 0.0:
            raise ZeroProbabilityError(
                f"context with X_{j}={xj} has zero probability on the observational path"
            )
        g = np.array([scm.conditional_mean(s) for s in states[match]])
        return float(np.dot(probs[match], g) / total)

    do_effect = do_mean(high) - do_mean(low)
    obs_effect = observational_mean(high) - observational_mean(low)
    if abs(do_effect - obs_effect) > 1e-12:
        raise AssertionError(
            f"interventional and observational contrasts disagree: "
            f"{do_effect} vs {obs_effect}"
        )
    return do_effect


def random_scm(
    rng: np.random.Generator,
    n_features: int | None = None,
    max_features: int = 4,
) -> DiscreteSCM:
    """Sample a small binary-feature model with a non-degenerate outcome.

    Every CPT probability stays inside ``[0.05, 0.95]`` so all contexts
    are reachable, and the outcome table is resampled until every outcome
    parent moves the mean by at least 0.05 in some context.
    """

    if n_features is None:
        n_features = int(rng.integers(2, max_features + 1))
    if n_features < 1:
        raise ValueError("need at least one feature")
    supports = tuple((0.0, 1.0) for _ in range(n_features))
    parents = []
    cpts = []
    for j in range(n_features):
        pa = tuple(i for i in range(j) if rng.uniform() < 0.5)
        parents.append(pa)
        rows = {}
        for config in itertools.product(*(supports[p] for p in pa)):
            p_one = float(np.clip(rng.uniform(), 0.05, 0.95))
            rows[config] = (1.0 - p_one, p_one)
        cpts.append(rows)

    outcome_parents = tuple(j for j in range(n_features) if rng.uniform() < 0.5)
    configs = list(itertools.product(*(supports[p] for p in outcome_parents)))
    while True:
        table = {config: float(rng.normal()) for config in configs}
        if _table_moves_every_parent(table, outcome_parents):
            break

    size = int(rng.integers(1, 4))
    noise_support = tuple(float(v) for v in rng.normal(scale=0.5, size=size))
    raw = rng.uniform(0.05, 1.0, size=size)
    noise_probs = tuple(float(v) for v in raw / raw.sum())
    return DiscreteSCM(
        supports=supports,
        parents=tuple(parents),
        cpts=tuple(cpts),
        outcome_parents=outcome_parents,
        outcome_table=table,
        noise_support=noise_support,
        noise_probs=noise_probs,
    )


def _table_moves_every_parent(
    table: Mapping[tuple, float], outcome_parents: tuple[int, ...]
) -> bool:
    for pos in range(len(outcome_parents)):
        moved = False
        for config, value in table.items():
            sibling = list(config)
            sibling[pos] = 1.0 - sibling[pos]
            if abs(value - table[tuple(sibling)]) > 0.05:
                moved = True
                break
        if not moved:
            return False
    return True


@dataclass(frozen=True)
class GaussianPairFixture:
    """Two Gaussian mechanisms with matched second moments but different graphs."""

    name: str
    covariance: NDArray[np.float64]
    x_a: NDArray[np.float64]
    y_a: NDArray[np.float64]
    parents_a: frozenset[int]
    x_b: NDArray[np.float64]
    y_b: NDArray[np.float64]
    parents_b: frozenset[int]


def counterexample_fixtures(n: int = 10_000, seed: int = 0) -> list[GaussianPairFixture]:
    """Sampled pairs where covariance alone cannot identify the parent set.

    The first pair shares a single noise source, so ``(X, Y)`` is the same
    degenerate joint whether or not the edge ``X -> Y`` exists.  The
    second pair realizes the covariance ``[[1, 1], [1, 2]]`` with the
    cause on either side.
    """

    rng = np.random.default_rng(seed)

    shared = rng.standard_normal(n)
    cause = rng.standard_normal(n)
    pair_shared = GaussianPairFixture(
        name="shared-noise",
        covariance=np.array([[1.0, 1.0], [1.0, 1.0]]),
        x_a=shared.copy(),
        y_a=shared.copy(),
        parents_a=frozenset(),
        x_b=cause,
        y_b=cause.copy(),
        parents_b=frozenset({0}),
    )

    x_fwd = rng.standard_normal(n)
    y_fwd = x_fwd + rng.standard_normal(n)
    y_rev = math.sqrt(2.0) * rng.standard_normal(n)
    x_rev = 0.5 * y_rev + math.sqrt(0.5) * rng.standard_normal(n)
    pair_reverse = GaussianPairFixture(
        name="reversed-cause",
        covariance=np.array([[1.0, 1.0], [1.0, 2.0]]),
        x_a=x_fwd,
        y_a=y_fwd,
        parents_a=frozenset({0}),
        x_b=x_rev,
        y_b=y_rev,
        parents_b=frozenset(),
    )
    return [pair_shared, pair_reverse]


def scm_to_json(scm: DiscreteSCM) -> dict:
    """Plain-data document for a discrete model; keys are stringified tuples."""

    def pack(mapping: Mapping[tuple, object]) -> list:
        return [[list(k), v] for k, v in sorted(mapping.items())]

    return {
        "format_version": 1,
        "supports": [list(s) for s in scm.supports],
        "parents": [list(p) for p in scm.parents],
        "cpts": [pack({k: list(v) for k, v in cpt.items()}) for cpt in scm.cpts],
        "outcome_parents": list(scm.outcome_parents),
        "outcome_table": pack(dict(scm.outcome_table)),
        "noise_support": list(scm.noise_support),
        "noise_probs": list(scm.noise_probs),
    }


def scm_from_json(doc: dict) -> DiscreteSCM:
    if doc.get("format_version") != 1:
        raise ValueError(f"unsupported format_version {doc.get('format_version')!r}")

    def unpack(rows: list, value_fn) -> dict:
        return {tuple(k): value_fn(v) for k, v in rows}

    return DiscreteSCM(
        supports=tuple(tuple(s) for s in doc["supports"]),
        parents=tuple(tuple(p) for p in doc["parents"]),
        cpts=tuple(unpack(rows, tuple) for rows in doc["cpts"]),
        outcome_parents=tuple(doc["outcome_parents"]),
        outcome_table=unpack(doc["outcome_table"], float),
        noise_support=tuple(doc["noise_support"]),
        noise_probs=tuple(doc["noise_probs"]),
    )
