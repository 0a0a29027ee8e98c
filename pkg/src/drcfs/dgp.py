"""Synthetic data generator for causal feature-selection benchmarks.

A random directed acyclic graph over ``m`` feature nodes plus one outcome
node is sampled, every node is assigned a nonlinear transform from a
user-weighted mixture, and values are propagated in topological order as
``value = transform(parent values) + noise``.  Feature nodes can then be
hidden with a fixed probability, which removes their columns from the
observed matrix while their values keep feeding descendants.

The outcome node is always placed last in the topological order, so no
feature is ever a descendant of the outcome and the ground-truth label of
a column is simply "is there an edge into the outcome".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp

__all__ = [
    "TRANSFORM_FAMILIES",
    "TransformSpec",
    "NoiseSpec",
    "DgpConfig",
    "CausalGraph",
    "SimulatedDataset",
    "SimulationError",
    "eval_transform",
    "sample_graph",
    "simulate_dataset",
    "ground_truth_parents",
    "dataset_to_csv",
    "ground_truth_document",
    "ground_truth_to_json",
]

#: Supported transform families, keyed by short label.
TRANSFORM_FAMILIES = ("f1", "f2", "f3", "f4", "f5", "f6", "f7")

# Default constants (a, b, c) per family.  c is only read by f3 and f4.
_TRANSFORM_DEFAULTS = {
    "f1": (0.5, 0.0, 0.0),
    "f2": (0.5, 0.0, 0.0),
    "f3": (1.0, 0.0, 0.5),
    "f4": (1.0, 0.0, 2.0),
    "f5": (3.0, 0.1, 0.0),
    "f6": (1.0, math.log(2.0), 0.0),
    "f7": (1.0, 0.0, 0.0),
}


class SimulationError(ValueError):
    """Raised when a sampled configuration cannot produce finite data."""


@dataclass(frozen=True)
class TransformSpec:
    """One transform family with its constants.

    Parameters
    ----------
    family:
        Label in :data:`TRANSFORM_FAMILIES`.  The families are, in order:
        linear sum, sum of square roots, sum of sines, sum of hyperbolic
        tangents, geometric mean, log-sum-exp, and square root of the sum.
    a, b, c:
        Scale, offset, and inner frequency/steepness constants.  ``None``
        selects the family default.
    """

    family: str
    a: float | None = None
    b: float | None = None
    c: float | None = None

    def __post_init__(self) -> None:
        if self.family not in TRANSFORM_FAMILIES:
            raise ValueError(
                f"unknown transform family {self.family!r}; "
                f"expected one of {TRANSFORM_FAMILIES}"
            )
        da, db, dc = _TRANSFORM_DEFAULTS[self.family]
        if self.a is None:
            object.__setattr__(self, "a", da)
        if self.b is None:
            object.__setattr__(self, "b", db)
        if self.c is None:
            object.__setattr__(self, "c", dc)

    def to_dict(self) -> dict:
        return {"family": self.family, "a": self.a, "b": self.b, "c": self.c}

    @classmethod
    def from_dict(cls, doc: dict) -> "TransformSpec":
        return cls(
            family=doc["family"],
            a=doc.get("a"),
            b=doc.get("b"),
            c=doc.get("c"),
        )


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise distribution, optionally location-scale shifted.

    ``kind="normal"`` draws ``loc + scale * N(0, 1)``; ``kind="beta"``
    draws ``loc + scale * Beta(alpha, beta)``.
    """

    kind: str = "normal"
    alpha: float = 2.0
    beta: float = 5.0
    loc: float = 0.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("normal", "beta"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.scale < 0:
            raise ValueError("noise scale must be nonnegative")
        if self.kind == "beta" and (self.alpha <= 0 or self.beta <= 0):
            raise ValueError("beta noise requires positive shape parameters")

    def draw(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        if self.kind == "normal":
            base = rng.standard_normal(size)
        else:
            base = rng.beta(self.alpha, self.beta, size=size)
        return self.loc + self.scale * base

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "loc": self.loc, "scale": self.scale}
        if self.kind == "beta":
            doc["alpha"] = self.alpha
            doc["beta"] = self.beta
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "NoiseSpec":
        return cls(
            kind=doc.get("kind", "normal"),
            alpha=doc.get("alpha", 2.0),
            beta=doc.get("beta", 5.0),
            loc=doc.get("loc", 0.0),
            scale=doc.get("scale", 1.0),
        )


def _default_mixture() -> tuple[tuple[TransformSpec, float], ...]:
    return tuple((TransformSpec(fam), 1.0) for fam in TRANSFORM_FAMILIES)


@dataclass(frozen=True)
class DgpConfig:
    """Full description of one synthetic data-generating process.

    Parameters
    ----------
    m:
        Number of feature nodes before hiding.
    n:
        Number of rows to draw.
    p_c:
        Probability of an edge from each earlier node to each later node
        in the sampled topological order.
    p_h:
        Probability that a feature node is hidden from the observed matrix.
    transforms:
        Weighted mixture of transforms; one is drawn per node.  Weights
        need not be normalized.
    noise:
        Additive noise applied at every node.
    seed:
        Seed for all randomness (graph, values, hiding).
    allow_hidden_parents:
        When false (default), direct parents of the outcome are exempt
        from hiding so the ground-truth mask stays fully observable.
    """

    m: int
    n: int
    p_c: float
    p_h: float = 0.0
    transforms: tuple[tuple[TransformSpec, float], ...] = field(
        default_factory=_default_mixture
    )
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    allow_hidden_parents: bool = False

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 <= self.p_c <= 1.0:
            raise ValueError("p_c must lie in [0, 1]")
        if not 0.0 <= self.p_h <= 1.0:
            raise ValueError("p_h must lie in [0, 1]")
        transforms = tuple(
            (spec if isinstance(spec, TransformSpec) else TransformSpec(**spec), float(w))
            for spec, w in self.transforms
        )
        object.__setattr__(self, "transforms", transforms)
        weights = np.array([w for _, w in transforms], dtype=float)
        if (weights < 0).any() or weights.sum() <= 0:
            raise ValueError("transform weights must be nonnegative with positive sum")

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "p_c": self.p_c,
            "p_h": self.p_h,
            "transforms": [[spec.to_dict(), w] for spec, w in self.transforms],
            "noise": self.noise.to_dict(),
            "seed": self.seed,
            "allow_hidden_parents": self.allow_hidden_parents,
        }


@dataclass(frozen=True)
class CausalGraph:
    """Sampled DAG over ``m`` feature nodes plus one outcome node.

    Nodes are integers; features are ``0..m-1`` and the outcome is ``m``.
    Edges always point from earlier to later in ``topological_order``, and
    the outcome occupies the final slot of that order.
    """

    m: int
    topological_order: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    transforms: tuple[TransformSpec, ...]

    def __post_init__(self) -> None:
        if len(self.topological_order) != self.m + 1:
            raise ValueError("topological order must cover every node")
        if self.topological_order[-1] != self.outcome:
            raise ValueError("outcome node must be last in topological order")
        position = {node: i for i, node in enumerate(self.topological_order)}
        for u, v in self.edges:
            if position[u] >= position[v]:
                raise ValueError(f"edge ({u}, {v}) violates the topological order")
        if len(self.transforms) != self.m + 1:
            raise ValueError("every node needs a transform assignment")

    @property
    def outcome(self) -> int:
        return self.m

    def parents_of(self, node: int) -> tuple[int, ...]:
        return tuple(u for u, v in self.edges if v == node)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "topological_order": list(self.topological_order),
            "edges": [list(e) for e in self.edges],
            "transforms": [t.to_dict() for t in self.transforms],
        }


@dataclass(frozen=True)
class SimulatedDataset:
    """Observed matrix plus everything needed to audit it.

    ``features`` holds the visible columns in original node order; hidden
    nodes are absent.  ``source_nodes[i]`` is the graph node id behind
    observed column ``i`` and ``column_names`` are the renumbered labels
    ``X1..X<m_obs>``.  ``parent_mask[i]`` is true iff the source node has
    an edge into the outcome.  ``outcome_noise`` is the exact noise vector
    added at the outcome node.
    """

    features: NDArray[np.float64]
    outcome: NDArray[np.float64]
    outcome_noise: NDArray[np.float64]
    column_names: tuple[str, ...]
    source_nodes: tuple[int, ...]
    parent_mask: NDArray[np.bool_]
    hidden_nodes: tuple[int, ...]
    graph: CausalGraph
    config: DgpConfig


def eval_transform(spec: TransformSpec, parent_values: Sequence[float]) -> float:
    """Evaluate one transform at a single tuple of parent values.

    With no parents the result is the offset ``b``.  Absolute values guard
    the square roots and the geometric mean, so every family is defined on
    all of ``R^k``.
    """

    values = np.asarray(parent_values, dtype=float).reshape(1, -1)
    return float(_apply_transform(spec, values)[0])


def _apply_transform(spec: TransformSpec, parents: NDArray[np.float64]) -> NDArray[np.float64]:
    """Vectorized transform over a (n, k) block of parent values."""

    n, k = parents.shape
    if k == 0:
        return np.full(n, spec.b, dtype=float)
    a, b, c = spec.a, spec.b, spec.c
    if spec.family == "f1":
        return a * parents.sum(axis=1) + b
    if spec.family == "f2":
        return a * np.sqrt(np.abs(parents)).sum(axis=1) + b
    if spec.family == "f3":
        return a * np.sin(c * parents).sum(axis=1) + b
    if spec.family == "f4":
        return a * np.tanh(c * parents).sum(axis=1) + b
    if spec.family == "f5":
        return a * np.abs(parents).prod(axis=1) ** (1.0 / k) + b
    if spec.family == "f6":
        return a * logsumexp(parents, axis=1) + b
    if spec.family == "f7":
        return a * np.sqrt(np.abs(parents.sum(axis=1))) + b
    raise ValueError(f"unknown transform family {spec.family!r}")


def sample_graph(config: DgpConfig, rng: np.random.Generator) -> CausalGraph:
    """Draw the DAG and per-node transforms for one replicate.

    Feature nodes are placed in a uniformly random order, the outcome is
    appended last, and each forward pair receives an edge independently
    with probability ``p_c``.  Acyclicity holds by construction.
    """

    m = config.m
    order = tuple(int(v) for v in rng.permutation(m)) + (m,)
    edges = []
    for i in range(m + 1):
        for j in range(i + 1, m + 1):
            if rng.uniform() < config.p_c:
                edges.append((order[i], order[j]))
    specs = [spec for spec, _ in config.transforms]
    weights = np.array([w for _, w in config.transforms], dtype=float)
    weights = weights / weights.sum()
    assignment = rng.choice(len(specs), size=m + 1, p=weights)
    transforms = tuple(specs[int(i)] for i in assignment)
    return CausalGraph(
        m=m,
        topological_order=order,
        edges=tuple(edges),
        transforms=transforms,
    )


def simulate_dataset(config: DgpConfig) -> SimulatedDataset:
    """Sample a dataset from a freshly drawn graph.

    Identical configs yield bit-identical datasets.  Graph sampling, node
    noise, and hiding use three independent substreams of ``config.seed``,
    so lowering ``p_h`` alone can only shrink the hidden set.

    Raises
    ------
    SimulationError
        If any node produces a non-finite value at the sampled inputs.
    """

    graph_rng, noise_rng, hide_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(3)
    )
    graph = sample_graph(config, graph_rng)
    m, n = config.m, config.n

    values = np.empty((n, m + 1), dtype=float)
    noise_by_node = np.empty((n, m + 1), dtype=float)
    parents_of = {v: graph.parents_of(v) for v in graph.topological_order}
    for node in graph.topological_order:
        noise = config.noise.draw(noise_rng, n)
        noise_by_node[:, node] = noise
        block = values[:, parents_of[node]] if parents_of[node] else np.empty((n, 0))
        signal = _apply_transform(graph.transforms[node], block)
        values[:, node] = signal + noise
        if not np.isfinite(values[:, node]).all():
            row = int(np.flatnonzero(~np.isfinite(values[:, node]))[0])
            label = "Y" if node == graph.outcome else f"X{node + 1}"
            raise SimulationError(
                f"non-finite value at node {label}, row {row}; "
                "the sampled transforms overflow at this scale"
            )

    outcome_parents = set(graph.parents_of(graph.outcome))
    hide_draws = hide_rng.uniform(size=m)
    hidden = hide_draws < config.p_h
    if not config.allow_hidden_parents:
        hidden[list(outcome_parents)] = False
    observed = [v for v in range(m) if not hidden[v]]

    mask = np.array([v in outcome_parents for v in observed], dtype=bool)
    return SimulatedDataset(
        features=values[:, observed],
        outcome=values[:, graph.outcome],
        outcome_noise=noise_by_node[:, graph.outcome],
        column_names=tuple(f"X{i + 1}" for i in range(len(observed))),
        source_nodes=tuple(observed),
        parent_mask=mask,
        hidden_nodes=tuple(int(v) for v in np.flatnonzero(hidden)),
        graph=graph,
        config=config,
    )


def ground_truth_parents(
    graph: CausalGraph, source_nodes: Sequence[int]
) -> NDArray[np.bool_]:
    """Mask over observed columns: true iff the source node feeds the outcome."""

    outcome_parents = set(graph.parents_of(graph.outcome))
    return np.array([v in outcome_parents for v in source_nodes], dtype=bool)


def dataset_to_csv(dataset: SimulatedDataset, path: str) -> None:
    """Write the observed matrix as CSV with columns ``X1..Xm,Y``."""

    header = ",".join(dataset.column_names + ("Y",))
    table = np.column_stack([dataset.features, dataset.outcome])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def ground_truth_document(dataset: SimulatedDataset) -> dict:
    """Sidecar document: true parents, full graph, hiding, and config echo."""

    node_label = {dataset.graph.outcome: "Y"}
    for v in range(dataset.graph.m):
        node_label[v] = f"X{v + 1}"
    return {
        "format_version": 1,
        "columns": list(dataset.column_names),
        "source_nodes": {
            name: node_label[node]
            for name, node in zip(dataset.column_names, dataset.source_nodes)
        },
        "parent_mask": [bool(v) for v in dataset.parent_mask],
        "parents": [
            name for name, keep in zip(dataset.column_names, dataset.parent_mask) if keep
        ],
        "edges": [[node_label[u], node_label[v]] for u, v in dataset.graph.edges],
        "topological_order": [node_label[v] for v in dataset.graph.topological_order],
        "hidden_nodes": [node_label[v] for v in dataset.hidden_nodes],
        "transforms": {
            node_label[v]: dataset.graph.transforms[v].to_dict()
            for v in dataset.graph.topological_order
        },
        "config": dataset.config.to_dict(),
    }


def ground_truth_to_json(dataset: SimulatedDataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ground_truth_document(dataset), fh, indent=2, sort_keys=False)
        fh.write("\n")
