"""Command-line front end: simulate, select, benchmark, oracle-check.

Exit codes: 0 success, 3 data ingestion failure, 4 estimation failure,
5 benchmark finished with at least one fully failed grid cell, 1 oracle
self-check mismatch.  Argument errors use argparse's usual code 2.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import math
import os
import sys
import time

import numpy as np
import pandas as pd

from . import __version__
from .dgp import (
    DgpConfig,
    NoiseSpec,
    TransformSpec,
    dataset_to_csv,
    ground_truth_to_json,
    simulate_dataset,
)
from .nuisance import FeatureMap, LearnerSpec
from .oracle import (
    chi_from_moments,
    counterexample_fixtures,
    exact_acde,
    exact_chi_all,
    random_scm,
)
from .selection import run_drcfs

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_INGESTION = 3
EXIT_ESTIMATION = 4
EXIT_BENCHMARK = 5

_BENCH_COLUMNS = (
    "config_hash",
    "seed",
    "m",
    "n",
    "p_c",
    "p_h",
    "learner",
    "acc",
    "f1",
    "csi",
    "wall_ms",
)


class IngestionError(ValueError):
    """Input table cannot be turned into a numeric matrix."""


def ingest_csv(
    path: str,
    outcome: str = "Y",
    header: bool = True,
    on_missing: str = "error",
) -> tuple[np.ndarray, np.ndarray, tuple[str, ...], int]:
    """Load a CSV into (features, outcome, names, dropped-row count).

    Without a header the columns are named ``X1..Xm`` and the outcome is
    the final column.  Non-numeric or missing cells either abort with the
    offending row numbers or drop those rows, per ``on_missing``.
    """

    if on_missing not in ("error", "drop"):
        raise ValueError("on_missing must be 'error' or 'drop'")
    try:
        frame = pd.read_csv(path, header=0 if header else None, dtype=str, skip_blank_lines=True)
    except FileNotFoundError as exc:
        raise IngestionError(f"no such file: {path}") from exc
    except pd.errors.ParserError as exc:
        raise IngestionError(f"malformed CSV {path}: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise IngestionError(f"empty CSV {path}") from exc
    if not header:
        frame.columns = [f"X{i + 1}" for i in range(frame.shape[1] - 1)] + [outcome]
    if outcome not in frame.columns:
        raise IngestionError(
            f"outcome column {outcome!r} not found; available columns: "
            f"{list(frame.columns)}"
        )
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad_rows = numeric.isna().any(axis=1)
    dropped = int(bad_rows.sum())
    if dropped and on_missing == "error":
        shown = [int(i) for i in np.flatnonzero(bad_rows.to_numpy())[:5]]
        raise IngestionError(
            f"{dropped} rows contain missing or non-numeric cells "
            f"(first offending rows: {shown}); pass --on-missing drop to skip them"
        )
    numeric = numeric.loc[~bad_rows]
    if numeric.empty:
        raise IngestionError("no usable rows after removing missing values")
    y = numeric[outcome].to_numpy(dtype=float)
    x_frame = numeric.drop(columns=[outcome])
    if x_frame.shape[1] == 0:
        raise IngestionError("the table has no feature columns besides the outcome")
    return (
        x_frame.to_numpy(dtype=float),
        y,
        tuple(str(c) for c in x_frame.columns),
        dropped,
    )


def parse_transforms(value) -> tuple[tuple[TransformSpec, float], ...]:
    """Accept ``"f1:0.5,f6:0.5"`` strings or structured config lists."""

    if isinstance(value, str):
        parts = []
        for chunk in value.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            if ":" in chunk:
                family, weight = chunk.split(":", 1)
                parts.append((TransformSpec(family.strip()), float(weight)))
            else:
                parts.append((TransformSpec(chunk), 1.0))
        if not parts:
            raise ValueError("empty transform mixture")
        return tuple(parts)
    mixture = []
    for entry in value:
        spec_doc, weight = entry
        if isinstance(spec_doc, str):
            spec = TransformSpec(spec_doc)
        else:
            spec = TransformSpec.from_dict(spec_doc)
        mixture.append((spec, float(weight)))
    return tuple(mixture)


def parse_noise(value) -> NoiseSpec:
    """Accept ``normal``, ``normal:loc,scale``, ``beta:a,b[,loc,scale]``, or dicts."""

    if isinstance(value, dict):
        return NoiseSpec.from_dict(value)
    if value == "normal":
        return NoiseSpec()
    kind, _, rest = value.partition(":")
    params = [float(v) for v in rest.split(",")] if rest else []
    if kind == "normal":
        loc = params[0] if params else 0.0
        scale = params[1] if len(params) > 1 else 1.0
        return NoiseSpec(kind="normal", loc=loc, scale=scale)
    if kind == "beta":
        if len(params) < 2:
            raise ValueError("beta noise needs 'beta:alpha,beta[,loc,scale]'")
        loc = params[2] if len(params) > 2 else 0.0
        scale = params[3] if len(params) > 3 else 1.0
        return NoiseSpec(kind="beta", alpha=params[0], beta=params[1], loc=loc, scale=scale)
    raise ValueError(f"unknown noise spec {value!r}")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a JSON object")
    return doc


def _pick(args_value, config: dict, key: str, default):
    """Explicit flag > config file entry > default."""

    if args_value is not None:
        return args_value
    if key in config:
        return config[key]
    return default


def _learner_spec(kind: str, config: dict) -> LearnerSpec:
    options = dict(config.get("learner_options", {}))
    options["kind"] = kind
    return LearnerSpec(**options)


def _dgp_config(args, config: dict) -> DgpConfig:
    m = _pick(getattr(args, "m", None), config, "m", None)
    n = _pick(getattr(args, "n", None), config, "n", None)
    p_c = _pick(getattr(args, "p_c", None), config, "p_c", None)
    if m is None or n is None or p_c is None:
        raise ValueError("simulate needs m, n, and p_c (flags or config file)")
    transforms = _pick(getattr(args, "transforms", None), config, "transforms", None)
    noise = _pick(getattr(args, "noise", None), config, "noise", "normal")
    allow_hidden = bool(
        getattr(args, "allow_hidden_parents", False)
        or config.get("allow_hidden_parents", False)
    )
    kwargs = {}
    if transforms is not None:
        kwargs["transforms"] = parse_transforms(transforms)
    return DgpConfig(
        m=int(m),
        n=int(n),
        p_c=float(p_c),
        p_h=float(_pick(getattr(args, "p_h", None), config, "p_h", 0.0)),
        noise=parse_noise(noise),
        seed=int(_pick(getattr(args, "seed", None), config, "seed", 0)),
        allow_hidden_parents=allow_hidden,
        **kwargs,
    )


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    try:
        dgp = _dgp_config(args, config)
        dataset = simulate_dataset(dgp)
    except ValueError as exc:
        print(f"simulate failed: {exc}", file=sys.stderr)
        return EXIT_INGESTION
    dataset_to_csv(dataset, args.out)
    truth_path = args.truth_out or args.out + ".truth.json"
    ground_truth_to_json(dataset, truth_path)
    print(
        f"wrote {dataset.features.shape[0]} rows x {dataset.features.shape[1]} observed "
        f"columns to {args.out}; ground truth in {truth_path}",
        file=sys.stderr,
    )
    return EXIT_OK


def _truth_mask_for(names: tuple[str, ...], truth_path: str) -> np.ndarray:
    with open(truth_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    columns = list(doc["columns"])
    if list(names) != columns:
        raise IngestionError(
            f"truth file columns {columns} do not match data columns {list(names)}"
        )
    return np.asarray(doc["parent_mask"], dtype=bool)


def cmd_select(args) -> int:
    config = _load_config(args.config)
    try:
        features, outcome, names, dropped = ingest_csv(
            args.data,
            outcome=_pick(args.outcome, config, "outcome", "Y"),
            header=not args.no_header,
            on_missing=_pick(args.on_missing, config, "on_missing", "error"),
        )
        truth_mask = None
        if args.truth:
            truth_mask = _truth_mask_for(names, args.truth)
    except IngestionError as exc:
        print(f"ingestion failed: {exc}", file=sys.stderr)
        return EXIT_INGESTION
    if dropped:
        print(f"dropped {dropped} rows with missing values", file=sys.stderr)

    kind = _pick(args.learner, config, "learner", "linear")
    try:
        report = run_drcfs(
            features,
            outcome,
            k=int(_pick(args.k, config, "k", 5)),
            q=float(_pick(args.q, config, "q", 0.05)),
            learner=_learner_spec(kind, config),
            feature_map=FeatureMap.parse(_pick(args.map, config, "map", "identity")),
            convention=_pick(args.convention, config, "convention", "eq3"),
            seed=int(_pick(args.seed, config, "seed", 0)),
            threads=args.threads,
            column_names=names,
            truth_mask=truth_mask,
        )
    except Exception as exc:  # estimation failures get their own exit code
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION

    doc = report.to_dict()
    doc["tool_version"] = __version__
    payload = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)

    print(f"{'column':<10} {'chi_hat':>12} {'p':>10} {'p_adj':>10} selected", file=sys.stderr)
    for row in report.results:
        print(
            f"{row.name:<10} {row.chi_hat:>12.5g} {row.p_value:>10.3g} "
            f"{row.p_adjusted:>10.3g} {'yes' if row.selected else 'no'}",
            file=sys.stderr,
        )
    return EXIT_OK


def _cell_hash(cell: dict) -> str:
    canonical = json.dumps(cell, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def _benchmark_cells(config: dict) -> list[dict]:
    grid = config.get("grid")
    if not grid:
        raise ValueError("benchmark config needs a 'grid' object")
    axes = {
        "m": grid.get("m", [10]),
        "n": grid.get("n", [1000]),
        "p_c": grid.get("p_c", [0.3]),
        "p_h": grid.get("p_h", [0.0]),
        "transforms": grid.get("transforms", [None]),
        "noise": grid.get("noise", ["normal"]),
    }
    cells = []
    for values in itertools.product(*(axes[k] for k in axes)):
        cells.append(dict(zip(axes, values)))
    return cells


def cmd_benchmark(args) -> int:
    config = _load_config(args.config)
    try:
        cells = _benchmark_cells(config)
    except ValueError as exc:
        print(f"benchmark config invalid: {exc}", file=sys.stderr)
        return EXIT_INGESTION

    replicates = int(config.get("replicates", 5))
    base_seed = int(config.get("seed", 0))
    k = int(config.get("k", 5))
    q = float(config.get("q", 0.05))
    kind = config.get("learner", "linear")
    feature_map = FeatureMap.parse(config.get("map", "identity"))
    convention = config.get("convention", "eq3")
    spec = _learner_spec(kind, config)
    allow_hidden = bool(config.get("allow_hidden_parents", False))

    os.makedirs(args.out_dir, exist_ok=True)
    rows: list[dict] = []
    summaries: list[dict] = []
    any_cell_dead = False
    for cell in cells:
        cell_doc = dict(cell)
        cell_doc.update(
            {"k": k, "q": q, "learner": kind, "map": feature_map.label,
             "convention": convention, "replicates": replicates}
        )
        chash = _cell_hash(cell_doc)
        per_rep: list[dict] = []
        errors: list[str] = []
        freq: dict[str, float] = {}
        for rep in range(replicates):
            rep_seed = base_seed ^ rep
            row = {
                "config_hash": chash,
                "seed": rep_seed,
                "m": cell["m"],
                "n": cell["n"],
                "p_c": cell["p_c"],
                "p_h": cell["p_h"],
                "learner": kind,
                "acc": "",
                "f1": "",
                "csi": "",
                "wall_ms": "",
            }
            try:
                kwargs = {}
                if cell["transforms"] is not None:
                    kwargs["transforms"] = parse_transforms(cell["transforms"])
                dgp = DgpConfig(
                    m=int(cell["m"]),
                    n=int(cell["n"]),
                    p_c=float(cell["p_c"]),
                    p_h=float(cell["p_h"]),
                    noise=parse_noise(cell["noise"]),
                    seed=rep_seed,
                    allow_hidden_parents=allow_hidden,
                    **kwargs,
                )
                started = time.perf_counter()
                dataset = simulate_dataset(dgp)
                report = run_drcfs(
                    dataset.features,
                    dataset.outcome,
                    k=k,
                    q=q,
                    learner=spec,
                    feature_map=feature_map,
                    convention=convention,
                    seed=rep_seed,
                    threads=args.threads,
                    column_names=dataset.column_names,
                    truth_mask=dataset.parent_mask,
                )
                wall = (time.perf_counter() - started) * 1e3
                scores = {key: report.metrics[key] for key in ("acc", "f1", "csi")}
                row.update(
                    {
                        "acc": repr(scores["acc"]),
                        "f1": repr(scores["f1"]),
                        "csi": repr(scores["csi"]),
                        "wall_ms": repr(round(wall, 3)),
                    }
                )
                per_rep.append(scores)
                for name, hit in zip(report.column_names, report.selected_mask):
                    freq[name] = freq.get(name, 0.0) + (1.0 if hit else 0.0)
            except Exception as exc:
                errors.append(f"replicate {rep}: {exc}")
            rows.append(row)

        n_ok = len(per_rep)
        if n_ok == 0:
            any_cell_dead = True
        summary_row = {
            "config_hash": chash,
            "seed": "summary",
            "m": cell["m"],
            "n": cell["n"],
            "p_c": cell["p_c"],
            "p_h": cell["p_h"],
            "learner": kind,
            "acc": "",
            "f1": "",
            "csi": "",
            "wall_ms": "",
        }
        cell_summary = {
            "config": cell_doc,
            "config_hash": chash,
            "replicates_completed": n_ok,
            "errors": errors,
        }
        if n_ok:
            for key in ("acc", "f1", "csi"):
                vals = np.array([r[key] for r in per_rep])
                mean = float(vals.mean())
                se = float(vals.std(ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else 0.0
                summary_row[key] = repr(mean)
                cell_summary[f"{key}_mean"] = mean
                cell_summary[f"{key}_se"] = se
            cell_summary["selection_frequency"] = {
                name: count / n_ok for name, count in sorted(freq.items())
            }
        rows.append(summary_row)
        summaries.append(cell_summary)

    csv_path = os.path.join(args.out_dir, "metrics.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(_BENCH_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(str(row[c]) for c in _BENCH_COLUMNS) + "\n")
    summary_path = os.path.join(args.out_dir, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(
            {"format_version": 1, "tool_version": __version__, "cells": summaries},
            fh,
            indent=2,
        )
        fh.write("\n")
    print(f"wrote {csv_path} and {summary_path}", file=sys.stderr)
    return EXIT_BENCHMARK if any_cell_dead else EXIT_OK


def cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0
    for index in range(args.scms):
        scm = random_scm(rng)
        chis = exact_chi_all(scm)
        for j in range(scm.n_features):
            gap = abs(chi_from_moments(scm, j) - chis[j])
            if gap > 1e-12:
                print(f"scm {index}: moment identity off by {gap:.3g} at feature {j}")
                failures += 1
            is_parent = j in scm.outcome_parents
            if is_parent != (chis[j] > 1e-10):
                print(f"scm {index}: chi/parent mismatch at feature {j} (chi={chis[j]:.3g})")
                failures += 1
        # spot-check the interventional/observational agreement baked into exact_acde
        j = int(rng.integers(scm.n_features))
        context = {
            c: scm.supports[c][int(rng.integers(len(scm.supports[c])))]
            for c in range(scm.n_features)
            if c != j
        }
        exact_acde(scm, j, (scm.supports[j][0], scm.supports[j][-1]), context)
    print(f"checked {args.scms} random discrete models: {failures} failures")

    for fixture in counterexample_fixtures(n=args.fixture_n, seed=args.seed):
        for tag, x, y in (("a", fixture.x_a, fixture.y_a), ("b", fixture.x_b, fixture.y_b)):
            sample = np.cov(np.stack([x, y]), bias=True)
            drift = np.abs(sample - fixture.covariance).max()
            bound = 6.0 / math.sqrt(len(x))
            if drift > bound:
                print(f"fixture {fixture.name}/{tag}: covariance drift {drift:.3g} > {bound:.3g}")
                failures += 1
        if fixture.parents_a == fixture.parents_b:
            print(f"fixture {fixture.name}: parent sets should differ")
            failures += 1
    print("fixture covariances reproduce their targets" if failures == 0 else f"{failures} failures")
    return EXIT_OK if failures == 0 else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drcfs",
        description="Doubly robust causal feature selection toolkit",
    )
    parser.add_argument("--version", action="version", version=f"drcfs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="sample a synthetic dataset and its ground truth")
    sim.add_argument("--config", help="JSON config file; flags override it")
    sim.add_argument("--m", type=int, help="number of feature nodes")
    sim.add_argument("--n", type=int, help="number of rows")
    sim.add_argument("--p-c", dest="p_c", type=float, help="edge probability")
    sim.add_argument("--p-h", dest="p_h", type=float, help="hiding probability")
    sim.add_argument("--transforms", help="mixture such as 'f1:0.5,f6:0.5'")
    sim.add_argument("--noise", help="'normal', 'normal:loc,scale', or 'beta:a,b[,loc,scale]'")
    sim.add_argument("--seed", type=int, help="simulation seed")
    sim.add_argument(
        "--allow-hidden-parents",
        action="store_true",
        help="let direct parents of the outcome be hidden too",
    )
    sim.add_argument("--out", required=True, help="dataset CSV path")
    sim.add_argument("--truth-out", help="ground-truth JSON path (default: <out>.truth.json)")
    sim.set_defaults(handler=cmd_simulate)

    sel = sub.add_parser("select", help="run feature selection on a CSV")
    sel.add_argument("--config", help="JSON config file; flags override it")
    sel.add_argument("--data", required=True, help="input CSV")
    sel.add_argument("--outcome", help="outcome column name (default Y)")
    sel.add_argument("--no-header", action="store_true", help="CSV has no header row")
    sel.add_argument("--on-missing", choices=["error", "drop"], help="missing-cell policy")
    sel.add_argument("--k", type=int, help="number of folds")
    sel.add_argument("--q", type=float, help="false-discovery level")
    sel.add_argument("--learner", choices=["linear", "forest"], help="nuisance learner")
    sel.add_argument("--map", help="feature map: identity or poly:<degree>")
    sel.add_argument("--convention", choices=["eq3", "paper"], help="score convention")
    sel.add_argument("--seed", type=int, help="fold/fit seed")
    sel.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("DRCFS_THREADS", "0")) or None,
        help="per-feature threads (default: DRCFS_THREADS or 1)",
    )
    sel.add_argument("--truth", help="ground-truth JSON to score the selection against")
    sel.add_argument("--out", help="write the report JSON here instead of stdout")
    sel.set_defaults(handler=cmd_select)

    ben = sub.add_parser("benchmark", help="sweep a config grid and score every cell")
    ben.add_argument("--config", required=True, help="JSON sweep config")
    ben.add_argument("--out-dir", required=True, help="directory for metrics.csv and summary.json")
    ben.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("DRCFS_THREADS", "0")) or None,
        help="per-feature threads (default: DRCFS_THREADS or 1)",
    )
    ben.set_defaults(handler=cmd_benchmark)

    chk = sub.add_parser("oracle-check", help="verify the exact oracles against themselves")
    chk.add_argument("--scms", type=int, default=100, help="number of random discrete models")
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--fixture-n", dest="fixture_n", type=int, default=100_000)
    chk.set_defaults(handler=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    raise SystemExit(main())
