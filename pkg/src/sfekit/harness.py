"""Benchmark runner: executes the run matrix, persists raw results,
aggregates report tables and exports convergence series.

Every run is seeded from (master seed, algorithm, dataset, run index)
through a stable hash, so the whole matrix is reproducible and any single
run can be replayed in isolation. A failing run is recorded and skipped;
it never takes the rest of the matrix down.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import re
import time
from dataclasses import dataclass, field

import numpy as np

from .bpso import pso_search
from .config import ConfigError, DatasetSpec, ExperimentConfig, write_config
from .dataset import Dataset, load_csv, stratified_kfold
from .fitness import FitnessEvaluator
from .hybrid import resolve_engine, sfe_ec_search, sfe_pso_search
from .rng import derive_seed
from .sfe import sfe_search
from .stats import Mark, friedman_mean_ranks, wilcoxon_ranksum
from .trace import SearchTrace

__all__ = [
    "RunResult",
    "CellStats",
    "ExperimentReport",
    "run_experiment",
    "build_report",
    "load_runs",
    "emit_convergence",
    "format_report",
]

_SCHEMA = 1


@dataclass
class RunResult:
    """Outcome of a single (algorithm, dataset, run) cell."""

    algorithm: str
    dataset: str
    run_index: int
    seed: int
    fold_seed: int
    ok: bool
    error: str = None
    accuracy: float = float("nan")
    n_selected: int = 0
    selected_features: list = field(default_factory=list)
    wall_time_s: float = 0.0
    handoff_fes: int = None
    trace_fes: list = field(default_factory=list)
    trace_best: list = field(default_factory=list)
    trace_nsel: list = field(default_factory=list)


@dataclass
class CellStats:
    n_runs: int
    n_failed: int
    worst: float
    best: float
    mean: float
    std: float
    mean_selected: float
    mean_time_s: float


@dataclass
class ExperimentReport:
    algorithms: list
    datasets: list
    reference: str
    cells: dict  # (algorithm, dataset) -> CellStats
    marks: dict  # (algorithm, dataset) -> Mark, absent for the reference
    friedman: dict  # algorithm -> mean rank, empty when not computable
    failures: list  # dicts with algorithm/dataset/run_index/seed/error


def _execute(algorithm: str, ds: Dataset, cfg: ExperimentConfig, seed: int,
             fold_seed: int) -> SearchTrace:
    folds = stratified_kfold(ds, cfg.folds, fold_seed)
    ev = FitnessEvaluator(
        ds, folds, knn_k=cfg.knn_k, budget=cfg.budget, fold_mean=cfg.fold_mean
    )
    if algorithm == "sfe":
        return sfe_search(ds, ev, cfg.sfe, seed)
    if algorithm == "bpso":
        return pso_search(ds, ev, cfg.pso, seed=seed)
    if algorithm == "sfe_pso":
        return sfe_pso_search(ds, ev, cfg.hybrid_params(), seed)
    if algorithm.startswith("sfe_ec:"):
        engine, floor = resolve_engine(algorithm.split(":", 1)[1], cfg.hybrid_params())
        return sfe_ec_search(
            ds, ev, engine, cfg.hybrid_params(), seed, min_continuation_budget=floor
        )
    raise ConfigError(f"unknown algorithm {algorithm!r}")


def _run_cell(args) -> RunResult:
    algorithm, ds, cfg, run_index, seed, fold_seed = args
    t0 = time.perf_counter()
    try:
        trace = _execute(algorithm, ds, cfg, seed, fold_seed)
    except Exception as exc:  # recorded, not fatal to the matrix
        return RunResult(
            algorithm=algorithm,
            dataset=ds.name,
            run_index=run_index,
            seed=seed,
            fold_seed=fold_seed,
            ok=False,
            error=f"{type(exc).__name__}: {exc}",
            wall_time_s=time.perf_counter() - t0,
        )
    wall = time.perf_counter() - t0
    sel = ds.feature_ids[np.flatnonzero(trace.final_mask)]
    return RunResult(
        algorithm=algorithm,
        dataset=ds.name,
        run_index=run_index,
        seed=seed,
        fold_seed=fold_seed,
        ok=True,
        accuracy=float(trace.final_fitness),
        n_selected=int(len(sel)),
        selected_features=[int(j) for j in sel],
        wall_time_s=wall,
        handoff_fes=trace.handoff_fes,
        trace_fes=list(trace.fes),
        trace_best=list(trace.best_fitness),
        trace_nsel=list(trace.n_selected),
    )


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "-", name)


def _run_path(out_dir: str, dataset: str, algorithm: str, run_index: int) -> str:
    return os.path.join(
        out_dir, "runs", _safe(dataset), _safe(algorithm), f"run_{run_index:04d}.jsonl"
    )


def _persist_run(out_dir: str, cfg: ExperimentConfig, res: RunResult) -> None:
    path = _run_path(out_dir, res.dataset, res.algorithm, res.run_index)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    meta = {
        "type": "meta",
        "schema": _SCHEMA,
        "algorithm": res.algorithm,
        "dataset": res.dataset,
        "run_index": res.run_index,
        "seed": res.seed,
        "fold_seed": res.fold_seed,
        "budget": cfg.budget,
        "folds": cfg.folds,
        "knn_k": cfg.knn_k,
        "fold_mean": cfg.fold_mean,
    }
    final = {
        "type": "final",
        "ok": res.ok,
        "error": res.error,
        "accuracy": res.accuracy if res.ok else None,
        "n_selected": res.n_selected,
        "selected_features": res.selected_features,
        "wall_time_s": res.wall_time_s,
        "handoff_fes": res.handoff_fes,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(meta) + "\n")
        if res.ok:
            trace = {
                "type": "trace",
                "fes": res.trace_fes,
                "best": res.trace_best,
                "nsel": res.trace_nsel,
            }
            fh.write(json.dumps(trace) + "\n")
        fh.write(json.dumps(final) + "\n")


def _load_dataset(spec: DatasetSpec) -> Dataset:
    return load_csv(spec.path, label_col=spec.label_col, has_header=spec.has_header,
                    name=spec.name)


def run_experiment(cfg: ExperimentConfig, out_dir: str) -> ExperimentReport:
    """Execute the full run matrix and persist everything under ``out_dir``.

    Per-run seeds are derived from (seed, algorithm, dataset, run index);
    fold seeds additionally from the run seed, or from the dataset alone
    when ``fixed_folds`` is set so every run shares one split. Runs
    execute in a process pool when ``workers`` exceeds one; results are
    aggregated in matrix order either way, so the report does not depend
    on scheduling.
    """
    os.makedirs(out_dir, exist_ok=True)
    write_config(cfg, os.path.join(out_dir, "config.ini"))

    datasets = [_load_dataset(spec) for spec in cfg.datasets]

    tasks = []
    seen_seeds = {}
    for ds in datasets:
        for algorithm in cfg.algorithms:
            for r in range(cfg.runs):
                seed = derive_seed(cfg.seed, algorithm, ds.name, r)
                key = seen_seeds.get(seed)
                if key is not None:
                    raise RuntimeError(f"run seed collision between {key} and "
                                       f"{(algorithm, ds.name, r)}")
                seen_seeds[seed] = (algorithm, ds.name, r)
                if cfg.fixed_folds:
                    fold_seed = derive_seed(cfg.seed, ds.name, "folds")
                else:
                    fold_seed = derive_seed(seed, "folds")
                tasks.append((algorithm, ds, cfg, r, seed, fold_seed))

    if cfg.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]

    for res in results:
        _persist_run(out_dir, cfg, res)

    report = build_report(cfg, results)
    _write_report(out_dir, report)
    return report


def build_report(cfg: ExperimentConfig, results) -> ExperimentReport:
    """Aggregate per-run results into the report tables.

    Accuracy statistics use the sample standard deviation (ddof=1, zero
    for a single run). Pairwise rank-sum marks compare each algorithm
    against the reference per dataset; Friedman mean ranks summarise mean
    accuracies across datasets and need every (algorithm, dataset) cell to
    hold at least one successful run.
    """
    reference = cfg.pick_reference()
    names = [spec.name for spec in cfg.datasets]
    by_cell = {}
    failures = []
    for res in results:
        by_cell.setdefault((res.algorithm, res.dataset), []).append(res)
        if not res.ok:
            failures.append({
                "algorithm": res.algorithm,
                "dataset": res.dataset,
                "run_index": res.run_index,
                "seed": res.seed,
                "error": res.error,
            })

    cells = {}
    accs = {}
    for (algorithm, dataset), group in by_cell.items():
        ok = [g for g in group if g.ok]
        values = np.array([g.accuracy for g in ok], dtype=np.float64)
        accs[(algorithm, dataset)] = values
        if values.size:
            std = float(values.std(ddof=1)) if values.size > 1 else 0.0
            stats = CellStats(
                n_runs=len(ok),
                n_failed=len(group) - len(ok),
                worst=float(values.min()),
                best=float(values.max()),
                mean=float(values.mean()),
                std=std,
                mean_selected=float(np.mean([g.n_selected for g in ok])),
                mean_time_s=float(np.mean([g.wall_time_s for g in ok])),
            )
        else:
            nan = float("nan")
            stats = CellStats(len(ok), len(group), nan, nan, nan, nan, nan, nan)
        cells[(algorithm, dataset)] = stats

    marks = {}
    for dataset in names:
        ref_vals = accs.get((reference, dataset), np.empty(0))
        for algorithm in cfg.algorithms:
            if algorithm == reference:
                continue
            vals = accs.get((algorithm, dataset), np.empty(0))
            if ref_vals.size >= 2 and vals.size >= 2:
                _, mark = wilcoxon_ranksum(ref_vals, vals)
                marks[(algorithm, dataset)] = mark

    friedman = {}
    if len(cfg.algorithms) >= 2:
        table = np.array(
            [[cells[(a, d)].mean if (a, d) in cells else float("nan")
              for a in cfg.algorithms] for d in names]
        )
        if np.all(np.isfinite(table)):
            ranks = friedman_mean_ranks(table, higher_better=True)
            friedman = {a: float(r) for a, r in zip(cfg.algorithms, ranks)}

    return ExperimentReport(
        algorithms=list(cfg.algorithms),
        datasets=names,
        reference=reference,
        cells=cells,
        marks=marks,
        friedman=friedman,
        failures=failures,
    )


def _report_to_json(report: ExperimentReport) -> dict:
    cells = {}
    for (algorithm, dataset), st in report.cells.items():
        entry = {
            "n_runs": st.n_runs,
            "n_failed": st.n_failed,
            "worst": st.worst,
            "best": st.best,
            "mean": st.mean,
            "std": st.std,
            "mean_selected": st.mean_selected,
            "mean_time_s": st.mean_time_s,
        }
        mark = report.marks.get((algorithm, dataset))
        if mark is not None:
            entry["vs_reference"] = mark.value
        cells.setdefault(algorithm, {})[dataset] = entry
    return {
        "schema": _SCHEMA,
        "algorithms": report.algorithms,
        "datasets": report.datasets,
        "reference": report.reference,
        "cells": cells,
        "friedman_mean_ranks": report.friedman,
        "failures": report.failures,
    }


def format_report(report: ExperimentReport) -> str:
    """Fixed-width text rendering of the report tables."""
    rows = [("dataset", "algorithm", "runs", "worst", "best", "mean", "std",
             "feats", "time_s", f"vs {report.reference}")]
    for dataset in report.datasets:
        for algorithm in report.algorithms:
            st = report.cells.get((algorithm, dataset))
            if st is None:
                continue
            mark = report.marks.get((algorithm, dataset))
            tag = "ref" if algorithm == report.reference else (mark.value if mark else "")
            fail = f" ({st.n_failed} failed)" if st.n_failed else ""
            rows.append((
                dataset, algorithm, f"{st.n_runs}{fail}",
                f"{st.worst:.2f}", f"{st.best:.2f}", f"{st.mean:.2f}",
                f"{st.std:.2f}", f"{st.mean_selected:.1f}",
                f"{st.mean_time_s:.2f}", tag,
            ))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    if report.friedman:
        lines.append("")
        lines.append("Friedman mean ranks (1 = best):")
        for algorithm in report.algorithms:
            lines.append(f"  {algorithm}: {report.friedman[algorithm]:.4f}")
    if report.failures:
        lines.append("")
        lines.append(f"{len(report.failures)} failed run(s):")
        for f in report.failures:
            lines.append(
                f"  {f['algorithm']} on {f['dataset']} run {f['run_index']} "
                f"(seed {f['seed']}): {f['error']}"
            )
    return "\n".join(lines) + "\n"


def _write_report(out_dir: str, report: ExperimentReport) -> None:
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(_report_to_json(report), fh, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write(format_report(report))


def load_runs(out_dir: str):
    """Read every persisted run record back from an experiment directory."""
    root = os.path.join(out_dir, "runs")
    if not os.path.isdir(root):
        raise FileNotFoundError(f"no runs directory under {out_dir}")
    results = []
    for dirpath, _, files in os.walk(root):
        for fname in sorted(files):
            if not fname.endswith(".jsonl"):
                continue
            path = os.path.join(dirpath, fname)
            meta = trace = final = None
            with open(path) as fh:
                for line in fh:
                    rec = json.loads(line)
                    kind = rec.get("type")
                    if kind == "meta":
                        meta = rec
                    elif kind == "trace":
                        trace = rec
                    elif kind == "final":
                        final = rec
            if meta is None or final is None:
                raise ValueError(f"{path}: incomplete run record")
            results.append(RunResult(
                algorithm=meta["algorithm"],
                dataset=meta["dataset"],
                run_index=meta["run_index"],
                seed=meta["seed"],
                fold_seed=meta["fold_seed"],
                ok=final["ok"],
                error=final["error"],
                accuracy=final["accuracy"] if final["accuracy"] is not None
                         else float("nan"),
                n_selected=final["n_selected"],
                selected_features=final["selected_features"],
                wall_time_s=final["wall_time_s"],
                handoff_fes=final["handoff_fes"],
                trace_fes=trace["fes"] if trace else [],
                trace_best=trace["best"] if trace else [],
                trace_nsel=trace["nsel"] if trace else [],
            ))
    results.sort(key=lambda r: (r.dataset, r.algorithm, r.run_index))
    return results


def _step_fill(row: np.ndarray) -> np.ndarray:
    """Carry recorded values across NaN gaps as a step function.

    Best-so-far series are constant between evaluations, so holding the
    previous value is exact; a leading gap holds the first value.
    """
    pos = np.flatnonzero(~np.isnan(row))
    if pos.size == 0:
        return row
    j = np.searchsorted(pos, np.arange(row.size), side="right") - 1
    return row[pos[np.clip(j, 0, None)]]


def emit_convergence(out_dir: str, dest_dir: str) -> list:
    """Write per-(dataset, algorithm) mean convergence curves as CSV.

    Each file has one row per evaluation index: the mean best-so-far
    accuracy and the mean selected-feature count across runs. Runs that
    stopped early (an unfilled tail of the budget) are carried forward at
    their last recorded value, which is exact for best-so-far series.
    Returns the list of files written.
    """
    results = [r for r in load_runs(out_dir) if r.ok and r.trace_fes]
    groups = {}
    for res in results:
        groups.setdefault((res.dataset, res.algorithm), []).append(res)
    os.makedirs(dest_dir, exist_ok=True)
    written = []
    for (dataset, algorithm), group in sorted(groups.items()):
        horizon = max(r.trace_fes[-1] for r in group)
        best = np.full((len(group), horizon), np.nan)
        nsel = np.full((len(group), horizon), np.nan)
        for i, r in enumerate(group):
            idx = np.asarray(r.trace_fes, dtype=np.int64) - 1
            best[i, idx] = r.trace_best
            nsel[i, idx] = r.trace_nsel
            best[i] = _step_fill(best[i])
            nsel[i] = _step_fill(nsel[i])
        path = os.path.join(dest_dir, f"{_safe(dataset)}__{_safe(algorithm)}.csv")
        with open(path, "w") as fh:
            fh.write("fes,mean_best_accuracy,mean_selected\n")
            for t in range(horizon):
                fh.write(f"{t + 1},{best[:, t].mean():.10g},{nsel[:, t].mean():.10g}\n")
        written.append(path)
    return written
