"""Seeded multi-run experiment orchestration and persistence.

Each repeat draws one data set shared by every method (same rows, same
order), with seed ``base_seed + r``. Results are persisted as one
structured-text file per run plus an aggregate CSV table, per-curve
CSV files, weight histograms and an SVG learning-curve chart. All
persisted artifacts are byte-reproducible from the configuration.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import baselines
from .data import (MixtureShiftSpec, CsvSchema, LabeledSample, TrainingSet,
                   gen_mixture_shift, gen_uniform_shift_1d, load_csv)
from .nn import ArchSpec, FitConfig, fit_regression, forward
from .results import RunResult, format_real, write_run_file
from .svgplot import Line, write_chart
from .training import (WannConfig, build_wann_model, fit_wann,
                       pretrain_weighter)


class Metrics(NamedTuple):
    mse: float
    mae: float


def compute_metrics(predictions: np.ndarray, labels: np.ndarray) -> Metrics:
    """Mean squared and mean absolute error."""
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must have the same shape")
    if len(predictions) == 0:
        raise ValueError("empty prediction vector")
    err = predictions - labels
    return Metrics(float(np.mean(err * err)), float(np.mean(np.abs(err))))


@dataclass
class UniformShiftScenario:
    """1-D shifted-uniform identity task."""

    m: int = 200
    n: int = 50
    grid_points: int = 201


@dataclass
class CsvScenario:
    """User data: a combined train CSV plus an optional test CSV."""

    train_path: str
    schema: CsvSchema = field(default_factory=lambda: CsvSchema(domain_col="domain"))
    test_path: str | None = None


@dataclass
class MethodSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    scenario: MixtureShiftSpec | UniformShiftScenario | CsvScenario
    methods: list[MethodSpec]
    n_repeats: int = 1
    base_seed: int = 0
    out_dir: str | None = None
    n_workers: int = 1

    def __post_init__(self):
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be >= 1")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ValueError("method names must be unique")


def materialize_scenario(scenario, seed: int
                         ) -> tuple[TrainingSet, LabeledSample | None]:
    """Draw one repeat's data (train set plus evaluation sample)."""
    if isinstance(scenario, MixtureShiftSpec):
        data = gen_mixture_shift(replace(scenario, seed=seed))
        return data.train, data.validation
    if isinstance(scenario, UniformShiftScenario):
        train, grid = gen_uniform_shift_1d(scenario.m, scenario.n, seed,
                                           scenario.grid_points)
        return train, grid
    if isinstance(scenario, CsvScenario):
        train = load_csv(scenario.train_path, scenario.schema)
        if not isinstance(train, TrainingSet):
            raise ValueError("training CSV needs a domain column")
        test = None
        if scenario.test_path is not None:
            schema = replace(scenario.schema, domain_col=None, domain="target")
            test = load_csv(scenario.test_path, schema)
        return train, test
    raise TypeError(f"unknown scenario type {type(scenario).__name__}")


def _arch(params: dict) -> ArchSpec:
    return ArchSpec(hidden=tuple(params.get("hidden", (100, 100))),
                    clip=params.get("clip", 1.0),
                    dropout=params.get("dropout", 0.0))


def _fit_config(params: dict, seed: int) -> FitConfig:
    return FitConfig(epochs=params.get("epochs", 300),
                     batch_size=params.get("batch_size", 128),
                     lr=params.get("lr", 0.001), seed=seed)


def _validation_pair(validation):
    if validation is None:
        return None
    return validation.X, validation.y


def _trace_result(method, seed, net, trace, validation) -> RunResult:
    result = RunResult(method=method, seed=seed, curve=list(trace.val_mse))
    if validation is not None:
        metrics = compute_metrics(forward(net, validation.X), validation.y)
        result.final_mse, result.final_mae = metrics
    return result


def _run_wann(train, validation, seed, params) -> RunResult:
    config = WannConfig(
        epochs=params.get("epochs", 300),
        batch_size=params.get("batch_size", 128),
        pretrain_epochs=params.get("pretrain_epochs", 50),
        lr=params.get("lr", 0.001),
        seed=seed,
        stratify_batches=params.get("stratify_batches", False),
    )
    arch = _arch(params)
    model = build_wann_model(train.X.shape[1], arch.hidden, clip=arch.clip,
                             clip_weighter=params.get("clip_weighter"),
                             dropout=arch.dropout, config=config)
    pretrain_weighter(model, train, config)
    return fit_wann(model, train, config, validation)


def _run_uniform(train, validation, seed, params) -> RunResult:
    net, trace = baselines.uniform_fit(train, _arch(params),
                                       _fit_config(params, seed),
                                       _validation_pair(validation))
    return _trace_result("uniform", seed, net, trace, validation)


def _run_target_only(train, validation, seed, params) -> RunResult:
    net, trace = baselines.target_only_fit(train, _arch(params),
                                           _fit_config(params, seed),
                                           _validation_pair(validation))
    return _trace_result("target_only", seed, net, trace, validation)


def _density_weight_result(method, weights, train, validation, seed, params
                           ) -> RunResult:
    """Fit a network with density-ratio source weights, uniform target."""
    k = len(train)
    per_row = np.full(k, 1.0 / k)
    per_row[~train.is_target] = weights / k
    net = _arch(params).build(train.X.shape[1],
                              rng=np.random.default_rng(seed))
    trace = fit_regression(net, train.X, train.y, per_row,
                           _fit_config(params, seed),
                           _validation_pair(validation))
    result = _trace_result(method, seed, net, trace, validation)
    result.weights = weights
    return result


def _run_kmm(train, validation, seed, params) -> RunResult:
    config = baselines.KmmConfig(
        kernel_bandwidth=params.get("kernel_bandwidth"),
        B=params.get("B", 1000.0), eps=params.get("eps"))
    weights = baselines.kmm_weights(train.source_rows().X,
                                    train.target_rows().X, config)
    return _density_weight_result("kmm", weights, train, validation, seed,
                                  params)


def _run_kliep(train, validation, seed, params) -> RunResult:
    config = baselines.KliepConfig(
        n_centers=params.get("n_centers", 100),
        kernel_bandwidth=params.get("kernel_bandwidth"), seed=seed)
    weights = baselines.kliep_weights(train.source_rows().X,
                                      train.target_rows().X, config)
    return _density_weight_result("kliep", weights, train, validation, seed,
                                  params)


def _run_tradaboost(train, validation, seed, params) -> RunResult:
    config = baselines.TradaboostConfig(
        n_iterations=params.get("n_iterations", 10),
        arch=_arch(params),
        fit=_fit_config(params, seed))
    ensemble = baselines.tradaboost_r2_fit(train, config)
    result = RunResult(method="tradaboost", seed=seed)
    if validation is not None:
        metrics = compute_metrics(ensemble.predict(validation.X), validation.y)
        result.final_mse, result.final_mae = metrics
    result.weights = ensemble.final_weights
    return result


RUNNERS = {
    "wann": _run_wann,
    "uniform": _run_uniform,
    "target_only": _run_target_only,
    "kmm": _run_kmm,
    "kliep": _run_kliep,
    "tradaboost": _run_tradaboost,
}


def run_method(spec: MethodSpec, train: TrainingSet,
               validation: LabeledSample | None, seed: int) -> RunResult:
    """Run one method, capturing failures as an error-tagged result."""
    runner_name = spec.params.get("kind", spec.name)
    if runner_name not in RUNNERS:
        raise ValueError(f"unknown method {runner_name!r}; "
                         f"choices: {sorted(RUNNERS)}")
    start = time.perf_counter()
    try:
        result = RUNNERS[runner_name](train, validation, seed, spec.params)
    except Exception as exc:
        result = RunResult(method=spec.name, seed=seed,
                           error=f"{type(exc).__name__}: {exc}")
    result.method = spec.name
    result.seed = seed
    result.wall_seconds = time.perf_counter() - start
    return result


def _run_repeat(scenario, methods: list[MethodSpec], seed: int
                ) -> list[RunResult]:
    train, validation = materialize_scenario(scenario, seed)
    return [run_method(spec, train, validation, seed) for spec in methods]


@dataclass
class TableRow:
    method: str
    n_runs: int
    mean_mse: float | None
    std_mse: float | None
    mean_mae: float | None
    std_mae: float | None
    rank: int


@dataclass
class ComparisonTable:
    rows: list[TableRow]


def build_comparison_table(results: list[RunResult]) -> ComparisonTable:
    """Per-method mean/std of the final metrics, ranked by mean MSE."""
    by_method: dict[str, list[RunResult]] = {}
    for r in results:
        by_method.setdefault(r.method, []).append(r)
    rows = []
    for method in sorted(by_method):
        ok = [r for r in by_method[method] if r.error is None
              and r.final_mse is not None]
        if ok:
            mses = np.array([r.final_mse for r in ok])
            maes = np.array([r.final_mae for r in ok])
            rows.append(TableRow(method, len(ok),
                                 float(mses.mean()), float(mses.std()),
                                 float(maes.mean()), float(maes.std()), 0))
        else:
            rows.append(TableRow(method, 0, None, None, None, None, 0))
    rows.sort(key=lambda row: (row.mean_mse is None,
                               row.mean_mse if row.mean_mse is not None else 0.0,
                               row.method))
    for rank, row in enumerate(rows, start=1):
        row.rank = rank
    return ComparisonTable(rows)


def export_results(results: list[RunResult], out_dir: str | Path
                   ) -> ComparisonTable:
    """Write one run file per result plus the aggregate table CSV."""
    if not results:
        raise ValueError("no results to export")
    out = Path(out_dir)
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    for result in sorted(results, key=lambda r: (r.method, r.seed)):
        write_run_file(result, runs_dir / f"{result.method}_{result.seed}.txt")
    table = build_comparison_table(results)
    with open(out / "table.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "n_runs", "mean_mse", "std_mse",
                         "mean_mae", "std_mae", "rank"])
        for row in table.rows:
            writer.writerow([
                row.method, row.n_runs,
                "" if row.mean_mse is None else format_real(row.mean_mse),
                "" if row.std_mse is None else format_real(row.std_mse),
                "" if row.mean_mae is None else format_real(row.mean_mae),
                "" if row.std_mae is None else format_real(row.std_mae),
                row.rank,
            ])
    return table


def emit_plot_data(results: list[RunResult], out_dir: str | Path,
                   n_bins: int = 30) -> None:
    """Write per-run curve CSVs, weight histograms and the curve chart."""
    if not results:
        raise ValueError("no results to plot")
    out = Path(out_dir)
    curves_dir = out / "curves"
    results = sorted(results, key=lambda r: (r.method, r.seed))

    for result in results:
        if not result.curve:
            continue
        curves_dir.mkdir(parents=True, exist_ok=True)
        path = curves_dir / f"{result.method}_{result.seed}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", result.curve_metric])
            for epoch, value in enumerate(result.curve):
                writer.writerow([epoch, format_real(value)])

    weights_dir = out / "weights"
    for result in results:
        if result.weights is None or len(result.weights) == 0:
            continue
        weights_dir.mkdir(parents=True, exist_ok=True)
        w = np.asarray(result.weights, dtype=np.float64)
        mean = w.mean()
        if mean > 0:
            w = w / mean
        counts, edges = np.histogram(w, bins=n_bins)
        path = weights_dir / f"{result.method}_{result.seed}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_left", "bin_right", "count"])
            for k in range(n_bins):
                writer.writerow([format_real(edges[k]),
                                 format_real(edges[k + 1]), int(counts[k])])

    by_method: dict[str, list[RunResult]] = {}
    for result in results:
        if result.curve:
            by_method.setdefault(result.method, []).append(result)
    if by_method:
        lines = []
        metric = next(iter(by_method.values()))[0].curve_metric
        for method in sorted(by_method):
            curves = by_method[method]
            length = min(len(r.curve) for r in curves)
            stack = np.array([r.curve[:length] for r in curves])
            lines.append(Line(label=method, xs=np.arange(length),
                              ys=stack.mean(axis=0),
                              band=stack.std(axis=0)))
        write_chart(out / "plot.svg", lines=lines, title="",
                    x_label="epoch", y_label=metric)


def run_experiment(config: ExperimentConfig
                   ) -> tuple[list[RunResult], ComparisonTable]:
    """Run every (method, repeat) pair; persist when out_dir is set.

    Repeat r uses seed base_seed + r for the data draw and every
    method. A method failure is recorded in its result, not raised.
    """
    seeds = [config.base_seed + r for r in range(config.n_repeats)]
    if config.n_workers > 1:
        with ProcessPoolExecutor(max_workers=config.n_workers) as pool:
            batches = list(pool.map(
                _run_repeat, [config.scenario] * len(seeds),
                [config.methods] * len(seeds), seeds))
    else:
        batches = [_run_repeat(config.scenario, config.methods, seed)
                   for seed in seeds]
    results = [result for batch in batches for result in batch]
    results.sort(key=lambda r: (r.method, r.seed))
    if config.out_dir is not None:
        table = export_results(results, config.out_dir)
        emit_plot_data(results, config.out_dir)
    else:
        table = build_comparison_table(results)
    return results, table
