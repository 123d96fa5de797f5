"""Command-line interface.

Subcommands: ``synth-bench`` (mixture-shift benchmark), ``fit`` (train
one method on CSV data), ``ydisc`` (two-sided risk-gap estimate) and
``demo-negative-transfer`` (1-D shifted-uniform illustration).

Exit codes: 0 success, 2 usage error, 1 runtime error. Diagnostics go
to stderr; results go to files and stdout. ``--seed`` (default from
the WANN_SEED environment variable) fully determines all outputs. A
``--config`` file holds ``key = value`` lines named after long flags;
explicit flags override it.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .baselines import uniform_fit
from .data import (MixtureShiftSpec, CsvSchema, TrainingSet,
                   gen_uniform_shift_1d, load_csv)
from .discrepancy import estimate_y_discrepancy
from .harness import (ExperimentConfig, MethodSpec, compute_metrics,
                      run_experiment, run_method)
from .nn import ArchSpec, FitConfig, forward
from .results import format_real, parse_kv_lines, write_run_file
from .svgplot import Line, Points, write_chart
from .training import (WannConfig, build_wann_model, fit_wann,
                       pretrain_weighter)

METHOD_CHOICES = ("wann", "uniform", "target-only", "kmm", "kliep",
                  "tradaboost")


def _default_seed() -> int:
    raw = os.environ.get("WANN_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        return 0


def _int_list(raw: str) -> list[int]:
    raw = raw.strip()
    if not raw:
        raise argparse.ArgumentTypeError("expected a comma-separated list "
                                         "of integers")
    try:
        return [int(v) for v in raw.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {raw!r}") from None


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value file of flag defaults")
    parser.add_argument("--seed", type=int, default=_default_seed(),
                        help="master seed (default: WANN_SEED or 0)")


def _add_net_flags(parser: argparse.ArgumentParser, epochs: int = 300) -> None:
    parser.add_argument("--hidden", type=_int_list, default=[100, 100],
                        help="hidden layer widths, comma separated")
    parser.add_argument("--clip", type=float, default=1.0,
                        help="weight clipping constant")
    parser.add_argument("--epochs", type=int, default=epochs)
    parser.add_argument("--batch-size", type=int, default=128)
    parser.add_argument("--lr", type=float, default=0.001)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wann",
        description="Adversarial instance weighting for regression "
                    "domain adaptation.")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser(
        "synth-bench",
        help="mixture-shift benchmark: wann vs uniform vs target-only")
    bench.add_argument("--dims", type=_int_list, default=[32, 64, 128, 256],
                       help="input dimensions, comma separated")
    bench.add_argument("--repeats", type=int, default=10)
    bench.add_argument("--m", type=int, default=1000,
                       help="training rows per repeat")
    bench.add_argument("--target-fraction", type=float, default=0.2)
    bench.add_argument("--pretrain-epochs", type=int, default=50)
    bench.add_argument("--parallel", type=int, default=1,
                       help="worker processes for repeats")
    bench.add_argument("--out", required=True, help="output directory")
    _add_net_flags(bench)
    _add_common(bench)

    fit = sub.add_parser("fit", help="train one method on CSV data")
    fit.add_argument("--method", required=True, choices=METHOD_CHOICES)
    fit.add_argument("--train", required=True, help="training CSV")
    fit.add_argument("--target-col", default="y", help="label column name")
    fit.add_argument("--domain-col", default="domain",
                     help="source/target column name")
    fit.add_argument("--test", help="optional test CSV (all target rows)")
    fit.add_argument("--out", required=True, help="output directory")
    fit.add_argument("--pretrain-epochs", type=int, default=50)
    fit.add_argument("--bandwidth", type=float,
                     help="kernel bandwidth for kmm/kliep")
    fit.add_argument("--kmm-b", type=float, default=1000.0,
                     help="KMM weight cap B")
    fit.add_argument("--kliep-centers", type=int, default=100)
    fit.add_argument("--boost-iters", type=int, default=10)
    _add_net_flags(fit)
    _add_common(fit)

    ydisc = sub.add_parser(
        "ydisc", help="estimate the target/weighted-source risk gap")
    ydisc.add_argument("--source", required=True, help="source CSV")
    ydisc.add_argument("--target", required=True, help="target CSV")
    ydisc.add_argument("--target-col", default="y", help="label column name")
    _add_net_flags(ydisc, epochs=100)
    _add_common(ydisc)

    demo = sub.add_parser(
        "demo-negative-transfer",
        help="1-D shifted-uniform demo: reweighting cannot hurt")
    demo.add_argument("--out", required=True, help="output directory")
    demo.add_argument("--m", type=int, default=200, help="source rows")
    demo.add_argument("--n", type=int, default=50, help="target rows")
    demo.add_argument("--pretrain-epochs", type=int, default=50)
    _add_net_flags(demo)
    _add_common(demo)
    return parser


def _expand_config(argv: list[str], parser: argparse.ArgumentParser
                   ) -> list[str]:
    """Splice --config file entries in as flags before the user's flags."""
    if "--config" not in argv:
        return argv
    at = argv.index("--config")
    if at + 1 >= len(argv):
        parser.error("--config needs a file path")
    path = Path(argv[at + 1])
    if not path.exists():
        parser.error(f"config file not found: {path}")
    try:
        fields = parse_kv_lines(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        parser.error(f"bad config file: {exc}")
    injected: list[str] = []
    for key, value in fields.items():
        injected.extend([f"--{key.replace('_', '-')}", value])
    # config flags go first so explicit flags override them
    return injected + argv


def cmd_synth_bench(args) -> int:
    if not args.dims:
        raise ValueError("--dims must be nonempty")
    params = {"epochs": args.epochs, "batch_size": args.batch_size,
              "hidden": tuple(args.hidden), "clip": args.clip, "lr": args.lr}
    wann_params = dict(params, pretrain_epochs=args.pretrain_epochs)
    out_root = Path(args.out)
    for dim in args.dims:
        scenario = MixtureShiftSpec(dim=dim, m=args.m,
                                       target_fraction=args.target_fraction,
                                       seed=args.seed)
        config = ExperimentConfig(
            scenario=scenario,
            methods=[MethodSpec("wann", wann_params),
                     MethodSpec("uniform", dict(params)),
                     MethodSpec("target_only", dict(params,
                                                    kind="target_only"))],
            n_repeats=args.repeats,
            base_seed=args.seed,
            out_dir=str(out_root / f"dim{dim}"),
            n_workers=args.parallel,
        )
        _, table = run_experiment(config)
        print(f"dim {dim}:")
        for row in table.rows:
            mse = "failed" if row.mean_mse is None else format_real(row.mean_mse)
            std = "" if row.std_mse is None else f" (std {format_real(row.std_mse)})"
            print(f"  rank {row.rank}: {row.method}  mse {mse}{std}")
    return 0


def _load_train_csv(args) -> TrainingSet:
    schema = CsvSchema(label_col=args.target_col, domain_col=args.domain_col)
    data = load_csv(args.train, schema)
    if not isinstance(data, TrainingSet):
        raise ValueError("training CSV needs a domain column")
    return data


def cmd_fit(args) -> int:
    train = _load_train_csv(args)
    test = None
    if args.test is not None:
        test = load_csv(args.test, CsvSchema(label_col=args.target_col,
                                             domain="target"))
    method = args.method.replace("-", "_")
    params = {"epochs": args.epochs, "batch_size": args.batch_size,
              "hidden": tuple(args.hidden), "clip": args.clip, "lr": args.lr,
              "pretrain_epochs": args.pretrain_epochs,
              "kernel_bandwidth": args.bandwidth, "B": args.kmm_b,
              "n_centers": args.kliep_centers,
              "n_iterations": args.boost_iters, "kind": method}
    result = run_method(MethodSpec(method, params), train, test, args.seed)
    if result.error is not None:
        raise RuntimeError(f"{method} failed: {result.error}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_run_file(result, out / f"{method}_{args.seed}.txt")
    summary = [
        f"method = {method}",
        f"seed = {args.seed}",
        f"rows = {len(train)}",
        f"source_rows = {train.n_source}",
        f"target_rows = {train.n_target}",
        f"features = {train.X.shape[1]}",
        f"hidden = {','.join(str(h) for h in args.hidden)}",
        f"clip = {format_real(args.clip)}",
        f"epochs = {args.epochs}",
    ]
    (out / "summary.txt").write_text("\n".join(summary) + "\n",
                                     encoding="utf-8")
    if result.weights is not None:
        lines = [format_real(v) for v in result.weights]
        (out / "weights.txt").write_text("\n".join(lines) + "\n",
                                         encoding="utf-8")
    if test is not None:
        metrics = [f"mse = {format_real(result.final_mse)}",
                   f"mae = {format_real(result.final_mae)}"]
        (out / "metrics.txt").write_text("\n".join(metrics) + "\n",
                                         encoding="utf-8")
        print(f"test mse {format_real(result.final_mse)} "
              f"mae {format_real(result.final_mae)}")
    return 0


def cmd_ydisc(args) -> int:
    schema = CsvSchema(label_col=args.target_col)
    source = load_csv(args.source, schema)
    target = load_csv(args.target, replace(schema, domain="target"))
    weights = np.full(len(source), 1.0 / len(source))
    estimate = estimate_y_discrepancy(
        source.X, source.y, weights, target,
        hidden=tuple(args.hidden), clip=args.clip, epochs=args.epochs,
        batch_size=args.batch_size, lr=args.lr, seed=args.seed)
    print(f"estimate = {format_real(estimate.value)}")
    print(f"positive_side = {format_real(estimate.positive_side)}")
    print(f"negative_side = {format_real(estimate.negative_side)}")
    return 0


def cmd_demo_negative_transfer(args) -> int:
    train, grid = gen_uniform_shift_1d(args.m, args.n, args.seed)

    arch = ArchSpec(tuple(args.hidden), clip=args.clip)
    fit_cfg = FitConfig(epochs=args.epochs, batch_size=args.batch_size,
                        lr=args.lr, seed=args.seed)
    unet, _ = uniform_fit(train, arch, fit_cfg)
    wcfg = WannConfig(epochs=args.epochs, batch_size=args.batch_size,
                      pretrain_epochs=args.pretrain_epochs, lr=args.lr,
                      seed=args.seed)
    model = build_wann_model(1, arch.hidden, clip=args.clip, config=wcfg)
    pretrain_weighter(model, train, wcfg)
    fit_wann(model, train, wcfg)
    preds = {"uniform": forward(unet, grid.X),
             "wann": forward(model.task, grid.X)}

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "points.csv", "w", encoding="utf-8") as fh:
        fh.write("x,y,domain\n")
        for k in range(len(train)):
            domain = "target" if train.is_target[k] else "source"
            fh.write(f"{format_real(train.X[k, 0])},"
                     f"{format_real(train.y[k])},{domain}\n")

    with open(out / "fits.csv", "w", encoding="utf-8") as fh:
        fh.write("x,truth,uniform,wann\n")
        for k in range(len(grid)):
            fh.write(f"{format_real(grid.X[k, 0])},{format_real(grid.y[k])},"
                     f"{format_real(preds['uniform'][k])},"
                     f"{format_real(preds['wann'][k])}\n")

    metrics_lines = []
    for name in ("uniform", "wann"):
        metrics = compute_metrics(preds[name], grid.y)
        metrics_lines.append(f"{name}_grid_mse = {format_real(metrics.mse)}")
        print(f"{name} grid mse {format_real(metrics.mse)}")
    (out / "metrics.txt").write_text("\n".join(metrics_lines) + "\n",
                                     encoding="utf-8")

    src = train.source_rows()
    tgt = train.target_rows()
    write_chart(
        out / "demo.svg",
        lines=[Line("truth", grid.X[:, 0], grid.y),
               Line("uniform fit", grid.X[:, 0], preds["uniform"]),
               Line("wann fit", grid.X[:, 0], preds["wann"])],
        points=[Points("source", src.X[:, 0], src.y),
                Points("target", tgt.X[:, 0], tgt.y)],
        x_label="x", y_label="y")
    return 0


COMMANDS = {
    "synth-bench": cmd_synth_bench,
    "fit": cmd_fit,
    "ydisc": cmd_ydisc,
    "demo-negative-transfer": cmd_demo_negative_transfer,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in COMMANDS:
        sub = argv[0]
        argv = [sub] + _expand_config(argv[1:], parser)
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
