"""Command-line entry points.

One executable, one subcommand per stage, plus the full chain:

* ``diagnose``    stationarity and correlogram tables for one series
* ``fit-arima``   order search, fit summary, held-out one-step accuracy
* ``indicators``  indicator table as CSV (empty cells during warm-up)
* ``stepwise``    variable selection trace and the fitted equation
* ``train-nn``    network training or hidden-size sweep
* ``pipeline``    the whole chain from a config file
* ``make-fixture`` deterministic three-asset demo data plus a config
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import arima, indicators, neuralnet, pipeline, regression, synthetic
from .errors import ChaincastError
from .ingest import DEFAULT_SPLIT, parse_csv, split as split_frame
from .metrics import accuracy
from .series import acf, difference, pacf, suggest_d


def _add_input_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--input", required=True, help="CSV file with daily bars")
    sub.add_argument("--format", default="auto", choices=["auto", "plain", "vendor"],
                     help="CSV layout (default: detect from header)")


def _cmd_diagnose(args: argparse.Namespace) -> int:
    frame = parse_csv(args.input, args.format)
    closes = frame.close_series()
    d = args.d if args.d is not None else suggest_d(closes, args.threshold)
    w = difference(closes, d)
    max_lag = min(args.max_lag, len(w) - 1)
    a = acf(w, max_lag)
    p = pacf(w, max_lag)
    print(f"series: {closes.name} ({len(closes)} observations)")
    print(f"differencing order: {d}" + ("" if args.d is None else " (forced)"))
    print(f"confidence band: +/-{a.band:.4f}")
    print(f"{'lag':>4} {'acf':>9} {'pacf':>9}")
    for i in range(max_lag):
        mark = "*" if abs(a.coefficients[i]) > a.band else " "
        print(f"{a.lags[i]:>4} {a.coefficients[i]:>9.4f} {p.coefficients[i]:>9.4f} {mark}")
    return 0


def _cmd_fit_arima(args: argparse.Namespace) -> int:
    frame = parse_csv(args.input, args.format)
    if args.config:
        split_spec = pipeline.load_config(args.config).split
    else:
        split_spec = DEFAULT_SPLIT
    train, test = split_frame(frame, split_spec)
    closes = train.close_series()
    d = args.d if args.d is not None else suggest_d(closes)
    fitted = arima.select_order(closes, d, max_p=args.max_p, max_q=args.max_q,
                                criterion=args.criterion)
    spec = fitted.spec
    print(f"selected order: ({spec.p},{spec.d},{spec.q}) by {args.criterion}")
    print(f"mu = {fitted.mu:.6g}")
    if spec.p:
        print("ar coefficients: " + ", ".join(f"{x:.4f}" for x in fitted.phi))
    if spec.q:
        print("ma coefficients: " + ", ".join(f"{x:.4f}" for x in fitted.theta))
    print(f"sigma^2 = {fitted.sigma2:.6g}   aic = {fitted.aic:.2f}   sic = {fitted.sic:.2f}")
    preds = arima.rolling_one_step(fitted, test.close_series(), train.closes)
    acc = accuracy(test.closes, preds.values)
    print(f"rolling one-step accuracy on {len(test)} held-out days: {acc:.2f}%")
    if args.out:
        pipeline.write_predictions(Path(args.out), test.dates, test.closes, preds.values)
        print(f"predictions written to {args.out}")
    return 0


def _cmd_indicators(args: argparse.Namespace) -> int:
    frame = parse_csv(args.input, args.format)
    result = indicators.compute(frame)
    names = list(result.columns)
    lines = ["date," + ",".join(names)]
    for i, day in enumerate(result.dates):
        cells = []
        for name in names:
            v = result.columns[name][i]
            cells.append("" if np.isnan(v) else repr(float(v)))
        lines.append(day.isoformat() + "," + ",".join(cells))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"indicator table written to {args.out}")
    else:
        print(text, end="")
    return 0


def _build_features_from_config(config: pipeline.PipelineConfig):
    from .ingest import align_calendars
    frames = {name: parse_csv(getattr(config, f"{name}_csv"), config.csv_format)
              for name in pipeline.ASSETS}
    aligned = dict(zip(pipeline.ASSETS,
                       align_calendars([frames[a] for a in pipeline.ASSETS])))
    tracks = {}
    for name in ("eurusd", "oil"):
        train, _ = split_frame(aligned[name], config.split)
        fitted = pipeline._fit_asset(name, train.close_series(), config)
        tracks[name] = arima.one_step_history(fitted, aligned[name].close_series())
    ind = indicators.compute(aligned["gold"], config.indicator_params)
    features = regression.build_features(aligned["gold"], ind,
                                         tracks["eurusd"], tracks["oil"])
    train_m = features.window_by_target(config.split.train_start, config.split.train_end)
    test_m = features.window_by_target(config.split.test_start, config.split.test_end)
    return train_m, test_m


def _cmd_stepwise(args: argparse.Namespace) -> int:
    config = pipeline.load_config(args.config)
    train_m, test_m = _build_features_from_config(config)
    kept, dropped = regression.full_rank_subset(train_m)
    if dropped:
        print("dropped exactly collinear column(s): " + ", ".join(dropped))
    trace = regression.stepwise(train_m.with_columns(kept), args.direction,
                                args.criterion)
    for step in trace.steps:
        print(f"{step.action} {step.column}: {args.criterion} -> {step.criterion:.2f}")
    if not trace.steps:
        print("no move improved the criterion; model unchanged")
    print(f"selected: {', '.join(trace.fit.included) or '(intercept only)'}")
    print(trace.fit.equation())
    report = regression.evaluate(trace.fit, test_m)
    print(f"test accuracy on {report.n} days: {report.accuracy:.2f}%")
    return 0


def _cmd_train_nn(args: argparse.Namespace) -> int:
    config = pipeline.load_config(args.config)
    train_m, test_m = _build_features_from_config(config)
    kept, _ = regression.full_rank_subset(train_m)
    trace = regression.stepwise(train_m.with_columns(kept),
                                config.stepwise_direction, config.stepwise_criterion)
    subset = trace.fit.included
    print(f"training on {config.stepwise_direction}-selected columns: {', '.join(subset)}")
    nn_train = train_m.with_columns(subset)
    nn_test = test_m.with_columns(subset)
    train_config = config.nn_train if args.seed is None else neuralnet.TrainConfig(
        epochs=config.nn_train.epochs, learning_rate=config.nn_train.learning_rate,
        batch_size=config.nn_train.batch_size, seed=args.seed,
        validation_fraction=config.nn_train.validation_fraction,
        plateau_patience=config.nn_train.plateau_patience)
    if args.hidden == "sweep":
        result = neuralnet.sweep(nn_train, train_config, config.nn_max_hidden)
        for h in sorted(result.reports):
            r = result.reports[h]
            flag = " (early stop)" if r.early_stopped else ""
            print(f"hidden {h:>2}: validation MAPE {r.validation_mape:.4f}%{flag}")
        for h in sorted(result.failures):
            print(f"hidden {h:>2}: diverged")
        print(f"chosen hidden size: {result.chosen}")
        model = result.model
    else:
        model, report = neuralnet.train(nn_train, int(args.hidden), train_config)
        print(f"hidden {model.hidden_size}: train MAPE {report.train_mape:.4f}%, "
              f"validation MAPE {report.validation_mape:.4f}%, "
              f"{report.epochs_run} epochs")
    test_mape, _ = neuralnet.evaluate(model, nn_test)
    print(f"test accuracy on {len(nn_test)} days: {100.0 - test_mape:.2f}%")
    if args.out:
        Path(args.out).write_text(neuralnet.model_to_json(model) + "\n", encoding="utf-8")
        print(f"model written to {args.out}")
    return 0


def _cmd_pipeline(args: argparse.Namespace) -> int:
    overrides: dict[str, str] = {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.out is not None:
        overrides["out_dir"] = str(Path(args.out).resolve())
    config = pipeline.load_config(args.config, overrides)
    report = pipeline.run(config)
    print(f"artifacts written to {config.out_dir}")
    for stage, acc in sorted(report.stage_accuracies.items()):
        print(f"{stage:>18}: {acc:.2f}%")
    return 0


def _cmd_make_fixture(args: argparse.Namespace) -> int:
    out = Path(args.out)
    paths = synthetic.make_fixture(out, seed=args.seed)
    config_path = out / "pipeline.cfg"
    config_path.write_text(
        "# generated demo configuration\n"
        f"gold_csv = {paths['gold'].name}\n"
        f"eurusd_csv = {paths['eurusd'].name}\n"
        f"oil_csv = {paths['oil'].name}\n"
        "train_start = 2015-01-01\n"
        "train_end = 2018-01-01\n"
        "test_start = 2018-01-02\n"
        "test_end = 2019-01-01\n"
        "out_dir = out\n",
        encoding="utf-8")
    for name in ("gold", "eurusd", "oil"):
        print(f"wrote {paths[name]}")
    print(f"wrote {config_path}")
    print(f"run: chaincast pipeline run --config {config_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaincast",
        description="Staged daily-price forecasting: ARIMA, indicators, "
                    "stepwise regression, neural network.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("diagnose", help="stationarity and correlogram tables")
    _add_input_args(p)
    p.add_argument("--d", type=int, default=None, help="force a differencing order")
    p.add_argument("--threshold", type=float, default=0.95,
                   help="lag-1 autocorrelation threshold for suggesting d")
    p.add_argument("--max-lag", type=int, default=20)
    p.set_defaults(func=_cmd_diagnose)

    p = subs.add_parser("fit-arima", help="order search and held-out accuracy")
    _add_input_args(p)
    p.add_argument("--config", default=None,
                   help="config file supplying the train/test split")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--max-p", type=int, default=3)
    p.add_argument("--max-q", type=int, default=3)
    p.add_argument("--criterion", default="sic", choices=["aic", "sic"])
    p.add_argument("--out", default=None, help="write predictions CSV here")
    p.set_defaults(func=_cmd_fit_arima)

    p = subs.add_parser("indicators", help="indicator table as CSV")
    _add_input_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_indicators)

    p = subs.add_parser("stepwise", help="variable selection trace")
    p.add_argument("--config", required=True)
    p.add_argument("--direction", default="backward", choices=["forward", "backward"])
    p.add_argument("--criterion", default="bic", choices=["aic", "bic"])
    p.set_defaults(func=_cmd_stepwise)

    p = subs.add_parser("train-nn", help="train the network or sweep hidden sizes")
    p.add_argument("--config", required=True)
    p.add_argument("--hidden", default="sweep",
                   help="'sweep' or a hidden-layer size (default: sweep)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="write model JSON here")
    p.set_defaults(func=_cmd_train_nn)

    p = subs.add_parser("pipeline", help="full chain from a config file")
    pipe_subs = p.add_subparsers(dest="pipeline_command", required=True)
    pr = pipe_subs.add_parser("run", help="execute the configured chain")
    pr.add_argument("--config", required=True)
    pr.add_argument("--seed", type=int, default=None, help="override config seed")
    pr.add_argument("--out", default=None, help="override output directory")
    pr.set_defaults(func=_cmd_pipeline)

    p = subs.add_parser("make-fixture", help="write deterministic demo data")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=synthetic.FIXTURE_SEED)
    p.set_defaults(func=_cmd_make_fixture)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ChaincastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
