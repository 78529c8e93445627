"""End-to-end driver: three assets in, comparative accuracy report out.

The chain models the target asset (gold) with two companions (EUR-USD and
oil).  Per run: ingest and align the three calendars, split train/test, pick
a differencing order and ARIMA model per asset, roll one-step forecasts of
both companions across the whole calendar, compute the target's indicators,
assemble the feature matrix, fit the full least-squares equation plus both
stepwise directions, train the network sweep on the selected subset, and
write every artifact (prediction CSVs, correlograms, model weights, report)
into one output directory.

Accuracies for every stage are measured on the identical test window, as
100 minus the MAPE of one-step-ahead predictions.
"""

from __future__ import annotations

import datetime
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import arima, indicators, neuralnet, regression
from .errors import DataFormatError, StageError
from .ingest import PriceFrame, SplitSpec, align_calendars, parse_csv, split
from .metrics import accuracy
from .series import Series, acf, difference, ljung_box, pacf, suggest_d

ASSETS = ("gold", "eurusd", "oil")  # target first, then companions (x2, x3 order)

_DEFAULTS: dict[str, str] = {
    "csv_format": "auto",
    "train_start": "2015-01-01",
    "train_end": "2018-01-01",
    "test_start": "2018-01-02",
    "test_end": "2019-01-01",
    "stationarity_threshold": "0.95",
    "arima_max_p": "3",
    "arima_max_q": "3",
    "arima_criterion": "sic",
    "ema_periods": "5,10",
    "rsi_period": "14",
    "stoch_period": "14",
    "stoch_d_period": "3",
    "stepwise_direction": "backward",
    "stepwise_criterion": "bic",
    "nn_hidden": "sweep",
    "nn_max_hidden": "10",
    "nn_epochs": "500",
    "nn_learning_rate": "0.01",
    "nn_batch_size": "32",
    "nn_validation_fraction": "0.15",
    "nn_plateau_patience": "50",
    "seed": "0",
    "out_dir": "out",
}
_REQUIRED = ("gold_csv", "eurusd_csv", "oil_csv")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs; see `load_config` for the file grammar."""

    gold_csv: Path
    eurusd_csv: Path
    oil_csv: Path
    csv_format: str
    split: SplitSpec
    stationarity_threshold: float
    arima_max_p: int
    arima_max_q: int
    arima_criterion: str
    indicator_params: indicators.IndicatorParams
    stepwise_direction: str
    stepwise_criterion: str
    nn_hidden: int | None  # None means sweep sizes 1..nn_max_hidden
    nn_max_hidden: int
    nn_train: neuralnet.TrainConfig
    seed: int
    out_dir: Path
    raw: dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("gold_csv", "eurusd_csv", "oil_csv"):
            p = getattr(self, name)
            if not p.is_file():
                raise DataFormatError(f"{name} does not exist: {p}")
        if self.stepwise_direction not in ("forward", "backward"):
            raise ValueError(f"bad stepwise_direction {self.stepwise_direction!r}")
        if self.stepwise_criterion not in ("aic", "bic"):
            raise ValueError(f"bad stepwise_criterion {self.stepwise_criterion!r}")
        if self.arima_criterion not in ("aic", "sic"):
            raise ValueError(f"bad arima_criterion {self.arima_criterion!r}")


def _parse_date(value: str, key: str) -> datetime.date:
    try:
        return datetime.date.fromisoformat(value)
    except ValueError:
        raise DataFormatError(f"config key '{key}': bad date {value!r}") from None


def _parse_number(value: str, key: str, cast):
    try:
        return cast(value)
    except ValueError:
        raise DataFormatError(f"config key '{key}': bad number {value!r}") from None


def parse_config_text(text: str, base_dir: Path, overrides: dict[str, str] | None = None,
                      source: str = "<config>") -> PipelineConfig:
    """Build a config from key-value text.

    Grammar: one ``key = value`` per line; blank lines and lines starting
    with ``#`` are ignored; keys may appear once.  Unknown keys are errors
    so typos cannot silently fall back to defaults.  Relative paths are
    resolved against the config file's directory.
    """
    values: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise DataFormatError(f"{source}, line {line_no}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _DEFAULTS and key not in _REQUIRED:
            raise DataFormatError(f"{source}, line {line_no}: unknown key {key!r}")
        if key in values:
            raise DataFormatError(f"{source}, line {line_no}: duplicate key {key!r}")
        if not value:
            raise DataFormatError(f"{source}, line {line_no}: empty value for {key!r}")
        values[key] = value
    for key in _REQUIRED:
        if key not in values:
            raise DataFormatError(f"{source}: missing required key {key!r}")
    merged = dict(_DEFAULTS)
    merged.update(values)
    if overrides:
        merged.update(overrides)

    def path_of(key: str) -> Path:
        p = Path(merged[key])
        return p if p.is_absolute() else base_dir / p

    split_spec = SplitSpec(
        train_start=_parse_date(merged["train_start"], "train_start"),
        train_end=_parse_date(merged["train_end"], "train_end"),
        test_start=_parse_date(merged["test_start"], "test_start"),
        test_end=_parse_date(merged["test_end"], "test_end"),
    )
    try:
        ema_periods = tuple(int(x) for x in merged["ema_periods"].split(","))
    except ValueError:
        raise DataFormatError(
            f"config key 'ema_periods': bad list {merged['ema_periods']!r}"
        ) from None
    params = indicators.IndicatorParams(
        ema_periods=ema_periods,
        rsi_period=_parse_number(merged["rsi_period"], "rsi_period", int),
        stoch_period=_parse_number(merged["stoch_period"], "stoch_period", int),
        stoch_d_period=_parse_number(merged["stoch_d_period"], "stoch_d_period", int),
    )
    seed = _parse_number(merged["seed"], "seed", int)
    nn_train = neuralnet.TrainConfig(
        epochs=_parse_number(merged["nn_epochs"], "nn_epochs", int),
        learning_rate=_parse_number(merged["nn_learning_rate"], "nn_learning_rate", float),
        batch_size=_parse_number(merged["nn_batch_size"], "nn_batch_size", int),
        seed=seed,
        validation_fraction=_parse_number(
            merged["nn_validation_fraction"], "nn_validation_fraction", float),
        plateau_patience=_parse_number(
            merged["nn_plateau_patience"], "nn_plateau_patience", int),
    )
    hidden_raw = merged["nn_hidden"]
    nn_hidden = None if hidden_raw == "sweep" else _parse_number(hidden_raw, "nn_hidden", int)
    return PipelineConfig(
        gold_csv=path_of("gold_csv"),
        eurusd_csv=path_of("eurusd_csv"),
        oil_csv=path_of("oil_csv"),
        csv_format=merged["csv_format"],
        split=split_spec,
        stationarity_threshold=_parse_number(
            merged["stationarity_threshold"], "stationarity_threshold", float),
        arima_max_p=_parse_number(merged["arima_max_p"], "arima_max_p", int),
        arima_max_q=_parse_number(merged["arima_max_q"], "arima_max_q", int),
        arima_criterion=merged["arima_criterion"],
        indicator_params=params,
        stepwise_direction=merged["stepwise_direction"],
        stepwise_criterion=merged["stepwise_criterion"],
        nn_hidden=nn_hidden,
        nn_max_hidden=_parse_number(merged["nn_max_hidden"], "nn_max_hidden", int),
        nn_train=nn_train,
        seed=seed,
        out_dir=path_of("out_dir"),
        raw=merged,
    )


def load_config(path, overrides: dict[str, str] | None = None) -> PipelineConfig:
    """Read a config file; ``overrides`` replace file values (CLI flags)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, path.parent.resolve(), overrides, source=str(path))


@dataclass
class PipelineReport:
    """Everything `run` learned, ready for serialisation.

    ``timings`` (seconds per stage) is kept out of the JSON report so two
    identical runs produce identical bytes; it is written separately.
    """

    body: dict
    timings: dict[str, float]

    def to_json(self) -> str:
        return json.dumps(self.body, indent=2, sort_keys=True) + "\n"

    @property
    def stage_accuracies(self) -> dict[str, float]:
        return self.body["stage_accuracies"]


def write_predictions(path: Path, dates, actual: np.ndarray,
                       predicted: np.ndarray) -> None:
    lines = ["date,actual,predicted"]
    for day, a, p in zip(dates, actual, predicted):
        lines.append(f"{day.isoformat()},{float(a)!r},{float(p)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_correlogram(path: Path, train_diff: Series, max_lag: int = 24) -> None:
    lag_cap = min(max_lag, len(train_diff) - 1)
    a = acf(train_diff, lag_cap)
    p = pacf(train_diff, lag_cap)
    lines = ["lag,acf,pacf,band"]
    for i in range(lag_cap):
        lines.append(f"{int(a.lags[i])},{float(a.coefficients[i])!r},"
                     f"{float(p.coefficients[i])!r},{float(a.band)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _fit_asset(name: str, train: Series, config: PipelineConfig) -> arima.ArimaFit:
    d = suggest_d(train, config.stationarity_threshold)
    return arima.select_order(
        train, d, max_p=config.arima_max_p, max_q=config.arima_max_q,
        criterion=config.arima_criterion,
        config=arima.FitConfig(seed=config.seed),
    )


def _whiteness(fitted: arima.ArimaFit) -> dict:
    lags = min(10 + fitted.spec.p + fitted.spec.q, fitted.n_effective - 1)
    report = ljung_box(Series(fitted.residuals, name="resid"), lags,
                       fitted_params=fitted.spec.p + fitted.spec.q)
    return {
        "statistic": report.statistic, "dof": report.dof,
        "p_value": report.p_value, "lags": report.lags,
        "is_white": report.is_white,
    }


def run(config: PipelineConfig) -> PipelineReport:
    """Execute the whole chain and write artifacts to ``config.out_dir``.

    Any failure is re-raised as a `StageError` naming the stage; artifacts
    from completed stages are already on disk at that point, plus a partial
    report for debugging.
    """
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    body: dict = {"config": {k: v for k, v in sorted(config.raw.items())}}
    _run_stages(config, out, body, timings)
    report = PipelineReport(body=body, timings=timings)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "timings.json").write_text(
        json.dumps(timings, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report


def _run_stages(config: PipelineConfig, out: Path, body: dict,
                timings: dict[str, float]) -> None:
    stage = "ingest"
    started = time.perf_counter()
    frames: dict[str, PriceFrame] = {}
    try:
        for name in ASSETS:
            frames[name] = parse_csv(getattr(config, f"{name}_csv"), config.csv_format)
        timings[stage] = time.perf_counter() - started

        stage = "align"
        started = time.perf_counter()
        aligned = dict(zip(ASSETS, align_calendars([frames[a] for a in ASSETS])))
        timings[stage] = time.perf_counter() - started

        stage = "split"
        started = time.perf_counter()
        train_frames: dict[str, PriceFrame] = {}
        test_frames: dict[str, PriceFrame] = {}
        for name in ASSETS:
            train_frames[name], test_frames[name] = split(aligned[name], config.split)
        test_dates = test_frames["gold"].dates
        body["split"] = {
            "train_start": config.split.train_start.isoformat(),
            "train_end": config.split.train_end.isoformat(),
            "test_start": config.split.test_start.isoformat(),
            "test_end": config.split.test_end.isoformat(),
            "train_rows": len(train_frames["gold"]),
            "test_rows": len(test_frames["gold"]),
        }
        timings[stage] = time.perf_counter() - started

        body["assets"] = {}
        fits: dict[str, arima.ArimaFit] = {}
        tracks: dict[str, np.ndarray] = {}
        for name in ASSETS:
            stage = f"arima_{name}"
            started = time.perf_counter()
            train_series = train_frames[name].close_series()
            fitted = _fit_asset(name, train_series, config)
            fits[name] = fitted
            _write_correlogram(out / f"correlogram_{name}.csv",
                               difference(train_series, fitted.spec.d))
            entry = {
                "order": [fitted.spec.p, fitted.spec.d, fitted.spec.q],
                "mu": fitted.mu,
                "phi": [float(x) for x in fitted.phi],
                "theta": [float(x) for x in fitted.theta],
                "sigma2": fitted.sigma2,
                "aic": fitted.aic,
                "sic": fitted.sic,
                "ljung_box": _whiteness(fitted),
            }
            if name == "gold":
                preds = arima.rolling_one_step(
                    fitted, test_frames[name].close_series(), train_frames[name].closes)
                write_predictions(out / "predictions_arima_gold.csv",
                                   test_dates, test_frames[name].closes, preds.values)
                entry["test_accuracy"] = accuracy(test_frames[name].closes, preds.values)
            else:
                # one-step forecast track across the whole calendar, used as
                # a regression feature on both windows
                tracks[name] = arima.one_step_history(fitted, aligned[name].close_series())
            body["assets"][name] = entry
            timings[stage] = time.perf_counter() - started

        stage = "indicators"
        started = time.perf_counter()
        indicator_set = indicators.compute(aligned["gold"], config.indicator_params)
        timings[stage] = time.perf_counter() - started

        stage = "features"
        started = time.perf_counter()
        features = regression.build_features(
            aligned["gold"], indicator_set, tracks["eurusd"], tracks["oil"])
        train_m = features.window_by_target(config.split.train_start, config.split.train_end)
        test_m = features.window_by_target(config.split.test_start, config.split.test_end)
        if test_m.target_dates != test_dates:
            raise ValueError("feature rows do not cover the test window exactly")
        body["feature_rows"] = {"train": len(train_m), "test": len(test_m),
                                "columns": list(features.columns)}
        timings[stage] = time.perf_counter() - started

        stage = "regression"
        started = time.perf_counter()
        kept, dropped = regression.full_rank_subset(train_m)
        full_fit = regression.ols(train_m, kept)
        full_eval = regression.evaluate(full_fit, test_m)
        write_predictions(out / "predictions_ols_full.csv", test_dates,
                           test_m.y, full_eval.predictions)
        body["full_ols"] = {
            "included": list(full_fit.included),
            "dropped_collinear": list(dropped),
            "intercept": full_fit.intercept,
            "coefficients": {c: float(v) for c, v
                             in zip(full_fit.included, full_fit.coefficients)},
            "bic": full_fit.bic,
            "equation": full_fit.equation(),
            "test_accuracy": full_eval.accuracy,
        }

        reduced = train_m.with_columns(kept)
        traces: dict[str, regression.StepwiseTrace] = {}
        body["stepwise"] = {}
        for direction in ("forward", "backward"):
            trace = regression.stepwise(reduced, direction, config.stepwise_criterion)
            traces[direction] = trace
            step_eval = regression.evaluate(trace.fit, test_m)
            write_predictions(out / f"predictions_stepwise_{direction}.csv",
                               test_dates, test_m.y, step_eval.predictions)
            final_criterion = (trace.fit.bic if config.stepwise_criterion == "bic"
                               else trace.fit.aic)
            body["stepwise"][direction] = {
                "included": list(trace.fit.included),
                "steps": [{"action": s.action, "column": s.column,
                           "criterion": s.criterion} for s in trace.steps],
                "criterion": config.stepwise_criterion,
                "final_criterion": final_criterion,
                "intercept": trace.fit.intercept,
                "coefficients": {c: float(v) for c, v
                                 in zip(trace.fit.included, trace.fit.coefficients)},
                "equation": trace.fit.equation(),
                "test_accuracy": step_eval.accuracy,
            }
        timings[stage] = time.perf_counter() - started

        stage = "neural_net"
        started = time.perf_counter()
        subset = traces[config.stepwise_direction].fit.included
        if not subset:
            raise ValueError("selected subset is empty; nothing to train on")
        nn_train_m = train_m.with_columns(subset)
        nn_test_m = test_m.with_columns(subset)
        nn_body: dict = {"subset_source": f"{config.stepwise_direction} stepwise",
                         "columns": list(subset)}
        if config.nn_hidden is None:
            sweep_result = neuralnet.sweep(nn_train_m, config.nn_train,
                                           config.nn_max_hidden)
            model = sweep_result.model
            nn_body["chosen_hidden"] = sweep_result.chosen
            nn_body["sweep"] = {
                str(h): {
                    "validation_mape": r.validation_mape,
                    "train_mape": r.train_mape,
                    "epochs_run": r.epochs_run,
                    "early_stopped": r.early_stopped,
                    "seed": r.seed,
                } for h, r in sorted(sweep_result.reports.items())
            }
            if sweep_result.failures:
                nn_body["diverged"] = {str(h): msg for h, msg
                                       in sorted(sweep_result.failures.items())}
        else:
            model, train_report = neuralnet.train(nn_train_m, config.nn_hidden,
                                                  config.nn_train)
            nn_body["chosen_hidden"] = config.nn_hidden
            nn_body["sweep"] = {
                str(config.nn_hidden): {
                    "validation_mape": train_report.validation_mape,
                    "train_mape": train_report.train_mape,
                    "epochs_run": train_report.epochs_run,
                    "early_stopped": train_report.early_stopped,
                    "seed": train_report.seed,
                }
            }
        nn_mape, nn_preds = neuralnet.evaluate(model, nn_test_m)
        write_predictions(out / "predictions_hybrid_nn.csv", test_dates,
                           nn_test_m.y, nn_preds)
        (out / "model_nn.json").write_text(
            neuralnet.model_to_json(model) + "\n", encoding="utf-8")
        nn_body["test_accuracy"] = 100.0 - nn_mape
        body["neural_net"] = nn_body
        timings[stage] = time.perf_counter() - started

        stage = "report"
        started = time.perf_counter()
        body["stage_accuracies"] = {
            "arima_gold": body["assets"]["gold"]["test_accuracy"],
            "full_ols": body["full_ols"]["test_accuracy"],
            "stepwise_forward": body["stepwise"]["forward"]["test_accuracy"],
            "stepwise_backward": body["stepwise"]["backward"]["test_accuracy"],
            "hybrid_nn": body["neural_net"]["test_accuracy"],
        }
        body["seed"] = config.seed
        timings[stage] = time.perf_counter() - started

        stage = "plot_data"
        started = time.perf_counter()
        emit_plot_data(out, regression_direction=config.stepwise_direction)
        timings[stage] = time.perf_counter() - started
    except Exception as exc:
        (out / "report_partial.json").write_text(
            json.dumps(body, indent=2, sort_keys=True, default=str) + "\n",
            encoding="utf-8")
        if isinstance(exc, StageError):
            raise
        raise StageError(stage, str(exc)) from exc


def _read_predictions(path: Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    if not path.is_file():
        raise DataFormatError(f"missing stage artifact: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    dates, actual, predicted = [], [], []
    for line in lines[1:]:
        day, a, p = line.split(",")
        dates.append(day)
        actual.append(float(a))
        predicted.append(float(p))
    return dates, np.array(actual), np.array(predicted)


def emit_plot_data(out_dir, regression_direction: str = "backward") -> Path:
    """Merge per-stage prediction CSVs into one plot-ready comparison file.

    Writes ``comparison.csv`` with columns date, actual, arima, regression,
    hybrid over the test window.  Reads the prediction artifacts back from
    disk, so it can be re-run standalone after a pipeline run; rewriting is
    idempotent.
    """
    out = Path(out_dir)
    dates, actual, arima_preds = _read_predictions(out / "predictions_arima_gold.csv")
    r_dates, r_actual, reg_preds = _read_predictions(
        out / f"predictions_stepwise_{regression_direction}.csv")
    h_dates, _, nn_preds = _read_predictions(out / "predictions_hybrid_nn.csv")
    if r_dates != dates or h_dates != dates:
        raise DataFormatError("prediction artifacts cover different date ranges")
    if not np.array_equal(actual, r_actual):
        raise DataFormatError("prediction artifacts disagree on actual closes")
    lines = ["date,actual,arima,regression,hybrid"]
    for i, day in enumerate(dates):
        lines.append(f"{day},{float(actual[i])!r},{float(arima_preds[i])!r},"
                     f"{float(reg_preds[i])!r},{float(nn_preds[i])!r}")
    path = out / "comparison.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
