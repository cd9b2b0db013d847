"""Command-line interface.

Subcommands: fetch, indicators, train, evaluate, forecast, backtest, plot.
Exit codes: 0 success, 64 usage or config problems, 2 data or schema
problems, 3 numerical failures. Identical inputs, config, and seed produce
byte-identical output files.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import fields
from datetime import date as Date
from pathlib import Path

from . import charts, evaluation, lstm, pipeline, scaling
from .config import ConfigError, RunConfig, parse_config_text, resolve_config
from .dataset import DatasetError, SplitSpec, chronological_split, make_windows
from .evaluation import EvalError
from .indicators import IndicatorError, build_features, write_feature_csv
from .jsonio import dump_json
from .market_data import MarketDataError, fetch_quotes, parse_csv
from .scaling import ScalingError

EXIT_OK = 0
EXIT_DATA = 2
EXIT_NUMERIC = 3
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _date_arg(token: str) -> Date:
    try:
        return Date.fromisoformat(token)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {token!r}") from None


def _globals(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="PRNG seed override")
    parser.add_argument("--verbose", action="store_true", default=None, help="chatty stderr")


def build_parser() -> _Parser:
    parser = _Parser(prog="stockcast", description="LSTM forecasting for daily stock prices")
    _globals(parser)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("fetch", help="download a daily OHLCV CSV")
    _globals(p)
    p.add_argument("--symbol", default=None)
    p.add_argument("--start", type=_date_arg, required=True)
    p.add_argument("--end", type=_date_arg, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--endpoint", default=None, help="URL template with {symbol}/{start}/{end}")
    p.add_argument("--timeout", type=float, default=None)
    p.set_defaults(handler=cmd_fetch)

    p = sub.add_parser("indicators", help="compute a feature CSV from an OHLCV CSV")
    _globals(p)
    p.add_argument("--input", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--symbol", default=None)
    p.add_argument("--column-set", dest="column_set", default=None,
                   choices=["univariate", "paper_multivariate", "table4_all"])
    p.add_argument("--use-adj-close", dest="use_adj_close", action="store_true", default=None)
    p.set_defaults(handler=cmd_indicators)

    p = sub.add_parser("train", help="train a model and write it as JSON")
    _globals(p)
    p.add_argument("--input", default=None)
    p.add_argument("--model-out", dest="model", default=None)
    p.add_argument("--history-out", dest="history_out", default=None)
    _train_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", help="one-step metrics on the held-out test split")
    _globals(p)
    p.add_argument("--input", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--report-out", dest="out", default=None)
    p.add_argument("--predictions-out", dest="predictions_out", default=None)
    p.add_argument("--train-fraction", dest="train_fraction", type=float, default=None)
    p.add_argument("--symbol", default=None)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("forecast", help="recursive multi-day forecast from a trained model")
    _globals(p)
    p.add_argument("--input", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--symbol", default=None)
    p.set_defaults(handler=cmd_forecast)

    p = sub.add_parser("backtest", help="expanding-window walk-forward evaluation")
    _globals(p)
    p.add_argument("--input", default=None)
    p.add_argument("--out-dir", dest="out_dir", default=None)
    p.add_argument("--folds", type=int, default=None)
    _train_flags(p)
    p.set_defaults(handler=cmd_backtest)

    p = sub.add_parser("plot", help="render series CSVs as an SVG chart")
    _globals(p)
    p.add_argument("--series", action="append", default=None, metavar="LABEL=PATH[:COLUMN]",
                   help="repeatable; COLUMN defaults to the last column")
    p.add_argument("--out", default=None, help="SVG output path")
    p.add_argument("--merge-out", dest="merge_out", default=None, help="merged CSV output path")
    p.add_argument("--title", default="")
    p.set_defaults(handler=cmd_plot)

    return parser


def _train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--symbol", default=None)
    p.add_argument("--mode", default=None, choices=["univariate", "multivariate"])
    p.add_argument("--column-set", dest="column_set", default=None,
                   choices=["univariate", "paper_multivariate", "table4_all"])
    p.add_argument("--lookback", type=int, default=None)
    p.add_argument("--train-fraction", dest="train_fraction", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--hidden-sizes", dest="hidden_sizes", default=None,
                   help="comma-separated, e.g. 50,50")
    p.add_argument("--validation-fraction", dest="validation_fraction", type=float, default=None)
    p.add_argument("--gradient-clip-norm", dest="gradient_clip_norm", type=float, default=None)
    p.add_argument("--cell-variant", dest="cell_variant", default=None,
                   choices=["standard", "as_printed"])
    p.add_argument("--use-adj-close", dest="use_adj_close", action="store_true", default=None)
    p.add_argument("--clip-scaled", dest="clip_scaled", action="store_true", default=None)


def _resolve(args) -> RunConfig:
    file_values: dict[str, str] = {}
    if getattr(args, "config", None):
        file_values = parse_config_text(Path(args.config).read_text())
    overrides = {}
    for f in fields(RunConfig):
        if hasattr(args, f.name) and getattr(args, f.name) is not None:
            overrides[f.name] = getattr(args, f.name)
    return resolve_config(file_values, overrides)


def _require(value: str, what: str) -> str:
    if not value:
        raise _UsageError(f"{what} is required (flag or config)")
    return value


def _load_series(cfg: RunConfig, path: str):
    return parse_csv(Path(path).read_text(), cfg.symbol)


def cmd_fetch(args, cfg: RunConfig) -> int:
    out = _require(cfg.out, "--out")
    text = fetch_quotes(cfg.symbol, args.start, args.end, cfg.endpoint, cfg.timeout)
    Path(out).write_text(text)
    print(max(0, len(text.splitlines()) - 1))
    return EXIT_OK


def cmd_indicators(args, cfg: RunConfig) -> int:
    input_path = _require(cfg.input, "--input")
    out = _require(cfg.out, "--out")
    series = _load_series(cfg, input_path)
    matrix = build_features(
        series, cfg.indicator_config(), cfg.effective_column_set(), cfg.use_adj_close
    )
    Path(out).write_text(write_feature_csv(matrix))
    print(matrix.warmup_dropped)
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    input_path = _require(cfg.input, "--input")
    model_out = _require(cfg.model, "--model-out")
    history_out = _require(cfg.history_out, "--history-out")
    series = _load_series(cfg, input_path)
    result = pipeline.train_from_series(series, cfg)
    lstm.save_model(result.model, model_out)
    lines = ["epoch,train_mse,val_mse"]
    for epoch, (train_mse, val_mse) in enumerate(
        zip(result.history["train_mse"], result.history["val_mse"]), start=1
    ):
        lines.append(f"{epoch},{train_mse:.17g},{val_mse:.17g}")
    Path(history_out).write_text("\n".join(lines) + "\n")
    if args.verbose:
        final = result.history["train_mse"][-1]
        print(f"trained {cfg.epochs} epochs, final train mse {final:.6g}", file=sys.stderr)
    return EXIT_OK


def _test_split_for_model(model, series, train_fraction: float):
    matrix = build_features(
        series, model.indicator_config, model.column_set, model.use_adj_close
    )
    scaled = scaling.transform(model.scaler, matrix)
    windows = make_windows(scaled, model.lookback)
    _, test_ds = chronological_split(windows, SplitSpec(train_fraction))
    return test_ds


def cmd_evaluate(args, cfg: RunConfig) -> int:
    input_path = _require(cfg.input, "--input")
    model_path = _require(cfg.model, "--model")
    report_out = _require(cfg.out, "--report-out")
    series = _load_series(cfg, input_path)
    model = lstm.load_model(model_path)
    test_ds = _test_split_for_model(model, series, cfg.train_fraction)
    report, rows = evaluation.evaluate_one_step(model, test_ds)
    document = {
        "mape": report.mape,
        "mae": report.mae,
        "mse": report.mse,
        "rmse": report.rmse,
        "n": report.n,
        "mode": model.mode,
        "symbol": series.symbol,
        "epochs": model.train_config.epochs,
    }
    Path(report_out).write_text(dump_json(document) + "\n")
    if cfg.predictions_out:
        lines = ["date,actual,predicted"]
        lines += [f"{day.isoformat()},{a:.17g},{p:.17g}" for day, a, p in rows]
        Path(cfg.predictions_out).write_text("\n".join(lines) + "\n")
    if args.verbose:
        print(f"mape {report.mape:.4f} over {report.n} samples", file=sys.stderr)
    return EXIT_OK


def cmd_forecast(args, cfg: RunConfig) -> int:
    input_path = _require(cfg.input, "--input")
    model_path = _require(cfg.model, "--model")
    out = _require(cfg.out, "--out")
    series = _load_series(cfg, input_path)
    model = lstm.load_model(model_path)
    result = evaluation.forecast_recursive(model, series, cfg.horizon)
    lines = ["day_index,predicted_close"]
    lines += [f"{i},{v:.17g}" for i, v in enumerate(result.values, start=1)]
    Path(out).write_text("\n".join(lines) + "\n")
    print(result.trend)
    return EXIT_OK


def cmd_backtest(args, cfg: RunConfig) -> int:
    input_path = _require(cfg.input, "--input")
    out_dir = _require(cfg.out_dir, "--out-dir")
    series = _load_series(cfg, input_path)
    reports = evaluation.walk_forward(series, cfg, cfg.folds)
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    for j, report in enumerate(reports, start=1):
        document = {
            "fold": j,
            "mape": report.mape,
            "mae": report.mae,
            "mse": report.mse,
            "rmse": report.rmse,
            "n": report.n,
        }
        (directory / f"fold_{j:02d}.json").write_text(dump_json(document) + "\n")
        print(f"fold {j}: mape={report.mape:.6g} rmse={report.rmse:.6g} n={report.n}")
    return EXIT_OK


def _parse_series_arg(spec: str):
    label, sep, rest = spec.partition("=")
    if not sep:
        label, rest = "", spec
    path, column = rest, None
    if ":" in rest:
        candidate, _, col = rest.rpartition(":")
        if candidate and Path(candidate).exists():
            path, column = candidate, col
    if not label:
        label = Path(path).stem if column is None else f"{Path(path).stem} {column}"
    return label, path, column


def _read_series_csv(path: str, column: str | None) -> list[float]:
    rows = list(csv.reader(io.StringIO(Path(path).read_text())))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    if column is None:
        idx = len(header) - 1
    else:
        if column not in header:
            raise ValueError(f"{path}: no column named {column!r}")
        idx = header.index(column)
    values = []
    for line_number, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}: line {line_number}: ragged row")
        try:
            values.append(float(row[idx]))
        except ValueError:
            raise ValueError(
                f"{path}: line {line_number}: non-numeric value {row[idx]!r}"
            ) from None
    if not values:
        raise ValueError(f"{path}: no data rows")
    return values


def cmd_plot(args, cfg: RunConfig) -> int:
    if not args.series:
        raise _UsageError("at least one --series is required")
    if not cfg.out and not cfg.merge_out:
        raise _UsageError("--out and/or --merge-out is required")
    series = []
    for spec in args.series:
        label, path, column = _parse_series_arg(spec)
        series.append((label, _read_series_csv(path, column)))
    if cfg.out:
        Path(cfg.out).write_text(charts.render_line_chart(series, title=args.title))
    if cfg.merge_out:
        Path(cfg.merge_out).write_text(charts.merge_csv(series))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "handler", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _resolve(args)
        return args.handler(args, cfg)
    except (_UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (lstm.NonFiniteLoss, lstm.NonFiniteInput) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (
        MarketDataError,
        IndicatorError,
        ScalingError,
        DatasetError,
        EvalError,
        lstm.LstmError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
