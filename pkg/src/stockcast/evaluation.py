"""Error metrics, one-step test evaluation, recursive forecasting, walk-forward.

All metrics compare prices in the original scale, never scaled values. The
recursive forecaster feeds each prediction back as the next synthetic bar
(open = high = low = close = prediction, volume carried forward), recomputes
every feature column over the extended history, and rescales with the
scaler parameters frozen at train time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import timedelta

import numpy as np

from . import dataset as dataset_mod
from . import lstm, pipeline, scaling
from .config import RunConfig
from .dataset import WindowedDataset
from .indicators import UNIVARIATE, SeriesTooShort, build_features
from .market_data import Bar, OhlcvSeries

FLAT_TREND_BAND = 0.001  # |last - first| within 0.1% of first counts as flat


class EvalError(Exception):
    pass


class LengthMismatch(EvalError):
    pass


class ZeroActual(EvalError):
    def __init__(self, index: int):
        super().__init__(f"actual value at index {index} is zero; MAPE undefined")
        self.index = index


class SchemaMismatch(EvalError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    mape: float
    mae: float
    mse: float
    rmse: float
    n: int


@dataclass(frozen=True)
class ForecastResult:
    horizon: int
    values: tuple[float, ...]
    trend: str  # "up" | "down" | "flat"


def rmse_from_mse(mse: float) -> float:
    return math.sqrt(mse)


def compute_metrics(real, predict) -> MetricsReport:
    """MAPE (percent), MAE, MSE, RMSE over two equal-length price sequences."""
    r = np.asarray(real, dtype=np.float64)
    p = np.asarray(predict, dtype=np.float64)
    if r.ndim != 1 or p.ndim != 1 or r.shape != p.shape or r.size == 0:
        raise LengthMismatch(f"real shaped {r.shape}, predict shaped {p.shape}")
    zeros = np.nonzero(r == 0.0)[0]
    if zeros.size:
        raise ZeroActual(int(zeros[0]))
    abs_err = np.abs(r - p)
    mse = float(np.mean((r - p) ** 2))
    return MetricsReport(
        mape=float(np.mean(abs_err / np.abs(r)) * 100.0),
        mae=float(np.mean(abs_err)),
        mse=mse,
        rmse=rmse_from_mse(mse),
        n=int(r.size),
    )


def _predict_batches(model, inputs: np.ndarray, batch_size: int = 256) -> np.ndarray:
    parts = [
        np.asarray(model.predict_batch(inputs[start : start + batch_size]), dtype=np.float64)
        for start in range(0, len(inputs), batch_size)
    ]
    return np.concatenate(parts) if parts else np.empty(0)


def evaluate_one_step(model, test_ds: WindowedDataset):
    """Metrics plus per-date (actual, predicted) prices on held-out samples.

    Each prediction consumes only the rows strictly before its target date;
    that is guaranteed by the window construction, not rechecked here.
    """
    if tuple(test_ds.feature_names) != tuple(model.feature_names):
        offending = next(
            (b for a, b in zip(model.feature_names, test_ds.feature_names) if a != b),
            None,
        )
        if offending is None:
            detail = f"{len(test_ds.feature_names)} columns, model has {len(model.feature_names)}"
        else:
            detail = f"column {offending!r} does not match the model's features"
        raise SchemaMismatch(detail)
    if test_ds.lookback != model.lookback:
        raise SchemaMismatch(
            f"dataset lookback {test_ds.lookback}, model lookback {model.lookback}"
        )
    if len(test_ds) == 0:
        raise LengthMismatch("test dataset is empty")
    preds_scaled = _predict_batches(model, test_ds.inputs)
    predicted = np.asarray(scaling.inverse_close(model.scaler, preds_scaled), dtype=np.float64)
    actual = np.asarray(scaling.inverse_close(model.scaler, test_ds.targets), dtype=np.float64)
    report = compute_metrics(actual, predicted)
    rows = [
        (day, float(a), float(p))
        for day, a, p in zip(test_ds.dates, actual, predicted)
    ]
    return report, rows


def _classify_trend(values: list[float]) -> str:
    first, last = values[0], values[-1]
    delta = last - first
    if abs(delta) <= FLAT_TREND_BAND * abs(first):
        return "flat"
    return "up" if delta > 0 else "down"


def _forecast_univariate(model, series: OhlcvSeries, horizon: int) -> list[float]:
    matrix = build_features(
        series, model.indicator_config, column_set=UNIVARIATE, use_adj_close=model.use_adj_close
    )
    scaled = scaling.transform(model.scaler, matrix)
    if scaled.rows < model.lookback:
        raise SeriesTooShort(model.lookback, scaled.rows)
    window = scaled.values[-model.lookback :, :].copy()
    out: list[float] = []
    for _ in range(horizon):
        pred_scaled = model.predict(window)
        price = float(scaling.inverse_close(model.scaler, pred_scaled))
        out.append(price)
        next_scaled = scaling.transform_close(model.scaler, price)
        window = np.vstack([window[1:], [[next_scaled]]])
    return out


def _forecast_multivariate(model, series: OhlcvSeries, horizon: int) -> list[float]:
    bars = list(series.bars)
    last_volume = bars[-1].volume
    out: list[float] = []
    for _ in range(horizon):
        extended = OhlcvSeries(series.symbol, tuple(bars))
        matrix = build_features(
            extended,
            model.indicator_config,
            column_set=model.column_set,
            use_adj_close=model.use_adj_close,
        )
        scaled = scaling.transform(model.scaler, matrix)
        if scaled.rows < model.lookback:
            raise SeriesTooShort(model.lookback, scaled.rows)
        window = scaled.values[-model.lookback :, :]
        price = float(scaling.inverse_close(model.scaler, model.predict(window)))
        out.append(price)
        # synthetic next bar: the prediction stands in for every price field
        next_date = bars[-1].date + timedelta(days=1)
        bars.append(Bar(next_date, price, price, price, price, price, last_volume))
    return out


def forecast_recursive(model, series: OhlcvSeries, horizon: int) -> ForecastResult:
    """Feed predictions back as inputs for `horizon` steps beyond the series."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if model.mode == "univariate":
        values = _forecast_univariate(model, series, horizon)
    else:
        values = _forecast_multivariate(model, series, horizon)
    return ForecastResult(horizon=horizon, values=tuple(values), trend=_classify_trend(values))


def walk_forward(series: OhlcvSeries, cfg: RunConfig, folds: int) -> list[MetricsReport]:
    """Expanding-window backtest: fold j trains on the first j/(folds+1) of the
    feature rows and takes one-step predictions on the next segment, retraining
    from scratch with seed cfg.seed + j."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    matrix = pipeline.build_matrix(series, cfg)
    rows = matrix.rows
    lookback = cfg.lookback
    reports: list[MetricsReport] = []
    for j in range(1, folds + 1):
        train_end = rows * j // (folds + 1)
        test_end = rows * (j + 1) // (folds + 1)
        if train_end - lookback < 1 or test_end - train_end < 1:
            raise dataset_mod.TooFewRows((folds + 1) * (lookback + 2), rows)
        fold_matrix = type(matrix)(
            dates=matrix.dates[:test_end],
            column_names=matrix.column_names,
            values=matrix.values[:test_end].copy(),
            warmup_dropped=matrix.warmup_dropped,
        )
        scaler = scaling.fit(fold_matrix, (0, train_end))
        scaled = scaling.transform(scaler, fold_matrix, clip=cfg.clip_scaled)
        windows = dataset_mod.make_windows(scaled, lookback)
        split = train_end - lookback  # samples with target row < train_end
        train_part = dataset_mod.slice_samples(windows, 0, split)
        test_part = dataset_mod.slice_samples(windows, split, len(windows))
        fold_cfg = replace(cfg.train_config(), seed=cfg.seed + j)
        model_init = lstm.new_model(
            cfg.mode,
            train_part.feature_names,
            lookback,
            scaler,
            fold_cfg,
            cell_variant=cfg.cell_variant,
            column_set=cfg.effective_column_set(),
            indicator_config=cfg.indicator_config(),
            use_adj_close=cfg.use_adj_close,
        )
        model, _ = lstm.train(model_init, train_part, fold_cfg)
        report, _ = evaluate_one_step(model, test_part)
        reports.append(report)
    return reports
