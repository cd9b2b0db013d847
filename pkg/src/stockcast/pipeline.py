"""Glue that wires bars -> features -> scaling -> windows -> training.

The scaler is always fitted on the training rows only: with k train samples
the last train target sits at matrix row lookback + k - 1, so rows
[0, lookback + k) are the training partition and everything after is test.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import dataset, lstm, scaling
from .config import RunConfig
from .dataset import SplitSpec, WindowedDataset
from .indicators import FeatureMatrix, build_features
from .market_data import OhlcvSeries
from .scaling import ScalerParams


@dataclass(eq=False)
class PipelineResult:
    model: lstm.LstmModel
    history: dict
    scaler: ScalerParams
    train_ds: WindowedDataset
    test_ds: WindowedDataset
    matrix: FeatureMatrix


def build_matrix(series: OhlcvSeries, cfg: RunConfig) -> FeatureMatrix:
    return build_features(
        series,
        cfg.indicator_config(),
        column_set=cfg.effective_column_set(),
        use_adj_close=cfg.use_adj_close,
    )


def split_row_for(matrix_rows: int, lookback: int, train_fraction: float) -> int:
    """First matrix row whose Close is a test target."""
    if matrix_rows <= lookback:
        raise dataset.TooFewRows(lookback + 1, matrix_rows)
    num_samples = matrix_rows - lookback
    k = int(train_fraction * num_samples)
    if k < 1 or num_samples - k < 1:
        raise dataset.DegenerateSplit(
            f"split {k}/{num_samples - k} of {num_samples} samples leaves an empty side"
        )
    return lookback + k


def prepare_datasets(matrix: FeatureMatrix, lookback: int, train_fraction: float, clip: bool = False):
    """Fit the scaler on training rows, scale everything, window, and split."""
    split_row = split_row_for(matrix.rows, lookback, train_fraction)
    scaler = scaling.fit(matrix, (0, split_row))
    scaled = scaling.transform(scaler, matrix, clip=clip)
    windows = dataset.make_windows(scaled, lookback)
    train_ds, test_ds = dataset.chronological_split(windows, SplitSpec(train_fraction))
    return scaler, train_ds, test_ds


def train_from_series(series: OhlcvSeries, cfg: RunConfig) -> PipelineResult:
    """The full training pipeline as the train command runs it."""
    matrix = build_matrix(series, cfg)
    scaler, train_ds, test_ds = prepare_datasets(
        matrix, cfg.lookback, cfg.train_fraction, clip=cfg.clip_scaled
    )
    tcfg = cfg.train_config()
    model_init = lstm.new_model(
        cfg.mode,
        train_ds.feature_names,
        cfg.lookback,
        scaler,
        tcfg,
        cell_variant=cfg.cell_variant,
        column_set=cfg.effective_column_set(),
        indicator_config=cfg.indicator_config(),
        use_adj_close=cfg.use_adj_close,
    )
    model, history = lstm.train(model_init, train_ds, tcfg)
    return PipelineResult(model, history, scaler, train_ds, test_ds, matrix)
