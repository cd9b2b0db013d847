"""Stacked LSTM regressor with hand-written backpropagation through time.

Everything is plain numpy: the cell equations, the unrolled forward pass over
a window, reverse-mode gradients, gradient-norm clipping, the Adam update,
and a versioned JSON serialization of the whole model. No autograd framework
is involved, which keeps training bit-reproducible for a fixed seed.

Two cell variants exist. "standard" is the usual formulation:

    f = sigmoid(w_fx x + w_fh h + b_f)      i = sigmoid(w_ix x + w_ih h + b_i)
    g = tanh(w_gx x + w_gh h + b_g)         o = sigmoid(w_ox x + w_oh h + b_o)
    c = f * c_prev + i * g                  h = o * tanh(c)

"as_printed" replaces the input path with i = sigmoid(.) + tanh(.) and the
state update with c = f * c_prev + i, keeping f, o, and h as above. Neither
variant uses peephole connections.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .indicators import IndicatorConfig
from .jsonio import dump_json
from .scaling import ScalerParams

MODEL_FORMAT_VERSION = 1
CELL_VARIANTS = ("standard", "as_printed")
MODES = ("univariate", "multivariate")

_LAYER_FIELDS = (
    "w_fx", "w_ix", "w_gx", "w_ox",
    "w_fh", "w_ih", "w_gh", "w_oh",
    "b_f", "b_i", "b_g", "b_o",
)


class LstmError(Exception):
    pass


class ShapeMismatch(LstmError):
    pass


class NonFiniteInput(LstmError):
    pass


class CacheMismatch(LstmError):
    pass


class EmptyDataset(LstmError):
    pass


class NonFiniteLoss(LstmError):
    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class UnsupportedVersion(LstmError):
    pass


class CorruptModel(LstmError):
    def __init__(self, path: str, reason: str = ""):
        detail = f": {reason}" if reason else ""
        super().__init__(f"corrupt model document at {path}{detail}")
        self.path = path


_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Tiny portable PRNG; a given seed yields the same stream on any platform."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def uniform(self, low: float, high: float) -> float:
        unit = (self.next_u64() >> 11) * (1.0 / (1 << 53))  # 53-bit mantissa in [0, 1)
        return low + (high - low) * unit

    def fill(self, shape, low: float, high: float) -> np.ndarray:
        count = int(np.prod(shape))
        flat = np.array([self.uniform(low, high) for _ in range(count)], dtype=np.float64)
        return flat.reshape(shape)


@dataclass(eq=False)
class LstmLayerParams:
    w_fx: np.ndarray
    w_ix: np.ndarray
    w_gx: np.ndarray
    w_ox: np.ndarray
    w_fh: np.ndarray
    w_ih: np.ndarray
    w_gh: np.ndarray
    w_oh: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.b_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_fx.shape[1]


@dataclass(eq=False)
class LstmState:
    h: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    hidden_sizes: tuple[int, ...] = (50, 50)
    validation_fraction: float = 0.1
    seed: int = 42
    gradient_clip_norm: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be positive")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden_sizes must be non-empty positive integers")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie strictly between 0 and 1")
        if not self.gradient_clip_norm > 0.0:
            raise ValueError("gradient_clip_norm must be positive")


@dataclass(eq=False)
class LstmModel:
    mode: str
    layers: list[LstmLayerParams]
    head_w: np.ndarray  # (last_hidden,)
    head_b: np.ndarray  # shape (1,)
    scaler: ScalerParams
    feature_names: tuple[str, ...]
    lookback: int
    train_config: TrainConfig
    rng_seed: int
    cell_variant: str = "standard"
    column_set: str = "univariate"
    indicator_config: IndicatorConfig = field(default_factory=IndicatorConfig)
    use_adj_close: bool = False

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(layer.hidden_size for layer in self.layers)

    @property
    def num_features(self) -> int:
        return len(self.feature_names)

    def predict(self, window) -> float:
        value, _ = forward(self, window)
        return value

    def predict_batch(self, windows) -> np.ndarray:
        preds, _ = forward_batch(self, np.asarray(windows, dtype=np.float64))
        return preds


def init_weights(input_size: int, hidden_size: int, seed: int) -> LstmLayerParams:
    """One layer with uniform weights in [-1/sqrt(hidden), +1/sqrt(hidden)].

    A single SplitMix64 stream fills the matrices in field order (input
    weights f, i, g, o then recurrent f, i, g, o), row-major, so the same
    seed reproduces the same layer anywhere. Forget-gate bias starts at 1.0,
    the other biases at 0.
    """
    if input_size < 1 or hidden_size < 1:
        raise ValueError("sizes must be >= 1")
    rng = SplitMix64(seed)
    bound = 1.0 / math.sqrt(hidden_size)
    return LstmLayerParams(
        w_fx=rng.fill((hidden_size, input_size), -bound, bound),
        w_ix=rng.fill((hidden_size, input_size), -bound, bound),
        w_gx=rng.fill((hidden_size, input_size), -bound, bound),
        w_ox=rng.fill((hidden_size, input_size), -bound, bound),
        w_fh=rng.fill((hidden_size, hidden_size), -bound, bound),
        w_ih=rng.fill((hidden_size, hidden_size), -bound, bound),
        w_gh=rng.fill((hidden_size, hidden_size), -bound, bound),
        w_oh=rng.fill((hidden_size, hidden_size), -bound, bound),
        b_f=np.ones(hidden_size),
        b_i=np.zeros(hidden_size),
        b_g=np.zeros(hidden_size),
        b_o=np.zeros(hidden_size),
    )


def new_model(
    mode: str,
    feature_names,
    lookback: int,
    scaler: ScalerParams,
    cfg: TrainConfig,
    cell_variant: str = "standard",
    column_set: str = "univariate",
    indicator_config: IndicatorConfig | None = None,
    use_adj_close: bool = False,
) -> LstmModel:
    """Freshly initialized stacked model; layer k seeds from cfg.seed + k."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if cell_variant not in CELL_VARIANTS:
        raise ValueError(f"cell_variant must be one of {CELL_VARIANTS}")
    if lookback < 1:
        raise ValueError("lookback must be >= 1")
    feature_names = tuple(feature_names)
    if not feature_names:
        raise ValueError("feature_names must not be empty")
    layers = []
    in_size = len(feature_names)
    for k, hidden in enumerate(cfg.hidden_sizes):
        layers.append(init_weights(in_size, hidden, cfg.seed + k))
        in_size = hidden
    head_rng = SplitMix64(cfg.seed + len(cfg.hidden_sizes))
    bound = 1.0 / math.sqrt(in_size)
    return LstmModel(
        mode=mode,
        layers=layers,
        head_w=head_rng.fill((in_size,), -bound, bound),
        head_b=np.zeros(1),
        scaler=scaler,
        feature_names=feature_names,
        lookback=lookback,
        train_config=cfg,
        rng_seed=cfg.seed,
        cell_variant=cell_variant,
        column_set=column_set,
        indicator_config=indicator_config if indicator_config is not None else IndicatorConfig(),
        use_adj_close=use_adj_close,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def cell_forward(params: LstmLayerParams, x_t, prev: LstmState, variant: str = "standard"):
    """One time step. Returns the new state and the cache backward needs."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[-1] != params.input_size:
        raise ShapeMismatch(f"input width {x_t.shape[-1]}, layer expects {params.input_size}")
    if prev.h.shape[-1] != params.hidden_size or prev.c.shape[-1] != params.hidden_size:
        raise ShapeMismatch("state width does not match layer hidden size")
    if variant not in CELL_VARIANTS:
        raise ValueError(f"unknown cell variant {variant!r}")
    h_prev, c_prev = prev.h, prev.c
    f = _sigmoid(x_t @ params.w_fx.T + h_prev @ params.w_fh.T + params.b_f)
    i = _sigmoid(x_t @ params.w_ix.T + h_prev @ params.w_ih.T + params.b_i)
    g = np.tanh(x_t @ params.w_gx.T + h_prev @ params.w_gh.T + params.b_g)
    o = _sigmoid(x_t @ params.w_ox.T + h_prev @ params.w_oh.T + params.b_o)
    if variant == "standard":
        c = f * c_prev + i * g
    else:
        c = f * c_prev + (i + g)
    tc = np.tanh(c)
    h = o * tc
    cache = {
        "x": x_t, "h_prev": h_prev, "c_prev": c_prev,
        "f": f, "i": i, "g": g, "o": o, "tc": tc,
    }
    return LstmState(h, c), cache


def forward_batch(model: LstmModel, windows: np.ndarray):
    """Unrolled forward pass over (batch, lookback, features) windows."""
    X = np.asarray(windows, dtype=np.float64)
    if X.ndim != 3 or X.shape[1] != model.lookback or X.shape[2] != model.num_features:
        raise ShapeMismatch(
            f"windows shaped {X.shape}, model expects (*, {model.lookback}, {model.num_features})"
        )
    batch, length = X.shape[0], X.shape[1]
    seq = X
    layer_caches = []
    for layer in model.layers:
        hidden = layer.hidden_size
        h = np.zeros((batch, hidden))
        c = np.zeros((batch, hidden))
        outs = np.empty((batch, length, hidden))
        steps = []
        for t in range(length):
            state, cache = cell_forward(layer, seq[:, t, :], LstmState(h, c), model.cell_variant)
            h, c = state.h, state.c
            outs[:, t, :] = h
            steps.append(cache)
        layer_caches.append(steps)
        seq = outs
    h_last = seq[:, -1, :]
    preds = h_last @ model.head_w + model.head_b[0]
    return preds, {
        "shape": X.shape,
        "variant": model.cell_variant,
        "layers": layer_caches,
        "h_last": h_last,
    }


def forward(model: LstmModel, window):
    """Scalar prediction for one (lookback, features) window, plus caches."""
    W = np.asarray(window, dtype=np.float64)
    if W.shape != (model.lookback, model.num_features):
        raise ShapeMismatch(
            f"window shaped {W.shape}, model expects ({model.lookback}, {model.num_features})"
        )
    if not np.isfinite(W).all():
        raise NonFiniteInput("window contains non-finite values")
    preds, caches = forward_batch(model, W[None, :, :])
    return float(preds[0]), caches


def _check_caches(model: LstmModel, caches) -> tuple[int, int]:
    try:
        batch, length, width = caches["shape"]
        layer_caches = caches["layers"]
        variant = caches["variant"]
        h_last = caches["h_last"]
    except (KeyError, TypeError, ValueError):
        raise CacheMismatch("caches missing required entries") from None
    if variant != model.cell_variant:
        raise CacheMismatch(f"caches built for variant {variant!r}, model is {model.cell_variant!r}")
    if len(layer_caches) != len(model.layers):
        raise CacheMismatch("cache layer count does not match model")
    if width != model.num_features or length != model.lookback:
        raise CacheMismatch("cache window shape does not match model")
    if h_last.shape != (batch, model.layers[-1].hidden_size):
        raise CacheMismatch("cached h_last shape does not match model")
    for layer, steps in zip(model.layers, layer_caches):
        if len(steps) != length:
            raise CacheMismatch("cache step count does not match window length")
        if steps[0]["x"].shape[-1] != layer.input_size:
            raise CacheMismatch("cache input width does not match layer")
    return batch, length


def backward(model: LstmModel, caches, d_prediction) -> dict[str, np.ndarray]:
    """Exact gradients of sum(d_prediction * prediction) for every parameter.

    d_prediction carries the loss derivative per batch element; gradients are
    summed over the batch. Keys follow model_param_items naming.
    """
    batch, length = _check_caches(model, caches)
    d_pred = np.atleast_1d(np.asarray(d_prediction, dtype=np.float64))
    if d_pred.shape != (batch,):
        raise CacheMismatch(f"d_prediction shaped {d_pred.shape}, cache batch is {batch}")

    grads: dict[str, np.ndarray] = {}
    for k, layer in enumerate(model.layers):
        for name in _LAYER_FIELDS:
            grads[f"layers.{k}.{name}"] = np.zeros_like(getattr(layer, name))
    grads["head.w"] = caches["h_last"].T @ d_pred
    grads["head.b"] = np.array([d_pred.sum()])

    top = len(model.layers) - 1
    d_seq = np.zeros((batch, length, model.layers[top].hidden_size))
    # the head only sees the last hidden state of the top layer
    d_seq[:, length - 1, :] = d_pred[:, None] * model.head_w[None, :]
    standard = model.cell_variant == "standard"

    for k in range(top, -1, -1):
        layer = model.layers[k]
        steps = caches["layers"][k]
        dh_carry = np.zeros((batch, layer.hidden_size))
        dc_carry = np.zeros((batch, layer.hidden_size))
        d_below = np.zeros((batch, length, layer.input_size))
        gw = {name: grads[f"layers.{k}.{name}"] for name in _LAYER_FIELDS}
        for t in range(length - 1, -1, -1):
            cache = steps[t]
            f, i, g, o, tc = cache["f"], cache["i"], cache["g"], cache["o"], cache["tc"]
            x_t, h_prev, c_prev = cache["x"], cache["h_prev"], cache["c_prev"]
            dh = d_seq[:, t, :] + dh_carry
            do = dh * tc
            dc = dc_carry + dh * o * (1.0 - tc * tc)
            df = dc * c_prev
            if standard:
                di = dc * g
                dg = dc * i
            else:
                # c = f*c_prev + (i + g): both input paths take dc directly
                di = dc
                dg = dc
            dzf = df * f * (1.0 - f)
            dzi = di * i * (1.0 - i)
            dzg = dg * (1.0 - g * g)
            dzo = do * o * (1.0 - o)
            gw["w_fx"] += dzf.T @ x_t
            gw["w_ix"] += dzi.T @ x_t
            gw["w_gx"] += dzg.T @ x_t
            gw["w_ox"] += dzo.T @ x_t
            gw["w_fh"] += dzf.T @ h_prev
            gw["w_ih"] += dzi.T @ h_prev
            gw["w_gh"] += dzg.T @ h_prev
            gw["w_oh"] += dzo.T @ h_prev
            gw["b_f"] += dzf.sum(axis=0)
            gw["b_i"] += dzi.sum(axis=0)
            gw["b_g"] += dzg.sum(axis=0)
            gw["b_o"] += dzo.sum(axis=0)
            d_below[:, t, :] = dzf @ layer.w_fx + dzi @ layer.w_ix + dzg @ layer.w_gx + dzo @ layer.w_ox
            dh_carry = dzf @ layer.w_fh + dzi @ layer.w_ih + dzg @ layer.w_gh + dzo @ layer.w_oh
            dc_carry = dc * f
        if k > 0:
            d_seq = d_below
    return grads


def model_param_items(model: LstmModel) -> list[tuple[str, np.ndarray]]:
    """Every trainable array, in a fixed documented order."""
    items = []
    for k, layer in enumerate(model.layers):
        for name in _LAYER_FIELDS:
            items.append((f"layers.{k}.{name}", getattr(layer, name)))
    items.append(("head.w", model.head_w))
    items.append(("head.b", model.head_b))
    return items


def clip_gradient_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is at most max_norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm > 0.0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


class Adam:
    """Adam with bias correction; beta1 0.9, beta2 0.999, eps 1e-8."""

    def __init__(self, params: list[tuple[str, np.ndarray]], learning_rate: float):
        self.lr = learning_rate
        self.beta1 = 0.9
        self.beta2 = 0.999
        self.eps = 1e-8
        self.step_count = 0
        self.m = {key: np.zeros_like(arr) for key, arr in params}
        self.v = {key: np.zeros_like(arr) for key, arr in params}

    def step(self, params: list[tuple[str, np.ndarray]], grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        b1c = 1.0 - self.beta1 ** self.step_count
        b2c = 1.0 - self.beta2 ** self.step_count
        for key, arr in params:
            g = grads[key]
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            arr -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def _mse_forward(model: LstmModel, inputs: np.ndarray, targets: np.ndarray, batch_size: int) -> float:
    sq = 0.0
    for start in range(0, len(targets), batch_size):
        preds, _ = forward_batch(model, inputs[start : start + batch_size])
        err = preds - targets[start : start + batch_size]
        sq += float(np.sum(err * err))
    return sq / len(targets)


def train(model_init: LstmModel, train_ds, cfg: TrainConfig):
    """Mini-batch Adam over chronological batches; no shuffling anywhere.

    The chronological tail of train_ds (cfg.validation_fraction of it) is
    held out for the per-epoch validation curve. Returns a trained copy of
    model_init and a history dict with exactly cfg.epochs entries per curve.
    The per-epoch train MSE is the running mean over that epoch's batches.
    """
    n = len(train_ds)
    if n == 0:
        raise EmptyDataset("no training samples")
    val_n = int(n * cfg.validation_fraction)
    if val_n < 1 or n - val_n < 1:
        raise EmptyDataset(
            f"cannot carve a validation tail from {n} samples at fraction {cfg.validation_fraction}"
        )
    model = copy.deepcopy(model_init)
    fit_x = train_ds.inputs[: n - val_n]
    fit_y = train_ds.targets[: n - val_n]
    val_x = train_ds.inputs[n - val_n :]
    val_y = train_ds.targets[n - val_n :]

    params = model_param_items(model)
    optimizer = Adam(params, cfg.learning_rate)
    history = {"train_mse": [], "val_mse": []}
    for epoch in range(1, cfg.epochs + 1):
        sq_err = 0.0
        for batch_no, start in enumerate(range(0, len(fit_y), cfg.batch_size), start=1):
            xb = fit_x[start : start + cfg.batch_size]
            yb = fit_y[start : start + cfg.batch_size]
            preds, caches = forward_batch(model, xb)
            err = preds - yb
            batch_sq = float(np.sum(err * err))
            if not math.isfinite(batch_sq):
                raise NonFiniteLoss(epoch, batch_no)
            sq_err += batch_sq
            grads = backward(model, caches, 2.0 * err / len(yb))
            clip_gradient_norm(grads, cfg.gradient_clip_norm)
            optimizer.step(params, grads)
        val_mse = _mse_forward(model, val_x, val_y, cfg.batch_size)
        if not math.isfinite(val_mse):
            raise NonFiniteLoss(epoch, 0)
        history["train_mse"].append(sq_err / len(fit_y))
        history["val_mse"].append(val_mse)
    return model, history


def model_to_document(model: LstmModel) -> dict:
    cfg = model.train_config
    icfg = model.indicator_config
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "mode": model.mode,
        "feature_names": list(model.feature_names),
        "lookback": model.lookback,
        "hidden_sizes": [int(h) for h in model.hidden_sizes],
        "cell_variant": model.cell_variant,
        "column_set": model.column_set,
        "use_adj_close": model.use_adj_close,
        "scaler": {
            "column_names": list(model.scaler.column_names),
            "mins": model.scaler.mins,
            "maxs": model.scaler.maxs,
        },
        "indicator_config": {
            "sma_periods": list(icfg.sma_periods),
            "wma_period": icfg.wma_period,
            "ema_alpha": icfg.ema_alpha,
            "rsi_period": icfg.rsi_period,
            "cci_period": icfg.cci_period,
            "stoch_k_period": icfg.stoch_k_period,
            "stoch_d_period": icfg.stoch_d_period,
            "macd_fast": icfg.macd_fast,
            "macd_slow": icfg.macd_slow,
            "macd_signal": icfg.macd_signal,
        },
        "train_config": {
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "learning_rate": cfg.learning_rate,
            "hidden_sizes": [int(h) for h in cfg.hidden_sizes],
            "validation_fraction": cfg.validation_fraction,
            "seed": cfg.seed,
            "gradient_clip_norm": cfg.gradient_clip_norm,
        },
        "rng_seed": model.rng_seed,
        "layers": [
            {name: getattr(layer, name) for name in _LAYER_FIELDS} for layer in model.layers
        ],
        "head": {"w": model.head_w, "b": float(model.head_b[0])},
    }


def save_model(model: LstmModel, sink) -> None:
    """Write the model as deterministic JSON (17 significant digits per number)."""
    for key, arr in model_param_items(model):
        if not np.isfinite(arr).all():
            raise ValueError(f"non-finite values in {key}; refusing to serialize")
    text = dump_json(model_to_document(model)) + "\n"
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        Path(sink).write_text(text)


def _need(container, key: str, path: str, kind: type | tuple):
    if not isinstance(container, dict):
        raise CorruptModel(path, "expected an object")
    if key not in container:
        raise CorruptModel(f"{path}.{key}", "missing")
    value = container[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise CorruptModel(f"{path}.{key}", "expected a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise CorruptModel(f"{path}.{key}", "expected an integer")
        return value
    if not isinstance(value, kind):
        kind_name = kind.__name__ if isinstance(kind, type) else "value"
        raise CorruptModel(f"{path}.{key}", f"expected {kind_name}")
    return value


def _array(container, key: str, path: str, shape: tuple[int, ...]) -> np.ndarray:
    raw = _need(container, key, path, list)
    try:
        arr = np.array(raw, dtype=np.float64)
    except (TypeError, ValueError):
        raise CorruptModel(f"{path}.{key}", "not a numeric array") from None
    if arr.shape != shape:
        raise CorruptModel(f"{path}.{key}", f"shape {arr.shape}, expected {shape}")
    if not np.isfinite(arr).all():
        raise CorruptModel(f"{path}.{key}", "non-finite values")
    return arr


def load_model(source) -> LstmModel:
    """Inverse of save_model; structural problems raise CorruptModel with a path."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModel("$", f"invalid JSON: {exc}") from None
    version = _need(doc, "format_version", "$", int)
    if version != MODEL_FORMAT_VERSION:
        raise UnsupportedVersion(f"format_version {version}, supported: {MODEL_FORMAT_VERSION}")
    mode = _need(doc, "mode", "$", str)
    if mode not in MODES:
        raise CorruptModel("$.mode", f"unknown mode {mode!r}")
    cell_variant = _need(doc, "cell_variant", "$", str)
    if cell_variant not in CELL_VARIANTS:
        raise CorruptModel("$.cell_variant", f"unknown variant {cell_variant!r}")
    column_set = _need(doc, "column_set", "$", str)
    use_adj_close = _need(doc, "use_adj_close", "$", bool)
    feature_names = _need(doc, "feature_names", "$", list)
    if not feature_names or not all(isinstance(n, str) for n in feature_names):
        raise CorruptModel("$.feature_names", "expected a list of strings")
    lookback = _need(doc, "lookback", "$", int)
    if lookback < 1:
        raise CorruptModel("$.lookback", "must be >= 1")
    hidden_sizes = _need(doc, "hidden_sizes", "$", list)
    if not hidden_sizes or not all(isinstance(h, int) and h >= 1 for h in hidden_sizes):
        raise CorruptModel("$.hidden_sizes", "expected positive integers")

    scaler_doc = _need(doc, "scaler", "$", dict)
    scaler_cols = _need(scaler_doc, "column_names", "$.scaler", list)
    if scaler_cols != feature_names:
        raise CorruptModel("$.scaler.column_names", "scaler columns differ from feature_names")
    width = len(feature_names)
    scaler = ScalerParams(
        column_names=tuple(scaler_cols),
        mins=_array(scaler_doc, "mins", "$.scaler", (width,)),
        maxs=_array(scaler_doc, "maxs", "$.scaler", (width,)),
    )

    icfg_doc = _need(doc, "indicator_config", "$", dict)
    sma_periods = _need(icfg_doc, "sma_periods", "$.indicator_config", list)
    try:
        indicator_config = IndicatorConfig(
            sma_periods=tuple(sma_periods),
            wma_period=_need(icfg_doc, "wma_period", "$.indicator_config", int),
            ema_alpha=_need(icfg_doc, "ema_alpha", "$.indicator_config", float),
            rsi_period=_need(icfg_doc, "rsi_period", "$.indicator_config", int),
            cci_period=_need(icfg_doc, "cci_period", "$.indicator_config", int),
            stoch_k_period=_need(icfg_doc, "stoch_k_period", "$.indicator_config", int),
            stoch_d_period=_need(icfg_doc, "stoch_d_period", "$.indicator_config", int),
            macd_fast=_need(icfg_doc, "macd_fast", "$.indicator_config", int),
            macd_slow=_need(icfg_doc, "macd_slow", "$.indicator_config", int),
            macd_signal=_need(icfg_doc, "macd_signal", "$.indicator_config", int),
        )
    except (TypeError, ValueError) as exc:
        raise CorruptModel("$.indicator_config", str(exc)) from None

    tcfg_doc = _need(doc, "train_config", "$", dict)
    tcfg_hidden = _need(tcfg_doc, "hidden_sizes", "$.train_config", list)
    try:
        train_config = TrainConfig(
            epochs=_need(tcfg_doc, "epochs", "$.train_config", int),
            batch_size=_need(tcfg_doc, "batch_size", "$.train_config", int),
            learning_rate=_need(tcfg_doc, "learning_rate", "$.train_config", float),
            hidden_sizes=tuple(tcfg_hidden),
            validation_fraction=_need(tcfg_doc, "validation_fraction", "$.train_config", float),
            seed=_need(tcfg_doc, "seed", "$.train_config", int),
            gradient_clip_norm=_need(tcfg_doc, "gradient_clip_norm", "$.train_config", float),
        )
    except (TypeError, ValueError) as exc:
        raise CorruptModel("$.train_config", str(exc)) from None

    layers_doc = _need(doc, "layers", "$", list)
    if len(layers_doc) != len(hidden_sizes):
        raise CorruptModel("$.layers", "layer count does not match hidden_sizes")
    layers = []
    in_size = width
    for k, (layer_doc, hidden) in enumerate(zip(layers_doc, hidden_sizes)):
        path = f"$.layers[{k}]"
        kwargs = {}
        for name in _LAYER_FIELDS:
            if name.endswith("x"):
                shape: tuple[int, ...] = (hidden, in_size)
            elif name.endswith("h"):
                shape = (hidden, hidden)
            else:
                shape = (hidden,)
            kwargs[name] = _array(layer_doc, name, path, shape)
        layers.append(LstmLayerParams(**kwargs))
        in_size = hidden

    head_doc = _need(doc, "head", "$", dict)
    head_w = _array(head_doc, "w", "$.head", (hidden_sizes[-1],))
    head_b = _need(head_doc, "b", "$.head", float)

    return LstmModel(
        mode=mode,
        layers=layers,
        head_w=head_w,
        head_b=np.array([head_b]),
        scaler=scaler,
        feature_names=tuple(feature_names),
        lookback=lookback,
        train_config=train_config,
        rng_seed=_need(doc, "rng_seed", "$", int),
        cell_variant=cell_variant,
        column_set=column_set,
        indicator_config=indicator_config,
        use_adj_close=use_adj_close,
    )
