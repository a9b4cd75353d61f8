"""Training pairs, Adam, the training loop, and envelope prediction.

A window enters the model in "upper orientation": lower-envelope windows are
negated first and the prediction is negated back, so one model serves both
polarities. Each pair is normalized by an affine map (shift = window mean,
scale = window RMS about the mean) computed from the oriented window; the
final ELU layer cannot emit values below -1, and upper envelopes of a
zero-mean unit-RMS window live almost entirely above that floor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientExtremaError, NumericError
from ..signals import LOWER, UPPER, Envelope, TimeSeries, find_local_extrema
from .model import (
    EncoderConfig,
    ModelParams,
    _forward_batch,
    batch_loss,
    init_model,
    loss_and_gradients,
    model_forward,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingPair:
    """One encoded window and its normalized envelope target.

    input: (window_len, 2); channel 0 holds normalized signal values at
    extrema positions (zero elsewhere), channel 1 the binary extrema mask.
    target: (window_len,) normalized envelope in upper orientation.
    Denormalization is value * scale + shift.
    """

    input: np.ndarray
    target: np.ndarray
    shift: float
    scale: float

    def __post_init__(self) -> None:
        inp = np.asarray(self.input, dtype=np.float64)
        tgt = np.asarray(self.target, dtype=np.float64)
        if inp.ndim != 2 or inp.shape[1] != 2:
            raise ValueError(f"input must be (window_len, 2), got {inp.shape}")
        if tgt.shape != (inp.shape[0],):
            raise ValueError(
                f"target length {tgt.shape} does not match window {inp.shape[0]}"
            )
        mask = inp[:, 1]
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise ValueError("channel 1 must be a 0/1 mask")
        if np.any(inp[mask == 0.0, 0] != 0.0):
            raise ValueError("channel 0 must be zero off the extrema mask")
        if not (np.isfinite(self.shift) and np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"bad normalization (shift={self.shift}, scale={self.scale})")
        if not (np.all(np.isfinite(inp)) and np.all(np.isfinite(tgt))):
            raise ValueError("pair arrays must be finite")
        object.__setattr__(self, "input", inp)
        object.__setattr__(self, "target", tgt)


def window_norm_stats(samples: np.ndarray) -> tuple[float, float]:
    """Per-window affine normalization: median shift, MAD-derived scale.

    Robust statistics keep the normalization stable when a high-amplitude
    artifact burst occupies part of the window; the burst would inflate a
    mean/std pair several-fold and squash the normalized envelope targets
    toward zero. Falls back to std, then 1.0, for degenerate windows.
    """
    shift = float(np.median(samples))
    mad = float(np.median(np.abs(samples - shift)))
    if mad > 0.0:
        return shift, 1.4826 * mad
    scale = float(np.std(samples))
    return shift, scale if scale > 0.0 else 1.0


def encode_window(samples: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Encode an upper-oriented window into model input channels.

    Returns (input, shift, scale). Raises InsufficientExtremaError when the
    window has fewer than 2 maxima.
    """
    samples = np.asarray(samples, dtype=np.float64)
    maxima, _ = find_local_extrema(samples)
    if len(maxima) < 2:
        raise InsufficientExtremaError(
            f"window has {len(maxima)} maxima; need at least 2 to encode"
        )
    shift, scale = window_norm_stats(samples)
    encoded = np.zeros((samples.size, 2))
    encoded[maxima.indices, 0] = (maxima.values - shift) / scale
    encoded[maxima.indices, 1] = 1.0
    return encoded, shift, scale


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    batch_size: int = 16
    epochs: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1/beta2 must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")


class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    def __init__(self, params: ModelParams) -> None:
        self.m = {name: np.zeros_like(a) for name, a in params.named_arrays()}
        self.v = {name: np.zeros_like(a) for name, a in params.named_arrays()}
        self.t = 0


def adam_update(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> None:
    """One bias-corrected Adam step, applied to the parameters in place.

    theta -= lr * m_hat / (sqrt(v_hat) + eps), with eps outside the root.
    """
    state.t += 1
    t = state.t
    for name, theta in params.named_arrays():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1**t)
        v_hat = v / (1.0 - config.beta2**t)
        theta -= config.lr * m_hat / (np.sqrt(v_hat) + config.eps)


def _epoch_metrics(
    params: ModelParams,
    pairs: list[TrainingPair],
    config: EncoderConfig,
    batch_size: int,
) -> tuple[float, float]:
    """Forward-only MSE/MAE over a pair set (no penalty term)."""
    sq_sum = 0.0
    abs_sum = 0.0
    count = 0
    for lo in range(0, len(pairs), batch_size):
        chunk = pairs[lo : lo + batch_size]
        inputs = np.stack([p.input for p in chunk])
        targets = np.stack([p.target for p in chunk])
        pred, _ = _forward_batch(inputs, params, config)
        err = pred - targets
        sq_sum += float(np.sum(err**2))
        abs_sum += float(np.sum(np.abs(err)))
        count += err.size
    return sq_sum / count, abs_sum / count


def train(
    train_pairs: list[TrainingPair],
    val_pairs: list[TrainingPair],
    encoder_config: EncoderConfig,
    train_config: TrainConfig,
) -> tuple[ModelParams, list[dict]]:
    """Minibatch Adam training from a fresh seeded initialization.

    The shuffle stream is derived from the seed but independent of the
    init stream ([seed, 1] vs plain seed). Epoch rows report train MSE/MAE
    accumulated over the optimization batches (pre-update, as seen by the
    optimizer) and forward-only validation metrics. Raises NumericError if
    the loss leaves the finite range.
    """
    if not train_pairs:
        raise ValueError("no training pairs")
    params = init_model(encoder_config, train_config.seed)
    state = AdamState(params)
    shuffle_rng = np.random.default_rng([train_config.seed, 1])
    history: list[dict] = []

    for epoch in range(1, train_config.epochs + 1):
        order = shuffle_rng.permutation(len(train_pairs))
        sq_sum = 0.0
        abs_sum = 0.0
        count = 0
        for lo in range(0, len(order), train_config.batch_size):
            chunk = [train_pairs[i] for i in order[lo : lo + train_config.batch_size]]
            inputs = np.stack([p.input for p in chunk])
            targets = np.stack([p.target for p in chunk])
            mse, mae, grads = loss_and_gradients(params, inputs, targets, encoder_config)
            if not (np.isfinite(mse) and np.isfinite(mae)):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch starting {lo} (mse={mse})"
                )
            n = targets.size
            sq_sum += mse * n
            abs_sum += mae * n
            count += n
            adam_update(params, grads, state, train_config)

        row = {
            "epoch": epoch,
            "train_mse": sq_sum / count,
            "train_mae": abs_sum / count,
        }
        if val_pairs:
            val_mse, val_mae = _epoch_metrics(
                params, val_pairs, encoder_config, train_config.batch_size
            )
            row["val_mse"] = val_mse
            row["val_mae"] = val_mae
        history.append(row)
        logger.info(
            "epoch %d/%d train_mse=%.6f%s",
            epoch,
            train_config.epochs,
            row["train_mse"],
            f" val_mse={row['val_mse']:.6f}" if "val_mse" in row else "",
        )
    return params, history


def predict_envelope(
    window: TimeSeries,
    params: ModelParams,
    config: EncoderConfig,
    polarity: str,
) -> Envelope:
    """Model-interpolated envelope of a window for one polarity.

    The window length must equal the model's window_len. Lower polarity is
    computed by negating the window, predicting an upper envelope, and
    negating back.
    """
    if polarity not in (UPPER, LOWER):
        raise ValueError(f"polarity must be upper or lower, got {polarity!r}")
    if len(window) != config.window_len:
        raise ValueError(
            f"window length {len(window)} does not match model window_len {config.window_len}"
        )
    oriented = window.samples if polarity == UPPER else -window.samples
    encoded, shift, scale = encode_window(oriented)
    raw = model_forward(encoded, params, config)
    values = raw * scale + shift
    return Envelope(values if polarity == UPPER else -values, polarity)


class LearnedInterpolator:
    """Adapter giving a trained model the envelope-interpolator interface."""

    def __init__(self, params: ModelParams, config: EncoderConfig) -> None:
        self.params = params
        self.config = config

    def envelope(self, samples: np.ndarray, polarity: str) -> np.ndarray:
        ts = TimeSeries(samples, 1.0)
        return predict_envelope(ts, self.params, self.config, polarity).values


def gradient_check(
    params: ModelParams,
    pair: TrainingPair,
    config: EncoderConfig,
    h: float = 1e-5,
) -> float:
    """Max relative gap between analytic and central-difference gradients.

    Every parameter entry is perturbed by +-h; relative error uses
    max(|analytic|, |numeric|, 1e-8) as the denominator.
    """
    inputs = pair.input[None, :, :]
    targets = pair.target[None, :]
    _, _, grads = loss_and_gradients(params, inputs, targets, config)

    work = params.copy()
    worst = 0.0
    for name, arr in work.named_arrays():
        flat = arr.reshape(-1)
        g_flat = grads[name].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = batch_loss(work, inputs, targets, config)
            flat[j] = orig - h
            down = batch_loss(work, inputs, targets, config)
            flat[j] = orig
            numeric = (up - down) / (2.0 * h)
            denom = max(abs(g_flat[j]), abs(numeric), 1e-8)
            worst = max(worst, abs(g_flat[j] - numeric) / denom)
    return worst
