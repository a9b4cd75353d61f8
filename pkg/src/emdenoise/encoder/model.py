"""Attention-based envelope model: architecture, forward pass, gradients.

The network maps an encoded window (signal values at extrema in channel 0, a
binary extrema mask in channel 1) to a full-length envelope: multi-head
self-attention over the window, row-major flatten, a 10-unit linear
bottleneck with an L2 kernel penalty, then a five-layer dense stack
(800-400-200-100-800) with ELU everywhere except the 100-unit layer.

Gradients are hand-written reverse mode through the exact forward graph; no
autodiff framework is involved. The attention implementation exploits two
structural facts without changing the math: scores factor through the tiny
channels x channels matrix Wq Wk^T, and all-zero input rows produce all-zero
score rows, so softmax only needs the block over nonzero rows plus a closed
form for the uniform remainder. Tests pin both against a naive dense
evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_STACK = (800, 400, 200, 100, 800)

# Identity slots in the dense chain: the bottleneck and the stack's
# second-to-last layer carry no activation.
_N_DENSE = 6
_IDENTITY_LAYERS = (0, 4)


@dataclass(frozen=True)
class EncoderConfig:
    """Architecture hyperparameters; window_len must equal the final stack width."""

    window_len: int = 800
    channels: int = 2
    num_heads: int = 4
    key_dim: int = 32
    bottleneck_units: int = 10
    stack_units: tuple[int, ...] = DEFAULT_STACK
    l2_coeff: float = 0.01

    def __post_init__(self) -> None:
        for name in ("window_len", "channels", "num_heads", "key_dim", "bottleneck_units"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        stack = tuple(int(u) for u in self.stack_units)
        if len(stack) != 5 or any(u < 1 for u in stack):
            raise ValueError(f"stack_units must be 5 positive widths, got {self.stack_units!r}")
        if stack[-1] != self.window_len:
            raise ValueError(
                f"output width {stack[-1]} must equal window_len {self.window_len}"
            )
        if not np.isfinite(self.l2_coeff) or self.l2_coeff < 0:
            raise ValueError(f"l2_coeff must be finite and >= 0, got {self.l2_coeff}")
        object.__setattr__(self, "stack_units", stack)
        object.__setattr__(self, "l2_coeff", float(self.l2_coeff))

    @property
    def flat_dim(self) -> int:
        return self.window_len * self.channels

    @property
    def dense_widths(self) -> tuple[int, ...]:
        return (self.bottleneck_units,) + self.stack_units

    def to_dict(self) -> dict:
        return {
            "window_len": self.window_len,
            "channels": self.channels,
            "num_heads": self.num_heads,
            "key_dim": self.key_dim,
            "bottleneck_units": self.bottleneck_units,
            "stack_units": list(self.stack_units),
            "l2_coeff": self.l2_coeff,
        }


@dataclass
class ModelParams:
    """All trainable tensors. Attention projections are per head and unbiased;
    each dense layer has a kernel and a bias."""

    wq: np.ndarray  # (heads, channels, key_dim)
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray  # (heads * key_dim, channels)
    dense_w: list[np.ndarray] = field(default_factory=list)
    dense_b: list[np.ndarray] = field(default_factory=list)

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Canonical (name, tensor) ordering used by the optimizer, the
        serializer, and the gradient checker."""
        out = [
            ("attention.wq", self.wq),
            ("attention.wk", self.wk),
            ("attention.wv", self.wv),
            ("attention.wo", self.wo),
        ]
        for i, (w, b) in enumerate(zip(self.dense_w, self.dense_b)):
            out.append((f"dense_{i}.kernel", w))
            out.append((f"dense_{i}.bias", b))
        return out

    def n_parameters(self) -> int:
        return sum(int(a.size) for _, a in self.named_arrays())

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.wq.copy(),
            self.wk.copy(),
            self.wv.copy(),
            self.wo.copy(),
            [w.copy() for w in self.dense_w],
            [b.copy() for b in self.dense_b],
        )


def expected_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    """Tensor name -> shape for a given architecture."""
    heads, c, dk = config.num_heads, config.channels, config.key_dim
    shapes: dict[str, tuple[int, ...]] = {
        "attention.wq": (heads, c, dk),
        "attention.wk": (heads, c, dk),
        "attention.wv": (heads, c, dk),
        "attention.wo": (heads * dk, c),
    }
    dims = (config.flat_dim,) + config.dense_widths
    for i in range(_N_DENSE):
        shapes[f"dense_{i}.kernel"] = (dims[i], dims[i + 1])
        shapes[f"dense_{i}.bias"] = (dims[i + 1],)
    return shapes


def init_model(config: EncoderConfig, seed: int) -> ModelParams:
    """Glorot-uniform weights, zero biases, from one seeded PCG64 stream.

    Draw order is fixed (wq, wk, wv, wo, then dense kernels in depth order)
    so a seed pins every tensor bit for bit.
    """
    rng = np.random.default_rng(seed)
    c, dk, heads = config.channels, config.key_dim, config.num_heads

    def glorot(shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    wq = glorot((heads, c, dk), c, dk)
    wk = glorot((heads, c, dk), c, dk)
    wv = glorot((heads, c, dk), c, dk)
    wo = glorot((heads * dk, c), heads * dk, c)
    dims = (config.flat_dim,) + config.dense_widths
    dense_w = [glorot((dims[i], dims[i + 1]), dims[i], dims[i + 1]) for i in range(_N_DENSE)]
    dense_b = [np.zeros(dims[i + 1]) for i in range(_N_DENSE)]
    return ModelParams(wq, wk, wv, wo, dense_w, dense_b)


def _elu(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0.0, z, np.expm1(z))


def _elu_grad_from_output(z: np.ndarray, out: np.ndarray) -> np.ndarray:
    # d elu/dz = 1 for z >= 0 and e^z = elu(z) + 1 below.
    return np.where(z > 0.0, 1.0, out + 1.0)


@dataclass
class _HeadCache:
    b: np.ndarray        # wv_h @ wo_h, (C, C)
    p_block: np.ndarray  # softmax block over nonzero rows, (p, p)
    g: np.ndarray        # P @ x, (L, C)


@dataclass
class _AttentionCache:
    x: np.ndarray
    nz: np.ndarray
    xp: np.ndarray
    heads: list[_HeadCache]


def _attention_forward(
    x: np.ndarray, params: ModelParams, config: EncoderConfig
) -> tuple[np.ndarray, _AttentionCache]:
    length, c = x.shape
    scale = 1.0 / np.sqrt(config.key_dim)
    nz = np.nonzero(np.any(x != 0.0, axis=1))[0]
    xp = x[nz]
    p = nz.size

    out = np.zeros((length, c))
    heads: list[_HeadCache] = []
    for h in range(config.num_heads):
        wo_h = params.wo[h * config.key_dim : (h + 1) * config.key_dim]
        b = params.wv[h] @ wo_h
        g = np.zeros((length, c))
        if p > 0:
            a = (params.wq[h] @ params.wk[h].T) * scale
            scores = (xp @ a) @ xp.T
            # Zero rows/columns are implicit: each block row also competes
            # with (L - p) score-zero entries in its softmax.
            row_max = np.maximum(np.max(scores, axis=1), 0.0)
            exp_block = np.exp(scores - row_max[:, None])
            exp_zero = np.exp(-row_max)
            denom = (length - p) * exp_zero + exp_block.sum(axis=1)
            p_block = exp_block / denom[:, None]
            g[nz] = p_block @ xp
            if p < length:
                uniform_row = xp.sum(axis=0) / length
                mask = np.ones(length, dtype=bool)
                mask[nz] = False
                g[mask] = uniform_row
        else:
            p_block = np.zeros((0, 0))
        out += g @ b
        heads.append(_HeadCache(b, p_block, g))
    return out, _AttentionCache(x, nz, xp, heads)


def _attention_backward(
    d_out: np.ndarray,
    cache: _AttentionCache,
    params: ModelParams,
    config: EncoderConfig,
    grads: dict[str, np.ndarray],
) -> None:
    """Accumulate attention parameter gradients for one sample.

    Input gradients are never needed (the encoded window is data), which is
    what keeps the uniform softmax rows out of the backward pass: their
    scores are identically zero for every parameter value.
    """
    xp, nz = cache.xp, cache.nz
    scale = 1.0 / np.sqrt(config.key_dim)
    dk = config.key_dim
    for h, head in enumerate(cache.heads):
        wo_h = params.wo[h * dk : (h + 1) * dk]
        db = head.g.T @ d_out
        grads["attention.wv"][h] += db @ wo_h.T
        grads["attention.wo"][h * dk : (h + 1) * dk] += params.wv[h].T @ db
        if nz.size == 0:
            continue
        dg_block = (d_out @ head.b.T)[nz]
        dp = dg_block @ xp.T
        row_dot = np.sum(dp * head.p_block, axis=1)
        ds = head.p_block * (dp - row_dot[:, None])
        da = (xp.T @ ds @ xp) * scale
        grads["attention.wq"][h] += da @ params.wk[h]
        grads["attention.wk"][h] += da.T @ params.wq[h]


def attention_forward(
    x: np.ndarray, params: ModelParams, config: EncoderConfig
) -> np.ndarray:
    """Multi-head scaled dot-product self-attention over one window.

    x has shape (window_len, channels); the result has the same shape
    (heads are concatenated and projected back to the channel width).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (config.window_len, config.channels):
        raise ValueError(
            f"expected input shape {(config.window_len, config.channels)}, got {x.shape}"
        )
    out, _ = _attention_forward(x, params, config)
    return out


@dataclass
class _ForwardCache:
    attention: list[_AttentionCache]
    flat: np.ndarray                 # (B, flat_dim)
    pre: list[np.ndarray]            # per layer, (B, width)
    post: list[np.ndarray]


def _forward_batch(
    inputs: np.ndarray, params: ModelParams, config: EncoderConfig
) -> tuple[np.ndarray, _ForwardCache]:
    batch = inputs.shape[0]
    attn_caches: list[_AttentionCache] = []
    attn_out = np.empty((batch, config.window_len, config.channels))
    for i in range(batch):
        attn_out[i], cache = _attention_forward(inputs[i], params, config)
        attn_caches.append(cache)

    act = attn_out.reshape(batch, config.flat_dim)
    flat = act
    pre: list[np.ndarray] = []
    post: list[np.ndarray] = []
    for layer in range(_N_DENSE):
        z = act @ params.dense_w[layer] + params.dense_b[layer]
        act = z if layer in _IDENTITY_LAYERS else _elu(z)
        pre.append(z)
        post.append(act)
    return act, _ForwardCache(attn_caches, flat, pre, post)


def model_forward(
    x: np.ndarray, params: ModelParams, config: EncoderConfig
) -> np.ndarray:
    """Full forward pass for one encoded window; returns the window_len output."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (config.window_len, config.channels):
        raise ValueError(
            f"expected input shape {(config.window_len, config.channels)}, got {x.shape}"
        )
    pred, _ = _forward_batch(x[None, :, :], params, config)
    return pred[0]


def zero_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.named_arrays()}


def loss_and_gradients(
    params: ModelParams,
    inputs: np.ndarray,
    targets: np.ndarray,
    config: EncoderConfig,
) -> tuple[float, float, dict[str, np.ndarray]]:
    """Batch loss and full parameter gradients.

    inputs: (batch, window_len, channels); targets: (batch, window_len).
    Returns (mse, mae, grads) where the optimized loss is
    mse + l2_coeff * sum(bottleneck kernel^2); mse and mae are reported
    without the penalty term.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.ndim != 3 or targets.ndim != 2 or inputs.shape[0] != targets.shape[0]:
        raise ValueError(
            f"batch shape mismatch: inputs {inputs.shape}, targets {targets.shape}"
        )
    batch = inputs.shape[0]
    if batch == 0:
        raise ValueError("empty batch")

    pred, cache = _forward_batch(inputs, params, config)
    err = pred - targets
    mse = float(np.mean(err**2))
    mae = float(np.mean(np.abs(err)))

    grads = zero_grads(params)
    delta = 2.0 * err / err.size
    for layer in range(_N_DENSE - 1, -1, -1):
        if layer not in _IDENTITY_LAYERS:
            delta = delta * _elu_grad_from_output(cache.pre[layer], cache.post[layer])
        below = cache.flat if layer == 0 else cache.post[layer - 1]
        grads[f"dense_{layer}.kernel"] += below.T @ delta
        grads[f"dense_{layer}.bias"] += delta.sum(axis=0)
        delta = delta @ params.dense_w[layer].T
    grads["dense_0.kernel"] += 2.0 * config.l2_coeff * params.dense_w[0]

    d_attn = delta.reshape(batch, config.window_len, config.channels)
    for i in range(batch):
        _attention_backward(d_attn[i], cache.attention[i], params, config, grads)
    return mse, mae, grads


def batch_loss(
    params: ModelParams,
    inputs: np.ndarray,
    targets: np.ndarray,
    config: EncoderConfig,
) -> float:
    """Optimized loss only (mse + bottleneck L2 penalty); used by the
    finite-difference gradient check."""
    pred, _ = _forward_batch(
        np.asarray(inputs, dtype=np.float64), params, config
    )
    mse = float(np.mean((pred - np.asarray(targets, dtype=np.float64)) ** 2))
    return mse + config.l2_coeff * float(np.sum(params.dense_w[0] ** 2))
