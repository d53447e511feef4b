"""Recurrent CNN with prior-weighted spatial attention, trained with CTC.

Per frame t:

    f_t        = conv stack(I_t)                      (h*w cells x C channels)
    v_tij      = u . tanh(W_d e_{t-1} + W_f f_tij)
    beta_t     = softmax over all cells of v_t
    A_t        = beta_t * M_t**alpha / sum(beta_t * M_t**alpha)
    h_t        = sum_ij A_tij f_tij
    e_t, c_t   = LSTM(e_{t-1}, c_{t-1}, h_t)
    logits_t   = W_out e_t + b_out

Gradients are written out by hand; ``finite_diff_check`` verifies them.
"""

from __future__ import annotations

import json
import struct
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ctc import ctc_loss, ctc_loss_and_grad, softmax

CHECKPOINT_MAGIC = b"FSIA1"


class ModelNumericsError(FloatingPointError):
    def __init__(self, frame: int):
        super().__init__(f"non-finite activations first seen at frame {frame}")
        self.frame = frame


@dataclass(frozen=True)
class ConvLayer:
    channels: int
    kernel: int = 3
    stride: int = 2
    padding: int = 1


@dataclass(frozen=True)
class ModelConfig:
    input_side: int = 112
    conv: tuple[ConvLayer, ...] = (ConvLayer(8), ConvLayer(16), ConvLayer(32))
    attention_dim: int = 32
    hidden: int = 64
    num_labels: int = 9  # letters + blank
    alpha: float = 1.0
    dropout: float = 0.0

    def __post_init__(self):
        side = self.input_side
        for layer in self.conv:
            side = (side + 2 * layer.padding - layer.kernel) // layer.stride + 1
            if side < 1:
                raise ValueError(f"conv stack shrinks a {self.input_side}px input to nothing")
        if self.num_labels < 2 or self.hidden < 1 or self.attention_dim < 1:
            raise ValueError("num_labels must be >= 2 and hidden/attention sizes positive")
        if not self.conv:
            raise ValueError("at least one conv layer is required")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")

    @property
    def grid(self) -> tuple[int, int]:
        side = self.input_side
        for layer in self.conv:
            side = (side + 2 * layer.padding - layer.kernel) // layer.stride + 1
        return side, side

    @property
    def feature_channels(self) -> int:
        return self.conv[-1].channels

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv"] = [asdict(c) for c in self.conv]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["conv"] = tuple(ConvLayer(**c) for c in d["conv"])
        return cls(**d)


TINY_CONFIG = ModelConfig(
    input_side=16,
    conv=(ConvLayer(3, 3, 2, 0), ConvLayer(4, 3, 2, 0)),
    attention_dim=4, hidden=4, num_labels=3,
)


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)

    @property
    def alpha(self) -> float:
        return float(self.tensors["alpha"])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, OrderedDict((k, v.copy()) for k, v in self.tensors.items()))

    def zeros_like(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, np.zeros_like(v)) for k, v in self.tensors.items())


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Fan-in scaled uniform initialisation; LSTM forget-gate bias starts at 1."""
    rng = np.random.default_rng(seed)
    t: OrderedDict[str, np.ndarray] = OrderedDict()
    c_in = 1
    for n, layer in enumerate(config.conv):
        fan_in = c_in * layer.kernel * layer.kernel
        bound = np.sqrt(6.0 / fan_in)
        t[f"conv{n}.w"] = rng.uniform(-bound, bound, (layer.channels, c_in, layer.kernel, layer.kernel))
        t[f"conv{n}.b"] = np.zeros(layer.channels)
        c_in = layer.channels
    C, H, D, K = config.feature_channels, config.hidden, config.attention_dim, config.num_labels

    def uni(shape, fan_in):
        b = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-b, b, shape)

    t["attn.W_d"] = uni((D, H), H)
    t["attn.W_f"] = uni((D, C), C)
    t["attn.u"] = uni((D,), D)
    t["lstm.W_x"] = uni((4 * H, C), C)
    t["lstm.W_h"] = uni((4 * H, H), H)
    b = np.zeros(4 * H)
    b[H:2 * H] = 1.0  # gate order: input, forget, output, cell
    t["lstm.b"] = b
    t["out.W"] = uni((K, H), H)
    t["out.b"] = np.zeros(K)
    t["alpha"] = np.array(float(config.alpha))
    return ModelParams(config, t)


# -- convolution via im2col (NHWC) ----------------------------------------

def _im2col(x: np.ndarray, layer: ConvLayer) -> tuple[np.ndarray, tuple[int, int]]:
    p, k, s = layer.padding, layer.kernel, layer.stride
    if p:
        x = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::s, ::s]
    n, ho, wo = win.shape[:3]
    return win.reshape(n * ho * wo, -1), (ho, wo)


def _col2im(dcols: np.ndarray, x_shape: tuple, layer: ConvLayer, out_hw: tuple[int, int]) -> np.ndarray:
    p, k, s = layer.padding, layer.kernel, layer.stride
    n, hi, wi, c = x_shape
    ho, wo = out_hw
    dcols = dcols.reshape(n, ho, wo, c, k, k)
    dx = np.zeros((n, hi + 2 * p, wi + 2 * p, c))
    for ki in range(k):
        for kj in range(k):
            dx[:, ki:ki + s * (ho - 1) + 1:s, kj:kj + s * (wo - 1) + 1:s, :] += dcols[..., ki, kj]
    if p:
        dx = dx[:, p:p + hi, p:p + wi, :]
    return dx


def _conv_forward(params: ModelParams, frames: np.ndarray, rng=None):
    config = params.config
    x = (np.asarray(frames, dtype=np.float64) - 0.5)[..., None]
    layers = []
    n_layers = len(config.conv)
    for n, layer in enumerate(config.conv):
        w = params[f"conv{n}.w"]
        cols, hw = _im2col(x, layer)
        z = cols @ w.reshape(w.shape[0], -1).T + params[f"conv{n}.b"]
        z = z.reshape(x.shape[0], hw[0], hw[1], -1)
        y = np.maximum(z, 0.0)
        mask = None
        # channel dropout between the later conv layers, training only
        if rng is not None and config.dropout > 0 and 0 < n + 1 < n_layers and n_layers - n <= 3:
            keep = 1.0 - config.dropout
            mask = (rng.random((y.shape[0], 1, 1, y.shape[3])) < keep) / keep
            y = y * mask
        layers.append((x.shape, cols, hw, z, mask))
        x = y
    return x, layers


def _conv_backward(params: ModelParams, layers, dy: np.ndarray, grads) -> None:
    config = params.config
    for n in range(len(config.conv) - 1, -1, -1):
        layer = config.conv[n]
        x_shape, cols, hw, z, mask = layers[n]
        if mask is not None:
            dy = dy * mask
        dz = dy * (z > 0)
        dz2 = dz.reshape(-1, dz.shape[-1])
        w = params[f"conv{n}.w"]
        grads[f"conv{n}.w"] += (dz2.T @ cols).reshape(w.shape)
        grads[f"conv{n}.b"] += dz2.sum(axis=0)
        if n == 0:
            break
        dcols = dz2 @ w.reshape(w.shape[0], -1)
        dy = _col2im(dcols, x_shape, layer, hw)


# -- sequence forward / backward ------------------------------------------

def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class ForwardCache:
    config: ModelConfig
    conv_layers: list
    features: np.ndarray        # (T, n, C)
    feat_proj: np.ndarray       # (T, n, D)
    prior_pow: np.ndarray       # (T, n)
    log_prior: np.ndarray       # (T, n)
    steps: list
    states: np.ndarray          # (T, H)
    posteriors: np.ndarray


def forward_sequence(params: ModelParams, frames: np.ndarray, priors: np.ndarray,
                     rng: np.random.Generator | None = None):
    """Run the encoder over one sequence.

    Returns ``(posteriors, attention, cache)`` where ``posteriors`` is T x K,
    ``attention`` holds the posterior maps A_t as T x h x w, and ``cache``
    feeds ``backward_sequence``.  Pass ``rng`` to enable dropout.
    """
    config = params.config
    frames = np.asarray(frames, dtype=np.float64)
    T = frames.shape[0]
    grid = config.grid
    priors = np.asarray(priors, dtype=np.float64)
    if priors.shape != (T,) + grid:
        raise ValueError(f"priors of shape {priors.shape} do not match feature grid {(T,) + grid}")

    fmap, conv_layers = _conv_forward(params, frames, rng)
    features = fmap.reshape(T, grid[0] * grid[1], -1)
    feat_proj = features @ params["attn.W_f"].T
    log_prior = np.log(priors.reshape(T, -1))
    prior_pow = np.exp(params.alpha * log_prior)

    H = config.hidden
    W_d, u = params["attn.W_d"], params["attn.u"]
    W_x, W_h, b = params["lstm.W_x"], params["lstm.W_h"], params["lstm.b"]
    e = np.zeros(H)
    c = np.zeros(H)
    states = np.empty((T, H))
    attention = np.empty((T, grid[0] * grid[1]))
    steps = []
    for t in range(T):
        z = np.tanh(feat_proj[t] + W_d @ e)
        v = z @ u
        beta = np.exp(v - v.max())
        beta /= beta.sum()
        wts = beta * prior_pow[t]
        norm = wts.sum()
        # M^0 = 1, so skip the renormalisation that would only add rounding
        A = beta if params.alpha == 0 else wts / norm
        h = A @ features[t]
        gates = W_x @ h + W_h @ e + b
        i = _sigmoid(gates[:H])
        f = _sigmoid(gates[H:2 * H])
        o = _sigmoid(gates[2 * H:3 * H])
        g = np.tanh(gates[3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        e_new = o * tc
        if not (np.isfinite(e_new).all() and np.isfinite(A).all()):
            raise ModelNumericsError(t)
        steps.append((e, c, z, beta, wts, norm, A, h, i, f, o, g, tc))
        attention[t] = A
        states[t] = e_new
        e, c = e_new, c_new

    logits = states @ params["out.W"].T + params["out.b"]
    bad = ~np.isfinite(logits).all(axis=1)
    if bad.any():
        raise ModelNumericsError(int(np.argmax(bad)))
    posteriors = softmax(logits)
    cache = ForwardCache(config, conv_layers, features, feat_proj, prior_pow, log_prior,
                         steps, states, posteriors)
    return posteriors, attention.reshape((T,) + grid), cache


def backward_sequence(params: ModelParams, cache: ForwardCache, dlogits: np.ndarray):
    """Gradients of a scalar loss for every tensor in ``params``."""
    if cache.config != params.config:
        raise ValueError("cache was produced with a different model config")
    dlogits = np.asarray(dlogits, dtype=np.float64)
    T = len(cache.steps)
    if dlogits.shape != (T, params.config.num_labels):
        raise ValueError(f"dlogits shape {dlogits.shape} does not match cache ({T} frames)")
    config = params.config
    H = config.hidden
    grads = params.zeros_like()
    W_d, u = params["attn.W_d"], params["attn.u"]
    W_x, W_h = params["lstm.W_x"], params["lstm.W_h"]

    grads["out.W"] += dlogits.T @ cache.states
    grads["out.b"] += dlogits.sum(axis=0)
    dstates = dlogits @ params["out.W"]

    dfeat = np.zeros_like(cache.features)
    dproj = np.zeros_like(cache.feat_proj)
    dgates_all = np.empty((T, 4 * H))
    h_all = np.empty((T, cache.features.shape[2]))
    e_prev_all = np.empty((T, H))
    dWd = grads["attn.W_d"]
    du = grads["attn.u"]
    dalpha = 0.0
    de_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        e_prev, c_prev, z, beta, wts, norm, A, h, i, f, o, g, tc = cache.steps[t]
        de = dstates[t] + de_next
        do = de * tc
        dc = dc_next + de * o * (1.0 - tc * tc)
        dgates = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            do * o * (1.0 - o),
            dc * i * (1.0 - g * g),
        ])
        dc_next = dc * f
        dgates_all[t] = dgates
        h_all[t] = h
        e_prev_all[t] = e_prev
        dh = W_x.T @ dgates
        de_prev = W_h.T @ dgates

        feats = cache.features[t]
        dA = feats @ dh
        dfeat[t] += np.outer(A, dh)
        dw = (dA - dA @ A) / norm
        dalpha += float(np.sum(dw * wts * cache.log_prior[t]))
        dbeta = dw * cache.prior_pow[t]
        dv = beta * (dbeta - dbeta @ beta)
        du += z.T @ dv
        dpre = np.outer(dv, u) * (1.0 - z * z)
        dproj[t] = dpre
        da = dpre.sum(axis=0)
        dWd += np.outer(da, e_prev)
        de_next = de_prev + W_d.T @ da

    grads["lstm.W_x"] += dgates_all.T @ h_all
    grads["lstm.W_h"] += dgates_all.T @ e_prev_all
    grads["lstm.b"] += dgates_all.sum(axis=0)
    C = cache.features.shape[2]
    grads["attn.W_f"] += dproj.reshape(-1, dproj.shape[2]).T @ cache.features.reshape(-1, C)
    dfeat += dproj @ params["attn.W_f"]
    grads["alpha"] += dalpha

    gh, gw = config.grid
    _conv_backward(params, cache.conv_layers, dfeat.reshape(T, gh, gw, C), grads)
    return grads


def sgd_step(params: ModelParams, grads, lr: float, frozen: Sequence[str] = ("alpha",)) -> ModelParams:
    """``p - lr * g`` for every tensor not listed in ``frozen``."""
    new = params.copy()
    for name, g in grads.items():
        if name in frozen:
            continue
        if g.shape != new.tensors[name].shape:
            raise ValueError(f"gradient shape {g.shape} does not match {name} {new.tensors[name].shape}")
        new.tensors[name] = new.tensors[name] - lr * g
    return new


def sequence_loss(params: ModelParams, frames, priors, target) -> float:
    posteriors, _, _ = forward_sequence(params, frames, priors)
    return ctc_loss(posteriors, target)


def loss_and_grads(params: ModelParams, frames, priors, target, rng=None):
    posteriors, attention, cache = forward_sequence(params, frames, priors, rng)
    loss, dlogits = ctc_loss_and_grad(posteriors, target)
    return loss, backward_sequence(params, cache, dlogits)


def finite_diff_check(params: ModelParams, frames, priors, target, step: float = 1e-4,
                      corrupt: tuple[str, int] | None = None,
                      include: Sequence[str] | None = None) -> float:
    """Largest element-wise relative error between analytic and central-difference
    gradients of the end-to-end CTC loss.

    ``corrupt=(name, flat_index)`` perturbs one analytic entry, as a control
    that the check can fail.
    """
    _, grads = loss_and_grads(params, frames, priors, target)
    if corrupt is not None:
        name, idx = corrupt
        g = grads[name].reshape(-1)
        g[idx] = g[idx] + max(1.0, 10.0 * abs(g[idx]))
    worst = 0.0
    names = include if include is not None else params.names()
    for name in names:
        flat = params.tensors[name].reshape(-1)
        analytic = grads[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up = sequence_loss(params, frames, priors, target)
            flat[idx] = orig - step
            down = sequence_loss(params, frames, priors, target)
            flat[idx] = orig
            numeric = (up - down) / (2.0 * step)
            denom = max(abs(numeric) + abs(analytic[idx]), 1e-6)
            worst = max(worst, abs(numeric - analytic[idx]) / denom)
    return worst


# -- checkpoints ------------------------------------------------------------

def encode_checkpoint(params: ModelParams) -> bytes:
    header = {
        "config": params.config.to_dict(),
        "tensors": [[name, list(t.shape)] for name, t in params.tensors.items()],
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", len(head)), head]
    for t in params.tensors.values():
        parts.append(np.ascontiguousarray(t, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_checkpoint(data: bytes) -> ModelParams:
    if data[:5] != CHECKPOINT_MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    (n,) = struct.unpack("<I", data[5:9])
    header = json.loads(data[9:9 + n].decode("utf-8"))
    config = ModelConfig.from_dict(header["config"])
    pos = 9 + n
    tensors: OrderedDict[str, np.ndarray] = OrderedDict()
    for name, shape in header["tensors"]:
        count = int(np.prod(shape, dtype=np.int64))
        raw = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
        tensors[name] = raw.astype(np.float64).reshape(shape)
        pos += 4 * count
    if pos != len(data):
        raise ValueError("checkpoint has trailing or missing bytes")
    return ModelParams(config, tensors)


def save_checkpoint(path: str | Path, params: ModelParams) -> None:
    from .storage import atomic_write_bytes
    atomic_write_bytes(path, encode_checkpoint(params))


def load_checkpoint(path: str | Path) -> ModelParams:
    return decode_checkpoint(Path(path).read_bytes())


def round_to_float32(params: ModelParams) -> ModelParams:
    """Params as they come back from a checkpoint."""
    return ModelParams(params.config, OrderedDict(
        (k, v.astype(np.float32).astype(np.float64)) for k, v in params.tensors.items()))
