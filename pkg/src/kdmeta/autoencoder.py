"""Dense CSI feedback autoencoder with a uniform quantized bottleneck.

The encoder maps the real/imag split of ``W`` to ``B / B_q`` latent values
squashed into (-1, 1); each value is quantized to ``2**B_q`` mid-rise levels
and the level indices form the ``B``-bit feedback word. The decoder mirrors
the encoder and its output columns are normalized per subband. Training
minimizes ``-SGCS`` on the pre-normalization decoder output, with the
quantizer passed straight through in the backward pass.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import RngStream, normalize_columns

ACTIVATIONS = ("tanh", "relu")


@dataclass(frozen=True)
class ModelConfig:
    n_t: int
    n_sb: int
    hidden: tuple[int, ...] = (256, 128)
    bits: int = 64
    bits_per_dim: int = 2
    activation: str = "tanh"

    def __post_init__(self):
        if self.bits_per_dim < 1 or self.bits % self.bits_per_dim:
            raise ValueError(f"B={self.bits} is not divisible by B_q={self.bits_per_dim}")
        if self.latent_dim < 1:
            raise ValueError("latent dimension must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.n_t < 1 or self.n_sb < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("layer sizes must be positive")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def input_dim(self) -> int:
        return 2 * self.n_t * self.n_sb

    @property
    def latent_dim(self) -> int:
        return self.bits // self.bits_per_dim

    @property
    def levels(self) -> int:
        return 2**self.bits_per_dim

    def layer_sizes(self) -> list[tuple[str, int, int]]:
        """``(prefix, fan_in, fan_out)`` for every dense layer, encoder first."""
        enc = [self.input_dim, *self.hidden, self.latent_dim]
        dec = enc[::-1]
        return [(f"enc.{i}", a, b) for i, (a, b) in enumerate(zip(enc, enc[1:]))] + [
            (f"dec.{i}", a, b) for i, (a, b) in enumerate(zip(dec, dec[1:]))
        ]


@dataclass
class ModelParams:
    config: ModelConfig
    arrays: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def names(self) -> list[str]:
        return list(self.arrays)

    def n_params(self) -> int:
        return sum(v.size for v in self.arrays.values())

    def equal(self, other: "ModelParams") -> bool:
        """Bitwise equality of every array."""
        return self.arrays.keys() == other.arrays.keys() and all(
            np.array_equal(self.arrays[k], other.arrays[k]) for k in self.arrays
        )


def init_params(cfg: ModelConfig, rng: RngStream | np.random.Generator) -> ModelParams:
    """Glorot-normal weights, zero biases."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    arrays = {}
    for prefix, fan_in, fan_out in cfg.layer_sizes():
        arrays[f"{prefix}.w"] = gen.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / (fan_in + fan_out))
        arrays[f"{prefix}.b"] = np.zeros(fan_out)
    return ModelParams(cfg, arrays)


# -- quantizer ---------------------------------------------------------------


def quantize_index(x: np.ndarray, bits_per_dim: int) -> np.ndarray:
    levels = 2**bits_per_dim
    return np.clip(np.floor((np.asarray(x) + 1.0) * 0.5 * levels), 0, levels - 1).astype(np.int64)


def dequantize(idx: np.ndarray, bits_per_dim: int) -> np.ndarray:
    levels = 2**bits_per_dim
    return -1.0 + (2.0 * np.asarray(idx, dtype=np.float64) + 1.0) / levels


def quantize(x: np.ndarray, bits_per_dim: int) -> np.ndarray:
    return dequantize(quantize_index(x, bits_per_dim), bits_per_dim)


def indices_to_bits(idx: np.ndarray, bits_per_dim: int) -> np.ndarray:
    """Level indices (..., latent) -> bits (..., latent * B_q), MSB first."""
    shifts = np.arange(bits_per_dim - 1, -1, -1)
    bits = (idx[..., None] >> shifts) & 1
    return bits.reshape(*idx.shape[:-1], -1).astype(np.uint8)


def bits_to_indices(bits: np.ndarray, bits_per_dim: int) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64)
    b = b.reshape(*b.shape[:-1], -1, bits_per_dim)
    weights = 1 << np.arange(bits_per_dim - 1, -1, -1)
    return (b * weights).sum(axis=-1)


# -- network -----------------------------------------------------------------


def flatten_csi(w: np.ndarray) -> np.ndarray:
    """(B, N_t, N_sb) complex -> (B, 2 N_t N_sb) real, real parts first."""
    b = w.shape[0]
    return np.concatenate([w.real.reshape(b, -1), w.imag.reshape(b, -1)], axis=1)


def unflatten_csi(y: np.ndarray, n_t: int, n_sb: int) -> np.ndarray:
    half = n_t * n_sb
    return (y[:, :half] + 1j * y[:, half:]).reshape(-1, n_t, n_sb)


def _act(cfg: ModelConfig, a: np.ndarray) -> np.ndarray:
    return np.tanh(a) if cfg.activation == "tanh" else np.maximum(a, 0.0)


def _act_grad(cfg: ModelConfig, a: np.ndarray, h: np.ndarray) -> np.ndarray:
    return 1.0 - h * h if cfg.activation == "tanh" else (a > 0).astype(np.float64)


def _dense_stack(params: ModelParams, prefix: str, x: np.ndarray, last_act: str | None):
    cfg = params.config
    n_layers = len(cfg.hidden) + 1
    cache = []
    h = x
    for i in range(n_layers):
        a = h @ params.arrays[f"{prefix}.{i}.w"] + params.arrays[f"{prefix}.{i}.b"]
        if i < n_layers - 1:
            out = _act(cfg, a)
        elif last_act == "tanh":
            out = np.tanh(a)
        else:
            out = a
        cache.append((h, a, out))
        h = out
    return h, cache


def _encode_latent(params: ModelParams, x: np.ndarray):
    return _dense_stack(params, "enc", x, "tanh")


def _decode_output(params: ModelParams, z: np.ndarray):
    return _dense_stack(params, "dec", z, None)


def _as_batch(w) -> tuple[np.ndarray, bool]:
    w = np.asarray(w, dtype=np.complex128)
    if w.ndim == 2:
        return w[None], True
    return w, False


def encode(params: ModelParams, w) -> tuple[np.ndarray, np.ndarray]:
    """Feedback bits and the continuous latent for one CSI matrix or a stack."""
    cfg = params.config
    wb, single = _as_batch(w)
    if wb.shape[1:] != (cfg.n_t, cfg.n_sb):
        raise ValueError(f"expected CSI of shape ({cfg.n_t}, {cfg.n_sb}), got {wb.shape[1:]}")
    latent, _ = _encode_latent(params, flatten_csi(wb))
    bits = indices_to_bits(quantize_index(latent, cfg.bits_per_dim), cfg.bits_per_dim)
    return (bits[0], latent[0]) if single else (bits, latent)


def decode(params: ModelParams, bits) -> np.ndarray:
    """Recovered CSI with unit-norm columns from a ``B``-bit word (or a stack)."""
    cfg = params.config
    b = np.asarray(bits)
    single = b.ndim == 1
    if single:
        b = b[None]
    if b.shape[-1] != cfg.bits:
        raise ValueError(f"expected {cfg.bits} bits, got {b.shape[-1]}")
    if np.any((b != 0) & (b != 1)):
        raise ValueError("bits must be 0 or 1")
    z = dequantize(bits_to_indices(b, cfg.bits_per_dim), cfg.bits_per_dim)
    y, _ = _decode_output(params, z)
    w = normalize_columns(unflatten_csi(y, cfg.n_t, cfg.n_sb))
    return w[0] if single else w


def reconstruct(params: ModelParams, w, quantized: bool = True) -> np.ndarray:
    """Column-normalized autoencoder output for a stack of CSI matrices."""
    cfg = params.config
    wb, single = _as_batch(w)
    latent, _ = _encode_latent(params, flatten_csi(wb))
    z = quantize(latent, cfg.bits_per_dim) if quantized else latent
    y, _ = _decode_output(params, z)
    out = normalize_columns(unflatten_csi(y, cfg.n_t, cfg.n_sb))
    return out[0] if single else out


def _backprop(params, cache, grad_out, prefix, grads, last_act):
    cfg = params.config
    n_layers = len(cache)
    g = grad_out
    for i in range(n_layers - 1, -1, -1):
        h_in, a, out = cache[i]
        if i < n_layers - 1:
            g = g * _act_grad(cfg, a, out)
        elif last_act == "tanh":
            g = g * (1.0 - out * out)
        grads[f"{prefix}.{i}.w"] = h_in.T @ g
        grads[f"{prefix}.{i}.b"] = g.sum(axis=0)
        g = g @ params.arrays[f"{prefix}.{i}.w"].T
    return g


def loss_and_grad(params: ModelParams, batch, quantized: bool = True) -> tuple[float, dict[str, np.ndarray]]:
    """``-mean SGCS`` over the batch and its exact gradient.

    With ``quantized=False`` the bottleneck is the identity, which makes the
    loss differentiable everywhere (used for finite-difference checks).
    """
    cfg = params.config
    w = np.ascontiguousarray(np.asarray(batch, dtype=np.complex128))
    if w.ndim != 3 or w.shape[0] == 0:
        raise ValueError("batch must be a nonempty (B, N_t, N_sb) stack")
    n = w.shape[0]
    latent, enc_cache = _encode_latent(params, flatten_csi(w))
    z = quantize(latent, cfg.bits_per_dim) if quantized else latent
    y, dec_cache = _decode_output(params, z)
    w_hat = np.ascontiguousarray(unflatten_csi(y, cfg.n_t, cfg.n_sb))
    vals, g_hat = kernels.sgcs_grad(w, w_hat)
    loss = -float(vals.mean())
    g = -g_hat.reshape(n, -1) / n
    grad_y = np.concatenate([g.real, g.imag], axis=1)
    grads: dict[str, np.ndarray] = {}
    grad_z = _backprop(params, dec_cache, grad_y, "dec", grads, None)
    _backprop(params, enc_cache, grad_z, "enc", grads, "tanh")  # straight-through
    return loss, {k: grads[k] for k in params.arrays}


def evaluate_sgcs(params: ModelParams, data, quantized: bool = True, chunk: int = 4096) -> np.ndarray:
    """Per-sample SGCS between ``data`` and its reconstruction."""
    data = np.asarray(data)
    out = []
    for s in range(0, data.shape[0], chunk):
        w = np.ascontiguousarray(data[s : s + chunk])
        w_hat = np.ascontiguousarray(reconstruct(params, w, quantized))
        out.append(kernels.sgcs_columns(w, w_hat).mean(axis=1))
    return np.concatenate(out) if out else np.zeros(0)


# -- optimizer ---------------------------------------------------------------


@dataclass
class TrainState:
    """Parameters plus Adam moments and the sampling generator for batches."""

    params: ModelParams
    rng: np.random.Generator
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for k, arr in self.params.arrays.items():
            self.m.setdefault(k, np.zeros_like(arr))
            self.v.setdefault(k, np.zeros_like(arr))

    def clone(self) -> "TrainState":
        return TrainState(
            params=self.params.copy(),
            rng=copy.deepcopy(self.rng),
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_eps=self.adam_eps,
            step=self.step,
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
        )


def adam_update(state: TrainState, grads: dict[str, np.ndarray]) -> None:
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for k, g in grads.items():
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        state.params.arrays[k] -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.adam_eps)


def train_steps(
    state: TrainState, data, g: int, batch_size: int = 32, losses: list | None = None
) -> TrainState:
    """``g`` Adam steps on minibatches drawn without replacement from ``data``.

    Returns a new state; ``state`` is left untouched. Per-step training
    losses are appended to ``losses`` when given.
    """
    if g < 0:
        raise ValueError(f"step count must be >= 0, got {g}")
    out = state.clone()
    if g == 0:
        return out
    data = np.asarray(data)
    n = data.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    size = min(batch_size, n)
    for _ in range(g):
        idx = out.rng.choice(n, size=size, replace=False)
        loss, grads = loss_and_grad(out.params, data[idx])
        adam_update(out, grads)
        if losses is not None:
            losses.append(loss)
    return out
