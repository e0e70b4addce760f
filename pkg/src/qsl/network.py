"""Attention models for state reconstruction and fidelity regression.

Both tasks share the same trunk: a per-token input projection plus a learned
positional embedding, then a stack of post-norm attention blocks
(self-attention with residual then layer norm, then a two-layer feed-forward
with residual and layer norm), and a task-specific head.  The positional
embedding is load-bearing: attention is permutation-equivariant, and without
it a token cannot know which matrix entry (or which qubit) it carries, which
empirically caps state reconstruction near the mean-state baseline.

The reconstruction head projects tokens back to two channels, assembles a
lower-triangular complex factor T, and emits T T^dag / Tr(T T^dag), which is
Hermitian, positive semidefinite, and trace-1 by construction.  The
regression head applies one more projection, mean-pools over tokens, and
maps to a scalar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DegenerateFactorError
from .rng import stream

__all__ = [
    "ModelConfig",
    "Model",
    "build_model",
    "attention_block",
    "cholesky_head",
    "loss_qst",
    "loss_dfe",
]

TOKEN_DIM = {"full": 10, "noise_only": 2, "shadow_only": 8}


@dataclass(frozen=True)
class ModelConfig:
    task: str  # "qst" | "dfe"
    n_qubits: int
    token_dim: int
    hidden: int = 32
    blocks: int = 3
    heads: int = 1
    activation: str = "relu"

    def __post_init__(self):
        if self.task not in ("qst", "dfe"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.hidden % self.heads != 0:
            raise ValueError("hidden width must be divisible by the head count")
        if self.activation not in ("relu", "leaky_relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.task == "qst" and self.token_dim != 2:
            raise ValueError("reconstruction tokens have 2 channels")

    def to_dict(self):
        return {
            "task": self.task,
            "n_qubits": self.n_qubits,
            "token_dim": self.token_dim,
            "hidden": self.hidden,
            "blocks": self.blocks,
            "heads": self.heads,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def _swap_last2(t: Tensor) -> Tensor:
    axes = list(range(t.values.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return ad.transpose(t, axes)


def attention_block(tokens: Tensor, p: dict, prefix: str, heads: int, activation) -> Tensor:
    """Post-norm attention block on (B, S, hidden) tokens."""
    hid = tokens.values.shape[-1]
    q = tokens @ p[f"{prefix}.wq"]
    k = tokens @ p[f"{prefix}.wk"]
    v = tokens @ p[f"{prefix}.wv"]
    if heads == 1:
        scores = (q @ _swap_last2(k)) * ad.constant(1.0 / np.sqrt(hid))
        z = ad.softmax(scores) @ v
    else:
        b, s = tokens.values.shape[0], tokens.values.shape[1]
        hd = hid // heads
        def split(t):
            return ad.transpose(ad.reshape(t, (b, s, heads, hd)), (0, 2, 1, 3))
        qh, kh, vh = split(q), split(k), split(v)
        scores = (qh @ _swap_last2(kh)) * ad.constant(1.0 / np.sqrt(hd))
        zh = ad.softmax(scores) @ vh
        z = ad.reshape(ad.transpose(zh, (0, 2, 1, 3)), (b, s, hid))
    z = z @ p[f"{prefix}.wo"]
    y = ad.layer_norm(tokens + z) * p[f"{prefix}.ln1.g"] + p[f"{prefix}.ln1.b"]
    f = activation(y @ p[f"{prefix}.ff1.w"] + p[f"{prefix}.ff1.b"])
    f = f @ p[f"{prefix}.ff2.w"] + p[f"{prefix}.ff2.b"]
    return ad.layer_norm(y + f) * p[f"{prefix}.ln2.g"] + p[f"{prefix}.ln2.b"]


def cholesky_head(raw: Tensor) -> Tensor:
    """Forge (..., d, d, 2) channels into a physical density matrix.

    The real plane fills the lower triangle including the diagonal; the
    imaginary plane fills the strict lower triangle; strictly-upper entries
    of both planes are ignored.  Output planes are Re and Im of
    T T^dag / Tr(T T^dag).
    """
    if raw.values.ndim == 3:
        raw = ad.reshape(raw, (1,) + raw.values.shape)
        squeeze = True
    else:
        squeeze = False
    d = raw.values.shape[-2]
    if raw.values.shape[-3] != d or raw.values.shape[-1] != 2:
        raise ValueError("expected (..., d, d, 2) input")
    lower = ad.constant(np.tril(np.ones((d, d))))
    strict = ad.constant(np.tril(np.ones((d, d)), k=-1))
    t_re = raw[..., 0] * lower
    t_im = raw[..., 1] * strict
    gram_re = t_re @ _swap_last2(t_re) + t_im @ _swap_last2(t_im)
    gram_im = t_im @ _swap_last2(t_re) - t_re @ _swap_last2(t_im)
    eye = ad.constant(np.eye(d))
    tr = ad.sum_(gram_re * eye, axis=(-2, -1), keepdims=True)
    if np.any(tr.values == 0.0):
        raise DegenerateFactorError("factor T has zero trace norm")
    out_re = ad.reshape(gram_re / tr, gram_re.values.shape + (1,))
    out_im = ad.reshape(gram_im / tr, gram_im.values.shape + (1,))
    out = ad.concat([out_re, out_im], axis=-1)
    if squeeze:
        out = ad.reshape(out, out.values.shape[1:])
    return out


class Model:
    """Parameterized network; forward maps a feature batch to predictions."""

    def __init__(self, cfg: ModelConfig, params: dict):
        self.cfg = cfg
        self.params = params

    def _activation(self):
        return ad.relu if self.cfg.activation == "relu" else ad.leaky_relu

    def _trunk(self, x: Tensor) -> Tensor:
        h = x @ self.params["in.w"] + self.params["in.b"] + self.params["pos"]
        for i in range(self.cfg.blocks):
            h = attention_block(h, self.params, f"blk{i}", self.cfg.heads, self._activation())
        return h

    def forward(self, x: Tensor) -> Tensor:
        if not isinstance(x, Tensor):
            x = ad.constant(x)
        if self.cfg.task == "qst":
            return self._forward_qst(x)
        return self._forward_dfe(x)

    def _forward_qst(self, x: Tensor) -> Tensor:
        # tokens are the 4^n matrix entries with (Re, Im) channels, row-major
        d = 2**self.cfg.n_qubits
        single = x.values.ndim == 2
        if single:
            x = ad.reshape(x, (1,) + x.values.shape)
        b = x.values.shape[0]
        h = self._trunk(x)
        raw = h @ self.params["out.w"] + self.params["out.b"]
        raw = ad.reshape(raw, (b, d, d, 2))
        out = cholesky_head(raw)
        if single:
            out = ad.reshape(out, (d, d, 2))
        return out

    def _forward_dfe(self, x: Tensor) -> Tensor:
        single = x.values.ndim == 2
        if single:
            x = ad.reshape(x, (1,) + x.values.shape)
        h = self._trunk(x)
        h = h @ self.params["mid.w"] + self.params["mid.b"]
        pooled = ad.mean(h, axis=1)
        out = pooled @ self.params["out.w"] + self.params["out.b"]
        out = ad.reshape(out, (out.values.shape[0],))
        if single:
            out = ad.reshape(out, ())
        return out

    def param_items(self):
        return list(self.params.items())

    def n_params(self) -> int:
        return sum(t.values.size for t in self.params.values())


def build_model(cfg: ModelConfig, seed: int) -> Model:
    """Deterministically initialized model; weights use the Glorot-uniform rule."""
    rng = stream(seed, "model-init")
    params: dict = {}

    def weight(name, fan_in, fan_out):
        params[name] = ad.parameter(_glorot(rng, fan_in, fan_out))

    def bias(name, dim):
        params[name] = ad.parameter(np.zeros(dim))

    def ln(name, dim):
        params[f"{name}.g"] = ad.parameter(np.ones(dim))
        params[f"{name}.b"] = ad.parameter(np.zeros(dim))

    hid = cfg.hidden
    n_tokens = 4**cfg.n_qubits if cfg.task == "qst" else cfg.n_qubits
    weight("in.w", cfg.token_dim, hid)
    bias("in.b", hid)
    params["pos"] = ad.parameter(rng.uniform(-0.1, 0.1, size=(n_tokens, hid)))
    for i in range(cfg.blocks):
        for nm in ("wq", "wk", "wv", "wo"):
            weight(f"blk{i}.{nm}", hid, hid)
        ln(f"blk{i}.ln1", hid)
        weight(f"blk{i}.ff1.w", hid, 2 * hid)
        bias(f"blk{i}.ff1.b", 2 * hid)
        weight(f"blk{i}.ff2.w", 2 * hid, hid)
        bias(f"blk{i}.ff2.b", hid)
        ln(f"blk{i}.ln2", hid)
    if cfg.task == "qst":
        weight("out.w", hid, 2)
        bias("out.b", 2)
    else:
        weight("mid.w", hid, hid)
        bias("mid.b", hid)
        weight("out.w", hid, 1)
        bias("out.b", 1)
    return Model(cfg, params)


def loss_qst(pred: Tensor, label) -> Tensor:
    """Mean over the batch of the squared Frobenius reconstruction error."""
    label = label if isinstance(label, Tensor) else ad.constant(label)
    if pred.values.shape != label.values.shape:
        raise ValueError(f"shape mismatch {pred.values.shape} vs {label.values.shape}")
    diff = pred - label
    batch = pred.values.shape[0] if pred.values.ndim == 4 else 1
    return ad.sum_(diff * diff) * ad.constant(1.0 / batch)


def loss_dfe(pred: Tensor, label) -> Tensor:
    """Mean squared error of scalar fidelity predictions."""
    label = label if isinstance(label, Tensor) else ad.constant(label)
    if pred.values.shape != label.values.shape:
        raise ValueError(f"shape mismatch {pred.values.shape} vs {label.values.shape}")
    diff = pred - label
    batch = pred.values.size
    return ad.sum_(diff * diff) * ad.constant(1.0 / batch)
