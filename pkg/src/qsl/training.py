"""Optimization, gradient checking, and checkpointing.

Training is bitwise deterministic given (seed, dataset, config): epoch
shuffles come from per-epoch keyed streams, batches are consecutive slices of
the permutation, and the gradient of a batch is a fixed-order reduction
inside vectorized array ops.  Checkpoints ("QSLW" files) persist parameters
and optimizer moments, so an interrupted run can resume at an epoch boundary
and land on the same trajectory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import recordio
from .autodiff import constant
from .network import Model, ModelConfig, build_model, loss_dfe, loss_qst
from .rng import stream

__all__ = [
    "TrainConfig",
    "AdamWState",
    "adamw_step",
    "train",
    "grad_check",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = b"QSLW"
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 32
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.99
    weight_decay: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("bad epochs or batch size")

    def to_dict(self):
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class AdamWState:
    def __init__(self, params: dict):
        self.step = 0
        self.m = {name: np.zeros_like(t.values) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.values) for name, t in params.items()}


def adamw_step(params: dict, state: AdamWState, cfg: TrainConfig) -> None:
    """One bias-corrected AdamW update with decoupled weight decay.

    Parameters without an accumulated gradient this step are treated as
    having zero gradient.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - cfg.beta1**t
    c2 = 1.0 - cfg.beta2**t
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.values)
        if g.shape != p.values.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
        p.values -= cfg.lr * (update + cfg.weight_decay * p.values)


def _loss_fn(task: str):
    return loss_qst if task == "qst" else loss_dfe


def train(
    model: Model,
    train_x: np.ndarray,
    train_y: np.ndarray,
    cfg: TrainConfig,
    test_x=None,
    test_y=None,
    state: AdamWState | None = None,
    start_epoch: int = 0,
    epoch_callback=None,
):
    """Minimize the mean per-sample loss for cfg.epochs epochs.

    Returns (metrics, state) where metrics is one row per completed epoch
    with train_loss (mean over the epoch's samples) and test_loss.  The
    optional callback receives (epoch, row, model, state) after each epoch;
    its extra returned keys are merged into the row.
    """
    loss_fn = _loss_fn(model.cfg.task)
    n = train_x.shape[0]
    if train_y.shape[0] != n:
        raise ValueError("feature/label count mismatch")
    if state is None:
        state = AdamWState(model.params)
    metrics = []
    for epoch in range(start_epoch, cfg.epochs):
        perm = stream(cfg.seed, "shuffle", epoch).permutation(n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            pred = model.forward(constant(train_x[idx]))
            loss = loss_fn(pred, constant(train_y[idx]))
            for p in model.params.values():
                p.zero_grad()
            loss.backward()
            adamw_step(model.params, state, cfg)
            total += loss.item() * idx.shape[0]
        row = {"epoch": epoch + 1, "train_loss": total / n}
        if test_x is not None:
            pred = model.forward(constant(test_x))
            row["test_loss"] = loss_fn(pred, constant(test_y)).item()
        if epoch_callback is not None:
            extra = epoch_callback(epoch + 1, row, model, state)
            if extra:
                row.update(extra)
        metrics.append(row)
    return metrics, state


def grad_check(model: Model, probe_x, probe_y, n_coords: int = 200, h: float = 1e-6, seed: int = 0):
    """Max relative error between analytic and central-difference gradients.

    Coordinates are sampled across all parameters; coordinates where both
    gradients sit below the finite-difference noise floor count as exact.
    The step is small enough that a probe rarely straddles a ReLU kink yet
    sits far above the float64 roundoff floor for these loss scales.
    """
    loss_fn = _loss_fn(model.cfg.task)
    probe_x = np.asarray(probe_x, dtype=np.float64)
    probe_y = np.asarray(probe_y, dtype=np.float64)

    def loss_value():
        return loss_fn(model.forward(constant(probe_x)), constant(probe_y)).item()

    for p in model.params.values():
        p.zero_grad()
    loss = loss_fn(model.forward(constant(probe_x)), constant(probe_y))
    loss.backward()
    names = list(model.params)
    sizes = np.array([model.params[nm].values.size for nm in names])
    cum = np.cumsum(sizes)
    rng = stream(seed, "grad-check")
    coords = rng.choice(int(cum[-1]), size=min(n_coords, int(cum[-1])), replace=False)
    worst = 0.0
    report = []
    for c in np.sort(coords):
        k = int(np.searchsorted(cum, c, side="right"))
        offset = int(c - (cum[k - 1] if k else 0))
        p = model.params[names[k]]
        flat = p.values.ravel()
        orig = flat[offset]
        flat[offset] = orig + h
        up = loss_value()
        flat[offset] = orig - h
        dn = loss_value()
        flat[offset] = orig
        fd = (up - dn) / (2 * h)
        an = float(p.grad.ravel()[offset]) if p.grad is not None else 0.0
        scale = max(abs(fd), abs(an))
        err = 0.0 if scale < 1e-7 else abs(fd - an) / scale
        worst = max(worst, err)
        report.append((names[k], offset, an, fd, err))
    return worst, report


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, model: Model, train_cfg: TrainConfig, state: AdamWState, epoch: int):
    names = list(model.params)
    header = {
        "model": model.cfg.to_dict(),
        "train": train_cfg.to_dict(),
        "step": state.step,
        "epoch": epoch,
        "params": [[nm, list(model.params[nm].values.shape)] for nm in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        recordio.write_header(fh, CHECKPOINT_MAGIC, 3 * len(names) + 1)
        recordio.write_record(fh, blob)
        for nm in names:
            recordio.write_record(fh, recordio.f64_bytes(model.params[nm].values))
        for nm in names:
            recordio.write_record(fh, recordio.f64_bytes(state.m[nm]))
        for nm in names:
            recordio.write_record(fh, recordio.f64_bytes(state.v[nm]))


def load_checkpoint(path):
    """Rebuild (model, train_cfg, state, epoch) from a checkpoint file."""
    with open(path, "rb") as fh:
        count = recordio.read_header(fh, CHECKPOINT_MAGIC)
        header = json.loads(recordio.read_record(fh).decode("utf-8"))
        cfg = ModelConfig.from_dict(header["model"])
        train_cfg = TrainConfig.from_dict(header["train"])
        model = build_model(cfg, seed=0)
        names = [nm for nm, _ in header["params"]]
        shapes = {nm: tuple(shape) for nm, shape in header["params"]}
        if set(names) != set(model.params) or count != 3 * len(names) + 1:
            raise ValueError("checkpoint does not match the model architecture")
        for nm in names:
            model.params[nm].values = recordio.f64_array(recordio.read_record(fh), shapes[nm])
        state = AdamWState(model.params)
        state.step = int(header["step"])
        for nm in names:
            state.m[nm] = recordio.f64_array(recordio.read_record(fh), shapes[nm])
        for nm in names:
            state.v[nm] = recordio.f64_array(recordio.read_record(fh), shapes[nm])
    return model, train_cfg, state, int(header["epoch"])
