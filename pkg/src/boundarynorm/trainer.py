"""Mini-batch SGD with momentum, weight decay, and seeded shuffling.

Defaults mirror the experimental setup the objectives were designed around:
momentum 0.9, weight decay 5e-4, batch size 128, initial learning rate 0.1,
cosine decay. Training is bit-deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .model import LayerParams, ModelParams
from .objectives import LossKind, evaluate_loss
from .rng import make_rng

SCHEDULES = ("cosine", "step", "constant")


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")


@dataclass(frozen=True)
class TrainConfig:
    loss: LossKind
    epochs: int
    batch_size: int = 128
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    schedule: str = "cosine"
    seed: int = 0
    detach_scale: bool = False

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.schedule not in SCHEDULES:
            raise ValueError(
                f"unknown schedule {self.schedule!r}; valid: {', '.join(SCHEDULES)}"
            )


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    val_acc: float
    lr: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("epoch,loss,val_acc,lr\n")
            for r in self.records:
                fh.write(f"{r.epoch},{r.loss!r},{r.val_acc!r},{r.lr!r}\n")


def lr_at(cfg: TrainConfig, epoch: int) -> float:
    """Learning rate for a given epoch index.

    cosine: lr * 0.5 * (1 + cos(pi * epoch / epochs));
    step: lr * 0.1^floor(3 * epoch / epochs); constant: lr.
    """
    if epoch >= cfg.epochs or epoch < 0:
        raise ValueError(f"epoch {epoch} outside [0, {cfg.epochs})")
    if cfg.schedule == "cosine":
        return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * epoch / cfg.epochs))
    if cfg.schedule == "step":
        return cfg.lr * 0.1 ** (3 * epoch // cfg.epochs)
    return cfg.lr


class _ParamState:
    """Mutable parameter and velocity buffers for the update loop."""

    def __init__(self, model: ModelParams):
        self.hidden = [(l.weight.copy(), l.bias.copy()) for l in model.hidden]
        self.final_weight = model.final_weight.copy()
        self.final_bias = model.final_bias.copy()
        self.v_hidden = [
            (np.zeros_like(w), np.zeros_like(b)) for w, b in self.hidden
        ]
        self.v_final_weight = np.zeros_like(self.final_weight)
        self.v_final_bias = np.zeros_like(self.final_bias)

    def to_model(self) -> ModelParams:
        return ModelParams(
            hidden=tuple(LayerParams(weight=w, bias=b) for w, b in self.hidden),
            final_weight=self.final_weight,
            final_bias=self.final_bias,
        )

    def step(self, grads, lr: float, momentum: float, weight_decay: float) -> None:
        # L2 decay added to weight gradients only; velocity-form momentum.
        for (w, b), (vw, vb), (gw, gb) in zip(self.hidden, self.v_hidden, grads.hidden):
            gw = gw + weight_decay * w
            vw *= momentum
            vw += gw
            vb *= momentum
            vb += gb
            w -= lr * vw
            b -= lr * vb
        gw = grads.final_weight + weight_decay * self.final_weight
        self.v_final_weight *= momentum
        self.v_final_weight += gw
        self.v_final_bias *= momentum
        self.v_final_bias += grads.final_bias
        self.final_weight -= lr * self.v_final_weight
        self.final_bias -= lr * self.v_final_bias

    def all_finite(self) -> bool:
        tensors = [self.final_weight, self.final_bias]
        for w, b in self.hidden:
            tensors += [w, b]
        return all(np.all(np.isfinite(t)) for t in tensors)


def _accuracy(model: ModelParams, data: Dataset) -> float:
    from .model import forward

    logits = forward(model, data.inputs).logits
    return float(np.mean(np.argmax(logits, axis=1) == data.labels))


def train(
    model: ModelParams,
    data: Dataset,
    cfg: TrainConfig,
    val_data: Dataset | None = None,
) -> tuple[ModelParams, TrainLog]:
    """Run the full schedule and return final parameters plus the epoch log.

    Shuffling, batching, and all loss evaluations are seeded/deterministic;
    a non-finite loss or parameter aborts with the offending epoch index.
    """
    if data.n_samples < 1:
        raise ValueError("training data is empty")
    state = _ParamState(model)
    log = TrainLog()
    rng = make_rng(cfg.seed)
    n = data.n_samples
    for epoch in range(cfg.epochs):
        lr = lr_at(cfg, epoch)
        perm = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            current = state.to_model()
            result = evaluate_loss(
                current,
                data.inputs[idx],
                data.labels[idx],
                cfg.loss,
                detach_scale=cfg.detach_scale,
            )
            if not math.isfinite(result.value):
                raise TrainingDivergedError(epoch)
            total_loss += result.value * len(idx)
            state.step(result.grads, lr, cfg.momentum, cfg.weight_decay)
            if not state.all_finite():
                raise TrainingDivergedError(epoch)
        final = state.to_model()
        val_acc = _accuracy(final, val_data if val_data is not None else data)
        log.records.append(
            EpochRecord(epoch=epoch, loss=total_loss / n, val_acc=val_acc, lr=lr)
        )
    return state.to_model(), log
