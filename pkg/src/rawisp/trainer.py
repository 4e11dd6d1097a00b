"""End-to-end optimization of the ISP model under a frozen guidance model.

Default recipe: Adam, 15 epochs, batch 8, learning rate 1e-2 dropped to
1e-3 at epoch 5 and 1e-4 at epoch 10, with brightness/contrast augmentation
on the linear image.  Training is fully deterministic for a fixed seed,
config and dataset order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .tensor import Tensor
from .pipeline import BayerFrame, preprocess
from .model import IspModel
from .losses import GuidanceModel, LossWeights, gray_world_loss
from .metrics import Box


class TrainingError(RuntimeError):
    pass


@dataclass
class AugmentConfig:
    brightness: float = 0.1   # additive shift drawn from [-b, b]
    contrast: float = 0.2     # scale drawn from [1-c, 1+c]


@dataclass
class TrainConfig:
    epochs: int = 15
    batch_size: int = 8
    lr_schedule: Sequence[Tuple[int, float]] = ((0, 1e-2), (5, 1e-3), (10, 1e-4))
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    loss_weights: LossWeights = field(default_factory=LossWeights)
    use_convwb: bool = True
    use_convcc: bool = True
    use_cst: bool = True
    grad_clip: Optional[float] = None   # global-norm clip; off by default

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        sched = sorted(self.lr_schedule)
        lrs = [lr for _, lr in sched]
        if any(lr < 0 for lr in lrs):
            raise ValueError("learning rates must be non-negative")
        if any(b > a for a, b in zip(lrs, lrs[1:])):
            raise ValueError("lr schedule must be non-increasing")
        self.lr_schedule = tuple(sched)

    def lr_at(self, epoch: int) -> float:
        lr = self.lr_schedule[0][1]
        for start, value in self.lr_schedule:
            if epoch >= start:
                lr = value
        return lr


class Adam:
    """Standard Adam with bias correction over a named parameter dict."""

    def __init__(self, params: dict, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.b1, self.b2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.items()}

    def step(self, lr: float):
        self.step_count += 1
        t = self.step_count
        for name in self.params:
            p = self.params[name]
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"NaN/inf gradient in parameter {name!r}")
            self.m[name] = self.b1 * self.m[name] + (1 - self.b1) * g
            self.v[name] = self.b2 * self.v[name] + (1 - self.b2) * g * g
            mhat = self.m[name] / (1 - self.b1 ** t)
            vhat = self.v[name] / (1 - self.b2 ** t)
            p.data = p.data - lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


def augment_brightness_contrast(img: np.ndarray, rng: np.random.Generator,
                                cfg: AugmentConfig) -> np.ndarray:
    """contrast * (img - mean) + mean + brightness, clamped at zero below."""
    contrast = rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast)
    brightness = rng.uniform(-cfg.brightness, cfg.brightness)
    mean = img.mean()
    out = contrast * (img - mean) + mean + brightness
    return np.maximum(out, 0.0)


def clip_grads(params: dict, max_norm: float):
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad = p.grad * scale


def train(dataset: List[Tuple[BayerFrame, List[Box]]],
          guidance: Optional[GuidanceModel], cfg: TrainConfig,
          model: Optional[IspModel] = None):
    """Train the ISP model; returns (model, epoch_log, step_log).

    ``guidance`` may be None, in which case the detection terms are zero and
    only the gray-world objective drives training.
    """
    if not dataset:
        raise TrainingError("dataset is empty")
    if model is None:
        model = IspModel(seed=cfg.seed)
    params = model.parameters()
    opt = Adam(params, betas=cfg.betas, eps=cfg.eps)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xA06]))

    # pre-processing is deterministic per frame; do it once up front
    prepped = [(preprocess(frame, use_cst=cfg.use_cst), boxes)
               for frame, boxes in dataset]

    epoch_log, step_log = [], []
    step = 0
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        sums = {"total": 0.0, "cls": 0.0, "reg": 0.0, "wb": 0.0}
        n_batches = 0
        for start in range(0, len(prepped), cfg.batch_size):
            batch = prepped[start:start + cfg.batch_size]
            opt.zero_grad()
            total = None
            comps = {"cls": 0.0, "reg": 0.0, "wb": 0.0}
            for img_np, boxes in batch:
                img = Tensor(augment_brightness_contrast(img_np, rng, cfg.augment))
                out = model.forward(img, use_convwb=cfg.use_convwb,
                                    use_convcc=cfg.use_convcc)
                enhanced = out["enhanced"]
                wb = gray_world_loss(enhanced)
                loss = wb * cfg.loss_weights.lambda_wb
                if guidance is not None:
                    cls, reg = guidance.loss_terms(enhanced, boxes)
                    loss = cls + reg + loss
                    comps["cls"] += float(cls.data)
                    comps["reg"] += float(reg.data)
                comps["wb"] += float(wb.data)
                total = loss if total is None else total + loss
            total = total * (1.0 / len(batch))
            if not np.isfinite(total.data):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {n_batches}")
            total.backward()
            if cfg.grad_clip is not None:
                clip_grads(params, cfg.grad_clip)
            opt.step(lr)
            step += 1
            n = len(batch)
            rec = {"epoch": epoch, "step": step,
                   "total": float(total.data),
                   "cls": comps["cls"] / n, "reg": comps["reg"] / n,
                   "wb": comps["wb"] / n, "lr": lr}
            step_log.append(rec)
            for k in sums:
                sums[k] += rec[k]
            n_batches += 1
        epoch_log.append({"epoch": epoch, "lr": lr,
                          **{k: sums[k] / n_batches for k in sums}})
    return model, epoch_log, step_log
