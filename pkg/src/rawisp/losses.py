"""Training objectives and the pluggable guidance interface.

The color loss encourages equal channel means (gray-world hypothesis); the
detection guidance pairs an alpha-balanced focal classification loss with a
smooth-L1 box regression loss.  The total objective is
cls + reg + lambda_wb * wb, and lambda_wb = 0 recovers pure detector
guidance.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .metrics import Box, Detection, DetectionSet

PROB_EPS = 1e-7


@dataclass(frozen=True)
class FocalParams:
    alpha: float = 0.25
    gamma: float = 2.0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0,1)")
        if self.gamma < 0.0:
            raise ValueError("gamma must be >= 0")


@dataclass(frozen=True)
class LossWeights:
    lambda_wb: float = 0.1

    def __post_init__(self):
        if self.lambda_wb < 0.0:
            raise ValueError("lambda_wb must be >= 0")


def gray_world_loss(img) -> Tensor:
    """Sum of absolute differences between the three channel means."""
    img = T.as_tensor(img)
    if img.shape[0] != 3:
        raise ValueError("gray_world_loss expects a 3-channel image")
    m = T.global_avg_pool(img)
    r = T.slice_axis0(m, 0, 1)
    g = T.slice_axis0(m, 1, 2)
    b = T.slice_axis0(m, 2, 3)
    return ((r - g).abs() + (r - b).abs() + (g - b).abs()).sum()


def focal_loss(pred_prob: float, is_positive: bool, p: FocalParams) -> float:
    """Alpha-balanced focal loss for a single predicted probability."""
    if not (0.0 < pred_prob < 1.0):
        raise ValueError("pred_prob must be strictly inside (0,1)")
    pred_prob = min(max(pred_prob, PROB_EPS), 1.0 - PROB_EPS)
    p_t = pred_prob if is_positive else 1.0 - pred_prob
    a_t = p.alpha if is_positive else 1.0 - p.alpha
    return -a_t * (1.0 - p_t) ** p.gamma * math.log(p_t)


def smooth_l1(pred: float, target: float, beta: float = 1.0) -> float:
    """Huber-style loss: quadratic below beta, linear above."""
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    d = abs(pred - target)
    return 0.5 * d * d / beta if d < beta else d - 0.5 * beta


def total_loss(cls: float, reg: float, wb: float, w: LossWeights) -> float:
    return cls + reg + w.lambda_wb * wb


# -- tensor-valued variants used inside the training graph -----------------

def focal_loss_map(probs: Tensor, pos_mask: np.ndarray,
                   p: FocalParams) -> Tensor:
    """Elementwise focal loss over a probability map with a constant
    positive-cell mask."""
    pos = np.asarray(pos_mask, dtype=bool)
    probs = T.clamp(probs, PROB_EPS, 1.0 - PROB_EPS)
    one_minus = 1.0 - probs
    p_t = T.where(pos, probs, one_minus)
    a_t = np.where(pos, p.alpha, 1.0 - p.alpha).astype(probs.dtype)
    modulator = (1.0 - p_t) ** p.gamma
    return T.mul(T.mul(modulator, T.tlog(p_t)), Tensor(-a_t))


def smooth_l1_map(pred: Tensor, target: np.ndarray,
                  beta: float = 1.0) -> Tensor:
    """Elementwise smooth-L1 against a constant target array."""
    d = pred + Tensor((-np.asarray(target)).astype(pred.dtype))
    a = d.abs()
    quad = (d * d) * (0.5 / beta)
    lin = a - 0.5 * beta
    return T.where(a.data < beta, quad, lin)


# -- guidance interface ----------------------------------------------------

class GuidanceModel(ABC):
    """Frozen task network whose loss trains the ISP end-to-end.

    Implementations must be deterministic for fixed internal weights and
    safe to share read-only across workers.
    """

    @abstractmethod
    def loss_terms(self, img: Tensor, boxes: List[Box]) -> Tuple[Tensor, Tensor]:
        """Return (classification, regression) scalar loss tensors wired
        into the image's autodiff graph."""

    def guide(self, img: np.ndarray, boxes: List[Box]):
        """(image, annotations) -> (loss value, gradient w.r.t. the image)."""
        t = Tensor(np.asarray(img), requires_grad=True)
        cls, reg = self.loss_terms(t, boxes)
        loss = cls + reg
        loss.backward()
        grad = t.grad if t.grad is not None else np.zeros_like(t.data)
        return float(loss.data), grad


class ToyDetectorGuidance(GuidanceModel):
    """Tiny fixed-weight conv head producing per-cell objectness and box
    offsets on a coarse grid; a stand-in for a full pretrained detector.

    Anchors (cells) are matched to ground truth by center-in-cell.  Box
    targets are center offsets in cell units and log size ratios.
    """

    def __init__(self, seed: int = 7, cell: int = 8, hidden: int = 8,
                 focal: FocalParams = FocalParams(), beta: float = 1.0,
                 dtype=np.float32):
        self.cell = int(cell)
        self.focal = focal
        self.beta = float(beta)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD37]))
        std1 = np.sqrt(2.0 / (3 * 9))
        self.w1 = (rng.standard_normal((hidden, 3, 3, 3)) * std1).astype(dtype)
        self.b1 = np.zeros(hidden, dtype=dtype)
        self.w2 = (rng.standard_normal((5, hidden, 1, 1))
                   * np.sqrt(2.0 / hidden)).astype(dtype)
        self.b2 = np.zeros(5, dtype=dtype)

    def weight_blob(self) -> bytes:
        """Stable byte serialization, used to assert the weights stay frozen."""
        return b"".join(np.ascontiguousarray(a).tobytes()
                        for a in (self.w1, self.b1, self.w2, self.b2))

    def _head(self, img: Tensor) -> Tensor:
        dt = img.dtype
        pooled = T.avg_pool(img, self.cell)
        f = T.leaky_relu(T.conv2d(pooled,
                                  Tensor(self.w1.astype(dt)),
                                  Tensor(self.b1.astype(dt)), padding=1))
        return T.conv2d(f, Tensor(self.w2.astype(dt)), Tensor(self.b2.astype(dt)))

    def _targets(self, gh: int, gw: int, boxes: List[Box]):
        pos = np.zeros((gh, gw), dtype=bool)
        tgt = np.zeros((4, gh, gw))
        for b in boxes:
            cx = 0.5 * (b.x_min + b.x_max)
            cy = 0.5 * (b.y_min + b.y_max)
            gx = int(cx // self.cell)
            gy = int(cy // self.cell)
            if 0 <= gx < gw and 0 <= gy < gh:
                pos[gy, gx] = True
                tgt[0, gy, gx] = (cx - (gx + 0.5) * self.cell) / self.cell
                tgt[1, gy, gx] = (cy - (gy + 0.5) * self.cell) / self.cell
                tgt[2, gy, gx] = np.log((b.x_max - b.x_min) / self.cell)
                tgt[3, gy, gx] = np.log((b.y_max - b.y_min) / self.cell)
        return pos, tgt

    def loss_terms(self, img, boxes: List[Box]):
        img = T.as_tensor(img)
        out = self._head(img)
        _, gh, gw = out.shape
        pos, tgt = self._targets(gh, gw, boxes)
        n_pos = max(1, int(pos.sum()))

        logits = T.reshape(T.slice_axis0(out, 0, 1), (gh, gw))
        probs = T.sigmoid(logits)
        cls = focal_loss_map(probs, pos, self.focal).sum() * (1.0 / n_pos)

        offsets = T.slice_axis0(out, 1, 5)
        reg_map = smooth_l1_map(offsets, tgt.astype(img.dtype), self.beta)
        mask = np.broadcast_to(pos, (4, gh, gw)).astype(img.dtype)
        reg = T.mul(reg_map, Tensor(mask)).sum() * (1.0 / n_pos)
        return cls, reg

    def detect(self, img: np.ndarray, threshold: float = 0.5) -> List[Detection]:
        out = self._head(Tensor(np.asarray(img))).data
        probs = 1.0 / (1.0 + np.exp(-out[0]))
        dets = []
        for gy, gx in zip(*np.nonzero(probs > threshold)):
            p = float(probs[gy, gx])
            tx, ty, tw, th = (float(out[i, gy, gx]) for i in range(1, 5))
            cx = ((gx + 0.5) + tx) * self.cell
            cy = ((gy + 0.5) + ty) * self.cell
            w = np.exp(tw) * self.cell
            h = np.exp(th) * self.cell
            if w > 0 and h > 0:
                dets.append(Detection(
                    Box(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2, 0), p))
        return dets
