"""Image-to-parameter color modules.

Two networks with a shared architecture regress global color parameters from
a 256x256 bilinear downsize of the current image: one predicts 3 per-channel
white-balance gains (a diagonal matrix), the other a full 3x3 color
correction matrix.  Both start as exact no-ops: the final affine layer has
zero weights and an identity bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass(frozen=True)
class WbGains:
    w11: float
    w22: float
    w33: float

    def as_array(self):
        return np.array([self.w11, self.w22, self.w33], dtype=np.float64)


@dataclass(frozen=True)
class CcMatrix:
    m: np.ndarray  # 3x3 row-major

    def as_array(self):
        return np.asarray(self.m, dtype=np.float64).reshape(3, 3)


def _he_conv(rng, cout, cin, k, dtype):
    std = np.sqrt(2.0 / (cin * k * k))
    return (rng.standard_normal((cout, cin, k, k)) * std).astype(dtype)


class ParamNet:
    """Shared ConvWB/ConvCC trunk; only the head width differs (3 vs 9).

    Layers: conv7x7/2 (3->16), pool2, conv5x5/2 (16->32), pool2,
    conv3x3/2 (32->96), global average pool, MLP 96->64->head.
    """

    CHANNELS = (16, 32, 96)
    HIDDEN = 64

    def __init__(self, head_out: int, rng: np.random.Generator,
                 head_bias: np.ndarray, dtype=np.float32, downsize: int = 256):
        c1, c2, c3 = self.CHANNELS
        self.downsize = downsize
        self.params = {
            "conv1.w": Tensor(_he_conv(rng, c1, 3, 7, dtype), requires_grad=True),
            "conv1.b": Tensor(np.zeros(c1, dtype), requires_grad=True),
            "conv2.w": Tensor(_he_conv(rng, c2, c1, 5, dtype), requires_grad=True),
            "conv2.b": Tensor(np.zeros(c2, dtype), requires_grad=True),
            "conv3.w": Tensor(_he_conv(rng, c3, c2, 3, dtype), requires_grad=True),
            "conv3.b": Tensor(np.zeros(c3, dtype), requires_grad=True),
            "fc1.w": Tensor((rng.standard_normal((self.HIDDEN, c3))
                             * np.sqrt(2.0 / c3)).astype(dtype),
                            requires_grad=True),
            "fc1.b": Tensor(np.zeros(self.HIDDEN, dtype), requires_grad=True),
            # zero weights + identity bias make the module a no-op at init
            "fc2.w": Tensor(np.zeros((head_out, self.HIDDEN), dtype),
                            requires_grad=True),
            "fc2.b": Tensor(np.asarray(head_bias, dtype).reshape(head_out),
                            requires_grad=True),
        }

    def forward(self, img: Tensor) -> Tensor:
        p = self.params
        x = T.bilinear_resize(img, self.downsize, self.downsize)
        x = T.leaky_relu(T.conv2d(x, p["conv1.w"], p["conv1.b"], stride=2, padding=3))
        x = T.max_pool(x, 2)
        x = T.leaky_relu(T.conv2d(x, p["conv2.w"], p["conv2.b"], stride=2, padding=2))
        x = T.max_pool(x, 2)
        x = T.leaky_relu(T.conv2d(x, p["conv3.w"], p["conv3.b"], stride=2, padding=1))
        v = T.global_avg_pool(x)
        h = T.leaky_relu(T.linear(v, p["fc1.w"], p["fc1.b"]))
        return T.linear(h, p["fc2.w"], p["fc2.b"])

    def astype(self, dtype):
        for t in self.params.values():
            t.data = t.data.astype(dtype)
        return self


def make_convwb(rng, dtype=np.float32, downsize=256) -> ParamNet:
    return ParamNet(3, rng, np.ones(3), dtype=dtype, downsize=downsize)


def make_convcc(rng, dtype=np.float32, downsize=256) -> ParamNet:
    return ParamNet(9, rng, np.eye(3).reshape(-1), dtype=dtype,
                    downsize=downsize)


def convwb_forward(img, net: ParamNet) -> WbGains:
    """Regress white-balance gains from an image (any resolution)."""
    out = net.forward(T.as_tensor(img)).data
    return WbGains(float(out[0]), float(out[1]), float(out[2]))


def convcc_forward(img, net: ParamNet) -> CcMatrix:
    """Regress a 3x3 color-correction matrix from an image."""
    out = net.forward(T.as_tensor(img)).data
    return CcMatrix(np.array(out, dtype=np.float64).reshape(3, 3))


def apply_wb(img, gains) -> Tensor:
    """Per-channel diagonal gains: (R', G', B') = (w11 R, w22 G, w33 B)."""
    img = T.as_tensor(img)
    if isinstance(gains, WbGains):
        gains = Tensor(gains.as_array().astype(img.dtype))
    return T.channel_scale(img, gains)


def apply_cc(img, m) -> Tensor:
    """Full 3x3 color correction applied per pixel."""
    img = T.as_tensor(img)
    if isinstance(m, CcMatrix):
        m = Tensor(m.as_array().astype(img.dtype))
    return T.color_transform(img, m)
