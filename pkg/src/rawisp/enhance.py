"""Shallow residual enhancement network.

InstanceNorm layers inside the stack make the learned correction invariant
to global affine brightness changes of the input, which is what lets the
model adjust exposure without an externally supplied amplification ratio.
The final 1x1 convolution is zero-initialized, so the whole network is the
identity map at initialization.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .color import _he_conv


class EnhanceNet:
    """conv3(3->16) IN lrelu, conv3(16->32) IN lrelu, conv3(32->16) lrelu,
    conv1(16->3), added residually to the input."""

    CHANNELS = (16, 32, 16)

    def __init__(self, rng: np.random.Generator, dtype=np.float32):
        c1, c2, c3 = self.CHANNELS
        self.params = {
            "conv1.w": Tensor(_he_conv(rng, c1, 3, 3, dtype), requires_grad=True),
            "conv1.b": Tensor(np.zeros(c1, dtype), requires_grad=True),
            "in1.gamma": Tensor(np.ones(c1, dtype), requires_grad=True),
            "in1.beta": Tensor(np.zeros(c1, dtype), requires_grad=True),
            "conv2.w": Tensor(_he_conv(rng, c2, c1, 3, dtype), requires_grad=True),
            "conv2.b": Tensor(np.zeros(c2, dtype), requires_grad=True),
            "in2.gamma": Tensor(np.ones(c2, dtype), requires_grad=True),
            "in2.beta": Tensor(np.zeros(c2, dtype), requires_grad=True),
            "conv3.w": Tensor(_he_conv(rng, c3, c2, 3, dtype), requires_grad=True),
            "conv3.b": Tensor(np.zeros(c3, dtype), requires_grad=True),
            "conv4.w": Tensor(np.zeros((3, c3, 1, 1), dtype), requires_grad=True),
            "conv4.b": Tensor(np.zeros(3, dtype), requires_grad=True),
        }

    def forward(self, img: Tensor) -> Tensor:
        p = self.params
        x = T.conv2d(img, p["conv1.w"], p["conv1.b"], padding=1)
        x = T.leaky_relu(T.instance_norm(x, p["in1.gamma"], p["in1.beta"]))
        x = T.conv2d(x, p["conv2.w"], p["conv2.b"], padding=1)
        x = T.leaky_relu(T.instance_norm(x, p["in2.gamma"], p["in2.beta"]))
        x = T.leaky_relu(T.conv2d(x, p["conv3.w"], p["conv3.b"], padding=1))
        x = T.conv2d(x, p["conv4.w"], p["conv4.b"])
        return img + x

    def first_norm_activations(self, img: Tensor) -> Tensor:
        """Activations right after the first InstanceNorm (for analysis)."""
        p = self.params
        x = T.conv2d(img, p["conv1.w"], p["conv1.b"], padding=1)
        return T.instance_norm(x, p["in1.gamma"], p["in1.beta"])

    def astype(self, dtype):
        for t in self.params.values():
            t.data = t.data.astype(dtype)
        return self


def enhance_forward(img, net: EnhanceNet) -> Tensor:
    return net.forward(T.as_tensor(img))
