"""Full neural ISP model: ConvWB + ConvCC + enhancement net.

The forward pass takes the pre-processed 3-channel image and applies the
two regressed color transforms followed by the shallow enhancement network.
Each stage can be toggled off independently for ablations, in which case it
is exactly the identity.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .color import ParamNet, make_convwb, make_convcc, apply_wb, apply_cc
from .enhance import EnhanceNet


class IspModel:
    def __init__(self, seed: int = 0, dtype=np.float32, downsize: int = 256):
        rng = np.random.default_rng(np.random.SeedSequence([seed]))
        self.convwb = make_convwb(rng, dtype=dtype, downsize=downsize)
        self.convcc = make_convcc(rng, dtype=dtype, downsize=downsize)
        self.enhance = EnhanceNet(rng, dtype=dtype)

    def parameters(self) -> dict:
        out = {}
        for prefix, net in (("convwb", self.convwb), ("convcc", self.convcc),
                            ("enhance", self.enhance)):
            for name, t in net.params.items():
                out[f"{prefix}.{name}"] = t
        return out

    def param_counts(self) -> dict:
        counts = {"convwb": 0, "convcc": 0, "enhance": 0}
        for name, t in self.parameters().items():
            counts[name.split(".", 1)[0]] += t.data.size
        counts["total"] = sum(counts.values())
        return counts

    def forward(self, img: Tensor, use_convwb: bool = True,
                use_convcc: bool = True) -> dict:
        """Run the neural stages; returns the enhanced image plus the
        regressed parameters as tensors (or None for disabled stages)."""
        img = T.as_tensor(img)
        gains = cc = None
        if use_convwb:
            gains = self.convwb.forward(img)
            img = apply_wb(img, gains)
        if use_convcc:
            cc = T.reshape(self.convcc.forward(img), (3, 3))
            img = apply_cc(img, cc)
        enhanced = self.enhance.forward(img)
        return {"enhanced": enhanced, "wb_gains": gains, "cc_matrix": cc}

    def astype(self, dtype):
        self.convwb.astype(dtype)
        self.convcc.astype(dtype)
        self.enhance.astype(dtype)
        return self

    def load_state(self, state: dict):
        params = self.parameters()
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ValueError(
                f"weight mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, t in params.items():
            arr = np.asarray(state[name])
            if arr.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {name}: "
                                 f"{arr.shape} vs {t.data.shape}")
            t.data = arr.astype(t.data.dtype)

    def state(self) -> dict:
        return {name: t.data.copy() for name, t in self.parameters().items()}
