"""Train the ISP on synthetic color-cast frames and watch it neutralize them.

Two short runs: first the gray-world objective alone (no detector), which
pulls the channel means together; then a full guided run with the frozen toy
detector, which also shapes the image for detection.

Run with:  python3 demos/demo_training.py    (about a minute)
"""

import numpy as np

from rawisp.losses import LossWeights, ToyDetectorGuidance
from rawisp.model import IspModel
from rawisp.pipeline import preprocess
from rawisp.tensor import Tensor
from rawisp.trainer import AugmentConfig, TrainConfig, train

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))
from conftest import frame_with_objects, synth_frame  # noqa: E402


def imbalance(img):
    m = img.reshape(3, -1).mean(axis=1)
    return abs(m[0] - m[1]) + abs(m[0] - m[2]) + abs(m[1] - m[2])


def main():
    # --- gray-world only -------------------------------------------------
    frames = [synth_frame(np.random.default_rng(i), cast=(1.4, 1.0, 0.6))
              for i in range(8)]
    before = float(np.mean([imbalance(preprocess(f)) for f in frames]))
    cfg = TrainConfig(epochs=40, batch_size=8, lr_schedule=((0, 1e-2),),
                      augment=AugmentConfig(0.0, 0.0),
                      loss_weights=LossWeights(lambda_wb=1.0), seed=0)
    model, epoch_log, _ = train([(f, []) for f in frames], None, cfg)
    after = float(np.mean(
        [imbalance(model.forward(Tensor(preprocess(f)))["enhanced"].data)
         for f in frames]))
    print("gray-world run: mean channel imbalance "
          f"{before:.4f} -> {after:.4f} "
          f"({100 * (1 - after / before):.1f}% reduction in 40 steps)")
    gains = model.forward(Tensor(preprocess(frames[0])))["wb_gains"]
    print("  predicted white-balance gains on frame 0:",
          np.round(np.asarray(gains.data).reshape(-1), 3))

    # --- guided by the frozen toy detector -------------------------------
    dataset = [frame_with_objects(np.random.default_rng(100 + i))
               for i in range(8)]
    guide = ToyDetectorGuidance()
    blob = guide.weight_blob()
    cfg = TrainConfig(seed=1)   # the default recipe: 15 epochs, batch 8
    _, epoch_log, _ = train(dataset, guide, cfg)
    print("guided run: epoch mean total loss")
    shown = epoch_log[::7]
    if shown[-1] is not epoch_log[-1]:
        shown.append(epoch_log[-1])
    for rec in shown:
        print(f"  epoch {rec['epoch']:2d}  lr {rec['lr']:.0e}  "
              f"total {rec['total']:.5f}  (cls {rec['cls']:.5f}  "
              f"reg {rec['reg']:.5f}  wb {rec['wb']:.5f})")
    print("guidance weights untouched by training:",
          guide.weight_blob() == blob)


if __name__ == "__main__":
    main()
