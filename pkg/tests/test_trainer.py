import numpy as np
import pytest

from rawisp.tensor import Tensor
from rawisp.pipeline import preprocess
from rawisp.model import IspModel
from rawisp.losses import LossWeights, ToyDetectorGuidance
from rawisp.trainer import (Adam, AugmentConfig, TrainConfig, TrainingError,
                            augment_brightness_contrast, train)
from conftest import frame_with_objects, synth_frame


def tiny_cfg(**kw):
    base = dict(epochs=2, batch_size=4, lr_schedule=((0, 1e-2),), seed=3,
                augment=AugmentConfig(0.0, 0.0))
    base.update(kw)
    return TrainConfig(**base)


class TestAdam:
    def test_zero_gradient_fixed_point(self):
        p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        opt = Adam({"p": p})
        before = p.data.copy()
        p.grad = np.zeros(2)
        opt.step(lr=0.1)
        np.testing.assert_array_equal(p.data, before)

    def test_first_step_magnitude(self):
        p = Tensor(np.array([0.0]), requires_grad=True)
        opt = Adam({"p": p})
        p.grad = np.array([1.0])
        opt.step(lr=0.1)
        assert p.data[0] == pytest.approx(-0.1, rel=1e-6)

    def test_nan_gradient_aborts(self):
        p = Tensor(np.array([0.0]), requires_grad=True)
        opt = Adam({"p": p})
        p.grad = np.array([np.nan])
        with pytest.raises(TrainingError, match="gradient"):
            opt.step(lr=0.1)

    def test_deterministic_trajectory(self):
        def run():
            rng = np.random.default_rng(0)
            p = Tensor(np.array([1.0, -1.0]), requires_grad=True)
            opt = Adam({"p": p})
            for _ in range(20):
                p.grad = rng.standard_normal(2)
                opt.step(lr=0.05)
            return p.data.copy()

        np.testing.assert_array_equal(run(), run())


class TestAugment:
    def test_degenerate_ranges_identity(self, rng):
        img = rng.uniform(0, 1, (3, 8, 8))
        out = augment_brightness_contrast(img, rng, AugmentConfig(0.0, 0.0))
        np.testing.assert_allclose(out, img, atol=1e-12)

    def test_pure_brightness_shift(self, rng):
        img = rng.uniform(0.2, 0.8, (3, 8, 8))

        class FixedRng:
            def __init__(self):
                self.calls = 0

            def uniform(self, lo, hi):
                self.calls += 1
                return 1.0 if self.calls == 1 else 0.1

        out = augment_brightness_contrast(img, FixedRng(),
                                          AugmentConfig(0.1, 0.0))
        np.testing.assert_allclose(out, img + 0.1, atol=1e-12)

    def test_contrast_doubles_zero_mean(self, rng):
        img = rng.uniform(-0.5, 0.5, (3, 8, 8))
        img -= img.mean()

        class FixedRng:
            def __init__(self):
                self.calls = 0

            def uniform(self, lo, hi):
                self.calls += 1
                return 2.0 if self.calls == 1 else 0.0

        out = augment_brightness_contrast(img, FixedRng(),
                                          AugmentConfig(0.0, 1.0))
        np.testing.assert_allclose(out, np.maximum(2.0 * img, 0.0),
                                   atol=1e-12)


class TestConfig:
    def test_default_schedule_values(self):
        cfg = TrainConfig()
        assert [cfg.lr_at(e) for e in range(15)] == \
            [1e-2] * 5 + [1e-3] * 5 + [1e-4] * 5

    def test_increasing_schedule_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(lr_schedule=((0, 1e-3), (5, 1e-2)))

    def test_bad_batch_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)


class TestTrain:
    def test_zero_lr_leaves_weights_unchanged(self, rng):
        frame, boxes = frame_with_objects(rng)
        cfg = tiny_cfg(epochs=1, lr_schedule=((0, 0.0),))
        model, _, _ = train([(frame, boxes)], ToyDetectorGuidance(), cfg)
        init = IspModel(seed=cfg.seed)
        for name, t in model.parameters().items():
            np.testing.assert_array_equal(t.data,
                                          init.parameters()[name].data)

    def test_empty_dataset_rejected(self):
        with pytest.raises(TrainingError, match="empty"):
            train([], None, tiny_cfg())

    def test_deterministic_weights(self, rng):
        data = [frame_with_objects(rng) for _ in range(4)]
        runs = []
        for _ in range(2):
            model, _, _ = train(data, ToyDetectorGuidance(),
                                tiny_cfg(epochs=2))
            runs.append(model.state())
        for name in runs[0]:
            np.testing.assert_array_equal(runs[0][name], runs[1][name])

    def test_guidance_weights_frozen(self, rng):
        data = [frame_with_objects(rng) for _ in range(2)]
        guid = ToyDetectorGuidance()
        before = guid.weight_blob()
        train(data, guid, tiny_cfg())
        assert guid.weight_blob() == before

    def test_disabled_convwb_pins_unit_gains(self, rng):
        frame, boxes = frame_with_objects(rng)
        cfg = tiny_cfg(use_convwb=False, epochs=1)
        model, _, _ = train([(frame, boxes)], None, cfg)
        out = model.forward(Tensor(preprocess(frame)), use_convwb=False)
        assert out["wb_gains"] is None
        # WB-module weights received no update at all
        init = IspModel(seed=cfg.seed)
        for name, t in model.convwb.params.items():
            np.testing.assert_array_equal(t.data, init.convwb.params[name].data)

    def test_toggle_does_not_leak_into_first_batch_gains(self, rng):
        frame, boxes = frame_with_objects(rng)
        gains = {}
        for toggle in (True, False):
            model = IspModel(seed=9)
            img = Tensor(preprocess(frame))
            out = model.forward(img, use_convcc=toggle)
            gains[toggle] = out["wb_gains"].data.copy()
        np.testing.assert_array_equal(gains[True], gains[False])

    def test_step_log_schema(self, rng):
        frame, boxes = frame_with_objects(rng)
        _, epoch_log, step_log = train([(frame, boxes)], ToyDetectorGuidance(),
                                       tiny_cfg(epochs=2))
        assert len(step_log) == 2
        for rec in step_log:
            assert set(rec) == {"epoch", "step", "total", "cls", "reg",
                                "wb", "lr"}
        assert [e["epoch"] for e in epoch_log] == [0, 1]

    def test_loss_decreases_gray_world(self, rng):
        frames = [(synth_frame(rng, cast=(1.0, 0.4, 0.2)), [])
                  for _ in range(4)]
        cfg = tiny_cfg(epochs=10, loss_weights=LossWeights(1.0))
        _, epoch_log, _ = train(frames, None, cfg)
        assert epoch_log[-1]["total"] < epoch_log[0]["total"]
