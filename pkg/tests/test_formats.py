import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rawisp.graw import (BadMagic, GrawError, Truncated, UnknownCfa,
                         decode_graw, encode_graw)
from rawisp.pipeline import BayerFrame, CFA_PATTERNS
from rawisp.imageio import export_image, load_weights, save_weights
from rawisp.annotations import (AnnotationError, load_annotations,
                                load_detections, save_detections)
from rawisp.config import ConfigError, load_config, parse_config
from rawisp.metrics import Box, Detection, DetectionSet


def random_frame(rng, with_cst=None):
    h = 2 * int(rng.integers(1, 8))
    w = 2 * int(rng.integers(1, 8))
    cfa = CFA_PATTERNS[int(rng.integers(0, 4))]
    black = int(rng.integers(0, 1024))
    white = int(rng.integers(black + 1, 65535))
    samples = rng.integers(0, 65536, (h, w)).astype(np.uint16)
    if with_cst is None:
        with_cst = bool(rng.integers(0, 2))
    cst = rng.uniform(-2, 2, (3, 3)).astype(np.float32) if with_cst else None
    return BayerFrame(w, h, cfa, samples, black_level=black,
                      white_level=white, cst=cst)


def frames_equal(a, b):
    assert (a.width, a.height, a.cfa) == (b.width, b.height, b.cfa)
    assert int(np.asarray(a.black_level).reshape(-1)[0]) == \
        int(np.asarray(b.black_level).reshape(-1)[0])
    assert a.white_level == b.white_level
    np.testing.assert_array_equal(a.samples, b.samples)
    if a.cst is None:
        assert b.cst is None
    else:
        np.testing.assert_array_equal(a.cst, b.cst)


class TestGrawRoundTrip:
    def test_random_frames(self, rng):
        for _ in range(200):
            frame = random_frame(rng)
            frames_equal(frame, decode_graw(encode_graw(frame)))

    def test_encode_is_stable(self, rng):
        frame = random_frame(rng)
        assert encode_graw(frame) == encode_graw(frame)

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_property_round_trip(self, data):
        seed = data.draw(st.integers(0, 2 ** 32 - 1))
        frame = random_frame(np.random.default_rng(seed))
        encoded = encode_graw(frame)
        frames_equal(frame, decode_graw(encoded))
        assert encode_graw(decode_graw(encoded)) == encoded


class TestGrawErrors:
    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            decode_graw(b"NOTRAW\x00\x00\x00\x00")

    def test_truncated_header(self):
        with pytest.raises(Truncated):
            decode_graw(b"GRAW1\n\x02\x00")

    def test_truncated_payload(self, rng):
        blob = encode_graw(random_frame(rng))
        with pytest.raises(Truncated, match="truncated payload"):
            decode_graw(blob[:-1])

    def test_trailing_bytes(self, rng):
        blob = encode_graw(random_frame(rng))
        with pytest.raises(GrawError, match="trailing"):
            decode_graw(blob + b"\x00")

    def test_unknown_cfa(self, rng):
        blob = bytearray(encode_graw(random_frame(rng)))
        blob[14:18] = b"XYZW"
        with pytest.raises(UnknownCfa):
            decode_graw(bytes(blob))

    def test_identity_cst_survives(self, rng):
        frame = random_frame(rng, with_cst=False)
        frame.cst = np.eye(3, dtype=np.float32)
        decoded = decode_graw(encode_graw(frame))
        np.testing.assert_array_equal(decoded.cst, np.eye(3, dtype=np.float32))


class TestPpmExport:
    def test_mid_gray_bytes(self, tmp_path):
        img = np.full((3, 2, 2), 0.5)
        path = tmp_path / "gray.ppm"
        export_image(img, path)
        data = path.read_bytes()
        assert data.startswith(b"P6\n2 2\n255\n")
        assert data[len(b"P6\n2 2\n255\n"):] == bytes([128] * 12)

    def test_bounds_and_clamp(self, tmp_path):
        img = np.zeros((3, 1, 1))
        img[0], img[1], img[2] = 1.0, -0.2, 2.5
        path = tmp_path / "b.ppm"
        export_image(img, path)
        assert path.read_bytes().endswith(bytes([255, 0, 255]))

    def test_16bit_maxval(self, tmp_path):
        img = np.full((3, 1, 1), 1.0)
        path = tmp_path / "w.ppm"
        export_image(img, path, bit_depth=16)
        data = path.read_bytes()
        assert b"65535\n" in data
        assert data.endswith(b"\xff\xff" * 3)

    def test_rounding_half_up(self, tmp_path):
        img = np.full((3, 1, 1), 0.5 / 255)  # scales to exactly 0.5
        path = tmp_path / "r.ppm"
        export_image(img, path)
        assert path.read_bytes().endswith(bytes([1, 1, 1]))


class TestWeightSerialization:
    def test_bit_exact_round_trip(self, rng, tmp_path):
        state = {f"layer{i}.w": rng.standard_normal(
            (int(rng.integers(1, 5)), 3)).astype(np.float32)
            for i in range(6)}
        state["scalar"] = np.float32(rng.standard_normal())
        stem = tmp_path / "weights"
        save_weights(state, stem)
        loaded = load_weights(stem)
        assert set(loaded) == set(state)
        for name in state:
            np.testing.assert_array_equal(
                np.asarray(state[name], dtype=np.float32), loaded[name])

    def test_manifest_has_offsets(self, tmp_path):
        state = {"a": np.zeros(2, np.float32), "b": np.ones(3, np.float32)}
        save_weights(state, tmp_path / "w")
        manifest = json.loads((tmp_path / "w.json").read_text())["parameters"]
        assert [m["name"] for m in manifest] == ["a", "b"]
        assert manifest[0]["offset"] == 0
        assert manifest[1]["offset"] == 8


class TestAnnotations:
    def _doc(self):
        return {
            "images": [{"id": 1, "file": "a.graw", "width": 64, "height": 64}],
            "annotations": [{"image_id": 1, "category_id": 1,
                             "bbox": [2, 3, 10, 12]}],
            "categories": [{"id": 1, "name": "person"}],
        }

    def test_load_and_convert(self, tmp_path):
        path = tmp_path / "ann.json"
        path.write_text(json.dumps(self._doc()))
        ann = load_annotations(path)
        gts = ann.to_annotation_set()
        box = gts.by_image[1][0]
        assert (box.x_min, box.y_min, box.x_max, box.y_max) == (2, 3, 12, 15)

    def test_unknown_image_rejected(self, tmp_path):
        doc = self._doc()
        doc["annotations"][0]["image_id"] = 99
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(AnnotationError, match="unknown image"):
            load_annotations(path)

    def test_degenerate_bbox_rejected(self, tmp_path):
        doc = self._doc()
        doc["annotations"][0]["bbox"] = [2, 3, 0, 12]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(AnnotationError, match="degenerate"):
            load_annotations(path)

    def test_detections_round_trip(self, tmp_path):
        dets = DetectionSet()
        dets.add(1, Detection(Box(1, 2, 11, 22, 3), 0.75))
        path = tmp_path / "dets.json"
        save_detections(dets, path)
        loaded = load_detections(path)
        d = loaded.by_image[1][0]
        assert d.score == 0.75
        assert (d.box.x_min, d.box.y_max, d.box.category) == (1, 22, 3)


class TestConfig:
    def test_defaults(self):
        cfg = parse_config({})
        assert cfg.epochs == 15 and cfg.batch_size == 8
        assert cfg.lr_schedule == ((0, 1e-2), (5, 1e-3), (10, 1e-4))

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            parse_config({"epochz": 3})

    def test_unknown_augment_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown augment keys"):
            parse_config({"augment": {"brightnes": 0.1}})

    def test_negative_lambda_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"lambda_wb": -1})

    def test_json_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"epochs": 3, "lambda_wb": 0.5,
                                    "use_cst": False}))
        cfg = load_config(path)
        assert cfg.epochs == 3
        assert cfg.loss_weights.lambda_wb == 0.5
        assert cfg.use_cst is False

    def test_toml_file(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text('epochs = 4\nbatch_size = 2\n'
                        '[augment]\nbrightness = 0.05\ncontrast = 0.1\n')
        cfg = load_config(path)
        assert cfg.epochs == 4
        assert cfg.augment.brightness == 0.05
