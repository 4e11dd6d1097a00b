import numpy as np
import pytest

from rawisp.pipeline import BayerFrame
from rawisp.metrics import Box

BLACK = 512
WHITE = 16383


def mosaic_from_rgb(rgb, cfa="RGGB"):
    """Build an H x W mosaic whose packed planes reproduce ``rgb`` exactly
    (G1 = G2 = the green plane)."""
    _, h2, w2 = rgb.shape
    sites = {"RGGB": (0, 1, 1, 2), "BGGR": (2, 1, 1, 0),
             "GRBG": (1, 0, 2, 1), "GBRG": (1, 2, 0, 1)}[cfa]
    m = np.zeros((h2 * 2, w2 * 2))
    m[0::2, 0::2] = rgb[sites[0]]
    m[0::2, 1::2] = rgb[sites[1]]
    m[1::2, 0::2] = rgb[sites[2]]
    m[1::2, 1::2] = rgb[sites[3]]
    return m


def synth_frame(rng, h=64, w=64, cast=(1.0, 1.0, 1.0), cfa="RGGB", cst=None,
                boxes=()):
    """A synthetic Bayer frame: random linear RGB scene times a color cast,
    with optional bright rectangles at ``boxes`` (coords in packed space)."""
    rgb = rng.uniform(0.05, 0.7, (3, h // 2, w // 2))
    for b in boxes:
        rgb[:, int(b.y_min):int(b.y_max), int(b.x_min):int(b.x_max)] = \
            rng.uniform(0.7, 0.95, 3)[:, None, None]
    rgb = rgb * np.asarray(cast)[:, None, None]
    mosaic = np.clip(mosaic_from_rgb(rgb, cfa), 0.0, 1.0)
    raw = (mosaic * (WHITE - BLACK) + BLACK).round().astype(np.uint16)
    return BayerFrame(w, h, cfa, raw, black_level=BLACK, white_level=WHITE,
                      cst=cst)


def frame_with_objects(rng, n_boxes=2, h=64, w=64):
    """Frame plus ground-truth boxes in the processed-image coordinate frame
    (packed half resolution; small frames are not resized)."""
    boxes = []
    for _ in range(n_boxes):
        bw = int(rng.integers(6, 14))
        bh = int(rng.integers(6, 14))
        x = int(rng.integers(0, w // 2 - bw))
        y = int(rng.integers(0, h // 2 - bh))
        boxes.append(Box(x, y, x + bw, y + bh, 0))
    frame = synth_frame(rng, h, w, boxes=boxes)
    return frame, boxes


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
