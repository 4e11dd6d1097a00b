"""Minimal raw pre-processing: level normalization, Bayer packing, green
averaging, color space transformation and detector-policy resizing.

All functions are pure and operate on numpy arrays; images are channels-first
float arrays.  Packing canonicalizes every CFA pattern to (R, G1, G2, B) so
downstream code never branches on the sensor layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tensor import Tensor, bilinear_resize

CFA_PATTERNS = ("RGGB", "BGGR", "GRBG", "GBRG")

# Within a 2x2 tile read in row-major order, where each canonical plane lives.
# Values are indices into the tile for (R, G1, G2, B).
_CFA_SITE_ORDER = {
    "RGGB": (0, 1, 2, 3),
    "BGGR": (3, 1, 2, 0),
    "GRBG": (1, 0, 3, 2),
    "GBRG": (2, 0, 3, 1),
}


class PipelineError(ValueError):
    pass


@dataclass
class BayerFrame:
    """Mosaiced single-channel sensor data plus the metadata the pipeline needs.

    ``samples`` is H x W; integer (u16) straight off the container, float in
    [0,1] after :func:`normalize_levels`.  ``black_level`` may be a scalar or
    a 4-tuple of per-CFA-site values in tile row-major order.
    """

    width: int
    height: int
    cfa: str
    samples: np.ndarray
    black_level: object = 0
    white_level: int = 65535
    cst: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.cfa not in CFA_PATTERNS:
            raise PipelineError(f"unknown CFA pattern {self.cfa!r}")
        if self.width % 2 or self.height % 2:
            raise PipelineError("frame dimensions must be even")
        self.samples = np.asarray(self.samples)
        if self.samples.shape != (self.height, self.width):
            raise PipelineError(
                f"sample buffer shape {self.samples.shape} does not match "
                f"{self.height}x{self.width}")
        blacks = self.black_levels()
        if np.any(np.asarray(self.white_level) <= blacks):
            raise PipelineError("white_level must exceed black_level")
        if self.cst is not None:
            self.cst = np.asarray(self.cst, dtype=np.float32).reshape(3, 3)
            if not np.all(np.isfinite(self.cst)):
                raise PipelineError("CST matrix must be finite")

    def black_levels(self) -> np.ndarray:
        """Per-site black levels as a length-4 array (tile row-major)."""
        b = np.asarray(self.black_level, dtype=np.float64).reshape(-1)
        if b.size == 1:
            b = np.repeat(b, 4)
        if b.size != 4:
            raise PipelineError("black_level must be scalar or 4 per-site values")
        return b


def normalize_levels(frame: BayerFrame) -> BayerFrame:
    """Map raw counts to floats in [0,1] via (raw - black) / (white - black)."""
    blacks = frame.black_levels().reshape(2, 2)
    raw = frame.samples.astype(np.float32)
    h, w = raw.shape
    btile = np.tile(blacks, (h // 2, w // 2)).astype(np.float32)
    out = np.clip((raw - btile) / (float(frame.white_level) - btile), 0.0, 1.0)
    return BayerFrame(frame.width, frame.height, frame.cfa, out,
                      black_level=0, white_level=frame.white_level,
                      cst=frame.cst)


def pack_bayer(frame: BayerFrame) -> np.ndarray:
    """Pack a normalized mosaic into a 4 x H/2 x W/2 (R, G1, G2, B) image."""
    s = frame.samples
    tiles = [s[0::2, 0::2], s[0::2, 1::2], s[1::2, 0::2], s[1::2, 1::2]]
    order = _CFA_SITE_ORDER[frame.cfa]
    return np.stack([tiles[i] for i in order]).astype(np.float32)


def unpack_bayer(packed: np.ndarray, cfa: str) -> np.ndarray:
    """Inverse of :func:`pack_bayer`; reproduces the mosaic exactly."""
    if packed.shape[0] != 4:
        raise PipelineError("expected a 4-channel packed image")
    if cfa not in CFA_PATTERNS:
        raise PipelineError(f"unknown CFA pattern {cfa!r}")
    _, h2, w2 = packed.shape
    out = np.empty((h2 * 2, w2 * 2), dtype=packed.dtype)
    order = _CFA_SITE_ORDER[cfa]
    sites = [(0, 0), (0, 1), (1, 0), (1, 1)]
    for canon, tile_idx in enumerate(order):
        dy, dx = sites[tile_idx]
        out[dy::2, dx::2] = packed[canon]
    return out


def average_greens(packed: np.ndarray) -> np.ndarray:
    """Collapse the packed (R, G1, G2, B) image to (R, (G1+G2)/2, B)."""
    if packed.shape[0] != 4:
        raise PipelineError(f"expected 4 channels, got {packed.shape[0]}")
    return np.stack([packed[0], (packed[1] + packed[2]) * 0.5, packed[3]])


def apply_cst(img: np.ndarray, cst: np.ndarray) -> np.ndarray:
    """Left-multiply every pixel by the 3x3 raw-RGB -> XYZ matrix.

    The device-independent intermediate is deliberately not clamped.
    """
    if img.shape[0] != 3:
        raise PipelineError(f"expected 3 channels, got {img.shape[0]}")
    m = np.asarray(cst, dtype=img.dtype).reshape(3, 3)
    return np.einsum("ij,jhw->ihw", m, img)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Numpy front-end to the shared half-pixel-center bilinear kernel."""
    return bilinear_resize(Tensor(img), out_h, out_w).data


def resize_keep_aspect(img: np.ndarray, max_long: int = 1333,
                       max_short: int = 800) -> np.ndarray:
    """Downscale so long side <= max_long and short side <= max_short.

    Aspect ratio is preserved and the image is never upscaled.
    """
    _, h, w = img.shape
    long_side, short_side = max(h, w), min(h, w)
    scale = min(max_long / long_side, max_short / short_side, 1.0)
    if scale >= 1.0:
        return img
    oh = int(round(h * scale))
    ow = int(round(w * scale))
    return resize_bilinear(img, oh, ow)


def preprocess(frame: BayerFrame, use_cst: bool = True,
               max_long: int = 1333, max_short: int = 800) -> np.ndarray:
    """Full pre-neural pipeline: normalize, pack, average greens, CST, resize."""
    norm = normalize_levels(frame)
    img = average_greens(pack_bayer(norm))
    if use_cst and frame.cst is not None:
        img = apply_cst(img, frame.cst)
    return resize_keep_aspect(img, max_long, max_short)
