"""Image export and weight serialization.

PPM (P6) is used for image output because its byte layout is fully
specifiable: values are clamped to [0,1], scaled to the bit depth and
rounded half-away-from-zero.  Sample bytes for 16-bit output are
big-endian, as the PPM format requires.

Weights are stored as a flat little-endian float32 stream plus a JSON
manifest of (name, shape, byte offset); the round trip is bit-exact.
"""

from __future__ import annotations

import json
import os

import numpy as np


def export_image(img: np.ndarray, path, bit_depth: int = 8):
    """Write a (3,H,W) float image as a binary PPM (P6) file."""
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError("export_image expects a (3,H,W) image")
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    maxval = (1 << bit_depth) - 1
    clamped = np.clip(img, 0.0, 1.0)
    # half-away-from-zero; values are non-negative after the clamp
    scaled = np.floor(clamped.astype(np.float64) * maxval + 0.5)
    pixels = scaled.transpose(1, 2, 0)  # H, W, C interleaved
    _, h, w = img.shape
    header = f"P6\n{w} {h}\n{maxval}\n".encode("ascii")
    body = pixels.astype(">u2" if bit_depth == 16 else np.uint8).tobytes()
    with open(path, "wb") as f:
        f.write(header + body)


def save_weights(state: dict, stem):
    """Write ``<stem>.bin`` (f32 LE stream) and ``<stem>.json`` (manifest)."""
    stem = os.fspath(stem)
    manifest = []
    offset = 0
    blob = bytearray()
    for name in sorted(state):
        arr = np.ascontiguousarray(state[name], dtype="<f4")
        manifest.append({"name": name, "shape": list(arr.shape),
                         "offset": offset})
        blob += arr.tobytes()
        offset += arr.nbytes
    with open(stem + ".bin", "wb") as f:
        f.write(bytes(blob))
    with open(stem + ".json", "w") as f:
        json.dump({"parameters": manifest}, f, sort_keys=True, indent=2)


def load_weights(stem) -> dict:
    stem = os.fspath(stem)
    with open(stem + ".json") as f:
        manifest = json.load(f)["parameters"]
    with open(stem + ".bin", "rb") as f:
        blob = f.read()
    state = {}
    for entry in manifest:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count,
                            offset=entry["offset"])
        state[entry["name"]] = arr.reshape(shape).copy()
    return state
