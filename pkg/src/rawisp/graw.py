"""GRAW: a tiny bit-exact container for Bayer frames.

Layout (all integers little-endian):
  magic  "GRAW1\\n"
  u32    width
  u32    height
  4s     CFA pattern (ASCII)
  u16    black_level
  u16    white_level
  u8     cst_present
  9*f32  CST matrix, row-major (zeros when absent)
  payload: width*height u16 samples, row-major
"""

from __future__ import annotations

import struct

import numpy as np

from .pipeline import BayerFrame, CFA_PATTERNS

MAGIC = b"GRAW1\n"
_HEADER = struct.Struct("<II4sHHB9f")


class GrawError(ValueError):
    pass


class BadMagic(GrawError):
    pass


class Truncated(GrawError):
    pass


class UnknownCfa(GrawError):
    pass


def encode_graw(frame: BayerFrame) -> bytes:
    samples = np.asarray(frame.samples)
    if samples.dtype != np.uint16:
        raise GrawError("GRAW stores raw u16 samples; normalize after decode")
    cst_present = frame.cst is not None
    cst = (np.asarray(frame.cst, dtype="<f4").reshape(9) if cst_present
           else np.zeros(9, dtype="<f4"))
    black = np.asarray(frame.black_level).reshape(-1)
    if black.size != 1:
        raise GrawError("GRAW stores a single scalar black level")
    header = MAGIC + _HEADER.pack(
        frame.width, frame.height, frame.cfa.encode("ascii"),
        int(black[0]), int(frame.white_level), int(cst_present),
        *(float(v) for v in cst))
    return header + samples.astype("<u2").tobytes()


def decode_graw(data: bytes) -> BayerFrame:
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise BadMagic("not a GRAW file (bad magic)")
    off = len(MAGIC)
    if len(data) < off + _HEADER.size:
        raise Truncated("truncated GRAW header")
    fields = _HEADER.unpack_from(data, off)
    width, height, cfa_raw, black, white, cst_present = fields[:6]
    cst_vals = fields[6:]
    try:
        cfa = cfa_raw.decode("ascii")
    except UnicodeDecodeError:
        raise UnknownCfa(f"undecodable CFA bytes {cfa_raw!r}")
    if cfa not in CFA_PATTERNS:
        raise UnknownCfa(f"unknown CFA pattern {cfa!r}")
    payload = data[off + _HEADER.size:]
    expected = width * height * 2
    if len(payload) < expected:
        raise Truncated(
            f"truncated payload: expected {expected} bytes, got {len(payload)}")
    if len(payload) > expected:
        raise GrawError(f"trailing bytes after payload: {len(payload) - expected}")
    samples = np.frombuffer(payload, dtype="<u2").reshape(height, width)
    cst = (np.array(cst_vals, dtype=np.float32).reshape(3, 3)
           if cst_present else None)
    return BayerFrame(width, height, cfa, samples.copy(),
                      black_level=black, white_level=white, cst=cst)


def read_graw(path) -> BayerFrame:
    with open(path, "rb") as f:
        return decode_graw(f.read())


def write_graw(frame: BayerFrame, path):
    with open(path, "wb") as f:
        f.write(encode_graw(frame))
