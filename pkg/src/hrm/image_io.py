"""Minimal PGM/PPM reader and writer.

Supports ASCII (P2/P3) and binary (P5/P6) variants with 8-bit depth.
Pixels are exposed as float64 in [0, 1]; color input is collapsed to
luminance.  Other formats can be layered behind load_image later.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import MissingAsset, ParseError

_LUMA = np.array([0.299, 0.587, 0.114])


def _tokens(data: bytes):
    """Yield whitespace-separated header tokens, skipping '#' comments."""
    pos = 0
    while True:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*([^\s#]+)").match(data, pos)
        if m is None:
            raise ParseError("unexpected end of PNM header")
        pos = m.end()
        yield m.group(2), pos


def read_pnm(path) -> np.ndarray:
    """Read a PGM/PPM file to a float64 array in [0, 1] (HxW or HxWx3)."""
    path = Path(path)
    if not path.exists():
        raise MissingAsset(str(path))
    data = path.read_bytes()
    if len(data) < 2 or data[:1] != b"P" or data[1:2] not in b"2356":
        raise ParseError(f"{path}: not a PGM/PPM file")
    magic = data[:2].decode()
    channels = 3 if magic in ("P3", "P6") else 1

    gen = _tokens(data[2:])
    fields = []
    for _ in range(3):
        tok, pos = next(gen)
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ParseError(f"{path}: bad PNM dimensions")
    count = width * height * channels

    if magic in ("P5", "P6"):
        start = 2 + pos + 1  # single whitespace byte after maxval
        dtype = np.uint16 if maxval > 255 else np.uint8
        itemsize = np.dtype(dtype).itemsize
        if len(data) - start < count * itemsize:
            raise ParseError(f"{path}: truncated PNM body")
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=start)
        if dtype is np.uint16:
            raw = raw.byteswap()
    else:
        body = data[2 + pos :].split()
        if len(body) < count:
            raise ParseError(f"{path}: truncated ASCII PNM body")
        raw = np.array([int(t) for t in body[:count]])

    if raw.size < count:
        raise ParseError(f"{path}: truncated PNM body")
    img = raw.reshape((height, width, channels)).astype(np.float64) / maxval
    return img[..., 0] if channels == 1 else img


def load_image(path) -> np.ndarray:
    """Decode an image to grayscale float64 in [0, 1]."""
    img = read_pnm(path)
    if img.ndim == 3:
        img = img @ _LUMA
    return img


def write_pgm(path, img: np.ndarray) -> None:
    """Write a [0, 1] grayscale array as an 8-bit binary PGM."""
    img = np.asarray(img, dtype=np.float64)
    quant = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + quant.tobytes())
