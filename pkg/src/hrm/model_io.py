"""Binary model-bank serialization.

Layout (all integers little-endian):

    magic   4 bytes  "HRMB"
    u32     format version
    str     extractor version (u32 length + utf-8)
    u32     patch size
    u32     m (neighbor count), then m pairs of i32 (dx, dy)
    f64     train scale
    f64 x2  reference box (width, height)
    u32     c (latent components), f64 alpha
    u32     number of models (2 * (m + 1): voting models then label models)
    per model: u32 components, f64 ridge, then 6 matrices
               (weights, scores, coefficients, residual, mean_x, mean_y),
               each as u64 rows, u64 cols, row-major f64 data.

Round-trips are bit-exact.  Writes go through a temp file and rename.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import CorruptModel, IncompatibleModel
from .features import EXTRACTOR_VERSION, PatchGeometry
from .pls import RegressionModel
from .training import ModelBank

MAGIC = b"HRMB"
FORMAT_VERSION = 1


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptModel("model file is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))


def _pack_matrix(a: np.ndarray) -> bytes:
    a = np.ascontiguousarray(np.atleast_2d(np.asarray(a, dtype="<f8")))
    return struct.pack("<QQ", a.shape[0], a.shape[1]) + a.tobytes()


def _read_matrix(r: _Reader) -> np.ndarray:
    rows, cols = r.unpack("QQ")
    data = r.take(rows * cols * 8)
    return np.frombuffer(data, dtype="<f8").reshape(rows, cols).copy()


def _pack_model(m: RegressionModel) -> bytes:
    parts = [struct.pack("<Id", m.components, m.ridge)]
    for a in (m.weights, m.scores, m.coefficients, m.residual, m.mean_x, m.mean_y):
        parts.append(_pack_matrix(a))
    return b"".join(parts)


def _read_model(r: _Reader) -> RegressionModel:
    components, ridge = r.unpack("Id")
    W, T, B, R, mx, my = (_read_matrix(r) for _ in range(6))
    return RegressionModel(W, T, B, R, mx.ravel(), my.ravel(), components, ridge)


def save_model(path, bank: ModelBank, components: int = 0, alpha: float = 0.0) -> None:
    geom = bank.geometry
    ext = bank.extractor_version.encode()
    parts = [
        MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<I", len(ext)),
        ext,
        struct.pack("<II", geom.patch_size, len(geom.neighbor_offsets)),
    ]
    for dx, dy in geom.neighbor_offsets:
        parts.append(struct.pack("<ii", dx, dy))
    parts.append(
        struct.pack(
            "<dddId",
            bank.train_scale,
            bank.reference_box[0],
            bank.reference_box[1],
            components,
            alpha,
        )
    )
    parts.append(struct.pack("<I", len(bank.hrms) + len(bank.lrms)))
    for m in bank.hrms + bank.lrms:
        parts.append(_pack_model(m))

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(parts))
    os.replace(tmp, path)


def load_model(path) -> ModelBank:
    data = Path(path).read_bytes()
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise IncompatibleModel("bad magic; not a model-bank file")
    (version,) = r.unpack("I")
    if version != FORMAT_VERSION:
        raise IncompatibleModel(f"format version {version}, expected {FORMAT_VERSION}")
    (ext_len,) = r.unpack("I")
    extractor = r.take(ext_len).decode()
    if extractor != EXTRACTOR_VERSION:
        raise IncompatibleModel(
            f"extractor version {extractor!r}, this build uses {EXTRACTOR_VERSION!r}"
        )
    patch_size, m = r.unpack("II")
    offsets = tuple(r.unpack("ii") for _ in range(m))
    train_scale, ref_w, ref_h, _components, _alpha = r.unpack("dddId")
    (count,) = r.unpack("I")
    if count % 2 != 0:
        raise CorruptModel("odd model count")
    models = [_read_model(r) for _ in range(count)]
    if r.pos != len(data):
        raise CorruptModel("trailing bytes after model data")

    geom = PatchGeometry(patch_size, offsets)
    half = count // 2
    return ModelBank(
        tuple(models[:half]),
        tuple(models[half:]),
        geom,
        train_scale,
        extractor,
        (ref_w, ref_h),
    )
