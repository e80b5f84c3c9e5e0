"""Splat bundle file: magic "TWSP", u32 version, u32 count, little-endian records."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .model import SplatModel

MAGIC = b"TWSP"
VERSION = 1


class SplatBundleError(ValueError):
    pass


def _record_dtype(n_bases: int) -> np.dtype:
    return np.dtype(
        [
            ("face_id", "<u4"),
            ("bary", "<f4", (2,)),
            ("delta", "<f4"),
            ("tilt", "<f4"),
            ("log_scales", "<f4", (3,)),
            ("opacity_logit", "<f4"),
            ("sh", "<f4", (3 * n_bases,)),
        ]
    )


def dump_splats(model: SplatModel) -> bytes:
    n = len(model)
    rec = np.zeros(n, _record_dtype(model.n_bases))
    rec["face_id"] = model.face_id.astype(np.uint32)
    rec["bary"] = model.bary
    rec["delta"] = model.delta
    rec["tilt"] = model.tilt
    rec["log_scales"] = model.log_scales
    rec["opacity_logit"] = model.opacity_logit
    rec["sh"] = model.sh.reshape(n, -1)
    return MAGIC + struct.pack("<II", VERSION, n) + rec.tobytes()


def parse_splats(data: bytes) -> SplatModel:
    if data[:4] != MAGIC:
        raise SplatBundleError("not a splat bundle (bad magic)")
    version, n = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise SplatBundleError(f"unsupported splat bundle version {version}")
    body = data[12:]
    if n == 0:
        return SplatModel(
            np.zeros(0, np.int32), np.zeros((0, 2)), np.zeros(0), np.zeros(0),
            np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3, 16)), sh_degree=3,
        )
    if len(body) % n != 0:
        raise SplatBundleError("splat bundle truncated")
    rec_size = len(body) // n
    sh_floats = (rec_size - (4 + 8 + 4 + 4 + 12 + 4)) // 4
    if sh_floats % 3 != 0:
        raise SplatBundleError(f"record size {rec_size} is not a valid splat layout")
    n_bases = sh_floats // 3
    degree = int(np.sqrt(n_bases)) - 1
    if (degree + 1) ** 2 != n_bases:
        raise SplatBundleError(f"SH coefficient count {n_bases} is not square")
    rec = np.frombuffer(body, _record_dtype(n_bases), count=n)
    return SplatModel(
        rec["face_id"].astype(np.int32),
        rec["bary"].astype(np.float64),
        rec["delta"].astype(np.float64),
        rec["tilt"].astype(np.float64),
        rec["log_scales"].astype(np.float64),
        rec["opacity_logit"].astype(np.float64),
        rec["sh"].astype(np.float64).reshape(n, 3, n_bases),
        sh_degree=degree,
    )


def save_splats(model: SplatModel, path: str | Path) -> None:
    Path(path).write_bytes(dump_splats(model))


def load_splats(path: str | Path) -> SplatModel:
    return parse_splats(Path(path).read_bytes())
