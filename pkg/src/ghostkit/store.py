"""GIFS frame store (version 1), little-endian.

Header (48 bytes)::

    magic "GIFS" | version u16 | flags u16 | width u32 | height u32 | M u64 |
    master_seed u64 | speckle_radius f64 | mean_intensity f64

followed by M records ``m u64, S f64, R f64, T f64`` and, when flag bit 0 is
set, ``width * height`` float32 intensities in row-major order.
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .acquisition import AcquisitionRun, ArrayFrames, iter_frame_blocks
from .errors import PreconditionError, StoreCorruptionError, StoreFormatError
from .speckle import SourceConfig

__all__ = ["MAGIC", "VERSION", "HEADER", "save_store", "load_store", "read_header", "record_dtype"]

MAGIC = b"GIFS"
VERSION = 1
FLAG_FRAMES = 0x1
HEADER = struct.Struct("<4sHHIIQQdd")  # 48 bytes


def record_dtype(height, width, frames=True):
    fields = [("m", "<u8"), ("S", "<f8"), ("R", "<f8"), ("T", "<f8")]
    if frames:
        fields.append(("I", "<f4", (height, width)))
    return np.dtype(fields)


def save_store(run: AcquisitionRun, path, include_frames=None, block=256):
    """Write ``run`` to ``path``. Frames are written when available unless disabled."""
    if run.M < 1:
        raise PreconditionError("cannot save an empty run (M = 0)")
    if include_frames is None:
        include_frames = run.has_frames
    if include_frames:
        run.require_frames()
    cfg = run.config
    h, w = cfg.shape
    header = HEADER.pack(MAGIC, VERSION, FLAG_FRAMES if include_frames else 0, w, h, run.M,
                         int(cfg.master_seed), float(cfg.speckle_radius), float(cfg.mean_intensity))
    dtype = record_dtype(h, w, include_frames)
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    with open(tmp, "wb") as fh:
        fh.write(header)
        indices = np.arange(run.M)
        if include_frames:
            chunks = iter_frame_blocks(run.frames, indices, block)
        else:
            chunks = ((indices[s:s + block], None) for s in range(0, run.M, block))
        for idx, frames in chunks:
            rec = np.zeros(len(idx), dtype)
            rec["m"] = idx
            rec["S"] = run.S[idx]
            rec["R"] = run.R[idx]
            rec["T"] = run.T[idx]
            if frames is not None:
                rec["I"] = frames.reshape(len(idx), h, w)
            fh.write(rec.tobytes())
    os.replace(tmp, path)


def read_header(path):
    with open(path, "rb") as fh:
        raw = fh.read(HEADER.size)
    if len(raw) < HEADER.size:
        raise StoreCorruptionError("truncated header", len(raw))
    magic, version, flags, w, h, M, seed, radius, mean = HEADER.unpack(raw)
    if magic != MAGIC:
        raise StoreFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        if version == VERSION << 8:
            raise StoreFormatError("store header is big-endian; GIFS is little-endian only")
        raise StoreFormatError(f"unsupported store version {version}")
    if flags & ~FLAG_FRAMES:
        raise StoreFormatError(f"unknown flag bits 0x{flags:04x}")
    return {"flags": flags, "width": w, "height": h, "M": M, "master_seed": seed,
            "speckle_radius": radius, "mean_intensity": mean}


def load_store(path) -> AcquisitionRun:
    """Read a store; frames come back as a read-only memmap."""
    path = Path(path)
    hdr = read_header(path)
    has_frames = bool(hdr["flags"] & FLAG_FRAMES)
    h, w, M = hdr["height"], hdr["width"], hdr["M"]
    try:
        config = SourceConfig(w, h, hdr["speckle_radius"], hdr["mean_intensity"], hdr["master_seed"])
    except ValueError as exc:
        raise StoreFormatError(f"invalid header values: {exc}") from exc
    dtype = record_dtype(h, w, has_frames)
    size = path.stat().st_size
    expected = HEADER.size + M * dtype.itemsize
    if size < expected:
        complete = (size - HEADER.size) // dtype.itemsize
        raise StoreCorruptionError(
            f"store truncated: {complete} of {M} records complete", HEADER.size + complete * dtype.itemsize)
    if size > expected:
        raise StoreCorruptionError("trailing bytes after last record", expected)
    if M == 0:
        raise StoreFormatError("store holds no records")
    mm = np.memmap(path, dtype=dtype, mode="r", offset=HEADER.size, shape=(M,))
    m = np.asarray(mm["m"])
    bad = np.flatnonzero(m != np.arange(M, dtype=np.uint64))
    if len(bad):
        raise StoreCorruptionError(f"record {bad[0]} carries frame index {m[bad[0]]}",
                                   HEADER.size + int(bad[0]) * dtype.itemsize)
    S = np.array(mm["S"], dtype=np.float64)
    R = np.array(mm["R"], dtype=np.float64)
    T = np.array(mm["T"], dtype=np.float64)
    frames = ArrayFrames(mm["I"]) if has_frames else None
    return AcquisitionRun(config, None, S, R, T, frames, meta={"path": str(path)})
