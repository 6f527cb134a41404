"""Virtual dual-arm acquisition: per-frame bucket S, reference total R, T = S/R.

Both arms see the same speckle realization per exposure. S integrates the
frame against the mask and R integrates the bare frame over the same pixels,
both in binary64, sequentially in row-major order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _accel
from .errors import DegenerateFrameError, MissingFramesError, PreconditionError, ShapeError
from .scene import TransmissionMask
from .speckle import NOISE_STREAM, IntensityFrame, SourceConfig, frame_rng, generate_block

__all__ = [
    "FrameSource",
    "ArrayFrames",
    "GeneratedFrames",
    "FrameRecord",
    "AcquisitionRun",
    "bucket_signal",
    "reference_total",
    "run_acquisition",
    "run_from_frames",
    "iter_frame_blocks",
    "DEFAULT_BLOCK",
    "relative_normalization_gap",
]

DEFAULT_BLOCK = 256


class FrameSource:
    """Random access to the reference frames of a run.

    ``read(indices)`` returns a ``(len(indices), H, W)`` float32 array.
    """

    shape: tuple

    def read(self, indices) -> np.ndarray:
        raise NotImplementedError


class ArrayFrames(FrameSource):
    """Frames held in an array (in memory or a read-only memmap)."""

    def __init__(self, frames):
        frames = np.asarray(frames) if not isinstance(frames, np.ndarray) else frames
        if frames.ndim != 3:
            raise ShapeError(f"frame array must be (M, H, W), got {frames.shape}")
        self.frames = frames
        self.shape = frames.shape[1:]

    def __len__(self):
        return self.frames.shape[0]

    def read(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        if len(indices) and indices[-1] - indices[0] == len(indices) - 1 and np.all(np.diff(indices) == 1):
            block = self.frames[indices[0]:indices[-1] + 1]
        else:
            block = self.frames[indices]
        return np.ascontiguousarray(block, dtype=np.float32)


class GeneratedFrames(FrameSource):
    """Frames regenerated on demand from the source config (plus detector noise).

    ``cache`` keeps frames ``0 .. cache-1`` in memory once generated.
    """

    def __init__(self, config: SourceConfig, detector_noise: float = 0.0, cache: int = 0):
        self.config = config
        self.detector_noise = float(detector_noise)
        self.shape = config.shape
        self.cache = int(cache)
        self._store = np.empty((self.cache,) + config.shape, np.float32) if self.cache else None
        self._filled = np.zeros(self.cache, bool)

    def _generate(self, indices):
        block = generate_block(self.config, indices)
        if self.detector_noise > 0:
            for i, m in enumerate(indices):
                block[i] = _noisy(block[i], self.config, m, self.detector_noise, arm=0)
        return block

    def read(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        if not self.cache:
            return self._generate(indices)
        cached = indices < self.cache
        hit = np.zeros(len(indices), bool)
        hit[cached] = self._filled[indices[cached]]
        block = np.empty((len(indices),) + self.shape, np.float32)
        if hit.any():
            block[hit] = self._store[indices[hit]]
        if not hit.all():
            miss = np.flatnonzero(~hit)
            block[miss] = self._generate(indices[miss])
            keep = miss[indices[miss] < self.cache]
            self._store[indices[keep]] = block[keep]
            self._filled[indices[keep]] = True
        return block

    def store(self, indices, frames):
        """Seed the cache with externally generated frames."""
        if not self.cache:
            return
        indices = np.asarray(indices, dtype=np.int64)
        sel = indices < self.cache
        self._store[indices[sel]] = frames[sel].reshape((-1,) + self.shape)
        self._filled[indices[sel]] = True


def _noisy(frame, config, m, sigma, arm):
    """Additive Gaussian detector noise (std = sigma * mean intensity), clipped at 0."""
    g = frame_rng(config.master_seed, m, stream=NOISE_STREAM + arm)
    noise = g.standard_normal(frame.shape, dtype=np.float32)
    noise *= np.float32(sigma * config.mean_intensity)
    return np.maximum(frame + noise, np.float32(0.0))


@dataclass(frozen=True)
class FrameRecord:
    m: int
    S: float
    R: float
    T: float
    frame: Optional[np.ndarray] = None


@dataclass
class AcquisitionRun:
    """Scalars for M exposures plus (optionally) access to the frames.

    ``S``, ``R`` and ``T`` are float64 arrays of length M ordered by frame
    index ``m = 0 .. M-1``.
    """

    config: SourceConfig
    mask: Optional[TransmissionMask]
    S: np.ndarray
    R: np.ndarray
    T: np.ndarray
    frames: Optional[FrameSource] = None
    detector_noise: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def M(self):
        return len(self.T)

    @property
    def shape(self):
        return self.config.shape

    @property
    def has_frames(self):
        return self.frames is not None

    def require_frames(self):
        if self.frames is None:
            raise MissingFramesError("this run has no reference frames (scalar-only store)")
        return self.frames

    def record(self, m) -> FrameRecord:
        frame = None
        if self.frames is not None:
            frame = self.frames.read([m])[0]
        return FrameRecord(int(m), float(self.S[m]), float(self.R[m]), float(self.T[m]), frame)

    @property
    def records(self):
        return [FrameRecord(m, float(s), float(r), float(t))
                for m, (s, r, t) in enumerate(zip(self.S, self.R, self.T))]


def _frame_array(frame):
    data = frame.data if isinstance(frame, IntensityFrame) else frame
    return np.ascontiguousarray(data, dtype=np.float32)


def bucket_signal(frame, mask: TransmissionMask) -> float:
    """S = sum over pixels of I(x) T(x)."""
    data = _frame_array(frame)
    if data.shape != mask.shape:
        raise ShapeError(f"frame {data.shape} and mask {mask.shape} differ")
    S, _ = _accel.frame_sums(data.reshape(1, -1), mask.data.reshape(-1))
    return float(S[0])


def reference_total(frame) -> float:
    """R = sum over the same pixels of I(x)."""
    data = _frame_array(frame)
    _, R = _accel.frame_sums(data.reshape(1, -1), np.ones(data.size))
    R = float(R[0])
    if not R > 0:
        index = frame.index if isinstance(frame, IntensityFrame) else None
        raise DegenerateFrameError("reference total is zero", index)
    return R


def iter_frame_blocks(source: FrameSource, indices, block=DEFAULT_BLOCK):
    """Yield ``(idx, frames)`` with ``frames`` shaped ``(len(idx), N)`` float32."""
    indices = np.asarray(indices, dtype=np.int64)
    for start in range(0, len(indices), block):
        idx = indices[start:start + block]
        frames = source.read(idx)
        yield idx, frames.reshape(len(idx), -1)


def run_acquisition(config: SourceConfig, mask: TransmissionMask, M: int,
                    keep_frames=False, detector_noise=0.0, block=DEFAULT_BLOCK,
                    cache_frames=0) -> AcquisitionRun:
    """Simulate M exposures.

    With ``keep_frames`` the frames are held in memory; otherwise the run keeps
    a generator and frames are recomputed bit-identically when needed, except
    the first ``cache_frames`` which stay in memory.
    ``detector_noise`` adds independent Gaussian noise to the object-arm and
    reference-arm cameras (std as a fraction of the mean intensity).
    """
    M = int(M)
    if M < 1:
        raise PreconditionError(f"M must be >= 1, got {M}")
    if mask.shape != config.shape:
        raise ShapeError(f"mask {mask.shape} does not match frames {config.shape}")
    source = GeneratedFrames(config, detector_noise, cache=0 if keep_frames else min(cache_frames, M))
    clean = GeneratedFrames(config)
    t = mask.data.reshape(-1)
    S = np.empty(M)
    R = np.empty(M)
    kept = np.empty((M,) + config.shape, np.float32) if keep_frames else None
    for idx, frames in iter_frame_blocks(clean, np.arange(M), block):
        if detector_noise > 0:
            obj = np.stack([_noisy(f.reshape(config.shape), config, m, detector_noise, arm=1).reshape(-1)
                            for f, m in zip(frames, idx)])
            ref = np.stack([_noisy(f.reshape(config.shape), config, m, detector_noise, arm=0).reshape(-1)
                            for f, m in zip(frames, idx)])
            S[idx], _ = _accel.frame_sums(obj, t)
            _, R[idx] = _accel.frame_sums(ref, t)
            frames = ref
        else:
            S[idx], R[idx] = _accel.frame_sums(frames, t)
        if kept is not None:
            kept[idx] = frames.reshape((len(idx),) + config.shape)
        else:
            source.store(idx, frames)
    bad = np.flatnonzero(~(R > 0))
    if len(bad):
        raise DegenerateFrameError(f"frame {bad[0]} has zero reference total", int(bad[0]))
    T = S / R
    frames = ArrayFrames(kept) if kept is not None else source
    return AcquisitionRun(config, mask, S, R, T, frames, float(detector_noise))


def run_from_frames(frames, mask: TransmissionMask, config: Optional[SourceConfig] = None) -> AcquisitionRun:
    """Acquisition over explicitly supplied frames ``(M, H, W)`` (cast to float32)."""
    frames = np.ascontiguousarray(frames, dtype=np.float32)
    if frames.ndim != 3 or frames.shape[0] < 1:
        raise ShapeError(f"frames must be (M, H, W) with M >= 1, got {frames.shape}")
    if frames.shape[1:] != mask.shape:
        raise ShapeError(f"frames {frames.shape[1:]} and mask {mask.shape} differ")
    if np.any(frames < 0):
        raise PreconditionError("intensities must be nonnegative")
    if config is None:
        config = SourceConfig(width=frames.shape[2], height=frames.shape[1])
    S, R = _accel.frame_sums(frames.reshape(len(frames), -1), mask.data.reshape(-1))
    bad = np.flatnonzero(~(R > 0))
    if len(bad):
        raise DegenerateFrameError(f"frame {bad[0]} has zero reference total", int(bad[0]))
    return AcquisitionRun(config, mask, S, R, S / R, ArrayFrames(frames))


def relative_normalization_gap(run: AcquisitionRun, m_limit=None) -> float:
    """|<S/R> - <S>/<R>| / <S/R> over the first ``m_limit`` frames."""
    n = run.M if m_limit is None else int(m_limit)
    t_mean = math.fsum(run.T[:n]) / n
    ratio = math.fsum(run.S[:n]) / math.fsum(run.R[:n])
    return abs(t_mean - ratio) / t_mean
