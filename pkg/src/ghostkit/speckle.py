"""Pseudothermal speckle synthesis at the detector plane.

Each frame is fully developed speckle: a circular complex Gaussian white
field, low-pass filtered in the spatial-frequency domain by a Gaussian kernel,
then squared. The kernel is chosen so that the *intensity* autocorrelation
falls to 1/e at a lag of ``speckle_radius`` pixels (the complex field
correlation is ``exp(-d**2 / (2 r**2))``). The mean speckle area is roughly
``pi * speckle_radius**2``.

Frames are a pure function of ``(SourceConfig, m)``. The random stream for
frame ``m`` is derived by hashing ``(master_seed, stream, m)`` through
``numpy.random.SeedSequence`` into a PCG64 generator, so frames can be
generated in any order and on any number of threads with identical bytes.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .errors import ConfigError, InsufficientDataError, ShapeError

__all__ = [
    "SourceConfig",
    "IntensityFrame",
    "FrameStatistics",
    "generate_frame",
    "generate_block",
    "frame_statistics",
    "exceedance_fraction",
    "intensity_autocorrelation",
    "worker_count",
]

_MASK64 = (1 << 64) - 1

# first spawn-key word selects the stream family
SPECKLE_STREAM = 0
NOISE_STREAM = 1


@dataclass(frozen=True)
class SourceConfig:
    width: int = 128
    height: int = 128
    speckle_radius: float = 2.0
    mean_intensity: float = 1.0
    master_seed: int = 42

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise ConfigError("width and height must be integers")
        if self.width < 1 or self.height < 1:
            raise ConfigError(f"frame dimensions must be >= 1, got {self.width}x{self.height}")
        if not self.speckle_radius >= 0:
            raise ConfigError(f"speckle_radius must be >= 0, got {self.speckle_radius}")
        if not self.mean_intensity > 0:
            raise ConfigError(f"mean_intensity must be > 0, got {self.mean_intensity}")
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")

    @property
    def shape(self):
        return (int(self.height), int(self.width))

    @property
    def coherence_area(self):
        """Mean speckle area in pixels, ``pi * r**2``."""
        return np.pi * self.speckle_radius**2


@dataclass(frozen=True)
class IntensityFrame:
    data: np.ndarray
    index: int


@lru_cache(maxsize=16)
def _transfer_function(height, width, radius, mean_intensity):
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    H = np.exp(-(np.pi * radius) ** 2 * (fx**2 + fy**2))
    # ortho inverse FFT of unit white noise gives E|u|^2 = mean(|H|^2)
    H *= np.sqrt(mean_intensity / np.mean(H**2))
    H = H.astype(np.complex64)
    H.setflags(write=False)
    return H


def _kernel(config):
    h, w = config.shape
    return _transfer_function(h, w, float(config.speckle_radius), float(config.mean_intensity))


def frame_rng(master_seed, m, stream=SPECKLE_STREAM):
    """Independent generator for frame ``m`` of ``master_seed``."""
    seq = np.random.SeedSequence(int(master_seed) & _MASK64, spawn_key=(int(stream), int(m)))
    return np.random.Generator(np.random.PCG64(seq))


def _white_spectrum(config, m, out):
    # A unitary transform of i.i.d. circular Gaussian noise is again i.i.d.
    # circular Gaussian, so the white field is drawn directly in frequency space.
    # |z|^2 ~ Exp(1) with uniform phase is a unit circular complex Gaussian.
    g = frame_rng(config.master_seed, m)
    shape = config.shape
    amp = np.sqrt(g.standard_exponential(shape, dtype=np.float32))
    phase = g.random(shape, dtype=np.float32)
    phase *= np.float32(2.0 * np.pi)
    out.real = amp * np.cos(phase)
    out.imag = amp * np.sin(phase)


def _speckle_into(config, m, out):
    h, w = config.shape
    spec = np.empty((h, w), np.complex64)
    _white_spectrum(config, m, spec)
    spec *= _kernel(config)
    u = scipy.fft.ifft2(spec, norm="ortho", overwrite_x=True)
    np.square(u.real, out=out)
    out += np.square(u.imag)


def worker_count():
    """Worker threads from ``GHOSTKIT_THREADS`` (default 1)."""
    raw = os.environ.get("GHOSTKIT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"GHOSTKIT_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def generate_frame(config: SourceConfig, m: int) -> IntensityFrame:
    """Speckle realization number ``m``; float32, nonnegative, shape ``config.shape``."""
    out = np.empty(config.shape, np.float32)
    _speckle_into(config, m, out)
    return IntensityFrame(out, int(m))


def generate_block(config: SourceConfig, indices, out=None, workers=None) -> np.ndarray:
    """Frames for each index in ``indices`` as a ``(len, H, W)`` float32 array."""
    indices = np.asarray(indices, dtype=np.int64)
    if out is None:
        out = np.empty((len(indices),) + config.shape, np.float32)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(indices) < 2:
        for i, m in enumerate(indices):
            _speckle_into(config, m, out[i])
    else:
        def work(i):
            _speckle_into(config, indices[i], out[i])

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, range(len(indices))))
    return out


@dataclass(frozen=True)
class FrameStatistics:
    mean: np.ndarray           # per-pixel sample mean
    contrast: np.ndarray       # per-pixel sample std / mean (N-1 denominator)
    pooled_contrast: float     # sqrt(mean per-pixel variance) / mean per-pixel mean
    count: int


def _as_array(frame):
    return frame.data if isinstance(frame, IntensityFrame) else np.asarray(frame)


def frame_statistics(frames) -> FrameStatistics:
    """Per-pixel temporal statistics over an iterable of frames (Welford update)."""
    n = 0
    mean = m2 = None
    for frame in frames:
        x = _as_array(frame).astype(np.float64)
        if mean is None:
            mean = np.zeros_like(x)
            m2 = np.zeros_like(x)
        elif x.shape != mean.shape:
            raise ShapeError(f"frame {n} has shape {x.shape}, expected {mean.shape}")
        n += 1
        delta = x - mean
        mean += delta / n
        m2 += delta * (x - mean)
    if n < 2:
        raise InsufficientDataError(f"frame statistics need at least 2 frames, got {n}")
    var = m2 / (n - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        contrast = np.sqrt(var) / mean
    pooled = float(np.sqrt(var.mean()) / mean.mean())
    return FrameStatistics(mean, contrast, pooled, n)


def exceedance_fraction(frames, factor=3.0, reference=None):
    """Fraction of all pixel values above ``factor * reference``.

    ``reference`` defaults to the grand mean, which costs an extra pass; the
    exponential law predicts ``exp(-factor)``.
    """
    if reference is None:
        total = 0.0
        count = 0
        for frame in frames:
            x = _as_array(frame)
            total += float(x.sum(dtype=np.float64))
            count += x.size
        reference = total / count
    above = 0
    count = 0
    cut = factor * reference
    for frame in frames:
        x = _as_array(frame)
        above += int(np.count_nonzero(x > cut))
        count += x.size
    return above / count


def intensity_autocorrelation(frames, lag, reference=None):
    """Normalized intensity-fluctuation autocorrelation at an integer pixel lag.

    Averages the x- and y-direction periodic correlations of ``I - reference``
    (reference defaults to each frame's spatial mean) over all frames and
    returns the value relative to lag 0.
    """
    c0 = 0.0
    cl = 0.0
    for frame in frames:
        x = _as_array(frame).astype(np.float64)
        d = x - (x.mean() if reference is None else reference)
        c0 += float(np.sum(d * d))
        cl += 0.5 * float(np.sum(d * np.roll(d, lag, axis=0)) + np.sum(d * np.roll(d, lag, axis=1)))
    return cl / c0
