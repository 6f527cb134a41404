"""Scoring of reconstructions and SNR-vs-frames sweeps.

Every image goes through the same pipeline: min/max normalization to [0, 1],
256-level histogram equalization, then

    SNR = sum (truth - mean(truth))**2 / sum (recon - truth)**2

against the un-equalized transmission mask.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .acquisition import AcquisitionRun
from .errors import ConfigError, DegenerateImageError, ShapeError
from .recon import METHODS, Plan, ReconImage, ci_registers
from .scene import TransmissionMask
from .thresholding import (
    ThresholdPair,
    balance_registers,
    estimate_mean_transmission,
    exact_mean_transmission,
    partition_frames,
    register_dispersion,
    select_count,
)

__all__ = [
    "normalize_unit",
    "equalize_histogram",
    "snr",
    "score",
    "CountPolicy",
    "ExplicitPolicy",
    "Cell",
    "SnrRow",
    "SnrReport",
    "evaluate",
    "sweep",
    "save_image_png",
    "save_image_pgm",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ["method", "frames_used", "t0_plus", "t0_minus", "k", "snr",
               "delta_t0_mean", "delta_t0_cv", "seed"]


def _data(img):
    return img.data if isinstance(img, (ReconImage, TransmissionMask)) else np.asarray(img, dtype=np.float64)


def normalize_unit(img):
    x = _data(img)
    if not np.all(np.isfinite(x)):
        raise DegenerateImageError("image has non-finite pixels")
    lo, hi = x.min(), x.max()
    if not hi > lo:
        raise DegenerateImageError("constant image cannot be normalized")
    out = (x - lo) / (hi - lo)
    # exact endpoints regardless of rounding
    out[x == lo] = 0.0
    out[x == hi] = 1.0
    if isinstance(img, ReconImage):
        return ReconImage(out, img.method, img.frames_used)
    return out


def equalize_histogram(img, levels=256):
    """CDF equalization on ``levels`` uniform bins of [0, 1].

    Bin ``b`` maps to ``(cdf(b) - cdf(b_min)) / (1 - cdf(b_min))`` where
    ``b_min`` is the lowest occupied bin, so the output spans [0, 1]. An image
    occupying a single bin maps to zeros.
    """
    levels = int(levels)
    if levels < 2:
        raise ConfigError(f"levels must be >= 2, got {levels}")
    x = _data(img)
    bins = np.clip(np.floor(x * levels).astype(np.int64), 0, levels - 1)
    hist = np.bincount(bins.ravel(), minlength=levels)
    cdf = np.cumsum(hist) / bins.size
    c0 = cdf[bins.min()]
    if c0 >= 1.0:
        out = np.zeros_like(x, dtype=np.float64)
    else:
        out = (cdf[bins] - c0) / (1.0 - c0)
    if isinstance(img, ReconImage):
        return ReconImage(out, img.method, img.frames_used)
    return out


def snr(recon, truth) -> float:
    """Signal variance over squared error; ``inf`` flags a perfect reconstruction."""
    r = _data(recon)
    t = _data(truth)
    if r.shape != t.shape:
        raise ShapeError(f"recon {r.shape} and truth {t.shape} differ")
    tbar = math.fsum(t.ravel()) / t.size
    num = math.fsum(((t - tbar) ** 2).ravel())
    den = math.fsum(((r - t) ** 2).ravel())
    if den == 0.0:
        return math.inf
    return num / den


def score(img, truth, levels=256):
    """normalize -> equalize -> SNR; also returns the equalized image."""
    eq = equalize_histogram(normalize_unit(img), levels)
    return snr(eq, truth), eq


# ------------------------------------------------------------------ sweeps


@dataclass(frozen=True)
class CountPolicy:
    """DTTCI frames chosen by count: ``n/2`` most extreme frames per side.

    ``pool`` limits selection to the first ``pool`` frames (default: all).
    ``exact_mean`` measures deviations from the pool mean instead of the
    estimate from the first ``n_est`` frames.
    """
    pool: Optional[int] = None
    n_est: int = 120
    exact_mean: bool = False

    def describe(self):
        return f"count(pool={self.pool or 'all'})"


@dataclass(frozen=True)
class ExplicitPolicy:
    t0_plus: float
    t0_minus: float
    n_est: int = 120
    exact_mean: bool = False
    pool: Optional[int] = None

    def describe(self):
        return f"explicit(+{self.t0_plus:g}/-{self.t0_minus:g})"


@dataclass(frozen=True)
class Cell:
    method: str
    n: int
    policy: object = field(default_factory=CountPolicy)


@dataclass
class SnrRow:
    method: str
    frames_used: int
    snr: float
    t0_plus: Optional[float] = None
    t0_minus: Optional[float] = None
    k: Optional[int] = None
    delta_t0_mean: Optional[float] = None
    delta_t0_cv: Optional[float] = None
    seed: Optional[int] = None
    threshold: str = ""
    degenerate: bool = False
    image: Optional[np.ndarray] = field(default=None, repr=False)

    def csv_values(self):
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)
        return [fmt(getattr(self, c)) for c in CSV_COLUMNS]


@dataclass
class SnrReport:
    rows: list
    scene: str
    seeds: list

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow(row.csv_values())
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def lookup(self, method, frames_used):
        for row in self.rows:
            if row.method == method and row.frames_used == frames_used:
                return row
        raise KeyError((method, frames_used))


def _dttci_registers(run, cell):
    policy = cell.policy
    pool = policy.pool
    if policy.exact_mean:
        t_mean = exact_mean_transmission(run, pool)
    else:
        t_mean = estimate_mean_transmission(run, min(policy.n_est, run.M))
    if isinstance(policy, ExplicitPolicy):
        regs = partition_frames(run, ThresholdPair(t_mean, policy.t0_plus, policy.t0_minus), pool)
        return balance_registers(regs, run)
    if cell.n % 2:
        raise ConfigError(f"DTTCI needs an even frame count (k x 2), got {cell.n}")
    return select_count(run, cell.n // 2, t_mean, pool)


def evaluate(run: AcquisitionRun, cells, truth: TransmissionMask, keep_images=False, levels=256):
    """Reconstruct and score each cell; all cells share two passes over the frames."""
    plan = Plan(run)
    staged = []
    for i, cell in enumerate(cells):
        method = cell.method.upper()
        if method not in METHODS:
            raise ConfigError(f"unknown method {cell.method!r}; choose from {', '.join(METHODS)}")
        if method in ("GI", "NGI", "DGI"):
            needs = {"GI": ("S",), "NGI": ("T",), "DGI": ("S", "R")}[method]
            n = plan.correlations(cell.n, *needs)
            staged.append((method, n, None))
        else:
            regs = ci_registers(run, cell.n) if method == "CI" else _dttci_registers(run, cell)
            plan.registers(i, regs)
            staged.append((method, i, regs))
    result = plan.execute()
    rows = []
    seed = int(run.config.master_seed)
    for cell, (method, key, regs) in zip(cells, staged):
        if method == "GI":
            img = plan.gi(result, key)
        elif method == "NGI":
            img = plan.ngi(result, key)
        elif method == "DGI":
            img = plan.dgi(result, key)
        else:
            img = plan.dttci(result, key, method=method)
        try:
            value, eq = score(img, truth, levels)
            degenerate = False
        except DegenerateImageError:
            value, eq, degenerate = math.nan, None, True
        row = SnrRow(method, img.frames_used, value, seed=seed, degenerate=degenerate,
                     image=eq if keep_images else None)
        if regs is not None:
            thr = regs.thresholds
            row.t0_plus, row.t0_minus, row.k = thr.t0_plus, thr.t0_minus, regs.k
            row.delta_t0_mean, row.delta_t0_cv = register_dispersion(regs, run)
            row.threshold = cell.policy.describe() if method == "DTTCI" else "zero"
        rows.append(row)
    return rows


def sweep(run: AcquisitionRun, methods, frame_counts, truth: TransmissionMask,
          policy=None, image_dir=None, levels=256) -> SnrReport:
    """SNR for every (method, n); rows sorted by (method, n).

    DTTCI at ``n`` uses ``n/2`` frames per register, all other methods the
    first ``n`` frames of the run.
    """
    policy = policy or CountPolicy()
    cells = []
    for method in methods:
        for n in frame_counts:
            cells.append(Cell(method.upper(), int(n), policy))
    cells.sort(key=lambda c: (c.method, c.n))
    rows = evaluate(run, cells, truth, keep_images=image_dir is not None, levels=levels)
    if image_dir is not None:
        image_dir = Path(image_dir)
        image_dir.mkdir(parents=True, exist_ok=True)
        for cell, row in zip(cells, rows):
            if row.image is not None:
                save_image_png(row.image, image_dir / f"{row.method}_{cell.n}.png")
    return SnrReport(rows, truth.name, [int(run.config.master_seed)])


def _to_u8(img):
    x = _data(img)
    return np.round(np.clip(x, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image_png(img, path):
    from PIL import Image

    Image.fromarray(_to_u8(img)).save(path, format="PNG")


def save_image_pgm(img, path):
    from PIL import Image

    Image.fromarray(_to_u8(img)).save(path, format="PPM")
