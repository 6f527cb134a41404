"""Double-threshold frame selection.

Frames are classified by ``dT = T - t_mean_est``: register A collects
``dT > t0_plus``, register B collects ``dT < -t0_minus``; frames on a cut are
dropped. Balancing trims the larger register by deleting the entries closest
to the mean (smallest ``|dT|``, larger frame index first on ties).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .acquisition import AcquisitionRun
from .errors import ConfigError, EmptyRegisterError, InsufficientFramesError, PreconditionError

__all__ = [
    "ThresholdPair",
    "Registers",
    "estimate_mean_transmission",
    "exact_mean_transmission",
    "deviations",
    "partition_frames",
    "balance_registers",
    "thresholds_for_count",
    "select_count",
    "register_dispersion",
]


@dataclass(frozen=True)
class ThresholdPair:
    t_mean_est: float
    t0_plus: float
    t0_minus: float

    def __post_init__(self):
        if not (self.t0_plus >= 0 and self.t0_minus >= 0):
            raise ConfigError(f"threshold magnitudes must be >= 0, got +{self.t0_plus} / -{self.t0_minus}")

    @property
    def upper(self):
        return self.t_mean_est + self.t0_plus

    @property
    def lower(self):
        return self.t_mean_est - self.t0_minus


@dataclass(frozen=True)
class Registers:
    A: np.ndarray
    B: np.ndarray
    thresholds: ThresholdPair
    pool: int

    @property
    def balanced(self):
        return len(self.A) == len(self.B)

    @property
    def k(self):
        return len(self.A) if self.balanced else None


def _pool(run, pool):
    n = run.M if pool is None else int(pool)
    if not 1 <= n <= run.M:
        raise PreconditionError(f"pool must be in [1, {run.M}], got {pool}")
    return n


def estimate_mean_transmission(run: AcquisitionRun, n_est: int) -> float:
    """Arithmetic mean of T over the first ``n_est`` records."""
    n_est = int(n_est)
    if not 1 <= n_est <= run.M:
        raise PreconditionError(f"n_est must be in [1, {run.M}], got {n_est}")
    return math.fsum(run.T[:n_est]) / n_est


def exact_mean_transmission(run: AcquisitionRun, pool=None) -> float:
    return estimate_mean_transmission(run, _pool(run, pool))


def deviations(run: AcquisitionRun, t_mean_est: float, pool=None) -> np.ndarray:
    return run.T[:_pool(run, pool)] - t_mean_est


def partition_frames(run: AcquisitionRun, thr: ThresholdPair, pool=None) -> Registers:
    n = _pool(run, pool)
    dT = deviations(run, thr.t_mean_est, n)
    A = np.flatnonzero(dT > thr.t0_plus)
    B = np.flatnonzero(dT < -thr.t0_minus)
    if len(A) == 0:
        raise EmptyRegisterError("A")
    if len(B) == 0:
        raise EmptyRegisterError("B")
    return Registers(A, B, thr, n)


def _trim(indices, dT, keep):
    # sort the deletion order: smallest |dT| first, larger m first on ties
    order = np.lexsort((-indices, np.abs(dT[indices])))
    drop = indices[order[:len(indices) - keep]]
    return np.setdiff1d(indices, drop, assume_unique=True)


def balance_registers(regs: Registers, run: AcquisitionRun) -> Registers:
    if len(regs.A) == 0 or len(regs.B) == 0:
        raise EmptyRegisterError("A" if len(regs.A) == 0 else "B")
    if regs.balanced:
        return regs
    dT = deviations(run, regs.thresholds.t_mean_est, regs.pool)
    k = min(len(regs.A), len(regs.B))
    A, B = regs.A, regs.B
    if len(A) > k:
        A = _trim(A, dT, k)
    else:
        B = _trim(B, dT, k)
    return Registers(A, B, regs.thresholds, regs.pool)


def _cut(values, k):
    """Threshold strictly below the k-th largest of ``values`` and at/above the next."""
    if k < len(values):
        hi, lo = values[k - 1], values[k]
    else:
        hi, lo = values[k - 1], 0.0
    if not hi > lo:
        raise PreconditionError(f"tied deviations at rank {k}; no threshold separates them")
    mid = lo + (hi - lo) / 2
    return lo if mid >= hi else mid


def thresholds_for_count(run: AcquisitionRun, k: int, t_mean_est: float, pool=None) -> ThresholdPair:
    """Thresholds that put exactly ``k`` frames on each side.

    The cut sits midway between the k-th and (k+1)-th most extreme deviation
    on each side (between the last one and zero when ``k`` uses the whole side).
    """
    dT = deviations(run, t_mean_est, pool)
    pos = np.sort(dT[dT > 0])[::-1]
    neg = np.sort(-dT[dT < 0])[::-1]
    k = int(k)
    if k < 1 or k > len(pos) or k > len(neg):
        raise InsufficientFramesError(k, len(pos), len(neg))
    return ThresholdPair(float(t_mean_est), float(_cut(pos, k)), float(_cut(neg, k)))


def select_count(run: AcquisitionRun, k: int, t_mean_est: float, pool=None) -> Registers:
    """thresholds_for_count followed by partition_frames."""
    thr = thresholds_for_count(run, k, t_mean_est, pool)
    regs = partition_frames(run, thr, pool)
    assert len(regs.A) == k and len(regs.B) == k
    return regs


def register_dispersion(regs: Registers, run: AcquisitionRun):
    """Mean and coefficient of variation of ``|dT| - T0`` over both registers."""
    dT = deviations(run, regs.thresholds.t_mean_est, regs.pool)
    v = np.concatenate([np.abs(dT[regs.A]) - regs.thresholds.t0_plus,
                        np.abs(dT[regs.B]) - regs.thresholds.t0_minus])
    mean = float(v.mean())
    cv = float(v.std() / mean) if mean > 0 else float("nan")
    return mean, cv
